//! Iterative radix-2 FFT on split real/imaginary buffers.
//!
//! Only power-of-two lengths are supported; the ramp filter pads rows up to
//! the next power of two anyway, so this covers everything the baselines
//! need without pulling in an FFT dependency that requires std.

// Float math comes from libm in no_std builds; test builds link std,
// whose inherent methods shadow the trait and leave it "unused".
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

fn check_len(re: &[f64], im: &[f64]) -> Result<usize> {
    let n = re.len();
    if im.len() != n {
        return Err(Error::dims("fft im", n, im.len()));
    }
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidConfig(alloc::format!(
            "fft length {n} is not a power of two"
        )));
    }
    Ok(n)
}

fn bit_reverse_permute(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    let mut j = 0usize;
    for i in 0..n {
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
        let mut m = n >> 1;
        while m >= 1 && j & m != 0 {
            j ^= m;
            m >>= 1;
        }
        j |= m;
    }
}

fn transform(re: &mut [f64], im: &mut [f64], sign: f64) {
    let n = re.len();
    bit_reverse_permute(re, im);
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * core::f64::consts::PI / len as f64;
        let (w_im, w_re) = ang.sin_cos();
        let mut start = 0;
        while start < n {
            let mut cur_re = 1.0;
            let mut cur_im = 0.0;
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let t_re = re[b] * cur_re - im[b] * cur_im;
                let t_im = re[b] * cur_im + im[b] * cur_re;
                re[b] = re[a] - t_re;
                im[b] = im[a] - t_im;
                re[a] += t_re;
                im[a] += t_im;
                let next_re = cur_re * w_re - cur_im * w_im;
                cur_im = cur_re * w_im + cur_im * w_re;
                cur_re = next_re;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// In-place forward DFT with the e^{-2πi k n / N} convention.
pub fn fft(re: &mut [f64], im: &mut [f64]) -> Result<()> {
    check_len(re, im)?;
    transform(re, im, -1.0);
    Ok(())
}

/// In-place inverse DFT, scaled by 1/N so `ifft(fft(x)) == x`.
pub fn ifft(re: &mut [f64], im: &mut [f64]) -> Result<()> {
    let n = check_len(re, im)?;
    transform(re, im, 1.0);
    let inv = 1.0 / n as f64;
    for v in re.iter_mut() {
        *v *= inv;
    }
    for v in im.iter_mut() {
        *v *= inv;
    }
    Ok(())
}
