//! Denoisers: the ε-prediction interface and two analytic implementations.
//!
//! The reconstruction stack never trains a network; it uses denoisers whose
//! behavior is known in closed form. [`GaussianMmseDenoiser`] is exact for
//! a Gaussian prior, which makes it the reference point for solver tests.
//! [`TvProxDenoiser`] wraps a total-variation proximal step, the classical
//! edge-preserving prior, for end-to-end image runs.

use alloc::vec;
use alloc::vec::Vec;

// Float math comes from libm in no_std builds; test builds link std,
// whose inherent methods shadow the trait and leave it "unused".
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, SymEig};
use crate::schedule::NoiseSchedule;
use crate::vecn;
#[allow(unused_imports)]
use num_traits::Float;

/// Noise-prediction interface: estimates the ε that produced `x_t`.
///
/// Implementations are deterministic per `(x_t, t)` and must return a
/// vector of the input's length.
pub trait Denoiser {
    fn predict_eps(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>>;
}

impl<T: Denoiser + ?Sized> Denoiser for &T {
    fn predict_eps(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        (**self).predict_eps(x_t, t)
    }
}

/// Exact MMSE denoiser for the prior x₀ ~ N(mu, Sigma).
///
/// With x_t = √ᾱ_t x₀ + √(1−ᾱ_t) ε, the posterior mean is
/// E[x₀|x_t] = mu + √ᾱ_t Σ (ᾱ_t Σ + (1−ᾱ_t)I)⁻¹ (x_t − √ᾱ_t mu);
/// ε follows by inverting the forward relation. Sigma is factored once at
/// construction, so each call costs two dense matrix-vector products.
pub struct GaussianMmseDenoiser {
    mu: Vec<f64>,
    eig: SymEig,
    sched: NoiseSchedule,
}

impl GaussianMmseDenoiser {
    /// `sigma` is the n×n prior covariance, row-major, symmetric PD.
    pub fn new(mu: Vec<f64>, sigma: &[f64], sched: NoiseSchedule) -> Result<Self> {
        let n = mu.len();
        if sigma.len() != n * n {
            return Err(Error::dims(
                "GaussianMmseDenoiser sigma",
                n * n,
                sigma.len(),
            ));
        }
        let eig = jacobi_eigen(sigma, n)?;
        let min = eig.eigenvalues.first().copied().unwrap_or(0.0);
        if min <= 1e-12 {
            return Err(Error::SingularMatrix(
                "prior covariance is not positive definite",
            ));
        }
        Ok(Self { mu, eig, sched })
    }

    /// E[x₀ | x_t] under the Gaussian prior.
    pub fn posterior_mean(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        let n = self.mu.len();
        if x_t.len() != n {
            return Err(Error::dims("posterior_mean x_t", n, x_t.len()));
        }
        if t < 1 || t > self.sched.t_max() {
            return Err(Error::InvalidSchedule(alloc::format!(
                "posterior_mean: t={t} outside 1..={}",
                self.sched.t_max()
            )));
        }
        let bar = self.sched.alpha_bar(t);
        let root = bar.sqrt();
        let centered: Vec<f64> = x_t
            .iter()
            .zip(&self.mu)
            .map(|(x, m)| x - root * m)
            .collect();
        let mut coeffs = self.eig.to_eigenbasis(&centered);
        for (c, lam) in coeffs.iter_mut().zip(&self.eig.eigenvalues) {
            *c *= root * lam / (bar * lam + (1.0 - bar));
        }
        let gain = self.eig.from_eigenbasis(&coeffs);
        Ok(self.mu.iter().zip(&gain).map(|(m, g)| m + g).collect())
    }
}

impl Denoiser for GaussianMmseDenoiser {
    fn predict_eps(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        let mean = self.posterior_mean(x_t, t)?;
        let bar = self.sched.alpha_bar(t);
        let root = bar.sqrt();
        let noise_root = (1.0 - bar).sqrt();
        if noise_root <= 0.0 {
            return Err(Error::InvalidSchedule(alloc::format!(
                "predict_eps: no noise at t={t}"
            )));
        }
        Ok(x_t
            .iter()
            .zip(&mean)
            .map(|(x, m)| (x - root * m) / noise_root)
            .collect())
    }
}

/// MMSE denoiser for the isotropic prior x₀ ~ N(mu, var·I).
///
/// Same posterior as [`GaussianMmseDenoiser`] with Sigma = var·I, where the
/// gain collapses to one scalar per timestep, so a call is O(n). This is
/// the variant to reach for on full-size images; the general one factors
/// its covariance and does not scale past toy dimensions.
pub struct IsotropicGaussianDenoiser {
    mu: Vec<f64>,
    var: f64,
    sched: NoiseSchedule,
}

impl IsotropicGaussianDenoiser {
    pub fn new(mu: Vec<f64>, var: f64, sched: NoiseSchedule) -> Result<Self> {
        if var <= 0.0 || !var.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!(
                "prior variance must be positive and finite, got {var}"
            )));
        }
        Ok(Self { mu, var, sched })
    }

    /// E[x₀ | x_t]: mu + √ᾱ·var/(ᾱ·var + 1−ᾱ) · (x_t − √ᾱ·mu).
    pub fn posterior_mean(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        let n = self.mu.len();
        if x_t.len() != n {
            return Err(Error::dims("posterior_mean x_t", n, x_t.len()));
        }
        if t < 1 || t > self.sched.t_max() {
            return Err(Error::InvalidSchedule(alloc::format!(
                "posterior_mean: t={t} outside 1..={}",
                self.sched.t_max()
            )));
        }
        let bar = self.sched.alpha_bar(t);
        let root = bar.sqrt();
        let gain = root * self.var / (bar * self.var + (1.0 - bar));
        Ok(self
            .mu
            .iter()
            .zip(x_t)
            .map(|(m, x)| m + gain * (x - root * m))
            .collect())
    }
}

impl Denoiser for IsotropicGaussianDenoiser {
    fn predict_eps(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        let mean = self.posterior_mean(x_t, t)?;
        let bar = self.sched.alpha_bar(t);
        let root = bar.sqrt();
        let noise_root = (1.0 - bar).sqrt();
        if noise_root <= 0.0 {
            return Err(Error::InvalidSchedule(alloc::format!(
                "predict_eps: no noise at t={t}"
            )));
        }
        Ok(x_t
            .iter()
            .zip(&mean)
            .map(|(x, m)| (x - root * m) / noise_root)
            .collect())
    }
}

/// Anisotropic TV proximal map, prox_{s·TV}(g), by projected dual ascent.
///
/// Solves min_u ½‖u−g‖² + s·Σ(|∂ₓu| + |∂ᵧu|) with forward differences and
/// Neumann boundaries. The dual variable is projected onto the ∞-ball of
/// radius s each step; step size 1/8 bounds the discrete divergence norm.
pub fn tv_prox(g: &[f64], side: usize, strength: f64, iters: usize) -> Result<Vec<f64>> {
    if g.len() != side * side {
        return Err(Error::dims("tv_prox g", side * side, g.len()));
    }
    if strength < 0.0 {
        return Err(Error::InvalidConfig("tv_prox strength must be >= 0".into()));
    }
    if strength == 0.0 || iters == 0 {
        return Ok(g.to_vec());
    }
    let n = side * side;
    let mut px = vec![0.0f64; n];
    let mut py = vec![0.0f64; n];
    let mut u = g.to_vec();
    let tau = 0.125;
    for _ in 0..iters {
        // p += tau * grad(u), then clamp into the box; u = g + div p.
        for r in 0..side {
            for c in 0..side {
                let i = r * side + c;
                let gx = if c + 1 < side { u[i + 1] - u[i] } else { 0.0 };
                let gy = if r + 1 < side {
                    u[i + side] - u[i]
                } else {
                    0.0
                };
                px[i] = (px[i] + tau * gx).clamp(-strength, strength);
                py[i] = (py[i] + tau * gy).clamp(-strength, strength);
            }
        }
        for r in 0..side {
            for c in 0..side {
                let i = r * side + c;
                let mut div = 0.0;
                if c + 1 < side {
                    div += px[i];
                }
                if c > 0 {
                    div -= px[i - 1];
                }
                if r + 1 < side {
                    div += py[i];
                }
                if r > 0 {
                    div -= py[i - side];
                }
                u[i] = g[i] + div;
            }
        }
    }
    Ok(u)
}

/// Anisotropic TV seminorm Σ(|∂ₓu| + |∂ᵧu|), forward differences.
pub fn tv_seminorm(u: &[f64], side: usize) -> f64 {
    let mut s = 0.0;
    for r in 0..side {
        for c in 0..side {
            let i = r * side + c;
            if c + 1 < side {
                s += (u[i + 1] - u[i]).abs();
            }
            if r + 1 < side {
                s += (u[i + side] - u[i]).abs();
            }
        }
    }
    s
}

/// Denoiser backed by [`tv_prox`]: the implied clean image is the TV
/// proximal of x_t/√ᾱ_t with strength lambda_tv·√(1−ᾱ_t).
pub struct TvProxDenoiser {
    side: usize,
    lambda_tv: f64,
    inner_iters: usize,
    sched: NoiseSchedule,
}

impl TvProxDenoiser {
    pub fn new(
        side: usize,
        lambda_tv: f64,
        inner_iters: usize,
        sched: NoiseSchedule,
    ) -> Result<Self> {
        if lambda_tv <= 0.0 {
            return Err(Error::InvalidConfig("lambda_tv must be > 0".into()));
        }
        Ok(Self {
            side,
            lambda_tv,
            inner_iters,
            sched,
        })
    }

    /// The x₀ estimate behind [`Denoiser::predict_eps`].
    pub fn estimate_x0(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        if x_t.len() != self.side * self.side {
            return Err(Error::dims(
                "TvProxDenoiser x_t",
                self.side * self.side,
                x_t.len(),
            ));
        }
        if t < 1 || t > self.sched.t_max() {
            return Err(Error::InvalidSchedule(alloc::format!(
                "estimate_x0: t={t} outside 1..={}",
                self.sched.t_max()
            )));
        }
        let bar = self.sched.alpha_bar(t);
        let descaled = vecn::scale(1.0 / bar.sqrt(), x_t);
        let strength = self.lambda_tv * (1.0 - bar).sqrt();
        tv_prox(&descaled, self.side, strength, self.inner_iters)
    }
}

impl Denoiser for TvProxDenoiser {
    fn predict_eps(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        let x0 = self.estimate_x0(x_t, t)?;
        let bar = self.sched.alpha_bar(t);
        let root = bar.sqrt();
        let noise_root = (1.0 - bar).sqrt();
        Ok(x_t
            .iter()
            .zip(&x0)
            .map(|(x, e)| (x - root * e) / noise_root)
            .collect())
    }
}
