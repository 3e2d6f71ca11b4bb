//! Dense vector arithmetic on `&[f64]` slices.
//!
//! Images, sinograms, and CE states are all flat `f64` buffers; everything
//! here treats them as plain vectors. Checked entry points return
//! [`Error::DimensionMismatch`] on length disagreement; the `*_unchecked`
//! variants are for hot loops where lengths were validated at construction.

use alloc::vec;
use alloc::vec::Vec;

// Float math comes from libm in no_std builds; test builds link std,
// whose inherent methods shadow the trait and leave it "unused".
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Inner product Σ aᵢbᵢ.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims("dot", a.len(), b.len()));
    }
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm ‖a‖₂.
pub fn norm2(a: &[f64]) -> f64 {
    dot_unchecked(a, a).sqrt()
}

/// ‖a − b‖₂.
pub fn dist2(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims("dist2", a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// y ← y + alpha·x.
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// out ← a + alpha·b, allocating.
pub(crate) fn add_scaled(a: &[f64], alpha: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + alpha * y).collect()
}

/// Componentwise a − b.
pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// alpha·a, allocating.
pub(crate) fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

/// All entries finite (no NaN/Inf).
pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Zero vector of length n.
pub fn zeros(n: usize) -> Vec<f64> {
    vec![0.0; n]
}
