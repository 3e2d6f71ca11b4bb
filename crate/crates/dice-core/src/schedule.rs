//! DDPM noise-schedule arithmetic.
//!
//! A [`NoiseSchedule`] holds β, ᾱ and derived quantities for timesteps
//! 1..=T, with the index-0 convention ᾱ₀ = 1 so the final renoising step
//! returns the clean estimate exactly. Forward diffusion and ε→x₀
//! conversion are exact mutual inverses given the same noise vector.

use alloc::vec::Vec;

// Float math comes from libm in no_std builds; test builds link std,
// whose inherent methods shadow the trait and leave it "unused".
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// How betas are laid out over 1..=T.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    /// β evenly spaced on [β₁, β_T].
    Linear,
    /// Nichol–Dhariwal squared-cosine ᾱ with s = 0.008; the derived betas
    /// are clipped into [β₁, β_T] and ᾱ recomputed from the clipped betas.
    Cosine,
}

/// Variance schedule over timesteps 0..=T (index 0 is the ᾱ₀ = 1 sentinel).
#[derive(Clone, Debug)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    /// beta[0] = 0 sentinel, beta[1..=T] in (0, 1).
    beta: Vec<f64>,
    /// alpha_bar[t] = Π_{i≤t} (1 − beta[i]); alpha_bar[0] = 1.
    alpha_bar: Vec<f64>,
}

/// Builds a schedule; see [`ScheduleKind`] for the two layouts.
pub fn make_schedule(
    t_max: usize,
    kind: ScheduleKind,
    beta1: f64,
    beta_t: f64,
) -> Result<NoiseSchedule> {
    if t_max < 1 {
        return Err(Error::InvalidSchedule("T must be >= 1".into()));
    }
    if !(beta1 > 0.0 && beta1 <= beta_t && beta_t < 1.0) {
        return Err(Error::InvalidSchedule(alloc::format!(
            "need 0 < beta1 <= betaT < 1, got beta1={beta1}, betaT={beta_t}"
        )));
    }

    let mut beta = Vec::with_capacity(t_max + 1);
    beta.push(0.0);
    match kind {
        ScheduleKind::Linear => {
            if t_max == 1 {
                beta.push(beta1);
            } else {
                let step = (beta_t - beta1) / (t_max - 1) as f64;
                for t in 1..=t_max {
                    beta.push(beta1 + step * (t - 1) as f64);
                }
                // Pin the endpoints: the increment accumulates roundoff.
                beta[1] = beta1;
                beta[t_max] = beta_t;
            }
        }
        ScheduleKind::Cosine => {
            let s = 0.008;
            let f = |t: f64| {
                let arg = (t / t_max as f64 + s) / (1.0 + s) * core::f64::consts::FRAC_PI_2;
                arg.cos() * arg.cos()
            };
            let f0 = f(0.0);
            let mut prev = 1.0;
            for t in 1..=t_max {
                let bar = f(t as f64) / f0;
                let b = (1.0 - bar / prev).clamp(beta1, beta_t);
                beta.push(b);
                prev = bar;
            }
        }
    }

    let mut alpha_bar = Vec::with_capacity(t_max + 1);
    alpha_bar.push(1.0);
    let mut prod = 1.0;
    for t in 1..=t_max {
        prod *= 1.0 - beta[t];
        alpha_bar.push(prod);
    }

    let sched = NoiseSchedule {
        kind,
        beta,
        alpha_bar,
    };
    sched.validate()?;
    Ok(sched)
}

impl NoiseSchedule {
    /// Timestep count T.
    pub fn t_max(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// β_t for t in 0..=T (β₀ = 0).
    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    /// α_t = 1 − β_t.
    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta[t]
    }

    /// ᾱ_t for t in 0..=T (ᾱ₀ = 1).
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// The data-consistency penalty weight ζ_t = (1 − ᾱ_t)/ᾱ_t.
    pub fn zeta_at(&self, t: usize) -> Result<f64> {
        if t < 1 || t > self.t_max() {
            return Err(Error::InvalidSchedule(alloc::format!(
                "zeta_at: t={t} outside 1..={}",
                self.t_max()
            )));
        }
        Ok((1.0 - self.alpha_bar[t]) / self.alpha_bar[t])
    }

    /// √ᾱ_t·x0 + √(1−ᾱ_t)·z. The caller supplies z; t = 0 returns x0.
    pub fn forward_diffuse(&self, x0: &[f64], t: usize, z: &[f64]) -> Result<Vec<f64>> {
        if t > self.t_max() {
            return Err(Error::InvalidSchedule(alloc::format!(
                "forward_diffuse: t={t} outside 0..={}",
                self.t_max()
            )));
        }
        if z.len() != x0.len() {
            return Err(Error::dims("forward_diffuse z", x0.len(), z.len()));
        }
        let bar = self.alpha_bar[t];
        let a = bar.sqrt();
        let b = (1.0 - bar).sqrt();
        Ok(x0.iter().zip(z).map(|(x, zi)| a * x + b * zi).collect())
    }

    /// (x_t − √(1−ᾱ_t)·eps)/√ᾱ_t, the Tweedie-style clean-image estimate.
    pub fn x0_from_eps(&self, x_t: &[f64], eps: &[f64], t: usize) -> Result<Vec<f64>> {
        if t < 1 || t > self.t_max() {
            return Err(Error::InvalidSchedule(alloc::format!(
                "x0_from_eps: t={t} outside 1..={}",
                self.t_max()
            )));
        }
        if eps.len() != x_t.len() {
            return Err(Error::dims("x0_from_eps eps", x_t.len(), eps.len()));
        }
        let bar = self.alpha_bar[t];
        if bar <= f64::EPSILON {
            return Err(Error::InvalidSchedule(alloc::format!(
                "x0_from_eps: alpha_bar[{t}] = {bar:e} too small to invert"
            )));
        }
        let inv_a = 1.0 / bar.sqrt();
        let b = (1.0 - bar).sqrt();
        Ok(x_t
            .iter()
            .zip(eps)
            .map(|(x, e)| (x - b * e) * inv_a)
            .collect())
    }

    fn validate(&self) -> Result<()> {
        let t_max = self.t_max();
        for t in 1..=t_max {
            if !(self.beta[t] > 0.0 && self.beta[t] < 1.0) {
                return Err(Error::InvalidSchedule(alloc::format!(
                    "beta[{t}] = {} outside (0, 1)",
                    self.beta[t]
                )));
            }
            if self.alpha_bar[t] >= self.alpha_bar[t - 1] {
                return Err(Error::InvalidSchedule(alloc::format!(
                    "alpha_bar not strictly decreasing at t={t}"
                )));
            }
        }
        Ok(())
    }
}
