//! The two consensus agents: data-consistency prox and diffusion prior.
//!
//! Both map an image-sized vector to an image-sized vector at a given
//! timestep. The data agent pulls its input toward the measurements by
//! approximately solving a ridge-regularized normal system; the prior
//! agent pulls toward the denoiser's clean-image manifold.

use alloc::vec::Vec;
use core::cell::RefCell;

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::linalg::{cg_solve, LinearOperator, NormalEquationsOperator};
use crate::schedule::NoiseSchedule;
use crate::vecn;

/// A consensus agent F_i: R^n → R^n, deterministic per (v, t).
pub trait Agent {
    fn apply(&self, v: &[f64], t: usize) -> Result<Vec<f64>>;
    /// Dimension n of the vectors the agent acts on.
    fn dim(&self) -> usize;
}

/// Proximal map of ½‖As − y‖² with penalty (ζ_t/2)‖s − v‖², evaluated by
/// running `p` conjugate-gradient steps on (AᵀA + ζ_t I)s = Aᵀy + ζ_t v.
///
/// With `p` small this is the truncated solver the sampler uses; `exact`
/// mode sizes the iteration budget to the problem for oracle comparisons.
/// CG warm-starts from the input v; the opt-in `reuse_last_solution` mode
/// starts from the previous call's output instead (the cache makes the
/// agent single-threaded; workers each build their own).
pub struct DataConsistencyAgent<'a, A: LinearOperator + ?Sized> {
    a: &'a A,
    at_y: Vec<f64>,
    p: usize,
    tol: f64,
    sched: NoiseSchedule,
    reuse_last: bool,
    last: RefCell<Option<Vec<f64>>>,
}

impl<'a, A: LinearOperator + ?Sized> DataConsistencyAgent<'a, A> {
    /// Truncated mode: exactly `p` CG steps per apply (no tolerance exit).
    pub fn new(a: &'a A, y: &[f64], p: usize, sched: NoiseSchedule) -> Result<Self> {
        if y.len() != a.range_dim() {
            return Err(Error::dims(
                "DataConsistencyAgent y",
                a.range_dim(),
                y.len(),
            ));
        }
        if p == 0 {
            return Err(Error::InvalidConfig("cg step count P must be >= 1".into()));
        }
        Ok(Self {
            a,
            at_y: a.apply_adjoint(y),
            p,
            tol: 0.0,
            sched,
            reuse_last: false,
            last: RefCell::new(None),
        })
    }

    /// Exact mode: iteration budget n with a tight tolerance, for oracles.
    pub fn exact(a: &'a A, y: &[f64], sched: NoiseSchedule) -> Result<Self> {
        let n = a.domain_dim();
        let mut agent = Self::new(a, y, n.max(1), sched)?;
        agent.tol = 1e-14;
        Ok(agent)
    }

    /// Start CG from the previous call's solution instead of from v.
    pub fn reuse_last_solution(mut self, on: bool) -> Self {
        self.reuse_last = on;
        self
    }
}

impl<'a, A: LinearOperator + ?Sized> Agent for DataConsistencyAgent<'a, A> {
    fn apply(&self, v: &[f64], t: usize) -> Result<Vec<f64>> {
        if v.len() != self.a.domain_dim() {
            return Err(Error::dims(
                "DataConsistencyAgent v",
                self.a.domain_dim(),
                v.len(),
            ));
        }
        let zeta = self.sched.zeta_at(t)?;
        let op = NormalEquationsOperator { a: self.a, zeta };
        let rhs = vecn::add_scaled(&self.at_y, zeta, v);
        let stash = if self.reuse_last {
            self.last.borrow().clone()
        } else {
            None
        };
        let x0 = stash.as_deref().unwrap_or(v);
        let sol = cg_solve(&op, &rhs, x0, self.p, self.tol)?;
        if self.reuse_last {
            *self.last.borrow_mut() = Some(sol.x.clone());
        }
        Ok(sol.x)
    }

    fn dim(&self) -> usize {
        self.a.domain_dim()
    }
}

/// Clean-image agent: v ↦ (v − √(1−ᾱ_t)·ε_θ(v,t))/√ᾱ_t.
pub struct DiffusionPriorAgent<D: Denoiser> {
    denoiser: D,
    sched: NoiseSchedule,
    dim: usize,
}

impl<D: Denoiser> DiffusionPriorAgent<D> {
    pub fn new(denoiser: D, sched: NoiseSchedule, dim: usize) -> Self {
        Self {
            denoiser,
            sched,
            dim,
        }
    }
}

impl<D: Denoiser> Agent for DiffusionPriorAgent<D> {
    fn apply(&self, v: &[f64], t: usize) -> Result<Vec<f64>> {
        let eps = self.denoiser.predict_eps(v, t)?;
        self.sched.x0_from_eps(v, &eps, t)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
