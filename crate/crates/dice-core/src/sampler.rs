//! The outer reverse-diffusion loop.
//!
//! Starting from pure noise, each selected timestep solves a consensus
//! problem between the measurement prox and the denoiser prior, takes the
//! weighted consensus as the clean-image estimate, and renoises it down to
//! the next timestep. The final step lands on ᾱ₀ = 1, so the last
//! consensus is returned exactly.

use alloc::vec::Vec;

// Float math comes from libm in no_std builds; test builds link std,
// whose inherent methods shadow the trait and leave it "unused".
use crate::agents::{Agent, DataConsistencyAgent, DiffusionPriorAgent};
use crate::ce::{consensus, mann_solve, CEConfig, CEState, MannDiagnostics};
use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::geometry::Sinogram;
use crate::linalg::LinearOperator;
use crate::rng::SeedStream;
use crate::schedule::NoiseSchedule;
#[allow(unused_imports)]
use num_traits::Float;

/// Controls for one reconstruction run.
#[derive(Clone, Copy, Debug)]
pub struct SamplerConfig {
    /// Number of outer timesteps actually visited (≤ schedule T).
    pub t_steps: usize,
    /// Mann relaxation ρ ∈ (0, 1).
    pub rho: f64,
    /// Mann iterations per timestep.
    pub k: usize,
    /// CG steps inside the data-consistency agent.
    pub p: usize,
    /// Consensus weight of the data agent; the prior gets 1 − tau1.
    pub tau1: f64,
    /// Optional early exit for the Mann loop: stop once the relative CE
    /// residual falls below this, instead of always spending all K steps.
    pub ce_tol: Option<f64>,
    /// Root seed; initial noise and renoising draw from derived streams.
    pub seed: u64,
    /// Keep the per-step consensus estimates in the run log.
    pub record_trajectory: bool,
    /// Start each CE solve from the previous step's blocks instead of the
    /// renoised iterate (off = reference behavior).
    pub warm_start_state: bool,
}

impl SamplerConfig {
    pub fn validate(&self, sched: &NoiseSchedule) -> Result<()> {
        if self.t_steps < 1 || self.t_steps > sched.t_max() {
            return Err(Error::InvalidConfig(alloc::format!(
                "t_steps {} outside 1..={}",
                self.t_steps,
                sched.t_max()
            )));
        }
        if !(self.tau1 > 0.0 && self.tau1 < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "tau1 {} outside (0, 1)",
                self.tau1
            )));
        }
        CEConfig::new(self.rho, self.k)?;
        if let Some(tol) = self.ce_tol {
            if tol <= 0.0 || tol.is_nan() {
                return Err(Error::InvalidConfig(alloc::format!(
                    "ce_tol {tol} must be positive"
                )));
            }
        }
        if self.p == 0 {
            return Err(Error::InvalidConfig("P must be >= 1".into()));
        }
        Ok(())
    }
}

/// One outer step's record: the timestep and its Mann residual trace.
#[derive(Clone, Debug)]
pub struct StepLog {
    pub t: usize,
    pub residuals: Vec<f64>,
}

/// Per-run diagnostics; trajectory is populated only when requested.
#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub steps: Vec<StepLog>,
    pub trajectory: Vec<Vec<f64>>,
}

/// The descending timestep subsequence visited by the sampler: uniform
/// stride from T down to 1, both endpoints included.
pub fn select_timesteps(t_max: usize, t_steps: usize) -> Result<Vec<usize>> {
    if t_steps < 1 || t_steps > t_max {
        return Err(Error::InvalidConfig(alloc::format!(
            "t_steps {t_steps} outside 1..={t_max}"
        )));
    }
    if t_steps == 1 {
        return Ok(alloc::vec![1]);
    }
    let stride = (t_max - 1) as f64 / (t_steps - 1) as f64;
    Ok((0..t_steps)
        .map(|i| t_max - (i as f64 * stride).round() as usize)
        .collect())
}

/// Runs the full reverse loop and returns the reconstruction with its log.
pub fn dice_reconstruct<A: LinearOperator + ?Sized, D: Denoiser + ?Sized>(
    y: &Sinogram,
    a: &A,
    denoiser: &D,
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
) -> Result<(Vec<f64>, RunLog)> {
    cfg.validate(sched)?;
    let n = a.domain_dim();
    if y.data.len() != a.range_dim() {
        return Err(Error::dims(
            "dice_reconstruct y",
            a.range_dim(),
            y.data.len(),
        ));
    }

    let data_agent = DataConsistencyAgent::new(a, &y.data, cfg.p, sched.clone())?;
    let prior_agent = DiffusionPriorAgent::new(denoiser, sched.clone(), n);
    let agents: [&dyn Agent; 2] = [&data_agent, &prior_agent];
    let tau = alloc::vec![cfg.tau1, 1.0 - cfg.tau1];
    let mut ce_cfg = CEConfig::new(cfg.rho, cfg.k)?;
    if let Some(tol) = cfg.ce_tol {
        ce_cfg = ce_cfg.with_tol(tol);
    }

    let mut init = SeedStream::named(cfg.seed, "init");
    let mut renoise = SeedStream::named(cfg.seed, "renoise");
    let mut x = init.standard_normal_vec(n);

    let timesteps = select_timesteps(sched.t_max(), cfg.t_steps)?;
    let mut log = RunLog::default();
    let mut carried_state: Option<CEState> = None;

    for (i, &t) in timesteps.iter().enumerate() {
        let state = match (&carried_state, cfg.warm_start_state) {
            (Some(prev), true) => prev.clone(),
            _ => CEState::replicate(&x, tau.clone())?,
        };
        let (vstar, diag) = mann_solve(&agents, &state, &ce_cfg, t).map_err(|e| locate(e, t))?;
        let x0 = consensus(&vstar);
        record(&mut log, t, diag, cfg.record_trajectory.then(|| x0.clone()));
        if cfg.warm_start_state {
            carried_state = Some(vstar);
        }

        let t_next = timesteps.get(i + 1).copied().unwrap_or(0);
        if t_next == 0 {
            // alpha_bar[0] = 1: the renoising step is the identity.
            x = x0;
        } else {
            let z = renoise.standard_normal_vec(n);
            x = sched.forward_diffuse(&x0, t_next, &z)?;
        }
    }

    Ok((x, log))
}

fn locate(e: Error, t: usize) -> Error {
    match e {
        Error::NumericalBreakdown { context, step } => Error::Diverged {
            context: "dice_reconstruct",
            detail: alloc::format!("non-finite value at t={t}, mann step {step} ({context})"),
        },
        other => other,
    }
}

fn record(log: &mut RunLog, t: usize, diag: MannDiagnostics, snapshot: Option<Vec<f64>>) {
    log.steps.push(StepLog {
        t,
        residuals: diag.residuals,
    });
    if let Some(x0) = snapshot {
        log.trajectory.push(x0);
    }
}
