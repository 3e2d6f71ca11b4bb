//! Consensus equilibrium: stacked agents, weighted averaging, and the
//! relaxed fixed-point iteration that couples them.
//!
//! A state holds one vector block per agent plus the consensus weights.
//! The solve relaxes v toward a fixed point of Ω = (2G_τ − I)(2F − I);
//! at equilibrium every agent agrees with the weighted mean of the blocks,
//! which is the reconstruction estimate.

use alloc::vec;
use alloc::vec::Vec;

// Float math comes from libm in no_std builds; test builds link std,
// whose inherent methods shadow the trait and leave it "unused".
use crate::agents::Agent;
use crate::error::{Error, Result};
use crate::vecn;
#[allow(unused_imports)]
use num_traits::Float;

/// Per-agent vector blocks v_i plus consensus weights τ_i.
#[derive(Clone, Debug)]
pub struct CEState {
    blocks: Vec<Vec<f64>>,
    tau: Vec<f64>,
}

impl CEState {
    /// Weights must be positive and sum to 1; blocks must share a length.
    pub fn new(blocks: Vec<Vec<f64>>, tau: Vec<f64>) -> Result<Self> {
        if blocks.is_empty() || blocks.len() != tau.len() {
            return Err(Error::InvalidConfig(alloc::format!(
                "need one weight per block: {} blocks, {} weights",
                blocks.len(),
                tau.len()
            )));
        }
        let n = blocks[0].len();
        if blocks.iter().any(|b| b.len() != n) {
            return Err(Error::InvalidConfig("blocks differ in length".into()));
        }
        if tau.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidConfig("weights must be positive".into()));
        }
        let sum: f64 = tau.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(alloc::format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { blocks, tau })
    }

    /// All blocks initialized to copies of `v`.
    pub fn replicate(v: &[f64], tau: Vec<f64>) -> Result<Self> {
        let blocks = vec![v.to_vec(); tau.len()];
        Self::new(blocks, tau)
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn block_len(&self) -> usize {
        self.blocks[0].len()
    }

    fn finite(&self) -> bool {
        self.blocks.iter().all(|b| vecn::all_finite(b))
    }

    /// ‖a − b‖₂ over all blocks stacked.
    fn dist(&self, other: &CEState) -> f64 {
        let mut acc = 0.0;
        for (x, y) in self.blocks.iter().zip(&other.blocks) {
            for (a, b) in x.iter().zip(y) {
                acc += (a - b) * (a - b);
            }
        }
        acc.sqrt()
    }

    fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for b in &self.blocks {
            for a in b {
                acc += a * a;
            }
        }
        acc.sqrt()
    }
}

/// Mann/fixed-point controls: relaxation ρ, iteration count K, and an
/// optional early-exit residual tolerance (off by default; the reference
/// configuration runs exactly K steps).
#[derive(Clone, Copy, Debug)]
pub struct CEConfig {
    pub rho: f64,
    pub k: usize,
    pub fixed_point_tol: Option<f64>,
}

impl CEConfig {
    pub fn new(rho: f64, k: usize) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "rho {rho} outside (0, 1)"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidConfig("K must be >= 1".into()));
        }
        Ok(Self {
            rho,
            k,
            fixed_point_tol: None,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.fixed_point_tol = Some(tol);
        self
    }
}

/// Per-step fixed-point residuals ‖Ω(v)−v‖/max(‖v‖, 1e-12).
#[derive(Clone, Debug, Default)]
pub struct MannDiagnostics {
    pub residuals: Vec<f64>,
    pub steps: usize,
    pub early_exit: bool,
}

/// Blockwise agent application; weights pass through.
pub fn stacked_f(agents: &[&dyn Agent], state: &CEState, t: usize) -> Result<CEState> {
    if agents.len() != state.blocks.len() {
        return Err(Error::InvalidConfig(alloc::format!(
            "{} agents against {} blocks",
            agents.len(),
            state.blocks.len()
        )));
    }
    let mut blocks = Vec::with_capacity(agents.len());
    for (agent, v) in agents.iter().zip(&state.blocks) {
        blocks.push(agent.apply(v, t)?);
    }
    CEState::new(blocks, state.tau.clone())
}

/// Weighted mean of the blocks, Σ τ_i v_i.
pub fn consensus(state: &CEState) -> Vec<f64> {
    let mut mean = vec![0.0; state.block_len()];
    for (w, b) in state.tau.iter().zip(&state.blocks) {
        vecn::axpy(*w, b, &mut mean);
    }
    mean
}

/// Replaces every block with the weighted mean (a projection).
pub fn g_tau(state: &CEState) -> CEState {
    let mean = consensus(state);
    CEState {
        blocks: vec![mean; state.blocks.len()],
        tau: state.tau.clone(),
    }
}

/// Ω(v) = (2G_τ − I)(2F − I)(v).
pub fn omega(agents: &[&dyn Agent], state: &CEState, t: usize) -> Result<CEState> {
    let fv = stacked_f(agents, state, t)?;
    // w = 2F(v) − v
    let w = CEState {
        blocks: fv
            .blocks
            .iter()
            .zip(&state.blocks)
            .map(|(f, v)| f.iter().zip(v).map(|(a, b)| 2.0 * a - b).collect())
            .collect(),
        tau: state.tau.clone(),
    };
    // out = 2G(w) − w
    let mean = consensus(&w);
    Ok(CEState {
        blocks: w
            .blocks
            .iter()
            .map(|b| mean.iter().zip(b).map(|(m, v)| 2.0 * m - v).collect())
            .collect(),
        tau: state.tau.clone(),
    })
}

/// K relaxed fixed-point steps v ← (1−ρ)v + ρΩ(v).
///
/// The residual recorded at step k measures the state entering that step.
/// Early exit requires `fixed_point_tol`; otherwise all K steps run.
pub fn mann_solve(
    agents: &[&dyn Agent],
    v0: &CEState,
    cfg: &CEConfig,
    t: usize,
) -> Result<(CEState, MannDiagnostics)> {
    let mut v = v0.clone();
    let mut diag = MannDiagnostics::default();
    for k in 0..cfg.k {
        let ov = omega(agents, &v, t)?;
        if !ov.finite() {
            return Err(Error::NumericalBreakdown {
                context: "mann_solve omega",
                step: k,
            });
        }
        let residual = ov.dist(&v) / v.norm().max(1e-12);
        diag.residuals.push(residual);
        diag.steps = k + 1;
        for (vb, ob) in v.blocks.iter_mut().zip(&ov.blocks) {
            for (a, b) in vb.iter_mut().zip(ob) {
                *a = (1.0 - cfg.rho) * *a + cfg.rho * b;
            }
        }
        if !v.finite() {
            return Err(Error::NumericalBreakdown {
                context: "mann_solve update",
                step: k,
            });
        }
        if let Some(tol) = cfg.fixed_point_tol {
            if residual < tol {
                diag.early_exit = true;
                break;
            }
        }
    }
    Ok((v, diag))
}
