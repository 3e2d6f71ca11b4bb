//! Experiment configuration: strict TOML with flat sections.
//!
//! Unknown keys are rejected so typos fail loudly, and `validate` runs the
//! same constructors the pipeline will use, so a config that loads cleanly
//! will not be rejected later by a module precondition.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dice_core::baselines::{FilterWindow, FistaConfig, StepSize};
use dice_core::denoise::{IsotropicGaussianDenoiser, TvProxDenoiser};
use dice_core::geometry::{build_geometry, PatternKind, SamplingPattern};
use dice_core::rng::derive_seed;
use dice_core::sampler::SamplerConfig;
use dice_core::schedule::{make_schedule, NoiseSchedule, ScheduleKind};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub pattern: Pattern,
    #[serde(default)]
    pub fbp: FbpParams,
    #[serde(default)]
    pub pnp_fista: FistaParams,
    #[serde(default)]
    pub dice: DiceParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub out_dir: PathBuf,
    #[serde(default = "default_side")]
    pub image_side: usize,
    /// Synthetic phantom name; mutually exclusive with `input_dir`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<String>,
    /// Directory of PGM images to reconstruct instead of phantoms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_dir: Option<PathBuf>,
    /// Number of synthetic phantom variants (1 to 5); ignored with `input_dir`.
    #[serde(default = "default_one")]
    pub n_images: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub workers: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fbp,
    PnpFista,
    #[default]
    Dice,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fbp => "fbp",
            Method::PnpFista => "pnp_fista",
            Method::Dice => "dice",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pattern {
    #[serde(default)]
    pub kind: PatternKindCfg,
    #[serde(default = "default_views")]
    pub n_views: usize,
    /// Seed for the nonuniform view subset; derived from the root seed
    /// when absent, so one knob reproduces the whole run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKindCfg {
    #[default]
    Uniform,
    Nonuniform,
}

impl Default for Pattern {
    fn default() -> Self {
        Pattern {
            kind: PatternKindCfg::Uniform,
            n_views: default_views(),
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbpParams {
    #[serde(default)]
    pub window: WindowCfg,
}

impl Default for FbpParams {
    fn default() -> Self {
        FbpParams {
            window: WindowCfg::RamLak,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowCfg {
    #[default]
    RamLak,
    Hann,
    Cosine,
}

impl From<WindowCfg> for FilterWindow {
    fn from(w: WindowCfg) -> Self {
        match w {
            WindowCfg::RamLak => FilterWindow::RamLak,
            WindowCfg::Hann => FilterWindow::Hann,
            WindowCfg::Cosine => FilterWindow::Cosine,
        }
    }
}

/// PnP-FISTA with the TV prox plugged in. Defaults come from a grid search
/// on the 64x64 phantom; `lambda_rel` multiplies the measured operator norm
/// so the weight tracks the geometry. 3e-5 is the 30-view sweet spot
/// (1e-4 suits 15 views, 1e-5 suits 60).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FistaParams {
    #[serde(default = "default_lambda_rel")]
    pub lambda_rel: f64,
    #[serde(default = "default_fista_iters")]
    pub iters: usize,
    #[serde(default = "default_tv_iters")]
    pub tv_iters: usize,
}

impl Default for FistaParams {
    fn default() -> Self {
        FistaParams {
            lambda_rel: default_lambda_rel(),
            iters: default_fista_iters(),
            tv_iters: default_tv_iters(),
        }
    }
}

/// Consensus sampler parameters. rho, tau1, k, and p keep the reference
/// operating point; the default schedule is deliberately gentle because the
/// TV denoiser re-expands the image mean by 1/sqrt(alpha_bar) and loses
/// stability when alpha_bar strays far from 1 over many steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiceParams {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_tau1")]
    pub tau1: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_t_steps")]
    pub t_steps: usize,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default)]
    pub schedule: ScheduleCfg,
    #[serde(default = "default_beta_start")]
    pub beta_start: f64,
    #[serde(default = "default_beta_end")]
    pub beta_end: f64,
    #[serde(default)]
    pub denoiser: DenoiserCfg,
    #[serde(default = "default_lambda_tv")]
    pub lambda_tv: f64,
    #[serde(default = "default_tv_iters")]
    pub tv_iters: usize,
    /// Gaussian denoiser prior: constant mean and isotropic variance.
    #[serde(default = "default_prior_mean")]
    pub prior_mean: f64,
    #[serde(default = "default_prior_var")]
    pub prior_var: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ce_tol: Option<f64>,
}

impl Default for DiceParams {
    fn default() -> Self {
        DiceParams {
            rho: default_rho(),
            tau1: default_tau1(),
            k: default_k(),
            p: default_p(),
            t_steps: default_t_steps(),
            t_max: default_t_max(),
            schedule: ScheduleCfg::Linear,
            beta_start: default_beta_start(),
            beta_end: default_beta_end(),
            denoiser: DenoiserCfg::Tv,
            lambda_tv: default_lambda_tv(),
            tv_iters: default_tv_iters(),
            prior_mean: default_prior_mean(),
            prior_var: default_prior_var(),
            ce_tol: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleCfg {
    #[default]
    Linear,
    Cosine,
}

impl From<ScheduleCfg> for ScheduleKind {
    fn from(s: ScheduleCfg) -> Self {
        match s {
            ScheduleCfg::Linear => ScheduleKind::Linear,
            ScheduleCfg::Cosine => ScheduleKind::Cosine,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserCfg {
    #[default]
    Tv,
    Gaussian,
}

fn default_side() -> usize {
    64
}
fn default_one() -> usize {
    1
}
fn default_views() -> usize {
    60
}
fn default_lambda_rel() -> f64 {
    3e-5
}
fn default_fista_iters() -> usize {
    300
}
fn default_tv_iters() -> usize {
    30
}
fn default_rho() -> f64 {
    0.9
}
fn default_tau1() -> f64 {
    0.5
}
fn default_k() -> usize {
    5
}
fn default_p() -> usize {
    5
}
fn default_t_steps() -> usize {
    100
}
fn default_t_max() -> usize {
    100
}
fn default_beta_start() -> f64 {
    1e-8
}
fn default_beta_end() -> f64 {
    3e-7
}
fn default_lambda_tv() -> f64 {
    3.0
}
fn default_prior_mean() -> f64 {
    0.25
}
fn default_prior_var() -> f64 {
    0.25
}

impl ExperimentConfig {
    /// Parses `text`, applies `key.path=value` overrides, then validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("bad TOML: {e}")))?;
        for spec in overrides {
            apply_override(&mut table, spec)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    /// Serializes the effective config; parsing the echo reproduces it.
    pub fn echo(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The sampling pattern with its seed resolved against the root seed.
    pub fn core_pattern(&self) -> SamplingPattern {
        SamplingPattern {
            kind: match self.pattern.kind {
                PatternKindCfg::Uniform => PatternKind::Uniform,
                PatternKindCfg::Nonuniform => PatternKind::NonUniform,
            },
            n_views: self.pattern.n_views,
            seed: self
                .pattern
                .seed
                .unwrap_or_else(|| derive_seed(self.experiment.seed, "geometry")),
        }
    }

    pub fn noise_schedule(&self) -> Result<NoiseSchedule> {
        Ok(make_schedule(
            self.dice.t_max,
            self.dice.schedule.into(),
            self.dice.beta_start,
            self.dice.beta_end,
        )?)
    }

    /// Sampler settings for one image; the per-image seed is supplied by
    /// the runner so batch entries get independent streams.
    pub fn sampler_config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            t_steps: self.dice.t_steps,
            rho: self.dice.rho,
            k: self.dice.k,
            p: self.dice.p,
            tau1: self.dice.tau1,
            ce_tol: self.dice.ce_tol,
            seed,
            record_trajectory: false,
            warm_start_state: false,
        }
    }

    pub fn fista_config(&self, operator_norm: f64) -> FistaConfig {
        FistaConfig {
            lambda: self.pnp_fista.lambda_rel * operator_norm,
            iters: self.pnp_fista.iters,
            step: StepSize::Auto,
        }
    }

    /// Runs every module precondition this config will hit, so failures
    /// surface before any compute, with exit code 2.
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.phantom.is_some() && e.input_dir.is_some() {
            return Err(CliError::Config(
                "phantom and input_dir are mutually exclusive".into(),
            ));
        }
        if let Some(name) = &e.phantom {
            if name != "shepp-logan" {
                return Err(CliError::Config(format!(
                    "unknown phantom {name:?}; available: shepp-logan"
                )));
            }
        }
        if e.input_dir.is_none() {
            if e.n_images == 0 || e.n_images > 5 {
                return Err(CliError::Config(format!(
                    "n_images {} outside 1..=5 (five deterministic phantom variants exist)",
                    e.n_images
                )));
            }
        }
        if !(e.noise_sigma >= 0.0) || !e.noise_sigma.is_finite() {
            return Err(CliError::Config(format!(
                "noise_sigma {} must be finite and >= 0",
                e.noise_sigma
            )));
        }
        if e.workers == 0 {
            return Err(CliError::Config("workers must be >= 1".into()));
        }

        // Geometry, schedule, solver, and denoiser constructors are the
        // modules' own validators; building them is cheap.
        build_geometry(e.image_side, &self.core_pattern())?;
        let sched = self.noise_schedule()?;
        self.sampler_config(0).validate(&sched)?;
        self.fista_config(1.0).validate()?;
        if self.pnp_fista.tv_iters == 0 || self.dice.tv_iters == 0 {
            return Err(CliError::Config("tv_iters must be >= 1".into()));
        }
        match self.dice.denoiser {
            DenoiserCfg::Tv => {
                TvProxDenoiser::new(e.image_side, self.dice.lambda_tv, self.dice.tv_iters, sched)?;
            }
            DenoiserCfg::Gaussian => {
                IsotropicGaussianDenoiser::new(
                    vec![self.dice.prior_mean; e.image_side * e.image_side],
                    self.dice.prior_var,
                    sched,
                )?;
            }
        }
        Ok(())
    }
}

/// Applies one `section.key=value` override onto the raw TOML table.
/// The value is parsed as a TOML literal, falling back to a string, so
/// `--override dice.rho=0.5` and `--override experiment.phantom=shepp-logan`
/// both do what they look like.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let value = parse_literal(raw);
    let mut node = table;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!(
            "override key {key:?} is malformed"
        )));
    }
    for part in &parts[..parts.len() - 1] {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::Config(format!("override key {key:?} descends into a non-table"))
            })?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed document has key v"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[experiment]\nout_dir = \"/tmp/run\"\n";

    #[test]
    fn minimal_config_gets_reference_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.experiment.image_side, 64);
        assert_eq!(cfg.experiment.method, Method::Dice);
        assert_eq!(cfg.dice.rho, 0.9);
        assert_eq!(cfg.dice.tau1, 0.5);
        assert_eq!(cfg.dice.k, 5);
        assert_eq!(cfg.dice.p, 5);
        assert_eq!(cfg.pattern.n_views, 60);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}[dice]\nrh = 0.5\n");
        let err = ExperimentConfig::from_toml(&text, &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("rh"), "{err}");
    }

    #[test]
    fn overrides_replace_file_values_and_are_typed() {
        let cfg = ExperimentConfig::from_toml(
            MINIMAL,
            &[
                "dice.rho=0.5".into(),
                "pattern.n_views=15".into(),
                "experiment.method=fbp".into(),
                "dice.ce_tol=1e-9".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.dice.rho, 0.5);
        assert_eq!(cfg.pattern.n_views, 15);
        assert_eq!(cfg.experiment.method, Method::Fbp);
        assert_eq!(cfg.dice.ce_tol, Some(1e-9));
    }

    #[test]
    fn override_with_unknown_key_is_a_config_error() {
        let err = ExperimentConfig::from_toml(MINIMAL, &["dice.kk=3".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::from_toml(
            MINIMAL,
            &[
                "dice.denoiser=gaussian".into(),
                "pattern.kind=nonuniform".into(),
            ],
        )
        .unwrap();
        let back = ExperimentConfig::from_toml(&cfg.echo(), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn module_preconditions_fail_at_load_time() {
        for bad in [
            "pattern.n_views=7",       // does not divide 180 for uniform
            "dice.rho=1.5",            // outside (0,1)
            "dice.t_steps=500",        // exceeds t_max
            "experiment.image_side=4", // too small for the projector
            "dice.lambda_tv=0",        // TV weight must be positive
            "experiment.noise_sigma=-1",
            "experiment.n_images=9",
        ] {
            let err = ExperimentConfig::from_toml(MINIMAL, &[bad.to_string()]).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad} should be a config error: {err}");
        }
    }

    #[test]
    fn phantom_and_input_dir_are_exclusive() {
        let text = format!("{MINIMAL}phantom = \"shepp-logan\"\ninput_dir = \"imgs\"\n");
        let err = ExperimentConfig::from_toml(&text, &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("mutually exclusive"), "{err}");
    }

    #[test]
    fn pattern_seed_defaults_to_a_derived_stream() {
        let a = ExperimentConfig::from_toml(MINIMAL, &["experiment.seed=7".into()]).unwrap();
        let b = ExperimentConfig::from_toml(
            MINIMAL,
            &["experiment.seed=7".into(), "pattern.seed=99".into()],
        )
        .unwrap();
        assert_eq!(a.core_pattern().seed, derive_seed(7, "geometry"));
        assert_eq!(b.core_pattern().seed, 99);
    }
}
