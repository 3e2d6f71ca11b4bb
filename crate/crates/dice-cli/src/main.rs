//! Command line entry point. Argument handling only; the work lives in
//! the library so tests can drive it without spawning processes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dice_cli::config::ExperimentConfig;
use dice_cli::error::{CliError, Result};
use dice_cli::runner::{self, OutputGuard, SweepAxis};

#[derive(Parser)]
#[command(
    name = "dice",
    version = runner::version_string(),
    about = "Sparse-view CT reconstruction experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// TOML experiment config; flags and overrides take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Reconstruction method
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,

    /// Number of projection views
    #[arg(long, global = true, value_name = "N")]
    views: Option<usize>,

    /// View sampling pattern
    #[arg(long, global = true, value_enum)]
    pattern: Option<PatternArg>,

    /// Root RNG seed
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for per-image stages
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Set any config key, e.g. --override dice.rho=0.8 (repeatable)
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write ground-truth images and measured sinograms
    Simulate,
    /// Reconstruct images from the sinograms in the output directory
    Reconstruct,
    /// Score reconstructions against ground truth into metrics.csv
    Evaluate,
    /// Simulate, reconstruct, and evaluate in one run
    All,
    /// Run the full pipeline once per value of one parameter
    Sweep {
        /// Parameter to vary: rho, tau1, k, p, or t_steps
        #[arg(long)]
        axis: String,
        /// Comma separated values for the axis
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Fbp,
    PnpFista,
    Dice,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Uniform,
    Nonuniform,
}

impl Cli {
    /// Base config text plus all overrides, dedicated flags last so they
    /// win over both the file and --override.
    fn build_config(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
            None => String::new(),
        };
        let mut overrides = self.overrides.clone();
        if let Some(m) = self.method {
            let name = match m {
                MethodArg::Fbp => "fbp",
                MethodArg::PnpFista => "pnp_fista",
                MethodArg::Dice => "dice",
            };
            overrides.push(format!("experiment.method={name:?}"));
        }
        if let Some(n) = self.views {
            overrides.push(format!("pattern.n_views={n}"));
        }
        if let Some(p) = self.pattern {
            let name = match p {
                PatternArg::Uniform => "uniform",
                PatternArg::Nonuniform => "nonuniform",
            };
            overrides.push(format!("pattern.kind={name:?}"));
        }
        if let Some(s) = self.seed {
            overrides.push(format!("experiment.seed={s}"));
        }
        if let Some(dir) = &self.out {
            overrides.push(format!("experiment.out_dir={dir:?}"));
        }
        if let Some(w) = self.workers {
            overrides.push(format!("experiment.workers={w}"));
        }
        ExperimentConfig::from_toml(&base, &overrides)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.build_config()?;
    match &cli.cmd {
        Cmd::Simulate => {
            let guard = OutputGuard::new();
            let ids = runner::simulate(&cfg, &guard)?;
            guard.commit();
            println!(
                "simulated {} sinogram(s) in {}",
                ids.len(),
                cfg.experiment.out_dir.display()
            );
        }
        Cmd::Reconstruct => {
            let guard = OutputGuard::new();
            let rows = runner::reconstruct(&cfg, &guard)?;
            guard.commit();
            println!(
                "reconstructed {} image(s) with {} in {}",
                rows.len(),
                cfg.experiment.method.name(),
                cfg.experiment.out_dir.display()
            );
        }
        Cmd::Evaluate => {
            let guard = OutputGuard::new();
            let rows = runner::evaluate(&cfg, &guard)?;
            guard.commit();
            print_rows(&rows);
        }
        Cmd::All => {
            let rows = runner::run_all(&cfg)?;
            print_rows(&rows);
        }
        Cmd::Sweep { axis, values } => {
            let axis = SweepAxis::parse(axis)?;
            let path = runner::sweep(&cfg, axis, values)?;
            println!(
                "swept {} value(s); summary in {}",
                values.len(),
                path.display()
            );
        }
    }
    Ok(())
}

fn print_rows(rows: &[runner::MetricsRow]) {
    for r in rows {
        println!(
            "{} {} views={} pattern={} psnr={:.2} ssim={:.4} ({:.2}s)",
            r.image_id, r.method, r.views, r.pattern, r.psnr, r.ssim, r.seconds
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
