//! Pipeline stages behind the CLI verbs: simulate writes truth images and
//! sinograms, reconstruct turns sinograms into images, evaluate scores
//! reconstructions against truth, sweep repeats the pipeline along one
//! parameter axis. Every file a stage creates is tracked and removed if
//! the run aborts, so an output directory never holds a partial run.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

use dice_core::baselines::{fbp_reconstruct, pnp_fista};
use dice_core::denoise::{tv_prox, IsotropicGaussianDenoiser, TvProxDenoiser};
use dice_core::geometry::{
    add_noise, build_geometry, flip_horizontal, rot90, shepp_logan, ProjectionMatrix, ScanGeometry,
    Sinogram,
};
use dice_core::linalg::power_iteration_normal;
use dice_core::metrics::measure;
use dice_core::rng::derive_seed;
use dice_core::sampler::dice_reconstruct;

use crate::config::{DenoiserCfg, ExperimentConfig, Method, PatternKindCfg};
use crate::error::{CliError, Result};
use crate::pgm::{self, BitDepth};
use crate::sino_file;

/// Collects files created by a run; drops them unless `commit` is called.
pub struct OutputGuard {
    created: Mutex<Vec<PathBuf>>,
    committed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        OutputGuard {
            created: Mutex::new(Vec::new()),
            committed: false,
        }
    }

    fn track(&self, path: &Path) {
        self.created.lock().unwrap().push(path.to_path_buf());
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Default for OutputGuard {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for path in self.created.lock().unwrap().iter() {
            let _ = fs::remove_file(path);
        }
    }
}

/// One scored reconstruction; the row shape of metrics.csv.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsRow {
    pub image_id: String,
    pub method: String,
    pub views: usize,
    pub pattern: String,
    pub psnr: f64,
    pub ssim: f64,
    pub seconds: f64,
}

/// Runs `f` over `0..n` on up to `workers` threads; results keep index
/// order, so the output is identical however the work interleaves.
fn parallel_map<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every index was claimed"))
        .collect()
}

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<()> {
    let dir = &cfg.experiment.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.experiment.out_dir.join(name)
}

fn write_f64_sidecar(path: &Path, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for &v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_f64_sidecar(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(CliError::bad_file(path, "length is not a multiple of 8"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// The image set to reconstruct: synthetic phantom variants or a PGM
/// directory. Ids are stable and filesystem-safe.
pub fn image_set(cfg: &ExperimentConfig) -> Result<(usize, Vec<(String, Vec<f64>)>)> {
    if let Some(dir) = &cfg.experiment.input_dir {
        let (side, images) = pgm::load_image_dir(dir)?;
        if side != cfg.experiment.image_side {
            return Err(CliError::Config(format!(
                "input images are {side}x{side} but image_side is {}",
                cfg.experiment.image_side
            )));
        }
        return Ok((side, images));
    }
    let side = cfg.experiment.image_side;
    let base = shepp_logan(side);
    let variants: [(&str, Vec<f64>); 5] = [
        ("base", base.clone()),
        ("rot90", rot90(&base, side)),
        ("rot180", rot90(&rot90(&base, side), side)),
        ("rot270", rot90(&rot90(&rot90(&base, side), side), side)),
        ("fliph", flip_horizontal(&base, side)),
    ];
    let images = variants
        .into_iter()
        .take(cfg.experiment.n_images)
        .enumerate()
        .map(|(i, (name, img))| (format!("phantom-{i}-{name}"), img))
        .collect();
    Ok((side, images))
}

fn scan_geometry(cfg: &ExperimentConfig) -> Result<ScanGeometry> {
    Ok(build_geometry(
        cfg.experiment.image_side,
        &cfg.core_pattern(),
    )?)
}

/// Phantoms (or input images) to sinograms plus ground-truth files.
pub fn simulate(cfg: &ExperimentConfig, guard: &OutputGuard) -> Result<Vec<String>> {
    ensure_out_dir(cfg)?;
    let (side, images) = image_set(cfg)?;
    let geom = scan_geometry(cfg)?;
    let proj = ProjectionMatrix::build(&geom);
    let root = cfg.experiment.seed;

    parallel_map(images.len(), cfg.experiment.workers, |i| {
        let (id, img) = &images[i];
        let sino = proj.forward(img)?;
        let noisy = add_noise(
            &sino,
            cfg.experiment.noise_sigma,
            derive_seed(root, &format!("noise-{i}")),
        );
        let truth_pgm = out_path(cfg, &format!("truth-{id}.pgm"));
        let truth_raw = out_path(cfg, &format!("truth-{id}.f64"));
        let sino_path = out_path(cfg, &format!("sino-{id}.sino"));
        // Tracked before writing so a half-written file is still removed.
        guard.track(&truth_pgm);
        pgm::write_pgm(&truth_pgm, img, side, side, BitDepth::Sixteen)?;
        guard.track(&truth_raw);
        write_f64_sidecar(&truth_raw, img)?;
        guard.track(&sino_path);
        sino_file::write_sino(
            &sino_path,
            geom.angles().len() as u32,
            geom.n_detectors() as u32,
            &noisy.data,
        )?;
        Ok(())
    })?;
    Ok(images.into_iter().map(|(id, _)| id).collect())
}

fn sino_ids(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let dir = &cfg.experiment.out_dir;
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n,
            None => continue,
        };
        if let Some(id) = name
            .strip_prefix("sino-")
            .and_then(|n| n.strip_suffix(".sino"))
        {
            ids.push(id.to_string());
        }
    }
    if ids.is_empty() {
        return Err(CliError::Config(format!(
            "no sino-*.sino files in {} (run simulate first)",
            dir.display()
        )));
    }
    ids.sort();
    Ok(ids)
}

/// Sinograms to reconstructed images, plus a timings file.
pub fn reconstruct(cfg: &ExperimentConfig, guard: &OutputGuard) -> Result<Vec<(String, f64)>> {
    let ids = sino_ids(cfg)?;
    let side = cfg.experiment.image_side;
    let geom = scan_geometry(cfg)?;
    let proj = ProjectionMatrix::build(&geom);
    let root = cfg.experiment.seed;

    // Shared per-run precomputation so workers stay deterministic.
    let sched = cfg.noise_schedule()?;
    let op_norm = match cfg.experiment.method {
        Method::PnpFista => power_iteration_normal(&proj, 100, 3),
        _ => 0.0,
    };

    let rows: Vec<(String, f64)> = parallel_map(ids.len(), cfg.experiment.workers, |i| {
        let id = &ids[i];
        let sino_path = out_path(cfg, &format!("sino-{id}.sino"));
        let file = sino_file::read_sino(&sino_path)?;
        if file.n_angles as usize != geom.angles().len()
            || file.n_detectors as usize != geom.n_detectors()
        {
            return Err(CliError::bad_file(
                &sino_path,
                format!(
                    "sinogram is {}x{}, config geometry is {}x{}",
                    file.n_angles,
                    file.n_detectors,
                    geom.angles().len(),
                    geom.n_detectors()
                ),
            ));
        }
        if !file.data.iter().all(|v| v.is_finite()) {
            return Err(CliError::Numerical(format!(
                "sinogram {} contains non-finite samples",
                sino_path.display()
            )));
        }
        let sino = Sinogram::new(geom.clone(), file.data)?;

        let start = Instant::now();
        let image = match cfg.experiment.method {
            Method::Fbp => fbp_reconstruct(&sino, cfg.fbp.window.into())?,
            Method::PnpFista => {
                let fcfg = cfg.fista_config(op_norm);
                let tv_iters = cfg.pnp_fista.tv_iters;
                pnp_fista(
                    &sino,
                    &proj,
                    |v: &[f64], s: f64| tv_prox(v, side, s, tv_iters),
                    &fcfg,
                )?
                .x
            }
            Method::Dice => {
                let scfg = cfg.sampler_config(derive_seed(root, &format!("image-{i}")));
                match cfg.dice.denoiser {
                    DenoiserCfg::Tv => {
                        let d = TvProxDenoiser::new(
                            side,
                            cfg.dice.lambda_tv,
                            cfg.dice.tv_iters,
                            sched.clone(),
                        )?;
                        dice_reconstruct(&sino, &proj, &d, &sched, &scfg)?.0
                    }
                    DenoiserCfg::Gaussian => {
                        let d = IsotropicGaussianDenoiser::new(
                            vec![cfg.dice.prior_mean; side * side],
                            cfg.dice.prior_var,
                            sched.clone(),
                        )?;
                        dice_reconstruct(&sino, &proj, &d, &sched, &scfg)?.0
                    }
                }
            }
        };
        let seconds = start.elapsed().as_secs_f64();

        let recon_pgm = out_path(cfg, &format!("recon-{id}.pgm"));
        let recon_raw = out_path(cfg, &format!("recon-{id}.f64"));
        guard.track(&recon_pgm);
        pgm::write_pgm(&recon_pgm, &image, side, side, BitDepth::Sixteen)?;
        guard.track(&recon_raw);
        write_f64_sidecar(&recon_raw, &image)?;
        Ok((id.clone(), seconds))
    })?;

    let timings = out_path(cfg, "timings.csv");
    guard.track(&timings);
    let mut w = csv::Writer::from_path(&timings).map_err(|e| csv_err(&timings, e))?;
    w.write_record(["image_id", "seconds"])
        .map_err(|e| csv_err(&timings, e))?;
    for (id, secs) in &rows {
        w.write_record([id.clone(), secs.to_string()])
            .map_err(|e| csv_err(&timings, e))?;
    }
    w.flush().map_err(|e| CliError::io(&timings, e))?;
    guard.track(&timings);
    Ok(rows)
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::bad_file(path, e.to_string())
}

fn load_timings(cfg: &ExperimentConfig) -> HashMap<String, f64> {
    let path = out_path(cfg, "timings.csv");
    let mut map = HashMap::new();
    let Ok(text) = fs::read_to_string(&path) else {
        return map;
    };
    for line in text.lines().skip(1) {
        if let Some((id, secs)) = line.rsplit_once(',') {
            if let Ok(s) = secs.parse::<f64>() {
                map.insert(id.to_string(), s);
            }
        }
    }
    map
}

/// Scores recon-*.f64 against truth-*.f64 and writes metrics.csv.
pub fn evaluate(cfg: &ExperimentConfig, guard: &OutputGuard) -> Result<Vec<MetricsRow>> {
    let dir = &cfg.experiment.out_dir;
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n,
            None => continue,
        };
        if let Some(id) = name
            .strip_prefix("recon-")
            .and_then(|n| n.strip_suffix(".f64"))
        {
            ids.push(id.to_string());
        }
    }
    if ids.is_empty() {
        return Err(CliError::Config(format!(
            "no recon-*.f64 files in {} (run reconstruct first)",
            dir.display()
        )));
    }
    ids.sort();

    let timings = load_timings(cfg);
    let mut rows = Vec::with_capacity(ids.len());
    for id in &ids {
        let truth_path = out_path(cfg, &format!("truth-{id}.f64"));
        let recon_path = out_path(cfg, &format!("recon-{id}.f64"));
        let truth = read_f64_sidecar(&truth_path)?;
        let recon = read_f64_sidecar(&recon_path)?;
        let side = (truth.len() as f64).sqrt().round() as usize;
        if side * side != truth.len() {
            return Err(CliError::bad_file(&truth_path, "not a square image"));
        }
        let report = measure(&truth, &recon, side, 1.0).map_err(CliError::from)?;
        rows.push(MetricsRow {
            image_id: id.clone(),
            method: cfg.experiment.method.name().to_string(),
            views: cfg.pattern.n_views,
            pattern: match cfg.pattern.kind {
                PatternKindCfg::Uniform => "uniform".to_string(),
                PatternKindCfg::Nonuniform => "nonuniform".to_string(),
            },
            psnr: report.psnr,
            ssim: report.ssim,
            seconds: timings.get(id).copied().unwrap_or(0.0),
        });
    }

    let path = out_path(cfg, "metrics.csv");
    guard.track(&path);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    for row in &rows {
        w.serialize(row).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}

#[derive(Serialize)]
struct StageSeconds {
    simulate: f64,
    reconstruct: f64,
    evaluate: f64,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    version: String,
    stages: StageSeconds,
    config: &'a ExperimentConfig,
}

pub fn version_string() -> &'static str {
    concat!(
        env!("CARGO_PKG_VERSION"),
        " (",
        env!("DICE_GIT_DESCRIBE"),
        ")"
    )
}

/// Full pipeline: simulate, reconstruct, evaluate, then run metadata.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let guard = OutputGuard::new();
    let t0 = Instant::now();
    simulate(cfg, &guard)?;
    let t1 = Instant::now();
    reconstruct(cfg, &guard)?;
    let t2 = Instant::now();
    let rows = evaluate(cfg, &guard)?;
    let t3 = Instant::now();

    let meta = RunMeta {
        version: format!("dice {}", version_string()),
        stages: StageSeconds {
            simulate: (t1 - t0).as_secs_f64(),
            reconstruct: (t2 - t1).as_secs_f64(),
            evaluate: (t3 - t2).as_secs_f64(),
        },
        config: cfg,
    };
    let meta_path = out_path(cfg, "run-meta.toml");
    guard.track(&meta_path);
    let text = toml::to_string_pretty(&meta)
        .map_err(|e| CliError::Config(format!("metadata serialization: {e}")))?;
    fs::write(&meta_path, text).map_err(|e| CliError::io(&meta_path, e))?;

    guard.commit();
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Rho,
    Tau1,
    K,
    P,
    TSteps,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "rho" => Ok(SweepAxis::Rho),
            "tau1" => Ok(SweepAxis::Tau1),
            "k" => Ok(SweepAxis::K),
            "p" => Ok(SweepAxis::P),
            "t_steps" => Ok(SweepAxis::TSteps),
            other => Err(CliError::Config(format!(
                "unknown sweep axis {other:?}; one of rho, tau1, k, p, t_steps"
            ))),
        }
    }

    fn label(self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::Tau1 => "tau1",
            SweepAxis::K => "k",
            SweepAxis::P => "p",
            SweepAxis::TSteps => "t_steps",
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        let int = || -> Result<usize> {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(CliError::Config(format!(
                    "{} wants a positive integer, got {value}",
                    self.label()
                )));
            }
            Ok(value as usize)
        };
        match self {
            SweepAxis::Rho => cfg.dice.rho = value,
            SweepAxis::Tau1 => cfg.dice.tau1 = value,
            SweepAxis::K => cfg.dice.k = int()?,
            SweepAxis::P => cfg.dice.p = int()?,
            SweepAxis::TSteps => cfg.dice.t_steps = int()?,
        }
        Ok(())
    }
}

/// One full pipeline per value into its own subdirectory, sharing the root
/// seed, then a long-format summary: axis_value, psnr, ssim, seconds.
/// psnr and ssim are means over the image set; seconds sums the per-image
/// reconstruction times.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<PathBuf> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    ensure_out_dir(cfg)?;
    let guard = OutputGuard::new();
    let mut summary = Vec::with_capacity(values.len());
    for &value in values {
        let mut run_cfg = cfg.clone();
        axis.apply(&mut run_cfg, value)?;
        run_cfg.experiment.out_dir = cfg
            .experiment
            .out_dir
            .join(format!("sweep-{}-{value}", axis.label()));
        run_cfg.validate()?;
        let rows = run_all(&run_cfg)?;
        let n = rows.len() as f64;
        let psnr = rows.iter().map(|r| r.psnr).sum::<f64>() / n;
        let ssim = rows.iter().map(|r| r.ssim).sum::<f64>() / n;
        let seconds = rows.iter().map(|r| r.seconds).sum::<f64>();
        summary.push((value, psnr, ssim, seconds));
    }

    let path = out_path(cfg, "sweep.csv");
    guard.track(&path);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["axis_value", "psnr", "ssim", "seconds"])
        .map_err(|e| csv_err(&path, e))?;
    for (v, p, s, secs) in &summary {
        w.write_record([
            v.to_string(),
            p.to_string(),
            s.to_string(),
            secs.to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    guard.commit();
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_in(dir: &Path, extra: &[&str]) -> ExperimentConfig {
        let text = format!("[experiment]\nout_dir = {:?}\n", dir.join("run"));
        let overrides: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        ExperimentConfig::from_toml(&text, &overrides).unwrap()
    }

    #[test]
    fn fbp_smoke_run_produces_rows_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg_in(
            dir.path(),
            &[
                "experiment.method=fbp",
                "pattern.n_views=180",
                "experiment.image_side=32",
            ],
        );
        let rows = run_all(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].psnr > 10.0);
        assert_eq!(rows[0].method, "fbp");
        assert_eq!(rows[0].views, 180);
        for name in [
            "truth-phantom-0-base.pgm",
            "truth-phantom-0-base.f64",
            "sino-phantom-0-base.sino",
            "recon-phantom-0-base.pgm",
            "recon-phantom-0-base.f64",
            "timings.csv",
            "metrics.csv",
            "run-meta.toml",
        ] {
            assert!(out_path(&cfg, name).exists(), "{name} missing");
        }
    }

    #[test]
    fn metadata_config_echo_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg_in(
            dir.path(),
            &[
                "experiment.method=fbp",
                "pattern.n_views=30",
                "experiment.image_side=16",
            ],
        );
        run_all(&cfg).unwrap();
        let meta = fs::read_to_string(out_path(&cfg, "run-meta.toml")).unwrap();
        let table: toml::Table = meta.parse().unwrap();
        let echoed: ExperimentConfig = table["config"].clone().try_into().unwrap();
        assert_eq!(echoed, cfg);
        assert!(table["version"].as_str().unwrap().starts_with("dice "));
        assert!(table["stages"]["reconstruct"].as_float().unwrap() >= 0.0);
    }

    #[test]
    fn failed_run_leaves_no_partial_outputs() {
        let dir = tempfile::tempdir().unwrap();
        // Evaluate with nothing reconstructed: the run aborts after
        // simulate already wrote files; those must be cleaned up.
        let cfg = cfg_in(
            dir.path(),
            &["experiment.image_side=16", "pattern.n_views=30"],
        );
        let guard = OutputGuard::new();
        simulate(&cfg, &guard).unwrap();
        let out = evaluate(&cfg, &guard);
        assert!(out.is_err());
        drop(guard);
        let leftovers: Vec<_> = fs::read_dir(&cfg.experiment.out_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert!(leftovers.is_empty(), "leftovers: {leftovers:?}");
    }

    #[test]
    fn parallel_and_serial_runs_are_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mk = |sub: &str, workers: &str| {
            let text = format!("[experiment]\nout_dir = {:?}\n", dir.path().join(sub));
            ExperimentConfig::from_toml(
                &text,
                &[
                    "experiment.method=fbp".into(),
                    "experiment.image_side=32".into(),
                    "experiment.n_images=3".into(),
                    "pattern.n_views=30".into(),
                    format!("experiment.workers={workers}"),
                ],
            )
            .unwrap()
        };
        let serial = mk("serial", "1");
        let parallel = mk("parallel", "4");
        run_all(&serial).unwrap();
        run_all(&parallel).unwrap();
        for id in ["phantom-0-base", "phantom-1-rot90", "phantom-2-rot180"] {
            let a = fs::read(out_path(&serial, &format!("recon-{id}.f64"))).unwrap();
            let b = fs::read(out_path(&parallel, &format!("recon-{id}.f64"))).unwrap();
            assert_eq!(a, b, "recon {id} differs between serial and parallel");
        }
        let mask = |p: &Path| -> String {
            let text = fs::read_to_string(p).unwrap();
            text.lines()
                .map(|l| {
                    l.rsplit_once(',')
                        .map(|(head, _)| head.to_string())
                        .unwrap_or_default()
                })
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(
            mask(&out_path(&serial, "metrics.csv")),
            mask(&out_path(&parallel, "metrics.csv")),
            "metrics differ beyond the seconds column"
        );
    }

    #[test]
    fn sweep_writes_one_summary_row_per_value() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg_in(
            dir.path(),
            &[
                "experiment.method=dice",
                "experiment.image_side=16",
                "pattern.n_views=30",
                "dice.denoiser=gaussian",
                "dice.t_steps=5",
                "dice.t_max=10",
                "dice.beta_start=1e-4",
                "dice.beta_end=0.02",
            ],
        );
        let path = sweep(&cfg, SweepAxis::K, &[1.0, 3.0]).unwrap();
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "axis_value,psnr,ssim,seconds");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,"));
        assert!(lines[2].starts_with("3,"));
        assert!(out_path(&cfg, "sweep-k-1/metrics.csv").exists());
        assert!(out_path(&cfg, "sweep-k-3/metrics.csv").exists());
    }

    #[test]
    fn sweep_rejects_fractional_integer_axis() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg_in(dir.path(), &[]);
        let err = sweep(&cfg, SweepAxis::K, &[1.5]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
