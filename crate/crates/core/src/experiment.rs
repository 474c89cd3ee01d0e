//! Monte Carlo harness over `(distribution, n, d)` grids.
//!
//! Each trial is a pure function of `(config, cell, trial index)`: its
//! dataset seed is derived from the master seed and the cell coordinates, so
//! summaries do not depend on worker count or scheduling. With the
//! `parallel` feature the trials of a cell are spread over a rayon pool.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis;
use crate::sampling::{draw_dataset, trial_seed, DistributionKind, LabelMode, SampleSpec};
use crate::solvers::detect_svp_l1;
use crate::svp::{detect_svp_l2, SvpVerdict, DEFAULT_TOL};

pub const SUMMARY_HEADER: &str =
    "distribution,norm,n,d,tau,trials,svp_count,degenerate_count,rate,ci_low,ci_high,master_seed";
pub const TRIAL_HEADER: &str = "distribution,norm,n,d,trial,svp,degenerate,min_margin_slack";

/// Two-sided 95% normal quantile used for reported intervals.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid counts: {successes} successes out of {trials} trials")]
    InvalidCounts { successes: u64, trials: u64 },
    #[error("{path}: line {line}: {msg}")]
    Format { path: String, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    L1,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L2 => "l2",
            Norm::L1 => "l1",
        })
    }
}

impl FromStr for Norm {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l2" => Ok(Norm::L2),
            "l1" => Ok(Norm::L1),
            other => Err(ExperimentError::InvalidConfig(format!("unknown norm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub distribution: DistributionKind,
    pub norm: Norm,
    pub n: usize,
    pub d: usize,
}

impl CellId {
    pub fn tau(&self) -> f64 {
        analysis::tau(self.n, self.d as f64)
    }
}

/// Variance profile `λ` applied to every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPattern {
    Isotropic,
    /// First `k` coordinates have variance `s`, the rest variance 1.
    Spike { k: usize, s: f64 },
    Explicit(Vec<f64>),
}

impl LambdaPattern {
    pub fn resolve(&self, d: usize) -> Vec<f64> {
        match self {
            LambdaPattern::Isotropic => vec![1.0; d],
            LambdaPattern::Spike { k, s } => (0..d).map(|j| if j < *k { *s } else { 1.0 }).collect(),
            LambdaPattern::Explicit(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DimGrid {
    Dims(Vec<usize>),
    /// `d = round(τ · 2 n ln n)` per `n`.
    Taus(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub distributions: Vec<DistributionKind>,
    pub n_values: Vec<usize>,
    pub dims: DimGrid,
    pub trials: u64,
    pub master_seed: u64,
    pub norm: Norm,
    pub lambda_pattern: LambdaPattern,
    pub tolerance: f64,
    pub workers: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    distributions: Vec<DistributionKind>,
    n_values: Vec<usize>,
    #[serde(default)]
    d_values: Option<Vec<usize>>,
    #[serde(default)]
    tau_values: Option<Vec<f64>>,
    trials: u64,
    master_seed: u64,
    #[serde(default = "default_norm")]
    norm: Norm,
    #[serde(default = "default_pattern")]
    lambda_pattern: LambdaPattern,
    #[serde(default = "default_tol")]
    tolerance: f64,
    #[serde(default)]
    workers: Option<usize>,
}

fn default_norm() -> Norm {
    Norm::L2
}
fn default_pattern() -> LambdaPattern {
    LambdaPattern::Isotropic
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl GridConfig {
    /// Single-cell isotropic ℓ2 configuration.
    pub fn single(distribution: DistributionKind, n: usize, d: usize, trials: u64, master_seed: u64) -> Self {
        Self {
            distributions: vec![distribution],
            n_values: vec![n],
            dims: DimGrid::Dims(vec![d]),
            trials,
            master_seed,
            norm: Norm::L2,
            lambda_pattern: LambdaPattern::Isotropic,
            tolerance: DEFAULT_TOL,
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let raw: ConfigFile =
            serde_json::from_str(text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        let dims = match (raw.d_values, raw.tau_values) {
            (Some(d), None) => DimGrid::Dims(d),
            (None, Some(t)) => DimGrid::Taus(t),
            _ => {
                return Err(ExperimentError::InvalidConfig("exactly one of d_values and tau_values is required".into()))
            }
        };
        let cfg = GridConfig {
            distributions: raw.distributions,
            n_values: raw.n_values,
            dims,
            trials: raw.trials,
            master_seed: raw.master_seed,
            norm: raw.norm,
            lambda_pattern: raw.lambda_pattern,
            tolerance: raw.tolerance,
            workers: raw.workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.distributions.is_empty() || self.n_values.is_empty() {
            return bad("distributions and n_values must be non-empty");
        }
        if self.n_values.contains(&0) {
            return bad("n must be positive");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        match &self.dims {
            DimGrid::Dims(d) if d.is_empty() => return bad("d_values is empty"),
            DimGrid::Taus(t) if t.is_empty() => return bad("tau_values is empty"),
            DimGrid::Taus(t) if t.iter().any(|&x| !(x > 0.0)) => return bad("tau values must be positive"),
            DimGrid::Taus(_) if self.n_values.iter().any(|&n| n < 2) => return bad("tau grids need n >= 2"),
            _ => {}
        }
        for cell in self.cells() {
            if cell.d == 0 {
                return bad("every cell needs d >= 1");
            }
            let lambda = self.lambda_pattern.resolve(cell.d);
            if lambda.len() != cell.d {
                return Err(ExperimentError::InvalidConfig(format!(
                    "explicit lambda has length {} but cell has d = {}",
                    lambda.len(),
                    cell.d
                )));
            }
            crate::sampling::dimension_proxies(&lambda).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        }
        if let LambdaPattern::Spike { s, .. } = self.lambda_pattern {
            if !(s >= 0.0) {
                return bad("spike variance must be nonnegative");
            }
        }
        Ok(())
    }

    /// Grid dimensions for one sample size.
    pub fn dims_for(&self, n: usize) -> Vec<usize> {
        let mut ds: Vec<usize> = match &self.dims {
            DimGrid::Dims(d) => d.clone(),
            DimGrid::Taus(t) => {
                let thr = analysis::theoretical_threshold(n).unwrap_or(f64::NAN);
                t.iter().map(|tau| (tau * thr).round() as usize).collect()
            }
        };
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    /// All cells, sorted by `(distribution, n, d)`.
    pub fn cells(&self) -> Vec<CellId> {
        let mut cells = Vec::new();
        for &distribution in &self.distributions {
            for &n in &self.n_values {
                for d in self.dims_for(n) {
                    cells.push(CellId { distribution, norm: self.norm, n, d });
                }
            }
        }
        cells.sort();
        cells.dedup();
        cells
    }

    pub fn sample_spec(&self, cell: &CellId, trial_index: u64) -> SampleSpec {
        SampleSpec {
            n: cell.n,
            d: cell.d,
            distribution: cell.distribution,
            lambda: self.lambda_pattern.resolve(cell.d),
            label_mode: LabelMode::BalancedFixed,
            seed: trial_seed(self.master_seed, cell.distribution, cell.n, cell.d, trial_index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub cell: CellId,
    pub trial_index: u64,
    pub svp: bool,
    pub degenerate: bool,
    pub min_margin_slack: f64,
    pub wall_time: Duration,
}

/// Detector for the configured norm.
pub fn detect(ds: &crate::sampling::Dataset, norm: Norm, tol: f64) -> SvpVerdict {
    match norm {
        Norm::L2 => detect_svp_l2(ds, tol),
        Norm::L1 => detect_svp_l1(ds, tol),
    }
}

pub fn run_trial(cell: &CellId, trial_index: u64, cfg: &GridConfig) -> TrialRecord {
    let start = Instant::now();
    let verdict = match draw_dataset(&cfg.sample_spec(cell, trial_index)) {
        Ok(ds) => detect(&ds, cell.norm, cfg.tolerance),
        Err(_) => SvpVerdict::degenerate(cfg.tolerance),
    };
    TrialRecord {
        cell: *cell,
        trial_index,
        svp: verdict.svp && !verdict.degenerate,
        degenerate: verdict.degenerate,
        min_margin_slack: verdict.min_margin_slack,
        wall_time: start.elapsed(),
    }
}

/// Monte Carlo aggregate for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: CellId,
    pub trials: u64,
    pub svp_count: u64,
    pub degenerate_count: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub tau: f64,
    pub master_seed: u64,
}

impl CellSummary {
    /// Degenerate trials count as non-SVP in `rate`.
    pub fn from_counts(
        cell: CellId,
        trials: u64,
        svp_count: u64,
        degenerate_count: u64,
        master_seed: u64,
    ) -> Result<Self, ExperimentError> {
        if svp_count + degenerate_count > trials {
            return Err(ExperimentError::InvalidCounts { successes: svp_count + degenerate_count, trials });
        }
        let (ci_low, ci_high) = wilson_interval(svp_count, trials, Z_95)?;
        Ok(Self {
            cell,
            trials,
            svp_count,
            degenerate_count,
            rate: svp_count as f64 / trials as f64,
            ci_low,
            ci_high,
            tau: cell.tau(),
            master_seed,
        })
    }

    /// Binomial standard error of `rate`.
    pub fn std_error(&self) -> f64 {
        (self.rate * (1.0 - self.rate) / self.trials as f64).sqrt()
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.cell.distribution,
            self.cell.norm,
            self.cell.n,
            self.cell.d,
            self.tau,
            self.trials,
            self.svp_count,
            self.degenerate_count,
            self.rate,
            self.ci_low,
            self.ci_high,
            self.master_seed
        )
    }
}

/// Wilson score interval, clamped to `[0, 1]`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64), ExperimentError> {
    if trials == 0 || successes > trials || !(z > 0.0) {
        return Err(ExperimentError::InvalidCounts { successes, trials });
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((lo, hi))
}

/// How trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon pool with the given number of threads. Falls back to
    /// sequential execution when the `parallel` feature is disabled.
    Parallel(usize),
}

impl Execution {
    pub fn from_workers(workers: usize) -> Self {
        if workers <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel(workers)
        }
    }
}

/// Called after each finished cell with `(summary, cells_done, cells_total)`.
pub type ProgressSink<'a> = dyn FnMut(&CellSummary, usize, usize) + 'a;

/// Runs every cell of the grid and returns summaries sorted by
/// `(distribution, n, d)`.
pub fn run_grid(cfg: &GridConfig, progress: &mut ProgressSink<'_>) -> Result<Vec<CellSummary>, ExperimentError> {
    let exec = Execution::from_workers(cfg.workers.unwrap_or(1));
    run_grid_with(cfg, exec, false, progress).map(|(s, _)| s)
}

/// Like [`run_grid`] with explicit scheduling; optionally keeps every
/// [`TrialRecord`].
pub fn run_grid_with(
    cfg: &GridConfig,
    exec: Execution,
    keep_records: bool,
    progress: &mut ProgressSink<'_>,
) -> Result<(Vec<CellSummary>, Vec<TrialRecord>), ExperimentError> {
    cfg.validate()?;
    let cells = cfg.cells();
    let total = cells.len();
    let mut summaries = Vec::with_capacity(total);
    let mut records = Vec::new();
    let runner = Runner::new(exec);
    for (idx, cell) in cells.iter().enumerate() {
        let trials = runner.run_cell(cell, cfg);
        let svp = trials.iter().filter(|r| r.svp).count() as u64;
        let degenerate = trials.iter().filter(|r| r.degenerate).count() as u64;
        let summary = CellSummary::from_counts(*cell, cfg.trials, svp, degenerate, cfg.master_seed)?;
        progress(&summary, idx + 1, total);
        summaries.push(summary);
        if keep_records {
            records.extend(trials);
        }
    }
    Ok((summaries, records))
}

enum Runner {
    Sequential,
    #[cfg(feature = "parallel")]
    Pool(rayon::ThreadPool),
}

impl Runner {
    fn new(exec: Execution) -> Self {
        match exec {
            Execution::Sequential => Runner::Sequential,
            #[cfg(feature = "parallel")]
            Execution::Parallel(workers) => rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_or(Runner::Sequential, Runner::Pool),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel(_) => Runner::Sequential,
        }
    }

    fn run_cell(&self, cell: &CellId, cfg: &GridConfig) -> Vec<TrialRecord> {
        match self {
            Runner::Sequential => (0..cfg.trials).map(|t| run_trial(cell, t, cfg)).collect(),
            #[cfg(feature = "parallel")]
            Runner::Pool(pool) => {
                use rayon::prelude::*;
                pool.install(|| (0..cfg.trials).into_par_iter().map(|t| run_trial(cell, t, cfg)).collect())
            }
        }
    }
}

pub fn write_summaries<W: Write>(mut w: W, summaries: &[CellSummary]) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for s in summaries {
        writeln!(w, "{}", s.to_csv_row())?;
    }
    Ok(())
}

pub fn write_trials<W: Write>(mut w: W, records: &[TrialRecord]) -> std::io::Result<()> {
    writeln!(w, "{TRIAL_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.cell.distribution,
            r.cell.norm,
            r.cell.n,
            r.cell.d,
            r.trial_index,
            u8::from(r.svp),
            u8::from(r.degenerate),
            r.min_margin_slack
        )?;
    }
    Ok(())
}

/// Writes the summary CSV and, if given, the per-trial CSV.
pub fn persist_results(
    path: &Path,
    summaries: &[CellSummary],
    records: Option<(&Path, &[TrialRecord])>,
) -> Result<(), ExperimentError> {
    let mut buf = Vec::new();
    write_summaries(&mut buf, summaries)?;
    fs::write(path, buf)?;
    if let Some((trial_path, recs)) = records {
        let mut buf = Vec::new();
        write_trials(&mut buf, recs)?;
        fs::write(trial_path, buf)?;
    }
    Ok(())
}

pub fn load_results(path: &Path) -> Result<Vec<CellSummary>, ExperimentError> {
    let file = fs::File::open(path)?;
    read_summaries(BufReader::new(file), &path.display().to_string())
}

/// Parses a summary CSV; `source` labels error messages.
pub fn read_summaries<R: BufRead>(r: R, source: &str) -> Result<Vec<CellSummary>, ExperimentError> {
    let err = |line: usize, msg: String| ExperimentError::Format { path: source.to_string(), line, msg };
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if lineno == 1 {
            if line != SUMMARY_HEADER {
                return Err(err(1, format!("expected header `{SUMMARY_HEADER}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(err(lineno, format!("expected 12 fields, found {}", f.len())));
        }
        macro_rules! parse {
            ($i:expr, $t:ty) => {
                f[$i].parse::<$t>().map_err(|e| err(lineno, format!("field {}: {e}", $i + 1)))?
            };
        }
        let distribution: DistributionKind = f[0].parse().map_err(|e| err(lineno, format!("{e}")))?;
        let norm: Norm = f[1].parse().map_err(|e| err(lineno, format!("{e}")))?;
        let cell = CellId { distribution, norm, n: parse!(2, usize), d: parse!(3, usize) };
        let summary = CellSummary {
            cell,
            tau: parse!(4, f64),
            trials: parse!(5, u64),
            svp_count: parse!(6, u64),
            degenerate_count: parse!(7, u64),
            rate: parse!(8, f64),
            ci_low: parse!(9, f64),
            ci_high: parse!(10, f64),
            master_seed: parse!(11, u64),
        };
        if summary.trials == 0 || summary.svp_count + summary.degenerate_count > summary.trials {
            return Err(err(lineno, "inconsistent trial counts".into()));
        }
        out.push(summary);
    }
    Ok(out)
}
