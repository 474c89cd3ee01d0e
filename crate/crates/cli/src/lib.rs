//! `svplab` command-line front end.
//!
//! Exit codes: 0 success (or SVP for `check`), 1 config error, 2 IO or
//! malformed input, 3 not SVP, 4 degenerate, 5 unresolvable quantiles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod svg;

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use svplab::analysis::{self, quantile_contour, theoretical_threshold, transition_width, AnalysisError};
use svplab::experiment::{self, persist_results, run_grid_with, Execution, ExperimentError, GridConfig, Norm};
use svplab::sampling::SampleError;
use svplab::{CellSummary, Dataset, DistributionKind};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NOT_SVP: u8 = 3;
pub const EXIT_DEGENERATE: u8 = 4;
pub const EXIT_UNRESOLVABLE: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "svplab", version, about = "Support vector proliferation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    L2,
    L1,
}

impl From<NormArg> for Norm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L2 => Norm::L2,
            NormArg::L1 => Norm::L1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Contours,
    Width,
    Thresholds,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo grid and write the per-cell summary CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write one row per trial.
        #[arg(long)]
        trials_out: Option<PathBuf>,
        #[arg(long, env = "SVPLAB_WORKERS")]
        workers: Option<usize>,
        /// Overrides the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        norm: Option<NormArg>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Decide SVP for a single `y,x1,...,xd` dataset.
    Check {
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "l2")]
        norm: NormArg,
        #[arg(long, default_value_t = svplab::svp::DEFAULT_TOL)]
        tol: f64,
    },
    /// Post-process a summary CSV.
    Analyze {
        summary: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Level: default 0.8 for contours, 0.1 for width.
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        distribution: Option<DistributionKind>,
        #[arg(long, value_enum)]
        norm: Option<NormArg>,
        /// Sample sizes for `--mode thresholds` when no summary is given.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
    },
    /// Render a summary CSV as an SVG heatmap with the 2n ln n overlay.
    Heatmap {
        summary: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the first distribution in the file.
        #[arg(long)]
        distribution: Option<DistributionKind>,
        #[arg(long, value_enum)]
        norm: Option<NormArg>,
        #[arg(long)]
        no_overlay: bool,
    },
}

/// A failed command: message for stderr plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match e {
            ExperimentError::InvalidConfig(_) | ExperimentError::InvalidCounts { .. } => EXIT_CONFIG,
            ExperimentError::Format { .. } | ExperimentError::Io(_) => EXIT_IO,
        };
        Failure::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

pub fn run(cli: Cli) -> ExitCode {
    let mut stdout = io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("svplab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Runs one subcommand, writing its report to `out`; returns the exit code.
pub fn execute(command: Command, out: &mut dyn Write) -> Result<u8, Failure> {
    match command {
        Command::Simulate { config, out: path, trials_out, workers, seed, norm, tol, quiet } => {
            simulate(&config, &path, trials_out.as_deref(), workers, seed, norm, tol, quiet)
        }
        Command::Check { dataset, norm, tol } => check(&dataset, norm.into(), tol, out),
        Command::Analyze { summary, mode, q, out: path, distribution, norm, n } => {
            analyze(summary.as_deref(), mode, q, path.as_deref(), distribution, norm.map(Into::into), &n, out)
        }
        Command::Heatmap { summary, out: path, distribution, norm, no_overlay } => {
            heatmap(&summary, &path, distribution, norm.map(Into::into), no_overlay)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    config: &Path,
    path: &Path,
    trials_out: Option<&Path>,
    workers: Option<usize>,
    seed: Option<u64>,
    norm: Option<NormArg>,
    tol: Option<f64>,
    quiet: bool,
) -> Result<u8, Failure> {
    let text = fs::read_to_string(config).map_err(|e| io_failure(config, e))?;
    let mut cfg = GridConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(n) = norm {
        cfg.norm = n.into();
    }
    if let Some(t) = tol {
        cfg.tolerance = t;
    }
    cfg.validate()?;
    let workers = workers
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let mut progress = |s: &CellSummary, done: usize, total: usize| {
        if !quiet {
            eprintln!(
                "[{done}/{total}] {} {} n={} d={} rate={:.4} ci=[{:.4}, {:.4}] degenerate={}",
                s.cell.distribution, s.cell.norm, s.cell.n, s.cell.d, s.rate, s.ci_low, s.ci_high, s.degenerate_count
            );
        }
    };
    let (summaries, records) = run_grid_with(&cfg, Execution::from_workers(workers), trials_out.is_some(), &mut progress)?;
    persist_results(path, &summaries, trials_out.map(|p| (p, records.as_slice())))?;
    Ok(EXIT_OK)
}

fn check(path: &Path, norm: Norm, tol: f64, out: &mut dyn Write) -> Result<u8, Failure> {
    if !(tol > 0.0) {
        return Err(Failure::new(EXIT_CONFIG, "--tol must be positive"));
    }
    let file = fs::File::open(path).map_err(|e| io_failure(path, e))?;
    let ds = Dataset::read_csv(BufReader::new(file)).map_err(|e| match e {
        SampleError::Io(e) => io_failure(path, e),
        other => Failure::new(EXIT_IO, format!("{}: {other}", path.display())),
    })?;
    let v = experiment::detect(&ds, norm, tol);
    let verdict = if v.degenerate {
        "degenerate"
    } else if v.svp {
        "svp"
    } else {
        "not svp"
    };
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| Failure::new(EXIT_IO, e.to_string()));
    w(out, format!("verdict: {verdict}"))?;
    w(out, format!("norm: {norm}"))?;
    w(out, format!("n: {}", ds.n()))?;
    w(out, format!("d: {}", ds.d()))?;
    w(out, format!("tolerance: {tol:e}"))?;
    w(out, format!("min_margin_slack: {}", v.min_margin_slack))?;
    w(out, "i,y,alpha_sign,alpha,loo".into())?;
    for i in 0..ds.n() {
        let a = v.alpha_direction.get(i).copied();
        let sign = match a {
            Some(x) if x > 0.0 => "+",
            Some(x) if x < 0.0 => "-",
            Some(_) => "0",
            None => "",
        };
        let fmt = |x: Option<f64>| x.map(|x| x.to_string()).unwrap_or_default();
        w(out, format!("{},{},{sign},{},{}", i + 1, ds.y()[i], fmt(a), fmt(v.loo_stats.get(i).copied())))?;
    }
    Ok(if v.degenerate {
        EXIT_DEGENERATE
    } else if v.svp {
        EXIT_OK
    } else {
        EXIT_NOT_SVP
    })
}

fn load_selection(
    path: &Path,
    distribution: Option<DistributionKind>,
    norm: Option<Norm>,
) -> Result<Vec<CellSummary>, Failure> {
    let all = experiment::load_results(path)?;
    Ok(all
        .into_iter()
        .filter(|s| distribution.is_none_or(|d| s.cell.distribution == d))
        .filter(|s| norm.is_none_or(|n| s.cell.norm == n))
        .collect())
}

/// Selection split by `(distribution, norm)`, in sorted order.
fn groups(summaries: &[CellSummary]) -> Vec<((DistributionKind, Norm), Vec<&CellSummary>)> {
    let mut map: std::collections::BTreeMap<(DistributionKind, Norm), Vec<&CellSummary>> = Default::default();
    for s in summaries {
        map.entry((s.cell.distribution, s.cell.norm)).or_default().push(s);
    }
    map.into_iter().collect()
}

fn write_output(path: Option<&Path>, body: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| io_failure(p, e)),
        None => out.write_all(body.as_bytes()).map_err(|e| Failure::new(EXIT_IO, e.to_string())),
    }
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    summary: Option<&Path>,
    mode: Mode,
    q: Option<f64>,
    path: Option<&Path>,
    distribution: Option<DistributionKind>,
    norm: Option<Norm>,
    n_list: &[usize],
    out: &mut dyn Write,
) -> Result<u8, Failure> {
    let selection = match summary {
        Some(p) => load_selection(p, distribution, norm)?,
        None if mode == Mode::Thresholds && !n_list.is_empty() => Vec::new(),
        None => return Err(Failure::new(EXIT_CONFIG, "a summary CSV is required for this mode")),
    };
    let mut body = String::new();
    let mut code = EXIT_OK;
    match mode {
        Mode::Thresholds => {
            let mut ns: Vec<usize> =
                if n_list.is_empty() { selection.iter().map(|s| s.cell.n).collect() } else { n_list.to_vec() };
            ns.sort_unstable();
            ns.dedup();
            body.push_str("n,threshold\n");
            for n in ns {
                let t = theoretical_threshold(n).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
                body.push_str(&format!("{n},{t}\n"));
            }
        }
        Mode::Contours => {
            let q = q.unwrap_or(0.8);
            if !(0.0..=1.0).contains(&q) {
                return Err(Failure::new(EXIT_CONFIG, "--q must lie in [0, 1]"));
            }
            body.push_str("distribution,norm,q,n,d,tau,threshold\n");
            for ((dist, norm), cells) in groups(&selection) {
                let contour = quantile_contour(cells.iter().copied(), q);
                let all_n: std::collections::BTreeSet<usize> = cells.iter().map(|s| s.cell.n).collect();
                for n in all_n {
                    match contour.get(&n) {
                        Some(&d) => body.push_str(&format!(
                            "{dist},{norm},{q},{n},{d},{},{}\n",
                            analysis::tau(n, d as f64),
                            theoretical_threshold(n).unwrap_or(f64::NAN)
                        )),
                        None => {
                            eprintln!("svplab: {dist} {norm} n={n}: rate never reaches {q}");
                            code = EXIT_UNRESOLVABLE;
                        }
                    }
                }
            }
        }
        Mode::Width => {
            let q = q.unwrap_or(0.1);
            body.push_str("distribution,norm,n,q,tau_low,tau_high,w_hat\n");
            for ((dist, norm), cells) in groups(&selection) {
                let all_n: std::collections::BTreeSet<usize> = cells.iter().map(|s| s.cell.n).collect();
                for n in all_n {
                    match transition_width(cells.iter().copied(), n, q) {
                        Ok(w) => body.push_str(&format!(
                            "{dist},{norm},{n},{q},{},{},{}\n",
                            w.tau_low, w.tau_high, w.w_hat
                        )),
                        Err(e @ AnalysisError::Unresolvable { .. }) => {
                            eprintln!("svplab: {dist} {norm}: {e}");
                            code = EXIT_UNRESOLVABLE;
                        }
                        Err(e) => return Err(Failure::new(EXIT_CONFIG, e.to_string())),
                    }
                }
            }
        }
    }
    if mode != Mode::Thresholds && selection.is_empty() {
        return Err(Failure::new(EXIT_CONFIG, "no summaries match the selection"));
    }
    write_output(path, &body, out)?;
    Ok(code)
}

fn heatmap(
    summary: &Path,
    path: &Path,
    distribution: Option<DistributionKind>,
    norm: Option<Norm>,
    no_overlay: bool,
) -> Result<u8, Failure> {
    let selection = load_selection(summary, distribution, norm)?;
    // one heatmap per (distribution, norm): default to the first group
    let first = selection.first().map(|s| (s.cell.distribution, s.cell.norm));
    let chosen: Vec<CellSummary> =
        selection.into_iter().filter(|s| Some((s.cell.distribution, s.cell.norm)) == first).collect();
    let mut spec = svg::HeatmapSpec::default();
    if no_overlay {
        spec.overlays.clear();
    }
    if let Some((d, n)) = first {
        spec.title = format!("SVP rate, {d}, {n}");
    }
    let text = svg::render_heatmap_svg(&chosen, &spec).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    fs::write(path, text).map_err(|e| io_failure(path, e))?;
    Ok(EXIT_OK)
}
