//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every criterion is
//! evaluated and reported even when an earlier one fails. Exits non-zero if
//! any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use svplab::analysis::{facet_bound, mills_bounds, normal_quantile, transition_width};
use svplab::experiment::{run_grid_with, CellSummary, DimGrid, Execution, GridConfig, LambdaPattern, Norm};
use svplab::sampling::{dimension_proxies, draw_dataset, splitmix64, SampleSpec};
use svplab::solvers::{default_max_iter, detect_svp_l1, signed_features, solve_hard_margin_qp, solve_l1_dual_lp, LpStatus};
use svplab::svp::{detect_svp_l2, loo_statistics_direct, projection_point, DEFAULT_TOL};
use svplab::{Dataset, DistributionKind};

const MASTER_SEED: u64 = 1;

type Criterion = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn workers() -> Execution {
    let n = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    Execution::from_workers(n)
}

fn grid(cfg: &GridConfig) -> Vec<CellSummary> {
    run_grid_with(cfg, workers(), false, &mut |_, _, _| {}).expect("valid config").0
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Deterministic stream of small integers for instance generation.
struct Counter(u64);

impl Counter {
    fn next(&mut self, bound: usize) -> usize {
        self.0 = splitmix64(self.0);
        (self.0 % bound as u64) as usize
    }
}

fn equivalence_battery() -> Outcome {
    let mut rng = Counter(MASTER_SEED);
    let (mut instances, mut skipped, mut disagreements, mut worst_rel) = (0, 0, 0, 0.0_f64);
    let mut seed = 0u64;
    while instances < 500 {
        seed += 1;
        let dist = DistributionKind::ALL[instances % 6];
        let n = 2 + rng.next(11);
        let d = n + rng.next(4 * n + 1);
        let ds = draw_dataset(&SampleSpec::isotropic(n, d, dist, seed)).unwrap();
        let v = detect_svp_l2(&ds, DEFAULT_TOL);
        let direct = loo_statistics_direct(&ds);
        let (false, Ok(direct)) = (v.degenerate, direct) else {
            skipped += 1;
            continue;
        };
        instances += 1;
        for (a, b) in direct.iter().zip(&v.loo_stats) {
            worst_rel = worst_rel.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
        }
        let loo_svp = direct.iter().all(|&l| l < 1.0 - DEFAULT_TOL);
        let proj = projection_point(&ds).unwrap();
        let bmax = proj.barycentric.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        let bary_svp = proj.barycentric.iter().all(|&a| a > DEFAULT_TOL * bmax);
        let qp_svp = solve_hard_margin_qp(&ds, DEFAULT_TOL, default_max_iter(n)).map(|s| s.all_support()).unwrap_or(false);
        if !(loo_svp == v.svp && bary_svp == v.svp && qp_svp == v.svp) {
            disagreements += 1;
        }
    }
    outcome(
        disagreements == 0 && worst_rel <= 1e-8,
        format!("{instances} instances ({skipped} degenerate skipped), {disagreements} disagreements, max LOO rel diff {worst_rel:.1e}"),
    )
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..m {
            cur.push(j);
            go(j + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, m, k, &mut Vec::new(), &mut out);
    out
}

enum Vertex {
    Unbounded,
    Optimum { objective: f64, unique: Option<DVector<f64>> },
}

/// Exhaustive vertex enumeration of `max 1ᵀα s.t. |Aᵀα| ≤ 1` inside
/// `range(A)`.
fn vertex_oracle(ds: &Dataset) -> Vertex {
    let s = signed_features(ds);
    let a = DMatrix::from_row_slice(s.rows(), s.cols(), s.as_slice());
    let (n, d) = a.shape();
    let ones = DVector::from_element(n, 1.0);
    let svd = a.clone().svd(true, true);
    if (&a * svd.solve(&ones, 1e-12).unwrap() - &ones).norm() > 1e-8 {
        return Vertex::Unbounded;
    }
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > 1e-10 * smax).collect();
    let r = keep.len();
    let u_full = svd.u.unwrap();
    let u = DMatrix::from_fn(n, r, |i, k| u_full[(i, keep[k])]);
    let b = u.transpose() * &a;
    let c = u.transpose() * &ones;
    let unit = DVector::from_element(r, 1.0);
    let row = |j: usize| -> DVector<f64> {
        let col = b.column(j % d).clone_owned();
        if j < d { col } else { -col }
    };
    let mut vertices = Vec::new();
    for sel in subsets(2 * d, r) {
        let m = DMatrix::from_fn(r, r, |i, k| row(sel[i])[k]);
        let Some(beta) = m.clone().lu().solve(&unit) else { continue };
        if beta.iter().all(|v| v.is_finite())
            && (&m * &beta - &unit).amax() <= 1e-9
            && (b.transpose() * &beta).amax() <= 1.0 + 1e-9
        {
            vertices.push((c.dot(&beta), &u * beta));
        }
    }
    let best = vertices.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    let mut maximizers: Vec<DVector<f64>> = Vec::new();
    for (obj, v) in vertices {
        if obj >= best - 1e-9 && !maximizers.iter().any(|m| (m - &v).amax() <= 1e-7) {
            maximizers.push(v);
        }
    }
    let unique = (r == n && maximizers.len() == 1).then(|| maximizers.remove(0));
    Vertex::Optimum { objective: best, unique }
}

fn lp_oracle() -> Outcome {
    let (mut bounded, mut objective_fail, mut verdict_fail, mut worst) = (0, 0, 0, 0.0_f64);
    let pairs: Vec<(usize, usize)> = (1..=3usize).flat_map(|n| (n..=8).map(move |d| (n, d))).collect();
    let total = 200;
    for idx in 0..total {
        let (n, d) = pairs[idx % pairs.len()];
        let dist = DistributionKind::ALL[idx % 6];
        let ds = draw_dataset(&SampleSpec::isotropic(n, d, dist, MASTER_SEED * 10_000 + idx as u64)).unwrap();
        let sol = solve_l1_dual_lp(&ds);
        let verdict = detect_svp_l1(&ds, DEFAULT_TOL);
        match vertex_oracle(&ds) {
            Vertex::Unbounded => {
                if sol.status != LpStatus::Unbounded || !verdict.degenerate {
                    verdict_fail += 1;
                }
            }
            Vertex::Optimum { objective, unique } => {
                bounded += 1;
                let err = (sol.objective - objective).abs();
                worst = worst.max(err);
                if err > 1e-9 || err.is_nan() {
                    objective_fail += 1;
                }
                let ok = match unique {
                    None => verdict.degenerate,
                    Some(v) => {
                        let oracle_svp = v.iter().all(|&x| x > DEFAULT_TOL * v.amax());
                        !verdict.degenerate && verdict.svp == oracle_svp
                    }
                };
                if !ok {
                    verdict_fail += 1;
                }
            }
        }
    }
    outcome(
        objective_fail == 0 && verdict_fail == 0,
        format!(
            "{total} instances ({bounded} bounded), max objective error {worst:.1e}, {objective_fail} objective and {verdict_fail} verdict mismatches"
        ),
    )
}

fn gaussian_cells(n: usize, ds: Vec<usize>, trials: u64) -> GridConfig {
    GridConfig { dims: DimGrid::Dims(ds), ..GridConfig::single(DistributionKind::Gaussian, n, 1, trials, MASTER_SEED) }
}

fn criterion3_config() -> GridConfig {
    gaussian_cells(50, vec![160, 391, 630], 400)
}

fn phase_transition_location() -> Outcome {
    let s = grid(&criterion3_config());
    let rate = |d: usize| s.iter().find(|c| c.cell.d == d).unwrap().rate;
    let (lo, mid, hi) = (rate(160), rate(391), rate(630));
    outcome(
        lo <= 0.05 && hi >= 0.95 && (0.55..=0.95).contains(&mid),
        format!("p(d=160) = {lo:.4} (<= 0.05), p(d=391) = {mid:.4} (in [0.55, 0.95]), p(d=630) = {hi:.4} (>= 0.95)"),
    )
}

fn below_linear() -> Outcome {
    let s = grid(&gaussian_cells(100, vec![200], 400));
    outcome(s[0].rate <= 0.01, format!("n=100 d=200: p = {:.4} (<= 0.01)", s[0].rate))
}

fn universality() -> Outcome {
    let d = (2.0 * 70.0 * 70f64.ln()).round() as usize;
    let cfg = GridConfig {
        distributions: DistributionKind::ALL.to_vec(),
        ..GridConfig::single(DistributionKind::Gaussian, 70, d, 400, MASTER_SEED)
    };
    let s = grid(&cfg);
    let rates: Vec<String> = s.iter().map(|c| format!("{}={:.3}", c.cell.distribution, c.rate)).collect();
    let max = s.iter().map(|c| c.rate).fold(f64::MIN, f64::max);
    let min = s.iter().map(|c| c.rate).fold(f64::MAX, f64::min);
    outcome(
        d == 595 && s.len() == 6 && max - min <= 0.12,
        format!("d={d}, band width {:.3} (<= 0.12): {}", max - min, rates.join(" ")),
    )
}

fn anisotropy() -> Outcome {
    let (n, d) = (40usize, 4000usize);
    let spike = LambdaPattern::Spike { k: 1, s: (d as f64).sqrt() };
    let (_, d_inf) = dimension_proxies(&spike.resolve(d)).unwrap();
    let iso = grid(&GridConfig::single(DistributionKind::Gaussian, n, d, 200, MASTER_SEED))[0].rate;
    let cfg = GridConfig { lambda_pattern: spike, ..GridConfig::single(DistributionKind::Gaussian, n, d, 200, MASTER_SEED) };
    let aniso = grid(&cfg)[0].rate;
    outcome(
        iso >= 0.9 && aniso <= 0.2,
        format!("isotropic p = {iso:.3} (>= 0.9), spike (d_inf = {d_inf:.1}) p = {aniso:.3} (<= 0.2)"),
    )
}

fn l1_dominance() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut lines = Vec::new();
    let mut pass = true;
    for n in [10usize, 20] {
        let base = GridConfig { dims: DimGrid::Dims(vec![100, 200, 400]), ..GridConfig::single(DistributionKind::Gaussian, n, 1, 100, MASTER_SEED) };
        let l2 = grid(&base);
        let l1 = grid(&GridConfig { norm: Norm::L1, ..base });
        for (a, b) in l1.iter().zip(&l2) {
            let pooled = (a.rate + b.rate) / 2.0;
            let se = (pooled * (1.0 - pooled) * (1.0 / a.trials as f64 + 1.0 / b.trials as f64)).sqrt();
            let excess = a.rate - b.rate - 3.0 * se;
            worst = worst.max(excess);
            pass &= excess <= 0.0;
            lines.push(format!("n={} d={}: l1 {:.2} l2 {:.2}", a.cell.n, a.cell.d, a.rate, b.rate));
        }
    }
    outcome(pass, format!("max(l1 - l2 - 3se) = {worst:.3}; {}", lines.join(", ")))
}

fn width_trend() -> Outcome {
    let taus: Vec<f64> = (0..=24).map(|k| 0.4 + 0.05 * k as f64).collect();
    let cfg = GridConfig {
        n_values: vec![40, 60, 80, 100],
        dims: DimGrid::Taus(taus),
        ..GridConfig::single(DistributionKind::Gaussian, 1, 1, 400, MASTER_SEED)
    };
    let s = grid(&cfg);
    let mut widths = Vec::new();
    for n in [40usize, 60, 80, 100] {
        match transition_width(&s, n, 0.1) {
            Ok(w) => widths.push((n, w.w_hat)),
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        }
    }
    let max = widths.iter().map(|w| w.1).fold(f64::MIN, f64::max);
    let min = widths.iter().map(|w| w.1).fold(f64::MAX, f64::min);
    let listed: Vec<String> = widths.iter().map(|(n, w)| format!("n={n}: {w:.3}")).collect();
    outcome(min > 0.0 && max / min < 2.0, format!("ratio {:.3} (< 2); {}", max / min, listed.join(", ")))
}

fn invariance_suite() -> Outcome {
    let mut rng = Counter(MASTER_SEED ^ 0x5eed);
    let (mut checked, mut failures) = (0, 0);
    let mut seed = 50_000u64;
    while checked < 100 {
        seed += 1;
        let n = 2 + rng.next(11);
        let d = n + rng.next(4 * n + 1);
        let dist = DistributionKind::ALL[checked % 6];
        let ds = draw_dataset(&SampleSpec::isotropic(n, d, dist, seed)).unwrap();
        let base = detect_svp_l2(&ds, DEFAULT_TOL);
        if base.degenerate {
            continue;
        }
        checked += 1;
        let agrees = |other: &svplab::SvpVerdict, perm: &[usize]| {
            !other.degenerate
                && other.svp == base.svp
                && perm.iter().enumerate().all(|(k, &p)| rel_close(other.loo_stats[k], base.loo_stats[p], 1e-9))
        };
        let id: Vec<usize> = (0..n).collect();
        let mut ok = true;
        for c in [1e-3, 1e3] {
            ok &= agrees(&detect_svp_l2(&ds.with_features(ds.x().scaled(c)).unwrap(), DEFAULT_TOL), &id);
        }
        // orthogonal Q from the QR factor of a Gaussian square matrix
        let g = draw_dataset(&SampleSpec::isotropic(d, d, DistributionKind::Gaussian, seed ^ 0xabcdef)).unwrap();
        let q = DMatrix::from_row_slice(d, d, g.x().as_slice()).qr().q();
        let qm = svplab::linalg::Matrix::from_row_major(d, d, q.transpose().as_slice().to_vec()).unwrap();
        ok &= agrees(&detect_svp_l2(&ds.with_features(ds.x().matmul(&qm).unwrap()).unwrap(), DEFAULT_TOL), &id);
        let mut perm = id.clone();
        for k in (1..n).rev() {
            perm.swap(k, rng.next(k + 1));
        }
        ok &= agrees(&detect_svp_l2(&ds.permuted(&perm).unwrap(), DEFAULT_TOL), &perm);
        if !ok {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{checked} instances, {failures} with a scale, rotation or permutation violation"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c3.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"distributions":["gaussian"],"n_values":[50],"d_values":[160,391,630],"trials":400,"master_seed":{MASTER_SEED}}}"#
        ),
    )
    .unwrap();
    let run = |w: usize| -> Result<Vec<u8>, String> {
        let out = dir.path().join(format!("s{w}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_svplab"))
            .args(["simulate", "--quiet", "--workers", &w.to_string(), "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("workers={w} exited with {status}"));
        }
        std::fs::read(Path::new(&out)).map_err(|e| e.to_string())
    };
    match (run(1), run(8)) {
        (Ok(a), Ok(b)) => outcome(a == b && !a.is_empty(), format!("workers 1 vs 8: {} vs {} bytes, identical = {}", a.len(), b.len(), a == b)),
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

/// `Φ` through the Maclaurin series of `erf`.
fn phi_series(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let (mut term, mut sum, mut k) = (z, z, 0.0);
    while term.abs() > 1e-18 * sum.abs().max(1e-300) {
        k += 1.0;
        term *= -z * z / k;
        sum += term / (2.0 * k + 1.0);
    }
    0.5 * (1.0 + 2.0 / std::f64::consts::PI.sqrt() * sum)
}

/// Upper normal tail by Simpson quadrature of the density.
fn tail_quadrature(t: f64) -> f64 {
    let steps = 200_000;
    let h = 40.0 / steps as f64;
    let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(t) + f(t + 40.0);
    for k in 1..steps {
        s += f(t + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn numerical_utilities() -> Outcome {
    let mills_ok = (10..=60).all(|k| {
        let t = k as f64 / 10.0;
        let (lo, hi) = mills_bounds(t).unwrap();
        let tail = tail_quadrature(t);
        lo <= tail && tail <= hi
    });
    let mut worst_q = 0.0_f64;
    for i in 1..=999 {
        let p = i as f64 / 1000.0;
        worst_q = worst_q.max((phi_series(normal_quantile(p).unwrap()) - p).abs());
    }
    let mut worst_f = 0.0_f64;
    for n in 1..=20usize {
        for d in n..=40usize {
            let mut c: u128 = 1;
            for k in 1..=n as u128 {
                c = c * (d as u128 - n as u128 + k) / k;
            }
            let exact = c as f64 / 2f64.powi(n as i32);
            worst_f = worst_f.max((facet_bound(n, d).unwrap().raw - exact).abs() / exact);
        }
    }
    outcome(
        mills_ok && worst_q <= 1e-7 && worst_f <= 1e-12,
        format!("Mills bracket on [1, 6]: {mills_ok}; quantile round-trip max error {worst_q:.1e}; facet bound max rel error {worst_f:.1e}"),
    )
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let criteria: [(&str, Criterion); 11] = [
        ("equivalence battery", equivalence_battery),
        ("l1 LP vs vertex enumeration", lp_oracle),
        ("phase transition location", phase_transition_location),
        ("below-linear regime", below_linear),
        ("universality at the boundary", universality),
        ("anisotropy effect", anisotropy),
        ("l1 dominance", l1_dominance),
        ("transition width trend", width_trend),
        ("invariance suite", invariance_suite),
        ("determinism across worker counts", determinism),
        ("numerical utilities", numerical_utilities),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2}. {name} ({:.1}s): {}", k + 1, start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
