//! Post-processing of Monte Carlo summaries and a few closed-form quantities.
//!
//! All logarithms are natural: the isotropic Gaussian boundary is
//! `d = 2 n ln n` and `τ = d / (2 n ln n)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use thiserror::Error;

use crate::experiment::CellSummary;
use crate::sampling::{dimension_proxies, SampleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("n must be at least 2, got {0}")]
    InvalidN(usize),
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("grid for n = {n} never crosses level {level}")]
    Unresolvable { n: usize, level: f64 },
}

impl From<SampleError> for AnalysisError {
    fn from(e: SampleError) -> Self {
        AnalysisError::DomainError(e.to_string())
    }
}

/// `2 n ln n`.
pub fn theoretical_threshold(n: usize) -> Result<f64, AnalysisError> {
    if n < 2 {
        return Err(AnalysisError::InvalidN(n));
    }
    let n = n as f64;
    Ok(2.0 * n * n.ln())
}

/// `τ = d / (2 n ln n)`; NaN for `n < 2`.
pub fn tau(n: usize, d: f64) -> f64 {
    match theoretical_threshold(n) {
        Ok(t) => d / t,
        Err(_) => f64::NAN,
    }
}

/// Threshold curve sampled at the given sample sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCurve {
    pub n_values: Vec<usize>,
    pub d_theoretical: Vec<f64>,
}

impl ThresholdCurve {
    pub fn new(n_values: &[usize]) -> Result<Self, AnalysisError> {
        let d_theoretical = n_values.iter().map(|&n| theoretical_threshold(n)).collect::<Result<_, _>>()?;
        Ok(Self { n_values: n_values.to_vec(), d_theoretical })
    }
}

/// Summaries grouped by `n`, each group sorted by `d`.
fn by_n<'a>(summaries: impl IntoIterator<Item = &'a CellSummary>) -> BTreeMap<usize, Vec<&'a CellSummary>> {
    let mut groups: BTreeMap<usize, Vec<&CellSummary>> = BTreeMap::new();
    for s in summaries {
        groups.entry(s.cell.n).or_default().push(s);
    }
    for cells in groups.values_mut() {
        cells.sort_by_key(|s| s.cell.d);
    }
    groups
}

/// For every `n`, the smallest grid `d` whose rate reaches `q`.
pub fn quantile_contour<'a>(
    summaries: impl IntoIterator<Item = &'a CellSummary>,
    q: f64,
) -> BTreeMap<usize, usize> {
    by_n(summaries)
        .into_iter()
        .filter_map(|(n, cells)| cells.iter().find(|s| s.rate >= q).map(|s| (n, s.cell.d)))
        .collect()
}

/// First crossing of `level`, linearly interpolated in `d` between the
/// straddling cells. The grid must start below the level.
fn crossing_d(cells: &[&CellSummary], level: f64) -> Option<f64> {
    let k = cells.iter().position(|s| s.rate >= level)?;
    if k == 0 {
        return None;
    }
    let (lo, hi) = (cells[k - 1], cells[k]);
    let (d0, d1) = (lo.cell.d as f64, hi.cell.d as f64);
    let frac = (level - lo.rate) / (hi.rate - lo.rate);
    Some(d0 + frac * (d1 - d0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthEstimate {
    pub n: usize,
    pub q: f64,
    pub tau_low: f64,
    pub tau_high: f64,
    pub w_hat: f64,
}

/// Scaled `q`-transition width
/// `(τ̂_{1−q} − τ̂_q) / (Φ⁻¹(1−q) − Φ⁻¹(q)) · √(ln n)`.
pub fn transition_width<'a>(
    summaries: impl IntoIterator<Item = &'a CellSummary>,
    n: usize,
    q: f64,
) -> Result<WidthEstimate, AnalysisError> {
    if !(q > 0.0 && q < 0.5) {
        return Err(AnalysisError::DomainError(format!("q = {q} must lie in (0, 1/2)")));
    }
    let threshold = theoretical_threshold(n)?;
    let groups = by_n(summaries.into_iter().filter(|s| s.cell.n == n));
    let cells = groups.get(&n).map(Vec::as_slice).unwrap_or(&[]);
    let low = crossing_d(cells, q).ok_or(AnalysisError::Unresolvable { n, level: q })?;
    let high = crossing_d(cells, 1.0 - q).ok_or(AnalysisError::Unresolvable { n, level: 1.0 - q })?;
    let (tau_low, tau_high) = (low / threshold, high / threshold);
    let w_hat = scaled_width(n, q, tau_low, tau_high)?;
    Ok(WidthEstimate { n, q, tau_low, tau_high, w_hat })
}

/// Plug-in width from already-resolved quantile locations.
pub fn scaled_width(n: usize, q: f64, tau_low: f64, tau_high: f64) -> Result<f64, AnalysisError> {
    let spread = normal_quantile(1.0 - q)? - normal_quantile(q)?;
    Ok((tau_high - tau_low) / spread * (n as f64).ln().sqrt())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `Φ⁻¹(p)`: Acklam's rational approximation followed by one Halley step
/// against the erf-based CDF.
pub fn normal_quantile(p: f64) -> Result<f64, AnalysisError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(AnalysisError::DomainError(format!("p = {p} outside (0, 1)")));
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383_577_518_672_69e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] =
        [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Gaussian tail bounds `(1/t − 1/t³) φ(t) ≤ 1 − Φ(t) ≤ φ(t)/t`.
pub fn mills_bounds(t: f64) -> Result<(f64, f64), AnalysisError> {
    if !(t > 0.0) {
        return Err(AnalysisError::DomainError(format!("t = {t} must be positive")));
    }
    let phi = normal_pdf(t);
    Ok(((1.0 / t - 1.0 / (t * t * t)) * phi, phi / t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProliferationConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl ProliferationConstants {
    pub fn new(c1: f64, c2: f64, c3: f64, c4: f64) -> Result<Self, AnalysisError> {
        if [c1, c2, c3, c4].iter().all(|&c| c > 0.0) {
            Ok(Self { c1, c2, c3, c4 })
        } else {
            Err(AnalysisError::DomainError("constants must be positive".into()))
        }
    }
}

/// Which of the four sufficient conditions for SVP to fail w.p. ≥ 1 − δ hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProliferationReport {
    /// `n ≥ C₁ ln(1/δ)²`
    pub enough_samples: bool,
    /// `d₂ ≤ C₂ n ln n`
    pub d2_small: bool,
    /// `d∞ ≥ C₃ n ln(1/δ)`
    pub d_inf_large: bool,
    /// `d∞² ≥ C₄ d₂ n`
    pub no_dominant_coordinate: bool,
    pub d2: f64,
    pub d_inf: f64,
}

impl ProliferationReport {
    pub fn all(&self) -> bool {
        self.enough_samples && self.d2_small && self.d_inf_large && self.no_dominant_coordinate
    }
}

pub fn proliferation_conditions(n: usize, lambda: &[f64], delta: f64, c: ProliferationConstants) -> Result<ProliferationReport, AnalysisError> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(AnalysisError::DomainError(format!("δ = {delta} outside (0, 1/2)")));
    }
    let (d2, d_inf) = dimension_proxies(lambda)?;
    let nf = n as f64;
    let log_inv_delta = (1.0 / delta).ln();
    Ok(ProliferationReport {
        enough_samples: nf >= c.c1 * log_inv_delta * log_inv_delta,
        d2_small: d2 <= c.c2 * nf * nf.ln(),
        d_inf_large: d_inf >= c.c3 * nf * log_inv_delta,
        no_dominant_coordinate: d_inf * d_inf >= c.c4 * d2 * nf,
        d2,
        d_inf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetBound {
    /// `C(d, n) / 2ⁿ`, possibly above one.
    pub raw: f64,
    pub ln_raw: f64,
    /// `min(raw, 1)`.
    pub clamped: f64,
}

/// Crude ℓ1 SVP probability bound `C(d, n) / 2ⁿ`, evaluated in log space.
pub fn facet_bound(n: usize, d: usize) -> Result<FacetBound, AnalysisError> {
    if n == 0 || d < n {
        return Err(AnalysisError::DomainError(format!("need d ≥ n ≥ 1, got n = {n}, d = {d}")));
    }
    let ln_binom: f64 = (1..=n).map(|k| ((d - n + k) as f64).ln() - (k as f64).ln()).sum();
    let ln_raw = ln_binom - n as f64 * std::f64::consts::LN_2;
    let raw = ln_raw.exp();
    Ok(FacetBound { raw, ln_raw, clamped: raw.min(1.0) })
}
