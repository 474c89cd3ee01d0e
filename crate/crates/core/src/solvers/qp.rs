//! Hard-margin SVM through its dual: maximize `1ᵀα − ½ αᵀQα` over `α ≥ 0`
//! with `Q = diag(y) K diag(y)`.
//!
//! Projected cyclic coordinate ascent does the bulk of the work. Whenever the
//! positive support stops changing between sweeps, the equality system
//! `Q_SS α_S = 1` on that support is solved exactly and accepted if it
//! satisfies every KKT condition; this finishes ill-conditioned problems
//! that coordinate ascent alone would approach only linearly. A converged
//! iterate is polished the same way, first with near-zero coordinates
//! pinned at zero, so samples sitting exactly on the margin boundary get
//! `α_i = 0` rather than a residual of the stopping tolerance.

use thiserror::Error;

use crate::linalg::{cholesky, solve_spd, DEFAULT_PIVOT_FLOOR};
use crate::sampling::Dataset;
use crate::svp::gram;

/// Margin-to-radius ratio below which the data is declared non-separable.
const SEPARABILITY_FLOOR: f64 = 1e-6;
/// Looser ratio applied once the iteration budget is exhausted.
const EXHAUSTED_SEPARABILITY_FLOOR: f64 = 1e-3;
/// Coordinates below this fraction of `max α` are first tried at zero when
/// polishing a converged iterate.
const BOUNDARY_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dual objective diverged after {iterations} updates; data not separable")]
    Diverged { iterations: usize },
    #[error("sample {0} is the zero vector; its margin constraint cannot hold")]
    ZeroDiagonal(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub alpha: Vec<f64>,
    /// `w = Σ α_i y_i x_i`.
    pub weight: Vec<f64>,
    pub objective: f64,
    /// Coordinate updates performed.
    pub iterations: usize,
    pub converged: bool,
    pub support_set: Vec<usize>,
}

impl QpSolution {
    /// All samples are support vectors.
    pub fn all_support(&self) -> bool {
        self.support_set.len() == self.alpha.len()
    }
}

pub fn default_max_iter(n: usize) -> usize {
    100_000 * n.max(1)
}

/// Largest KKT violation of `α` given `qa = Qα`.
fn kkt_violation(alpha: &[f64], qa: &[f64]) -> f64 {
    alpha
        .iter()
        .zip(qa)
        .map(|(&a, &q)| {
            let g = 1.0 - q;
            if a > 0.0 {
                g.abs()
            } else {
                g.max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub fn solve_hard_margin_qp(ds: &Dataset, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    let n = ds.n();
    let y = ds.y();
    let k = gram(ds);
    let q = |i: usize, j: usize| y[i] * y[j] * k[(i, j)];
    if let Some(i) = (0..n).find(|&i| k[(i, i)] == 0.0) {
        return Err(QpError::ZeroDiagonal(i));
    }
    let radius = (0..n).map(|i| k[(i, i)]).fold(0.0, f64::max).sqrt();

    let mut alpha = vec![0.0; n];
    let mut qa = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut last_support: Vec<usize> = Vec::new();

    while iterations < max_iter {
        for i in 0..n {
            let step = (1.0 - qa[i]) / k[(i, i)];
            let next = (alpha[i] + step).max(0.0);
            let delta = next - alpha[i];
            if delta != 0.0 {
                alpha[i] = next;
                for (j, v) in qa.iter_mut().enumerate() {
                    *v += delta * q(j, i);
                }
            }
            iterations += 1;
        }

        if kkt_violation(&alpha, &qa) <= tol {
            converged = true;
            let amax = alpha.iter().copied().fold(0.0, f64::max);
            for floor in [BOUNDARY_FLOOR * amax, 0.0] {
                let support: Vec<usize> = (0..n).filter(|&i| alpha[i] > floor).collect();
                if let Some((a, v)) = polish(&support, n, &q, tol) {
                    alpha = a;
                    qa = v;
                    break;
                }
            }
            break;
        }

        // ‖w‖ ≥ Σα / ‖w_svm‖ for any α ≥ 0 when the data is separable
        let sum: f64 = alpha.iter().sum();
        let wnorm = alpha.iter().zip(&qa).map(|(a, v)| a * v).sum::<f64>().max(0.0).sqrt();
        if sum > 0.0 && wnorm <= SEPARABILITY_FLOOR * radius * sum {
            return Err(QpError::Diverged { iterations });
        }

        let support: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
        if !support.is_empty() && support == last_support {
            if let Some((a, v)) = polish(&support, n, &q, tol) {
                alpha = a;
                qa = v;
                converged = true;
                break;
            }
        }
        last_support = support;
    }

    if !converged {
        let sum: f64 = alpha.iter().sum();
        let wnorm = alpha.iter().zip(&qa).map(|(a, v)| a * v).sum::<f64>().max(0.0).sqrt();
        if sum > 0.0 && wnorm <= EXHAUSTED_SEPARABILITY_FLOOR * radius * sum {
            return Err(QpError::Diverged { iterations });
        }
    }

    let weight = ds.x().tr_matvec(&alpha.iter().zip(y).map(|(a, yi)| a * yi).collect::<Vec<_>>()).expect("order n");
    let objective = alpha.iter().sum::<f64>() - 0.5 * alpha.iter().zip(&qa).map(|(a, v)| a * v).sum::<f64>();
    let amax = alpha.iter().copied().fold(0.0, f64::max);
    let support_set = (0..n).filter(|&i| alpha[i] > tol * amax).collect();
    Ok(QpSolution { alpha, weight, objective, iterations, converged, support_set })
}

/// Exact solve on a fixed support; `None` unless the result is KKT-optimal.
fn polish(support: &[usize], n: usize, q: &impl Fn(usize, usize) -> f64, tol: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let sub = crate::linalg::SymMatrix::from_upper(support.len(), |a, b| q(support[a], support[b]));
    let f = cholesky(&sub, DEFAULT_PIVOT_FLOOR).ok()?;
    let a_s = solve_spd(&f, &vec![1.0; support.len()]).ok()?;
    if a_s.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let mut alpha = vec![0.0; n];
    for (&i, v) in support.iter().zip(a_s) {
        alpha[i] = v;
    }
    let qa: Vec<f64> = (0..n).map(|j| support.iter().map(|&i| q(j, i) * alpha[i]).sum()).collect();
    (kkt_violation(&alpha, &qa) <= tol).then_some((alpha, qa))
}
