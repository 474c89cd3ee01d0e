//! Optimization oracles independent of the closed-form ℓ2 criterion.

pub mod lp;
pub mod qp;

pub use lp::{signed_features, solve_l1_dual_lp, LpSolution, LpStatus};
pub use qp::{default_max_iter, solve_hard_margin_qp, QpError, QpSolution};

use crate::sampling::Dataset;
use crate::svp::{strictly_positive, SvpVerdict};

/// ℓ1 SVP: the returned LP maximizer lies strictly inside the positive orthant.
pub fn detect_svp_l1(ds: &Dataset, tol: f64) -> SvpVerdict {
    let sol = solve_l1_dual_lp(ds);
    if sol.status != LpStatus::Optimal {
        return SvpVerdict { alpha_direction: sol.alpha, ..SvpVerdict::degenerate(tol) };
    }
    SvpVerdict {
        svp: strictly_positive(&sol.alpha, tol),
        alpha_direction: sol.alpha,
        loo_stats: Vec::new(),
        min_margin_slack: f64::NAN,
        degenerate: false,
        tolerance_used: tol,
    }
}
