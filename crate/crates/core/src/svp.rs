//! Exact ℓ2 support vector proliferation detection.
//!
//! SVP holds iff the min-norm interpolator's dual direction
//! `α ∝ diag(y) K⁻¹ y` lies strictly inside the positive orthant, which in
//! turn holds iff every leave-one-out statistic
//! `y_i y_{∖i}ᵀ K_{∖i}⁻¹ X_{∖i} x_i` is below one. Both sides come out of a
//! single Cholesky factorization of `K = X Xᵀ` through the Schur complement
//! identity `loo_i = 1 − y_i (K⁻¹y)_i / (K⁻¹)_{ii}`.
//!
//! [`loo_statistics_direct`] and [`projection_point`] are slower routes to
//! the same verdict kept for cross-checking.

use thiserror::Error;

use crate::linalg::{self, cholesky, dot, inverse_diagonal, solve_spd, Matrix, SymMatrix, DEFAULT_PIVOT_FLOOR};
use crate::sampling::Dataset;

/// Relative positivity threshold for dual coefficients.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvpError {
    #[error("leave-one-out Gram minor {0} is singular")]
    SingularMinor(usize),
    #[error("Gram matrix is singular")]
    SingularGram,
    #[error("1ᵀ(AAᵀ)⁻¹1 is numerically zero")]
    DegenerateDual,
    #[error("index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
}

/// Outcome of an SVP check.
#[derive(Debug, Clone, PartialEq)]
pub struct SvpVerdict {
    pub svp: bool,
    /// Unnormalized dual direction; only signs and ratios are meaningful.
    pub alpha_direction: Vec<f64>,
    /// Leave-one-out statistics (empty for ℓ1 and degenerate cases).
    pub loo_stats: Vec<f64>,
    /// `min_i (1 − loo_i)`; NaN when no statistics are available.
    pub min_margin_slack: f64,
    pub degenerate: bool,
    pub tolerance_used: f64,
}

impl SvpVerdict {
    pub fn degenerate(tol: f64) -> Self {
        Self {
            svp: false,
            alpha_direction: Vec::new(),
            loo_stats: Vec::new(),
            min_margin_slack: f64::NAN,
            degenerate: true,
            tolerance_used: tol,
        }
    }
}

/// Point of minimum norm on the affine hull of the rows of `A = diag(y) X`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    /// Affine weights `a*` with `Σ a*_i = 1` and `point = Aᵀ a*`.
    pub barycentric: Vec<f64>,
    pub squared_norm: f64,
}

/// `K = X Xᵀ`, filled from the upper triangle.
pub fn gram(ds: &Dataset) -> SymMatrix {
    gram_of(ds.x())
}

pub(crate) fn gram_of(x: &Matrix) -> SymMatrix {
    SymMatrix::from_upper(x.rows(), |i, j| dot(x.row(i), x.row(j)))
}

/// `true` iff every entry exceeds `tol * max_i |v_i|`.
pub(crate) fn strictly_positive(v: &[f64], tol: f64) -> bool {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    scale > 0.0 && v.iter().all(|&x| x > tol * scale)
}

/// Dual-sign SVP test with leave-one-out statistics from the Schur identity.
pub fn detect_svp_l2(ds: &Dataset, tol: f64) -> SvpVerdict {
    let k = gram(ds);
    let Ok(f) = cholesky(&k, DEFAULT_PIVOT_FLOOR) else {
        return SvpVerdict::degenerate(tol);
    };
    let y = ds.y();
    let beta = solve_spd(&f, y).expect("label length equals n");
    let inv_diag = inverse_diagonal(&f);
    let alpha: Vec<f64> = y.iter().zip(&beta).map(|(yi, b)| yi * b).collect();
    let loo: Vec<f64> = alpha.iter().zip(&inv_diag).map(|(a, di)| 1.0 - a / di).collect();
    let min_margin_slack = loo.iter().map(|l| 1.0 - l).fold(f64::INFINITY, f64::min);
    SvpVerdict {
        svp: strictly_positive(&alpha, tol),
        alpha_direction: alpha,
        loo_stats: loo,
        min_margin_slack,
        degenerate: false,
        tolerance_used: tol,
    }
}

/// Leave-one-out statistics computed by explicitly forming each `K_{∖i}`.
/// Quartic in `n`; kept as a reference.
pub fn loo_statistics_direct(ds: &Dataset) -> Result<Vec<f64>, SvpError> {
    let k = gram(ds);
    let y = ds.y();
    (0..ds.n())
        .map(|i| {
            let (u, rest) = loo_solve(ds, &k, i)?;
            let s: f64 = rest.iter().zip(&u).map(|(&j, uj)| y[j] * uj).sum();
            Ok(y[i] * s)
        })
        .collect()
}

/// Solves `K_{∖i} u = X_{∖i} x_i`; returns `u` and the kept indices.
fn loo_solve(ds: &Dataset, k: &SymMatrix, i: usize) -> Result<(Vec<f64>, Vec<usize>), SvpError> {
    let rest: Vec<usize> = (0..ds.n()).filter(|&j| j != i).collect();
    if rest.is_empty() {
        return Ok((Vec::new(), rest));
    }
    let minor = k.principal_minor(&rest);
    let f = cholesky(&minor, DEFAULT_PIVOT_FLOOR).map_err(|_| SvpError::SingularMinor(i))?;
    let rhs: Vec<f64> = rest.iter().map(|&j| k[(j, i)]).collect();
    Ok((solve_spd(&f, &rhs).expect("minor order"), rest))
}

/// `Π_T(0) = Aᵀ(AAᵀ)⁻¹1 / 1ᵀ(AAᵀ)⁻¹1` with `A = diag(y) X`.
pub fn projection_point(ds: &Dataset) -> Result<ProjectionResult, SvpError> {
    let y = ds.y();
    let mut a = ds.x().clone();
    for (i, &yi) in y.iter().enumerate() {
        for v in a.row_mut(i) {
            *v *= yi;
        }
    }
    let aat = gram_of(&a);
    let f = cholesky(&aat, DEFAULT_PIVOT_FLOOR).map_err(|_| SvpError::SingularGram)?;
    let ones = vec![1.0; ds.n()];
    let g = solve_spd(&f, &ones).expect("order n");
    let s: f64 = g.iter().sum();
    let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(s > 1e-12 * gmax * ds.n() as f64) {
        return Err(SvpError::DegenerateDual);
    }
    let barycentric: Vec<f64> = g.iter().map(|gi| gi / s).collect();
    let point = a.tr_matvec(&barycentric).expect("order n");
    Ok(ProjectionResult { point, barycentric, squared_norm: 1.0 / s })
}

/// Three-term split of the leave-one-out statistic of sample `i` around the
/// first `m` samples, with the idealized Gram `‖λ‖₁ I`.
///
/// `i` is zero-based and must satisfy `i < m <= n`. The terms sum to the
/// leave-one-out statistic exactly.
pub fn decomposition_terms(ds: &Dataset, i: usize, m: usize) -> Result<(f64, f64, f64), SvpError> {
    let n = ds.n();
    if m > n || m == 0 {
        return Err(SvpError::IndexOutOfRange { index: m, n });
    }
    if i >= m {
        return Err(SvpError::IndexOutOfRange { index: i, n: m });
    }
    let k = gram(ds);
    let y = ds.y();
    let scale = 1.0 / ds.lambda_l1();
    let (u, rest) = loo_solve(ds, &k, i)?;
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    let mut t3 = 0.0;
    for (&j, uj) in rest.iter().zip(&u) {
        let kij = k[(j, i)];
        t1 += y[j] * (uj - scale * kij);
        if j < m {
            t2 += y[j] * kij;
        } else {
            t3 += y[j] * kij;
        }
    }
    Ok((y[i] * t1, scale * y[i] * t2, scale * y[i] * t3))
}

/// `‖K − ‖λ‖₁ I‖_op / ‖λ‖₁`.
pub fn gram_deviation(ds: &Dataset) -> f64 {
    let l1 = ds.lambda_l1();
    let (lo, hi) = linalg::sym_eigen_extremes(&gram(ds));
    (hi - l1).abs().max((lo - l1).abs()) / l1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{draw_dataset, DistributionKind, SampleSpec};
    use approx::assert_relative_eq;

    fn hand_instance() -> Dataset {
        Dataset::from_rows(&[vec![1.0, 0.0], vec![2.0, 1.0]], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn gram_examples() {
        let ds = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, -1.0]).unwrap();
        assert_eq!(gram(&ds), SymMatrix::identity(2));
        let ds = Dataset::from_rows(&[vec![1.0, 1.0]], &[1.0]).unwrap();
        assert_eq!(gram(&ds)[(0, 0)], 2.0);
        let base = draw_dataset(&SampleSpec::isotropic(4, 6, DistributionKind::Gaussian, 1)).unwrap();
        let scaled = base.with_features(base.x().scaled(3.0)).unwrap();
        let (k, ks) = (gram(&base), gram(&scaled));
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(ks[(i, j)], 9.0 * k[(i, j)], max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn single_sample_is_svp() {
        let ds = Dataset::from_rows(&[vec![0.3, -2.0, 1.0]], &[-1.0]).unwrap();
        let v = detect_svp_l2(&ds, DEFAULT_TOL);
        assert!(v.svp && !v.degenerate);
    }

    #[test]
    fn hand_two_by_two() {
        // K = [[1,2],[2,5]], K⁻¹ = [[5,-2],[-2,1]], K⁻¹y = (3,-1)
        let v = detect_svp_l2(&hand_instance(), DEFAULT_TOL);
        assert!(!v.svp);
        assert_relative_eq!(v.alpha_direction[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(v.alpha_direction[1], -1.0, epsilon = 1e-12);
        assert_relative_eq!(v.loo_stats[0], 0.4, epsilon = 1e-12);
        assert_relative_eq!(v.loo_stats[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(v.min_margin_slack, -1.0, epsilon = 1e-12);

        let direct = loo_statistics_direct(&hand_instance()).unwrap();
        assert_relative_eq!(direct[0], 0.4, epsilon = 1e-12);
        assert_relative_eq!(direct[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn orthonormal_rows() {
        let ds = Dataset::from_rows(
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            &[1.0, -1.0, 1.0],
        )
        .unwrap();
        let v = detect_svp_l2(&ds, DEFAULT_TOL);
        assert!(v.svp);
        assert!(v.alpha_direction.iter().all(|&a| (a - 1.0).abs() < 1e-14));
        assert_eq!(loo_statistics_direct(&ds).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn duplicated_rows_are_degenerate() {
        let ds = Dataset::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]], &[1.0, -1.0]).unwrap();
        let v = detect_svp_l2(&ds, DEFAULT_TOL);
        assert!(v.degenerate && !v.svp && v.loo_stats.is_empty());
        assert_eq!(projection_point(&ds), Err(SvpError::SingularGram));
    }

    #[test]
    fn boundary_coefficient_is_not_svp() {
        // x2 = e1 + e2 against x1 = e1: K⁻¹y = (1, 0)
        let ds = Dataset::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]], &[1.0, 1.0]).unwrap();
        let v = detect_svp_l2(&ds, DEFAULT_TOL);
        assert!(!v.svp);
        assert!(v.alpha_direction[1].abs() < 1e-14);
        assert!(v.min_margin_slack.abs() < 1e-14);
    }

    #[test]
    fn projection_examples() {
        let ds = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, -1.0]).unwrap();
        let p = projection_point(&ds).unwrap();
        assert_eq!(p.point, vec![0.5, -0.5]);
        assert_eq!(p.barycentric, vec![0.5, 0.5]);
        assert_relative_eq!(p.squared_norm, 0.5);

        let ds = Dataset::from_rows(&[vec![3.0, -4.0]], &[-1.0]).unwrap();
        let p = projection_point(&ds).unwrap();
        assert_eq!(p.barycentric, vec![1.0]);
        assert_relative_eq!(p.point[0], -3.0);
        assert_relative_eq!(p.point[1], 4.0);
    }

    #[test]
    fn decomposition_edge_cases() {
        let ds = draw_dataset(&SampleSpec::isotropic(6, 30, DistributionKind::Gaussian, 4)).unwrap();
        let (_, _, t3) = decomposition_terms(&ds, 2, 6).unwrap();
        assert_eq!(t3, 0.0);
        assert_eq!(ds.lambda_l1(), 30.0);
        assert!(matches!(decomposition_terms(&ds, 3, 3), Err(SvpError::IndexOutOfRange { .. })));
        assert!(matches!(decomposition_terms(&ds, 0, 7), Err(SvpError::IndexOutOfRange { .. })));
    }

    #[test]
    fn gram_deviation_examples() {
        // X = I_n with λ = 1^n: eigenvalues all 1 against ‖λ‖₁ = n
        for n in [2usize, 5] {
            let rows: Vec<Vec<f64>> =
                (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
            let ds = Dataset::from_rows(&rows, &vec![1.0; n]).unwrap();
            assert_relative_eq!(gram_deviation(&ds), (n as f64 - 1.0) / n as f64, epsilon = 1e-14);
        }
        // K = 2 I with ‖λ‖₁ = 2
        let ds = Dataset::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]], &[1.0, 1.0]).unwrap();
        assert!(gram_deviation(&ds).abs() < 1e-14);
    }
}
