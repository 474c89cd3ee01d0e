//! The ℓ1 dual linear program `max 1ᵀα  s.t.  −1 ≤ Aᵀα ≤ 1`, `A = diag(y) X`.
//!
//! The program is solved through its LP dual, the ℓ1 interpolation problem
//! `min 1ᵀ(u + v)  s.t.  A(u − v) = 1,  u, v ≥ 0`, whose standard form has
//! only `n` rows. A dense two-phase tableau simplex with Bland's rule runs on
//! that form and `α` is read back as the simplex multipliers of the optimal
//! basis. Column `j < d` of `[A, −A]` corresponds to the constraint
//! `(Aᵀα)_j ≤ 1` and column `d + j` to `−(Aᵀα)_j ≤ 1`; those are the indices
//! used in [`LpSolution::active_set`].

use crate::linalg::{lu_solve, Matrix};
use crate::sampling::Dataset;

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-9;
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    /// Binding constraints among the `2d` rows of `±Aᵀα ≤ 1`.
    pub active_set: Vec<usize>,
    pub status: LpStatus,
    pub pivots: usize,
    pub diagnostic: Option<String>,
}

impl LpSolution {
    fn failed(n: usize, status: LpStatus, pivots: usize, msg: impl Into<String>) -> Self {
        Self {
            alpha: vec![0.0; n],
            objective: f64::NAN,
            active_set: Vec::new(),
            status,
            pivots,
            diagnostic: Some(msg.into()),
        }
    }
}

/// `m × (cols + 1)` tableau with the right-hand side in the last column and
/// a separate reduced-cost row.
struct Tableau {
    m: usize,
    cols: usize,
    t: Matrix,
    cost: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[(r, self.cols)]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[(r, c)];
        for v in self.t.row_mut(r) {
            *v /= p;
        }
        let prow = self.t.row(r).to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[(i, c)];
            if f != 0.0 {
                let row = self.t.row_mut(i);
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Bland's rule simplex on the current cost row, entering only columns in
    /// `0..enter_limit`. Returns `false` if the objective is unbounded below.
    fn run(&mut self, enter_limit: usize, max_pivots: usize) -> Result<bool, String> {
        loop {
            if self.pivots >= max_pivots {
                return Err(format!("pivot limit {max_pivots} reached"));
            }
            let Some(c) = (0..enter_limit).find(|&j| self.cost[j] < -COST_TOL) else {
                return Ok(true);
            };
            let col_scale = (0..self.m).map(|i| self.t[(i, c)].abs()).fold(0.0, f64::max);
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[(i, c)];
                if a > PIVOT_TOL * col_scale.max(1.0) {
                    let ratio = self.rhs(i).max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return Ok(false),
            }
        }
    }
}

/// `A = diag(y) X`.
pub fn signed_features(ds: &Dataset) -> Matrix {
    let mut a = ds.x().clone();
    for (i, &yi) in ds.y().iter().enumerate() {
        for v in a.row_mut(i) {
            *v *= yi;
        }
    }
    a
}

pub fn solve_l1_dual_lp(ds: &Dataset) -> LpSolution {
    let a = signed_features(ds);
    let (n, d) = (a.rows(), a.cols());
    let structural = 2 * d;
    let cols = structural + n;
    let mut t = Matrix::zeros(n, cols + 1);
    for i in 0..n {
        for j in 0..d {
            t[(i, j)] = a[(i, j)];
            t[(i, d + j)] = -a[(i, j)];
        }
        t[(i, structural + i)] = 1.0;
        t[(i, cols)] = 1.0;
    }
    // phase I: minimize the sum of artificials
    let mut cost = vec![0.0; cols + 1];
    for j in 0..structural {
        cost[j] = -(0..n).map(|i| t[(i, j)]).sum::<f64>();
    }
    cost[cols] = -(n as f64);
    let mut tab = Tableau { m: n, cols, t, cost, basis: (structural..cols).collect(), pivots: 0 };
    let max_pivots = 50 * (n + cols);

    if let Err(msg) = tab.run(structural, max_pivots) {
        return LpSolution::failed(n, LpStatus::Degenerate, tab.pivots, msg);
    }
    let infeasibility = -tab.cost[cols];
    if infeasibility > 1e-9 * n as f64 {
        // A(u − v) = 1 has no solution: some α direction with Aᵀα = 0 and 1ᵀα > 0
        return LpSolution::failed(
            n,
            LpStatus::Unbounded,
            tab.pivots,
            format!("interpolation infeasible (residual {infeasibility:e}); dual ray exists"),
        );
    }

    let scale = a.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut redundant_rows = 0;
    for r in 0..n {
        if tab.basis[r] >= structural {
            if let Some(c) = (0..structural).find(|&c| tab.t[(r, c)].abs() > PIVOT_TOL * scale.max(1.0)) {
                tab.pivot(r, c);
            } else {
                redundant_rows += 1;
            }
        }
    }

    // phase II: unit costs on structural columns, artificials barred
    let mut cost = vec![0.0; cols + 1];
    cost[..structural].fill(1.0);
    for r in 0..n {
        let b = tab.basis[r];
        let cb = if b < structural { 1.0 } else { 0.0 };
        if cb != 0.0 {
            for (v, t) in cost.iter_mut().zip(tab.t.row(r)) {
                *v -= cb * t;
            }
        }
    }
    tab.cost = cost;
    match tab.run(structural, max_pivots) {
        Err(msg) => return LpSolution::failed(n, LpStatus::Degenerate, tab.pivots, msg),
        Ok(false) => {
            return LpSolution::failed(n, LpStatus::Degenerate, tab.pivots, "phase II reported an unbounded ℓ1 objective")
        }
        Ok(true) => {}
    }

    // simplex multipliers: reduced cost of artificial i is −α_i
    let mut alpha: Vec<f64> = (0..n).map(|i| -tab.cost[structural + i]).collect();
    if redundant_rows == 0 {
        let mut bt = Matrix::zeros(n, n);
        for (k, &b) in tab.basis.iter().enumerate() {
            let sign = if b < d { 1.0 } else { -1.0 };
            let col = b % d;
            for i in 0..n {
                bt[(k, i)] = sign * a[(i, col)];
            }
        }
        if let Ok(exact) = lu_solve(&bt, &vec![1.0; n]) {
            alpha = exact;
        }
    }

    let at_alpha = a.tr_matvec(&alpha).expect("order n");
    let active_set: Vec<usize> = (0..structural)
        .filter(|&c| {
            let v = if c < d { at_alpha[c] } else { -at_alpha[c - d] };
            (v - 1.0).abs() <= 1e-9
        })
        .collect();
    let objective: f64 = alpha.iter().sum();

    let basic_max = (0..n).map(|r| tab.rhs(r).abs()).fold(0.0, f64::max);
    let degenerate_row = (0..n).find(|&r| tab.rhs(r).abs() <= DEGENERACY_TOL * basic_max.max(1.0));
    let (status, diagnostic) = if redundant_rows > 0 {
        (LpStatus::Degenerate, Some(format!("rank(A) < n ({redundant_rows} redundant rows); optimal face is not a vertex")))
    } else if let Some(r) = degenerate_row {
        (
            LpStatus::Degenerate,
            Some(format!("zero reduced cost on constraint {}; optimum may not be unique", tab.basis[r])),
        )
    } else {
        (LpStatus::Optimal, None)
    };
    LpSolution { alpha, objective, active_set, status, pivots: tab.pivots, diagnostic }
}
