//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Bland's rule (lowest-index entering column; lowest-index basic variable on
//! ratio ties) is slow but cycle-free and, more importantly here, makes every
//! solve a deterministic function of the column and row ordering. The LPs in
//! this crate are small and well scaled (0/1 matrices, data in [0,1]), so a
//! dense tableau is entirely adequate.

use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub op: ConstraintOp,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Per original row, the simplex multiplier read off the optimal tableau.
    /// Meaningful for the all-`Le` programs this crate derives duals from.
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpError {
    Infeasible,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    red: Vec<f64>,
    objective: f64,
    allowed: Vec<bool>,
}

impl Tableau {
    fn cols(&self) -> usize {
        self.red.len()
    }

    /// Rebuild reduced costs `z_j - c_j` and the objective for cost vector `c`.
    fn load_costs(&mut self, c: &[f64]) {
        let cols = self.cols();
        for j in 0..cols {
            let z: f64 = (0..self.rows.len())
                .map(|r| c[self.basis[r]] * self.rows[r][j])
                .sum();
            self.red[j] = z - c[j];
        }
        self.objective = (0..self.rows.len())
            .map(|r| c[self.basis[r]] * self.rhs[r])
            .sum();
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        self.rhs[row] /= p;
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let f = self.rows[r][col];
            if f == 0.0 {
                continue;
            }
            for j in 0..self.cols() {
                self.rows[r][j] -= f * self.rows[row][j];
            }
            self.rhs[r] -= f * self.rhs[row];
        }
        let f = self.red[col];
        if f != 0.0 {
            for j in 0..self.cols() {
                self.red[j] -= f * self.rows[row][j];
            }
            self.objective -= f * self.rhs[row];
        }
        self.basis[row] = col;
    }

    /// Bland iterations until no allowed column improves the objective.
    fn optimize(&mut self) -> Result<(), LpError> {
        let limit = 1000 + 200 * (self.rows.len() + self.cols());
        for _ in 0..limit {
            let entering = (0..self.cols())
                .find(|&j| self.allowed[j] && self.red[j] < -tol::PIVOT);
            let entering = match entering {
                Some(j) => j,
                None => return Ok(()),
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][entering];
                if a > tol::PIVOT {
                    let ratio = (self.rhs[r].max(0.0)) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - tol::PIVOT
                                || (ratio < lratio + tol::PIVOT
                                    && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, entering),
                None => return Err(LpError::Unbounded),
            }
        }
        Err(LpError::IterationLimit)
    }
}

/// Maximize `objective . x` subject to `rows`, `x >= 0`.
pub fn maximize(objective: &[f64], rows: &[LpRow]) -> Result<LpSolution, LpError> {
    let nv = objective.len();
    let m = rows.len();

    // Normalize to nonnegative right-hand sides, remembering flipped rows so
    // duals can be reported against the original orientation.
    let mut sign = vec![1.0f64; m];
    let mut ops = Vec::with_capacity(m);
    for (i, row) in rows.iter().enumerate() {
        debug_assert_eq!(row.coeffs.len(), nv);
        if row.rhs < 0.0 {
            sign[i] = -1.0;
            ops.push(match row.op {
                ConstraintOp::Le => ConstraintOp::Ge,
                ConstraintOp::Ge => ConstraintOp::Le,
                ConstraintOp::Eq => ConstraintOp::Eq,
            });
        } else {
            ops.push(row.op);
        }
    }

    // Column layout: structural, then one slack/surplus per inequality, then
    // one artificial per Ge/Eq row.
    let n_aux = ops.iter().filter(|o| **o != ConstraintOp::Eq).count();
    let n_art = ops.iter().filter(|o| **o != ConstraintOp::Le).count();
    let cols = nv + n_aux + n_art;

    let mut t = Tableau {
        rows: vec![vec![0.0; cols]; m],
        rhs: vec![0.0; m],
        basis: vec![0; m],
        red: vec![0.0; cols],
        objective: 0.0,
        allowed: vec![true; cols],
    };
    let mut dual_col = vec![0usize; m];
    let mut aux = nv;
    let mut art = nv + n_aux;
    for (i, row) in rows.iter().enumerate() {
        for j in 0..nv {
            t.rows[i][j] = sign[i] * row.coeffs[j];
        }
        t.rhs[i] = sign[i] * row.rhs;
        match ops[i] {
            ConstraintOp::Le => {
                t.rows[i][aux] = 1.0;
                t.basis[i] = aux;
                dual_col[i] = aux;
                aux += 1;
            }
            ConstraintOp::Ge => {
                t.rows[i][aux] = -1.0;
                dual_col[i] = aux;
                aux += 1;
                t.rows[i][art] = 1.0;
                t.basis[i] = art;
                art += 1;
            }
            ConstraintOp::Eq => {
                t.rows[i][art] = 1.0;
                t.basis[i] = art;
                dual_col[i] = art;
                art += 1;
            }
        }
    }

    if n_art > 0 {
        // Phase 1: drive the artificial variables to zero.
        let mut c1 = vec![0.0; cols];
        for j in (nv + n_aux)..cols {
            c1[j] = -1.0;
        }
        t.load_costs(&c1);
        t.optimize()?;
        if t.objective < -1e-7 {
            return Err(LpError::Infeasible);
        }
        // Pivot leftover artificials out of the basis; rows that cannot be
        // pivoted are redundant and harmless (the artificial stays at zero and
        // is barred from re-entering below).
        for r in 0..m {
            if t.basis[r] >= nv + n_aux {
                if let Some(j) =
                    (0..nv + n_aux).find(|&j| t.rows[r][j].abs() > tol::PIVOT)
                {
                    t.pivot(r, j);
                }
            }
        }
        for j in (nv + n_aux)..cols {
            t.allowed[j] = false;
        }
    }

    let mut c2 = vec![0.0; cols];
    c2[..nv].copy_from_slice(objective);
    t.load_costs(&c2);
    t.optimize()?;

    let mut x = vec![0.0; nv];
    for r in 0..m {
        if t.basis[r] < nv {
            x[t.basis[r]] = t.rhs[r];
        }
    }
    let duals = (0..m)
        .map(|i| {
            let raw = match ops[i] {
                ConstraintOp::Ge => -t.red[dual_col[i]],
                _ => t.red[dual_col[i]],
            };
            sign[i] * raw
        })
        .collect();
    Ok(LpSolution { x, objective: t.objective, duals })
}
