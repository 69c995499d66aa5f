//! Seller cost functions and the combinatorial oracles built on them:
//! submodularity testing, non-monotone submodular minimization, and the
//! demand correspondence used by the negative-gross-substitutes checks.
//!
//! Minimization is an exhaustive scan over all 2^n subsets. That is the exact
//! oracle the rest of the crate needs at desk scale (n <= 24); polynomial-time
//! algorithms are out of scope. All ties break toward the smallest bitmask so
//! every oracle is deterministic.

use crate::error::{Error, Result};
use crate::sets::{self, BuyerSet, MAX_GROUND_SET};
use crate::tol;

/// Cost of serving each subset of buyers. `Additive` sums per-buyer costs;
/// `Tabular` stores one value per subset, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub enum CostFunction {
    Additive { per_buyer: Vec<f64> },
    Tabular { table: Vec<f64> },
}

impl CostFunction {
    pub fn additive(per_buyer: Vec<f64>) -> Self {
        CostFunction::Additive { per_buyer }
    }

    /// Tabular cost from a dense table of length 2^n; `table[0]` must be 0.
    pub fn tabular(table: Vec<f64>) -> Self {
        debug_assert!(table.len().is_power_of_two());
        CostFunction::Tabular { table }
    }

    pub fn ground_set_size(&self) -> usize {
        match self {
            CostFunction::Additive { per_buyer } => per_buyer.len(),
            CostFunction::Tabular { table } => table.len().trailing_zeros() as usize,
        }
    }

    /// Cost of the subset `s`.
    ///
    /// Panics if `s` contains buyers outside the ground set.
    pub fn eval(&self, s: BuyerSet) -> f64 {
        assert!(
            s & !sets::full_set(self.ground_set_size()) == 0,
            "subset {s:b} outside ground set of size {}",
            self.ground_set_size()
        );
        match self {
            CostFunction::Additive { per_buyer } => {
                sets::members(s).map(|i| per_buyer[i]).sum()
            }
            CostFunction::Tabular { table } => table[s as usize],
        }
    }

    /// Structural validity: value at the empty set is exactly zero and all
    /// entries are finite and nonnegative.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidScenario {
            context: "cost function".into(),
            reason,
        };
        if self.ground_set_size() > MAX_GROUND_SET {
            return Err(Error::GroundSetTooLarge {
                n: self.ground_set_size(),
                max: MAX_GROUND_SET,
            });
        }
        match self {
            CostFunction::Additive { per_buyer } => {
                for (i, c) in per_buyer.iter().enumerate() {
                    if !c.is_finite() || *c < 0.0 {
                        return Err(bad(format!("per-buyer cost {c} for buyer {i}")));
                    }
                }
            }
            CostFunction::Tabular { table } => {
                if !table.len().is_power_of_two() {
                    return Err(bad(format!("table length {} is not a power of two", table.len())));
                }
                if table[0] != 0.0 {
                    return Err(bad(format!("cost of the empty set is {}, not 0", table[0])));
                }
                for (s, c) in table.iter().enumerate() {
                    if !c.is_finite() || *c < 0.0 {
                        return Err(bad(format!("cost {c} for subset mask {s}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Result of a set-function minimization: the minimizing subset and its value.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFunctionMin {
    pub minimizer: BuyerSet,
    pub minimum: f64,
}

/// Checks `c(S u {i}) - c(S) >= c(S u {i,k}) - c(S u {k})` for all `S`, `i`, `k`
/// (the marginal form of submodularity), with slack [`tol::FEAS`]. O(2^n n^2).
pub fn is_submodular(c: &CostFunction) -> bool {
    let n = c.ground_set_size();
    debug_assert!(n <= MAX_GROUND_SET);
    for s in 0..(1u32 << n) {
        for i in 0..n {
            if sets::contains(s, i) {
                continue;
            }
            let with_i = s | (1 << i);
            let marg_i = c.eval(with_i) - c.eval(s);
            for k in 0..n {
                if k == i || sets::contains(s, k) {
                    continue;
                }
                let with_k = s | (1 << k);
                if marg_i < c.eval(with_k | (1 << i)) - c.eval(with_k) - tol::FEAS {
                    return false;
                }
            }
        }
    }
    true
}

/// Global minimum of an arbitrary set function over all 2^n subsets.
/// Ties break toward the smallest bitmask.
///
/// The name records the intended use: the welfare and separation oracles feed
/// submodular objectives here, for which an exhaustive scan is one valid
/// (desk-scale) minimization routine.
pub fn minimize_submodular<F: Fn(BuyerSet) -> f64>(f: F, n: usize) -> Result<SetFunctionMin> {
    if n > MAX_GROUND_SET {
        return Err(Error::GroundSetTooLarge { n, max: MAX_GROUND_SET });
    }
    let mut best = SetFunctionMin { minimizer: 0, minimum: f(0) };
    for s in 1..(1u32 << n) {
        let v = f(s);
        if v < best.minimum {
            best = SetFunctionMin { minimizer: s, minimum: v };
        }
    }
    Ok(best)
}

/// The seller demand correspondence at prices `p`: a maximizer of
/// `c(S) - sum_{i in S} p_i`, smallest bitmask among ties.
pub fn ngs_demand(c: &CostFunction, prices: &[f64]) -> BuyerSet {
    let n = c.ground_set_size();
    debug_assert_eq!(prices.len(), n);
    let mut best_set = 0u32;
    let mut best = c.eval(0);
    for s in 1..(1u32 << n) {
        let v = c.eval(s) - sets::members(s).map(|i| prices[i]).sum::<f64>();
        if v > best {
            best = v;
            best_set = s;
        }
    }
    best_set
}

/// Every maximizer of `c(S) - sum_{i in S} p_i`, within [`tol::FEAS`] of the optimum.
pub fn full_demand_set(c: &CostFunction, prices: &[f64]) -> Vec<BuyerSet> {
    let n = c.ground_set_size();
    let value = |s: BuyerSet| c.eval(s) - sets::members(s).map(|i| prices[i]).sum::<f64>();
    let max = (0..(1u32 << n)).map(value).fold(f64::NEG_INFINITY, f64::max);
    (0..(1u32 << n)).filter(|&s| value(s) >= max - tol::FEAS).collect()
}

/// A pair of grid prices witnessing a failure of the substitutes condition.
#[derive(Debug, Clone, PartialEq)]
pub struct NgsViolation {
    /// Index of the higher price vector in the grid.
    pub p_index: usize,
    /// Index of the lower price vector in the grid.
    pub q_index: usize,
    /// A set demanded at `p` whose unchanged-price members are retained by no
    /// demanded set at `q`.
    pub demanded: BuyerSet,
}

/// Searches the grid for a violation of the substitutes condition: for grid
/// pairs `q <= p` (componentwise) and every `S` in the full demand set at `p`,
/// some demanded set at `q` must contain every member of `S` whose price did
/// not strictly drop.
pub fn find_ngs_violation(c: &CostFunction, grid: &[Vec<f64>]) -> Option<NgsViolation> {
    let n = c.ground_set_size();
    let demands: Vec<Vec<BuyerSet>> = grid.iter().map(|p| full_demand_set(c, p)).collect();
    for (pi, p) in grid.iter().enumerate() {
        for (qi, q) in grid.iter().enumerate() {
            if !(0..n).all(|i| q[i] <= p[i] + tol::FEAS) {
                continue;
            }
            // Buyers whose price strictly decreased from p to q.
            let dropped: BuyerSet = (0..n)
                .filter(|&i| q[i] < p[i] - tol::FEAS)
                .fold(0, |acc, i| acc | (1 << i));
            for &s in &demands[pi] {
                let kept = s & !dropped;
                if !demands[qi].iter().any(|&t| t & kept == kept) {
                    return Some(NgsViolation { p_index: pi, q_index: qi, demanded: s });
                }
            }
        }
    }
    None
}

/// True iff no violation is found on the given finite grid. A `true` result is
/// evidence on that grid only, never a proof over all price vectors.
pub fn check_ngs_local(c: &CostFunction, grid: &[Vec<f64>]) -> bool {
    find_ngs_violation(c, grid).is_none()
}

/// Default falsification grid: every price vector whose entries come from the
/// set of marginal-cost differences `c(S u {i}) - c(S)` and their +-1e-3
/// perturbations. The value set is thinned evenly if the full cartesian power
/// would exceed `max_vectors`.
pub fn default_price_grid(c: &CostFunction, max_vectors: usize) -> Vec<Vec<f64>> {
    let n = c.ground_set_size();
    if n == 0 {
        return vec![vec![]];
    }
    let mut values = Vec::new();
    for s in 0..(1u32 << n) {
        for i in 0..n {
            if !sets::contains(s, i) {
                let d = c.eval(s | (1 << i)) - c.eval(s);
                values.extend_from_slice(&[d - 1e-3, d, d + 1e-3]);
            }
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup_by(|a, b| (*a - *b).abs() <= tol::FEAS);

    let budget = (max_vectors.max(1) as f64).powf(1.0 / n as f64).floor() as usize;
    if values.len() > budget.max(2) {
        let keep = budget.max(2);
        let step = (values.len() - 1) as f64 / (keep - 1) as f64;
        values = (0..keep)
            .map(|k| values[(k as f64 * step).round() as usize])
            .collect();
    }

    let mut grid = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        grid.push(idx.iter().map(|&k| values[k]).collect());
        let mut pos = n;
        while pos > 0 {
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < values.len() {
                break;
            }
            idx[pos] = 0;
            if pos == 0 {
                return grid;
            }
        }
    }
}
