//! Convex decomposition of the scaled fractional assignment into a lottery
//! over integral assignments, plus the monotonized per-seller welfare used to
//! argue the decomposition exists for submodular costs.
//!
//! The decomposition solves, over the enumerated integral assignments whose
//! per-seller sets come from the fractional support, the program
//!
//!   maximize t  subject to  sum_l lambda_l = 1,
//!                           sum_{l : atom l gives S to j} lambda_l = t x*_{jS},
//!                           lambda >= 0, t <= 1,
//!
//! and reports gamma = 1/t*. Restricting atoms to support sets loses nothing:
//! any atom using a set of weight zero would be forced to weight zero anyway.

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::market::{realization_welfare, Assignment, Realization};
use crate::sets::{self, BuyerSet};
use crate::simplex::{self, ConstraintOp, LpRow};
use crate::tol;
use crate::welfare::FractionalAllocation;

/// Probability mixture of integral assignments whose per-pair marginals equal
/// `x*_{jS} / gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lottery {
    /// `(weight, assignment)` pairs; weights are positive and sum to one.
    pub atoms: Vec<(f64, Assignment)>,
    pub gamma: f64,
}

impl Lottery {
    /// Probability that seller `j` is assigned exactly the set `s`.
    pub fn marginal(&self, seller: usize, s: BuyerSet) -> f64 {
        self.atoms
            .iter()
            .filter(|(_, a)| a.sets[seller] == s)
            .map(|(w, _)| w)
            .sum()
    }

    /// Expected welfare of the mixture under the given types.
    pub fn expected_welfare(&self, r: &Realization) -> Result<f64> {
        let mut w = 0.0;
        for (weight, a) in &self.atoms {
            w += weight * realization_welfare(r, a)?;
        }
        Ok(w)
    }

    pub fn single_atom(a: Assignment) -> Self {
        Lottery { atoms: vec![(1.0, a)], gamma: 1.0 }
    }
}

/// Monotonized seller welfare: the best welfare seller `j` can extract from a
/// sub-pool of `s`, never negative, zero on the empty set.
pub fn vhat(r: &Realization, seller: usize, s: BuyerSet) -> f64 {
    let margins = crate::welfare::margin_table(r, seller);
    sets::submasks(s)
        .map(|sub| margins[sub as usize])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The smallest-bitmask maximizer behind [`vhat`]: drops buyers that do not
/// pay for themselves. The smallest-bitmask argmax is inclusion-minimal,
/// because a strict subset always has a strictly smaller mask.
pub fn prune_to_minimal(r: &Realization, seller: usize, s: BuyerSet) -> BuyerSet {
    let margins = crate::welfare::margin_table(r, seller);
    let mut best = (0u32, margins[0]);
    for sub in sets::submasks(s) {
        if margins[sub as usize] > best.1 {
            best = (sub, margins[sub as usize]);
        }
    }
    best.0
}

/// Prunes every seller's set; welfare can only rise.
pub fn prune_assignment(r: &Realization, a: &Assignment) -> Assignment {
    Assignment {
        sets: a
            .sets
            .iter()
            .enumerate()
            .map(|(j, &s)| prune_to_minimal(r, j, s))
            .collect(),
    }
}

/// Minimal-gamma convex decomposition of `x*/gamma` into integral assignments.
/// `gamma_cap` defaults to `4 sqrt(m)`; exceeding it is an error carrying the
/// LP-certified minimum.
pub fn decompose(
    x: &FractionalAllocation,
    r: &Realization,
    caps: &Caps,
    gamma_cap: Option<f64>,
) -> Result<Lottery> {
    let m = x.m;
    let gamma_cap = gamma_cap.unwrap_or(4.0 * (m as f64).sqrt());

    // Per-seller support sets, bitmask ascending (entry order guarantees it).
    let mut support: Vec<Vec<BuyerSet>> = vec![Vec::new(); m];
    for e in &x.entries {
        support[e.seller].push(e.set);
    }

    let universe: u128 = support.iter().map(|s| s.len() as u128 + 1).product();
    if universe > caps.max_lottery_atoms as u128 {
        return Err(Error::SizeCapExceeded {
            what: "lottery atom",
            size: universe,
            cap: caps.max_lottery_atoms,
        });
    }

    // All capacity-feasible combinations of support sets (or the empty set)
    // with pairwise-disjoint choices, in lexicographic choice order.
    let mut atoms: Vec<Vec<BuyerSet>> = Vec::new();
    let mut choice: Vec<BuyerSet> = vec![0; m];
    fn build(
        j: usize,
        used: BuyerSet,
        support: &[Vec<BuyerSet>],
        choice: &mut Vec<BuyerSet>,
        atoms: &mut Vec<Vec<BuyerSet>>,
    ) {
        if j == support.len() {
            atoms.push(choice.clone());
            return;
        }
        choice[j] = 0;
        build(j + 1, used, support, choice, atoms);
        for &s in &support[j] {
            if s & used == 0 {
                choice[j] = s;
                build(j + 1, used | s, support, choice, atoms);
                choice[j] = 0;
            }
        }
    }
    build(0, 0, &support, &mut choice, &mut atoms);

    // Variables: one lambda per atom, then t.
    let nv = atoms.len() + 1;
    let t_col = atoms.len();
    let mut objective = vec![0.0; nv];
    objective[t_col] = 1.0;

    let mut rows: Vec<LpRow> = Vec::new();
    let mut ones = vec![0.0; nv];
    ones[..atoms.len()].fill(1.0);
    rows.push(LpRow { coeffs: ones, op: ConstraintOp::Eq, rhs: 1.0 });
    for e in &x.entries {
        let mut coeffs = vec![0.0; nv];
        for (l, atom) in atoms.iter().enumerate() {
            if atom[e.seller] == e.set {
                coeffs[l] = 1.0;
            }
        }
        coeffs[t_col] = -e.weight;
        rows.push(LpRow { coeffs, op: ConstraintOp::Eq, rhs: 0.0 });
    }
    let mut t_cap = vec![0.0; nv];
    t_cap[t_col] = 1.0;
    rows.push(LpRow { coeffs: t_cap, op: ConstraintOp::Le, rhs: 1.0 });

    let sol = simplex::maximize(&objective, &rows)
        .map_err(|e| Error::LpFailure { reason: format!("decomposition LP reported {e:?}") })?;
    let t = sol.x[t_col];
    if t <= tol::FEAS {
        return Err(Error::DecompositionFailure { best_gamma: f64::INFINITY, gamma_cap });
    }
    let gamma = (1.0 / t).max(1.0);
    if gamma > gamma_cap + 1e-6 {
        return Err(Error::DecompositionFailure { best_gamma: gamma, gamma_cap });
    }

    let atoms: Vec<(f64, Assignment)> = atoms
        .into_iter()
        .zip(&sol.x)
        .filter(|(_, &w)| w > 1e-12)
        .map(|(sets, &w)| (w, Assignment { sets }))
        .collect();
    debug_assert!(atoms.iter().all(|(_, a)| realization_welfare(r, a).is_ok()));
    Ok(Lottery { atoms, gamma })
}

/// Whether `x*/gamma` lies in the convex hull of the enumerated integral
/// assignments: the feasibility half of [`decompose`], used to cross-check the
/// minimality of a reported gamma.
pub fn decomposition_feasible_at(
    x: &FractionalAllocation,
    gamma: f64,
    caps: &Caps,
) -> Result<bool> {
    let m = x.m;
    let mut support: Vec<Vec<BuyerSet>> = vec![Vec::new(); m];
    for e in &x.entries {
        support[e.seller].push(e.set);
    }
    let universe: u128 = support.iter().map(|s| s.len() as u128 + 1).product();
    if universe > caps.max_lottery_atoms as u128 {
        return Err(Error::SizeCapExceeded {
            what: "lottery atom",
            size: universe,
            cap: caps.max_lottery_atoms,
        });
    }
    let mut atoms: Vec<Vec<BuyerSet>> = Vec::new();
    let mut choice: Vec<BuyerSet> = vec![0; m];
    fn build(
        j: usize,
        used: BuyerSet,
        support: &[Vec<BuyerSet>],
        choice: &mut Vec<BuyerSet>,
        atoms: &mut Vec<Vec<BuyerSet>>,
    ) {
        if j == support.len() {
            atoms.push(choice.clone());
            return;
        }
        choice[j] = 0;
        build(j + 1, used, support, choice, atoms);
        for &s in &support[j] {
            if s & used == 0 {
                choice[j] = s;
                build(j + 1, used | s, support, choice, atoms);
                choice[j] = 0;
            }
        }
    }
    build(0, 0, &support, &mut choice, &mut atoms);

    let nv = atoms.len();
    let mut rows: Vec<LpRow> = Vec::new();
    rows.push(LpRow { coeffs: vec![1.0; nv], op: ConstraintOp::Eq, rhs: 1.0 });
    for e in &x.entries {
        let coeffs = atoms
            .iter()
            .map(|atom| if atom[e.seller] == e.set { 1.0 } else { 0.0 })
            .collect();
        rows.push(LpRow { coeffs, op: ConstraintOp::Eq, rhs: e.weight / gamma });
    }
    match simplex::maximize(&vec![0.0; nv], &rows) {
        Ok(_) => Ok(true),
        Err(simplex::LpError::Infeasible) => Ok(false),
        Err(e) => Err(Error::LpFailure { reason: format!("feasibility LP reported {e:?}") }),
    }
}
