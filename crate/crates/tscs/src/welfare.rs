//! Welfare maximization for each model class, plus the fractional assignment
//! LP shared with the core computation and the lottery decomposition.
//!
//! The LP has one variable per (seller, nonempty subset within capacity) pair:
//!
//! maximize   sum_{j,S} x_{jS} (sum_{i in S} v_ij - c_j(S))
//! subject to sum_S x_{jS} <= 1              for every seller j
//!            sum_{j} sum_{S : i in S} x_{jS} <= 1   for every buyer i
//!            x >= 0
//!
//! Which maximizer runs where: exhaustive search covers general sellers,
//! direct set-function minimization covers one uncapacitated submodular
//! seller, and the LP (whose optimum must come out integral) covers sellers
//! declared to have substitutes-style costs. All three are exact at desk
//! scale; only their tie-breaking differs, and each is deterministic.

use crate::caps::Caps;
use crate::cost;
use crate::error::{Error, Result};
use crate::market::{Assignment, MarketScenario, Realization};
use crate::sets::{self, BuyerSet};
use crate::simplex::{self, ConstraintOp, LpRow};
use crate::tol;

/// One positive weight of a fractional allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct LpWeight {
    pub seller: usize,
    pub set: BuyerSet,
    pub weight: f64,
}

/// Optimal fractional solution of the assignment LP.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAllocation {
    pub n: usize,
    pub m: usize,
    /// Weights above [`tol::FEAS`], ordered by (seller, subset bitmask).
    pub entries: Vec<LpWeight>,
    /// Optimal objective value.
    pub w_star: f64,
}

impl FractionalAllocation {
    pub fn weight(&self, seller: usize, set: BuyerSet) -> f64 {
        self.entries
            .iter()
            .find(|e| e.seller == seller && e.set == set)
            .map_or(0.0, |e| e.weight)
    }

    pub fn seller_total(&self, seller: usize) -> f64 {
        self.entries.iter().filter(|e| e.seller == seller).map(|e| e.weight).sum()
    }

    pub fn buyer_coverage(&self, buyer: usize) -> f64 {
        self.entries
            .iter()
            .filter(|e| sets::contains(e.set, buyer))
            .map(|e| e.weight)
            .sum()
    }

    /// Reads the solution as an integral assignment if every weight is within
    /// [`tol::INTEGRALITY`] of 0 or 1.
    pub fn to_assignment(&self) -> Option<Assignment> {
        let mut a = Assignment::empty(self.m);
        for e in &self.entries {
            if (e.weight - 1.0).abs() <= tol::INTEGRALITY {
                if a.sets[e.seller] != 0 {
                    return None;
                }
                a.sets[e.seller] = e.set;
            } else if e.weight.abs() > tol::INTEGRALITY {
                return None;
            }
        }
        Some(a)
    }
}

/// Per-seller margin table: `margin[s] = sum_{i in s} v_ij - c_j(s)` for all
/// 2^n subsets.
pub(crate) fn margin_table(r: &Realization, j: usize) -> Vec<f64> {
    let n = r.n();
    let mut value = vec![0.0f64; 1 << n];
    for s in 1..(1usize << n) {
        let low = s.trailing_zeros() as usize;
        value[s] = value[s & (s - 1)] + r.value(low, j);
    }
    (0..(1usize << n))
        .map(|s| value[s] - r.sellers[j].cost.eval(s as u32))
        .collect()
}

/// Global welfare optimum by scanning all `(m+1)^n` assignment words.
/// Ties break toward the lexicographically smallest word, digits ordered
/// unserved < seller 0 < ... < seller m-1.
pub fn optimal_assignment_exhaustive(r: &Realization, caps: &Caps) -> Result<(Assignment, f64)> {
    let n = r.n();
    let m = r.m();
    let words = ((m + 1) as u128).pow(n as u32);
    if words > caps.max_assignments as u128 {
        return Err(Error::SizeCapExceeded {
            what: "assignment word",
            size: words,
            cap: caps.max_assignments,
        });
    }
    let margins: Vec<Vec<f64>> = (0..m).map(|j| margin_table(r, j)).collect();
    let capacity: Vec<usize> = r.sellers.iter().map(|s| s.capacity).collect();

    let mut best_sets: Vec<BuyerSet> = vec![0; m];
    let mut best = 0.0f64; // the all-unserved word
    let mut word = vec![0usize; n];
    let mut sets_buf = vec![0u32; m];
    'outer: loop {
        // Advance the word (buyer 0 is the most significant digit) and skip
        // the all-zero word already accounted for as the baseline.
        let mut pos = n;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            word[pos] += 1;
            if word[pos] <= m {
                break;
            }
            word[pos] = 0;
        }

        sets_buf.iter_mut().for_each(|s| *s = 0);
        for (i, &d) in word.iter().enumerate() {
            if d > 0 {
                sets_buf[d - 1] |= 1 << i;
            }
        }
        if sets_buf.iter().enumerate().any(|(j, &s)| sets::size(s) > capacity[j]) {
            continue;
        }
        let w: f64 = sets_buf.iter().enumerate().map(|(j, &s)| margins[j][s as usize]).sum();
        if w > best {
            best = w;
            best_sets.copy_from_slice(&sets_buf);
        }
    }
    Ok((Assignment { sets: best_sets }, best))
}

/// Single-seller optimum via set-function minimization of `c(S) - sum v_i`,
/// without class validation (used by the mechanism dispatch, where reported
/// types may leave the declared class; the scan stays exact regardless).
pub(crate) fn single_seller_opt(r: &Realization) -> Result<(Assignment, f64)> {
    let margins = margin_table(r, 0);
    let min = cost::minimize_submodular(|s| -margins[s as usize], r.n())?;
    Ok((Assignment { sets: vec![min.minimizer] }, -min.minimum))
}

/// Welfare optimum for one uncapacitated submodular seller.
pub fn optimal_assignment_single_seller(r: &Realization) -> Result<(Assignment, f64)> {
    if r.m() != 1 {
        return Err(Error::ModelMismatch {
            reason: format!("single-seller path invoked with m={}", r.m()),
        });
    }
    if r.sellers[0].capacity != r.n() {
        return Err(Error::ModelMismatch {
            reason: format!(
                "single-seller path requires an uncapacitated seller, capacity {} < n={}",
                r.sellers[0].capacity,
                r.n()
            ),
        });
    }
    if !cost::is_submodular(&r.sellers[0].cost) {
        return Err(Error::ModelMismatch {
            reason: "single-seller path requires a submodular cost".into(),
        });
    }
    single_seller_opt(r)
}

/// Solves the assignment LP with arbitrary column coefficients
/// `coeff(j, S)` in place of the welfare margins. Returns the allocation
/// together with the per-buyer and per-seller row multipliers.
pub(crate) fn solve_assignment_lp_with<F>(
    r: &Realization,
    caps: &Caps,
    coeff: F,
) -> Result<(FractionalAllocation, Vec<f64>, Vec<f64>)>
where
    F: Fn(usize, BuyerSet) -> f64,
{
    let n = r.n();
    let m = r.m();
    let mut columns: Vec<(usize, BuyerSet)> = Vec::new();
    for (j, seller) in r.sellers.iter().enumerate() {
        for s in 1..(1u32 << n) {
            if sets::size(s) <= seller.capacity {
                columns.push((j, s));
            }
        }
        if columns.len() as u128 > caps.max_lp_columns as u128 {
            return Err(Error::SizeCapExceeded {
                what: "LP column",
                size: columns.len() as u128,
                cap: caps.max_lp_columns,
            });
        }
    }

    let objective: Vec<f64> = columns.iter().map(|&(j, s)| coeff(j, s)).collect();
    // Rows: sellers ascending, then buyers ascending.
    let mut rows: Vec<LpRow> = Vec::with_capacity(m + n);
    for j in 0..m {
        let coeffs = columns.iter().map(|&(cj, _)| if cj == j { 1.0 } else { 0.0 }).collect();
        rows.push(LpRow { coeffs, op: ConstraintOp::Le, rhs: 1.0 });
    }
    for i in 0..n {
        let coeffs = columns
            .iter()
            .map(|&(_, s)| if sets::contains(s, i) { 1.0 } else { 0.0 })
            .collect();
        rows.push(LpRow { coeffs, op: ConstraintOp::Le, rhs: 1.0 });
    }

    let sol = simplex::maximize(&objective, &rows).map_err(|e| Error::LpFailure {
        reason: format!("assignment LP reported {e:?}"),
    })?;
    let entries = columns
        .iter()
        .zip(&sol.x)
        .filter(|(_, &w)| w > tol::FEAS)
        .map(|(&(seller, set), &weight)| LpWeight { seller, set, weight })
        .collect();
    let z = sol.duals[..m].to_vec();
    let y = sol.duals[m..].to_vec();
    Ok((FractionalAllocation { n, m, entries, w_star: sol.objective }, y, z))
}

/// Optimal fractional solution of the assignment LP with welfare margins.
pub fn solve_primal_lp(r: &Realization, caps: &Caps) -> Result<FractionalAllocation> {
    let margins: Vec<Vec<f64>> = (0..r.m()).map(|j| margin_table(r, j)).collect();
    let (x, _, _) = solve_assignment_lp_with(r, caps, |j, s| margins[j][s as usize])?;
    Ok(x)
}

pub(crate) fn solve_primal_lp_with_duals(
    r: &Realization,
    caps: &Caps,
) -> Result<(FractionalAllocation, Vec<f64>, Vec<f64>)> {
    let margins: Vec<Vec<f64>> = (0..r.m()).map(|j| margin_table(r, j)).collect();
    solve_assignment_lp_with(r, caps, |j, s| margins[j][s as usize])
}

/// Welfare optimum for sellers declared to satisfy the substitutes condition:
/// solve the LP and insist on an integral optimum. A fractional optimum means
/// the declaration was wrong and is returned as an error with the fractional
/// solution attached.
pub fn optimal_assignment_ngs(r: &Realization, caps: &Caps) -> Result<(Assignment, f64)> {
    let x = solve_primal_lp(r, caps)?;
    match x.to_assignment() {
        Some(a) => {
            let w = crate::market::realization_welfare(r, &a)?;
            Ok((a, w))
        }
        None => Err(Error::IntegralityFailure { allocation: Box::new(x) }),
    }
}

/// Which welfare maximizer a scenario dispatches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WelfareAlgKind {
    Exhaustive,
    SingleSellerSubmodular,
    NgsLp,
}

/// Selection mirrors algorithm availability per model class: one uncapacitated
/// submodular seller gets the set-function path, substitutes-class sellers get
/// the LP, everything else gets exhaustive search.
pub fn select_welfare_alg(scenario: &MarketScenario) -> WelfareAlgKind {
    use crate::market::CostClass;
    let n = scenario.n();
    if scenario.m() == 1
        && scenario.declared_class[0] == CostClass::Submodular
        && scenario.seller_priors[0].support.iter().all(|(_, t)| t.capacity == n)
    {
        return WelfareAlgKind::SingleSellerSubmodular;
    }
    if scenario
        .declared_class
        .iter()
        .all(|c| matches!(c, CostClass::Ngs | CostClass::Additive))
    {
        return WelfareAlgKind::NgsLp;
    }
    WelfareAlgKind::Exhaustive
}

pub fn run_welfare_alg(
    kind: WelfareAlgKind,
    r: &Realization,
    caps: &Caps,
) -> Result<(Assignment, f64)> {
    match kind {
        WelfareAlgKind::Exhaustive => optimal_assignment_exhaustive(r, caps),
        WelfareAlgKind::SingleSellerSubmodular => single_seller_opt(r),
        WelfareAlgKind::NgsLp => optimal_assignment_ngs(r, caps),
    }
}

/// Optimal internal welfare of a coalition: buyers in `buyers` may only be
/// served by sellers in `sellers`, optimally self-organized. Exhaustive over
/// `(|sellers|+1)^|buyers|` words.
pub fn coalition_optimal_welfare(r: &Realization, buyers: BuyerSet, sellers: u32) -> f64 {
    let buyer_list: Vec<usize> = sets::members(buyers).collect();
    let seller_list: Vec<usize> = sets::members(sellers).collect();
    if seller_list.is_empty() || buyer_list.is_empty() {
        return 0.0;
    }
    let margins: Vec<Vec<f64>> = seller_list.iter().map(|&j| margin_table(r, j)).collect();
    let base = seller_list.len() + 1;
    let mut best = 0.0f64;
    let mut word = vec![0usize; buyer_list.len()];
    'outer: loop {
        let mut pos = word.len();
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            word[pos] += 1;
            if word[pos] < base {
                break;
            }
            word[pos] = 0;
        }
        let mut sets_buf = vec![0u32; seller_list.len()];
        for (b, &d) in word.iter().enumerate() {
            if d > 0 {
                sets_buf[d - 1] |= 1 << buyer_list[b];
            }
        }
        if sets_buf
            .iter()
            .enumerate()
            .any(|(k, &s)| sets::size(s) > r.sellers[seller_list[k]].capacity)
        {
            continue;
        }
        let w: f64 = sets_buf.iter().enumerate().map(|(k, &s)| margins[k][s as usize]).sum();
        best = best.max(w);
    }
    best
}

/// For one seller, the optimal coalition welfare `g(B) = max_{S subseteq B,
/// |S| <= k_j} margin_j(S)` for every buyer pool `B`, via subset DP.
pub fn single_seller_coalition_welfares(r: &Realization, j: usize) -> Vec<f64> {
    let n = r.n();
    let k = r.sellers[j].capacity;
    let margins = margin_table(r, j);
    let mut g = vec![0.0f64; 1 << n];
    for b in 1..(1usize << n) {
        let mut best = if sets::size(b as u32) <= k { margins[b] } else { f64::NEG_INFINITY };
        let mut rest = b;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            best = best.max(g[b & !(1 << i)]);
        }
        g[b] = best.max(0.0);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostFunction;
    use crate::market::SellerType;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn det(values: Vec<Vec<f64>>, sellers: Vec<(CostFunction, usize)>) -> Realization {
        Realization {
            buyers: values.into_iter().map(|v| crate::market::BuyerType { values: v }).collect(),
            sellers: sellers
                .into_iter()
                .map(|(cost, capacity)| SellerType { cost, capacity })
                .collect(),
            probability: 1.0,
        }
    }

    fn unit_trade() -> Realization {
        det(vec![vec![1.0]], vec![(CostFunction::tabular(vec![0.0, 0.0]), 1)])
    }

    fn two_buyers_one_seller() -> Realization {
        det(
            vec![vec![0.5], vec![0.4]],
            vec![(CostFunction::tabular(vec![0.0, 0.2, 0.2, 0.3]), 2)],
        )
    }

    fn two_by_two_additive() -> Realization {
        det(
            vec![vec![0.5, 0.3], vec![0.4, 0.6]],
            vec![
                (CostFunction::additive(vec![0.2, 0.3]), 2),
                (CostFunction::additive(vec![0.3, 0.2]), 2),
            ],
        )
    }

    #[test]
    fn exhaustive_unit_trade() {
        let (a, w) = optimal_assignment_exhaustive(&unit_trade(), &Caps::default()).unwrap();
        assert_eq!(a.sets, vec![0b1]);
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_serves_both_buyers() {
        let (a, w) =
            optimal_assignment_exhaustive(&two_buyers_one_seller(), &Caps::default()).unwrap();
        assert_eq!(a.sets, vec![0b11]);
        assert!((w - 0.6).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_two_by_two() {
        let (a, w) =
            optimal_assignment_exhaustive(&two_by_two_additive(), &Caps::default()).unwrap();
        assert_eq!(a.sets, vec![0b01, 0b10]);
        assert!((w - 0.7).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_cap_is_enforced() {
        let caps = Caps { max_assignments: 3, ..Caps::default() };
        assert!(matches!(
            optimal_assignment_exhaustive(&two_buyers_one_seller(), &caps),
            Err(Error::SizeCapExceeded { .. })
        ));
    }

    #[test]
    fn single_seller_matches_exhaustive_on_fixture() {
        let r = two_buyers_one_seller();
        let (a, w) = optimal_assignment_single_seller(&r).unwrap();
        assert_eq!(a.sets, vec![0b11]);
        assert!((w - 0.6).abs() < 1e-12);
    }

    #[test]
    fn single_seller_serves_nobody_when_values_are_zero() {
        let r = det(
            vec![vec![0.0], vec![0.0]],
            vec![(CostFunction::tabular(vec![0.0, 0.2, 0.2, 0.3]), 2)],
        );
        let (a, w) = optimal_assignment_single_seller(&r).unwrap();
        assert_eq!(a.sets, vec![0]);
        assert_eq!(w, 0.0);
    }

    #[test]
    fn single_seller_excludes_negative_margin() {
        let r = det(vec![vec![0.1]], vec![(CostFunction::tabular(vec![0.0, 0.5]), 1)]);
        let (a, w) = optimal_assignment_single_seller(&r).unwrap();
        assert_eq!(a.sets, vec![0]);
        assert_eq!(w, 0.0);
    }

    #[test]
    fn single_seller_rejects_wrong_model() {
        let r = two_by_two_additive();
        assert!(matches!(
            optimal_assignment_single_seller(&r),
            Err(Error::ModelMismatch { .. })
        ));
        let mut capped = two_buyers_one_seller();
        capped.sellers[0].capacity = 1;
        assert!(matches!(
            optimal_assignment_single_seller(&capped),
            Err(Error::ModelMismatch { .. })
        ));
        let non_submodular = det(
            vec![vec![0.5], vec![0.4]],
            vec![(CostFunction::tabular(vec![0.0, 0.2, 0.2, 0.5]), 2)],
        );
        assert!(matches!(
            optimal_assignment_single_seller(&non_submodular),
            Err(Error::ModelMismatch { .. })
        ));
    }

    #[test]
    fn lp_single_seller_is_integral_at_best_subset() {
        let x = solve_primal_lp(&two_buyers_one_seller(), &Caps::default()).unwrap();
        assert!((x.w_star - 0.6).abs() < 1e-9);
        assert!((x.weight(0, 0b11) - 1.0).abs() < 1e-9);
        assert_eq!(x.to_assignment().unwrap().sets, vec![0b11]);
    }

    #[test]
    fn lp_all_zero_values() {
        let r = det(
            vec![vec![0.0], vec![0.0]],
            vec![(CostFunction::tabular(vec![0.0, 0.2, 0.2, 0.3]), 2)],
        );
        let x = solve_primal_lp(&r, &Caps::default()).unwrap();
        assert!(x.w_star.abs() < 1e-12);
        assert!(x.entries.is_empty());
    }

    #[test]
    fn lp_matches_exhaustive_on_two_by_two() {
        let x = solve_primal_lp(&two_by_two_additive(), &Caps::default()).unwrap();
        assert!((x.w_star - 0.7).abs() < 1e-9);
    }

    #[test]
    fn ngs_path_reads_off_integral_assignment() {
        let (a, w) = optimal_assignment_ngs(&two_by_two_additive(), &Caps::default()).unwrap();
        assert_eq!(a.sets, vec![0b01, 0b10]);
        assert!((w - 0.7).abs() < 1e-12);
    }

    #[test]
    fn fractional_optimum_is_an_error() {
        // Singleton cost 1.0, pairs 1.1, triple 2.5: strongly non-submodular.
        // The LP covers each buyer by two half-weight pairs for 1.35 while the
        // best integral assignment earns 0.9.
        let table = vec![0.0, 1.0, 1.0, 1.1, 1.0, 1.1, 1.1, 2.5];
        let r = det(
            vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![
                (CostFunction::tabular(table.clone()), 3),
                (CostFunction::tabular(table), 3),
            ],
        );
        match optimal_assignment_ngs(&r, &Caps::default()) {
            Err(Error::IntegralityFailure { allocation }) => {
                assert!(allocation.w_star > 0.9 + 1e-6);
            }
            other => panic!("expected integrality failure, got {other:?}"),
        }
    }

    #[test]
    fn lp_upper_bounds_exhaustive_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..150 {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(1..=2);
            let r = crate::testutil::random_realization(&mut rng, n, m);
            let (_, w) = optimal_assignment_exhaustive(&r, &Caps::default()).unwrap();
            let x = solve_primal_lp(&r, &Caps::default()).unwrap();
            assert!(x.w_star >= w - tol::OBJ, "w*={} < w={}", x.w_star, w);
            if m == 1 {
                assert!((x.w_star - w).abs() < tol::OBJ, "single-seller gap");
            }
        }
    }

    #[test]
    fn single_seller_equals_exhaustive_on_random_submodular_instances() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..500 {
            let n = rng.gen_range(1..=8);
            let r = crate::testutil::random_coverage_realization(&mut rng, n);
            let (_, w_scan) = optimal_assignment_exhaustive(&r, &Caps::default()).unwrap();
            let (_, w_sub) = optimal_assignment_single_seller(&r).unwrap();
            assert!((w_scan - w_sub).abs() < 1e-9);
        }
    }

    #[test]
    fn repeated_lp_solves_are_identical() {
        let r = two_by_two_additive();
        let a = solve_primal_lp(&r, &Caps::default()).unwrap();
        let b = solve_primal_lp(&r, &Caps::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coalition_welfare_of_subgroups() {
        let r = two_by_two_additive();
        // Grand coalition equals the scenario optimum.
        assert!((coalition_optimal_welfare(&r, 0b11, 0b11) - 0.7).abs() < 1e-12);
        // Buyer 0 with seller 0 only.
        assert!((coalition_optimal_welfare(&r, 0b01, 0b01) - 0.3).abs() < 1e-12);
        // No sellers: nothing to trade.
        assert_eq!(coalition_optimal_welfare(&r, 0b11, 0), 0.0);
    }

    #[test]
    fn coalition_dp_matches_direct_scan() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.gen_range(1..=5);
            let r = crate::testutil::random_realization(&mut rng, n, 1);
            let g = single_seller_coalition_welfares(&r, 0);
            for b in 0..(1u32 << n) {
                let direct = coalition_optimal_welfare(&r, b, 0b1);
                assert!((g[b as usize] - direct).abs() < 1e-9);
            }
        }
    }

}
