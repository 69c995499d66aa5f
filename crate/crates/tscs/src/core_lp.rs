//! Core utility computation: solve the dual of the assignment LP, scale the
//! multipliers by the integral-to-fractional welfare ratio, and verify
//! (approximate-)core membership by coalition enumeration.
//!
//! The dual
//!
//! minimize   sum_i y_i + sum_j z_j
//! subject to sum_{i in S} y_i + z_j >= sum_{i in S} v_ij - c_j(S)
//!            for every seller j and nonempty S with |S| <= k_j,  y, z >= 0
//!
//! is solved by reading the row multipliers off the optimal primal tableau,
//! which the simplex reaches through Bland's rule on the fixed column order
//! (sellers ascending, subsets by bitmask ascending) — one deterministic
//! answer per instance. Scaling by W/W* turns a dual solution into utilities
//! that sum to the realized integral welfare and sit in the (W*/W)-core.

use crate::caps::Caps;
use crate::cost;
use crate::error::{Error, Result};
use crate::market::{enumerate_realizations, MarketScenario, Realization};
use crate::sets::{self, BuyerSet};
use crate::tol;
use crate::welfare;

/// Optimal dual multipliers: `y` per buyer, `z` per seller.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub objective: f64,
}

/// Nonnegative utilities summing to the realized integral welfare and
/// satisfying every single-seller coalition constraint up to `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreUtilities {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Realized integrality ratio W*/W (1 in the degenerate all-zero case).
    pub alpha: f64,
    /// Integral optimum the utilities sum to.
    pub welfare: f64,
    /// Fractional optimum of the assignment LP.
    pub w_star: f64,
}

pub fn solve_dual(r: &Realization, caps: &Caps) -> Result<DualSolution> {
    let (x, y, z) = welfare::solve_primal_lp_with_duals(r, caps)?;
    // Strong duality: the multipliers' total equals the primal optimum.
    debug_assert!((y.iter().sum::<f64>() + z.iter().sum::<f64>() - x.w_star).abs() < 1e-6);
    Ok(DualSolution { objective: x.w_star, y, z })
}

/// Scale the dual solution by `W/W*` where `W` is the integral optimum
/// produced by the welfare algorithm. With `W* = 0` every margin is
/// nonpositive and zero utilities satisfy both core properties vacuously.
pub fn core_utilities(r: &Realization, welfare_integral: f64, caps: &Caps) -> Result<CoreUtilities> {
    let dual = solve_dual(r, caps)?;
    let w_star = dual.objective;
    if welfare_integral > w_star + 1e-6 {
        return Err(Error::ModelMismatch {
            reason: format!(
                "integral welfare {welfare_integral} exceeds fractional optimum {w_star}"
            ),
        });
    }
    if w_star <= 1e-12 {
        return Ok(CoreUtilities {
            y: vec![0.0; r.n()],
            z: vec![0.0; r.m()],
            alpha: 1.0,
            welfare: 0.0,
            w_star: 0.0,
        });
    }
    let scale = welfare_integral / w_star;
    Ok(CoreUtilities {
        y: dual.y.iter().map(|v| v * scale).collect(),
        z: dual.z.iter().map(|v| v * scale).collect(),
        alpha: (w_star / welfare_integral).max(1.0),
        welfare: welfare_integral,
        w_star,
    })
}

/// Outcome of a separation query against the dual constraints.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparationResult {
    Feasible,
    /// The most violated constraint: `slack` is the (negative) value of
    /// `c_j(S) - sum_{i in S}(v_ij - y_i) + z_j`.
    Violated { seller: usize, set: BuyerSet, slack: f64 },
    /// A multiplier is negative.
    NegativeMultiplier { buyer: Option<usize>, seller: Option<usize> },
}

/// Finds the most violated dual constraint for the proposed multipliers, or
/// reports feasibility. For an uncapacitated seller the rewritten constraint
/// `c_j(S) - sum_{i in S}(v_ij - y_i) >= -z_j` is minimized through the
/// set-function minimizer (submodular whenever the cost is); a capacity
/// restricts the scan to subsets within it.
pub fn separation_oracle(y: &[f64], z: &[f64], r: &Realization) -> SeparationResult {
    if let Some(i) = y.iter().position(|v| *v < -tol::FEAS) {
        return SeparationResult::NegativeMultiplier { buyer: Some(i), seller: None };
    }
    if let Some(j) = z.iter().position(|v| *v < -tol::FEAS) {
        return SeparationResult::NegativeMultiplier { buyer: None, seller: Some(j) };
    }
    let n = r.n();
    let mut worst: Option<(usize, BuyerSet, f64)> = None;
    for (j, seller) in r.sellers.iter().enumerate() {
        let constraint =
            |s: BuyerSet| seller.cost.eval(s) - sets::members(s).map(|i| r.value(i, j) - y[i]).sum::<f64>();
        let (set, value) = if seller.capacity == n {
            let min = cost::minimize_submodular(constraint, n).expect("n validated");
            (min.minimizer, min.minimum)
        } else {
            let mut best = (0u32, 0.0f64);
            for s in 1..(1u32 << n) {
                if sets::size(s) <= seller.capacity {
                    let v = constraint(s);
                    if v < best.1 {
                        best = (s, v);
                    }
                }
            }
            best
        };
        if set == 0 {
            continue;
        }
        let slack = value + z[j];
        if worst.as_ref().map_or(true, |w| slack < w.2) {
            worst = Some((j, set, slack));
        }
    }
    match worst {
        Some((seller, set, slack)) if slack < -tol::FEAS => {
            SeparationResult::Violated { seller, set, slack }
        }
        _ => SeparationResult::Feasible,
    }
}

/// Witness of a failed core check.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreViolation {
    Coalition { seller: usize, set: BuyerSet, slack: f64 },
    SumMismatch { total: f64, welfare: f64 },
    NegativeUtility { buyer: Option<usize>, seller: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreCheck {
    pub pass: bool,
    pub violation: Option<CoreViolation>,
}

/// Verifies the two core properties at approximation `alpha`: utilities are
/// nonnegative, every single-seller coalition satisfies
/// `alpha (sum_{i in S} y_i + z_j) >= sum_{i in S} v_ij - c_j(S)`, and the
/// utilities sum to the realized optimal welfare. Single-seller coverage
/// extends to mixed coalitions because a mixed improvement decomposes into
/// per-seller improvements.
pub fn verify_core(y: &[f64], z: &[f64], r: &Realization, alpha: f64, caps: &Caps) -> Result<CoreCheck> {
    if let Some(i) = y.iter().position(|v| *v < -1e-12) {
        return Ok(CoreCheck {
            pass: false,
            violation: Some(CoreViolation::NegativeUtility { buyer: Some(i), seller: None }),
        });
    }
    if let Some(j) = z.iter().position(|v| *v < -1e-12) {
        return Ok(CoreCheck {
            pass: false,
            violation: Some(CoreViolation::NegativeUtility { buyer: None, seller: Some(j) }),
        });
    }
    let n = r.n();
    for (j, seller) in r.sellers.iter().enumerate() {
        let margins = welfare::margin_table(r, j);
        for s in 1..(1u32 << n) {
            if sets::size(s) > seller.capacity {
                continue;
            }
            let utility: f64 = sets::members(s).map(|i| y[i]).sum::<f64>() + z[j];
            let slack = alpha * utility - margins[s as usize];
            if slack < -tol::FEAS {
                return Ok(CoreCheck {
                    pass: false,
                    violation: Some(CoreViolation::Coalition { seller: j, set: s, slack }),
                });
            }
        }
    }
    let (_, w) = welfare::optimal_assignment_exhaustive(r, caps)?;
    let total = y.iter().sum::<f64>() + z.iter().sum::<f64>();
    if (total - w).abs() > tol::BALANCE {
        return Ok(CoreCheck {
            pass: false,
            violation: Some(CoreViolation::SumMismatch { total, welfare: w }),
        });
    }
    Ok(CoreCheck { pass: true, violation: None })
}

/// Solves the dual through its separation oracle: column generation on the
/// primal, adding the most violated dual constraint until none exists. This
/// is the cutting-plane stand-in for the ellipsoid argument and must agree
/// with [`solve_dual`] on the objective.
pub fn solve_dual_by_column_generation(r: &Realization, caps: &Caps) -> Result<DualSolution> {
    let n = r.n();
    let m = r.m();
    let margins: Vec<Vec<f64>> = (0..m).map(|j| welfare::margin_table(r, j)).collect();
    // Working set: all singleton columns.
    let mut working: Vec<Vec<BuyerSet>> = (0..m).map(|_| (0..n).map(|i| 1u32 << i).collect()).collect();

    let max_rounds = m * (1usize << n);
    for _ in 0..=max_rounds {
        let (y, z) = solve_restricted(r, &working, &margins, caps)?;
        match separation_oracle(&y, &z, r) {
            SeparationResult::Feasible => {
                let objective = y.iter().sum::<f64>() + z.iter().sum::<f64>();
                return Ok(DualSolution { y, z, objective });
            }
            SeparationResult::Violated { seller, set, .. } => {
                if working[seller].contains(&set) {
                    // The oracle re-reported a known column: tolerance-level
                    // stall, accept the current multipliers.
                    let objective = y.iter().sum::<f64>() + z.iter().sum::<f64>();
                    return Ok(DualSolution { y, z, objective });
                }
                working[seller].push(set);
                working[seller].sort_unstable();
            }
            SeparationResult::NegativeMultiplier { .. } => {
                return Err(Error::LpFailure {
                    reason: "restricted dual returned negative multipliers".into(),
                });
            }
        }
    }
    Err(Error::LpFailure { reason: "column generation failed to converge".into() })
}

fn solve_restricted(
    r: &Realization,
    working: &[Vec<BuyerSet>],
    margins: &[Vec<f64>],
    _caps: &Caps,
) -> Result<(Vec<f64>, Vec<f64>)> {
    use crate::simplex::{self, ConstraintOp, LpRow};
    let n = r.n();
    let m = r.m();
    let columns: Vec<(usize, BuyerSet)> = working
        .iter()
        .enumerate()
        .flat_map(|(j, sets_j)| {
            sets_j
                .iter()
                .filter(move |&&s| sets::size(s) <= r.sellers[j].capacity)
                .map(move |&s| (j, s))
        })
        .collect();
    let objective: Vec<f64> = columns.iter().map(|&(j, s)| margins[j][s as usize]).collect();
    let mut rows = Vec::with_capacity(m + n);
    for j in 0..m {
        rows.push(LpRow {
            coeffs: columns.iter().map(|&(cj, _)| if cj == j { 1.0 } else { 0.0 }).collect(),
            op: ConstraintOp::Le,
            rhs: 1.0,
        });
    }
    for i in 0..n {
        rows.push(LpRow {
            coeffs: columns
                .iter()
                .map(|&(_, s)| if sets::contains(s, i) { 1.0 } else { 0.0 })
                .collect(),
            op: ConstraintOp::Le,
            rhs: 1.0,
        });
    }
    let sol = simplex::maximize(&objective, &rows)
        .map_err(|e| Error::LpFailure { reason: format!("restricted LP reported {e:?}") })?;
    Ok((sol.duals[m..].to_vec(), sol.duals[..m].to_vec()))
}

/// Identifies a coalition by its buyer and seller masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoalitionWitness {
    pub buyers: BuyerSet,
    pub sellers: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreSlackReport {
    /// `min over coalitions of factor * U(coalition) - E[W(coalition)]`.
    pub slack: f64,
    pub witness: CoalitionWitness,
    /// Whether the full mixed-coalition grid was enumerated (required when
    /// some expected utility is negative) or the single-seller family plus
    /// the grand coalition sufficed.
    pub full_enumeration: bool,
}

/// Expected core slack of fixed per-agent utilities against every coalition's
/// expected optimal internal welfare.
///
/// With nonnegative utilities the single-seller family plus the grand
/// coalition is sound for all mixed coalitions (a mixed improvement splits
/// into per-seller improvements); otherwise every (buyer set, seller set)
/// pair is enumerated.
pub fn expected_core_slack(
    scenario: &MarketScenario,
    buyer_utils: &[f64],
    seller_utils: &[f64],
    factor: f64,
    caps: &Caps,
) -> Result<CoreSlackReport> {
    let n = scenario.n();
    let m = scenario.m();
    let realizations = enumerate_realizations(scenario, caps)?;
    let nonnegative = buyer_utils.iter().chain(seller_utils).all(|u| *u >= -tol::FEAS);

    let buyer_sum = |b: BuyerSet| sets::members(b).map(|i| buyer_utils[i]).sum::<f64>();

    if nonnegative {
        let mut expected = vec![vec![0.0f64; 1 << n]; m];
        let mut grand = 0.0;
        for r in &realizations {
            for (j, exp_j) in expected.iter_mut().enumerate() {
                let g = welfare::single_seller_coalition_welfares(r, j);
                for (b, e) in exp_j.iter_mut().enumerate() {
                    *e += r.probability * g[b];
                }
            }
            let (_, w) = welfare::optimal_assignment_exhaustive(r, caps)?;
            grand += r.probability * w;
        }
        let mut best: Option<(f64, CoalitionWitness)> = None;
        for j in 0..m {
            for b in 0..(1u32 << n) {
                let slack = factor * (buyer_sum(b) + seller_utils[j]) - expected[j][b as usize];
                if best.as_ref().map_or(true, |(s, _)| slack < *s) {
                    best = Some((slack, CoalitionWitness { buyers: b, sellers: 1 << j }));
                }
            }
        }
        let total: f64 = buyer_utils.iter().chain(seller_utils).sum();
        let grand_slack = factor * total - grand;
        let grand_witness =
            CoalitionWitness { buyers: sets::full_set(n), sellers: sets::full_set(m) };
        let (slack, witness) = match best {
            Some((s, w)) if s < grand_slack => (s, w),
            _ => (grand_slack, grand_witness),
        };
        Ok(CoreSlackReport { slack, witness, full_enumeration: false })
    } else {
        let mut best: Option<(f64, CoalitionWitness)> = None;
        for sellers in 0..(1u32 << m) {
            for buyers in 0..(1u32 << n) {
                let mut expected = 0.0;
                for r in &realizations {
                    expected += r.probability * welfare::coalition_optimal_welfare(r, buyers, sellers);
                }
                let seller_sum: f64 = sets::members(sellers).map(|j| seller_utils[j]).sum();
                let slack = factor * (buyer_sum(buyers) + seller_sum) - expected;
                if best.as_ref().map_or(true, |(s, _)| slack < *s) {
                    best = Some((slack, CoalitionWitness { buyers, sellers }));
                }
            }
        }
        let (slack, witness) = best.expect("at least the empty coalition");
        Ok(CoreSlackReport { slack, witness, full_enumeration: true })
    }
}
