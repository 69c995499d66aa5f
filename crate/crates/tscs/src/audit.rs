//! Brute-force property verification: truthfulness over a full misreport
//! grid, exact ex-ante budget and rationality checks, efficiency ratios, and
//! coalition (core) audits. Every check recomputes what it asserts from the
//! scenario and the mechanism's fixed constants; nothing is trusted from the
//! mechanism's own bookkeeping.

use rayon::prelude::*;

use crate::caps::Caps;
use crate::core_lp;
use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::market::{BuyerType, MarketScenario, Realization, SellerType};
use crate::mechanisms::{
    ex_ante_report, mechanism_outcome, true_utilities, ExAnteReport, ExpectedCoreUtilities,
    MechanismKind, MechanismOutcome,
};
use crate::sets::{self, BuyerSet};
use crate::tol;
use crate::welfare;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentId {
    Buyer(usize),
    Seller(usize),
}

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AgentId::Buyer(i) => write!(f, "buyer {i}"),
            AgentId::Seller(j) => write!(f, "seller {j}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditProperty {
    Efficiency,
    Dsic,
    ExAnteIr,
    ExAnteBb,
    ExAnteWbb,
    Core,
}

impl AuditProperty {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditProperty::Efficiency => "efficiency",
            AuditProperty::Dsic => "dsic",
            AuditProperty::ExAnteIr => "ex_ante_ir",
            AuditProperty::ExAnteBb => "ex_ante_bb",
            AuditProperty::ExAnteWbb => "ex_ante_wbb",
            AuditProperty::Core => "core",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AuditWitness {
    Misreport {
        agent: AgentId,
        true_type: String,
        misreport: String,
        /// Support indices of the other agents' profile, buyers then sellers,
        /// with the deviating agent's slot omitted.
        others_profile: Vec<usize>,
    },
    Coalition { buyers: BuyerSet, sellers: u32 },
    Agent { agent: AgentId, value: f64 },
}

impl std::fmt::Display for AuditWitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AuditWitness::Misreport { agent, true_type, misreport, others_profile } => write!(
                f,
                "{agent} with true type {true_type} gains by reporting {misreport} (others profile {others_profile:?})"
            ),
            AuditWitness::Coalition { buyers, sellers } => {
                let b: Vec<usize> = sets::members(*buyers).collect();
                let s: Vec<usize> = sets::members(*sellers).collect();
                write!(f, "coalition buyers {b:?} sellers {s:?}")
            }
            AuditWitness::Agent { agent, value } => write!(f, "{agent} at {value:.6}"),
        }
    }
}

/// `pass` holds exactly when `worst_violation <= tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditResult {
    pub property: AuditProperty,
    pub pass: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub witness: Option<AuditWitness>,
}

impl AuditResult {
    fn new(
        property: AuditProperty,
        worst_violation: f64,
        tolerance: f64,
        witness: Option<AuditWitness>,
    ) -> Self {
        AuditResult { property, pass: worst_violation <= tolerance, worst_violation, tolerance, witness }
    }
}

fn describe_buyer(t: &BuyerType) -> String {
    format!("values {:?}", t.values)
}

fn describe_seller(t: &SellerType) -> String {
    match &t.cost {
        CostFunction::Additive { per_buyer } => {
            format!("additive cost {per_buyer:?} capacity {}", t.capacity)
        }
        CostFunction::Tabular { table } => {
            format!("tabular cost {table:?} capacity {}", t.capacity)
        }
    }
}

/// Candidate reports per agent: every same-side support type of any agent,
/// plus one-coordinate perturbations (+-0.05, clamped to the type's domain)
/// of the agent's own support types. Truthful types are always included.
#[derive(Debug, Clone)]
pub struct MisreportUniverse {
    pub buyer_reports: Vec<Vec<BuyerType>>,
    pub seller_reports: Vec<Vec<SellerType>>,
}

const PERTURBATION: f64 = 0.05;

impl MisreportUniverse {
    pub fn standard(scenario: &MarketScenario) -> Self {
        let mut buyer_union: Vec<BuyerType> = Vec::new();
        for prior in &scenario.buyer_priors {
            for (_, t) in &prior.support {
                if !buyer_union.contains(t) {
                    buyer_union.push(t.clone());
                }
            }
        }
        let mut seller_union: Vec<SellerType> = Vec::new();
        for prior in &scenario.seller_priors {
            for (_, t) in &prior.support {
                if !seller_union.contains(t) {
                    seller_union.push(t.clone());
                }
            }
        }

        let buyer_reports = scenario
            .buyer_priors
            .iter()
            .map(|prior| {
                let mut reports = buyer_union.clone();
                for (_, t) in &prior.support {
                    for j in 0..t.values.len() {
                        for delta in [-PERTURBATION, PERTURBATION] {
                            let mut p = t.clone();
                            p.values[j] = (p.values[j] + delta).clamp(0.0, 1.0);
                            if !reports.contains(&p) {
                                reports.push(p);
                            }
                        }
                    }
                }
                reports
            })
            .collect();
        let seller_reports = scenario
            .seller_priors
            .iter()
            .map(|prior| {
                let mut reports = seller_union.clone();
                for (_, t) in &prior.support {
                    match &t.cost {
                        CostFunction::Additive { per_buyer } => {
                            for i in 0..per_buyer.len() {
                                for delta in [-PERTURBATION, PERTURBATION] {
                                    let mut c = per_buyer.clone();
                                    c[i] = (c[i] + delta).max(0.0);
                                    let p = SellerType {
                                        cost: CostFunction::Additive { per_buyer: c },
                                        capacity: t.capacity,
                                    };
                                    if !reports.contains(&p) {
                                        reports.push(p);
                                    }
                                }
                            }
                        }
                        CostFunction::Tabular { table } => {
                            for s in 1..table.len() {
                                for delta in [-PERTURBATION, PERTURBATION] {
                                    let mut tab = table.clone();
                                    tab[s] = (tab[s] + delta).max(0.0);
                                    let p = SellerType {
                                        cost: CostFunction::Tabular { table: tab },
                                        capacity: t.capacity,
                                    };
                                    if !reports.contains(&p) {
                                        reports.push(p);
                                    }
                                }
                            }
                        }
                    }
                }
                reports
            })
            .collect();
        MisreportUniverse { buyer_reports, seller_reports }
    }

    fn grid_size(&self, scenario: &MarketScenario) -> u128 {
        let mut total: u128 = 0;
        let joint = scenario.joint_support_size();
        for (i, reports) in self.buyer_reports.iter().enumerate() {
            let own = scenario.buyer_priors[i].len() as u128;
            total += (joint / own) * reports.len() as u128;
        }
        for (j, reports) in self.seller_reports.iter().enumerate() {
            let own = scenario.seller_priors[j].len() as u128;
            total += (joint / own) * reports.len() as u128;
        }
        total
    }
}

struct DeviationBest {
    gain: f64,
    true_type_idx: usize,
    report_idx: usize,
}

/// Worst truthfulness violation over (agent, true type, others' profile,
/// misreport): `max u(misreport) - u(truth)` with utilities evaluated at true
/// types and the mechanism's constants held fixed. Others report truthfully.
pub fn audit_dsic<F>(
    scenario: &MarketScenario,
    universe: &MisreportUniverse,
    outcome_fn: &F,
    caps: &Caps,
) -> Result<AuditResult>
where
    F: Fn(&Realization) -> Result<MechanismOutcome> + Sync,
{
    scenario.validate()?;
    let size = universe.grid_size(scenario);
    if size > caps.max_deviation_runs as u128 {
        return Err(Error::SizeCapExceeded {
            what: "deviation grid",
            size,
            cap: caps.max_deviation_runs,
        });
    }

    let n = scenario.n();
    let m = scenario.m();
    let mut worst: Option<(f64, AuditWitness)> = None;

    let agents: Vec<AgentId> = (0..n)
        .map(AgentId::Buyer)
        .chain((0..m).map(AgentId::Seller))
        .collect();
    for agent in agents {
        // Joint support of everyone but the deviating agent.
        let radices: Vec<usize> = scenario
            .buyer_priors
            .iter()
            .enumerate()
            .filter(|(i, _)| AgentId::Buyer(*i) != agent)
            .map(|(_, p)| p.len())
            .chain(
                scenario
                    .seller_priors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| AgentId::Seller(*j) != agent)
                    .map(|(_, p)| p.len()),
            )
            .collect();
        let mut profiles: Vec<Vec<usize>> = Vec::new();
        let mut idx = vec![0usize; radices.len()];
        loop {
            profiles.push(idx.clone());
            let mut pos = radices.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < radices[pos] {
                    break;
                }
                idx[pos] = 0;
            }
            if idx.iter().all(|&v| v == 0) {
                break;
            }
        }

        let per_profile: Vec<Option<DeviationBest>> = profiles
            .par_iter()
            .map(|profile| deviation_best(scenario, universe, outcome_fn, agent, profile, caps))
            .collect::<Result<Vec<_>>>()?;

        for (p_idx, best) in per_profile.iter().enumerate() {
            if let Some(b) = best {
                if worst.as_ref().map_or(true, |(g, _)| b.gain > *g) {
                    let witness = match agent {
                        AgentId::Buyer(i) => AuditWitness::Misreport {
                            agent,
                            true_type: describe_buyer(
                                &scenario.buyer_priors[i].support[b.true_type_idx].1,
                            ),
                            misreport: describe_buyer(&universe.buyer_reports[i][b.report_idx]),
                            others_profile: profiles[p_idx].clone(),
                        },
                        AgentId::Seller(j) => AuditWitness::Misreport {
                            agent,
                            true_type: describe_seller(
                                &scenario.seller_priors[j].support[b.true_type_idx].1,
                            ),
                            misreport: describe_seller(&universe.seller_reports[j][b.report_idx]),
                            others_profile: profiles[p_idx].clone(),
                        },
                    };
                    worst = Some((b.gain, witness));
                }
            }
        }
    }

    let (violation, witness) = match worst {
        Some((g, w)) => (g, if g > tol::DSIC { Some(w) } else { None }),
        None => (0.0, None),
    };
    Ok(AuditResult::new(AuditProperty::Dsic, violation, tol::DSIC, witness))
}

/// Best deviation for one agent against one fixed profile of the others.
/// Outcomes are computed once per distinct report and reused across the
/// agent's true types (the mechanism sees reports only).
fn deviation_best<F>(
    scenario: &MarketScenario,
    universe: &MisreportUniverse,
    outcome_fn: &F,
    agent: AgentId,
    profile: &[usize],
    _caps: &Caps,
) -> Result<Option<DeviationBest>>
where
    F: Fn(&Realization) -> Result<MechanismOutcome> + Sync,
{
    let n = scenario.n();
    let m = scenario.m();
    // Expand the profile into full index vectors with a placeholder (0) at the
    // deviating agent's slot.
    let mut buyer_idx = vec![0usize; n];
    let mut seller_idx = vec![0usize; m];
    let mut cursor = 0;
    for i in 0..n {
        if AgentId::Buyer(i) != agent {
            buyer_idx[i] = profile[cursor];
            cursor += 1;
        }
    }
    for j in 0..m {
        if AgentId::Seller(j) != agent {
            seller_idx[j] = profile[cursor];
            cursor += 1;
        }
    }
    let base = scenario.realization(&buyer_idx, &seller_idx);

    let mut best: Option<DeviationBest> = None;
    match agent {
        AgentId::Buyer(i) => {
            let reports = &universe.buyer_reports[i];
            let outcomes: Vec<MechanismOutcome> = reports
                .iter()
                .map(|t| outcome_fn(&base.with_buyer(i, t.clone())))
                .collect::<Result<Vec<_>>>()?;
            for (t_idx, (_, true_type)) in scenario.buyer_priors[i].support.iter().enumerate() {
                let true_real = base.with_buyer(i, true_type.clone());
                let truth_pos = reports
                    .iter()
                    .position(|t| t == true_type)
                    .expect("support types are included in the report list");
                let u_truth = true_utilities(&outcomes[truth_pos], &true_real).0[i];
                for (k, outcome) in outcomes.iter().enumerate() {
                    let gain = true_utilities(outcome, &true_real).0[i] - u_truth;
                    if best.as_ref().map_or(gain > 0.0, |b| gain > b.gain) {
                        best = Some(DeviationBest { gain, true_type_idx: t_idx, report_idx: k });
                    }
                }
            }
        }
        AgentId::Seller(j) => {
            let reports = &universe.seller_reports[j];
            let outcomes: Vec<MechanismOutcome> = reports
                .iter()
                .map(|t| outcome_fn(&base.with_seller(j, t.clone())))
                .collect::<Result<Vec<_>>>()?;
            for (t_idx, (_, true_type)) in scenario.seller_priors[j].support.iter().enumerate() {
                let true_real = base.with_seller(j, true_type.clone());
                let truth_pos = reports
                    .iter()
                    .position(|t| t == true_type)
                    .expect("support types are included in the report list");
                let u_truth = true_utilities(&outcomes[truth_pos], &true_real).1[j];
                for (k, outcome) in outcomes.iter().enumerate() {
                    let gain = true_utilities(outcome, &true_real).1[j] - u_truth;
                    if best.as_ref().map_or(gain > 0.0, |b| gain > b.gain) {
                        best = Some(DeviationBest { gain, true_type_idx: t_idx, report_idx: k });
                    }
                }
            }
        }
    }
    Ok(best)
}

/// Efficiency ratio of the mechanism's expected welfare against the exact
/// optimum: 1 (two-sided) for the welfare-optimal mechanisms, at least
/// `1/gamma` for the lottery.
pub fn audit_efficiency(report: &ExAnteReport) -> AuditResult {
    let ratio = if report.optimal_welfare.abs() <= 1e-12 {
        1.0
    } else {
        report.mechanism_welfare / report.optimal_welfare
    };
    match report.kind {
        MechanismKind::Exact | MechanismKind::Sampled => {
            AuditResult::new(AuditProperty::Efficiency, (ratio - 1.0).abs(), tol::OBJ, None)
        }
        MechanismKind::Lottery => {
            let violation = 1.0 / report.gamma - ratio;
            AuditResult::new(AuditProperty::Efficiency, violation, tol::BALANCE, None)
        }
    }
}

/// Ex-ante individual rationality and budget balance, read off the exact
/// report. The exact mechanism must balance two-sidedly and give every agent
/// nonnegative expected utility; the sampled mechanisms are audited one-sided
/// (weak budget balance) with the IR floor relaxed to -epsilon.
pub fn audit_ex_ante(report: &ExAnteReport, epsilon: Option<f64>) -> Vec<AuditResult> {
    let mut results = Vec::new();

    let (worst_u, worst_agent) = report
        .expected_buyer_utility
        .iter()
        .enumerate()
        .map(|(i, u)| (AgentId::Buyer(i), *u))
        .chain(
            report
                .expected_seller_utility
                .iter()
                .enumerate()
                .map(|(j, u)| (AgentId::Seller(j), *u)),
        )
        .fold((f64::INFINITY, AgentId::Buyer(0)), |acc, (a, u)| {
            if u < acc.0 {
                (u, a)
            } else {
                acc
            }
        });
    let ir_floor = match (report.kind, epsilon) {
        (MechanismKind::Exact, _) | (_, None) => tol::FEAS,
        (_, Some(eps)) => eps,
    };
    let ir_violation = -worst_u;
    results.push(AuditResult::new(
        AuditProperty::ExAnteIr,
        ir_violation,
        ir_floor,
        if ir_violation > ir_floor {
            Some(AuditWitness::Agent { agent: worst_agent, value: worst_u })
        } else {
            None
        },
    ));

    match report.kind {
        MechanismKind::Exact => {
            results.push(AuditResult::new(
                AuditProperty::ExAnteBb,
                report.budget_surplus.abs(),
                tol::BALANCE,
                None,
            ));
        }
        MechanismKind::Sampled | MechanismKind::Lottery => {
            results.push(AuditResult::new(
                AuditProperty::ExAnteWbb,
                -report.budget_surplus,
                tol::BALANCE,
                None,
            ));
        }
    }
    results
}

/// Core audit at a given approximation factor against arbitrary expected
/// utilities (the mechanism's, or injected ones for negative controls).
pub fn audit_core_ex_ante(
    scenario: &MarketScenario,
    buyer_utils: &[f64],
    seller_utils: &[f64],
    factor: f64,
    caps: &Caps,
) -> Result<AuditResult> {
    let slack = core_lp::expected_core_slack(scenario, buyer_utils, seller_utils, factor, caps)?;
    let violation = -slack.slack;
    Ok(AuditResult::new(
        AuditProperty::Core,
        violation,
        tol::BALANCE,
        if violation > tol::BALANCE {
            Some(AuditWitness::Coalition {
                buyers: slack.witness.buyers,
                sellers: slack.witness.sellers,
            })
        } else {
            None
        },
    ))
}

/// Runs every audit for one mechanism: efficiency, truthfulness, ex-ante
/// IR/BB (or WBB), and the core at the report's realized factor.
pub fn audit_all(
    scenario: &MarketScenario,
    kind: MechanismKind,
    expected: &ExpectedCoreUtilities,
    caps: &Caps,
) -> Result<(ExAnteReport, Vec<AuditResult>)> {
    let report = ex_ante_report(scenario, kind, expected, caps)?;
    let universe = MisreportUniverse::standard(scenario);
    let alg = welfare::select_welfare_alg(scenario);
    let dsic = audit_dsic(
        scenario,
        &universe,
        &|r: &Realization| mechanism_outcome(kind, r, expected, alg, caps),
        caps,
    )?;

    let mut results = vec![audit_efficiency(&report), dsic];
    results.extend(audit_ex_ante(&report, expected.epsilon()));
    let core = AuditResult::new(
        AuditProperty::Core,
        -report.core_slack,
        tol::BALANCE,
        if -report.core_slack > tol::BALANCE {
            Some(AuditWitness::Coalition {
                buyers: report.core_witness.buyers,
                sellers: report.core_witness.sellers,
            })
        } else {
            None
        },
    );
    results.push(core);
    Ok((report, results))
}

/// Deliberately broken pricing for negative controls: efficient allocation,
/// but each served buyer pays their reported value and each seller is paid
/// their reported cost. Shading a value below truth keeps the allocation and
/// lowers the price, so this mechanism must fail the truthfulness audit.
pub fn first_price_outcome(r: &Realization, caps: &Caps) -> Result<MechanismOutcome> {
    let (a, _) = welfare::optimal_assignment_exhaustive(r, caps)?;
    let n = r.n();
    let m = r.m();
    let prices: Vec<f64> =
        (0..n).map(|i| a.seller_of(i).map_or(0.0, |j| r.value(i, j))).collect();
    let wages: Vec<f64> = (0..m).map(|j| r.sellers[j].cost.eval(a.sets[j])).collect();
    let buyer_utilities = vec![0.0; n];
    let seller_utilities = vec![0.0; m];
    Ok(MechanismOutcome {
        allocation: crate::mechanisms::Allocation::Deterministic(a),
        prices,
        wages,
        buyer_utilities,
        seller_utilities,
    })
}
