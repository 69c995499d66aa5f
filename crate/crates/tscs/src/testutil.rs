//! Shared instance builders for unit tests.

use rand::rngs::StdRng;
use rand::Rng;

use crate::cost::{self, CostFunction};
use crate::market::{BuyerType, CostClass, MarketScenario, Realization, SellerType, TypePrior};
use crate::sets;

pub(crate) fn det_realization(
    values: Vec<Vec<f64>>,
    sellers: Vec<(CostFunction, usize)>,
) -> Realization {
    Realization {
        buyers: values.into_iter().map(|v| BuyerType { values: v }).collect(),
        sellers: sellers
            .into_iter()
            .map(|(cost, capacity)| SellerType { cost, capacity })
            .collect(),
        probability: 1.0,
    }
}

/// One buyer valuing one free seller at 1.
pub(crate) fn unit_trade() -> Realization {
    det_realization(vec![vec![1.0]], vec![(CostFunction::tabular(vec![0.0, 0.0]), 1)])
}

/// Two buyers (0.5, 0.4) and one submodular seller with table (0, .2, .2, .3);
/// optimum serves both for welfare 0.6.
pub(crate) fn two_buyers_one_seller() -> Realization {
    det_realization(
        vec![vec![0.5], vec![0.4]],
        vec![(CostFunction::tabular(vec![0.0, 0.2, 0.2, 0.3]), 2)],
    )
}

/// Two buyers, two additive sellers; the unique optimum matches buyer 0 to
/// seller 0 and buyer 1 to seller 1 for welfare 0.7.
pub(crate) fn two_by_two_additive() -> Realization {
    det_realization(
        vec![vec![0.5, 0.3], vec![0.4, 0.6]],
        vec![
            (CostFunction::additive(vec![0.2, 0.3]), 2),
            (CostFunction::additive(vec![0.3, 0.2]), 2),
        ],
    )
}

pub(crate) fn det_unit_trade_scenario() -> MarketScenario {
    MarketScenario {
        buyer_priors: vec![TypePrior::deterministic(BuyerType { values: vec![1.0] })],
        seller_priors: vec![TypePrior::deterministic(SellerType {
            cost: CostFunction::tabular(vec![0.0, 0.0]),
            capacity: 1,
        })],
        declared_class: vec![CostClass::Submodular],
    }
}

pub(crate) fn two_buyers_one_seller_scenario() -> MarketScenario {
    MarketScenario {
        buyer_priors: vec![
            TypePrior::deterministic(BuyerType { values: vec![0.5] }),
            TypePrior::deterministic(BuyerType { values: vec![0.4] }),
        ],
        seller_priors: vec![TypePrior::deterministic(SellerType {
            cost: CostFunction::tabular(vec![0.0, 0.2, 0.2, 0.3]),
            capacity: 2,
        })],
        declared_class: vec![CostClass::Submodular],
    }
}

/// Deterministic buyers (0.5, 0.4); the seller is the cheap table above with
/// probability one half and an expensive near-additive table otherwise.
/// Realized optima are 0.6 and 0.1, so expected utilities total 0.35.
pub(crate) fn stochastic_seller_scenario() -> MarketScenario {
    let mut s = two_buyers_one_seller_scenario();
    s.seller_priors[0] = TypePrior {
        support: vec![
            (
                0.5,
                SellerType {
                    cost: CostFunction::tabular(vec![0.0, 0.2, 0.2, 0.3]),
                    capacity: 2,
                },
            ),
            (
                0.5,
                SellerType {
                    cost: CostFunction::tabular(vec![0.0, 0.4, 0.45, 0.85]),
                    capacity: 2,
                },
            ),
        ],
    };
    s
}

pub(crate) fn two_by_two_additive_scenario() -> MarketScenario {
    MarketScenario {
        buyer_priors: vec![
            TypePrior::deterministic(BuyerType { values: vec![0.5, 0.3] }),
            TypePrior::deterministic(BuyerType { values: vec![0.4, 0.6] }),
        ],
        seller_priors: vec![
            TypePrior::deterministic(SellerType {
                cost: CostFunction::additive(vec![0.2, 0.3]),
                capacity: 2,
            }),
            TypePrior::deterministic(SellerType {
                cost: CostFunction::additive(vec![0.3, 0.2]),
                capacity: 2,
            }),
        ],
        declared_class: vec![CostClass::Additive, CostClass::Additive],
    }
}

/// Random instance with mixed additive/tabular sellers and random capacities.
pub(crate) fn random_realization(rng: &mut StdRng, n: usize, m: usize) -> Realization {
    let buyers = (0..n)
        .map(|_| BuyerType { values: (0..m).map(|_| rng.gen()).collect() })
        .collect();
    let sellers = (0..m)
        .map(|_| {
            let cost = if rng.gen_bool(0.5) {
                CostFunction::additive((0..n).map(|_| rng.gen()).collect())
            } else {
                CostFunction::tabular(
                    std::iter::once(0.0)
                        .chain((1..(1usize << n)).map(|_| rng.gen::<f64>()))
                        .collect(),
                )
            };
            SellerType { cost, capacity: rng.gen_range(1..=n) }
        })
        .collect();
    Realization { buyers, sellers, probability: 1.0 }
}

/// Weighted-coverage cost table: submodular by construction.
pub(crate) fn random_coverage_cost(rng: &mut StdRng, n: usize) -> CostFunction {
    let universe = 2 * n;
    let weights: Vec<f64> =
        (0..universe).map(|_| rng.gen_range(0.0..1.6 / universe as f64)).collect();
    let covers: Vec<u64> = (0..n).map(|_| rng.gen_range(0..(1u64 << universe))).collect();
    let table: Vec<f64> = (0..(1usize << n))
        .map(|s| {
            let mut covered = 0u64;
            for i in sets::members(s as u32) {
                covered |= covers[i];
            }
            (0..universe).filter(|&u| covered & (1 << u) != 0).map(|u| weights[u]).sum()
        })
        .collect();
    let cost = CostFunction::tabular(table);
    debug_assert!(cost::is_submodular(&cost));
    cost
}

/// Single uncapacitated seller with a random coverage cost.
pub(crate) fn random_coverage_realization(rng: &mut StdRng, n: usize) -> Realization {
    let cost = random_coverage_cost(rng, n);
    Realization {
        buyers: (0..n).map(|_| BuyerType { values: vec![rng.gen()] }).collect(),
        sellers: vec![SellerType { cost, capacity: n }],
        probability: 1.0,
    }
}

/// Multi-seller instance where every seller has a coverage (submodular) cost.
pub(crate) fn random_submodular_realization(rng: &mut StdRng, n: usize, m: usize) -> Realization {
    let sellers = (0..m)
        .map(|_| SellerType { cost: random_coverage_cost(rng, n), capacity: n })
        .collect();
    Realization {
        buyers: (0..n)
            .map(|_| BuyerType { values: (0..m).map(|_| rng.gen()).collect() })
            .collect(),
        sellers,
        probability: 1.0,
    }
}

/// Capacitated symmetric instance whose LP optimum is fractional: singleton
/// cost 1.0, pair cost 1.1, triple cost 1.2 (submodular), capacity 2, all
/// values 1.0. The LP earns 1.35 on half-weighted pairs; the best integral
/// assignment earns 0.9, so the decomposition ratio is 1.5.
pub(crate) fn capacitated_gap_realization() -> Realization {
    let table = vec![0.0, 1.0, 1.0, 1.1, 1.0, 1.1, 1.1, 1.2];
    det_realization(
        vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]],
        vec![
            (CostFunction::tabular(table.clone()), 2),
            (CostFunction::tabular(table), 2),
        ],
    )
}
