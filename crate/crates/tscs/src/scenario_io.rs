//! Scenario files: UTF-8 JSON with explicit priors.
//!
//! ```json
//! {
//!   "n": 2, "m": 1,
//!   "buyers":  [ [ {"p": 1.0, "values": [0.5]} ], ... ],
//!   "sellers": [ [ {"p": 0.5, "capacity": 2,
//!                   "cost": {"kind": "additive", "per_buyer": [0.1, 0.2]}},
//!                  {"p": 0.5,
//!                   "cost": {"kind": "tabular",
//!                            "table": {"0": 0.0, "1": 0.2, "2": 0.2, "3": 0.3}}} ] ],
//!   "declared_class": ["submodular"]
//! }
//! ```
//!
//! Tabular tables index subsets by decimal bitmask string and must list all
//! 2^n subsets; omitted entries are an error, never an implicit infinity.
//! Capacity defaults to n. Numbers round-trip bit-exactly (shortest-form
//! serialization).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::market::{BuyerType, CostClass, MarketScenario, SellerType, TypePrior};

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioDoc {
    n: usize,
    m: usize,
    buyers: Vec<Vec<BuyerTypeDoc>>,
    sellers: Vec<Vec<SellerTypeDoc>>,
    declared_class: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BuyerTypeDoc {
    p: f64,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SellerTypeDoc {
    p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity: Option<usize>,
    cost: CostDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
enum CostDoc {
    #[serde(rename = "additive")]
    Additive { per_buyer: Vec<f64> },
    #[serde(rename = "tabular")]
    Tabular { table: BTreeMap<String, f64> },
}

fn invalid(context: &str, reason: String) -> Error {
    Error::InvalidScenario { context: context.into(), reason }
}

fn class_from_str(s: &str) -> Result<CostClass> {
    match s {
        "general" => Ok(CostClass::General),
        "submodular" => Ok(CostClass::Submodular),
        "ngs" => Ok(CostClass::Ngs),
        "additive" => Ok(CostClass::Additive),
        other => Err(invalid("declared_class", format!("unknown class {other:?}"))),
    }
}

fn cost_from_doc(doc: CostDoc, n: usize, context: &str) -> Result<CostFunction> {
    match doc {
        CostDoc::Additive { per_buyer } => {
            if per_buyer.len() != n {
                return Err(invalid(
                    context,
                    format!("additive cost has {} entries, expected n={n}", per_buyer.len()),
                ));
            }
            Ok(CostFunction::Additive { per_buyer })
        }
        CostDoc::Tabular { table } => {
            let size = 1usize << n;
            let mut dense = vec![f64::NAN; size];
            for (key, value) in &table {
                let mask: usize = key.parse().map_err(|_| {
                    invalid(context, format!("table key {key:?} is not a subset bitmask"))
                })?;
                if mask >= size {
                    return Err(invalid(
                        context,
                        format!("table key {mask} outside the {size} subsets of n={n} buyers"),
                    ));
                }
                dense[mask] = *value;
            }
            if let Some(missing) = dense.iter().position(|v| v.is_nan()) {
                return Err(invalid(
                    context,
                    format!(
                        "tabular cost must specify all {size} subsets; mask {missing} is missing"
                    ),
                ));
            }
            Ok(CostFunction::Tabular { table: dense })
        }
    }
}

fn cost_to_doc(cost: &CostFunction) -> CostDoc {
    match cost {
        CostFunction::Additive { per_buyer } => CostDoc::Additive { per_buyer: per_buyer.clone() },
        CostFunction::Tabular { table } => CostDoc::Tabular {
            table: table
                .iter()
                .enumerate()
                .map(|(mask, v)| (mask.to_string(), *v))
                .collect(),
        },
    }
}

/// Parses and fully validates a scenario document.
pub fn read_scenario_str(text: &str) -> Result<MarketScenario> {
    let doc: ScenarioDoc = serde_json::from_str(text)
        .map_err(|e| invalid("json", format!("parse error: {e}")))?;
    if doc.buyers.len() != doc.n {
        return Err(invalid("buyers", format!("{} priors for n={}", doc.buyers.len(), doc.n)));
    }
    if doc.sellers.len() != doc.m {
        return Err(invalid("sellers", format!("{} priors for m={}", doc.sellers.len(), doc.m)));
    }
    let buyer_priors = doc
        .buyers
        .into_iter()
        .map(|support| TypePrior {
            support: support
                .into_iter()
                .map(|t| (t.p, BuyerType { values: t.values }))
                .collect(),
        })
        .collect();
    let mut seller_priors = Vec::with_capacity(doc.m);
    for (j, support) in doc.sellers.into_iter().enumerate() {
        let context = format!("seller {j}");
        let mut entries = Vec::with_capacity(support.len());
        for t in support {
            let cost = cost_from_doc(t.cost, doc.n, &context)?;
            entries.push((t.p, SellerType { cost, capacity: t.capacity.unwrap_or(doc.n) }));
        }
        seller_priors.push(TypePrior { support: entries });
    }
    let declared_class = doc
        .declared_class
        .iter()
        .map(|s| class_from_str(s))
        .collect::<Result<Vec<_>>>()?;
    let scenario = MarketScenario { buyer_priors, seller_priors, declared_class };
    scenario.validate()?;
    Ok(scenario)
}

/// Serializes a scenario; parsing the output reproduces the input exactly.
pub fn write_scenario_string(scenario: &MarketScenario) -> String {
    let doc = ScenarioDoc {
        n: scenario.n(),
        m: scenario.m(),
        buyers: scenario
            .buyer_priors
            .iter()
            .map(|prior| {
                prior
                    .support
                    .iter()
                    .map(|(p, t)| BuyerTypeDoc { p: *p, values: t.values.clone() })
                    .collect()
            })
            .collect(),
        sellers: scenario
            .seller_priors
            .iter()
            .map(|prior| {
                prior
                    .support
                    .iter()
                    .map(|(p, t)| SellerTypeDoc {
                        p: *p,
                        capacity: Some(t.capacity),
                        cost: cost_to_doc(&t.cost),
                    })
                    .collect()
            })
            .collect(),
        declared_class: scenario.declared_class.iter().map(|c| c.as_str().to_string()).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("scenario serialization cannot fail")
}

pub fn read_scenario_file(path: &Path) -> Result<MarketScenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid("file", format!("cannot read {}: {e}", path.display())))?;
    read_scenario_str(&text)
}

pub fn write_scenario_file(scenario: &MarketScenario, path: &Path) -> Result<()> {
    std::fs::write(path, write_scenario_string(scenario))
        .map_err(|e| invalid("file", format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::gen_random_scenario;
    use crate::market::CostClass;

    #[test]
    fn round_trip_is_identity() {
        for (k, class) in [
            CostClass::General,
            CostClass::Submodular,
            CostClass::Ngs,
            CostClass::Additive,
        ]
        .into_iter()
        .enumerate()
        {
            let s = gen_random_scenario(class, 3, 2, 2, 1000 + k as u64);
            let text = write_scenario_string(&s);
            let back = read_scenario_str(&text).unwrap();
            assert_eq!(s, back, "round trip must be exact for {class:?}");
        }
    }

    #[test]
    fn incomplete_tabular_cost_is_rejected() {
        let text = r#"{
            "n": 2, "m": 1,
            "buyers": [[{"p": 1.0, "values": [0.5]}], [{"p": 1.0, "values": [0.4]}]],
            "sellers": [[{"p": 1.0, "cost": {"kind": "tabular",
                          "table": {"0": 0.0, "1": 0.2, "3": 0.3}}}]],
            "declared_class": ["general"]
        }"#;
        match read_scenario_str(text) {
            Err(Error::InvalidScenario { reason, .. }) => {
                assert!(reason.contains("mask 2"), "got: {reason}");
            }
            other => panic!("expected invalid scenario, got {other:?}"),
        }
    }

    #[test]
    fn probability_sum_is_checked() {
        let text = r#"{
            "n": 1, "m": 1,
            "buyers": [[{"p": 0.6, "values": [0.5]}, {"p": 0.6, "values": [0.4]}]],
            "sellers": [[{"p": 1.0, "cost": {"kind": "additive", "per_buyer": [0.1]}}]],
            "declared_class": ["additive"]
        }"#;
        assert!(matches!(read_scenario_str(text), Err(Error::InvalidScenario { .. })));
    }

    #[test]
    fn capacity_defaults_to_n() {
        let text = r#"{
            "n": 2, "m": 1,
            "buyers": [[{"p": 1.0, "values": [0.5]}], [{"p": 1.0, "values": [0.4]}]],
            "sellers": [[{"p": 1.0, "cost": {"kind": "additive", "per_buyer": [0.1, 0.2]}}]],
            "declared_class": ["additive"]
        }"#;
        let s = read_scenario_str(text).unwrap();
        assert_eq!(s.seller_priors[0].support[0].1.capacity, 2);
    }

    #[test]
    fn out_of_range_value_is_rejected_with_context() {
        let text = r#"{
            "n": 1, "m": 1,
            "buyers": [[{"p": 1.0, "values": [1.5]}]],
            "sellers": [[{"p": 1.0, "cost": {"kind": "additive", "per_buyer": [0.1]}}]],
            "declared_class": ["additive"]
        }"#;
        match read_scenario_str(text) {
            Err(Error::InvalidScenario { context, .. }) => assert!(context.contains("buyer 0")),
            other => panic!("expected invalid scenario, got {other:?}"),
        }
    }
}
