//! Canonical data model: scenarios (agents with discrete type priors),
//! realizations (one concrete draw of every type), and assignments of buyers
//! to sellers.
//!
//! Priors are explicit finite lists and the joint distribution is their
//! product; exact expectations are taken by full enumeration. All types are
//! immutable after construction and all operations here are pure.

use crate::caps::Caps;
use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::sets::{self, BuyerSet, MAX_GROUND_SET};
use crate::tol;

/// A buyer's private type: the value `values[j]` in [0,1] for being served by
/// seller `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuyerType {
    pub values: Vec<f64>,
}

/// A seller's private type: the cost function over buyer subsets plus a
/// capacity on how many buyers the seller can accept.
#[derive(Debug, Clone, PartialEq)]
pub struct SellerType {
    pub cost: CostFunction,
    pub capacity: usize,
}

/// Finite discrete prior over agent types.
#[derive(Debug, Clone, PartialEq)]
pub struct TypePrior<T> {
    /// `(probability, type)` pairs; probabilities lie in (0,1] and sum to one.
    pub support: Vec<(f64, T)>,
}

impl<T> TypePrior<T> {
    pub fn deterministic(t: T) -> Self {
        TypePrior { support: vec![(1.0, t)] }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    fn validate_probabilities(&self, context: &str) -> Result<()> {
        if self.support.is_empty() {
            return Err(Error::InvalidScenario {
                context: context.into(),
                reason: "empty prior support".into(),
            });
        }
        let mut sum = 0.0;
        for (p, _) in &self.support {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(Error::InvalidScenario {
                    context: context.into(),
                    reason: format!("support probability {p} outside (0,1]"),
                });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > tol::PRIOR_SUM {
            return Err(Error::InvalidScenario {
                context: context.into(),
                reason: format!("support probabilities sum to {sum}, not 1"),
            });
        }
        Ok(())
    }
}

/// Declared cost class of a seller. The declaration selects algorithms and is
/// trusted for dispatch; the oracles can falsify it after the fact
/// (submodularity check, LP integrality failure, grid substitutes check).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostClass {
    General,
    Submodular,
    Ngs,
    Additive,
}

impl CostClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CostClass::General => "general",
            CostClass::Submodular => "submodular",
            CostClass::Ngs => "ngs",
            CostClass::Additive => "additive",
        }
    }
}

/// The mechanism's common-knowledge input: independent discrete priors for
/// every buyer and seller plus per-seller declared cost classes.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketScenario {
    pub buyer_priors: Vec<TypePrior<BuyerType>>,
    pub seller_priors: Vec<TypePrior<SellerType>>,
    pub declared_class: Vec<CostClass>,
}

impl MarketScenario {
    pub fn n(&self) -> usize {
        self.buyer_priors.len()
    }

    pub fn m(&self) -> usize {
        self.seller_priors.len()
    }

    /// Product support size of the joint prior.
    pub fn joint_support_size(&self) -> u128 {
        let mut size: u128 = 1;
        for p in &self.buyer_priors {
            size = size.saturating_mul(p.len() as u128);
        }
        for p in &self.seller_priors {
            size = size.saturating_mul(p.len() as u128);
        }
        size
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let m = self.m();
        if n == 0 || m == 0 {
            return Err(Error::InvalidScenario {
                context: "scenario".into(),
                reason: format!("need at least one buyer and one seller, got n={n}, m={m}"),
            });
        }
        if n > MAX_GROUND_SET {
            return Err(Error::GroundSetTooLarge { n, max: MAX_GROUND_SET });
        }
        if self.declared_class.len() != m {
            return Err(Error::InvalidScenario {
                context: "declared_class".into(),
                reason: format!("expected {m} entries, got {}", self.declared_class.len()),
            });
        }
        for (i, prior) in self.buyer_priors.iter().enumerate() {
            let ctx = format!("buyer {i}");
            prior.validate_probabilities(&ctx)?;
            for (_, t) in &prior.support {
                if t.values.len() != m {
                    return Err(Error::InvalidScenario {
                        context: ctx.clone(),
                        reason: format!("value vector length {} != m={m}", t.values.len()),
                    });
                }
                for (j, v) in t.values.iter().enumerate() {
                    if !(v.is_finite() && (0.0..=1.0).contains(v)) {
                        return Err(Error::InvalidScenario {
                            context: ctx.clone(),
                            reason: format!("value {v} for seller {j} outside [0,1]"),
                        });
                    }
                }
            }
        }
        for (j, prior) in self.seller_priors.iter().enumerate() {
            let ctx = format!("seller {j}");
            prior.validate_probabilities(&ctx)?;
            for (_, t) in &prior.support {
                t.cost.validate()?;
                if t.cost.ground_set_size() != n {
                    return Err(Error::InvalidScenario {
                        context: ctx.clone(),
                        reason: format!(
                            "cost ground set {} != n={n}",
                            t.cost.ground_set_size()
                        ),
                    });
                }
                if t.capacity == 0 || t.capacity > n {
                    return Err(Error::InvalidScenario {
                        context: ctx.clone(),
                        reason: format!("capacity {} outside 1..={n}", t.capacity),
                    });
                }
            }
        }
        Ok(())
    }

    /// The realization picking support entry `buyer_idx[i]` for each buyer and
    /// `seller_idx[j]` for each seller; its probability is the product of the
    /// chosen entries' probabilities.
    pub fn realization(&self, buyer_idx: &[usize], seller_idx: &[usize]) -> Realization {
        debug_assert_eq!(buyer_idx.len(), self.n());
        debug_assert_eq!(seller_idx.len(), self.m());
        let mut q = 1.0;
        let buyers = buyer_idx
            .iter()
            .zip(&self.buyer_priors)
            .map(|(&k, prior)| {
                q *= prior.support[k].0;
                prior.support[k].1.clone()
            })
            .collect();
        let sellers = seller_idx
            .iter()
            .zip(&self.seller_priors)
            .map(|(&k, prior)| {
                q *= prior.support[k].0;
                prior.support[k].1.clone()
            })
            .collect();
        Realization { buyers, sellers, probability: q }
    }
}

/// One concrete draw of all agent types. `probability` is the product prior
/// mass when produced by enumeration or sampling; reported profiles built for
/// counterfactual pricing carry probability 1 and the mechanisms ignore it.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub buyers: Vec<BuyerType>,
    pub sellers: Vec<SellerType>,
    pub probability: f64,
}

impl Realization {
    pub fn n(&self) -> usize {
        self.buyers.len()
    }

    pub fn m(&self) -> usize {
        self.sellers.len()
    }

    pub fn value(&self, buyer: usize, seller: usize) -> f64 {
        self.buyers[buyer].values[seller]
    }

    /// Copy with buyer `i`'s type replaced by a (possibly off-support) report.
    pub fn with_buyer(&self, i: usize, t: BuyerType) -> Realization {
        let mut r = self.clone();
        r.buyers[i] = t;
        r.probability = 1.0;
        r
    }

    /// Copy with seller `j`'s type replaced by a (possibly off-support) report.
    pub fn with_seller(&self, j: usize, t: SellerType) -> Realization {
        let mut r = self.clone();
        r.sellers[j] = t;
        r.probability = 1.0;
        r
    }
}

/// Partition of the served buyers into per-seller sets; buyers in no set are
/// unserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub sets: Vec<BuyerSet>,
}

impl Assignment {
    pub fn empty(m: usize) -> Self {
        Assignment { sets: vec![0; m] }
    }

    /// Decode a word of per-buyer digits: 0 is unserved, `j+1` is seller `j`.
    pub fn from_word(word: &[usize], m: usize) -> Self {
        let mut sets = vec![0u32; m];
        for (i, &d) in word.iter().enumerate() {
            if d > 0 {
                sets[d - 1] |= 1 << i;
            }
        }
        Assignment { sets }
    }

    /// Per-buyer digits: 0 is unserved, `j+1` is seller `j`.
    pub fn word(&self, n: usize) -> Vec<usize> {
        let mut w = vec![0; n];
        for (j, &s) in self.sets.iter().enumerate() {
            for i in sets::members(s) {
                w[i] = j + 1;
            }
        }
        w
    }

    pub fn seller_of(&self, buyer: usize) -> Option<usize> {
        self.sets.iter().position(|&s| sets::contains(s, buyer))
    }

    pub fn served(&self) -> BuyerSet {
        self.sets.iter().fold(0, |acc, &s| acc | s)
    }

    fn validate(&self, r: &Realization) -> Result<()> {
        if self.sets.len() != r.m() {
            return Err(Error::InvalidAssignment {
                reason: format!("{} seller sets for m={}", self.sets.len(), r.m()),
            });
        }
        let ground = sets::full_set(r.n());
        let mut seen: BuyerSet = 0;
        for (j, &s) in self.sets.iter().enumerate() {
            if s & !ground != 0 {
                return Err(Error::InvalidAssignment {
                    reason: format!("seller {j} set {s:b} leaves the ground set"),
                });
            }
            if s & seen != 0 {
                return Err(Error::InvalidAssignment {
                    reason: format!("seller {j} set overlaps another seller's"),
                });
            }
            seen |= s;
            let k = r.sellers[j].capacity;
            if sets::size(s) > k {
                return Err(Error::InvalidAssignment {
                    reason: format!("seller {j} serves {} buyers, capacity {k}", sets::size(s)),
                });
            }
        }
        Ok(())
    }
}

/// Every realization of the joint prior, ordered lexicographically by agent
/// index (buyers then sellers) and support index, the last agent varying
/// fastest. Probabilities multiply across agents and sum to one.
pub fn enumerate_realizations(scenario: &MarketScenario, caps: &Caps) -> Result<Vec<Realization>> {
    let size = scenario.joint_support_size();
    if size > caps.max_realizations as u128 {
        return Err(Error::EnumerationTooLarge { size, cap: caps.max_realizations });
    }
    let radices: Vec<usize> = scenario
        .buyer_priors
        .iter()
        .map(TypePrior::len)
        .chain(scenario.seller_priors.iter().map(TypePrior::len))
        .collect();
    let n = scenario.n();
    let mut out = Vec::with_capacity(size as usize);
    let mut idx = vec![0usize; radices.len()];
    loop {
        out.push(scenario.realization(&idx[..n], &idx[n..]));
        let mut pos = radices.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < radices[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Realized welfare of an assignment: total value of served buyers minus total
/// seller cost. Fails if the assignment is infeasible for `r`.
pub fn realization_welfare(r: &Realization, a: &Assignment) -> Result<f64> {
    a.validate(r)?;
    let mut w = 0.0;
    for (j, &s) in a.sets.iter().enumerate() {
        w += sets::members(s).map(|i| r.value(i, j)).sum::<f64>() - r.sellers[j].cost.eval(s);
    }
    Ok(w)
}
