//! Numeric tolerances used across the crate.
//!
//! Buyer values live in [0,1] and costs are small nonnegative reals, so f64
//! leaves plenty of headroom. The looser constants absorb accumulation through
//! simplex pivots and probability-weighted sums.

/// Inequality slack for set-function and dual-feasibility checks.
pub const FEAS: f64 = 1e-9;
/// Simplex pivot threshold (reduced costs, ratio denominators, phase-1 residual).
pub const PIVOT: f64 = 1e-9;
/// Welfare/objective comparisons routed through the LP.
pub const OBJ: f64 = 1e-9;
/// An LP weight within this of 0 or 1 counts as integral.
pub const INTEGRALITY: f64 = 1e-6;
/// Utility-sum, budget-balance, and core-slack checks over expectations.
pub const BALANCE: f64 = 1e-6;
/// Largest tolerated truthfulness violation.
pub const DSIC: f64 = 1e-7;
/// Prior probabilities must sum to one within this.
pub const PRIOR_SUM: f64 = 1e-12;
/// Enumerated realization probabilities must sum to one within this.
pub const ENUM_SUM: f64 = 1e-9;
/// Lottery weights must sum to one within this.
pub const LOTTERY_SUM: f64 = 1e-9;
/// Lottery marginals must match the scaled fractional solution within this.
pub const MARGINAL: f64 = 1e-6;
