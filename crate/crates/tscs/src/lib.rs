//! Two-sided cost-sharing markets: sellers incur subset-dependent costs to
//! serve buyers, buyers hold per-seller values, and an intermediary assigns
//! buyers to sellers while charging prices and paying wages.
//!
//! The crate implements three mechanisms over discrete type priors — exact
//! VCG-style pricing from expected core utilities, a sampled polynomial-time
//! variant with shifted averages, and a lottery mechanism that scales the
//! fractional assignment optimum by its decomposition ratio — together with
//! the welfare and core LP machinery beneath them and a brute-force audit
//! harness that verifies efficiency, truthfulness, budget balance, individual
//! rationality, and (approximate) core membership on desk-scale instances.
//!
//! Everything enumerates exhaustively and deterministically: ground sets are
//! capped at 24 buyers, LP pivoting follows Bland's rule on a fixed ordering,
//! set-function ties break toward the smallest bitmask, and all sampling is
//! seeded.

pub mod audit;
pub mod caps;
pub mod core_lp;
pub mod cost;
pub mod error;
pub mod gen;
pub mod lottery;
pub mod market;
pub mod mechanisms;
pub mod scenario_io;
pub mod sets;
mod simplex;
#[cfg(test)]
mod testutil;
pub mod tol;
pub mod welfare;

pub use caps::Caps;
pub use error::{Error, Result};
