/// Enumeration caps. Everything in this crate enumerates exhaustively;
/// these bounds turn runaway instances into explicit errors rather than
/// silent truncation.
#[derive(Debug, Clone)]
pub struct Caps {
    /// Product support size for realization enumeration.
    pub max_realizations: u64,
    /// `(m+1)^n` assignment words for the exhaustive welfare search.
    pub max_assignments: u64,
    /// Columns of the assignment LP.
    pub max_lp_columns: u64,
    /// Integral atoms enumerated for the lottery decomposition.
    pub max_lottery_atoms: u64,
    /// Mechanism evaluations in the truthfulness audit grid.
    pub max_deviation_runs: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_realizations: 1_000_000,
            max_assignments: 10_000_000,
            max_lp_columns: 2_000_000,
            max_lottery_atoms: 1_000_000,
            max_deviation_runs: 1_000_000,
        }
    }
}
