//! Computational budgets and tolerances shared by every counting routine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Effort {
    /// Absolute tolerance for floating comparisons.
    pub abs_tol: f64,
    /// Slack used when asserting inequalities between certified quantities.
    pub eta: f64,
    /// Hard cap on lattice points in a candidate grid.
    pub grid_budget: u64,
    /// Preferred grid inflation radius relative to the covering radius.
    pub cell_frac: f64,
    /// Soft cap on lattice points; the inflation radius grows to respect it.
    pub grid_soft_points: u64,
    /// Candidate count up to which packings are solved as exact maximum
    /// independent sets.
    pub exact_cutoff: usize,
    /// Node limit for every branch-and-bound search.
    pub node_limit: u64,
    /// Polytope pairs whose volume bound is at most this count are also
    /// certified by exact region subtraction.
    pub exact_polytope_max_count: u64,
    /// Cutting rounds for the exact polytope certificate.
    pub exact_polytope_rounds: usize,
    /// Relative bisection tolerance on entropy numbers.
    pub bisect_tol: f64,
    pub bisect_max_steps: usize,
    /// Restarts for the convex-separation greedy search.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for Effort {
    fn default() -> Self {
        Effort {
            abs_tol: 1e-9,
            eta: 1e-6,
            grid_budget: 2_000_000,
            cell_frac: 0.04,
            grid_soft_points: 120_000,
            exact_cutoff: 400,
            node_limit: 200_000,
            exact_polytope_max_count: 64,
            exact_polytope_rounds: 40,
            bisect_tol: 0.05,
            bisect_max_steps: 24,
            restarts: 16,
            seed: 0,
        }
    }
}

impl Effort {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("abs_tol", self.abs_tol),
            ("eta", self.eta),
            ("cell_frac", self.cell_frac),
            ("bisect_tol", self.bisect_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Precondition(format!("{name} must be positive, got {v}")));
            }
        }
        if self.cell_frac >= 0.5 {
            return Err(Error::Precondition("cell_frac must be below 0.5".into()));
        }
        if self.grid_budget == 0 || self.grid_soft_points == 0 {
            return Err(Error::Precondition("grid budgets must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Precondition("restarts must be at least 1".into()));
        }
        Ok(())
    }
}
