//! Constrained selection optimization.
//!
//! The problem: minimize the selection's resolution-covariance quadratic
//! form alpha' C alpha subject to a quality floor (sum of alpha_i times
//! expected resolution at least theta), a budget cap (sum of alpha_i at most
//! psi), and box bounds alpha_i in [0, 1].
//!
//! Solvers, in decreasing order of authority for experiments:
//! - [`ga::ga_solve`]: the production solver, a penalized real-valued GA.
//! - [`oracle::grid_oracle_solve`]: exhaustive grid search, the ground
//!   truth for small N.
//! - [`baseline_top_expected`] / [`uniform_random_baseline`]: comparison
//!   strategies for the simulation harness.
//!
//! [`verify::verify_solution`] rechecks any claimed-feasible solution
//! through arithmetic written independently of the penalty machinery.

pub mod ga;
pub mod oracle;
pub mod verify;

pub use ga::{ga_solve, GaConfig};
pub use oracle::grid_oracle_solve;
pub use verify::{verify_solution, VerifyError};

use crate::model::PortfolioInputs;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("selection vector has {actual} entries but the instance has {expected} cameras")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("grid oracle supports at most {max} cameras, got {n}")]
    OracleTooLarge { n: usize, max: usize },
    #[error("grid oracle needs at least 2 steps per axis, got {0}")]
    OracleTooFewSteps(usize),
}

/// Relative quality-feasibility tolerance; absolute fallback when theta = 0.
const EPS_QUALITY_REL: f64 = 1e-6;
const EPS_QUALITY_ABS: f64 = 1e-9;
/// Absolute budget-feasibility tolerance.
const EPS_BUDGET: f64 = 1e-9;

/// The decision variable: one selection weight per camera, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionVector {
    pub alpha: Vec<f64>,
}

impl SelectionVector {
    pub fn new(alpha: Vec<f64>) -> Self {
        Self { alpha }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Which algorithm produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Ga,
    GridOracle,
    BaselineTopExpected,
    UniformRandom,
}

/// A solved selection with its audited constraint values.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub selection: SelectionVector,
    /// alpha' C alpha.
    pub objective: f64,
    /// Sum of alpha_i times expected resolution.
    pub quality: f64,
    /// Sum of alpha_i.
    pub budget: f64,
    pub feasible: bool,
    pub generations_run: usize,
    pub solver: Solver,
}

fn check_dims(inputs: &PortfolioInputs, s: &SelectionVector) -> Result<(), OptimizerError> {
    if s.len() != inputs.n() {
        return Err(OptimizerError::DimensionMismatch {
            expected: inputs.n(),
            actual: s.len(),
        });
    }
    Ok(())
}

/// Objective of the minimization: alpha' C alpha. Nonnegative for PSD C.
pub fn objective_value(inputs: &PortfolioInputs, s: &SelectionVector) -> f64 {
    debug_assert!(check_dims(inputs, s).is_ok());
    let n = inputs.n();
    let mut total = 0.0;
    for i in 0..n {
        let ai = s.alpha[i];
        if ai == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += s.alpha[j] * inputs.cov[(i, j)];
        }
        total += ai * row;
    }
    total
}

/// Left-hand side of the quality constraint: expected total delivered
/// resolution of the selection.
pub fn quality_value(inputs: &PortfolioInputs, s: &SelectionVector) -> f64 {
    debug_assert!(check_dims(inputs, s).is_ok());
    s.alpha
        .iter()
        .zip(inputs.expected_res.iter())
        .map(|(a, e)| a * e)
        .sum()
}

/// Total constraint violation: quality shortfall plus budget excess plus
/// box-bound excursions. Zero exactly on the feasible set.
pub fn constraint_violation(inputs: &PortfolioInputs, s: &SelectionVector) -> f64 {
    debug_assert!(check_dims(inputs, s).is_ok());
    let quality = quality_value(inputs, s);
    let budget: f64 = s.alpha.iter().sum();
    let mut v = (inputs.theta - quality).max(0.0) + (budget - inputs.psi).max(0.0);
    for &a in &s.alpha {
        v += (-a).max(0.0) + (a - 1.0).max(0.0);
    }
    v
}

/// Quality-floor tolerance for feasibility classification.
pub fn quality_epsilon(theta: f64) -> f64 {
    if theta == 0.0 {
        EPS_QUALITY_ABS
    } else {
        EPS_QUALITY_REL * theta
    }
}

/// Budget tolerance for feasibility classification.
pub fn budget_epsilon() -> f64 {
    EPS_BUDGET
}

/// Float-safe feasibility test used by every solver.
pub fn is_feasible(inputs: &PortfolioInputs, quality: f64, budget: f64, alpha: &[f64]) -> bool {
    quality >= inputs.theta - quality_epsilon(inputs.theta)
        && budget <= inputs.psi + budget_epsilon()
        && alpha.iter().all(|&a| (0.0..=1.0).contains(&a))
}

/// Packages a selection into a [`Solution`] with audited values.
pub(crate) fn finish_solution(
    inputs: &PortfolioInputs,
    alpha: Vec<f64>,
    generations_run: usize,
    solver: Solver,
) -> Solution {
    let selection = SelectionVector::new(alpha);
    let objective = objective_value(inputs, &selection);
    let quality = quality_value(inputs, &selection);
    let budget = selection.alpha.iter().sum();
    let feasible = is_feasible(inputs, quality, budget, &selection.alpha);
    Solution {
        selection,
        objective,
        quality,
        budget,
        feasible,
        generations_run,
        solver,
    }
}

/// Indices sorted by expected resolution, highest first, ties by lower index.
pub(crate) fn rank_by_expected(inputs: &PortfolioInputs) -> Vec<usize> {
    let mut order: Vec<usize> = (0..inputs.n()).collect();
    order.sort_by(|&a, &b| {
        inputs.expected_res[b]
            .partial_cmp(&inputs.expected_res[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    order
}

/// Selects the floor(psi) cameras with the highest expected resolution.
///
/// This is the conventional strategy the portfolio method is compared
/// against: grab the most promising cameras and ignore how their
/// disruptions move together.
pub fn baseline_top_expected(inputs: &PortfolioInputs) -> Solution {
    let take = (inputs.psi.floor() as usize).min(inputs.n());
    let mut alpha = vec![0.0; inputs.n()];
    for &i in rank_by_expected(inputs).iter().take(take) {
        alpha[i] = 1.0;
    }
    finish_solution(inputs, alpha, 0, Solver::BaselineTopExpected)
}

/// Selects floor(psi) distinct cameras uniformly at random. Deterministic
/// per seed; the control strategy for experiments.
pub fn uniform_random_baseline(inputs: &PortfolioInputs, seed: u64) -> Solution {
    use rand::seq::SliceRandom;
    let n = inputs.n();
    let take = (inputs.psi.floor() as usize).min(n);
    let mut rng = crate::seeds::stream(seed, &[crate::seeds::ROLE_SOLVER]);
    let mut indices: Vec<usize> = (0..n).collect();
    let (chosen, _) = indices.partial_shuffle(&mut rng, take);
    let mut alpha = vec![0.0; n];
    for &i in chosen.iter() {
        alpha[i] = 1.0;
    }
    finish_solution(inputs, alpha, 0, Solver::UniformRandom)
}

impl Solver {
    /// Stable identifier mixed into per-strategy stream seeds.
    pub fn stream_id(self) -> u64 {
        match self {
            Solver::Ga => 1,
            Solver::GridOracle => 2,
            Solver::BaselineTopExpected => 3,
            Solver::UniformRandom => 4,
        }
    }
}
