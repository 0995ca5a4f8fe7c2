//! Independent recheck of claimed-feasible solutions.
//!
//! Every arithmetic step here is written from the constraint definitions
//! directly, without calling into the objective/violation helpers the
//! solvers use. A bug in the penalty machinery therefore cannot hide
//! itself: a solution that only looks feasible through the solver's own
//! lens fails this audit.

use super::Solution;
use crate::model::PortfolioInputs;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("selection length {actual} does not match instance size {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("alpha[{index}] = {value} is outside [0, 1]")]
    BoundViolated { index: usize, value: f64 },
    #[error("quality {quality} is below theta {theta} (tolerance {tolerance})")]
    QualityViolated {
        quality: f64,
        theta: f64,
        tolerance: f64,
    },
    #[error("budget {budget} exceeds psi {psi} (tolerance {tolerance})")]
    BudgetViolated {
        budget: f64,
        psi: f64,
        tolerance: f64,
    },
    #[error("stored objective {stored} disagrees with recomputed {recomputed}")]
    ObjectiveMismatch { stored: f64, recomputed: f64 },
    #[error("solution is marked feasible but fails recheck: {0}")]
    FeasibilityLied(Box<VerifyError>),
}

/// Recomputes the constraint values and the objective of a solution from
/// scratch and checks them against the solution's claims.
///
/// For a solution marked feasible, all constraints must hold within the
/// solver tolerances and the stored objective must match recomputation to
/// 1e-9 relative. For a best-effort (infeasible) solution only the
/// objective bookkeeping is checked.
pub fn verify_solution(inputs: &PortfolioInputs, sol: &Solution) -> Result<(), VerifyError> {
    let n = inputs.expected_res.len();
    let alpha = &sol.selection.alpha;
    if alpha.len() != n {
        return Err(VerifyError::DimensionMismatch {
            expected: n,
            actual: alpha.len(),
        });
    }

    // Objective, quality, and budget recomputed with plain loops.
    let mut objective = 0.0;
    for i in 0..n {
        for j in 0..n {
            objective += alpha[i] * alpha[j] * inputs.cov[(i, j)];
        }
    }
    let mut quality = 0.0;
    let mut budget = 0.0;
    for (&a, &er) in alpha.iter().zip(inputs.expected_res.iter()) {
        quality += a * er;
        budget += a;
    }

    let scale = objective.abs().max(1.0);
    if (objective - sol.objective).abs() > 1e-9 * scale {
        return Err(VerifyError::ObjectiveMismatch {
            stored: sol.objective,
            recomputed: objective,
        });
    }

    if sol.feasible {
        let check = (|| -> Result<(), VerifyError> {
            for (index, &value) in alpha.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(VerifyError::BoundViolated { index, value });
                }
            }
            let q_tol = if inputs.theta == 0.0 {
                1e-9
            } else {
                1e-6 * inputs.theta
            };
            if quality < inputs.theta - q_tol {
                return Err(VerifyError::QualityViolated {
                    quality,
                    theta: inputs.theta,
                    tolerance: q_tol,
                });
            }
            let b_tol = 1e-9;
            if budget > inputs.psi + b_tol {
                return Err(VerifyError::BudgetViolated {
                    budget,
                    psi: inputs.psi,
                    tolerance: b_tol,
                });
            }
            Ok(())
        })();
        if let Err(e) = check {
            return Err(VerifyError::FeasibilityLied(Box::new(e)));
        }
    }
    Ok(())
}
