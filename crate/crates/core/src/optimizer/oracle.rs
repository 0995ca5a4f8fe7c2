//! Exhaustive grid search over the selection box, the ground-truth solver
//! for small instances. Independent of the GA: no penalty, no randomness,
//! plain enumeration. Deliberately kept that way so the two routes to an
//! optimum stay comparable evidence rather than one code path.

use super::{
    constraint_violation, finish_solution, is_feasible, objective_value, quality_value,
    OptimizerError, SelectionVector, Solution, Solver,
};
use crate::model::PortfolioInputs;

/// Cap on the dimension; steps^N points above this are not worth waiting for.
const MAX_ORACLE_N: usize = 8;

/// Evaluates every point of the uniform grid {0, 1/(s-1), ..., 1}^N and
/// returns the feasible point with the lowest objective. When no grid point
/// is feasible, returns the point with the smallest constraint violation,
/// ties broken by lower objective and then by lexicographically smaller
/// alpha (the enumeration order).
pub fn grid_oracle_solve(
    inputs: &PortfolioInputs,
    steps_per_axis: usize,
) -> Result<Solution, OptimizerError> {
    let n = inputs.n();
    if n > MAX_ORACLE_N {
        return Err(OptimizerError::OracleTooLarge {
            n,
            max: MAX_ORACLE_N,
        });
    }
    if steps_per_axis < 2 {
        return Err(OptimizerError::OracleTooFewSteps(steps_per_axis));
    }

    let levels: Vec<f64> = (0..steps_per_axis)
        .map(|k| k as f64 / (steps_per_axis - 1) as f64)
        .collect();

    // Odometer enumeration with the last axis fastest: lexicographic order
    // over alpha, so "first strictly better wins" realizes the tie rule.
    let mut idx = vec![0usize; n];
    let mut alpha = vec![0.0f64; n];
    let mut best_feasible: Option<(f64, Vec<f64>)> = None;
    let mut best_infeasible: Option<(f64, f64, Vec<f64>)> = None;

    loop {
        for (a, &i) in alpha.iter_mut().zip(idx.iter()) {
            *a = levels[i];
        }
        let s = SelectionVector::new(alpha.clone());
        let quality = quality_value(inputs, &s);
        let budget: f64 = alpha.iter().sum();
        if is_feasible(inputs, quality, budget, &alpha) {
            let obj = objective_value(inputs, &s);
            if best_feasible.as_ref().is_none_or(|(b, _)| obj < *b) {
                best_feasible = Some((obj, alpha.clone()));
            }
        } else if best_feasible.is_none() {
            let viol = constraint_violation(inputs, &s);
            let obj = objective_value(inputs, &s);
            let better = match &best_infeasible {
                None => true,
                Some((bv, bo, _)) => viol < *bv || (viol == *bv && obj < *bo),
            };
            if better {
                best_infeasible = Some((viol, obj, alpha.clone()));
            }
        }

        // Advance the odometer; done when the most significant axis wraps.
        let mut axis = n;
        loop {
            if axis == 0 {
                let winner = match best_feasible {
                    Some((_, a)) => a,
                    None => best_infeasible.expect("grid is never empty").2,
                };
                return Ok(finish_solution(inputs, winner, 0, Solver::GridOracle));
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < steps_per_axis {
                break;
            }
            idx[axis] = 0;
        }
    }
}
