//! Penalized real-valued genetic algorithm, the production solver.
//!
//! Chromosome: the selection vector itself, one gene per camera, each in
//! [0, 1]. Constraint handling is a single additive penalty,
//! fitness = objective + penalty_weight * constraint_violation, so the
//! solver's view of feasibility is auditable through
//! [`super::constraint_violation`]. Variation is uniform crossover plus
//! additive Gaussian mutation with genes clamped back into [0, 1] after
//! every operator, which keeps the box bounds satisfied by construction.

use super::{
    constraint_violation, finish_solution, objective_value, SelectionVector, Solution, Solver,
};
use crate::model::PortfolioInputs;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Genetic algorithm hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    /// Probability that a mating pair undergoes uniform crossover.
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Standard deviation of the additive Gaussian mutation.
    pub mutation_scale: f64,
    /// Individuals copied unchanged into the next generation.
    pub elite_count: usize,
    /// Weight on constraint_violation in the fitness. Scales with the
    /// problem magnitude so feasibility dominates the search.
    pub penalty_weight: f64,
    pub rng_seed: u64,
}

impl GaConfig {
    /// Defaults with the penalty weight sized to the instance: 1e4 times the
    /// largest covariance diagonal entry.
    pub fn for_inputs(inputs: &PortfolioInputs, rng_seed: u64) -> Self {
        let max_diag = (0..inputs.n())
            .map(|i| inputs.cov[(i, i)])
            .fold(0.0f64, f64::max);
        // Degenerate all-zero covariance still needs a positive penalty or
        // the constraints would be invisible to the search.
        let penalty_weight = if max_diag > 0.0 { 1e4 * max_diag } else { 1e4 };
        Self {
            population_size: 100,
            max_generations: 300,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_scale: 0.1,
            elite_count: 4,
            penalty_weight,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.population_size == 0 {
            return Err("population_size must be positive".into());
        }
        if self.max_generations == 0 {
            return Err("max_generations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(format!(
                "crossover_rate must be in [0, 1], got {}",
                self.crossover_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(format!(
                "mutation_rate must be in [0, 1], got {}",
                self.mutation_rate
            ));
        }
        if self.mutation_scale <= 0.0 || self.mutation_scale.is_nan() {
            return Err(format!(
                "mutation_scale must be positive, got {}",
                self.mutation_scale
            ));
        }
        if self.elite_count >= self.population_size {
            return Err(format!(
                "elite_count {} must be smaller than population_size {}",
                self.elite_count, self.population_size
            ));
        }
        if self.penalty_weight <= 0.0 || self.penalty_weight.is_nan() {
            return Err(format!(
                "penalty_weight must be positive, got {}",
                self.penalty_weight
            ));
        }
        Ok(())
    }
}

/// Runs the GA and returns the best individual seen in any generation.
///
/// Deterministic for a fixed `cfg.rng_seed`. An instance whose quality floor
/// exceeds the achievable quality cannot become feasible; the search still
/// runs (the penalty drives it to the feasible boundary) and the returned
/// solution carries `feasible = false` so callers can surface a diagnostic.
pub fn ga_solve(inputs: &PortfolioInputs, cfg: &GaConfig) -> Solution {
    debug_assert!(cfg.validate().is_ok());
    let n = inputs.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mutation = Normal::new(0.0, cfg.mutation_scale).expect("positive mutation scale");

    let fitness = |alpha: &Vec<f64>| -> f64 {
        let s = SelectionVector::new(alpha.clone());
        objective_value(inputs, &s) + cfg.penalty_weight * constraint_violation(inputs, &s)
    };

    // Two deterministic starters: the empty selection (globally optimal
    // whenever theta = 0) and the flat theta-proportional vector; the rest
    // of the population is uniform random.
    let mut population: Vec<Vec<f64>> = Vec::with_capacity(cfg.population_size);
    population.push(vec![0.0; n]);
    let er_total: f64 = inputs.expected_res.iter().sum();
    let flat = if er_total > 0.0 {
        (inputs.theta / er_total).clamp(0.0, 1.0)
    } else {
        0.0
    };
    population.push(vec![flat; n]);
    while population.len() < cfg.population_size {
        population.push((0..n).map(|_| rng.random::<f64>()).collect());
    }
    population.truncate(cfg.population_size);

    let mut scores: Vec<f64> = population.iter().map(&fitness).collect();
    let (mut best_alpha, mut best_fit) = best_of(&population, &scores);

    for _generation in 0..cfg.max_generations {
        // Elites survive unchanged; everything else is bred.
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
        let mut next: Vec<Vec<f64>> = order
            .iter()
            .take(cfg.elite_count)
            .map(|&i| population[i].clone())
            .collect();

        while next.len() < cfg.population_size {
            let pa = tournament(&scores, &mut rng);
            let pb = tournament(&scores, &mut rng);
            let (mut c1, mut c2) = (population[pa].clone(), population[pb].clone());
            if rng.random_bool(cfg.crossover_rate) {
                for g in 0..n {
                    if rng.random_bool(0.5) {
                        std::mem::swap(&mut c1[g], &mut c2[g]);
                    }
                }
            }
            mutate(&mut c1, cfg, &mutation, &mut rng);
            mutate(&mut c2, cfg, &mutation, &mut rng);
            next.push(c1);
            if next.len() < cfg.population_size {
                next.push(c2);
            }
        }

        population = next;
        scores = population.iter().map(&fitness).collect();
        let (gen_alpha, gen_fit) = best_of(&population, &scores);
        // Elitism guarantees the per-generation best never regresses.
        debug_assert!(gen_fit <= best_fit);
        if gen_fit < best_fit {
            best_fit = gen_fit;
            best_alpha = gen_alpha;
        }
    }

    finish_solution(inputs, best_alpha, cfg.max_generations, Solver::Ga)
}

fn best_of(population: &[Vec<f64>], scores: &[f64]) -> (Vec<f64>, f64) {
    let mut idx = 0;
    for i in 1..scores.len() {
        if scores[i] < scores[idx] {
            idx = i;
        }
    }
    (population[idx].clone(), scores[idx])
}

/// Binary tournament: two uniform picks, lower fitness wins.
fn tournament(scores: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.random_range(0..scores.len());
    let b = rng.random_range(0..scores.len());
    if scores[a] <= scores[b] {
        a
    } else {
        b
    }
}

fn mutate(genes: &mut [f64], cfg: &GaConfig, dist: &Normal<f64>, rng: &mut ChaCha8Rng) {
    for g in genes.iter_mut() {
        if rng.random_bool(cfg.mutation_rate) {
            *g = (*g + dist.sample(rng)).clamp(0.0, 1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_portfolio_inputs, AvailabilityDist, CameraSpec, CorrelationMatrix};
    use approx::assert_relative_eq;

    fn single_camera_instance(theta: f64) -> PortfolioInputs {
        let cams =
            vec![CameraSpec::new(0, 100.0, AvailabilityDist::new(2.0, 2.0).unwrap()).unwrap()];
        build_portfolio_inputs(&cams, &CorrelationMatrix::identity(1), theta, 1.0).unwrap()
    }

    #[test]
    fn one_camera_quality_floor_pins_the_optimum() {
        // Expected resolution 50, theta 40: feasible alpha is [0.8, 1.0] and
        // the variance minimum sits on the boundary, 0.8^2 * 500 = 320.
        let inputs = single_camera_instance(40.0);
        let sol = ga_solve(&inputs, &GaConfig::for_inputs(&inputs, 7));
        assert!(sol.feasible);
        let a = sol.selection.alpha[0];
        assert!((0.8..=1.0).contains(&a), "alpha = {a}");
        assert!(sol.quality >= 40.0 - 1e-6 * 40.0);
        assert!(
            (sol.objective - 320.0).abs() / 320.0 < 0.01,
            "objective = {}",
            sol.objective
        );
    }

    #[test]
    fn zero_theta_collapses_to_empty_selection() {
        let inputs = single_camera_instance(0.0);
        let sol = ga_solve(&inputs, &GaConfig::for_inputs(&inputs, 7));
        assert!(sol.feasible);
        assert!(sol.objective.abs() < 1e-9, "objective = {}", sol.objective);
    }

    #[test]
    fn returned_objective_matches_recomputation() {
        let inputs = single_camera_instance(40.0);
        let sol = ga_solve(&inputs, &GaConfig::for_inputs(&inputs, 3));
        let recomputed = objective_value(&inputs, &sol.selection);
        assert_relative_eq!(sol.objective, recomputed, max_relative = 1e-9);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let inputs = single_camera_instance(40.0);
        let cfg = GaConfig::for_inputs(&inputs, 1234);
        let a = ga_solve(&inputs, &cfg);
        let b = ga_solve(&inputs, &cfg);
        assert_eq!(a.selection.alpha, b.selection.alpha);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn infeasible_floor_yields_best_effort_flagged_solution() {
        // theta 80 exceeds the achievable quality 50.
        let inputs = single_camera_instance(80.0);
        let sol = ga_solve(&inputs, &GaConfig::for_inputs(&inputs, 7));
        assert!(!sol.feasible);
        // Best effort pushes quality to the boundary: alpha near 1.
        assert!(
            sol.selection.alpha[0] > 0.99,
            "alpha = {:?}",
            sol.selection.alpha
        );
        assert_eq!(sol.generations_run, 300);
        assert_eq!(sol.solver, Solver::Ga);
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let inputs = single_camera_instance(0.0);
        let mut cfg = GaConfig::for_inputs(&inputs, 0);
        cfg.elite_count = cfg.population_size;
        assert!(cfg.validate().is_err());
        let mut cfg = GaConfig::for_inputs(&inputs, 0);
        cfg.crossover_rate = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = GaConfig::for_inputs(&inputs, 0);
        cfg.mutation_scale = 0.0;
        assert!(cfg.validate().is_err());
    }
}
