//! Monte Carlo comparison of selection strategies under correlated
//! disruptions.
//!
//! Each replication solves for a selection once, then walks the disruption
//! process through the configured number of epochs, recording delivered
//! quality and success against the reliability threshold. Replications are
//! independent seeded streams, so they parallelize freely and adding more
//! never perturbs earlier ones.

use rayon::prelude::*;
use thiserror::Error;

use crate::disruption::{DisruptionProcess, DisruptionProcessConfig};
use crate::model::{self, CameraSpec, ModelError, PortfolioInputs};
use crate::optimizer::verify::{verify_solution, VerifyError};
use crate::optimizer::{
    baseline_top_expected, ga_solve, uniform_random_baseline, GaConfig, SelectionVector, Solution,
    Solver,
};
use crate::seeds;
use rand_chacha::ChaCha8Rng;

/// How a fractional selection vector becomes a concrete per-epoch camera set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMode {
    /// Camera i participates with probability alpha_i, drawn fresh each
    /// epoch. The literal reading of fractional selection weights.
    #[default]
    ProbabilisticAlpha,
    /// The floor(psi) largest weights are selected (ties to the lower
    /// index), fixed for the whole run. Matches fixed-cardinality
    /// deployments where psi cameras are physically wired up.
    DeterministicTopAlpha,
}

/// Selection strategies the harness can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Strategy {
    /// Mean-variance optimization via the genetic algorithm.
    Portfolio,
    /// The floor(psi) cameras with the largest expected delivered
    /// resolution, ignoring correlation.
    BaselineTopExpected,
    /// floor(psi) distinct cameras drawn uniformly at random per
    /// replication.
    UniformRandom,
}

impl Strategy {
    /// Stable name used in report output and CSV rows.
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Portfolio => "Portfolio",
            Strategy::BaselineTopExpected => "BaselineTopExpected",
            Strategy::UniformRandom => "UniformRandom",
        }
    }

    fn solver(self) -> Solver {
        match self {
            Strategy::Portfolio => Solver::Ga,
            Strategy::BaselineTopExpected => Solver::BaselineTopExpected,
            Strategy::UniformRandom => Solver::UniformRandom,
        }
    }

    fn stream_id(self) -> u64 {
        self.solver().stream_id()
    }
}

/// Optional overrides for the genetic algorithm hyperparameters; anything
/// left unset keeps the instance-derived default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaOverrides {
    pub population_size: Option<usize>,
    pub max_generations: Option<usize>,
    pub crossover_rate: Option<f64>,
    pub mutation_rate: Option<f64>,
    pub mutation_scale: Option<f64>,
    pub elite_count: Option<usize>,
    pub penalty_weight: Option<f64>,
}

impl GaOverrides {
    pub fn apply(&self, cfg: &mut GaConfig) {
        if let Some(v) = self.population_size {
            cfg.population_size = v;
        }
        if let Some(v) = self.max_generations {
            cfg.max_generations = v;
        }
        if let Some(v) = self.crossover_rate {
            cfg.crossover_rate = v;
        }
        if let Some(v) = self.mutation_rate {
            cfg.mutation_rate = v;
        }
        if let Some(v) = self.mutation_scale {
            cfg.mutation_scale = v;
        }
        if let Some(v) = self.elite_count {
            cfg.elite_count = v;
        }
        if let Some(v) = self.penalty_weight {
            cfg.penalty_weight = v;
        }
    }
}

/// Everything one experiment needs: the fleet, the disruption process, the
/// optimization thresholds, and the Monte Carlo dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub cameras: Vec<CameraSpec>,
    pub disruption: DisruptionProcessConfig,
    /// Minimum expected total delivered resolution for the optimizer.
    pub theta: f64,
    /// Camera budgets to sweep; one comparison table row group per value.
    pub psi_values: Vec<f64>,
    /// Reliability cutoff tau on realized per-epoch quality.
    pub quality_threshold: f64,
    pub epochs: u64,
    pub replications: u64,
    pub selection_mode: SelectionMode,
    pub strategies: Vec<Strategy>,
    pub master_seed: u64,
    /// Reconstruction needs at least this many delivered views; epochs
    /// below it score zero quality.
    pub min_views: usize,
    pub ga: GaOverrides,
}

/// Default reliability cutoff: 60% of the expected total delivered
/// resolution of the whole fleet.
pub fn default_quality_threshold(cameras: &[CameraSpec]) -> f64 {
    0.6 * cameras.iter().map(model::expected_resolution).sum::<f64>()
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.cameras.is_empty() {
            return Err(SimError::NoCameras);
        }
        if self.epochs == 0 {
            return Err(SimError::NoEpochs);
        }
        if self.replications == 0 {
            return Err(SimError::NoReplications);
        }
        // NaN thresholds must fail alongside negative ones.
        if self.quality_threshold < 0.0 || self.quality_threshold.is_nan() {
            return Err(SimError::NegativeThreshold(self.quality_threshold));
        }
        if self.psi_values.is_empty() {
            return Err(SimError::NoPsiValues);
        }
        let n = self.cameras.len();
        for &psi in &self.psi_values {
            if !(1.0..=n as f64).contains(&psi) {
                return Err(SimError::PsiOutOfRange { psi, n });
            }
        }
        if self.strategies.is_empty() {
            return Err(SimError::NoStrategies);
        }
        if self.disruption.marginals.len() != n {
            return Err(SimError::CameraProcessMismatch {
                cameras: n,
                dim: self.disruption.marginals.len(),
            });
        }
        model::validate_camera_ids(&self.cameras)?;
        Ok(())
    }

    fn portfolio_inputs(&self, psi: f64) -> Result<PortfolioInputs, ModelError> {
        model::build_portfolio_inputs(&self.cameras, &self.disruption.spatial_rho, self.theta, psi)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario has no cameras")]
    NoCameras,
    #[error("epochs must be at least 1")]
    NoEpochs,
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("quality_threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),
    #[error("psi_values must be non-empty")]
    NoPsiValues,
    #[error("psi {psi} outside [1, {n}] for an {n}-camera fleet")]
    PsiOutOfRange { psi: f64, n: usize },
    #[error("strategies must be non-empty")]
    NoStrategies,
    #[error("{cameras} cameras but the disruption process is {dim}-dimensional")]
    CameraProcessMismatch { cameras: usize, dim: usize },
    #[error("no records to aggregate")]
    NoRecords,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Disruption(#[from] crate::disruption::DisruptionError),
    #[error("{strategy} psi={psi} replication {replication}: solution failed audit: {source}")]
    SolutionAudit {
        strategy: &'static str,
        psi: f64,
        replication: u64,
        source: VerifyError,
    },
}

/// One epoch of one replication: what was selected, what was up, and how
/// much quality the epoch delivered.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub selected: Vec<bool>,
    pub up: Vec<bool>,
    /// Total resolution delivered by selected-and-up cameras.
    pub delivered_total: f64,
    /// Number of selected-and-up cameras. Bounded by floor(psi) in
    /// DeterministicTopAlpha mode; probabilistic selection can exceed it in
    /// single epochs while respecting the budget in expectation.
    pub views_delivered: usize,
    pub quality: f64,
    pub success: bool,
}

/// Aggregated outcome of all epochs of all replications for one
/// (strategy, psi) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub strategy: Strategy,
    pub psi: f64,
    pub mean_quality: f64,
    /// Population standard deviation of per-epoch quality.
    pub std_quality: f64,
    /// Fraction of successful epochs.
    pub reliability: f64,
    pub epochs_total: u64,
    /// Wilson 95% score interval for the reliability.
    pub ci95_reliability: (f64, f64),
}

/// Wilson 95% score interval for `successes` out of `total` Bernoulli
/// trials, clamped to [0, 1].
pub fn wilson_interval(successes: u64, total: u64) -> (f64, f64) {
    // Two-sided 95%: Phi^-1(0.975).
    const Z: f64 = 1.959963984540054;
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (Z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Realized per-epoch quality: total delivered resolution of selected
/// cameras, zeroed when fewer than `min_views` of them delivered.
pub fn quality_proxy(
    delivered: &crate::disruption::AvailabilityOutcome,
    selected: &[bool],
    min_views: usize,
) -> f64 {
    debug_assert_eq!(selected.len(), delivered.up.len());
    let views = selected
        .iter()
        .zip(&delivered.up)
        .filter(|(&s, &u)| s && u)
        .count();
    if views < min_views {
        return 0.0;
    }
    selected
        .iter()
        .zip(&delivered.delivered_res)
        .map(|(&s, &r)| if s { r } else { 0.0 })
        .sum()
}

/// Turns fractional weights into a concrete camera set for one epoch.
/// DeterministicTopAlpha ignores the RNG and always returns the same set,
/// so callers may hoist it out of the epoch loop.
pub fn materialize_selection(
    alpha: &SelectionVector,
    mode: SelectionMode,
    psi: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<bool> {
    use rand::Rng;
    match mode {
        SelectionMode::ProbabilisticAlpha => alpha
            .alpha
            .iter()
            .map(|&a| rng.random_bool(a.clamp(0.0, 1.0)))
            .collect(),
        SelectionMode::DeterministicTopAlpha => {
            let k = (psi.floor() as usize).min(alpha.len());
            let mut order: Vec<usize> = (0..alpha.len()).collect();
            order.sort_by(|&i, &j| {
                alpha.alpha[j]
                    .partial_cmp(&alpha.alpha[i])
                    .unwrap()
                    .then(i.cmp(&j))
            });
            let mut selected = vec![false; alpha.len()];
            for &i in order.iter().take(k) {
                selected[i] = true;
            }
            selected
        }
    }
}

/// The solved selection plus every epoch it generated.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutput {
    pub solution: Solution,
    pub records: Vec<EpochRecord>,
}

fn solve_strategy(
    cfg: &ScenarioConfig,
    inputs: &PortfolioInputs,
    strategy: Strategy,
    psi: f64,
    replication: u64,
) -> Solution {
    let seed = seeds::derive_seed(
        cfg.master_seed,
        &[
            seeds::ROLE_SOLVER,
            strategy.stream_id(),
            psi.to_bits(),
            replication,
        ],
    );
    match strategy {
        Strategy::Portfolio => {
            let mut ga = GaConfig::for_inputs(inputs, seed);
            cfg.ga.apply(&mut ga);
            ga_solve(inputs, &ga)
        }
        Strategy::BaselineTopExpected => baseline_top_expected(inputs),
        Strategy::UniformRandom => uniform_random_baseline(inputs, seed),
    }
}

/// Shared epoch driver. Solves once, audits the solution, then streams
/// records to the sink so the caller decides whether to keep them.
fn drive_replication(
    cfg: &ScenarioConfig,
    strategy: Strategy,
    psi: f64,
    replication: u64,
    mut sink: impl FnMut(EpochRecord),
) -> Result<Solution, SimError> {
    let inputs = cfg.portfolio_inputs(psi)?;
    let solution = solve_strategy(cfg, &inputs, strategy, psi, replication);
    // Feasible claims are always re-checked by the independent verifier;
    // infeasible (best-effort) solutions are recorded and the run proceeds.
    verify_solution(&inputs, &solution).map_err(|source| SimError::SolutionAudit {
        strategy: strategy.name(),
        psi,
        replication,
        source,
    })?;

    let process = DisruptionProcess::new(cfg.disruption.clone())?;
    let resolutions: Vec<f64> = cfg.cameras.iter().map(|c| c.resolution).collect();
    let mut rng = seeds::stream(
        cfg.master_seed,
        &[
            seeds::ROLE_EPOCHS,
            strategy.stream_id(),
            psi.to_bits(),
            replication,
        ],
    );
    let fixed_selection = match cfg.selection_mode {
        SelectionMode::DeterministicTopAlpha => Some(materialize_selection(
            &solution.selection,
            cfg.selection_mode,
            psi,
            &mut rng,
        )),
        SelectionMode::ProbabilisticAlpha => None,
    };

    let mut state = process.init_state(&mut rng);
    for epoch in 0..cfg.epochs {
        state = process.step(&state, &mut rng);
        let selected = match &fixed_selection {
            Some(s) => s.clone(),
            None => materialize_selection(&solution.selection, cfg.selection_mode, psi, &mut rng),
        };
        let outcome = process.realize(&state, &resolutions, &mut rng);
        let views_delivered = selected
            .iter()
            .zip(&outcome.up)
            .filter(|(&s, &u)| s && u)
            .count();
        if fixed_selection.is_some() {
            debug_assert!(views_delivered <= psi.floor() as usize);
        }
        let delivered_total: f64 = selected
            .iter()
            .zip(&outcome.delivered_res)
            .map(|(&s, &r)| if s { r } else { 0.0 })
            .sum();
        let quality = quality_proxy(&outcome, &selected, cfg.min_views);
        let success = quality >= cfg.quality_threshold && views_delivered >= cfg.min_views;
        sink(EpochRecord {
            epoch,
            selected,
            up: outcome.up,
            delivered_total,
            views_delivered,
            quality,
            success,
        });
    }
    Ok(solution)
}

/// Runs one replication end to end, keeping every epoch record.
/// Deterministic in (master_seed, strategy, psi, replication).
pub fn run_replication(
    cfg: &ScenarioConfig,
    strategy: Strategy,
    psi: f64,
    replication: u64,
) -> Result<ReplicationOutput, SimError> {
    let mut records = Vec::with_capacity(cfg.epochs as usize);
    let solution = drive_replication(cfg, strategy, psi, replication, |r| records.push(r))?;
    Ok(ReplicationOutput { solution, records })
}

/// Running sums for one task; merged in replication order so the final
/// floating-point fold is identical on every run.
#[derive(Debug, Clone, Copy, Default)]
struct PartialStats {
    epochs: u64,
    successes: u64,
    sum_quality: f64,
    sum_sq_quality: f64,
}

impl PartialStats {
    fn record(&mut self, r: &EpochRecord) {
        self.epochs += 1;
        self.successes += u64::from(r.success);
        self.sum_quality += r.quality;
        self.sum_sq_quality += r.quality * r.quality;
    }

    fn merge(&mut self, other: &PartialStats) {
        self.epochs += other.epochs;
        self.successes += other.successes;
        self.sum_quality += other.sum_quality;
        self.sum_sq_quality += other.sum_sq_quality;
    }

    fn finish(&self, strategy: Strategy, psi: f64) -> Result<RunStats, SimError> {
        if self.epochs == 0 {
            return Err(SimError::NoRecords);
        }
        let n = self.epochs as f64;
        let mean = self.sum_quality / n;
        let variance = (self.sum_sq_quality / n - mean * mean).max(0.0);
        Ok(RunStats {
            strategy,
            psi,
            mean_quality: mean,
            std_quality: variance.sqrt(),
            reliability: self.successes as f64 / n,
            epochs_total: self.epochs,
            ci95_reliability: wilson_interval(self.successes, self.epochs),
        })
    }
}

/// Collapses every epoch of every replication of one (strategy, psi) cell
/// into summary statistics.
pub fn aggregate(
    strategy: Strategy,
    psi: f64,
    records: &[EpochRecord],
) -> Result<RunStats, SimError> {
    let mut acc = PartialStats::default();
    for r in records {
        acc.record(r);
    }
    acc.finish(strategy, psi)
}

/// One comparison cell with its run-level diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRun {
    pub stats: RunStats,
    /// Replications whose solver returned a best-effort (infeasible)
    /// selection. The run still counts; this is surfaced so reports can
    /// flag it.
    pub infeasible_replications: u64,
    /// Solution of replication 0, for display. Strategies with per-
    /// replication randomness may differ in later replications.
    pub sample_solution: Solution,
}

/// Full cross product of strategies and psi values, each cell aggregated
/// over all replications. Rows ordered by (psi ascending, strategy name).
/// Identical configs produce identical tables, independent of thread count.
pub fn compare_strategies_detailed(cfg: &ScenarioConfig) -> Result<Vec<StrategyRun>, SimError> {
    cfg.validate()?;
    let mut cells: Vec<(f64, Strategy)> = Vec::new();
    let mut psis = cfg.psi_values.clone();
    psis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut strategies = cfg.strategies.clone();
    strategies.sort_by_key(|s| s.name());
    strategies.dedup();
    for &psi in &psis {
        for &s in &strategies {
            cells.push((psi, s));
        }
    }

    let tasks: Vec<(usize, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, _)| (0..cfg.replications).map(move |rep| (ci, rep)))
        .collect();
    let results: Vec<(Solution, PartialStats)> = tasks
        .par_iter()
        .map(|&(ci, rep)| {
            let (psi, strategy) = cells[ci];
            let mut acc = PartialStats::default();
            let solution = drive_replication(cfg, strategy, psi, rep, |r| acc.record(&r))?;
            Ok((solution, acc))
        })
        .collect::<Result<_, SimError>>()?;

    // Sequential merge in task order: replication 0 first within each cell.
    let mut merged: Vec<PartialStats> = vec![PartialStats::default(); cells.len()];
    let mut infeasible: Vec<u64> = vec![0; cells.len()];
    let mut samples: Vec<Option<Solution>> = vec![None; cells.len()];
    for (&(ci, _), (solution, acc)) in tasks.iter().zip(&results) {
        merged[ci].merge(acc);
        infeasible[ci] += u64::from(!solution.feasible);
        if samples[ci].is_none() {
            samples[ci] = Some(solution.clone());
        }
    }

    cells
        .iter()
        .enumerate()
        .map(|(ci, &(psi, strategy))| {
            Ok(StrategyRun {
                stats: merged[ci].finish(strategy, psi)?,
                infeasible_replications: infeasible[ci],
                sample_solution: samples[ci].clone().expect("replications >= 1"),
            })
        })
        .collect()
}

/// [`compare_strategies_detailed`] reduced to the statistics table.
pub fn compare_strategies(cfg: &ScenarioConfig) -> Result<Vec<RunStats>, SimError> {
    Ok(compare_strategies_detailed(cfg)?
        .into_iter()
        .map(|r| r.stats)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disruption::AvailabilityOutcome;
    use crate::model::AvailabilityDist;
    use approx::assert_abs_diff_eq;

    fn camera(id: usize, resolution: f64) -> CameraSpec {
        CameraSpec::new(id, resolution, AvailabilityDist::default()).unwrap()
    }

    fn outcome(up: &[bool], resolutions: &[f64]) -> AvailabilityOutcome {
        AvailabilityOutcome {
            probabilities: vec![0.5; up.len()],
            up: up.to_vec(),
            delivered_res: up
                .iter()
                .zip(resolutions)
                .map(|(&u, &r)| if u { r } else { 0.0 })
                .collect(),
        }
    }

    fn small_config(strategies: Vec<Strategy>) -> ScenarioConfig {
        let cameras = vec![camera(0, 100.0), camera(1, 90.0), camera(2, 80.0)];
        let rho = crate::disruption::block_correlation(&[0, 0, 1], 0.6, 0.1).unwrap();
        let marginals = vec![AvailabilityDist::default(); 3];
        let disruption = DisruptionProcessConfig::new(rho, 0.0, marginals, 0).unwrap();
        ScenarioConfig {
            cameras,
            disruption,
            theta: 60.0,
            psi_values: vec![2.0],
            quality_threshold: 80.0,
            epochs: 200,
            replications: 2,
            selection_mode: SelectionMode::DeterministicTopAlpha,
            strategies,
            master_seed: 7,
            min_views: 2,
            ga: GaOverrides::default(),
        }
    }

    #[test]
    fn quality_proxy_sums_selected_up_resolution() {
        let r = [100.0, 200.0, 300.0];
        let all_up = outcome(&[true, true, true], &r);
        assert_eq!(quality_proxy(&all_up, &[true, true, true], 2), 600.0);
        assert_eq!(quality_proxy(&all_up, &[false, false, false], 2), 0.0);
        assert_eq!(quality_proxy(&all_up, &[false, true, true], 2), 500.0);
    }

    #[test]
    fn quality_proxy_zeroes_below_minimum_views() {
        let r = [100.0, 200.0, 300.0];
        let one_up = outcome(&[false, false, true], &r);
        assert_eq!(quality_proxy(&one_up, &[true, true, true], 2), 0.0);
        // The same epoch counts once the cutoff drops to one view.
        assert_eq!(quality_proxy(&one_up, &[true, true, true], 1), 300.0);
    }

    #[test]
    fn top_alpha_selection_takes_largest_weights_ties_to_lower_index() {
        let mut rng = seeds::stream(0, &[seeds::ROLE_STANDALONE]);
        let alpha = SelectionVector::new(vec![0.2, 0.9, 0.9, 0.1]);
        let sel =
            materialize_selection(&alpha, SelectionMode::DeterministicTopAlpha, 2.9, &mut rng);
        assert_eq!(sel, vec![false, true, true, false]);

        let tied = SelectionVector::new(vec![0.5, 0.5, 0.3]);
        let sel = materialize_selection(&tied, SelectionMode::DeterministicTopAlpha, 2.0, &mut rng);
        assert_eq!(sel, vec![true, true, false]);
    }

    #[test]
    fn all_ones_alpha_selects_everything_in_both_modes() {
        let mut rng = seeds::stream(1, &[seeds::ROLE_STANDALONE]);
        let alpha = SelectionVector::new(vec![1.0; 4]);
        for mode in [
            SelectionMode::ProbabilisticAlpha,
            SelectionMode::DeterministicTopAlpha,
        ] {
            let sel = materialize_selection(&alpha, mode, 4.0, &mut rng);
            assert_eq!(sel, vec![true; 4]);
        }
    }

    #[test]
    fn degenerate_bernoulli_weights_are_deterministic() {
        let mut rng = seeds::stream(2, &[seeds::ROLE_STANDALONE]);
        let alpha = SelectionVector::new(vec![1.0, 0.0, 0.0]);
        for _ in 0..100 {
            let sel =
                materialize_selection(&alpha, SelectionMode::ProbabilisticAlpha, 3.0, &mut rng);
            assert_eq!(sel, vec![true, false, false]);
        }
    }

    #[test]
    fn probabilistic_selection_frequency_matches_alpha() {
        let mut rng = seeds::stream(3, &[seeds::ROLE_STANDALONE]);
        let alpha = SelectionVector::new(vec![0.3]);
        let n = 100_000;
        let mut hits = 0u64;
        for _ in 0..n {
            if materialize_selection(&alpha, SelectionMode::ProbabilisticAlpha, 1.0, &mut rng)[0] {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        let se = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((freq - 0.3).abs() < 3.0 * se, "frequency {freq}");
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate() {
        let (lo, hi) = wilson_interval(9_500, 10_000);
        assert!(lo < 0.95 && 0.95 < hi);
        assert!(lo > 0.945 && hi < 0.955, "interval [{lo}, {hi}]");
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        // At p = 1 the upper bound is 1 up to rounding in the square root.
        let (lo, hi) = wilson_interval(10, 10);
        assert!(lo < 1.0 && hi > 1.0 - 1e-12 && hi <= 1.0);
    }

    #[test]
    fn aggregate_two_point_distribution() {
        let template = EpochRecord {
            epoch: 0,
            selected: vec![true],
            up: vec![true],
            delivered_total: 0.0,
            views_delivered: 1,
            quality: 0.0,
            success: false,
        };
        let mut records = Vec::new();
        for i in 0..100 {
            let mut r = template.clone();
            r.epoch = i;
            r.quality = if i % 2 == 0 { 0.0 } else { 600.0 };
            r.success = i % 2 == 1;
            records.push(r);
        }
        let stats = aggregate(Strategy::Portfolio, 2.0, &records).unwrap();
        assert_abs_diff_eq!(stats.mean_quality, 300.0, epsilon = 1e-9);
        assert_abs_diff_eq!(stats.std_quality, 300.0, epsilon = 1e-9);
        assert_abs_diff_eq!(stats.reliability, 0.5, epsilon = 1e-12);
        assert_eq!(stats.epochs_total, 100);
    }

    #[test]
    fn aggregate_rejects_empty_input() {
        assert!(matches!(
            aggregate(Strategy::Portfolio, 2.0, &[]),
            Err(SimError::NoRecords)
        ));
    }

    #[test]
    fn replication_produces_one_record_per_epoch() {
        let mut cfg = small_config(vec![Strategy::Portfolio]);
        cfg.epochs = 1;
        let out = run_replication(&cfg, Strategy::Portfolio, 2.0, 0).unwrap();
        assert_eq!(out.records.len(), 1);
        cfg.epochs = 57;
        let out = run_replication(&cfg, Strategy::Portfolio, 2.0, 0).unwrap();
        assert_eq!(out.records.len(), 57);
        for (i, r) in out.records.iter().enumerate() {
            assert_eq!(r.epoch, i as u64);
        }
    }

    #[test]
    fn replications_are_bit_deterministic() {
        let cfg = small_config(vec![Strategy::Portfolio]);
        let a = run_replication(&cfg, Strategy::Portfolio, 2.0, 1).unwrap();
        let b = run_replication(&cfg, Strategy::Portfolio, 2.0, 1).unwrap();
        assert_eq!(a, b);
        let c = run_replication(&cfg, Strategy::Portfolio, 2.0, 2).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn near_certain_availability_gives_near_certain_success() {
        let avail = AvailabilityDist::new(1e6, 1.0).unwrap();
        let cameras: Vec<CameraSpec> = (0..3)
            .map(|i| CameraSpec::new(i, 100.0, avail).unwrap())
            .collect();
        let rho = crate::model::CorrelationMatrix::identity(3);
        let disruption = DisruptionProcessConfig::new(rho, 0.0, vec![avail; 3], 0).unwrap();
        let cfg = ScenarioConfig {
            cameras,
            disruption,
            theta: 150.0,
            psi_values: vec![3.0],
            quality_threshold: 150.0,
            epochs: 2_000,
            replications: 1,
            selection_mode: SelectionMode::DeterministicTopAlpha,
            strategies: vec![Strategy::BaselineTopExpected],
            master_seed: 11,
            min_views: 2,
            ga: GaOverrides::default(),
        };
        let out = run_replication(&cfg, Strategy::BaselineTopExpected, 3.0, 0).unwrap();
        let stats = aggregate(Strategy::BaselineTopExpected, 3.0, &out.records).unwrap();
        assert!(
            stats.reliability > 0.999,
            "reliability {}",
            stats.reliability
        );
    }

    #[test]
    fn top_mode_views_never_exceed_budget_floor() {
        let cfg = small_config(vec![Strategy::Portfolio]);
        let out = run_replication(&cfg, Strategy::Portfolio, 2.0, 0).unwrap();
        assert!(out.records.iter().all(|r| r.views_delivered <= 2));
        assert!(out
            .records
            .iter()
            .all(|r| r.quality >= 0.0 && r.quality <= 270.0));
    }

    #[test]
    fn reliability_is_monotone_in_the_threshold() {
        let cfg_low = small_config(vec![Strategy::BaselineTopExpected]);
        let mut cfg_high = cfg_low.clone();
        cfg_high.quality_threshold = 150.0;
        let low = run_replication(&cfg_low, Strategy::BaselineTopExpected, 2.0, 0).unwrap();
        let high = run_replication(&cfg_high, Strategy::BaselineTopExpected, 2.0, 0).unwrap();
        let rl = aggregate(Strategy::BaselineTopExpected, 2.0, &low.records).unwrap();
        let rh = aggregate(Strategy::BaselineTopExpected, 2.0, &high.records).unwrap();
        assert!(rh.reliability <= rl.reliability);
    }

    #[test]
    fn probabilistic_mean_quality_matches_analytic_expectation() {
        let mut cfg = small_config(vec![Strategy::Portfolio]);
        cfg.selection_mode = SelectionMode::ProbabilisticAlpha;
        cfg.min_views = 0;
        cfg.epochs = 30_000;
        let out = run_replication(&cfg, Strategy::Portfolio, 2.0, 0).unwrap();
        let stats = aggregate(Strategy::Portfolio, 2.0, &out.records).unwrap();
        // With no view cutoff, E[quality] = sum alpha_i R_i E[p_i], which
        // is exactly the solution's audited quality value.
        let analytic = out.solution.quality;
        let se = stats.std_quality / (cfg.epochs as f64).sqrt();
        assert!(
            (stats.mean_quality - analytic).abs() < 3.0 * se,
            "mean {} vs analytic {analytic}",
            stats.mean_quality
        );
    }

    #[test]
    fn compare_orders_rows_and_is_deterministic() {
        let mut cfg = small_config(vec![
            Strategy::UniformRandom,
            Strategy::Portfolio,
            Strategy::BaselineTopExpected,
        ]);
        cfg.psi_values = vec![3.0, 2.0];
        cfg.epochs = 100;
        let table = compare_strategies(&cfg).unwrap();
        assert_eq!(table.len(), 6);
        let keys: Vec<(f64, &str)> = table.iter().map(|r| (r.psi, r.strategy.name())).collect();
        assert_eq!(
            keys,
            vec![
                (2.0, "BaselineTopExpected"),
                (2.0, "Portfolio"),
                (2.0, "UniformRandom"),
                (3.0, "BaselineTopExpected"),
                (3.0, "Portfolio"),
                (3.0, "UniformRandom"),
            ]
        );
        let again = compare_strategies(&cfg).unwrap();
        assert_eq!(table, again);
    }

    #[test]
    fn single_cell_compare_has_one_row() {
        let cfg = small_config(vec![Strategy::Portfolio]);
        let table = compare_strategies(&cfg).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].epochs_total, cfg.epochs * cfg.replications);
    }

    #[test]
    fn infeasible_theta_is_reported_and_still_runs() {
        let mut cfg = small_config(vec![Strategy::Portfolio]);
        // Achievable expected quality under psi=2 is 95; demand more.
        cfg.theta = 200.0;
        let rows = compare_strategies_detailed(&cfg).unwrap();
        assert_eq!(rows[0].infeasible_replications, cfg.replications);
        assert!(!rows[0].sample_solution.feasible);
        assert_eq!(rows[0].stats.epochs_total, cfg.epochs * cfg.replications);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let good = small_config(vec![Strategy::Portfolio]);
        assert!(good.validate().is_ok());

        let mut c = good.clone();
        c.epochs = 0;
        assert!(matches!(c.validate(), Err(SimError::NoEpochs)));

        let mut c = good.clone();
        c.psi_values = vec![5.0];
        assert!(matches!(c.validate(), Err(SimError::PsiOutOfRange { .. })));

        let mut c = good.clone();
        c.psi_values.clear();
        assert!(matches!(c.validate(), Err(SimError::NoPsiValues)));

        let mut c = good.clone();
        c.strategies.clear();
        assert!(matches!(c.validate(), Err(SimError::NoStrategies)));

        let mut c = good.clone();
        c.quality_threshold = -1.0;
        assert!(matches!(c.validate(), Err(SimError::NegativeThreshold(_))));
    }
}
