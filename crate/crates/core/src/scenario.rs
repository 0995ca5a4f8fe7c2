//! Scenario file format: a sectioned key-value text document describing one
//! experiment end to end.
//!
//! ```text
//! schema_version = 1
//!
//! [cameras]
//! # id  resolution  beta_a  beta_b
//! 0  150  2  2
//! 1  148  2  2
//!
//! [correlation]
//! # upper-triangle entries: i j rho (omitted pairs are 0)
//! 0 1 0.8
//!
//! [disruption]
//! temporal_phi = 0.0
//!
//! [optimizer]
//! max_generations = 300
//!
//! [experiment]
//! theta = 120
//! psi_values = 1 2
//! epochs = 1000
//! replications = 5
//! ```
//!
//! Unknown sections and keys are rejected so typos surface immediately
//! instead of silently running a different experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::model::{AvailabilityDist, CameraSpec, CorrelationMatrix, ModelError};
use crate::sim::{default_quality_threshold, GaOverrides, ScenarioConfig, SelectionMode, Strategy};

pub const SCHEMA_VERSION: u64 = 1;

/// Three failure classes, each with a distinct message prefix so scripts
/// can tell an unreadable path from a malformed file from a well-formed
/// file describing an invalid experiment.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl ScenarioError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        ScenarioError::Parse {
            line,
            message: message.into(),
        }
    }

    fn invalid(message: impl ToString) -> Self {
        ScenarioError::Invalid(message.to_string())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Cameras,
    Correlation,
    Disruption,
    Optimizer,
    Experiment,
}

/// One `key = value` occurrence with its line number for error reporting.
struct Keyed {
    line: usize,
    value: String,
}

#[derive(Default)]
struct RawScenario {
    schema_version: Option<(usize, u64)>,
    cameras: Vec<(usize, CameraSpec)>,
    correlation: Vec<(usize, usize, usize, f64)>,
    disruption: BTreeMap<String, Keyed>,
    optimizer: BTreeMap<String, Keyed>,
    experiment: BTreeMap<String, Keyed>,
}

fn split_key_value(line_no: usize, line: &str) -> Result<(String, String), ScenarioError> {
    let (key, value) = line
        .split_once('=')
        .ok_or_else(|| ScenarioError::parse(line_no, "expected `key = value`"))?;
    let key = key.trim();
    let value = value.trim();
    if key.is_empty() || value.is_empty() {
        return Err(ScenarioError::parse(line_no, "expected `key = value`"));
    }
    Ok((key.to_string(), value.to_string()))
}

fn insert_keyed(
    map: &mut BTreeMap<String, Keyed>,
    section: &str,
    allowed: &[&str],
    line_no: usize,
    line: &str,
) -> Result<(), ScenarioError> {
    let (key, value) = split_key_value(line_no, line)?;
    if !allowed.contains(&key.as_str()) {
        return Err(ScenarioError::parse(
            line_no,
            format!("unknown key `{key}` in [{section}]"),
        ));
    }
    if map
        .insert(
            key.clone(),
            Keyed {
                line: line_no,
                value,
            },
        )
        .is_some()
    {
        return Err(ScenarioError::parse(
            line_no,
            format!("duplicate key `{key}` in [{section}]"),
        ));
    }
    Ok(())
}

const DISRUPTION_KEYS: &[&str] = &["temporal_phi"];
const OPTIMIZER_KEYS: &[&str] = &[
    "population_size",
    "max_generations",
    "crossover_rate",
    "mutation_rate",
    "mutation_scale",
    "elite_count",
    "penalty_weight",
];
const EXPERIMENT_KEYS: &[&str] = &[
    "theta",
    "psi_values",
    "quality_threshold",
    "epochs",
    "replications",
    "selection_mode",
    "strategies",
    "master_seed",
    "min_views",
];

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut raw = RawScenario::default();
    let mut section = Section::Top;

    for (idx, full_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match full_line.split_once('#') {
            Some((content, _)) => content.trim(),
            None => full_line.trim(),
        };
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ScenarioError::parse(line_no, "unterminated section header"))?;
            section = match name {
                "cameras" => Section::Cameras,
                "correlation" => Section::Correlation,
                "disruption" => Section::Disruption,
                "optimizer" => Section::Optimizer,
                "experiment" => Section::Experiment,
                other => {
                    return Err(ScenarioError::parse(
                        line_no,
                        format!("unknown section [{other}]"),
                    ))
                }
            };
            continue;
        }
        match section {
            Section::Top => {
                let (key, value) = split_key_value(line_no, line)?;
                if key != "schema_version" {
                    return Err(ScenarioError::parse(
                        line_no,
                        format!("unknown key `{key}` before the first section"),
                    ));
                }
                if raw.schema_version.is_some() {
                    return Err(ScenarioError::parse(line_no, "duplicate schema_version"));
                }
                let version: u64 = value.parse().map_err(|_| {
                    ScenarioError::parse(
                        line_no,
                        format!("schema_version `{value}` is not an integer"),
                    )
                })?;
                raw.schema_version = Some((line_no, version));
            }
            Section::Cameras => {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 2 && fields.len() != 4 {
                    return Err(ScenarioError::parse(
                        line_no,
                        "camera line needs `id resolution` or `id resolution beta_a beta_b`",
                    ));
                }
                let id: usize = fields[0].parse().map_err(|_| {
                    ScenarioError::parse(
                        line_no,
                        format!("camera id `{}` is not an integer", fields[0]),
                    )
                })?;
                let resolution: f64 = parse_real(line_no, "resolution", fields[1])?;
                let avail = if fields.len() == 4 {
                    let a = parse_real(line_no, "beta_a", fields[2])?;
                    let b = parse_real(line_no, "beta_b", fields[3])?;
                    AvailabilityDist::new(a, b).map_err(ScenarioError::invalid)?
                } else {
                    AvailabilityDist::default()
                };
                let spec =
                    CameraSpec::new(id, resolution, avail).map_err(ScenarioError::invalid)?;
                raw.cameras.push((line_no, spec));
            }
            Section::Correlation => {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(ScenarioError::parse(
                        line_no,
                        "correlation line needs `i j rho`",
                    ));
                }
                let i: usize = fields[0].parse().map_err(|_| {
                    ScenarioError::parse(
                        line_no,
                        format!("index `{}` is not an integer", fields[0]),
                    )
                })?;
                let j: usize = fields[1].parse().map_err(|_| {
                    ScenarioError::parse(
                        line_no,
                        format!("index `{}` is not an integer", fields[1]),
                    )
                })?;
                if i >= j {
                    return Err(ScenarioError::parse(
                        line_no,
                        format!("upper-triangle entry requires i < j, got ({i}, {j})"),
                    ));
                }
                let rho = parse_real(line_no, "rho", fields[2])?;
                raw.correlation.push((line_no, i, j, rho));
            }
            Section::Disruption => insert_keyed(
                &mut raw.disruption,
                "disruption",
                DISRUPTION_KEYS,
                line_no,
                line,
            )?,
            Section::Optimizer => insert_keyed(
                &mut raw.optimizer,
                "optimizer",
                OPTIMIZER_KEYS,
                line_no,
                line,
            )?,
            Section::Experiment => insert_keyed(
                &mut raw.experiment,
                "experiment",
                EXPERIMENT_KEYS,
                line_no,
                line,
            )?,
        }
    }

    assemble(raw)
}

fn parse_real(line: usize, what: &str, token: &str) -> Result<f64, ScenarioError> {
    let v: f64 = token
        .parse()
        .map_err(|_| ScenarioError::parse(line, format!("{what} `{token}` is not a number")))?;
    if !v.is_finite() {
        return Err(ScenarioError::parse(line, format!("{what} must be finite")));
    }
    Ok(v)
}

fn take_real(map: &mut BTreeMap<String, Keyed>, key: &str) -> Result<Option<f64>, ScenarioError> {
    match map.remove(key) {
        Some(k) => Ok(Some(parse_real(k.line, key, &k.value)?)),
        None => Ok(None),
    }
}

fn take_integer<T: std::str::FromStr>(
    map: &mut BTreeMap<String, Keyed>,
    key: &str,
) -> Result<Option<T>, ScenarioError> {
    match map.remove(key) {
        Some(k) => {
            let v = k.value.parse::<T>().map_err(|_| {
                ScenarioError::parse(
                    k.line,
                    format!("{key} `{}` is not a valid integer", k.value),
                )
            })?;
            Ok(Some(v))
        }
        None => Ok(None),
    }
}

fn assemble(mut raw: RawScenario) -> Result<ScenarioConfig, ScenarioError> {
    match raw.schema_version {
        None => return Err(ScenarioError::invalid("schema_version is required")),
        Some((line, v)) if v != SCHEMA_VERSION => {
            return Err(ScenarioError::parse(
                line,
                format!("unsupported schema_version {v} (supported: {SCHEMA_VERSION})"),
            ))
        }
        Some(_) => {}
    }

    if raw.cameras.is_empty() {
        return Err(ScenarioError::invalid("scenario has no cameras"));
    }
    let cameras: Vec<CameraSpec> = raw.cameras.iter().map(|(_, c)| c.clone()).collect();
    crate::model::validate_camera_ids(&cameras).map_err(ScenarioError::invalid)?;
    let n = cameras.len();

    let mut rho = DMatrix::identity(n, n);
    let mut seen: Vec<(usize, usize)> = Vec::new();
    for &(line, i, j, value) in &raw.correlation {
        if j >= n {
            return Err(ScenarioError::parse(
                line,
                format!("correlation index pair ({i}, {j}) exceeds the {n}-camera fleet"),
            ));
        }
        if seen.contains(&(i, j)) {
            return Err(ScenarioError::parse(
                line,
                format!("duplicate correlation entry for pair ({i}, {j})"),
            ));
        }
        seen.push((i, j));
        rho[(i, j)] = value;
        rho[(j, i)] = value;
    }
    let rho = CorrelationMatrix::new(rho).map_err(ScenarioError::invalid)?;

    let temporal_phi = take_real(&mut raw.disruption, "temporal_phi")?.unwrap_or(0.0);

    let ga = GaOverrides {
        population_size: take_integer(&mut raw.optimizer, "population_size")?,
        max_generations: take_integer(&mut raw.optimizer, "max_generations")?,
        crossover_rate: take_real(&mut raw.optimizer, "crossover_rate")?,
        mutation_rate: take_real(&mut raw.optimizer, "mutation_rate")?,
        mutation_scale: take_real(&mut raw.optimizer, "mutation_scale")?,
        elite_count: take_integer(&mut raw.optimizer, "elite_count")?,
        penalty_weight: take_real(&mut raw.optimizer, "penalty_weight")?,
    };

    let theta = take_real(&mut raw.experiment, "theta")?
        .ok_or_else(|| ScenarioError::invalid("[experiment] is missing required key `theta`"))?;
    let psi_values = match raw.experiment.remove("psi_values") {
        None => {
            return Err(ScenarioError::invalid(
                "[experiment] is missing required key `psi_values`",
            ))
        }
        Some(k) => k
            .value
            .split_whitespace()
            .map(|tok| parse_real(k.line, "psi", tok))
            .collect::<Result<Vec<f64>, _>>()?,
    };
    let epochs = take_integer::<u64>(&mut raw.experiment, "epochs")?
        .ok_or_else(|| ScenarioError::invalid("[experiment] is missing required key `epochs`"))?;
    let replications =
        take_integer::<u64>(&mut raw.experiment, "replications")?.ok_or_else(|| {
            ScenarioError::invalid("[experiment] is missing required key `replications`")
        })?;
    let quality_threshold = take_real(&mut raw.experiment, "quality_threshold")?
        .unwrap_or_else(|| default_quality_threshold(&cameras));
    let selection_mode = match raw.experiment.remove("selection_mode") {
        None => SelectionMode::default(),
        Some(k) => parse_selection_mode(&k.value).ok_or_else(|| {
            ScenarioError::parse(
                k.line,
                format!("selection_mode `{}` (use prob or top)", k.value),
            )
        })?,
    };
    let strategies = match raw.experiment.remove("strategies") {
        None => vec![
            Strategy::Portfolio,
            Strategy::BaselineTopExpected,
            Strategy::UniformRandom,
        ],
        Some(k) => k
            .value
            .split_whitespace()
            .map(|tok| {
                parse_strategy(tok).ok_or_else(|| {
                    ScenarioError::parse(
                        k.line,
                        format!("strategy `{tok}` (use portfolio, baseline, or uniform)"),
                    )
                })
            })
            .collect::<Result<Vec<Strategy>, _>>()?,
    };
    let master_seed = take_integer::<u64>(&mut raw.experiment, "master_seed")?.unwrap_or(0);
    let min_views = take_integer::<usize>(&mut raw.experiment, "min_views")?.unwrap_or(2);

    let marginals: Vec<AvailabilityDist> = cameras.iter().map(|c| c.avail).collect();
    let disruption =
        crate::disruption::DisruptionProcessConfig::new(rho, temporal_phi, marginals, master_seed)
            .map_err(ScenarioError::invalid)?;

    let config = ScenarioConfig {
        cameras,
        disruption,
        theta,
        psi_values,
        quality_threshold,
        epochs,
        replications,
        selection_mode,
        strategies,
        master_seed,
        min_views,
        ga,
    };
    config.validate().map_err(ScenarioError::invalid)?;
    Ok(config)
}

pub fn parse_selection_mode(token: &str) -> Option<SelectionMode> {
    match token {
        "prob" => Some(SelectionMode::ProbabilisticAlpha),
        "top" => Some(SelectionMode::DeterministicTopAlpha),
        _ => None,
    }
}

pub fn parse_strategy(token: &str) -> Option<Strategy> {
    match token {
        "portfolio" => Some(Strategy::Portfolio),
        "baseline" => Some(Strategy::BaselineTopExpected),
        "uniform" => Some(Strategy::UniformRandom),
        _ => None,
    }
}

pub fn strategy_token(s: Strategy) -> &'static str {
    match s {
        Strategy::Portfolio => "portfolio",
        Strategy::BaselineTopExpected => "baseline",
        Strategy::UniformRandom => "uniform",
    }
}

pub fn mode_token(m: SelectionMode) -> &'static str {
    match m {
        SelectionMode::ProbabilisticAlpha => "prob",
        SelectionMode::DeterministicTopAlpha => "top",
    }
}

/// Renders a config back to scenario text. `parse_scenario` on the result
/// reproduces the config exactly; float formatting round-trips bit-for-bit.
pub fn format_scenario(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema_version = {SCHEMA_VERSION}");
    let _ = writeln!(out);
    let _ = writeln!(out, "[cameras]");
    let _ = writeln!(out, "# id  resolution  beta_a  beta_b");
    for c in &cfg.cameras {
        let _ = writeln!(
            out,
            "{}  {}  {}  {}",
            c.id,
            c.resolution,
            c.avail.alpha_shape(),
            c.avail.beta_shape()
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[correlation]");
    let _ = writeln!(
        out,
        "# upper-triangle entries: i j rho (omitted pairs are 0)"
    );
    let rho = &cfg.disruption.spatial_rho;
    for i in 0..rho.n() {
        for j in (i + 1)..rho.n() {
            let v = rho.entry(i, j);
            if v != 0.0 {
                let _ = writeln!(out, "{i} {j} {v}");
            }
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[disruption]");
    let _ = writeln!(out, "temporal_phi = {}", cfg.disruption.temporal_phi);
    let _ = writeln!(out);
    let _ = writeln!(out, "[optimizer]");
    let ga = &cfg.ga;
    let pairs: [(&str, Option<String>); 7] = [
        ("population_size", ga.population_size.map(|v| v.to_string())),
        ("max_generations", ga.max_generations.map(|v| v.to_string())),
        ("crossover_rate", ga.crossover_rate.map(|v| v.to_string())),
        ("mutation_rate", ga.mutation_rate.map(|v| v.to_string())),
        ("mutation_scale", ga.mutation_scale.map(|v| v.to_string())),
        ("elite_count", ga.elite_count.map(|v| v.to_string())),
        ("penalty_weight", ga.penalty_weight.map(|v| v.to_string())),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            let _ = writeln!(out, "{key} = {v}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[experiment]");
    let _ = writeln!(out, "theta = {}", cfg.theta);
    let psis: Vec<String> = cfg.psi_values.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(out, "psi_values = {}", psis.join(" "));
    let _ = writeln!(out, "quality_threshold = {}", cfg.quality_threshold);
    let _ = writeln!(out, "epochs = {}", cfg.epochs);
    let _ = writeln!(out, "replications = {}", cfg.replications);
    let _ = writeln!(out, "selection_mode = {}", mode_token(cfg.selection_mode));
    let tokens: Vec<&str> = cfg.strategies.iter().map(|&s| strategy_token(s)).collect();
    let _ = writeln!(out, "strategies = {}", tokens.join(" "));
    let _ = writeln!(out, "master_seed = {}", cfg.master_seed);
    let _ = writeln!(out, "min_views = {}", cfg.min_views);
    out
}

pub fn write_scenario(cfg: &ScenarioConfig, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, format_scenario(cfg))
}

/// Rescales the off-diagonal correlation structure: 0 removes all
/// correlation, 1 keeps it unchanged, values above 1 amplify it (and may
/// push the matrix out of the valid set, which is reported as an error).
pub fn scale_correlation(
    rho: &CorrelationMatrix,
    scale: f64,
) -> Result<CorrelationMatrix, ModelError> {
    let n = rho.n();
    let mut m = rho.as_matrix().clone();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[(i, j)] *= scale;
            }
        }
    }
    CorrelationMatrix::new(m)
}

/// Deterministic random scenario for experimentation: heterogeneous
/// resolutions, two correlation blocks, and thresholds scaled to the fleet.
pub fn random_scenario(n: usize, seed: u64) -> Result<ScenarioConfig, ScenarioError> {
    use rand::Rng;
    if n < 2 {
        return Err(ScenarioError::invalid(
            "generated scenarios need at least 2 cameras",
        ));
    }
    let mut rng = crate::seeds::stream(seed, &[crate::seeds::ROLE_STANDALONE]);
    let cameras: Vec<CameraSpec> = (0..n)
        .map(|i| {
            let resolution = (rng.random_range(60.0..=180.0f64)).round();
            CameraSpec::new(i, resolution, AvailabilityDist::default())
                .expect("positive resolution by construction")
        })
        .collect();
    // Two blocks, each non-empty.
    let split = rng.random_range(1..n);
    let groups: Vec<usize> = (0..n).map(|i| usize::from(i >= split)).collect();
    let intra = rng.random_range(0.5..0.9);
    let inter = rng.random_range(0.0..0.3);
    let rho = crate::disruption::block_correlation(&groups, intra, inter)
        .map_err(ScenarioError::invalid)?;

    let psi = (n / 2).max(1) as f64;
    let marginals: Vec<AvailabilityDist> = cameras.iter().map(|c| c.avail).collect();
    let master_seed = seed;
    let disruption =
        crate::disruption::DisruptionProcessConfig::new(rho, 0.0, marginals, master_seed)
            .map_err(ScenarioError::invalid)?;
    let inputs = crate::model::build_portfolio_inputs(&cameras, &disruption.spatial_rho, 0.0, psi)
        .map_err(ScenarioError::invalid)?;
    let theta = 0.7 * inputs.max_achievable_quality();
    let quality_threshold = default_quality_threshold(&cameras);

    let config = ScenarioConfig {
        cameras,
        disruption,
        theta,
        psi_values: vec![psi, (psi + 1.0).min(n as f64)],
        quality_threshold,
        epochs: 2_000,
        replications: 5,
        selection_mode: SelectionMode::DeterministicTopAlpha,
        strategies: vec![
            Strategy::Portfolio,
            Strategy::BaselineTopExpected,
            Strategy::UniformRandom,
        ],
        master_seed,
        min_views: 2,
        ga: GaOverrides::default(),
    };
    config.validate().map_err(ScenarioError::invalid)?;
    Ok(config)
}
