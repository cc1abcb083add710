//! Flat `key = value` run configuration with dotted section keys and `#`
//! comments. Parsing is strict: unknown keys are rejected, every
//! validation failure names the offending key, and missing required keys
//! are listed together.
//!
//! ```text
//! # 1D test case
//! mesh.dimension = 1
//! mesh.length    = 1.0
//! mesh.cells     = 100
//! model.gamma    = 0.000196
//! solver.dt_initial = 1.96e-5
//! ...
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::physics::ModelParams;
use crate::solvers::{ProjectionMode, SchemeKind, SolverConfig};

/// Configuration failure, with enough context to point at the input.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, message: String },
    UnknownKey { line: usize, key: String },
    DuplicateKey { line: usize, key: String },
    InvalidValue { key: String, message: String },
    MissingKeys { keys: Vec<String> },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Syntax { line, message } => {
                write!(f, "config syntax error on line {line}: {message}")
            }
            ConfigError::UnknownKey { line, key } => {
                write!(f, "unknown config key `{key}` on line {line}")
            }
            ConfigError::DuplicateKey { line, key } => {
                write!(f, "duplicate config key `{key}` on line {line}")
            }
            ConfigError::InvalidValue { key, message } => {
                write!(f, "invalid value for `{key}`: {message}")
            }
            ConfigError::MissingKeys { keys } => {
                write!(f, "missing required config keys: {}", keys.join(", "))
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Mesh block.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub dimension: usize,
    pub length: f64,
    pub cells: usize,
}

/// Output block.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Snapshot interval in steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub directory: PathBuf,
}

/// Stability-scan block (required by `scan-stability`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub dt_min: f64,
    pub dt_max: f64,
    pub n_points: usize,
    pub sigmas: Vec<f64>,
}

/// Refinement-study block (used by `convergence-study`).
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub mesh_sizes: Vec<usize>,
    /// `dt = dt_coeff * h^2`.
    pub dt_coeff: f64,
    pub t_end: f64,
    pub ic_amplitude: f64,
}

/// Fully parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub model: ModelParams,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub scan: Option<ScanConfig>,
    pub study: StudyConfig,
}

const KNOWN_KEYS: &[&str] = &[
    "mesh.dimension",
    "mesh.length",
    "mesh.cells",
    "model.gamma",
    "model.sigma",
    "model.n_star",
    "model.k_offset",
    "model.epsilon",
    "solver.scheme",
    "solver.dt_initial",
    "solver.dt_max",
    "solver.t_end",
    "solver.picard_tol",
    "solver.picard_max_iter",
    "solver.under_relaxation",
    "solver.cfl_safety",
    "solver.projection_mode",
    "solver.linear_tol",
    "solver.linear_max_iter",
    "solver.rng_seed",
    "solver.initial_mean",
    "solver.perturbation_amplitude",
    "output.snapshot_every",
    "output.directory",
    "scan.dt_min",
    "scan.dt_max",
    "scan.n_points",
    "scan.sigmas",
    "study.mesh_sizes",
    "study.dt_coeff",
    "study.t_end",
    "study.ic_amplitude",
];

const REQUIRED_KEYS: &[&str] = &[
    "mesh.dimension",
    "mesh.length",
    "mesh.cells",
    "model.gamma",
    "model.sigma",
    "model.n_star",
    "solver.dt_initial",
    "solver.t_end",
    "solver.initial_mean",
];

struct KeyMap(BTreeMap<String, String>);

impl KeyMap {
    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|s| s.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| ConfigError::InvalidValue {
                    key: key.to_string(),
                    message: format!("cannot parse `{raw}`"),
                }),
        }
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.parse(key)?.ok_or_else(|| ConfigError::MissingKeys {
            keys: vec![key.to_string()],
        })
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse::<T>()
                        .map_err(|_| ConfigError::InvalidValue {
                            key: key.to_string(),
                            message: format!("cannot parse list item `{}`", item.trim()),
                        })
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }
}

fn tokenize(text: &str) -> Result<KeyMap, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line: line_no,
                message: "empty key or value".into(),
            });
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line: line_no,
                key: key.to_string(),
            });
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ConfigError::DuplicateKey {
                line: line_no,
                key: key.to_string(),
            });
        }
    }
    Ok(KeyMap(map))
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Parse and validate a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let map = tokenize(text)?;

    let missing: Vec<String> = REQUIRED_KEYS
        .iter()
        .filter(|k| map.get(k).is_none())
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys { keys: missing });
    }

    let dimension: usize = map.require("mesh.dimension")?;
    if dimension != 1 && dimension != 2 {
        return Err(invalid("mesh.dimension", "must be 1 or 2"));
    }
    let length: f64 = map.require("mesh.length")?;
    if !(length > 0.0) {
        return Err(invalid("mesh.length", "must be > 0"));
    }
    let cells: usize = map.require("mesh.cells")?;
    if cells < 2 {
        return Err(invalid("mesh.cells", "must be >= 2"));
    }
    let mesh = MeshConfig {
        dimension,
        length,
        cells,
    };

    let gamma: f64 = map.require("model.gamma")?;
    let sigma: f64 = map.require("model.sigma")?;
    let n_star: f64 = map.require("model.n_star")?;
    let k_offset: f64 = map.parse_or("model.k_offset", 0.0)?;
    let epsilon: f64 = map.parse_or("model.epsilon", 0.0)?;
    let model = ModelParams::new(gamma, sigma, n_star, k_offset, epsilon)
        .map_err(|e| invalid("model.*", e.0))?;

    let scheme = match map.get("solver.scheme").unwrap_or("linear") {
        "linear" => SchemeKind::Linear,
        "nonlinear" => SchemeKind::Nonlinear,
        other => {
            return Err(invalid(
                "solver.scheme",
                format!("expected `linear` or `nonlinear`, got `{other}`"),
            ))
        }
    };
    let projection_mode = match map.get("solver.projection_mode").unwrap_or("interpolation") {
        "interpolation" => ProjectionMode::Interpolation,
        "lumped_h1" => ProjectionMode::LumpedH1,
        other => {
            return Err(invalid(
                "solver.projection_mode",
                format!("expected `interpolation` or `lumped_h1`, got `{other}`"),
            ))
        }
    };
    let dt_initial: f64 = map.require("solver.dt_initial")?;
    let defaults = SolverConfig::defaults();
    let solver = SolverConfig {
        scheme,
        dt_initial,
        dt_max: map.parse_or("solver.dt_max", dt_initial)?,
        t_end: map.require("solver.t_end")?,
        picard_tol: map.parse_or("solver.picard_tol", defaults.picard_tol)?,
        picard_max_iter: map.parse_or("solver.picard_max_iter", defaults.picard_max_iter)?,
        under_relaxation: map.parse_or("solver.under_relaxation", defaults.under_relaxation)?,
        cfl_safety: map.parse_or("solver.cfl_safety", defaults.cfl_safety)?,
        projection_mode,
        linear_tol: map.parse_or("solver.linear_tol", defaults.linear_tol)?,
        linear_max_iter: map.parse_or("solver.linear_max_iter", defaults.linear_max_iter)?,
        rng_seed: map.parse_or("solver.rng_seed", defaults.rng_seed)?,
        initial_mean: map.require("solver.initial_mean")?,
        perturbation_amplitude: map.parse_or(
            "solver.perturbation_amplitude",
            defaults.perturbation_amplitude,
        )?,
    };
    solver
        .validate()
        .map_err(|e| invalid("solver.*", e.to_string()))?;

    let output = OutputConfig {
        snapshot_every: map.parse_or("output.snapshot_every", 0)?,
        directory: PathBuf::from(map.get("output.directory").unwrap_or("out")),
    };

    let scan = match (
        map.parse::<f64>("scan.dt_min")?,
        map.parse::<f64>("scan.dt_max")?,
    ) {
        (Some(dt_min), Some(dt_max)) => {
            if !(dt_min > 0.0 && dt_max > dt_min) {
                return Err(invalid("scan.dt_min", "need 0 < scan.dt_min < scan.dt_max"));
            }
            let n_points: usize = map.parse_or("scan.n_points", 25)?;
            if n_points < 1 {
                return Err(invalid("scan.n_points", "must be >= 1"));
            }
            let sigmas =
                map.parse_list::<f64>("scan.sigmas")?
                    .ok_or_else(|| ConfigError::MissingKeys {
                        keys: vec!["scan.sigmas".into()],
                    })?;
            if sigmas.is_empty() || sigmas.iter().any(|&s| !(s > 0.0)) {
                return Err(invalid("scan.sigmas", "must be a list of positive reals"));
            }
            Some(ScanConfig {
                dt_min,
                dt_max,
                n_points,
                sigmas,
            })
        }
        (None, None) => None,
        _ => {
            return Err(invalid(
                "scan.dt_min",
                "scan.dt_min and scan.dt_max must be given together",
            ))
        }
    };

    let study_sizes = map
        .parse_list::<usize>("study.mesh_sizes")?
        .unwrap_or_else(|| vec![100, 200, 400]);
    if study_sizes.len() < 2 {
        return Err(invalid("study.mesh_sizes", "need at least two sizes"));
    }
    let study = StudyConfig {
        mesh_sizes: study_sizes,
        dt_coeff: map.parse_or("study.dt_coeff", 0.196)?,
        t_end: map.parse_or("study.t_end", 0.05)?,
        ic_amplitude: map.parse_or("study.ic_amplitude", 0.05)?,
    };
    if !(study.dt_coeff > 0.0) {
        return Err(invalid("study.dt_coeff", "must be > 0"));
    }

    Ok(RunConfig {
        mesh,
        model,
        solver,
        output,
        scan,
        study,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1: &str = "\
# 1D test case
mesh.dimension = 1
mesh.length = 1.0
mesh.cells = 100
model.gamma = 0.000196
model.sigma = 5e-5
model.n_star = 0.6
solver.dt_initial = 1.96e-5
solver.t_end = 1.0
solver.initial_mean = 0.3
solver.rng_seed = 42
";

    #[test]
    fn parses_table1_values() {
        let cfg = parse_config(TABLE1).unwrap();
        assert_eq!(cfg.mesh.dimension, 1);
        assert_eq!(cfg.mesh.cells, 100);
        assert!((cfg.model.gamma - 0.000196).abs() < 1e-18);
        assert!((cfg.model.sigma - 5e-5).abs() < 1e-18);
        assert_eq!(cfg.model.n_star, 0.6);
        assert!((cfg.solver.dt_initial - 1.96e-5).abs() < 1e-18);
        assert_eq!(cfg.solver.initial_mean, 0.3);
        assert_eq!(cfg.solver.rng_seed, 42);
        // defaults applied
        assert_eq!(cfg.solver.scheme, SchemeKind::Linear);
        assert_eq!(cfg.solver.dt_max, cfg.solver.dt_initial);
        assert_eq!(cfg.solver.picard_tol, 1e-8);
        assert_eq!(cfg.output.snapshot_every, 0);
        assert!(cfg.scan.is_none());
    }

    #[test]
    fn empty_file_lists_required_keys() {
        match parse_config("") {
            Err(ConfigError::MissingKeys { keys }) => {
                assert!(keys.contains(&"mesh.dimension".to_string()));
                assert!(keys.contains(&"model.gamma".to_string()));
                assert!(keys.contains(&"solver.t_end".to_string()));
                assert_eq!(keys.len(), REQUIRED_KEYS.len());
            }
            other => panic!("expected MissingKeys, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected_with_line_number() {
        let text = format!("{TABLE1}nonsense.key = 1\n");
        match parse_config(&text) {
            Err(ConfigError::UnknownKey { line, key }) => {
                assert_eq!(key, "nonsense.key");
                assert_eq!(line, 12);
            }
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_line_number() {
        match parse_config("mesh.dimension 1\n") {
            Err(ConfigError::Syntax { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected Syntax, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = format!("{TABLE1}mesh.cells = 50\n");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::DuplicateKey { .. })
        ));
    }

    #[test]
    fn invalid_values_name_the_key() {
        let bad = TABLE1.replace("mesh.cells = 100", "mesh.cells = 1");
        match parse_config(&bad) {
            Err(ConfigError::InvalidValue { key, .. }) => assert_eq!(key, "mesh.cells"),
            other => panic!("expected InvalidValue, got {other:?}"),
        }
        let bad = TABLE1.replace("model.sigma = 5e-5", "model.sigma = 1.0");
        assert!(matches!(
            parse_config(&bad),
            Err(ConfigError::InvalidValue { .. })
        ));
    }

    #[test]
    fn scan_block_parses_sigma_list() {
        let text = format!(
            "{TABLE1}scan.dt_min = 1e-6\nscan.dt_max = 1e-2\nscan.n_points = 10\nscan.sigmas = 1e-5, 1e-4\n"
        );
        let cfg = parse_config(&text).unwrap();
        let scan = cfg.scan.unwrap();
        assert_eq!(scan.sigmas, vec![1e-5, 1e-4]);
        assert_eq!(scan.n_points, 10);
    }

    #[test]
    fn study_defaults() {
        let cfg = parse_config(TABLE1).unwrap();
        assert_eq!(cfg.study.mesh_sizes, vec![100, 200, 400]);
        assert!((cfg.study.dt_coeff - 0.196).abs() < 1e-15);
        assert!((cfg.study.t_end - 0.05).abs() < 1e-15);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = format!("\n# leading comment\n\n{TABLE1}\n# trailing\n");
        assert!(parse_config(&text).is_ok());
    }
}
