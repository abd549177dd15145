//! Experiment files: one JSON document describing a problem, a shared
//! optimizer setup and the list of methods compared on it.

use std::path::{Path, PathBuf};

use lazo_core::estimators::{EstimatorConfig, Threshold};
use lazo_core::numerics::FeasibleSet;
use lazo_core::optimizer::{InitRecipe, RunConfig};
use lazo_core::oracles::ProblemConfig;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub problem: ProblemConfig,
    pub optimizer: OptimizerSection,
    pub estimators: Vec<MethodEntry>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

fn default_trials() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub horizon: usize,
    pub eta: f64,
    #[serde(default)]
    pub feasible_set: FeasibleSet,
    #[serde(default)]
    pub init: InitRecipe,
}

/// One compared method: estimator settings plus an optional step size
/// overriding the shared one.
#[derive(Debug, Clone, Deserialize)]
pub struct MethodEntry {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(flatten)]
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default)]
    pub symmetry: SymmetrySection,
    #[serde(default)]
    pub validate: ValidateSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymmetrySection {
    /// Rounds at which the reuse region is examined.
    pub rounds: Vec<usize>,
    pub samples: usize,
    pub projections: usize,
    pub projection_dim: usize,
    /// Trial whose run is frozen.
    pub trial: usize,
    /// Also report an infinite-threshold control, whose score is 0.
    pub control: bool,
}

impl Default for SymmetrySection {
    fn default() -> Self {
        SymmetrySection {
            rounds: vec![10],
            samples: 40_000,
            projections: 4,
            projection_dim: 2,
            trial: 0,
            control: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    /// Lipschitz constant used by the reduced-norm check.
    pub lipschitz: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection { lipschitz: 1.0 }
    }
}

/// Grid values; an absent list keeps each method's own value.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub threshold: Vec<Threshold>,
    pub eta: Vec<f64>,
    pub delta: Vec<f64>,
}

/// A parsed experiment with overrides applied: one run configuration per
/// method, all sharing the problem, horizon and seed panel.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub methods: Vec<(String, RunConfig)>,
    pub trials: usize,
    pub output_dir: PathBuf,
    pub diagnostics: DiagnosticsSection,
    pub sweep: Option<SweepSection>,
}

pub fn load(
    path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<Experiment, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let file: ExperimentFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("malformed config {}: {e}", path.display())))?;
    build_experiment(file, out_override, seed_override)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn build_experiment(
    file: ExperimentFile,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<Experiment, String> {
    let output_dir = out_override
        .map(Path::to_path_buf)
        .or(file.output_dir)
        .ok_or("no output directory: set output_dir or pass --out")?;
    if file.estimators.is_empty() {
        return Err("estimators list is empty".into());
    }
    if file.trials == 0 {
        return Err("trials must be >= 1".into());
    }
    let seed = seed_override.unwrap_or(file.seed);
    let mut methods: Vec<(String, RunConfig)> = Vec::new();
    for entry in file.estimators {
        let name = entry
            .name
            .unwrap_or_else(|| entry.estimator.variant.as_str().to_string());
        if name.is_empty() || name.contains(['/', '\\', ',']) {
            return Err(format!("invalid method name {name:?}"));
        }
        if methods.iter().any(|(n, _)| *n == name) {
            return Err(format!("duplicate method name {name:?}"));
        }
        let config = RunConfig {
            problem: file.problem.clone(),
            estimator: entry.estimator,
            horizon: file.optimizer.horizon,
            eta: entry.eta.unwrap_or(file.optimizer.eta),
            feasible_set: file.optimizer.feasible_set.clone(),
            init: file.optimizer.init.clone(),
            seed,
            record_probes: false,
        };
        config
            .validate()
            .map_err(|e| format!("method {name}: {e}"))?;
        methods.push((name, config));
    }
    Ok(Experiment {
        methods,
        trials: file.trials,
        output_dir,
        diagnostics: file.diagnostics,
        sweep: file.sweep,
    })
}
