//! Run configuration: a TOML file with typo-safe parsing and dotted-path
//! `--set key=value` overrides.
//!
//! Exactly one data source is configured per run: a `[generator]` block for
//! synthetic benchmarks or a `[data]` block pointing at a manifest + CSV
//! pair. A single top-level seed drives every randomized component.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::data::{BenchmarkCase, GeneratorSpec};
use crate::error::{Error, Result};
use crate::losses::{LossKind, TrainConfig};
use crate::model::StageTopology;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory for every artifact the commands write.
    pub out: PathBuf,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub train: TrainBlock,
    #[serde(default)]
    pub split: SplitBlock,
    pub generator: Option<GeneratorBlock>,
    pub data: Option<DataBlock>,
    pub tune: Option<TuneBlock>,
    #[serde(default)]
    pub evaluate: EvaluateBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub hidden: usize,
    #[serde(default = "one")]
    pub transition_depth: usize,
    #[serde(default = "one")]
    pub emission_depth: usize,
    #[serde(default)]
    pub feed_prev_outputs: bool,
}

fn one() -> usize {
    1
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock { hidden: 8, transition_depth: 1, emission_depth: 1, feed_prev_outputs: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainBlock {
    pub lambda_x: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub loss: LossKind,
    pub prox_step: f64,
    pub sgd_step: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub restart_patience: usize,
    pub max_restarts: usize,
    pub adapt_prox: bool,
}

impl Default for TrainBlock {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainBlock {
            lambda_x: d.lambda_x,
            lambda: d.lambda,
            gamma: d.gamma,
            loss: d.loss_kind,
            prox_step: d.prox_step,
            sgd_step: d.sgd_step,
            batch_size: d.batch_size,
            epochs: d.epochs,
            restart_patience: d.restart_patience,
            max_restarts: d.max_restarts,
            adapt_prox: d.adapt_prox,
        }
    }
}

impl TrainBlock {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lambda_x: self.lambda_x,
            lambda: self.lambda,
            gamma: self.gamma,
            loss_kind: self.loss,
            prox_step: self.prox_step,
            sgd_step: self.sgd_step,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            restart_patience: self.restart_patience,
            max_restarts: self.max_restarts,
            adapt_prox: self.adapt_prox,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitBlock {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitBlock {
    fn default() -> Self {
        SplitBlock { train: 0.6, val: 0.2, test: 0.2 }
    }
}

impl SplitBlock {
    pub fn fractions(&self) -> (f64, f64, f64) {
        (self.train, self.val, self.test)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorBlock {
    /// Benchmark case id: 1 unified chain, 2 sensor groups, 3 lagged lines.
    pub case: u8,
    #[serde(default = "default_stages")]
    pub stages: usize,
    #[serde(default = "default_inputs")]
    pub inputs_per_stage: usize,
    #[serde(default = "default_outputs")]
    pub outputs_per_stage: usize,
    #[serde(default = "default_hidden_true")]
    pub hidden_true: usize,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    /// Defaults to 15 per stage (5 per group for case 2).
    pub unimportant: Option<usize>,
    #[serde(default = "default_groups")]
    pub groups: usize,
    #[serde(default = "default_lag")]
    pub lag: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_stages() -> usize {
    9
}
fn default_inputs() -> usize {
    90
}
fn default_outputs() -> usize {
    6
}
fn default_hidden_true() -> usize {
    5
}
fn default_noise() -> f64 {
    0.5
}
fn default_groups() -> usize {
    3
}
fn default_lag() -> usize {
    3
}
fn default_samples() -> usize {
    2000
}

impl GeneratorBlock {
    pub fn to_spec(&self, seed: u64) -> Result<GeneratorSpec> {
        let case = BenchmarkCase::from_id(self.case)?;
        let unimportant = self.unimportant.unwrap_or(match case {
            BenchmarkCase::SensorGroups => 5,
            _ => 15,
        });
        let spec = GeneratorSpec {
            case,
            stages: self.stages,
            inputs_per_stage: self.inputs_per_stage,
            outputs_per_stage: self.outputs_per_stage,
            hidden_true: self.hidden_true,
            noise_std: self.noise_std,
            unimportant,
            groups: self.groups,
            lag: self.lag,
            samples: self.samples,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    pub manifest: PathBuf,
    pub csv: PathBuf,
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneBlock {
    pub trials: usize,
    /// Log-uniform sampling ranges `[lo, hi]`.
    pub lambda_x: [f64; 2],
    pub lambda: [f64; 2],
    pub gamma: [f64; 2],
    pub prox_step: [f64; 2],
    /// Uniform integer range `[lo, hi]`.
    pub hidden: [usize; 2],
}

impl Default for TuneBlock {
    fn default() -> Self {
        TuneBlock {
            trials: 20,
            lambda_x: [1e-4, 1.0],
            lambda: [1e-6, 1e-2],
            gamma: [0.1, 10.0],
            prox_step: [0.01, 1.0],
            hidden: [4, 16],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateBlock {
    /// Quantile levels of the per-output RMSE distribution.
    pub quantiles: Vec<f64>,
    /// RMSE threshold sweep bounds and step for the identified-output counts.
    pub threshold_start: f64,
    pub threshold_end: f64,
    pub threshold_step: f64,
}

impl Default for EvaluateBlock {
    fn default() -> Self {
        EvaluateBlock {
            quantiles: vec![0.2, 0.4, 0.5, 0.7],
            threshold_start: 0.05,
            threshold_end: 0.95,
            threshold_step: 0.05,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.generator, &self.data) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "config declares both [generator] and [data]; pick one".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("config needs a [generator] or a [data] block".into()))
            }
            _ => {}
        }
        if let Some(data) = &self.data {
            for path in [&data.manifest, &data.csv].into_iter().chain(data.truth.as_ref()) {
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "referenced path does not exist: {}",
                        path.display()
                    )));
                }
            }
        }
        if let Some(g) = &self.generator {
            g.to_spec(self.seed)?;
        }
        let (t, v, e) = self.split.fractions();
        if t <= 0.0 || v <= 0.0 || e <= 0.0 || (t + v + e - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split fractions must be positive and sum to 1".into()));
        }
        if let Some(tune) = &self.tune {
            if tune.trials == 0 {
                return Err(Error::Config("tuning needs at least one trial".into()));
            }
            for (name, [lo, hi]) in [
                ("lambda_x", tune.lambda_x),
                ("lambda", tune.lambda),
                ("gamma", tune.gamma),
                ("prox_step", tune.prox_step),
            ] {
                if lo <= 0.0 || hi < lo {
                    return Err(Error::Config(format!(
                        "tuning range for {name} must satisfy 0 < lo <= hi"
                    )));
                }
            }
            if tune.hidden[0] == 0 || tune.hidden[1] < tune.hidden[0] {
                return Err(Error::Config("tuning range for hidden must satisfy 1 <= lo <= hi".into()));
            }
        }
        Ok(())
    }

    /// The learned model's stage layout over a dataset's widths.
    pub fn model_topology(&self, input_widths: Vec<usize>, output_widths: Vec<usize>) -> Result<StageTopology> {
        StageTopology::new(
            input_widths,
            output_widths,
            self.model.hidden,
            self.model.transition_depth,
            self.model.emission_depth,
            self.model.feed_prev_outputs,
        )
    }
}

/// Parse a config file, apply `--set key=value` overrides (dotted paths into
/// the TOML document), then optional seed/out overrides from CLI flags.
pub fn load_config(
    path: &Path,
    sets: &[(String, String)],
    seed_override: Option<u64>,
    out_override: Option<PathBuf>,
) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut doc: toml::Value = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("cannot parse config {}: {e}", path.display())))?;
    for (key, value) in sets {
        apply_override(&mut doc, key, value)?;
    }
    let mut config: RunConfig = doc
        .try_into()
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    if let Some(out) = out_override {
        config.out = out;
    }
    config.validate()?;
    Ok(config)
}

/// Set a dotted path inside a TOML document. The value string is parsed as a
/// TOML literal when possible and falls back to a plain string.
fn apply_override(doc: &mut toml::Value, key: &str, value: &str) -> Result<()> {
    let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {value}")) {
        Ok(table) => table["v"].clone(),
        Err(_) => toml::Value::String(value.to_string()),
    };
    let mut current = doc;
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    for segment in &segments[..segments.len() - 1] {
        let table = current
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}': '{segment}' is not a table")))?;
        current = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = current
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("override '{key}' does not address a table entry")))?;
    table.insert(segments[segments.len() - 1].to_string(), parsed);
    Ok(())
}
