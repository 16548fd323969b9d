//! Datasets: synthetic benchmark generation, normalization, splitting, and
//! CSV ingestion.

mod csv;
mod generate;

pub use csv::{
    load_csv, load_truth_sidecar, read_manifest, save_csv, write_manifest, ColumnRole,
    ManifestEntry,
};
pub use generate::{
    generate, generate_case1, generate_case2, generate_case3, BenchmarkCase, GeneratorSpec,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::StageTopology;
use crate::rng::{Rng, Stream};

/// One production run: inputs and measured outputs for every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

/// Per-variable z-score statistics, computed on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub input_mean: Vec<Vec<f64>>,
    pub input_std: Vec<Vec<f64>>,
    pub output_mean: Vec<Vec<f64>>,
    pub output_std: Vec<Vec<f64>>,
    /// Variables with zero variance, left centered-only.
    pub warnings: Vec<String>,
}

/// The true linear state-space recursion behind a synthetic dataset:
/// `state_k = input_weights_k x_k + transition_k state_{k-lag} + bias_k`,
/// `y_k = emission_k state_k` (noise added by the generator on top).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SovModel {
    pub input_weights: Vec<Matrix>,
    pub transition: Vec<Matrix>,
    pub bias: Vec<Vec<f64>>,
    pub emission: Vec<Matrix>,
    /// Stage offset of the recursion (1 for a plain chain).
    pub lag: usize,
}

impl SovModel {
    /// Run the noiseless recursion on raw (unnormalized) inputs.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let stages = self.input_weights.len();
        if inputs.len() != stages {
            return Err(Error::Shape(format!(
                "expected {} per-stage inputs, got {}",
                stages,
                inputs.len()
            )));
        }
        let width = self.transition.first().map_or(0, |m| m.rows());
        let mut states: Vec<Vec<f64>> = Vec::with_capacity(stages);
        let mut outputs = Vec::with_capacity(stages);
        for k in 0..stages {
            let mut h = self.bias[k].clone();
            self.input_weights[k].matvec_add(&inputs[k], &mut h);
            if k >= self.lag {
                self.transition[k].matvec_add(&states[k - self.lag], &mut h);
            } else {
                // h_j for j <= 0 is the zero vector; nothing to add.
                debug_assert_eq!(self.transition[k].cols(), width);
            }
            outputs.push(self.emission[k].matvec(&h)?);
            states.push(h);
        }
        Ok(outputs)
    }
}

/// Ground truth retained by the synthetic generators.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `important[k][i]` is true when input i of stage k genuinely influences
    /// some output.
    pub important: Vec<Vec<bool>>,
    pub model: SovModel,
}

impl GroundTruth {
    /// The masked (stage, input) pairs, i.e. the designated unimportant sensors.
    pub fn masked_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (k, row) in self.important.iter().enumerate() {
            for (i, &imp) in row.iter().enumerate() {
                if !imp {
                    pairs.push((k, i));
                }
            }
        }
        pairs
    }
}

/// A set of samples plus the stage layout they conform to.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub topology: StageTopology,
    /// Present when the samples are z-scored; holds the statistics needed to
    /// invert the transform.
    pub norm: Option<NormStats>,
    pub truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, topology: StageTopology) -> Result<Self> {
        let ds = Dataset { samples, topology, norm: None, truth: None };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (n, s) in self.samples.iter().enumerate() {
            if s.inputs.len() != self.topology.stage_count
                || s.outputs.len() != self.topology.stage_count
            {
                return Err(Error::Shape(format!("sample {n} has the wrong stage count")));
            }
            for k in 0..self.topology.stage_count {
                if s.inputs[k].len() != self.topology.input_widths[k]
                    || s.outputs[k].len() != self.topology.output_widths[k]
                {
                    return Err(Error::Shape(format!("sample {n}, stage {k}: width mismatch")));
                }
            }
        }
        Ok(())
    }

    /// Per-output mean over this dataset's samples (the naive predictor).
    pub fn output_means(&self) -> Vec<Vec<f64>> {
        let n = self.samples.len().max(1) as f64;
        let mut means: Vec<Vec<f64>> =
            self.topology.output_widths.iter().map(|&w| vec![0.0; w]).collect();
        for s in &self.samples {
            for (k, ys) in s.outputs.iter().enumerate() {
                for (j, &y) in ys.iter().enumerate() {
                    means[k][j] += y;
                }
            }
        }
        for row in &mut means {
            for m in row {
                *m /= n;
            }
        }
        means
    }
}

fn stat_pass(values: impl Iterator<Item = f64>, n: usize) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut collected = Vec::with_capacity(n);
    for v in values {
        sum += v;
        collected.push(v);
    }
    let mean = sum / n as f64;
    for v in collected {
        sum_sq += (v - mean).powi(2);
    }
    (mean, (sum_sq / n as f64).sqrt())
}

/// Z-score every variable using this dataset's own statistics. Callers pass
/// the training split here and push the returned stats through
/// [`apply_normalization`] for validation/test splits. Zero-variance
/// variables are centered only and recorded in the stats' warning list.
pub fn normalize(ds: &Dataset) -> Result<(Dataset, NormStats)> {
    if ds.is_empty() {
        return Err(Error::Argument("cannot normalize an empty dataset".into()));
    }
    let topo = &ds.topology;
    let n = ds.len();
    let mut stats = NormStats {
        input_mean: topo.input_widths.iter().map(|&w| vec![0.0; w]).collect(),
        input_std: topo.input_widths.iter().map(|&w| vec![1.0; w]).collect(),
        output_mean: topo.output_widths.iter().map(|&w| vec![0.0; w]).collect(),
        output_std: topo.output_widths.iter().map(|&w| vec![1.0; w]).collect(),
        warnings: Vec::new(),
    };
    for k in 0..topo.stage_count {
        for i in 0..topo.input_widths[k] {
            let (mean, std) = stat_pass(ds.samples.iter().map(|s| s.inputs[k][i]), n);
            stats.input_mean[k][i] = mean;
            if std > ZERO_VARIANCE_STD {
                stats.input_std[k][i] = std;
            } else {
                stats.warnings.push(format!("input {k}:{i} has zero variance; centered only"));
            }
        }
        for j in 0..topo.output_widths[k] {
            let (mean, std) = stat_pass(ds.samples.iter().map(|s| s.outputs[k][j]), n);
            stats.output_mean[k][j] = mean;
            if std > ZERO_VARIANCE_STD {
                stats.output_std[k][j] = std;
            } else {
                stats.warnings.push(format!("output {k}:{j} has zero variance; centered only"));
            }
        }
    }
    Ok((apply_normalization(ds, &stats), stats))
}

const ZERO_VARIANCE_STD: f64 = 1e-12;

/// Apply existing z-score statistics to a dataset.
pub fn apply_normalization(ds: &Dataset, stats: &NormStats) -> Dataset {
    let mut out = ds.clone();
    for s in &mut out.samples {
        for (k, xs) in s.inputs.iter_mut().enumerate() {
            for (i, x) in xs.iter_mut().enumerate() {
                *x = (*x - stats.input_mean[k][i]) / stats.input_std[k][i];
            }
        }
        for (k, ys) in s.outputs.iter_mut().enumerate() {
            for (j, y) in ys.iter_mut().enumerate() {
                *y = (*y - stats.output_mean[k][j]) / stats.output_std[k][j];
            }
        }
    }
    out.norm = Some(stats.clone());
    out
}

/// Invert [`apply_normalization`], restoring raw sensor values.
pub fn denormalize(ds: &Dataset) -> Result<Dataset> {
    let stats = ds
        .norm
        .as_ref()
        .ok_or_else(|| Error::Argument("dataset carries no normalization stats".into()))?;
    let mut out = ds.clone();
    for s in &mut out.samples {
        for (k, xs) in s.inputs.iter_mut().enumerate() {
            for (i, x) in xs.iter_mut().enumerate() {
                *x = *x * stats.input_std[k][i] + stats.input_mean[k][i];
            }
        }
        for (k, ys) in s.outputs.iter_mut().enumerate() {
            for (j, y) in ys.iter_mut().enumerate() {
                *y = *y * stats.output_std[k][j] + stats.output_mean[k][j];
            }
        }
    }
    out.norm = None;
    Ok(out)
}

/// Deterministic shuffled partition into train/validation/test.
pub fn split(ds: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (ft, fv, fe) = fractions;
    if ft <= 0.0 || fv <= 0.0 || fe <= 0.0 {
        return Err(Error::Argument("split fractions must be positive".into()));
    }
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::Argument("split fractions must sum to 1".into()));
    }
    let n = ds.len();
    let n_train = (ft * n as f64).round() as usize;
    let n_val = (fv * n as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::Argument(format!("split of {n} samples leaves an empty part")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::substream(seed, Stream::Split).shuffle(&mut order);
    let pick = |range: std::ops::Range<usize>| -> Dataset {
        let samples = order[range].iter().map(|&i| ds.samples[i].clone()).collect();
        Dataset {
            samples,
            topology: ds.topology.clone(),
            norm: ds.norm.clone(),
            truth: ds.truth.clone(),
        }
    };
    let train = pick(0..n_train);
    let val = pick(n_train..n_train + n_val);
    let test = pick(n_train + n_val..n);
    Ok((train, val, test))
}

/// Split, then z-score all three parts with statistics from the training
/// part only.
pub fn split_and_normalize(
    ds: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (train, val, test) = split(ds, fractions, seed)?;
    let (train, stats) = normalize(&train)?;
    let val = apply_normalization(&val, &stats);
    let test = apply_normalization(&test, &stats);
    Ok((train, val, test))
}
