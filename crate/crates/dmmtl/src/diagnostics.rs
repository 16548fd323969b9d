//! Evaluation metrics and interpretability reports.
//!
//! Relative RMSE compares a predictor's test SSE against the training-mean
//! predictor per output, so 1 means no skill and 0 means perfect. Importance
//! comes in two flavors: global scores are the Euclidean norms of the learned
//! input-weight columns (which the group penalty drives to exact zero for
//! irrelevant sensors), local scores are mean squared input sensitivities of
//! one chosen output over a chosen sample set.

use crate::error::{Error, Result};
use crate::gradients::input_gradient_with;
use crate::model::{forward_with, Act, ParameterSet};

/// Per-(stage, output) relative RMSE. `None` marks outputs whose naive
/// denominator is zero (constant test target), which are excluded from
/// aggregates.
pub type PerOutput = Vec<Vec<Option<f64>>>;

/// Relative RMSE per output: test SSE of the predictions divided by the test
/// SSE of the training-mean predictor.
pub fn relative_rmse(
    y_test: &[Vec<Vec<f64>>],
    y_pred: &[Vec<Vec<f64>>],
    y_train_mean: &[Vec<f64>],
) -> Result<PerOutput> {
    if y_test.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} target samples vs {} prediction samples",
            y_test.len(),
            y_pred.len()
        )));
    }
    if y_test.is_empty() {
        return Err(Error::Argument("relative RMSE over an empty test set".into()));
    }
    let widths: Vec<usize> = y_train_mean.iter().map(|r| r.len()).collect();
    let mut num: Vec<Vec<f64>> = widths.iter().map(|&w| vec![0.0; w]).collect();
    let mut den: Vec<Vec<f64>> = widths.iter().map(|&w| vec![0.0; w]).collect();
    for (t, p) in y_test.iter().zip(y_pred) {
        if t.len() != widths.len() || p.len() != widths.len() {
            return Err(Error::Shape("sample stage count does not match the mean layout".into()));
        }
        for k in 0..widths.len() {
            if t[k].len() != widths[k] || p[k].len() != widths[k] {
                return Err(Error::Shape(format!("stage {k}: output width mismatch")));
            }
            for j in 0..widths[k] {
                num[k][j] += (t[k][j] - p[k][j]).powi(2);
                den[k][j] += (t[k][j] - y_train_mean[k][j]).powi(2);
            }
        }
    }
    Ok(num
        .into_iter()
        .zip(den)
        .map(|(nr, dr)| {
            nr.into_iter()
                .zip(dr)
                .map(|(n, d)| if d > 0.0 { Some(n / d) } else { None })
                .collect()
        })
        .collect())
}

/// Mean over the defined per-output values.
pub fn mean_defined(per_output: &PerOutput) -> Option<f64> {
    let defined: Vec<f64> =
        per_output.iter().flat_map(|row| row.iter().copied().flatten()).collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Per-stage mean over the stage's defined outputs.
pub fn per_stage_means(per_output: &PerOutput) -> Vec<Option<f64>> {
    per_output
        .iter()
        .map(|row| {
            let defined: Vec<f64> = row.iter().copied().flatten().collect();
            if defined.is_empty() {
                None
            } else {
                Some(defined.iter().sum::<f64>() / defined.len() as f64)
            }
        })
        .collect()
}

/// Empirical quantiles with linear interpolation, one per requested level.
/// Undefined per-output entries are excluded.
pub fn rmse_quantiles(per_output: &PerOutput, levels: &[f64]) -> Result<Vec<f64>> {
    let mut values: Vec<f64> =
        per_output.iter().flat_map(|row| row.iter().copied().flatten()).collect();
    if values.is_empty() {
        return Err(Error::Argument("no defined values to take quantiles of".into()));
    }
    for &l in levels {
        if !(0.0..1.0).contains(&l) || l == 0.0 {
            return Err(Error::Argument(format!("quantile level {l} outside (0, 1)")));
        }
    }
    values.sort_by(f64::total_cmp);
    Ok(levels
        .iter()
        .map(|&l| {
            let pos = l * (values.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            values[lo] + (values[hi] - values[lo]) * frac
        })
        .collect())
}

/// What an [`ImportanceReport`] scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportanceKind {
    /// Column norms of the input weights: importance to the whole system.
    Global,
    /// Mean squared sensitivity of one output over a sample set.
    Local { target: (usize, usize), sample_count: usize },
}

/// Nonnegative score per (stage, input sensor).
#[derive(Debug, Clone)]
pub struct ImportanceReport {
    pub kind: ImportanceKind,
    pub scores: Vec<Vec<f64>>,
}

impl ImportanceReport {
    /// Flatten to (stage, input, score) triples.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (k, row) in self.scores.iter().enumerate() {
            for (i, &s) in row.iter().enumerate() {
                out.push((k, i, s));
            }
        }
        out
    }

    /// Highest-scoring entries, ties broken by position.
    pub fn top(&self, m: usize) -> Vec<(usize, usize, f64)> {
        let mut entries = self.entries();
        entries.sort_by(|a, b| b.2.total_cmp(&a.2));
        entries.truncate(m);
        entries
    }
}

/// Global input importance: the Euclidean norm of each input-weight column.
/// A column the proximal update zeroed scores exactly 0.
pub fn global_importance(params: &ParameterSet) -> ImportanceReport {
    let topo = params.topology();
    let scores = params
        .stages()
        .iter()
        .enumerate()
        .map(|(k, stage)| {
            // Score the stage's own sensors; fed-forward output slots are not
            // sensors.
            (0..topo.input_widths[k]).map(|i| stage.input_weights.column_norm(i)).collect()
        })
        .collect();
    ImportanceReport { kind: ImportanceKind::Global, scores }
}

/// Local importance of every input sensor for one target output: the mean
/// over `samples` of the squared sensitivity `d target / d input`.
pub fn local_importance(
    params: &ParameterSet,
    samples: &[Vec<Vec<f64>>],
    target: (usize, usize),
) -> Result<ImportanceReport> {
    local_importance_with(params, samples, target, Act::Sigmoid)
}

pub(crate) fn local_importance_with(
    params: &ParameterSet,
    samples: &[Vec<Vec<f64>>],
    target: (usize, usize),
    act: Act,
) -> Result<ImportanceReport> {
    if samples.is_empty() {
        return Err(Error::Argument("local importance needs at least one sample".into()));
    }
    let topo = params.topology();
    let mut scores: Vec<Vec<f64>> = topo.input_widths.iter().map(|&w| vec![0.0; w]).collect();
    for inputs in samples {
        let trace = forward_with(params, inputs, None, act);
        let grads = input_gradient_with(params, &trace, target, act)?;
        for (k, row) in grads.iter().enumerate() {
            for (i, g) in row.iter().enumerate() {
                scores[k][i] += g * g;
            }
        }
    }
    let n = samples.len() as f64;
    for row in &mut scores {
        for s in row {
            *s /= n;
        }
    }
    Ok(ImportanceReport {
        kind: ImportanceKind::Local { target, sample_count: samples.len() },
        scores,
    })
}

/// Variable-selection quality of a score list against ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMetrics {
    /// Smallest cutoff whose false-positive rate among truly-unimportant
    /// inputs does not exceed the requested rate; inputs scoring strictly
    /// above it are predicted important.
    pub threshold: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Rank-sum (Mann-Whitney) probability that an important input outscores
    /// an unimportant one, ties counted half. `None` for degenerate masks.
    pub auc: Option<f64>,
}

/// Score a flat list of importance values against a truth mask at a target
/// false-positive rate.
pub fn selection_metrics(scores: &[f64], important: &[bool], fpr: f64) -> Result<SelectionMetrics> {
    if scores.len() != important.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} mask entries",
            scores.len(),
            important.len()
        )));
    }
    if !(0.0..1.0).contains(&fpr) || fpr == 0.0 {
        return Err(Error::Argument(format!("false positive rate {fpr} outside (0, 1)")));
    }
    let unimportant: Vec<f64> = scores
        .iter()
        .zip(important)
        .filter(|(_, &imp)| !imp)
        .map(|(&s, _)| s)
        .collect();
    let important_scores: Vec<f64> =
        scores.iter().zip(important).filter(|(_, &imp)| imp).map(|(&s, _)| s).collect();

    // Threshold: smallest cutoff keeping the empirical FPR at or below fpr.
    // Predicted-important means score > threshold, so the cutoff is the
    // (allowed + 1)-th largest unimportant score (or 0 if all may pass).
    let threshold = if unimportant.is_empty() {
        f64::NEG_INFINITY
    } else {
        let allowed = (fpr * unimportant.len() as f64).floor() as usize;
        let mut sorted = unimportant.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if allowed >= sorted.len() {
            f64::NEG_INFINITY
        } else {
            sorted[allowed]
        }
    };

    let tp = important_scores.iter().filter(|&&s| s > threshold).count() as f64;
    let fp = unimportant.iter().filter(|&&s| s > threshold).count() as f64;
    let fn_ = important_scores.len() as f64 - tp;
    let precision = if tp + fp > 0.0 { Some(tp / (tp + fp)) } else { None };
    let recall =
        if !important_scores.is_empty() { Some(tp / (tp + fn_)) } else { None };

    let auc = if important_scores.is_empty() || unimportant.is_empty() {
        None
    } else {
        let mut wins = 0.0;
        for &a in &important_scores {
            for &b in &unimportant {
                if a > b {
                    wins += 1.0;
                } else if a == b {
                    wins += 0.5;
                }
            }
        }
        Some(wins / (important_scores.len() * unimportant.len()) as f64)
    };

    Ok(SelectionMetrics { threshold, precision, recall, auc })
}
