//! Block-coordinate training loop.
//!
//! Each iteration draws a mini-batch and alternates three updates: the
//! closed-form outlier update, the proximal group-lasso update of the
//! input-weight columns, and a plain gradient step on everything else.
//! Gradients are computed once per iteration, at the current parameters and
//! the freshly updated outliers, and reused by both the proximal and the
//! gradient steps. One epoch is a shuffled pass over the training split.

use crate::data::Dataset;
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::gradients::{backprop_into, ParamGrads};
use crate::linalg::{soft_threshold_block, soft_threshold_scalar};
use crate::losses::{group_penalty, LossKind, OutlierState, TrainConfig};
use crate::model::{forward_teacher, init_params_stream, predict, Act, ParameterSet, StageTopology};
use crate::rng::{Rng, Stream};

/// Per-epoch training history.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Full-train objective after each epoch.
    pub objective_history: Vec<f64>,
    /// Validation relative RMSE (mean over outputs) after each epoch.
    pub val_rmse_history: Vec<f64>,
    pub restarts: usize,
    /// First epoch index of this run (nonzero when resuming).
    pub start_epoch: usize,
    /// Where the final parameters were saved, when the caller persisted them.
    pub checkpoint: Option<String>,
}

/// Closed-form outlier update: each variable is the scalar soft threshold of
/// its residual at `gamma / 2`. Squared-error mode keeps all outliers at
/// exactly zero.
pub fn update_outliers(residuals: &[Vec<Vec<f64>>], gamma: f64, kind: LossKind) -> OutlierState {
    let values = residuals
        .iter()
        .map(|per_stage| {
            per_stage
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&r| match kind {
                            LossKind::Sse => 0.0,
                            LossKind::Huber => {
                                soft_threshold_scalar(r, gamma / 2.0).expect("gamma > 0")
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    OutlierState { values }
}

/// Proximal update of every input-weight column: a gradient step scaled by
/// `L/(L+lambda)` followed by a block soft threshold at
/// `lambda_x/(L+lambda)`, with `L = 1/prox_step`. Columns whose scaled norm
/// falls below the threshold become exactly zero.
pub fn prox_update_wx(
    params: &mut ParameterSet,
    grads: &ParamGrads,
    lambda_x: f64,
    lambda: f64,
    prox_step: f64,
) {
    debug_assert!(prox_step > 0.0);
    let scale = 1.0 / (1.0 + prox_step * lambda); // L/(L+lambda)
    let threshold = prox_step * lambda_x / (1.0 + prox_step * lambda); // lambda_x/(L+lambda)
    for (stage, gstage) in params.stages_mut().iter_mut().zip(grads.values().stages()) {
        let w = &mut stage.input_weights;
        let g = &gstage.input_weights;
        for c in 0..w.cols() {
            let u: Vec<f64> = (0..w.rows())
                .map(|r| scale * (w.get(r, c) - prox_step * g.get(r, c)))
                .collect();
            let shrunk = soft_threshold_block(&u, threshold).expect("threshold >= 0");
            w.set_column(c, &shrunk);
        }
    }
}

/// Plain gradient descent on every parameter except the input-weight columns
/// (those belong to [`prox_update_wx`]), including the L2 penalty gradient.
pub fn sgd_step(params: &mut ParameterSet, grads: &ParamGrads, step: f64, lambda: f64) {
    debug_assert!(step > 0.0);
    params.zip_values_mut_except_input_weights(grads.values(), |theta, g| {
        *theta -= step * (g + lambda * *theta);
    });
}

/// Objective of the decomposed loss on `samples`, with the outliers at their
/// analytic optimum: the mean robust data cost plus penalties. With
/// squared-error loss this is the mean SSE plus penalties.
pub fn evaluate_objective(
    params: &ParameterSet,
    samples: &[crate::data::Sample],
    config: &TrainConfig,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Argument("objective over an empty sample set".into()));
    }
    let mut data = 0.0;
    for s in samples {
        let trace = forward_teacher(params, &s.inputs, &s.outputs)?;
        for (k, st) in trace.stages.iter().enumerate() {
            for (j, &pred) in st.prediction.iter().enumerate() {
                let r = s.outputs[k][j] - pred;
                match config.loss_kind {
                    LossKind::Sse => data += r * r,
                    LossKind::Huber => {
                        let a = soft_threshold_scalar(r, config.gamma / 2.0).expect("gamma > 0");
                        data += (r - a).powi(2) + config.gamma * a.abs();
                    }
                }
            }
        }
    }
    data /= samples.len() as f64;
    Ok(data + group_penalty(params, config.lambda_x) + 0.5 * config.lambda * params.l2_norm_sq())
}

/// Mean relative RMSE of self-fed predictions on a validation split, using
/// the training-split output means as the naive reference.
fn validation_rmse(params: &ParameterSet, val: &Dataset, train_means: &[Vec<f64>]) -> Result<f64> {
    let preds: Result<Vec<Vec<Vec<f64>>>> =
        val.samples.iter().map(|s| predict(params, &s.inputs)).collect();
    let preds = preds?;
    let targets: Vec<Vec<Vec<f64>>> = val.samples.iter().map(|s| s.outputs.clone()).collect();
    let per_output = diagnostics::relative_rmse(&targets, &preds, train_means)?;
    Ok(diagnostics::mean_defined(&per_output).unwrap_or(f64::NAN))
}

/// Train a fresh model. See [`train_loop`] for the schedule.
pub fn train(
    train_split: &Dataset,
    val_split: &Dataset,
    topology: &StageTopology,
    config: &TrainConfig,
) -> Result<(ParameterSet, TrainReport)> {
    let initial = init_params_stream(topology, Rng::substream(config.seed, Stream::Init));
    train_loop(train_split, val_split, initial, config, 0)
}

/// Continue training from existing parameters; epoch numbering picks up at
/// `start_epoch`.
pub fn train_resumed(
    train_split: &Dataset,
    val_split: &Dataset,
    initial: ParameterSet,
    config: &TrainConfig,
    start_epoch: usize,
) -> Result<(ParameterSet, TrainReport)> {
    train_loop(train_split, val_split, initial, config, start_epoch)
}

fn train_loop(
    train_split: &Dataset,
    val_split: &Dataset,
    mut params: ParameterSet,
    config: &TrainConfig,
    start_epoch: usize,
) -> Result<(ParameterSet, TrainReport)> {
    config.validate()?;
    if train_split.is_empty() {
        return Err(Error::Argument("training split is empty".into()));
    }
    if val_split.is_empty() {
        return Err(Error::Argument("validation split is empty".into()));
    }
    if train_split.norm.is_none() {
        return Err(Error::Argument("training data must be normalized before training".into()));
    }
    let topology = params.topology().clone();
    for ds in [train_split, val_split] {
        if ds.topology.input_widths != topology.input_widths
            || ds.topology.output_widths != topology.output_widths
        {
            return Err(Error::Shape("dataset widths do not match the model topology".into()));
        }
    }

    let n = train_split.len();
    let train_means = train_split.output_means();
    let mut report = TrainReport {
        objective_history: Vec::with_capacity(config.epochs),
        val_rmse_history: Vec::with_capacity(config.epochs),
        restarts: 0,
        start_epoch,
        checkpoint: None,
    };
    let mut shuffle_rng = Rng::substream(config.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = ParamGrads::zeros_like(&params);
    let mut prox_step = config.prox_step;
    let mut best_val = f64::INFINITY;
    let mut best_epoch = start_epoch;

    for epoch_offset in 0..config.epochs {
        let epoch = start_epoch + epoch_offset;
        shuffle_rng.shuffle(&mut order);
        for batch_ids in order.chunks(config.batch_size) {
            let batch_n = batch_ids.len() as f64;

            // Forward every batch sample and collect residuals.
            let mut traces = Vec::with_capacity(batch_ids.len());
            let mut residuals: Vec<Vec<Vec<f64>>> = Vec::with_capacity(batch_ids.len());
            for &i in batch_ids {
                let s = &train_split.samples[i];
                let trace = forward_teacher(&params, &s.inputs, &s.outputs)?;
                let res: Vec<Vec<f64>> = trace
                    .stages
                    .iter()
                    .enumerate()
                    .map(|(k, st)| {
                        st.prediction
                            .iter()
                            .enumerate()
                            .map(|(j, &pred)| s.outputs[k][j] - pred)
                            .collect()
                    })
                    .collect();
                traces.push(trace);
                residuals.push(res);
            }

            // Closed-form outlier update at the current parameters.
            let outliers = update_outliers(&residuals, config.gamma, config.loss_kind);

            // One gradient of the decomposed data term, reused below.
            grads.values_mut().for_each_value_mut(|v| *v = 0.0);
            for (b, trace) in traces.iter().enumerate() {
                let loss_grads: Vec<Vec<f64>> = residuals[b]
                    .iter()
                    .zip(&outliers.values[b])
                    .map(|(rs, avs)| {
                        rs.iter().zip(avs).map(|(&r, &a)| 2.0 * (a - r) / batch_n).collect()
                    })
                    .collect();
                backprop_into(&params, trace, &loss_grads, Act::Sigmoid, &mut grads);
            }

            prox_update_wx(&mut params, &grads, config.lambda_x, config.lambda, prox_step);
            sgd_step(&mut params, &grads, config.sgd_step, config.lambda);
        }

        let objective = evaluate_objective(&params, &train_split.samples, config)?;
        if !objective.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let val = validation_rmse(&params, val_split, &train_means)?;
        if config.adapt_prox {
            if let Some(&prev) = report.objective_history.last() {
                if objective > prev {
                    prox_step *= 0.5;
                }
            }
        }
        report.objective_history.push(objective);
        report.val_rmse_history.push(val);

        if val < best_val - 1e-12 {
            best_val = val;
            best_epoch = epoch;
        } else if val > 1.0
            && epoch - best_epoch >= config.restart_patience
            && report.restarts < config.max_restarts
        {
            report.restarts += 1;
            let stream = Rng::substream(config.seed, Stream::Restart(report.restarts as u64));
            params = init_params_stream(&topology, stream);
            grads = ParamGrads::zeros_like(&params);
            prox_step = config.prox_step;
            best_val = f64::INFINITY;
            best_epoch = epoch;
        }
    }
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{normalize, Dataset, Sample};
    use crate::losses::objective;
    use crate::model::init_params;
    use crate::rng::{Rng, Stream};

    #[test]
    fn outlier_update_cases() {
        let residuals = vec![vec![vec![0.2, 2.0, -2.0]]];
        let out = update_outliers(&residuals, 1.0, LossKind::Huber);
        assert_eq!(out.values[0][0], vec![0.0, 1.5, -1.5]);
        let zeros = update_outliers(&residuals, 1.0, LossKind::Sse);
        assert_eq!(zeros.values[0][0], vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn outliers_vanish_inside_the_dead_zone() {
        let mut rng = Rng::substream(1, Stream::Truth);
        let gamma = 2.0;
        let residuals: Vec<f64> = (0..100).map(|_| rng.next_normal()).collect();
        let out = update_outliers(&[vec![residuals.clone()]], gamma, LossKind::Huber);
        for (r, a) in residuals.iter().zip(&out.values[0][0]) {
            if r.abs() <= gamma / 2.0 {
                assert_eq!(*a, 0.0);
            } else {
                assert!((a - (r - r.signum() * gamma / 2.0)).abs() < 1e-15);
            }
        }
    }

    fn toy_params(seed: u64) -> ParameterSet {
        let topo = StageTopology::new(vec![2, 2], vec![1, 1], 2, 1, 1, false).unwrap();
        init_params(&topo, seed)
    }

    #[test]
    fn prox_fixed_point_without_penalties() {
        let mut p = toy_params(1);
        let before = p.clone();
        let grads = ParamGrads::zeros_like(&p);
        prox_update_wx(&mut p, &grads, 0.0, 0.0, 0.1);
        assert_eq!(p, before);
    }

    #[test]
    fn prox_one_dimensional_soft_threshold() {
        let topo = StageTopology::new(vec![1], vec![1], 1, 1, 1, false).unwrap();
        let mut p = ParameterSet::zeros(&topo);
        p.stages_mut()[0].input_weights.set(0, 0, 1.0);
        let grads = ParamGrads::zeros_like(&p);
        // prox_step = 1 (L = 1), lambda = 0, lambda_x = 0.5: S_{0.5}(1.0) = 0.5
        prox_update_wx(&mut p, &grads, 0.5, 0.0, 1.0);
        assert_eq!(p.stages()[0].input_weights.get(0, 0), 0.5);
    }

    #[test]
    fn prox_zeroes_are_exact() {
        let mut p = toy_params(2);
        let grads = ParamGrads::zeros_like(&p);
        prox_update_wx(&mut p, &grads, 1e6, 0.0, 0.1);
        for stage in p.stages() {
            for &v in stage.input_weights.data() {
                assert_eq!(v, 0.0, "column entries must be exactly zero");
            }
        }
    }

    #[test]
    fn sgd_step_cases() {
        let mut p = toy_params(3);
        let before = p.clone();
        let grads = ParamGrads::zeros_like(&p);
        sgd_step(&mut p, &grads, 0.1, 0.0);
        assert_eq!(p, before, "zero gradients leave parameters unchanged");

        // One step on f(theta) = theta^2 from theta = 1 with step 0.1:
        // gradient 2 theta = 2, so theta moves to 0.8.
        let topo = StageTopology::new(vec![1], vec![1], 1, 1, 1, false).unwrap();
        let mut p = ParameterSet::zeros(&topo);
        p.stages_mut()[0].emission[0].weight.set(0, 0, 1.0);
        let mut g = ParamGrads::zeros_like(&p);
        g.values_mut().stages_mut()[0].emission[0].weight.set(0, 0, 2.0);
        sgd_step(&mut p, &g, 0.1, 0.0);
        assert!((p.stages()[0].emission[0].weight.get(0, 0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sgd_descends_on_a_smooth_quadratic() {
        // f(theta) = theta^2 must not increase under a small step.
        let mut theta = 1.0f64;
        for _ in 0..10 {
            let before = theta * theta;
            theta -= 0.1 * (2.0 * theta);
            assert!(theta * theta <= before + 1e-15);
        }
    }

    fn tiny_dataset(n: usize, seed: u64) -> Dataset {
        let topo = StageTopology::new(vec![3, 3], vec![2, 2], 2, 1, 1, false).unwrap();
        let truth = init_params(&topo, 999);
        let mut rng = Rng::substream(seed, Stream::Sample(7));
        let samples = (0..n)
            .map(|_| {
                let inputs: Vec<Vec<f64>> =
                    (0..2).map(|_| (0..3).map(|_| rng.next_normal()).collect()).collect();
                let mut outputs = crate::model::predict(&truth, &inputs).unwrap();
                for row in &mut outputs {
                    for y in row {
                        *y += rng.next_normal_scaled(0.05);
                    }
                }
                Sample { inputs, outputs }
            })
            .collect();
        Dataset::new(samples, topo).unwrap()
    }

    fn normalized_pair(seed: u64) -> (Dataset, Dataset) {
        let (train, stats) = normalize(&tiny_dataset(48, seed)).unwrap();
        let val = crate::data::apply_normalization(&tiny_dataset(16, seed + 1), &stats);
        (train, val)
    }

    #[test]
    fn training_is_deterministic() {
        let (train_ds, val_ds) = normalized_pair(5);
        let topo = StageTopology::new(vec![3, 3], vec![2, 2], 3, 1, 1, false).unwrap();
        let cfg = TrainConfig { epochs: 6, batch_size: 8, seed: 11, ..TrainConfig::default() };
        let (p1, r1) = train(&train_ds, &val_ds, &topo, &cfg).unwrap();
        let (p2, r2) = train(&train_ds, &val_ds, &topo, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1.objective_history, r2.objective_history);
        assert_eq!(r1.val_rmse_history, r2.val_rmse_history);
    }

    #[test]
    fn history_lengths_match_epochs() {
        let (train_ds, val_ds) = normalized_pair(6);
        let topo = StageTopology::new(vec![3, 3], vec![2, 2], 2, 1, 1, false).unwrap();
        let cfg = TrainConfig { epochs: 4, batch_size: 16, ..TrainConfig::default() };
        let (_, report) = train(&train_ds, &val_ds, &topo, &cfg).unwrap();
        assert_eq!(report.objective_history.len(), 4);
        assert_eq!(report.val_rmse_history.len(), 4);
    }

    #[test]
    fn huge_group_penalty_zeroes_every_column() {
        let (train_ds, val_ds) = normalized_pair(7);
        let topo = StageTopology::new(vec![3, 3], vec![2, 2], 2, 1, 1, false).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 16,
            lambda_x: 1e3,
            ..TrainConfig::default()
        };
        let (params, _) = train(&train_ds, &val_ds, &topo, &cfg).unwrap();
        for stage in params.stages() {
            for &v in stage.input_weights.data() {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn zero_group_penalty_leaves_no_exact_zero_column() {
        let (train_ds, val_ds) = normalized_pair(8);
        let topo = StageTopology::new(vec![3, 3], vec![2, 2], 2, 1, 1, false).unwrap();
        let cfg = TrainConfig { epochs: 3, batch_size: 16, lambda_x: 0.0, ..TrainConfig::default() };
        let (params, _) = train(&train_ds, &val_ds, &topo, &cfg).unwrap();
        for stage in params.stages() {
            for c in 0..stage.input_weights.cols() {
                assert!(stage.input_weights.column_norm(c) > 0.0);
            }
        }
    }

    #[test]
    fn full_batch_training_reduces_to_plain_gradient_descent() {
        // With zero group penalty, squared-error loss, and full batches, one
        // iteration is a gradient step on SSE + L2: the prox with zero
        // threshold is a scaled gradient step on the input weights, and the
        // rest take the plain step. Mirror it independently per epoch.
        let (train_ds, val_ds) = normalized_pair(9);
        let topo = StageTopology::new(vec![3, 3], vec![2, 2], 2, 1, 1, false).unwrap();
        let lambda = 0.01;
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: train_ds.len(),
            lambda_x: 0.0,
            lambda,
            loss_kind: LossKind::Sse,
            sgd_step: 0.05,
            prox_step: 0.1,
            seed: 3,
            ..TrainConfig::default()
        };
        let (trained, _) = train(&train_ds, &val_ds, &topo, &cfg).unwrap();

        let mut mirror = init_params(&topo, cfg.seed);
        let nb = train_ds.len() as f64;
        for _ in 0..cfg.epochs {
            let mut grads = ParamGrads::zeros_like(&mirror);
            for s in &train_ds.samples {
                let trace = forward_teacher(&mirror, &s.inputs, &s.outputs).unwrap();
                let loss_grads: Vec<Vec<f64>> = trace
                    .stages
                    .iter()
                    .enumerate()
                    .map(|(k, st)| {
                        st.prediction
                            .iter()
                            .enumerate()
                            .map(|(j, &pred)| 2.0 * (pred - s.outputs[k][j]) / nb)
                            .collect()
                    })
                    .collect();
                crate::gradients::backprop_into(
                    &mirror,
                    &trace,
                    &loss_grads,
                    Act::Sigmoid,
                    &mut grads,
                );
            }
            // Input weights: scaled gradient step with step 1/(L + lambda).
            let scale = 1.0 / (1.0 + cfg.prox_step * lambda);
            for (stage, gstage) in mirror.stages_mut().iter_mut().zip(grads.values().stages()) {
                for idx in 0..stage.input_weights.data().len() {
                    let w = stage.input_weights.data()[idx];
                    let g = gstage.input_weights.data()[idx];
                    stage.input_weights.data_mut()[idx] = scale * (w - cfg.prox_step * g);
                }
            }
            // Everything else: theta -= c (g + lambda theta).
            mirror.zip_values_mut_except_input_weights(grads.values(), |theta, g| {
                *theta -= cfg.sgd_step * (g + lambda * *theta);
            });
        }

        let mut max_diff = 0.0f64;
        let mut idx = 0;
        trained.for_each_value(|v| {
            let m = mirror.flat_get(idx);
            max_diff = max_diff.max((v - m).abs());
            idx += 1;
        });
        assert!(max_diff <= 1e-10, "max parameter difference {max_diff}");
    }

    #[test]
    fn full_batch_objective_is_monotone_with_small_steps() {
        let (train_ds, val_ds) = normalized_pair(10);
        let topo = StageTopology::new(vec![3, 3], vec![2, 2], 2, 1, 1, false).unwrap();
        let cfg = TrainConfig {
            epochs: 40,
            batch_size: train_ds.len(),
            lambda_x: 0.05,
            lambda: 1e-3,
            loss_kind: LossKind::Huber,
            gamma: 1.0,
            sgd_step: 0.02,
            prox_step: 0.02,
            ..TrainConfig::default()
        };
        let (_, report) = train(&train_ds, &val_ds, &topo, &cfg).unwrap();
        for w in report.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "objective increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn objective_after_outlier_update_reproduces_huber_value() {
        let (train_ds, _) = normalized_pair(11);
        let topo = StageTopology::new(vec![3, 3], vec![2, 2], 2, 1, 1, false).unwrap();
        let params = init_params(&topo, 17);
        let cfg = TrainConfig {
            loss_kind: LossKind::Huber,
            gamma: 0.8,
            lambda_x: 0.1,
            lambda: 0.01,
            ..TrainConfig::default()
        };
        // Analytic-outlier objective.
        let fast = evaluate_objective(&params, &train_ds.samples, &cfg).unwrap();
        // The same thing assembled from the decomposed-objective pieces.
        let residuals: Vec<Vec<Vec<f64>>> = train_ds
            .samples
            .iter()
            .map(|s| {
                let preds = predict(&params, &s.inputs).unwrap();
                s.outputs
                    .iter()
                    .zip(&preds)
                    .map(|(ys, ps)| ys.iter().zip(ps).map(|(y, p)| y - p).collect())
                    .collect()
            })
            .collect();
        let outliers = update_outliers(&residuals, cfg.gamma, cfg.loss_kind);
        let decomposed = objective(&params, &train_ds.samples, &cfg, &outliers).unwrap();
        assert!((fast - decomposed).abs() < 1e-10);

        // And both equal mean Huber cost plus penalties.
        let mut huber_total = 0.0;
        for res in &residuals {
            for row in res {
                for &r in row {
                    huber_total += crate::losses::huber(r, cfg.gamma).unwrap();
                }
            }
        }
        huber_total /= train_ds.len() as f64;
        let with_penalties = huber_total
            + group_penalty(&params, cfg.lambda_x)
            + 0.5 * cfg.lambda * params.l2_norm_sq();
        assert!((fast - with_penalties).abs() < 1e-8);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let topo = StageTopology::new(vec![3, 3], vec![2, 2], 2, 1, 1, false).unwrap();
        let empty = Dataset { samples: vec![], topology: topo.clone(), norm: None, truth: None };
        let (_, val_ds) = normalized_pair(12);
        let cfg = TrainConfig::default();
        assert!(train(&empty, &val_ds, &topo, &cfg).is_err());
    }

    #[test]
    fn outlier_subproblem_matches_derivative_free_minimization() {
        // Per-column surrogate: g.(w - w0) + (L/2)||w - w0||^2
        // + lambda_x ||w|| + (lambda/2)||w||^2, minimized by coordinate-wise
        // golden-section search as an independent oracle.
        let mut rng = Rng::substream(23, Stream::Truth);
        for trial in 0..20 {
            let dim = rng.next_int_range(2, 5);
            let w0: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
            let g: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
            let prox_step = 0.05 + rng.next_f64() * 0.5;
            let lambda_x = rng.next_f64() * 1.5;
            let lambda = rng.next_f64() * 0.5;
            let l = 1.0 / prox_step;

            let surrogate = |w: &[f64]| -> f64 {
                let mut v = 0.0;
                let mut dist = 0.0;
                let mut norm_sq = 0.0;
                for i in 0..dim {
                    v += g[i] * (w[i] - w0[i]);
                    dist += (w[i] - w0[i]).powi(2);
                    norm_sq += w[i] * w[i];
                }
                v + 0.5 * l * dist
                    + lambda_x * norm_sq.sqrt()
                    + 0.5 * lambda * norm_sq
            };

            // Analytic column update via the shared prox routine.
            let topo = StageTopology::new(vec![1], vec![1], dim, 1, 1, false).unwrap();
            let mut p = ParameterSet::zeros(&topo);
            p.stages_mut()[0].input_weights.set_column(0, &w0);
            let mut gr = ParamGrads::zeros_like(&p);
            gr.values_mut().stages_mut()[0].input_weights.set_column(0, &g);
            prox_update_wx(&mut p, &gr, lambda_x, lambda, prox_step);
            let analytic = p.stages()[0].input_weights.column(0);

            // Oracle: cyclic golden-section line searches.
            let mut w = w0.clone();
            for _ in 0..400 {
                let mut moved = 0.0f64;
                for i in 0..dim {
                    let mut lo = w[i] - 5.0;
                    let mut hi = w[i] + 5.0;
                    let phi = 0.5 * (3.0 - 5.0f64.sqrt());
                    for _ in 0..90 {
                        let a = lo + phi * (hi - lo);
                        let b = hi - phi * (hi - lo);
                        let mut wa = w.clone();
                        wa[i] = a;
                        let mut wb = w.clone();
                        wb[i] = b;
                        if surrogate(&wa) < surrogate(&wb) {
                            hi = b;
                        } else {
                            lo = a;
                        }
                    }
                    let next = 0.5 * (lo + hi);
                    moved = moved.max((next - w[i]).abs());
                    w[i] = next;
                }
                if moved < 1e-12 {
                    break;
                }
            }

            let dist: f64 =
                analytic.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(dist < 1e-4, "trial {trial}: prox vs oracle distance {dist}");
        }
    }
}
