//! Command implementations behind the `dmmtl` binary: simulate, train,
//! evaluate, tune, explain.
//!
//! Every command is a pure function of (config, input files, seed): output
//! files contain no timestamps and rerunning a command reproduces them
//! byte-for-byte. Reports are plain CSV; the checkpoint is the one JSON
//! artifact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::baselines::linear_predictions;
use crate::checkpoint::{load_checkpoint, save_checkpoint, SavedModel};
use crate::config::RunConfig;
use crate::data::{
    generate, load_csv, load_truth_sidecar, save_csv, split_and_normalize, Dataset,
};
use crate::diagnostics::{
    global_importance, local_importance, mean_defined, relative_rmse, rmse_quantiles,
};
use crate::error::{Error, Result};
use crate::losses::TrainConfig;
use crate::model::{predict, ParameterSet};
use crate::optimizer::{train, train_resumed};
use crate::rng::{Rng, Stream};

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

/// Format an optional metric, `NA` for undefined.
fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".to_string(),
    }
}

/// Resolve the configured data source into a raw dataset.
pub fn resolve_dataset(cfg: &RunConfig) -> Result<Dataset> {
    if let Some(g) = &cfg.generator {
        return generate(&g.to_spec(cfg.seed)?);
    }
    if let Some(d) = &cfg.data {
        let mut ds = load_csv(&d.manifest, &d.csv)?;
        if let Some(truth) = &d.truth {
            ds.truth = Some(load_truth_sidecar(truth)?);
        }
        return Ok(ds);
    }
    Err(Error::Config("config has no data source".into()))
}

/// Resolve, split, and normalize with training-split statistics.
pub fn prepare_splits(cfg: &RunConfig) -> Result<(Dataset, Dataset, Dataset)> {
    let ds = resolve_dataset(cfg)?;
    split_and_normalize(&ds, cfg.split.fractions(), cfg.seed)
}

/// Generate the configured synthetic dataset and write the CSV + manifest
/// (+ truth sidecar) triple into the output directory.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<String> {
    let gen = cfg
        .generator
        .as_ref()
        .ok_or_else(|| Error::Config("simulate needs a [generator] block".into()))?;
    let spec = gen.to_spec(cfg.seed)?;
    let ds = generate(&spec)?;
    ensure_out_dir(cfg)?;
    let data_path = cfg.out.join("data.csv");
    let manifest_path = cfg.out.join("manifest.csv");
    let truth_path = cfg.out.join("truth.json");
    save_csv(&ds, &data_path, &manifest_path, Some(&truth_path))?;

    let mut summary = String::new();
    writeln!(summary, "case {} dataset: {} samples, {} stages", spec.case.id(), ds.len(), spec.stages)
        .unwrap();
    writeln!(
        summary,
        "per stage: {} inputs ({} unimportant), {} outputs; noise std {}",
        spec.inputs_per_stage,
        match spec.case {
            crate::data::BenchmarkCase::SensorGroups => spec.unimportant * spec.groups,
            _ => spec.unimportant,
        },
        spec.outputs_per_stage,
        spec.noise_std
    )
    .unwrap();
    writeln!(summary, "wrote {}", data_path.display()).unwrap();
    writeln!(summary, "wrote {}", manifest_path.display()).unwrap();
    writeln!(summary, "wrote {}", truth_path.display()).unwrap();
    Ok(summary)
}

fn checkpoint_params(model: SavedModel) -> Result<(ParameterSet, usize)> {
    match model {
        SavedModel::Dmmtl { params, epochs_trained } => Ok((params, epochs_trained)),
        SavedModel::Linear { .. } => {
            Err(Error::Argument("this command needs a stage-chain model checkpoint".into()))
        }
    }
}

/// Train on the configured data and write checkpoint, per-epoch log, and a
/// final metrics summary.
pub fn cmd_train(cfg: &RunConfig, resume: Option<&Path>) -> Result<String> {
    let (train_ds, val_ds, test_ds) = prepare_splits(cfg)?;
    let train_cfg: TrainConfig = cfg.train.to_train_config(cfg.seed);

    let (params, mut report) = match resume {
        None => {
            let topology = cfg.model_topology(
                train_ds.topology.input_widths.clone(),
                train_ds.topology.output_widths.clone(),
            )?;
            train(&train_ds, &val_ds, &topology, &train_cfg)?
        }
        Some(path) => {
            let (initial, epochs_done) = checkpoint_params(load_checkpoint(path)?)?;
            if initial.topology().input_widths != train_ds.topology.input_widths
                || initial.topology().output_widths != train_ds.topology.output_widths
            {
                return Err(Error::Shape(
                    "checkpoint topology does not match the configured dataset".into(),
                ));
            }
            train_resumed(&train_ds, &val_ds, initial, &train_cfg, epochs_done)?
        }
    };

    ensure_out_dir(cfg)?;
    let ckpt_path = cfg.out.join("checkpoint.json");
    let epochs_trained = report.start_epoch + report.objective_history.len();
    save_checkpoint(&ckpt_path, &SavedModel::Dmmtl { params: params.clone(), epochs_trained })?;
    report.checkpoint = Some(ckpt_path.display().to_string());

    let mut log = String::from("epoch,objective,val_rmse\n");
    for (i, (obj, val)) in
        report.objective_history.iter().zip(&report.val_rmse_history).enumerate()
    {
        writeln!(log, "{},{},{}", report.start_epoch + i, obj, val).unwrap();
    }
    write_file(&cfg.out.join("train_log.csv"), &log)?;

    // Final metrics on the test split.
    let preds: Result<Vec<_>> = test_ds.samples.iter().map(|s| predict(&params, &s.inputs)).collect();
    let targets: Vec<_> = test_ds.samples.iter().map(|s| s.outputs.clone()).collect();
    let per_output = relative_rmse(&targets, &preds?, &train_ds.output_means())?;
    let test_rmse = mean_defined(&per_output);

    let mut summary = String::from("metric,value\n");
    writeln!(summary, "epochs_trained,{epochs_trained}").unwrap();
    writeln!(summary, "restarts,{}", report.restarts).unwrap();
    writeln!(summary, "final_objective,{}", report.objective_history.last().unwrap()).unwrap();
    writeln!(summary, "final_val_rmse,{}", report.val_rmse_history.last().unwrap()).unwrap();
    writeln!(summary, "test_rmse_mean,{}", fmt_opt(test_rmse)).unwrap();
    write_file(&cfg.out.join("train_summary.csv"), &summary)?;

    let mut text = String::new();
    writeln!(text, "trained {epochs_trained} epochs ({} restarts)", report.restarts).unwrap();
    writeln!(text, "final objective {}", report.objective_history.last().unwrap()).unwrap();
    writeln!(text, "validation rmse {}", report.val_rmse_history.last().unwrap()).unwrap();
    writeln!(text, "test rmse {}", fmt_opt(test_rmse)).unwrap();
    writeln!(text, "wrote {}", ckpt_path.display()).unwrap();
    Ok(text)
}

/// Predictions of a saved model on a dataset, in normalized space.
fn model_predictions(model: &SavedModel, ds: &Dataset) -> Result<Vec<Vec<Vec<f64>>>> {
    match model {
        SavedModel::Dmmtl { params, .. } => {
            if params.topology().input_widths != ds.topology.input_widths
                || params.topology().output_widths != ds.topology.output_widths
            {
                return Err(Error::Shape(
                    "checkpoint topology does not match the configured dataset".into(),
                ));
            }
            ds.samples.iter().map(|s| predict(params, &s.inputs)).collect()
        }
        SavedModel::Linear { per_stage, .. } => linear_predictions(per_stage, ds),
    }
}

/// Evaluate a checkpoint on the configured test split: per-output relative
/// RMSE, its quantiles, and a threshold sweep of identified-output counts.
pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path) -> Result<String> {
    let (train_ds, _val_ds, test_ds) = prepare_splits(cfg)?;
    let model = load_checkpoint(checkpoint)?;
    let preds = model_predictions(&model, &test_ds)?;
    let targets: Vec<_> = test_ds.samples.iter().map(|s| s.outputs.clone()).collect();
    let train_means = train_ds.output_means();
    let per_output = relative_rmse(&targets, &preds, &train_means)?;

    // The naive train-mean predictor, evaluated through the same pipeline;
    // exactly 1 wherever defined.
    let naive_preds: Vec<Vec<Vec<f64>>> = test_ds.samples.iter().map(|_| train_means.clone()).collect();
    let naive = relative_rmse(&targets, &naive_preds, &train_means)?;

    ensure_out_dir(cfg)?;
    let mut table = String::from("stage,output,rmse,naive_rmse\n");
    for (k, row) in per_output.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            writeln!(table, "{k},{j},{},{}", fmt_opt(*v), fmt_opt(naive[k][j])).unwrap();
        }
    }
    write_file(&cfg.out.join("rmse_per_output.csv"), &table)?;

    let quantiles = rmse_quantiles(&per_output, &cfg.evaluate.quantiles)?;
    let mut qtable = String::from("level,value\n");
    for (l, q) in cfg.evaluate.quantiles.iter().zip(&quantiles) {
        writeln!(qtable, "{l},{q}").unwrap();
    }
    write_file(&cfg.out.join("rmse_quantiles.csv"), &qtable)?;

    let eb = &cfg.evaluate;
    let steps = ((eb.threshold_end - eb.threshold_start) / eb.threshold_step).round() as usize;
    let mut sweep = String::from("threshold,identified_outputs\n");
    for i in 0..=steps {
        let threshold = eb.threshold_start + eb.threshold_step * i as f64;
        let count = per_output
            .iter()
            .flat_map(|row| row.iter())
            .filter(|v| matches!(v, Some(x) if *x < threshold))
            .count();
        writeln!(sweep, "{threshold},{count}").unwrap();
    }
    write_file(&cfg.out.join("rmse_threshold_counts.csv"), &sweep)?;

    let mut text = String::new();
    writeln!(text, "test rmse {}", fmt_opt(mean_defined(&per_output))).unwrap();
    for (l, q) in cfg.evaluate.quantiles.iter().zip(&quantiles) {
        writeln!(text, "quantile {l}: {q}").unwrap();
    }
    writeln!(text, "wrote {}", cfg.out.join("rmse_per_output.csv").display()).unwrap();
    Ok(text)
}

#[derive(Debug, Clone)]
struct Trial {
    hidden: usize,
    lambda_x: f64,
    lambda: f64,
    gamma: f64,
    prox_step: f64,
    train_seed: u64,
}

#[derive(Debug)]
struct TrialOutcome {
    trial: Trial,
    val_sse: Option<f64>,
    error: Option<String>,
}

/// Randomized hyperparameter search: independent training runs with
/// parameters sampled from the configured ranges, scored by validation SSE.
pub fn cmd_tune(cfg: &RunConfig, jobs: usize) -> Result<String> {
    let tune = cfg.tune.as_ref().ok_or_else(|| Error::Config("tune needs a [tune] block".into()))?;
    let (train_ds, val_ds, _test_ds) = prepare_splits(cfg)?;

    // Sample every trial up front from the tuner stream so results do not
    // depend on scheduling.
    let mut rng = Rng::substream(cfg.seed, Stream::Tuner);
    let trials: Vec<Trial> = (0..tune.trials)
        .map(|_| Trial {
            hidden: rng.next_int_range(tune.hidden[0], tune.hidden[1]),
            lambda_x: rng.next_log_uniform(tune.lambda_x[0], tune.lambda_x[1]),
            lambda: rng.next_log_uniform(tune.lambda[0], tune.lambda[1]),
            gamma: rng.next_log_uniform(tune.gamma[0], tune.gamma[1]),
            prox_step: rng.next_log_uniform(tune.prox_step[0], tune.prox_step[1]),
            train_seed: rng.next_u64(),
        })
        .collect();

    let outcomes: Vec<Mutex<Option<TrialOutcome>>> =
        (0..trials.len()).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(trials.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= trials.len() {
                    break;
                }
                let trial = trials[i].clone();
                let outcome = run_trial(cfg, &train_ds, &val_ds, &trial);
                *outcomes[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    let outcomes: Vec<TrialOutcome> =
        outcomes.into_iter().map(|m| m.into_inner().unwrap().expect("trial ran")).collect();

    ensure_out_dir(cfg)?;
    let mut table = String::from("trial,hidden,lambda_x,lambda,gamma,prox_step,val_sse,status\n");
    for (i, o) in outcomes.iter().enumerate() {
        writeln!(
            table,
            "{i},{},{},{},{},{},{},{}",
            o.trial.hidden,
            o.trial.lambda_x,
            o.trial.lambda,
            o.trial.gamma,
            o.trial.prox_step,
            fmt_opt(o.val_sse),
            if o.error.is_none() { "ok" } else { "failed" }
        )
        .unwrap();
    }
    write_file(&cfg.out.join("tune_trials.csv"), &table)?;

    let best = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.val_sse.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let (best_idx, best_sse) = best.ok_or_else(|| {
        Error::Convergence(format!(
            "all {} tuning trials failed: {}",
            outcomes.len(),
            outcomes[0].error.as_deref().unwrap_or("unknown")
        ))
    })?;
    let bt = &outcomes[best_idx].trial;
    let best_toml = format!(
        "# best of {} trials, validation sse {}\n[model]\nhidden = {}\n\n[train]\nlambda_x = {}\nlambda = {}\ngamma = {}\nprox_step = {}\n",
        outcomes.len(),
        best_sse,
        bt.hidden,
        bt.lambda_x,
        bt.lambda,
        bt.gamma,
        bt.prox_step
    );
    write_file(&cfg.out.join("tune_best.toml"), &best_toml)?;

    let mut text = String::new();
    writeln!(text, "ran {} trials ({workers} workers)", outcomes.len()).unwrap();
    writeln!(
        text,
        "best trial {best_idx}: hidden {}, lambda_x {}, lambda {}, gamma {}, prox_step {}, val sse {best_sse}",
        bt.hidden, bt.lambda_x, bt.lambda, bt.gamma, bt.prox_step
    )
    .unwrap();
    writeln!(text, "wrote {}", cfg.out.join("tune_trials.csv").display()).unwrap();
    Ok(text)
}

fn run_trial(cfg: &RunConfig, train_ds: &Dataset, val_ds: &Dataset, trial: &Trial) -> TrialOutcome {
    let result = (|| -> Result<f64> {
        let topology = cfg.model_topology(
            train_ds.topology.input_widths.clone(),
            train_ds.topology.output_widths.clone(),
        )?;
        let topology = crate::model::StageTopology::new(
            topology.input_widths.clone(),
            topology.output_widths.clone(),
            trial.hidden,
            topology.transition_depth,
            topology.emission_depth,
            topology.feed_prev_outputs,
        )?;
        let mut tc = cfg.train.to_train_config(trial.train_seed);
        tc.lambda_x = trial.lambda_x;
        tc.lambda = trial.lambda;
        tc.gamma = trial.gamma;
        tc.prox_step = trial.prox_step;
        let (params, _) = train(train_ds, val_ds, &topology, &tc)?;
        let mut sse = 0.0;
        for s in &val_ds.samples {
            let preds = predict(&params, &s.inputs)?;
            for (ys, ps) in s.outputs.iter().zip(&preds) {
                for (y, p) in ys.iter().zip(ps) {
                    sse += (y - p).powi(2);
                }
            }
        }
        Ok(sse)
    })();
    match result {
        Ok(v) => TrialOutcome { trial: trial.clone(), val_sse: Some(v), error: None },
        Err(e) => TrialOutcome { trial: trial.clone(), val_sse: None, error: Some(e.to_string()) },
    }
}

/// Importance reports: global column-norm scores always, plus local
/// gradient-based scores for a chosen target over test samples (optionally a
/// subset by sample index).
pub fn cmd_explain(
    cfg: &RunConfig,
    checkpoint: &Path,
    target: Option<(usize, usize)>,
    sample_ids: Option<&[usize]>,
) -> Result<String> {
    let (_train_ds, _val_ds, test_ds) = prepare_splits(cfg)?;
    let (params, _) = checkpoint_params(load_checkpoint(checkpoint)?)?;
    if params.topology().input_widths != test_ds.topology.input_widths
        || params.topology().output_widths != test_ds.topology.output_widths
    {
        return Err(Error::Shape("checkpoint topology does not match the configured dataset".into()));
    }

    ensure_out_dir(cfg)?;
    let global = global_importance(&params);
    let mut table = String::from("stage,input,score\n");
    for (k, i, s) in global.entries() {
        writeln!(table, "{k},{i},{s}").unwrap();
    }
    write_file(&cfg.out.join("global_importance.csv"), &table)?;

    let mut text = String::new();
    writeln!(text, "wrote {}", cfg.out.join("global_importance.csv").display()).unwrap();
    let mut top_table = String::from("target_stage,target_output,rank,stage,input,score\n");
    if let Some((p, q)) = target {
        let inputs: Vec<Vec<Vec<f64>>> = match sample_ids {
            None => test_ds.samples.iter().map(|s| s.inputs.clone()).collect(),
            Some(ids) => ids
                .iter()
                .map(|&i| {
                    test_ds
                        .samples
                        .get(i)
                        .map(|s| s.inputs.clone())
                        .ok_or_else(|| Error::Argument(format!("sample id {i} out of range")))
                })
                .collect::<Result<_>>()?,
        };
        let local = local_importance(&params, &inputs, (p, q))?;
        let mut ltable = String::from("stage,input,score\n");
        for (k, i, s) in local.entries() {
            writeln!(ltable, "{k},{i},{s}").unwrap();
        }
        let local_path = cfg.out.join(format!("local_importance_{p}_{q}.csv"));
        write_file(&local_path, &ltable)?;
        for (rank, (k, i, s)) in local.top(3).into_iter().enumerate() {
            writeln!(top_table, "{p},{q},{},{k},{i},{s}", rank + 1).unwrap();
        }
        writeln!(text, "wrote {}", local_path.display()).unwrap();
        writeln!(text, "top inputs for output {p}:{q}:").unwrap();
        for (rank, (k, i, s)) in local.top(3).into_iter().enumerate() {
            writeln!(text, "  {}. stage {k} input {i} (score {s})", rank + 1).unwrap();
        }
    } else {
        // Global-only report: rank by column norm.
        for (rank, (k, i, s)) in global.top(3).into_iter().enumerate() {
            writeln!(top_table, "NA,NA,{},{k},{i},{s}", rank + 1).unwrap();
        }
    }
    write_file(&cfg.out.join("top_inputs.csv"), &top_table)?;
    Ok(text)
}

/// Convenience used by tests: run simulate -> train -> evaluate into one
/// output directory and return the three summaries.
pub fn pipeline(cfg: &RunConfig) -> Result<(String, String, String)> {
    let sim = cmd_simulate(cfg)?;
    let tr = cmd_train(cfg, None)?;
    let ckpt: PathBuf = cfg.out.join("checkpoint.json");
    let ev = cmd_evaluate(cfg, &ckpt)?;
    Ok((sim, tr, ev))
}
