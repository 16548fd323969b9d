//! Train the stage-chain model on a synthetic line and evaluate it on held
//! out samples.
//!
//! ```bash
//! cargo run --example train_quality_model
//! ```

use dmmtl::data::{generate, split_and_normalize, GeneratorSpec};
use dmmtl::diagnostics::{mean_defined, per_stage_means, relative_rmse};
use dmmtl::losses::{LossKind, TrainConfig};
use dmmtl::model::{predict, StageTopology};
use dmmtl::optimizer::train;

fn main() -> dmmtl::Result<()> {
    let mut spec = GeneratorSpec::case1();
    spec.stages = 6;
    spec.inputs_per_stage = 40;
    spec.outputs_per_stage = 4;
    spec.unimportant = 8;
    spec.samples = 900;
    spec.seed = 3;
    let ds = generate(&spec)?;
    let (train_ds, val_ds, test_ds) = split_and_normalize(&ds, (0.6, 0.2, 0.2), spec.seed)?;
    println!(
        "splits: {} train / {} val / {} test",
        train_ds.len(),
        val_ds.len(),
        test_ds.len()
    );

    let topology = StageTopology::new(
        train_ds.topology.input_widths.clone(),
        train_ds.topology.output_widths.clone(),
        16, // learned latent width
        1,
        1,
        false,
    )?;
    let config = TrainConfig {
        lambda_x: 0.02,
        lambda: 1e-4,
        gamma: 1.0,
        loss_kind: LossKind::Sse,
        prox_step: 0.1,
        sgd_step: 0.05,
        batch_size: 64,
        epochs: 150,
        seed: spec.seed,
        restart_patience: 40,
        max_restarts: 2,
        adapt_prox: false,
    };
    let (params, report) = train(&train_ds, &val_ds, &topology, &config)?;

    println!("epoch  objective  val_rmse");
    for (i, (obj, val)) in
        report.objective_history.iter().zip(&report.val_rmse_history).enumerate()
    {
        if i % 25 == 0 || i == report.objective_history.len() - 1 {
            println!("{i:>5}  {obj:>9.4}  {val:>8.4}");
        }
    }

    let preds: dmmtl::Result<Vec<_>> =
        test_ds.samples.iter().map(|s| predict(&params, &s.inputs)).collect();
    let targets: Vec<_> = test_ds.samples.iter().map(|s| s.outputs.clone()).collect();
    let per_output = relative_rmse(&targets, &preds?, &train_ds.output_means())?;
    println!(
        "test relative RMSE: {:.4} (1 = no better than predicting the training mean)",
        mean_defined(&per_output).unwrap()
    );
    let per_stage: Vec<String> = per_stage_means(&per_output)
        .iter()
        .map(|v| format!("{:.3}", v.unwrap()))
        .collect();
    println!("per stage: {}", per_stage.join("  "));
    Ok(())
}
