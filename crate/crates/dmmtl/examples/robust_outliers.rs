//! Robust training: corrupt a slice of the *training* quality measurements
//! with gross outliers and compare squared-error training against the robust
//! loss, whose per-observation outlier variables absorb the corruption. Both
//! models are scored on clean held-out data.
//!
//! ```bash
//! cargo run --example robust_outliers
//! ```

use dmmtl::data::{apply_normalization, generate, normalize, split, GeneratorSpec};
use dmmtl::diagnostics::{mean_defined, relative_rmse};
use dmmtl::losses::{LossKind, TrainConfig};
use dmmtl::model::{predict, StageTopology};
use dmmtl::optimizer::train;

fn main() -> dmmtl::Result<()> {
    let mut spec = GeneratorSpec::case1();
    spec.stages = 5;
    spec.inputs_per_stage = 30;
    spec.outputs_per_stage = 3;
    spec.unimportant = 6;
    spec.samples = 800;
    spec.seed = 8;
    let ds = generate(&spec)?;

    let (mut train_raw, val_raw, test_raw) = split(&ds, (0.6, 0.2, 0.2), spec.seed)?;

    // Corrupt ~8% of training samples with large shifts on one output each.
    // Validation and test stay clean.
    let mut corrupted = 0usize;
    for (n, sample) in train_raw.samples.iter_mut().enumerate() {
        if n % 12 == 0 {
            let k = n % spec.stages;
            let j = n % spec.outputs_per_stage;
            let sign = if n % 24 == 0 { 1.0 } else { -1.0 };
            sample.outputs[k][j] += sign * 25.0;
            corrupted += 1;
        }
    }
    println!(
        "corrupted {corrupted} of {} training samples with gross output shifts",
        train_raw.len()
    );

    let (train_ds, stats) = normalize(&train_raw)?;
    let val_ds = apply_normalization(&val_raw, &stats);
    let test_ds = apply_normalization(&test_raw, &stats);

    let topology = StageTopology::new(
        train_ds.topology.input_widths.clone(),
        train_ds.topology.output_widths.clone(),
        12,
        1,
        1,
        false,
    )?;
    let base = TrainConfig {
        lambda_x: 0.02,
        lambda: 1e-4,
        gamma: 1.0, // residuals beyond gamma/2 are absorbed by outlier variables
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

    let targets: Vec<_> = test_ds.samples.iter().map(|s| s.outputs.clone()).collect();
    let means = train_ds.output_means();
    for kind in [LossKind::Sse, LossKind::Huber] {
        let config = TrainConfig { loss_kind: kind, ..base.clone() };
        let (params, report) = train(&train_ds, &val_ds, &topology, &config)?;
        let preds: dmmtl::Result<Vec<_>> =
            test_ds.samples.iter().map(|s| predict(&params, &s.inputs)).collect();
        let per = relative_rmse(&targets, &preds?, &means)?;
        println!(
            "{:>5}: final val rmse {:.4}, clean-test rmse {:.4}",
            match kind {
                LossKind::Sse => "sse",
                LossKind::Huber => "huber",
            },
            report.val_rmse_history.last().unwrap(),
            mean_defined(&per).unwrap()
        );
    }
    println!("(the robust loss keeps the corrupted measurements from dragging the");
    println!(" fit, so the clean-data error stays close to the uncorrupted run)");
    Ok(())
}
