//! Generate a synthetic multistage production line and export it as a
//! CSV + manifest + truth-sidecar triple.
//!
//! ```bash
//! cargo run --example simulate_line
//! ```

use dmmtl::data::{generate, save_csv, GeneratorSpec};

fn main() -> dmmtl::Result<()> {
    // The default unified-chain benchmark: 9 stages, 90 process sensors and
    // 6 quality sensors per stage, the last 15 sensors of each stage wired
    // to nothing.
    let mut spec = GeneratorSpec::case1();
    spec.samples = 500;
    spec.seed = 7;
    let ds = generate(&spec)?;

    let truth = ds.truth.as_ref().expect("generator retains ground truth");
    println!(
        "generated {} samples across {} stages ({} inputs + {} outputs per stage)",
        ds.len(),
        spec.stages,
        spec.inputs_per_stage,
        spec.outputs_per_stage
    );
    println!(
        "each stage carries {} deliberately dead sensors: {:?} ...",
        spec.unimportant,
        &truth.masked_pairs()[..4]
    );

    let dir = std::env::temp_dir().join("dmmtl-simulate-line");
    std::fs::create_dir_all(&dir)?;
    let data = dir.join("data.csv");
    let manifest = dir.join("manifest.csv");
    let sidecar = dir.join("truth.json");
    save_csv(&ds, &data, &manifest, Some(&sidecar))?;
    println!("wrote {}", data.display());
    println!("wrote {}", manifest.display());
    println!("wrote {}", sidecar.display());

    // A sample's stage-4 outputs, for flavor.
    let s = &ds.samples[0];
    println!("sample 0, stage 4 quality readings: {:?}", s.outputs[4]);
    Ok(())
}
