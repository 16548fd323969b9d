//! Bring your own data: a manifest maps CSV columns to (stage, role), the
//! loader validates everything strictly, and exports are lossless.
//!
//! ```bash
//! cargo run --example csv_ingestion
//! ```

use dmmtl::data::{load_csv, normalize, save_csv, split};

fn main() -> dmmtl::Result<()> {
    let dir = std::env::temp_dir().join("dmmtl-csv-example");
    std::fs::create_dir_all(&dir)?;
    let manifest = dir.join("manifest.csv");
    let data = dir.join("line.csv");

    // A two-stage line: extrusion (3 process sensors, 1 quality check) and
    // winding (2 process sensors, 2 quality checks).
    std::fs::write(
        &manifest,
        "name,stage,role\n\
         melt_temp,0,input\n\
         screw_speed,0,input\n\
         die_pressure,0,input\n\
         sheet_thickness,0,output\n\
         tension,1,input\n\
         roll_speed,1,input\n\
         wound_diameter,1,output\n\
         edge_offset,1,output\n",
    )?;
    std::fs::write(
        &data,
        "melt_temp,screw_speed,die_pressure,sheet_thickness,tension,roll_speed,wound_diameter,edge_offset\n\
         231.4,88.0,1.92,0.510,12.1,3.30,201.0,0.4\n\
         228.9,91.2,1.88,0.495,11.8,3.42,199.2,0.7\n\
         233.0,87.5,1.95,0.522,12.4,3.28,202.5,0.2\n\
         230.1,90.0,1.90,0.505,12.0,3.35,200.8,0.5\n\
         229.5,89.1,1.87,0.498,11.9,3.38,199.9,0.6\n\
         232.2,88.8,1.93,0.515,12.2,3.31,201.7,0.3\n",
    )?;

    let ds = load_csv(&manifest, &data)?;
    println!(
        "loaded {} samples; stage widths: inputs {:?}, outputs {:?}",
        ds.len(),
        ds.topology.input_widths,
        ds.topology.output_widths
    );

    // The usual pipeline pieces work on ingested data too.
    let (train, rest, _test) = split(&ds, (0.5, 0.25, 0.25), 1)?;
    let (train_normed, stats) = normalize(&train)?;
    println!(
        "split into {}/{} and z-scored with training statistics ({} warnings)",
        train.len(),
        rest.len(),
        stats.warnings.len()
    );
    println!("first normalized sample, stage 0 inputs: {:?}", train_normed.samples[0].inputs[0]);

    // Export round trip is lossless.
    let out_data = dir.join("roundtrip.csv");
    let out_manifest = dir.join("roundtrip_manifest.csv");
    save_csv(&ds, &out_data, &out_manifest, None)?;
    let again = load_csv(&out_manifest, &out_data)?;
    assert_eq!(ds.samples, again.samples);
    println!("export -> import reproduced every value exactly");

    // Strictness: unmapped columns are rejected with a named error.
    std::fs::write(&data, "melt_temp,mystery\n1.0,2.0\n")?;
    match load_csv(&manifest, &data) {
        Err(e) => println!("strict ingestion rejects undeclared columns: {e}"),
        Ok(_) => unreachable!("unmapped column must fail"),
    }
    Ok(())
}
