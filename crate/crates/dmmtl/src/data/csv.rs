//! CSV dataset exchange: a manifest describing each column, a data file with
//! one sample per row, and an optional truth sidecar for synthetic data.
//!
//! Parsing is strict: every data column must be declared in the manifest,
//! every manifest column must exist in the data, all cells must be plain
//! decimal numbers, and rows must be rectangular. Missing values are not
//! supported; errors carry row/column locations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, GroundTruth, Sample, SovModel};
use crate::error::{Error, Result};
use crate::model::StageTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Input,
    Output,
}

/// One manifest record: a named CSV column assigned to a stage and role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub stage: usize,
    pub role: ColumnRole,
}

/// Write a manifest (`name,stage,role` per line with a header).
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::from("name,stage,role\n");
    for e in entries {
        let role = match e.role {
            ColumnRole::Input => "input",
            ColumnRole::Output => "output",
        };
        writeln!(out, "{},{},{}", e.name, e.stage, role).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read manifest {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "name,stage,role")) => {}
        _ => {
            return Err(Error::Data(format!(
                "manifest {} must start with header 'name,stage,role'",
                path.display()
            )))
        }
    }
    let mut entries = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Data(format!(
                "manifest line {}: expected 3 fields, got {}",
                lineno + 1,
                parts.len()
            )));
        }
        let stage: usize = parts[1].parse().map_err(|_| {
            Error::Data(format!("manifest line {}: bad stage index '{}'", lineno + 1, parts[1]))
        })?;
        let role = match parts[2] {
            "input" => ColumnRole::Input,
            "output" => ColumnRole::Output,
            other => {
                return Err(Error::Data(format!(
                    "manifest line {}: role must be 'input' or 'output', got '{other}'",
                    lineno + 1
                )))
            }
        };
        entries.push(ManifestEntry { name: parts[0].to_string(), stage, role });
    }
    if entries.is_empty() {
        return Err(Error::Data(format!("manifest {} declares no columns", path.display())));
    }
    Ok(entries)
}

/// Canonical column names for a topology: `x{stage}_{i}` and `y{stage}_{j}`,
/// inputs before outputs, stages in order. Stage indices are 0-based.
pub fn canonical_manifest(topology: &StageTopology) -> Vec<ManifestEntry> {
    let mut entries = Vec::new();
    for k in 0..topology.stage_count {
        for i in 0..topology.input_widths[k] {
            entries.push(ManifestEntry { name: format!("x{k}_{i}"), stage: k, role: ColumnRole::Input });
        }
        for j in 0..topology.output_widths[k] {
            entries.push(ManifestEntry { name: format!("y{k}_{j}"), stage: k, role: ColumnRole::Output });
        }
    }
    entries
}

/// Save a dataset as CSV + manifest, plus a truth sidecar when the dataset
/// carries generator ground truth. Values print in shortest round-trip form,
/// so save -> load is numerically lossless.
pub fn save_csv(
    ds: &Dataset,
    data_path: &Path,
    manifest_path: &Path,
    truth_path: Option<&Path>,
) -> Result<()> {
    let entries = canonical_manifest(&ds.topology);
    write_manifest(manifest_path, &entries)?;

    let mut out = String::new();
    let header: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
    writeln!(out, "{}", header.join(",")).expect("string write");
    for s in &ds.samples {
        let mut fields: Vec<String> = Vec::with_capacity(header.len());
        for k in 0..ds.topology.stage_count {
            for i in 0..ds.topology.input_widths[k] {
                fields.push(format!("{}", s.inputs[k][i]));
            }
            for j in 0..ds.topology.output_widths[k] {
                fields.push(format!("{}", s.outputs[k][j]));
            }
        }
        writeln!(out, "{}", fields.join(",")).expect("string write");
    }
    fs::write(data_path, out)?;

    if let (Some(path), Some(truth)) = (truth_path, &ds.truth) {
        write_truth_sidecar(path, truth)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TruthSidecar {
    format: String,
    /// Designated-unimportant (stage, input) pairs.
    masked: Vec<(usize, usize)>,
    stage_inputs: Vec<usize>,
    model: SovModel,
}

pub(crate) fn write_truth_sidecar(path: &Path, truth: &GroundTruth) -> Result<()> {
    let sidecar = TruthSidecar {
        format: "dmmtl.truth.v1".to_string(),
        masked: truth.masked_pairs(),
        stage_inputs: truth.important.iter().map(|r| r.len()).collect(),
        model: truth.model.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Data(format!("cannot serialize truth sidecar: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_truth_sidecar(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read truth sidecar {}: {e}", path.display())))?;
    let sidecar: TruthSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("bad truth sidecar {}: {e}", path.display())))?;
    if sidecar.format != "dmmtl.truth.v1" {
        return Err(Error::Data(format!("unknown truth sidecar format '{}'", sidecar.format)));
    }
    let mut important: Vec<Vec<bool>> =
        sidecar.stage_inputs.iter().map(|&w| vec![true; w]).collect();
    for (k, i) in sidecar.masked {
        let row = important
            .get_mut(k)
            .ok_or_else(|| Error::Data(format!("truth sidecar: stage {k} out of range")))?;
        if i >= row.len() {
            return Err(Error::Data(format!("truth sidecar: input {i} out of range in stage {k}")));
        }
        row[i] = false;
    }
    Ok(GroundTruth { important, model: sidecar.model })
}

/// Load a dataset from a manifest + data file pair.
pub fn load_csv(manifest_path: &Path, data_path: &Path) -> Result<Dataset> {
    let entries = read_manifest(manifest_path)?;
    let stage_count = entries.iter().map(|e| e.stage + 1).max().unwrap_or(0);
    let mut input_widths = vec![0usize; stage_count];
    let mut output_widths = vec![0usize; stage_count];
    // Destination of each manifest column: (stage, role, within-stage index),
    // assigned in manifest order.
    let mut destinations: Vec<(usize, ColumnRole, usize)> = Vec::with_capacity(entries.len());
    for e in &entries {
        let slot = match e.role {
            ColumnRole::Input => {
                input_widths[e.stage] += 1;
                input_widths[e.stage] - 1
            }
            ColumnRole::Output => {
                output_widths[e.stage] += 1;
                output_widths[e.stage] - 1
            }
        };
        destinations.push((e.stage, e.role, slot));
    }

    let text = fs::read_to_string(data_path)
        .map_err(|e| Error::Data(format!("cannot read data file {}: {e}", data_path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("data file {} is empty", data_path.display())))?;
    let header_cols: Vec<&str> = header.split(',').collect();

    // Every data column must be declared; every declared column must exist.
    let mut column_dest: Vec<(usize, ColumnRole, usize)> = Vec::with_capacity(header_cols.len());
    for name in &header_cols {
        match entries.iter().position(|e| e.name == *name) {
            Some(idx) => column_dest.push(destinations[idx]),
            None => {
                return Err(Error::Data(format!(
                    "data column '{name}' is not declared in the manifest"
                )))
            }
        }
    }
    for e in &entries {
        if !header_cols.contains(&e.name.as_str()) {
            return Err(Error::Data(format!(
                "manifest column '{}' is missing from the data file",
                e.name
            )));
        }
    }
    if header_cols.len() != entries.len() {
        return Err(Error::Data("data header and manifest declare different column sets".into()));
    }

    let topology = StageTopology::new(input_widths, output_widths, 1, 1, 1, false)?;
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = lineno + 2; // 1-based, after the header
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header_cols.len() {
            return Err(Error::Data(format!(
                "row {row}: expected {} cells, got {}",
                header_cols.len(),
                cells.len()
            )));
        }
        let mut sample = Sample {
            inputs: topology.input_widths.iter().map(|&w| vec![0.0; w]).collect(),
            outputs: topology.output_widths.iter().map(|&w| vec![0.0; w]).collect(),
        };
        for (c, cell) in cells.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "row {row}, column '{}': cannot parse '{cell}' as a number",
                    header_cols[c]
                ))
            })?;
            let (stage, role, slot) = column_dest[c];
            match role {
                ColumnRole::Input => sample.inputs[stage][slot] = value,
                ColumnRole::Output => sample.outputs[stage][slot] = value,
            }
        }
        samples.push(sample);
    }
    Dataset::new(samples, topology)
}
