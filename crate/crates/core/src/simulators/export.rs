use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{csv_err, Error, Result};
use crate::math::Tensor;

/// Writes replicates as CSV, one row per replicate.
///
/// Two `#` comment lines carry the parameters (as JSON) and the seed, then a
/// header `replicate,v0,v1,...` follows.
pub fn write_dataset_csv(
    path: impl AsRef<Path>,
    params: &serde_json::Value,
    seed: u64,
    replicates: &[Tensor],
) -> Result<()> {
    let len = replicates.first().map_or(0, Tensor::len);
    if let Some(bad) = replicates.iter().find(|r| r.len() != len) {
        return Err(Error::ShapeMismatch {
            expected: vec![len],
            got: bad.shape().to_vec(),
        });
    }
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# params: {params}")?;
    writeln!(file, "# seed: {seed}")?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    let mut header = vec!["replicate".to_string()];
    header.extend((0..len).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, r) in replicates.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(r.data().iter().map(|v| format!("{v:?}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_dataset_csv`] back into replicate vectors.
pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("bad value {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(vals);
    }
    Ok(out)
}

/// Reads a single-column series, skipping a non-numeric header line if present.
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Config(format!("line {}: bad value {field:?}: {e}", i + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(out)
}
