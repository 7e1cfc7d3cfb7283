use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::run::{EstimateRow, ResultBundle, SampleRow};
use crate::error::{csv_err, Result};

pub const BOXPLOT_FILE: &str = "plot_boxplot.csv";
pub const SCATTER_FILE: &str = "plot_scatter.csv";
pub const INTERVALS_FILE: &str = "plot_intervals.csv";

const HEADER: [&str; 5] = ["replicate", "iteration", "parameter", "role", "value"];

type Key = (Option<usize>, usize, usize);

fn group(rows: &[SampleRow]) -> BTreeMap<Key, Vec<f64>> {
    let mut m: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    for r in rows {
        m.entry((r.replicate, r.stage, r.parameter)).or_default().push(r.value);
    }
    m
}

struct Out {
    w: csv::Writer<BufWriter<fs::File>>,
}

impl Out {
    fn new(path: &Path, hash: &str, header: &[&str]) -> Result<Self> {
        let mut f = BufWriter::new(fs::File::create(path)?);
        writeln!(f, "# config_hash: {hash}")?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(f);
        w.write_record(header).map_err(csv_err)?;
        Ok(Self { w })
    }

    fn row(&mut self, rep: Option<usize>, it: usize, p: usize, role: &str, value: f64, extra: Option<&str>) -> Result<()> {
        let rep = rep.map(|r| r.to_string()).unwrap_or_default();
        let (it, p, v) = (it.to_string(), p.to_string(), value.to_string());
        let mut rec = vec![rep.as_str(), it.as_str(), p.as_str(), role, v.as_str()];
        rec.extend(extra);
        self.w.write_record(&rec).map_err(csv_err)
    }

    fn finish(mut self) -> Result<()> {
        Ok(self.w.flush()?)
    }
}

/// Writes tidy plot data to `dir`: per-iteration boxplot series, final
/// estimate scatter pairs and interval bars.
///
/// The boxplot file has, for each estimate and parameter, every training
/// value (`train`), every bootstrap draw (`bootstrap`), the estimate
/// (`fitted`) and the truth. Shared training sets of series presets appear
/// once, with an empty replicate and iteration 0. The intervals file adds
/// a `stat` column (`lower`, `median`, `upper` or `point`); in both
/// `iteration` holds the series length for series presets.
pub fn emit_plotdata(bundle: &ResultBundle, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let hash = &bundle.config_hash;
    let train = group(&bundle.train);
    let boot = group(&bundle.bootstrap);

    let mut bx = Out::new(&dir.join(BOXPLOT_FILE), hash, &HEADER)?;
    for (&(rep, it, p), values) in train.range((None, 0, 0)..(Some(0), 0, 0)) {
        for &v in values {
            bx.row(rep, it, p, "train", v, None)?;
        }
    }
    for e in &bundle.estimates {
        let key = (Some(e.replicate), e.stage, e.parameter);
        for &v in train.get(&key).into_iter().flatten() {
            bx.row(key.0, e.stage, e.parameter, "train", v, None)?;
        }
        for &v in boot.get(&key).into_iter().flatten() {
            bx.row(key.0, e.stage, e.parameter, "bootstrap", v, None)?;
        }
        bx.row(key.0, e.stage, e.parameter, "fitted", e.theta_hat, None)?;
        bx.row(key.0, e.stage, e.parameter, "truth", e.truth, None)?;
    }
    bx.finish()?;

    // Scatter: the last estimate of each replicate in sequential presets,
    // every length in series presets.
    let mut sc = Out::new(&dir.join(SCATTER_FILE), hash, &HEADER)?;
    let series = bundle.config.preset.is_series();
    let mut last: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &bundle.estimates {
        let s = last.entry(e.replicate).or_insert(e.stage);
        *s = (*s).max(e.stage);
    }
    let keep = |e: &EstimateRow| series || last.get(&e.replicate) == Some(&e.stage);
    for e in bundle.estimates.iter().filter(|e| keep(e)) {
        sc.row(Some(e.replicate), e.stage, e.parameter, "fitted", e.theta_hat, None)?;
    }
    let mut truths: BTreeMap<usize, f64> = BTreeMap::new();
    for e in &bundle.estimates {
        truths.insert(e.parameter, e.truth);
    }
    for (p, t) in truths {
        sc.row(None, 0, p, "truth", t, None)?;
    }
    sc.finish()?;

    let mut header = HEADER.to_vec();
    header.push("stat");
    let mut iv = Out::new(&dir.join(INTERVALS_FILE), hash, &header)?;
    for e in &bundle.estimates {
        let r = Some(e.replicate);
        iv.row(r, e.stage, e.parameter, "bootstrap", e.lower, Some("lower"))?;
        iv.row(r, e.stage, e.parameter, "bootstrap", e.boot_median, Some("median"))?;
        iv.row(r, e.stage, e.parameter, "bootstrap", e.upper, Some("upper"))?;
        iv.row(r, e.stage, e.parameter, "fitted", e.theta_hat, Some("point"))?;
        iv.row(r, e.stage, e.parameter, "truth", e.truth, Some("point"))?;
    }
    iv.finish()?;
    Ok(vec![dir.join(BOXPLOT_FILE), dir.join(SCATTER_FILE), dir.join(INTERVALS_FILE)])
}
