//! `mamba export`: median and quartiles of the best return across seeds.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::run::{read_metrics, METRICS_FILE};

/// Metric files under the given directories. A directory holds either a
/// metrics file itself or one run per subdirectory.
pub fn metric_files(dirs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for dir in dirs {
        let direct = dir.join(METRICS_FILE);
        if direct.is_file() {
            out.push(direct);
            continue;
        }
        let mut nested: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path().join(METRICS_FILE)))
            .filter(|p| p.is_file())
            .collect();
        if nested.is_empty() {
            bail!("no {METRICS_FILE} in {}", dir.display());
        }
        nested.sort();
        out.extend(nested);
    }
    Ok(out)
}

/// Linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub iter: usize,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
}

pub fn summarize(runs: &[(PathBuf, Vec<(usize, f64)>)]) -> Result<Vec<SummaryRow>> {
    let Some((first_path, first)) = runs.first() else {
        bail!("no runs to export");
    };
    for (path, rows) in runs {
        if rows.len() != first.len() {
            bail!(
                "mismatched iteration counts: {} has {}, {} has {}",
                first_path.display(),
                first.len(),
                path.display(),
                rows.len()
            );
        }
        if rows.iter().zip(first).any(|(a, b)| a.0 != b.0) {
            bail!("iterations of {} do not line up with {}", path.display(), first_path.display());
        }
    }
    Ok((0..first.len())
        .map(|i| {
            let mut v: Vec<f64> = runs.iter().map(|(_, rows)| rows[i].1).collect();
            v.sort_by(f64::total_cmp);
            SummaryRow {
                iter: first[i].0,
                median: quantile(&v, 0.5),
                p25: quantile(&v, 0.25),
                p75: quantile(&v, 0.75),
            }
        })
        .collect())
}

pub fn cmd_export(dirs: &[PathBuf], out: &Path) -> Result<()> {
    let files = metric_files(dirs)?;
    let runs = files
        .into_iter()
        .map(|f| {
            let rows = read_metrics(&f)?.into_iter().map(|l| (l.row.iter, l.row.best_return)).collect();
            Ok((f, rows))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&runs)?;
    let mut w = csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    w.write_record(["iter", "median_best_return", "p25", "p75"])?;
    for r in summary {
        w.write_record([r.iter.to_string(), r.median.to_string(), r.p25.to_string(), r.p75.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
