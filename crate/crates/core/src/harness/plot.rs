//! Per-metric CSV summaries of a sweep, one row per (grid point, strategy).

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiment::{ResultRow, ResultTable, StrategyKind};
use crate::error::{Error, Result};

pub const METRICS: [&str; 4] = ["oer", "oer_cp", "oer_nc", "cer"];

pub fn metric_value(row: &ResultRow, metric: &str) -> Option<f64> {
    match metric {
        "oer" => Some(row.oer),
        "oer_cp" => row.oer_cp,
        "oer_nc" => row.oer_nc,
        "cer" => Some(row.cer),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotRow {
    pub pct_cooperative: f64,
    pub strategy: StrategyKind,
    pub mean: Option<f64>,
    /// Standard error over seeds; absent with fewer than two values.
    pub stderr: Option<f64>,
    pub n_seeds: usize,
}

/// Aggregate one metric, keeping the table's first-seen order of grid
/// points and strategies.
pub fn aggregate(table: &ResultTable, metric: &str) -> Vec<PlotRow> {
    let mut keys: Vec<(f64, StrategyKind)> = Vec::new();
    for r in &table.rows {
        if !keys.iter().any(|&(p, s)| p == r.p_nc && s == r.strategy) {
            keys.push((r.p_nc, r.strategy));
        }
    }
    keys.into_iter()
        .map(|(p_nc, strategy)| {
            let cells: Vec<&ResultRow> = table.cells(p_nc, strategy).collect();
            let vals: Vec<f64> = cells.iter().filter_map(|r| metric_value(r, metric)).collect();
            let n = vals.len() as f64;
            let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / n);
            let stderr = match mean {
                Some(m) if vals.len() >= 2 => {
                    let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
                    Some((var / n).sqrt())
                }
                _ => None,
            };
            PlotRow {
                pct_cooperative: cells[0].pct_cooperative,
                strategy,
                mean,
                stderr,
                n_seeds: cells.len(),
            }
        })
        .collect()
}

/// Write `<metric>.csv` for every metric into `dir`; returns the paths.
pub fn emit_plot_data(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(Error::InsufficientData("result table is empty".into()));
    }
    std::fs::create_dir_all(dir)?;
    METRICS
        .iter()
        .map(|metric| {
            let path = dir.join(format!("{metric}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            for row in aggregate(table, metric) {
                w.serialize(row)?;
            }
            w.flush()?;
            Ok(path)
        })
        .collect()
}
