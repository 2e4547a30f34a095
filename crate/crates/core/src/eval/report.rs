use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalReport, SETS};
use crate::{Error, Result};

pub const REPORT_COLUMNS: [&str; 8] = ["model", "strategy", "f", "set", "split", "error_pct", "n", "std"];

/// One cell of a results table: a mean error over `n` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub model: String,
    pub strategy: String,
    pub f: Option<usize>,
    pub set: String,
    pub split: String,
    pub error_pct: Option<f64>,
    pub n: usize,
    pub std: f64,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Zero when `n == 1`.
    pub std: f64,
    pub n: usize,
}

impl Summary {
    /// True when the standard deviation is undefined and reported as 0.
    pub fn single(&self) -> bool {
        self.n == 1
    }
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Summary { mean, std, n })
}

pub fn write_report_csv(path: &Path, cells: &[ReportCell]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    w.write_record(REPORT_COLUMNS)?;
    for c in cells {
        w.write_record([
            c.model.clone(),
            c.strategy.clone(),
            c.f.map(|f| f.to_string()).unwrap_or_default(),
            c.set.clone(),
            c.split.clone(),
            c.error_pct.map(|e| format!("{e:.4}")).unwrap_or_default(),
            c.n.to_string(),
            format!("{:.4}", c.std),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportCell>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let bad = |col: &str| Error::Data(format!("{}: bad {col} value", path.display()));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != REPORT_COLUMNS.len() {
            return Err(Error::Data(format!("{}: expected {} columns", path.display(), REPORT_COLUMNS.len())));
        }
        out.push(ReportCell {
            model: rec[0].to_string(),
            strategy: rec[1].to_string(),
            f: if rec[2].is_empty() { None } else { Some(rec[2].parse().map_err(|_| bad("f"))?) },
            set: rec[3].to_string(),
            split: rec[4].to_string(),
            error_pct: if rec[5].is_empty() { None } else { Some(rec[5].parse().map_err(|_| bad("error_pct"))?) },
            n: rec[6].parse().map_err(|_| bad("n"))?,
            std: rec[7].parse().map_err(|_| bad("std"))?,
        });
    }
    Ok(out)
}

/// Cells for every set of each report, each counted as one run.
pub fn report_cells(model: &str, strategy: &str, f: Option<usize>, reports: &[EvalReport]) -> Vec<ReportCell> {
    let mut out = Vec::new();
    for rep in reports {
        for set in SETS {
            out.push(ReportCell {
                model: model.into(),
                strategy: strategy.into(),
                f,
                set: set.into(),
                split: rep.split.clone(),
                error_pct: rep.error(set),
                n: 1,
                std: 0.0,
            });
        }
    }
    out
}

type RowKey = (String, String, Option<usize>);

/// Text table with one row per (model, strategy, f) and one column per set
/// in `sets`. Missing cells render as `-`.
pub fn render_table(cells: &[ReportCell], split: &str, sets: &[&str]) -> String {
    let mut rows: Vec<RowKey> = Vec::new();
    let mut values: BTreeMap<(RowKey, String), (f64, usize, f64)> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.split == split) {
        let key = (c.model.clone(), c.strategy.clone(), c.f);
        if !rows.contains(&key) {
            rows.push(key.clone());
        }
        if let Some(e) = c.error_pct {
            values.insert((key, c.set.clone()), (e, c.n, c.std));
        }
    }
    let label = |(m, s, f): &RowKey| match f {
        Some(f) => format!("{m} {s}-{f}"),
        None if s.is_empty() => m.clone(),
        None => format!("{m} {s}"),
    };
    let width = rows.iter().map(|r| label(r).len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}", "model");
    for s in sets {
        out.push_str(&format!(" {s:>14}"));
    }
    out.push('\n');
    for r in &rows {
        out.push_str(&format!("{:<width$}", label(r)));
        for s in sets {
            let cell = match values.get(&(r.clone(), s.to_string())) {
                Some((e, n, std)) if *n > 1 => format!("{e:.1} ± {std:.1}"),
                Some((e, _, _)) => format!("{e:.1}"),
                None => "-".into(),
            };
            out.push_str(&format!(" {cell:>14}"));
        }
        out.push('\n');
    }
    out
}
