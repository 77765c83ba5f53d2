//! Aggregation of sweep CSVs into per-cell summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::sweep::{SweepRecord, CSV_COLUMNS};
use crate::HarnessError;

/// Summary of one `(method, budget)` cell. Accuracy is first averaged over
/// problems within each seed; mean and sample standard deviation are then
/// taken across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub method: String,
    pub budget_label: String,
    pub n: u32,
    pub seeds: usize,
    pub runs: usize,
    pub errors: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    /// Best `accuracy_mean` of this method over the budgets in the file.
    pub max_accuracy_over_grid: f64,
    pub visit_fraction_mean: Option<f64>,
    pub sims_mean: f64,
    pub nodes_expanded_mean: f64,
    pub propose_calls_mean: f64,
    pub value_calls_mean: f64,
    pub action_chars_mean: f64,
}

/// Reads a sweep CSV. The header must match the documented column order;
/// errors name the 1-based line of the offending row.
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>, HarnessError> {
    let file = std::fs::File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_records(file, path)
}

pub fn parse_records<R: Read>(input: R, path: &Path) -> Result<Vec<SweepRecord>, HarnessError> {
    let bad = |row: u64, message: String| HarnessError::Csv {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(bad(
            1,
            format!(
                "header {:?} does not match {:?}",
                header.iter().collect::<Vec<_>>(),
                CSV_COLUMNS
            ),
        ));
    }
    let mut out = Vec::new();
    for (i, result) in reader.deserialize::<SweepRecord>().enumerate() {
        let fallback = i as u64 + 2;
        let record = result.map_err(|e| {
            let row = e.position().map_or(fallback, |p| p.line());
            let message = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            };
            bad(row, message)
        })?;
        if record.correct > 1 {
            return Err(bad(fallback, format!("correct must be 0 or 1, got {}", record.correct)));
        }
        if let Some(f) = record.max_root_visit_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(bad(fallback, format!("max_root_visit_fraction {f} outside (0, 1]")));
            }
        }
        out.push(record);
    }
    Ok(out)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Cells in order of first appearance.
pub fn aggregate(records: &[SweepRecord]) -> Vec<ReportRow> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut cells: BTreeMap<(String, String), Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.method.clone(), r.budget_label.clone());
        let cell = cells.entry(key.clone()).or_default();
        if cell.is_empty() {
            order.push(key);
        }
        cell.push(r);
    }
    let mut rows: Vec<ReportRow> = order
        .into_iter()
        .map(|key| {
            let rs = &cells[&key];
            let mut per_seed: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
            for r in rs {
                let e = per_seed.entry(r.seed).or_default();
                e.0 += f64::from(r.correct);
                e.1 += 1;
            }
            let acc: Vec<f64> = per_seed.values().map(|(c, n)| c / *n as f64).collect();
            let fractions: Vec<f64> = rs.iter().filter_map(|r| r.max_root_visit_fraction).collect();
            let col = |f: fn(&SweepRecord) -> u64| mean(&rs.iter().map(|r| f(r) as f64).collect::<Vec<_>>());
            ReportRow {
                method: key.0.clone(),
                budget_label: key.1.clone(),
                n: rs[0].n,
                seeds: per_seed.len(),
                runs: rs.len(),
                errors: rs.iter().filter(|r| r.error.is_some()).count(),
                accuracy_mean: mean(&acc),
                accuracy_std: sample_std(&acc),
                max_accuracy_over_grid: 0.0,
                visit_fraction_mean: (!fractions.is_empty()).then(|| mean(&fractions)),
                sims_mean: col(|r| r.sims),
                nodes_expanded_mean: col(|r| r.nodes_expanded),
                propose_calls_mean: col(|r| r.propose_calls),
                value_calls_mean: col(|r| r.value_calls),
                action_chars_mean: col(|r| r.action_chars),
            }
        })
        .collect();
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for r in &rows {
        let b = best.entry(r.method.clone()).or_insert(f64::NEG_INFINITY);
        *b = b.max(r.accuracy_mean);
    }
    for r in &mut rows {
        r.max_accuracy_over_grid = best[&r.method];
    }
    rows
}

/// Fixed-width table: rows are method × budget; columns are cost counters,
/// accuracy and the best accuracy over the budgets present in the file.
pub fn render_table(rows: &[ReportRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<30} {:<10} {:>5} {:>5} {:>6} {:>9} {:>9} {:>10} {:>16} {:>13} {:>8} {:>6}",
        "method",
        "budget",
        "N",
        "seeds",
        "runs",
        "propose",
        "value",
        "chars",
        "acc % (mean±sd)",
        "max acc/grid",
        "visit fr",
        "errors"
    );
    for r in rows {
        let acc = format!("{:.1} ± {:.1}", 100.0 * r.accuracy_mean, 100.0 * r.accuracy_std);
        let frac = r.visit_fraction_mean.map_or("-".to_string(), |f| format!("{f:.3}"));
        let _ = writeln!(
            s,
            "{:<30} {:<10} {:>5} {:>5} {:>6} {:>9.1} {:>9.1} {:>10.1} {:>16} {:>13.1} {:>8} {:>6}",
            r.method,
            r.budget_label,
            r.n,
            r.seeds,
            r.runs,
            r.propose_calls_mean,
            r.value_calls_mean,
            r.action_chars_mean,
            acc,
            100.0 * r.max_accuracy_over_grid,
            frac,
            r.errors
        );
    }
    s
}

/// Tab-separated plot data: one series per method, budget `N` on the x axis,
/// accuracy (fraction) on the y axis.
pub fn plot_data(rows: &[ReportRow]) -> String {
    let mut sorted: Vec<&ReportRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.method.cmp(&b.method).then(a.n.cmp(&b.n)));
    let mut s = String::from("method\tbudget_label\tN\taccuracy\taccuracy_std\tvisit_fraction\n");
    for r in sorted {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.method,
            r.budget_label,
            r.n,
            r.accuracy_mean,
            r.accuracy_std,
            r.visit_fraction_mean.map_or(String::new(), |f| f.to_string())
        );
    }
    s
}
