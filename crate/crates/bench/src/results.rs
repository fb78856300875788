//! Result rows, their CSV form, and per-configuration averages.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::error::{BenchError, Result};

pub const HEADER: [&str; 9] = [
    "dataset",
    "method",
    "epsilon",
    "rho",
    "N",
    "rep",
    "aqe",
    "cell_count",
    "wall_time_ms",
];

/// One run. Fields that do not apply to a run (ρ for grid-size runs, N for
/// adaptive methods, AQE when no queries were evaluated) are empty.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub method: String,
    pub epsilon: f64,
    pub rho: Option<f64>,
    pub n: Option<usize>,
    pub rep: usize,
    pub aqe: Option<f64>,
    pub cell_count: usize,
    pub wall_time_ms: Option<f64>,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl ResultRow {
    fn record(&self) -> [String; 9] {
        [
            self.dataset.clone(),
            self.method.clone(),
            self.epsilon.to_string(),
            opt(&self.rho),
            opt(&self.n),
            self.rep.to_string(),
            opt(&self.aqe),
            self.cell_count.to_string(),
            opt(&self.wall_time_ms),
        ]
    }
}

pub fn write_results<W: io::Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes `rows` as CSV with the fixed header, in the given order.
pub fn emit_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_results(rows, io::BufWriter::new(file))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(HEADER.iter().copied()) {
        return Err(BenchError::Results(format!(
            "unexpected header {:?}",
            r.headers()?
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| BenchError::Results(format!("bad number '{}'", field(i))))
        };
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let int = |i: usize| -> Result<usize> {
            field(i)
                .parse()
                .map_err(|_| BenchError::Results(format!("bad integer '{}'", field(i))))
        };
        rows.push(ResultRow {
            dataset: field(0).to_string(),
            method: field(1).to_string(),
            epsilon: num(2)?,
            rho: opt_num(3)?,
            n: if field(4).is_empty() {
                None
            } else {
                Some(int(4)?)
            },
            rep: int(5)?,
            aqe: opt_num(6)?,
            cell_count: int(7)?,
            wall_time_ms: opt_num(8)?,
        });
    }
    Ok(rows)
}

/// Mean AQE and cell count over repetitions of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub dataset: String,
    pub method: String,
    pub epsilon: f64,
    pub rho: Option<f64>,
    pub n: Option<usize>,
    pub reps: usize,
    pub mean_aqe: Option<f64>,
    pub mean_cells: f64,
}

/// Groups rows by everything except `rep` and averages, preserving the order
/// in which groups first appear.
pub fn summarize(rows: &[ResultRow]) -> Vec<Summary> {
    type Key = (String, String, u64, Option<u64>, Option<usize>);
    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        let key = (
            row.dataset.clone(),
            row.method.clone(),
            row.epsilon.to_bits(),
            row.rho.map(f64::to_bits),
            row.n,
        );
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let k = members.len() as f64;
            let aqes: Vec<f64> = members.iter().filter_map(|r| r.aqe).collect();
            Summary {
                dataset: key.0,
                method: key.1,
                epsilon: f64::from_bits(key.2),
                rho: key.3.map(f64::from_bits),
                n: key.4,
                reps: members.len(),
                mean_aqe: (!aqes.is_empty()).then(|| aqes.iter().sum::<f64>() / aqes.len() as f64),
                mean_cells: members.iter().map(|r| r.cell_count as f64).sum::<f64>() / k,
            }
        })
        .collect()
}

pub fn format_summary(summaries: &[Summary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<8} {:>7} {:>9} {:>5} {:>5} {:>12} {:>10}",
        "dataset", "method", "epsilon", "rho", "N", "reps", "mean_aqe", "cells"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<12} {:<8} {:>7} {:>9} {:>5} {:>5} {:>12} {:>10.1}",
            s.dataset,
            s.method,
            s.epsilon,
            opt(&s.rho),
            opt(&s.n),
            s.reps,
            s.mean_aqe.map(|a| format!("{a:.6}")).unwrap_or_default(),
            s.mean_cells
        );
    }
    out
}
