use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Mean and interval against ring size, next to the worst-case bound.
    Scaling,
    /// Token-count decay against time, next to the limit curve.
    Curve,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaling" => Ok(PlotKind::Scaling),
            "curve" => Ok(PlotKind::Curve),
            other => Err(Error::Invalid(format!(
                "unknown plot kind `{other}`; expected scaling or curve"
            ))),
        }
    }
}

/// Field access that names what is missing: plotting from a record that
/// lacks a needed column is a schema error, not a silent zero.
fn req<'a>(v: &'a Value, path: &str, rec: usize) -> Result<&'a Value> {
    let mut cur = v;
    for key in path.split('.') {
        cur = cur.get(key).ok_or_else(|| {
            Error::Invalid(format!(
                "schema error: record {rec}: missing field `{path}`"
            ))
        })?;
    }
    Ok(cur)
}

fn req_f64(v: &Value, path: &str, rec: usize) -> Result<f64> {
    req(v, path, rec)?.as_f64().ok_or_else(|| {
        Error::Invalid(format!(
            "schema error: record {rec}: field `{path}` is not a number"
        ))
    })
}

fn req_pair(v: &Value, path: &str, rec: usize) -> Result<(f64, f64)> {
    let arr = req(v, path, rec)?.as_array();
    match arr.map(Vec::as_slice) {
        Some([lo, hi]) if lo.is_number() && hi.is_number() => {
            Ok((lo.as_f64().unwrap(), hi.as_f64().unwrap()))
        }
        _ => Err(Error::Invalid(format!(
            "schema error: record {rec}: field `{path}` is not a [lo, hi] pair"
        ))),
    }
}

fn load_records(path: &Path) -> Result<Vec<Value>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| {
            Error::Invalid(format!(
                "schema error: {} line {}: {e}",
                path.display(),
                i + 1
            ))
        })?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Invalid(format!(
            "schema error: record file {} is empty",
            path.display()
        )));
    }
    Ok(out)
}

/// One scaling row per ring size. Accepts both shapes that carry the
/// needed columns: study reports (under `entries`) and plain simulation
/// records (under `payload.summary`).
fn scaling_rows(records: &[Value]) -> Result<Vec<(u64, f64, f64, f64, f64)>> {
    let mut rows = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let rec = i + 1;
        if let Some(entries) = record.get("entries").and_then(Value::as_array) {
            for e in entries {
                let (lo, hi) = req_pair(e, "ci95", rec)?;
                rows.push((
                    req(e, "n", rec)?.as_u64().ok_or_else(|| {
                        Error::Invalid(format!(
                            "schema error: record {rec}: field `n` is not a number"
                        ))
                    })?,
                    req_f64(e, "mean", rec)?,
                    lo,
                    hi,
                    req_f64(e, "worst_case_bound", rec)?,
                ));
            }
        } else {
            let stats = req(record, "payload.summary.stats", rec)?;
            if stats.is_null() {
                return Err(Error::Invalid(format!(
                    "schema error: record {rec}: missing field `payload.summary.stats` \
                     (all trials censored)"
                )));
            }
            let (lo, hi) = req_pair(stats, "ci95", rec)?;
            rows.push((
                req(record, "n", rec)?.as_u64().ok_or_else(|| {
                    Error::Invalid(format!(
                        "schema error: record {rec}: field `n` is not a number"
                    ))
                })?,
                req_f64(stats, "mean", rec)?,
                lo,
                hi,
                req_f64(record, "payload.worst_case_bound", rec)?,
            ));
        }
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(rows)
}

fn curve_rows(records: &[Value]) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let rec = i + 1;
        let curve = req(record, "curve", rec)?.as_array().ok_or_else(|| {
            Error::Invalid(format!(
                "schema error: record {rec}: field `curve` is not an array"
            ))
        })?;
        for p in curve {
            rows.push((
                req_f64(p, "t", rec)?,
                req_f64(p, "s_emp", rec)?,
                req_f64(p, "s_tilde", rec)?,
            ));
        }
    }
    Ok(rows)
}

/// Renders stored result records to plot-ready CSV.
pub fn emit_plot_data(record_path: &Path, kind: PlotKind, out: &mut dyn Write) -> Result<()> {
    let records = load_records(record_path)?;
    let mut csv = String::new();
    match kind {
        PlotKind::Scaling => {
            csv.push_str("n,mean,ci_lo,ci_hi,bound\n");
            for (n, mean, lo, hi, bound) in scaling_rows(&records)? {
                writeln!(csv, "{n},{mean},{lo},{hi},{bound}").unwrap();
            }
        }
        PlotKind::Curve => {
            csv.push_str("t,S_emp,S_tilde\n");
            for (t, emp, tilde) in curve_rows(&records)? {
                writeln!(csv, "{t},{emp},{tilde}").unwrap();
            }
        }
    }
    out.write_all(csv.as_bytes())
        .map_err(|e| Error::io("writing plot data", e))
}
