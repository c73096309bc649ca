//! Trace, bound and sweep serialisation. Floats carry 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::Value;
use ttkrylov_core::diagnostics::{BoundReport, SliceRow};
use ttkrylov_core::solver::IterationRecord;

use crate::experiment::SweepRow;

pub const TRACE_COLUMNS: [&str; 12] = [
    "iter",
    "eta_b",
    "eta_Ab",
    "eta_AMb",
    "eta_tilde_b",
    "lsq_residual",
    "true_residual",
    "max_rank_v",
    "max_rank_x",
    "cr_last_vec",
    "cr_basis",
    "delta_used",
];

pub const BOUND_COLUMNS: [&str; 6] = ["ell", "eta_b_slice", "eta_Ab_slice", "rho_ell", "rho_star", "psi_ell"];

pub const SWEEP_COLUMNS: [&str; 5] = ["q", "tau", "max_rank", "ranks", "opnorm_AM"];

/// 17 significant digits; non-finite values as `NaN`, `inf`, `-inf`.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn json17(v: f64) -> String {
    if v.is_finite() {
        fmt17(v)
    } else {
        "null".into()
    }
}

fn record_fields(r: &IterationRecord, f: fn(f64) -> String) -> [String; 12] {
    [
        r.iter.to_string(),
        f(r.eta_b),
        f(r.eta_ab),
        f(r.eta_amb),
        f(r.eta_tilde_b),
        f(r.lsq_residual),
        f(r.true_residual),
        r.max_rank_v.to_string(),
        r.max_rank_x.to_string(),
        f(r.cr_last_vec),
        f(r.cr_basis),
        f(r.delta_used),
    ]
}

fn slice_fields(s: &SliceRow, f: fn(f64) -> String) -> [String; 6] {
    [s.ell.to_string(), f(s.eta_b_slice), f(s.eta_ab_slice), f(s.rho_ell), f(s.rho_star), f(s.psi_ell)]
}

pub fn trace_csv(trace: &[IterationRecord]) -> String {
    let mut out = TRACE_COLUMNS.join(",");
    out.push('\n');
    for r in trace {
        out.push_str(&record_fields(r, fmt17).join(","));
        out.push('\n');
    }
    out
}

fn rows_by_iter(report: &BoundReport) -> BTreeMap<usize, Vec<&SliceRow>> {
    let mut m: BTreeMap<usize, Vec<&SliceRow>> = BTreeMap::new();
    for row in &report.rows {
        m.entry(row.iter).or_default().push(row);
    }
    m
}

/// One row per (iteration, slice) of the report.
pub fn bounds_csv(trace: &[IterationRecord], report: &BoundReport) -> String {
    let mut out = TRACE_COLUMNS.join(",");
    out.push(',');
    out.push_str(&BOUND_COLUMNS.join(","));
    out.push('\n');
    let by_iter = rows_by_iter(report);
    for r in trace {
        for s in by_iter.get(&r.iter).into_iter().flatten() {
            out.push_str(&record_fields(r, fmt17).join(","));
            out.push(',');
            out.push_str(&slice_fields(s, fmt17).join(","));
            out.push('\n');
        }
    }
    out
}

fn json_object(keys: &[&str], vals: &[String], extra: Option<String>) -> String {
    let mut s = String::from("{");
    for (i, (k, v)) in keys.iter().zip(vals).enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "\"{k}\": {v}");
    }
    if let Some(e) = extra {
        s.push_str(", ");
        s.push_str(&e);
    }
    s.push('}');
    s
}

/// `{"label": .., "iterations": [{..trace columns.., "slices": [..]}]}`.
pub fn trace_json(label: &str, trace: &[IterationRecord], report: Option<&BoundReport>) -> String {
    let by_iter = report.map(rows_by_iter);
    let mut items = Vec::with_capacity(trace.len());
    for r in trace {
        let slices = by_iter.as_ref().map(|m| {
            let rows: Vec<String> =
                m.get(&r.iter).into_iter().flatten().map(|s| json_object(&BOUND_COLUMNS, &slice_fields(s, json17), None)).collect();
            format!("\"slices\": [{}]", rows.join(", "))
        });
        items.push(format!("    {}", json_object(&TRACE_COLUMNS, &record_fields(r, json17), slices)));
    }
    format!("{{\n  \"label\": {},\n  \"iterations\": [\n{}\n  ]\n}}\n", Value::String(label.into()), items.join(",\n"))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let ranks: Vec<String> = r.ranks.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(out, "{},{},{},{},{}", r.q, fmt17(r.tau), r.max_rank, ranks.join(" "), fmt17(r.opnorm_am));
    }
    out
}

pub fn sweep_json(rows: &[SweepRow]) -> String {
    let items: Vec<String> = rows
        .iter()
        .map(|r| {
            let ranks: Vec<String> = r.ranks.iter().map(|k| k.to_string()).collect();
            format!(
                "    {{\"q\": {}, \"tau\": {}, \"max_rank\": {}, \"ranks\": [{}], \"opnorm_AM\": {}}}",
                r.q,
                json17(r.tau),
                r.max_rank,
                ranks.join(", "),
                json17(r.opnorm_am)
            )
        })
        .collect();
    format!("{{\n  \"sweep\": [\n{}\n  ]\n}}\n", items.join(",\n"))
}

/// Slice columns of a parsed JSON trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSlice {
    pub iter: usize,
    pub ell: usize,
    pub eta_b_slice: f64,
    pub eta_ab_slice: f64,
    pub rho_ell: f64,
    pub rho_star: f64,
    pub psi_ell: f64,
}

#[derive(Debug)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "trace parse error: {}", self.0)
    }
}

impl std::error::Error for ParseError {}

fn num(o: &Value, key: &str) -> Result<f64, ParseError> {
    match o.get(key) {
        Some(Value::Null) => Ok(f64::NAN),
        Some(v) => v.as_f64().ok_or_else(|| ParseError(format!("`{key}` is not a number"))),
        None => Err(ParseError(format!("missing `{key}`"))),
    }
}

fn int(o: &Value, key: &str) -> Result<usize, ParseError> {
    o.get(key).and_then(Value::as_u64).map(|v| v as usize).ok_or_else(|| ParseError(format!("missing integer `{key}`")))
}

/// Inverse of [`trace_json`].
pub fn parse_trace_json(text: &str) -> Result<(Vec<IterationRecord>, Vec<ParsedSlice>), ParseError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ParseError(e.to_string()))?;
    let items = doc.get("iterations").and_then(Value::as_array).ok_or_else(|| ParseError("missing `iterations`".into()))?;
    let mut trace = Vec::with_capacity(items.len());
    let mut slices = Vec::new();
    for it in items {
        let rec = IterationRecord {
            iter: int(it, "iter")?,
            eta_b: num(it, "eta_b")?,
            eta_ab: num(it, "eta_Ab")?,
            eta_amb: num(it, "eta_AMb")?,
            eta_tilde_b: num(it, "eta_tilde_b")?,
            lsq_residual: num(it, "lsq_residual")?,
            true_residual: num(it, "true_residual")?,
            max_rank_v: int(it, "max_rank_v")?,
            max_rank_x: int(it, "max_rank_x")?,
            cr_last_vec: num(it, "cr_last_vec")?,
            cr_basis: num(it, "cr_basis")?,
            delta_used: num(it, "delta_used")?,
        };
        if let Some(ss) = it.get("slices").and_then(Value::as_array) {
            for s in ss {
                slices.push(ParsedSlice {
                    iter: rec.iter,
                    ell: int(s, "ell")?,
                    eta_b_slice: num(s, "eta_b_slice")?,
                    eta_ab_slice: num(s, "eta_Ab_slice")?,
                    rho_ell: num(s, "rho_ell")?,
                    rho_star: num(s, "rho_star")?,
                    psi_ell: num(s, "psi_ell")?,
                });
            }
        }
        trace.push(rec);
    }
    Ok((trace, slices))
}
