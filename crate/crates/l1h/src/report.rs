//! Solve output serialization: per-iteration trace CSV, result summary JSON,
//! and long-format CSV rows for plotting.
//!
//! Floats are printed as shortest round-trip decimals, so equal runs produce
//! byte-identical files.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::io::{format_f64, write_atomic};
use crate::solver::{IterateRecord, SolveResult, SolveStatus};

/// Header of the per-iteration trace CSV.
pub const TRACE_HEADER: &str = "stage,k,lambda,M,phi,omega,nnz,matvecs,linesearch_steps";

/// Header of the long-format figure CSV.
pub const LONG_HEADER: &str = "method,stage,k,metric,value";

/// Renders a trace as CSV, one row per accepted inner iteration.
pub fn trace_csv(records: &[IterateRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.stage.to_string());
        out.push(',');
        out.push_str(&r.k.to_string());
        out.push(',');
        out.push_str(&format_f64(r.lambda));
        out.push(',');
        out.push_str(&format_f64(r.m));
        out.push(',');
        out.push_str(&format_f64(r.phi));
        out.push(',');
        out.push_str(&format_f64(r.omega));
        out.push(',');
        out.push_str(&r.nnz.to_string());
        out.push(',');
        out.push_str(&r.matvecs.to_string());
        out.push(',');
        out.push_str(&r.linesearch_steps.to_string());
        out.push('\n');
    }
    out
}

/// Per-stage line of the result summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary {
    pub lambda: f64,
    pub eps_hat: f64,
    pub iterations: usize,
}

/// Compact solve summary for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSummary {
    pub status: SolveStatus,
    pub lambda_tgt: f64,
    pub lambda0: Option<f64>,
    pub eps: f64,
    pub final_phi: f64,
    pub final_omega: f64,
    pub total_inner_iterations: usize,
    pub total_matvecs: u64,
    pub stages: Vec<StageSummary>,
}

impl From<&SolveResult> for ResultSummary {
    fn from(r: &SolveResult) -> ResultSummary {
        ResultSummary {
            status: r.status,
            lambda_tgt: r.lambda_tgt,
            lambda0: r.lambda0,
            eps: r.eps,
            final_phi: r.final_phi,
            final_omega: r.final_omega,
            total_inner_iterations: r.total_inner_iterations,
            total_matvecs: r.total_matvecs,
            stages: r
                .stages
                .iter()
                .map(|s| StageSummary {
                    lambda: s.lambda,
                    eps_hat: s.eps_hat,
                    iterations: s.inner_iterations,
                })
                .collect(),
        }
    }
}

/// Serializes a value as pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| crate::error::Error::invalid(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Renders the result summary JSON for a solve.
pub fn result_json(result: &SolveResult) -> Result<String> {
    to_json_pretty(&ResultSummary::from(result))
}

/// Atomically writes the trace CSV to `path`.
pub fn write_trace(path: &Path, records: &[IterateRecord]) -> Result<()> {
    write_atomic(path, trace_csv(records).as_bytes())
}

/// Atomically writes the result summary JSON to `path`.
pub fn write_result_json(path: &Path, result: &SolveResult) -> Result<()> {
    write_atomic(path, result_json(result)?.as_bytes())
}

/// One observation in the long-format figure table.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    pub method: &'static str,
    pub stage: usize,
    /// Global 0-based iteration index within the method's run.
    pub k: usize,
    pub metric: &'static str,
    pub value: f64,
}

/// Renders long-format rows as CSV for plotting tools.
pub fn long_csv(rows: &[LongRow]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(LONG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(r.method);
        out.push(',');
        out.push_str(&r.stage.to_string());
        out.push(',');
        out.push_str(&r.k.to_string());
        out.push(',');
        out.push_str(r.metric);
        out.push(',');
        out.push_str(&format_f64(r.value));
        out.push('\n');
    }
    out
}
