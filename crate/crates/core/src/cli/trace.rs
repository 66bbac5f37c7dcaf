//! Comma-separated trace files: one `# key=value ...` metadata line, a header
//! row, then one row per recorded iteration. Absent values are empty fields.
//! Floats are written in shortest round-trip exponent form, so parsing a
//! written trace reproduces the records exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::drivers::{IterationRecord, StepKind};

/// Bumped whenever columns change.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

pub const TRACE_COLUMNS: [&str; 12] = [
    "t",
    "x_norm",
    "g_norm",
    "lambda",
    "lambda_min_H",
    "step_norm",
    "step_kind",
    "P_estimate",
    "inner_iters",
    "backtracks",
    "projected",
    "wall_time_s",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Metadata from the leading comment line (`algorithm`, `p_star`, ...).
    pub meta: BTreeMap<String, String>,
    pub records: Vec<IterationRecord>,
}

impl Trace {
    pub fn p_star(&self) -> Option<f64> {
        self.meta.get("p_star").and_then(|v| v.parse().ok())
    }

    /// `algorithm` plus the repetition when it is not the first.
    pub fn label(&self) -> Option<String> {
        let alg = self.meta.get("algorithm")?;
        Some(match self.meta.get("repetition").map(String::as_str) {
            None | Some("0") => alg.clone(),
            Some(r) => format!("{alg} (rep {r})"),
        })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Serializes `records`; `meta` keys and values must not contain spaces,
/// `=` or newlines.
pub fn format_trace(meta: &BTreeMap<String, String>, records: &[IterationRecord]) -> String {
    let mut out = String::new();
    out.push_str("# schema=");
    out.push_str(&TRACE_SCHEMA_VERSION.to_string());
    for (k, v) in meta {
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
    out.push_str(&TRACE_COLUMNS.join(","));
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{},{},{:e},{},{:e},{},{},{},{:e}",
            r.t,
            r.x_norm,
            r.g_norm,
            opt(r.lambda),
            opt(r.lambda_min_h),
            r.step_norm,
            r.step_kind,
            r.p_estimate,
            r.inner_iters,
            r.backtracks,
            r.projected as u8,
            r.wall_time_s,
        );
    }
    out
}

/// Parses a trace; errors carry the 1-based line number.
pub fn parse_trace(text: &str) -> Result<Trace, String> {
    let mut meta = BTreeMap::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, line)) = lines.peek() {
        let Some(rest) = line.strip_prefix('#') else { break };
        for item in rest.split_whitespace() {
            if let Some((k, v)) = item.split_once('=') {
                meta.insert(k.to_string(), v.to_string());
            }
        }
        lines.next();
    }
    if let Some(v) = meta.remove("schema")
        && v != TRACE_SCHEMA_VERSION.to_string()
    {
        return Err(format!("unsupported trace schema {v}"));
    }
    let (hline, header) = lines.next().ok_or("missing header row")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != TRACE_COLUMNS {
        return Err(format!(
            "line {}: expected header '{}'",
            hline + 1,
            TRACE_COLUMNS.join(",")
        ));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let lineno = i + 1;
        if fields.len() != TRACE_COLUMNS.len() {
            return Err(format!(
                "line {lineno}: expected {} fields, found {}",
                TRACE_COLUMNS.len(),
                fields.len()
            ));
        }
        let num = |j: usize| -> Result<f64, String> {
            fields[j]
                .parse::<f64>()
                .map_err(|e| format!("line {lineno}, column {}: {e}", TRACE_COLUMNS[j]))
        };
        let int = |j: usize| -> Result<usize, String> {
            fields[j]
                .parse::<usize>()
                .map_err(|e| format!("line {lineno}, column {}: {e}", TRACE_COLUMNS[j]))
        };
        let maybe = |j: usize| -> Result<Option<f64>, String> {
            if fields[j].is_empty() { Ok(None) } else { num(j).map(Some) }
        };
        records.push(IterationRecord {
            t: int(0)?,
            x_norm: num(1)?,
            g_norm: num(2)?,
            lambda: maybe(3)?,
            lambda_min_h: maybe(4)?,
            step_norm: num(5)?,
            step_kind: fields[6]
                .parse::<StepKind>()
                .map_err(|e| format!("line {lineno}: {e}"))?,
            p_estimate: num(7)?,
            inner_iters: int(8)?,
            backtracks: int(9)?,
            projected: match fields[10] {
                "0" => false,
                "1" => true,
                other => return Err(format!("line {lineno}, column projected: '{other}'")),
            },
            wall_time_s: num(11)?,
        });
    }
    Ok(Trace { meta, records })
}
