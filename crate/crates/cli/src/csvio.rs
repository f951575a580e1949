//! Trace CSV schema shared by all commands: one row per sample time with
//! columns t, risk, comp_0..comp_K and, when state dumps are enabled,
//! a_0..a_{m-1}, s_0..s_{m-1}.

use anyhow::{bail, Context, Result};
use slowfast_core::trace::RiskTrace;
use std::io::Write;
use std::path::Path;

/// A trace plus optional per-particle columns and named extra columns.
#[derive(Debug, Clone, Default)]
pub struct TraceTable {
    pub trace: RiskTrace,
    /// Per-sample a_i values (empty when no state dump).
    pub a_cols: Vec<Vec<f64>>,
    /// Per-sample s_i values (empty when no state dump).
    pub s_cols: Vec<Vec<f64>>,
    /// Named diagnostic columns appended after the state dump.
    pub extra: Vec<(String, Vec<f64>)>,
}

pub fn write_trace_csv(path: &Path, table: &TraceTable) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    let k = table.trace.components.first().map_or(0, |c| c.len());
    let m = table.a_cols.first().map_or(0, |c| c.len());
    let mut header = String::from("t,risk");
    for i in 0..k {
        header.push_str(&format!(",comp_{i}"));
    }
    for i in 0..m {
        header.push_str(&format!(",a_{i}"));
    }
    for i in 0..m {
        header.push_str(&format!(",s_{i}"));
    }
    for (name, _) in &table.extra {
        header.push_str(&format!(",{name}"));
    }
    writeln!(out, "{header}")?;
    for row in 0..table.trace.len() {
        let mut line = format!("{},{}", table.trace.times[row], table.trace.risk[row]);
        for c in &table.trace.components[row] {
            line.push_str(&format!(",{c}"));
        }
        if m > 0 {
            for v in &table.a_cols[row] {
                line.push_str(&format!(",{v}"));
            }
            for v in &table.s_cols[row] {
                line.push_str(&format!(",{v}"));
            }
        }
        for (_, col) in &table.extra {
            line.push_str(&format!(",{}", col[row]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<TraceTable> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading trace {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty trace file")?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || cols.get(1) != Some(&"risk") {
        bail!("unexpected trace header in {}", path.display());
    }
    let n_comp = cols.iter().filter(|c| c.starts_with("comp_")).count();
    let n_a = cols.iter().filter(|c| c.starts_with("a_")).count();
    let n_s = cols.iter().filter(|c| c.starts_with("s_")).count();
    let extra_names: Vec<String> = cols[2 + n_comp + n_a + n_s..]
        .iter()
        .map(|c| c.to_string())
        .collect();
    let mut table = TraceTable::default();
    table.extra = extra_names.iter().map(|n| (n.clone(), Vec::new())).collect();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|v| v.parse::<f64>()).collect();
        let vals = vals.with_context(|| format!("line {} of {}", lineno + 2, path.display()))?;
        if vals.len() != cols.len() {
            bail!("ragged row at line {} of {}", lineno + 2, path.display());
        }
        table
            .trace
            .push(vals[0], vals[1], vals[2..2 + n_comp].to_vec());
        if n_a > 0 {
            table
                .a_cols
                .push(vals[2 + n_comp..2 + n_comp + n_a].to_vec());
            table
                .s_cols
                .push(vals[2 + n_comp + n_a..2 + n_comp + n_a + n_s].to_vec());
        }
        for (k, (_, col)) in table.extra.iter_mut().enumerate() {
            col.push(vals[2 + n_comp + n_a + n_s + k]);
        }
    }
    Ok(table)
}
