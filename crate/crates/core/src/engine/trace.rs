use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::MdcId;
use crate::error::{Error, Result};
use crate::scheduler::{Decision, MigrationAudit, Scenario};

/// State of the system at the end of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    /// Battery after the step, J, by MDC.
    pub battery: Vec<f64>,
    /// Whether each MDC was running during the step.
    pub operational: Vec<bool>,
    pub harvested: Vec<f64>,
    pub consumed: Vec<f64>,
    /// Harvest discarded at full charge, J.
    pub overflow: Vec<f64>,
    /// Frequency during the step, Hz, by server.
    pub freq: Vec<f64>,
    /// Busy fraction of the slot, by server.
    pub busy: Vec<f64>,
    /// Decisions applied at the start of the step.
    pub decisions: Vec<Decision>,
    pub arrivals: u32,
    /// Latency of every task completed during the step, s.
    pub latencies: Vec<f64>,
}

impl TraceRecord {
    pub fn completed(&self) -> usize {
        self.latencies.len()
    }

    pub fn migrations(&self) -> usize {
        self.decisions.iter().filter(|d| d.is_migration()).count()
    }

    pub fn scalings(&self) -> usize {
        self.decisions.len() - self.migrations()
    }
}

/// Classification and outcome of one scheduling round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub step: u64,
    pub scenario: Scenario,
    pub surplus: BTreeSet<MdcId>,
    pub deficit: BTreeSet<MdcId>,
    pub neutral: BTreeSet<MdcId>,
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
    pub predicted_tasks: f64,
    pub scalings: usize,
    pub migrations: usize,
}

/// A migration audit stamped with its decision step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub step: u64,
    pub audit: MigrationAudit,
}

/// Per-MDC energy totals over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub mdc: MdcId,
    pub initial: f64,
    pub harvested: f64,
    pub consumed: f64,
    pub overflow: f64,
    pub fin: f64,
}

impl EnergyLedger {
    /// `initial + harvested - consumed - overflow - final`; zero up to rounding.
    pub fn imbalance(&self) -> f64 {
        self.initial + self.harvested - self.consumed - self.overflow - self.fin
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

/// Column names for a run with `n_mdcs` MDCs and `n_servers` servers.
pub fn trace_header(n_mdcs: usize, n_servers: usize) -> String {
    let mut cols = vec!["step".to_string()];
    for prefix in ["battery", "operational", "harvested", "consumed", "overflow"] {
        cols.extend((0..n_mdcs).map(|m| format!("{prefix}_m{m}")));
    }
    for prefix in ["freq", "busy"] {
        cols.extend((0..n_servers).map(|s| format!("{prefix}_s{s}")));
    }
    cols.extend(["scalings", "migrations", "arrivals", "completed", "latencies"].map(String::from));
    cols.join(",")
}

/// Renders a trace as CSV with six decimals for every real value. Latencies
/// of one step are `;`-separated.
pub fn trace_to_csv(trace: &[TraceRecord]) -> String {
    let (nm, ns) = trace.first().map_or((0, 0), |r| (r.battery.len(), r.freq.len()));
    let mut out = trace_header(nm, ns);
    out.push('\n');
    for r in trace {
        let mut row = vec![r.step.to_string()];
        row.extend(r.battery.iter().map(|&x| fmt_f(x)));
        row.extend(r.operational.iter().map(|&b| u8::from(b).to_string()));
        for series in [&r.harvested, &r.consumed, &r.overflow, &r.freq, &r.busy] {
            row.extend(series.iter().map(|&x| fmt_f(x)));
        }
        row.push(r.scalings().to_string());
        row.push(r.migrations().to_string());
        row.push(r.arrivals.to_string());
        row.push(r.completed().to_string());
        row.push(r.latencies.iter().map(|&x| fmt_f(x)).collect::<Vec<_>>().join(";"));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Per-step quantities recovered from a trace CSV. Decisions are summarised
/// as counts only.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub step: u64,
    pub battery: Vec<f64>,
    pub operational: Vec<bool>,
    pub harvested: Vec<f64>,
    pub consumed: Vec<f64>,
    pub overflow: Vec<f64>,
    pub freq: Vec<f64>,
    pub busy: Vec<f64>,
    pub scalings: usize,
    pub migrations: usize,
    pub arrivals: u32,
    pub latencies: Vec<f64>,
}

/// Parses the output of [`trace_to_csv`].
pub fn trace_from_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Parse("empty trace".into()))?.split(',').collect();
    let nm = header.iter().filter(|c| c.starts_with("battery_m")).count();
    let ns = header.iter().filter(|c| c.starts_with("freq_s")).count();
    if header.len() != 1 + 5 * nm + 2 * ns + 5 {
        return Err(Error::Parse("unexpected trace header".into()));
    }
    let perr = |line: usize, what: &str| Error::Parse(format!("trace line {line}: bad {what}"));
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        let ln = ln + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(perr(ln, "column count"));
        }
        let f = |i: usize| cells[i].parse::<f64>().map_err(|_| perr(ln, header[i]));
        let block = |start: usize, n: usize| (start..start + n).map(f).collect::<Result<Vec<f64>>>();
        let mut at = 1;
        let battery = block(at, nm)?;
        at += nm;
        let operational = (at..at + nm).map(|i| cells[i] == "1").collect();
        at += nm;
        let harvested = block(at, nm)?;
        at += nm;
        let consumed = block(at, nm)?;
        at += nm;
        let overflow = block(at, nm)?;
        at += nm;
        let freq = block(at, ns)?;
        at += ns;
        let busy = block(at, ns)?;
        at += ns;
        let int = |i: usize| cells[i].parse::<u64>().map_err(|_| perr(ln, header[i]));
        let latencies = if cells[at + 4].is_empty() {
            Vec::new()
        } else {
            cells[at + 4]
                .split(';')
                .map(|x| x.parse::<f64>().map_err(|_| perr(ln, "latencies")))
                .collect::<Result<_>>()?
        };
        rows.push(CsvRow {
            step: int(0)?,
            battery,
            operational,
            harvested,
            consumed,
            overflow,
            freq,
            busy,
            scalings: int(at)? as usize,
            migrations: int(at + 1)? as usize,
            arrivals: int(at + 2)? as u32,
            latencies,
        });
    }
    Ok(rows)
}
