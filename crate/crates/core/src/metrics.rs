//! Run metrics: latency, throughput, utilization, energy efficiency and
//! migration counts.

use serde::{Deserialize, Serialize};

use crate::domain::MdcId;
use crate::engine::{AuditRecord, CsvRow, SimOutput, TraceRecord};
use crate::error::{Error, Result};

/// Per-step quantities every metric reads. Implemented by in-memory records
/// and by rows parsed back from trace files.
pub trait StepView {
    fn latencies(&self) -> &[f64];
    fn busy(&self) -> &[f64];
    fn operational(&self) -> &[bool];
    fn consumed(&self) -> &[f64];
    fn battery(&self) -> &[f64];
    fn migrations(&self) -> usize;
    fn scalings(&self) -> usize;
}

macro_rules! step_view {
    ($t:ty) => {
        impl StepView for $t {
            fn latencies(&self) -> &[f64] {
                &self.latencies
            }
            fn busy(&self) -> &[f64] {
                &self.busy
            }
            fn operational(&self) -> &[bool] {
                &self.operational
            }
            fn consumed(&self) -> &[f64] {
                &self.consumed
            }
            fn battery(&self) -> &[f64] {
                &self.battery
            }
            fn migrations(&self) -> usize {
                <$t>::migrations_count(self)
            }
            fn scalings(&self) -> usize {
                <$t>::scalings_count(self)
            }
        }
    };
}

impl TraceRecord {
    fn migrations_count(&self) -> usize {
        self.migrations()
    }
    fn scalings_count(&self) -> usize {
        self.scalings()
    }
}

impl CsvRow {
    fn migrations_count(&self) -> usize {
        self.migrations
    }
    fn scalings_count(&self) -> usize {
        self.scalings
    }
}

step_view!(TraceRecord);
step_view!(CsvRow);

/// Mean task latency, s. `None` when nothing completed.
pub fn compute_lt<R: StepView>(trace: &[R]) -> Option<f64> {
    let (sum, n) = trace
        .iter()
        .flat_map(|r| r.latencies())
        .fold((0.0, 0usize), |(s, n), &l| (s + l, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Tasks completed within the horizon.
pub fn compute_th<R: StepView>(trace: &[R]) -> usize {
    trace.iter().map(|r| r.latencies().len()).sum()
}

/// Busy server-time over operational server-time; 0 without operational time.
/// `server_mdc[s]` is the MDC hosting server `s`.
pub fn compute_ru<R: StepView>(trace: &[R], server_mdc: &[MdcId]) -> f64 {
    let mut busy = 0.0;
    let mut up = 0usize;
    for r in trace {
        for (s, m) in server_mdc.iter().enumerate() {
            if r.operational()[m.index()] {
                busy += r.busy()[s];
                up += 1;
            }
        }
    }
    if up == 0 {
        0.0
    } else {
        busy / up as f64
    }
}

/// Total energy drawn by all MDCs, J.
pub fn total_consumed<R: StepView>(trace: &[R]) -> f64 {
    trace.iter().flat_map(|r| r.consumed()).sum()
}

/// Completed tasks per joule. `None` when nothing was consumed or completed.
pub fn compute_energy_efficiency<R: StepView>(trace: &[R]) -> Result<Option<f64>> {
    let th = compute_th(trace);
    let e = total_consumed(trace);
    match (th, e > 0.0) {
        (0, false) => Ok(None),
        (_, false) => Err(Error::Accounting(format!("{th} tasks completed without energy use"))),
        (_, true) => Ok(Some(th as f64 / e)),
    }
}

/// Divides each value by the group maximum.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|v| v / max).collect()
}

/// Normalized latency of each summary within its group. Summaries without a
/// defined latency are skipped with a warning and map to `None`.
pub fn normalize_latency(group: &[Summary]) -> Vec<Option<f64>> {
    let defined: Vec<f64> = group.iter().filter_map(|s| s.lt).collect();
    let norm = normalize(&defined);
    let mut it = norm.into_iter();
    group
        .iter()
        .map(|s| match s.lt {
            Some(_) => it.next(),
            None => {
                log::warn!("{} has no completed tasks; left out of normalization", s.key);
                None
            }
        })
        .collect()
}

/// Counts of migrations by `(from, to)` server.
pub fn migration_matrix(audits: &[AuditRecord], n_servers: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_servers]; n_servers];
    for a in audits {
        m[a.audit.from.index()][a.audit.to.index()] += 1;
    }
    m
}

/// Metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub key: String,
    /// Mean latency, s; `None` without completions.
    pub lt: Option<f64>,
    pub th: usize,
    pub injected: usize,
    pub ru: f64,
    pub energy_efficiency: Option<f64>,
    /// Energy drawn per MDC, J.
    pub consumed: Vec<f64>,
    pub migrations: usize,
    pub scalings: usize,
    /// `[from][to]` migration counts by server.
    pub migration_matrix: Vec<Vec<usize>>,
    pub min_battery: f64,
    pub max_battery: f64,
    /// Largest per-MDC energy conservation error, J.
    pub ledger_error: f64,
}

/// Computes a summary from a trace and the run's audits.
pub fn summarize<R: StepView>(key: &str, trace: &[R], audits: &[AuditRecord], server_mdc: &[MdcId], injected: usize) -> Result<Summary> {
    let n_mdcs = trace.first().map_or(0, |r| r.battery().len());
    let mut consumed = vec![0.0; n_mdcs];
    for r in trace {
        for (c, x) in consumed.iter_mut().zip(r.consumed()) {
            *c += x;
        }
    }
    let batteries = trace.iter().flat_map(|r| r.battery().iter().copied());
    let (min_battery, max_battery) = batteries.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| (lo.min(b), hi.max(b)));
    Ok(Summary {
        key: key.to_string(),
        lt: compute_lt(trace),
        th: compute_th(trace),
        injected,
        ru: compute_ru(trace, server_mdc),
        energy_efficiency: compute_energy_efficiency(trace)?,
        consumed,
        migrations: trace.iter().map(|r| r.migrations()).sum(),
        scalings: trace.iter().map(|r| r.scalings()).sum(),
        migration_matrix: migration_matrix(audits, server_mdc.len()),
        min_battery,
        max_battery,
        ledger_error: 0.0,
    })
}

impl Summary {
    /// Summary of a finished run, including its energy conservation error.
    pub fn of(out: &SimOutput) -> Result<Self> {
        let server_mdc: Vec<MdcId> = out.network.servers().iter().map(|s| s.mdc).collect();
        let mut s = summarize(&out.config.key(), &out.trace, &out.audits, &server_mdc, out.injected)?;
        s.ledger_error = out.ledger.iter().map(|l| l.imbalance().abs()).fold(0.0, f64::max);
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(latencies: Vec<f64>, busy: f64, op: bool, consumed: f64) -> TraceRecord {
        TraceRecord {
            step: 0,
            battery: vec![1000.0],
            operational: vec![op],
            harvested: vec![0.0],
            consumed: vec![consumed],
            overflow: vec![0.0],
            freq: vec![2e9],
            busy: vec![busy],
            decisions: vec![],
            arrivals: 0,
            latencies,
        }
    }

    #[test]
    fn latency_mean_and_undefined() {
        assert_eq!(compute_lt(&[rec(vec![2.0], 0.0, true, 0.0)]), Some(2.0));
        assert_eq!(compute_lt(&[rec(vec![1.0], 0.0, true, 0.0), rec(vec![3.0], 0.0, true, 0.0)]), Some(2.0));
        assert_eq!(compute_lt::<TraceRecord>(&[]), None);
        assert_eq!(compute_th(&[rec(vec![1.0, 2.0], 0.0, true, 0.0)]), 2);
    }

    #[test]
    fn utilization_excludes_outages() {
        let m = [MdcId(0)];
        let half: Vec<_> = (0..100).map(|i| rec(vec![], f64::from(u8::from(i < 50)), true, 0.0)).collect();
        assert_eq!(compute_ru(&half, &m), 0.5);
        let idle: Vec<_> = (0..10).map(|_| rec(vec![], 0.0, true, 0.0)).collect();
        assert_eq!(compute_ru(&idle, &m), 0.0);
        let full: Vec<_> = (0..10).map(|_| rec(vec![], 1.0, true, 0.0)).collect();
        assert_eq!(compute_ru(&full, &m), 1.0);
        let mut outage = full.clone();
        outage.extend((0..10).map(|_| rec(vec![], 0.0, false, 0.0)));
        assert_eq!(compute_ru(&outage, &m), 1.0);
        let none: Vec<_> = (0..10).map(|_| rec(vec![], 0.0, false, 0.0)).collect();
        assert_eq!(compute_ru(&none, &m), 0.0);
    }

    #[test]
    fn efficiency_ratio() {
        let mut t: Vec<_> = (0..100).map(|_| rec(vec![1.0], 0.0, true, 4.0)).collect();
        assert_eq!(compute_energy_efficiency(&t).unwrap(), Some(0.25));
        t.iter_mut().for_each(|r| r.latencies.clear());
        assert_eq!(compute_energy_efficiency(&t).unwrap(), Some(0.0));
        let empty = [rec(vec![], 0.0, true, 0.0)];
        assert_eq!(compute_energy_efficiency(&empty).unwrap(), None);
        assert!(compute_energy_efficiency(&[rec(vec![1.0], 0.0, true, 0.0)]).is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize(&[2.0, 4.0]), vec![0.5, 1.0]);
        assert_eq!(normalize(&[3.0, 3.0]), vec![1.0, 1.0]);
        assert_eq!(normalize(&[1.0, 2.0, 4.0, 8.0]), vec![0.125, 0.25, 0.5, 1.0]);
    }
}
