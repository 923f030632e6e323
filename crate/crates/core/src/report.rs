//! Files written for single runs and sweeps. Every table is plain CSV with
//! six decimals; undefined values are empty cells.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::MdcId;
use crate::engine::{trace_from_csv, trace_to_csv, AuditRecord, EnergyLedger, Policy, SimConfig, SimOutput, WindowRecord};
use crate::error::{Error, Result};
use crate::grid::{Experiment, GridReport};
use crate::metrics::{summarize, Summary};

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(f6).unwrap_or_default()
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    fs::write(&p, body)?;
    Ok(p)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report values always serialize");
    s.push('\n');
    s
}

/// Metadata stored next to a run's trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub summary: Summary,
    pub ledger: Vec<EnergyLedger>,
    /// MDC of each server, by server index.
    pub server_mdc: Vec<MdcId>,
}

/// Writes a run's trace, summary, scheduling windows, audits and resolved
/// configuration into `dir`, each named by the run key.
pub fn write_run(dir: &Path, out: &SimOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let key = out.config.key();
    let record = RunRecord {
        summary: Summary::of(out)?,
        ledger: out.ledger.clone(),
        server_mdc: out.network.servers().iter().map(|s| s.mdc).collect(),
    };
    let manifest = toml::to_string(&out.config).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(vec![
        write(dir, &format!("{key}.trace.csv"), &trace_to_csv(&out.trace))?,
        write(dir, &format!("{key}.summary.json"), &json(&record))?,
        write(dir, &format!("{key}.windows.json"), &json(&out.windows))?,
        write(dir, &format!("{key}.audits.json"), &json(&out.audits))?,
        write(dir, &format!("{key}.manifest.toml"), &manifest)?,
    ])
}

/// Recomputes the summary of a stored run from its trace, audits and
/// server map. `trace` is the path of the `.trace.csv` file.
pub fn recompute_summary(trace: &Path) -> Result<Summary> {
    let name = trace
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(".trace.csv"))
        .ok_or_else(|| Error::Config(format!("{} is not a .trace.csv file", trace.display())))?;
    let dir = trace.parent().unwrap_or(Path::new("."));
    let rows = trace_from_csv(&fs::read_to_string(trace)?)?;
    let record: RunRecord = serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.summary.json")))?)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let audits: Vec<AuditRecord> = serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.audits.json")))?)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let injected = rows.iter().map(|r| r.arrivals as usize).sum();
    let mut s = summarize(name, &rows, &audits, &record.server_mdc, injected)?;
    s.ledger_error = record.ledger.iter().map(|l| l.imbalance().abs()).fold(0.0, f64::max);
    Ok(s)
}

/// Reads the scheduling windows stored next to a trace.
pub fn read_windows(path: &Path) -> Result<Vec<WindowRecord>> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Parse(e.to_string()))
}

fn mean_by<K: Ord + Clone>(items: impl IntoIterator<Item = (K, f64)>) -> BTreeMap<K, f64> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for (k, v) in items {
        let e = acc.entry(k).or_default();
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn series_table<X: std::fmt::Display + Ord>(name: &str, rows: BTreeMap<(Policy, X), f64>) -> String {
    let mut out = format!("policy,{name},value\n");
    for ((p, x), v) in rows {
        let _ = writeln!(out, "{},{x},{}", p.name(), f6(v));
    }
    out
}

/// Orderable wrapper for axis values that are plain floats.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Axis(f64);

impl Eq for Axis {}

impl PartialOrd for Axis {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Axis {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Writes the per-run and aggregate tables, plot data and JSON summaries of a
/// sweep into `dir`.
pub fn write_grid(dir: &Path, exp: &Experiment, report: &GridReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    let mut cells = String::from("key,policy,n_mdcs,servers_per_mdc,cm,app,seed,lt,th,injected,ru,energy_efficiency,migrations,scalings,min_battery,max_battery,ledger_error,error\n");
    for r in &report.runs {
        let c = &r.cell;
        let head = format!("{},{},{},{},{},{},{}", r.config.key(), c.policy.name(), c.n_mdcs, c.servers_per_mdc, c.cm, c.app, r.seed);
        match &r.summary {
            Some(s) => {
                let _ = writeln!(
                    cells,
                    "{head},{},{},{},{},{},{},{},{},{},{:e},,",
                    opt(s.lt),
                    s.th,
                    s.injected,
                    f6(s.ru),
                    opt(s.energy_efficiency),
                    s.migrations,
                    s.scalings,
                    f6(s.min_battery),
                    f6(s.max_battery),
                    s.ledger_error,
                );
            }
            None => {
                let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], " ");
                let _ = writeln!(cells, "{head},,,,,,,,,,,{err}");
            }
        }
    }
    files.push(write(dir, "cells.csv", &cells)?);

    let mut agg = String::from("policy,n_mdcs,servers_per_mdc,cm,app,runs,failed,lt,norm_lt,th,ru,energy_efficiency,migrations,scalings\n");
    for a in &report.aggregates {
        let c = &a.cell;
        let _ = writeln!(
            agg,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.policy.name(),
            c.n_mdcs,
            c.servers_per_mdc,
            c.cm,
            c.app,
            a.runs,
            a.failed,
            opt(a.lt),
            opt(a.norm_lt),
            f6(a.th),
            f6(a.ru),
            opt(a.energy_efficiency),
            f6(a.migrations),
            f6(a.scalings),
        );
    }
    files.push(write(dir, "aggregate.csv", &agg)?);

    let norm = || report.aggregates.iter().filter_map(|a| a.norm_lt.map(|v| (a, v)));
    let by_mdcs = mean_by(norm().map(|(a, v)| ((a.cell.policy, a.cell.n_mdcs), v)));
    files.push(write(dir, "lt_vs_mdcs.csv", &series_table("n_mdcs", by_mdcs))?);
    let by_servers = mean_by(norm().map(|(a, v)| ((a.cell.policy, a.cell.servers_per_mdc), v)));
    files.push(write(dir, "lt_vs_servers.csv", &series_table("servers_per_mdc", by_servers))?);
    let by_cm = mean_by(norm().map(|(a, v)| ((a.cell.policy, Axis(a.cell.cm)), v)));
    files.push(write(dir, "lt_vs_cm.csv", &series_table("cm", by_cm))?);
    let th_cm = mean_by(report.aggregates.iter().map(|a| ((a.cell.policy, Axis(a.cell.cm)), a.th)));
    files.push(write(dir, "th_vs_cm.csv", &series_table("cm", th_cm))?);

    // mean battery per policy at each scheduling boundary
    let policies: Vec<Policy> = exp.grid.policies.clone();
    let len = report.runs.iter().map(|r| r.battery_series.len()).max().unwrap_or(0);
    let mut battery = format!("step,{}\n", policies.iter().map(|p| p.name()).collect::<Vec<_>>().join(","));
    for i in 0..len {
        let step = i as u64 * exp.sim.scheduling_period;
        let cols: Vec<String> = policies
            .iter()
            .map(|&p| {
                let vals: Vec<f64> = report
                    .runs
                    .iter()
                    .filter(|r| r.cell.policy == p)
                    .filter_map(|r| r.battery_series.get(i).copied())
                    .collect();
                if vals.is_empty() {
                    String::new()
                } else {
                    f6(vals.iter().sum::<f64>() / vals.len() as f64)
                }
            })
            .collect();
        let _ = writeln!(battery, "{step},{}", cols.join(","));
    }
    files.push(write(dir, "battery_series.csv", &battery)?);

    let mut heat: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for s in report.runs.iter().filter_map(|r| r.summary.as_ref()) {
        for (i, row) in s.migration_matrix.iter().enumerate() {
            for (j, &n) in row.iter().enumerate() {
                if n > 0 {
                    *heat.entry((i, j)).or_default() += n;
                }
            }
        }
    }
    let mut hm = String::from("from_server,to_server,count\n");
    for ((i, j), n) in heat {
        let _ = writeln!(hm, "{i},{j},{n}");
    }
    files.push(write(dir, "migration_heatmap.csv", &hm)?);

    let summaries: Vec<&Summary> = report.runs.iter().filter_map(|r| r.summary.as_ref()).collect();
    files.push(write(dir, "summaries.json", &json(&summaries))?);
    files.push(write(dir, "aggregate.json", &json(&report.aggregates))?);
    files.push(write(dir, "manifest.toml", &exp.to_toml())?);
    let resolved: Vec<SimConfig> = report.runs.iter().map(|r| r.config.clone()).collect();
    files.push(write(dir, "runs_manifest.json", &json(&grid_manifest(&resolved)))?);
    Ok(files)
}

/// Resolved configuration of every run of a sweep, keyed by run key.
pub fn grid_manifest(runs: &[SimConfig]) -> BTreeMap<String, SimConfig> {
    runs.iter().map(|c| (c.key(), c.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_simulation;

    #[test]
    fn stored_run_recomputes_to_the_same_summary() {
        let cfg = SimConfig {
            horizon: 600,
            ..SimConfig::default()
        };
        let out = run_simulation(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_run(dir.path(), &out).unwrap();
        let s = recompute_summary(&files[0]).unwrap();
        let direct = Summary::of(&out).unwrap();
        assert_eq!(s.th, direct.th);
        assert_eq!(s.injected, direct.injected);
        assert_eq!(s.migrations, direct.migrations);
        assert_eq!(s.migration_matrix, direct.migration_matrix);
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-5,
            (None, None) => true,
            _ => false,
        };
        assert!(close(s.lt, direct.lt));
        assert!((s.ru - direct.ru).abs() < 1e-5);
    }
}
