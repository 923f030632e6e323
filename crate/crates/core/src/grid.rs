//! Experiment files, parameter sweeps and their aggregation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_simulation, AppSource, AuditRecord, Policy, SimConfig, SimOutput};
use crate::error::{Error, Result};
use crate::metrics::{normalize, Summary};

/// Axes of a sweep. Every combination, with every seed, is one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub policies: Vec<Policy>,
    pub n_mdcs: Vec<usize>,
    pub servers_per_mdc: Vec<usize>,
    pub cm: Vec<f64>,
    pub apps: Vec<AppSource>,
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            policies: Policy::ALL.to_vec(),
            n_mdcs: vec![2, 4],
            servers_per_mdc: vec![1, 2],
            cm: vec![0.75, 1.25],
            apps: [1, 6, 8].map(|job| AppSource::Bundled { job }).to_vec(),
            seeds: vec![0, 1, 2],
            workers: 0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("policies", self.policies.is_empty()),
            ("n_mdcs", self.n_mdcs.is_empty()),
            ("servers_per_mdc", self.servers_per_mdc.is_empty()),
            ("cm", self.cm.is_empty()),
            ("apps", self.apps.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        match empty.iter().find(|(_, e)| *e) {
            Some((name, _)) => Err(Error::Config(format!("grid axis {name} is empty"))),
            None => Ok(()),
        }
    }

    /// Every run of the sweep over `base`, in a fixed order.
    pub fn cells(&self, base: &SimConfig) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &policy in &self.policies {
            for &n in &self.n_mdcs {
                for &s in &self.servers_per_mdc {
                    for &cm in &self.cm {
                        for app in &self.apps {
                            for &seed in &self.seeds {
                                let mut c = base.clone();
                                c.policy = policy;
                                c.topology.n_mdcs = n;
                                c.topology.servers_per_mdc = s;
                                c.topology.attachment_m = c.topology.attachment_m.min(n.saturating_sub(1)).max(1);
                                c.harvest.cm = cm;
                                c.application = app.clone();
                                c.seed = seed;
                                out.push(c);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// A configuration file: one base run plus an optional sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    #[serde(flatten)]
    pub sim: SimConfig,
    #[serde(default)]
    pub grid: GridSpec,
}

impl Experiment {
    pub fn from_toml(text: &str) -> Result<Self> {
        let e: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        e.sim.validate()?;
        e.grid.validate()?;
        Ok(e)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiments always serialize")
    }
}

/// Configuration cell: everything but the seed.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CellKey {
    pub policy: Policy,
    pub n_mdcs: usize,
    pub servers_per_mdc: usize,
    pub cm: f64,
    pub app: String,
}

impl CellKey {
    pub fn of(c: &SimConfig) -> Self {
        Self {
            policy: c.policy,
            n_mdcs: c.topology.n_mdcs,
            servers_per_mdc: c.topology.servers_per_mdc,
            cm: c.harvest.cm,
            app: c.application.label(),
        }
    }

    /// The normalization group: the cell without its policy.
    fn group(&self) -> (usize, usize, u64, String) {
        (self.n_mdcs, self.servers_per_mdc, self.cm.to_bits(), self.app.clone())
    }

    fn order(&self) -> (usize, usize, u64, String, Policy) {
        let (n, s, cm, app) = self.group();
        (n, s, cm, app, self.policy)
    }
}

/// Outcome of one run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub cell: CellKey,
    pub seed: u64,
    pub config: SimConfig,
    pub summary: Option<Summary>,
    pub error: Option<String>,
    pub audits: Vec<AuditRecord>,
    /// Mean battery across MDCs at each scheduling boundary, J.
    pub battery_series: Vec<f64>,
    /// Migrations applied in windows that had a deficit MDC.
    pub deficit_migrations: usize,
}

impl RunResult {
    fn from_output(cfg: SimConfig, out: Result<SimOutput>) -> Self {
        let cell = CellKey::of(&cfg);
        let seed = cfg.seed;
        let done = out.and_then(|o| Summary::of(&o).map(|s| (o, s)));
        match done {
            Ok((o, summary)) => {
                let period = o.config.scheduling_period as usize;
                let battery_series = o
                    .trace
                    .iter()
                    .step_by(period)
                    .map(|r| r.battery.iter().sum::<f64>() / r.battery.len() as f64)
                    .collect();
                let deficit_migrations = o.windows.iter().filter(|w| !w.deficit.is_empty()).map(|w| w.migrations).sum();
                Self {
                    cell,
                    seed,
                    config: cfg,
                    summary: Some(summary),
                    error: None,
                    audits: o.audits,
                    battery_series,
                    deficit_migrations,
                }
            }
            Err(e) => Self {
                cell,
                seed,
                config: cfg,
                summary: None,
                error: Some(e.to_string()),
                audits: Vec::new(),
                battery_series: Vec::new(),
                deficit_migrations: 0,
            },
        }
    }
}

/// Seed-averaged metrics of one configuration cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub cell: CellKey,
    pub runs: usize,
    pub failed: usize,
    /// Mean of the defined per-run latencies, s.
    pub lt: Option<f64>,
    pub th: f64,
    pub ru: f64,
    pub energy_efficiency: Option<f64>,
    pub migrations: f64,
    pub scalings: f64,
    /// Latency over the worst policy's latency in the same group.
    pub norm_lt: Option<f64>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Averages runs over seeds, then normalizes latency within each group of
/// cells that differ only by policy.
pub fn aggregate(runs: &[RunResult]) -> Vec<Aggregate> {
    let mut by_cell: BTreeMap<(usize, usize, u64, String, Policy), Vec<&RunResult>> = BTreeMap::new();
    for r in runs {
        by_cell.entry(r.cell.order()).or_default().push(r);
    }
    let mut aggs: Vec<Aggregate> = by_cell
        .into_values()
        .map(|rs| {
            let ok: Vec<&Summary> = rs.iter().filter_map(|r| r.summary.as_ref()).collect();
            Aggregate {
                cell: rs[0].cell.clone(),
                runs: rs.len(),
                failed: rs.len() - ok.len(),
                lt: mean(ok.iter().filter_map(|s| s.lt)),
                th: mean(ok.iter().map(|s| s.th as f64)).unwrap_or(0.0),
                ru: mean(ok.iter().map(|s| s.ru)).unwrap_or(0.0),
                energy_efficiency: mean(ok.iter().filter_map(|s| s.energy_efficiency)),
                migrations: mean(ok.iter().map(|s| s.migrations as f64)).unwrap_or(0.0),
                scalings: mean(ok.iter().map(|s| s.scalings as f64)).unwrap_or(0.0),
                norm_lt: None,
            }
        })
        .collect();

    let mut groups: BTreeMap<(usize, usize, u64, String), Vec<usize>> = BTreeMap::new();
    for (i, a) in aggs.iter().enumerate() {
        groups.entry(a.cell.group()).or_default().push(i);
    }
    for idx in groups.values() {
        let defined: Vec<usize> = idx.iter().copied().filter(|&i| aggs[i].lt.is_some()).collect();
        for &i in idx {
            if aggs[i].lt.is_none() {
                log::warn!("cell {:?} completed no tasks; left out of normalization", aggs[i].cell);
            }
        }
        let lts: Vec<f64> = defined.iter().map(|&i| aggs[i].lt.expect("filtered")).collect();
        for (&i, v) in defined.iter().zip(normalize(&lts)) {
            aggs[i].norm_lt = Some(v);
        }
    }
    aggs
}

/// Every run of a sweep and the seed-averaged cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub runs: Vec<RunResult>,
    pub aggregates: Vec<Aggregate>,
}

/// Runs every cell of `grid` over `base` in parallel. Failed runs are
/// recorded, not fatal.
pub fn run_grid(base: &SimConfig, grid: &GridSpec) -> Result<GridReport> {
    grid.validate()?;
    let cells = grid.cells(base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let runs: Vec<RunResult> = pool.install(|| {
        cells
            .into_par_iter()
            .map(|c| {
                let out = run_simulation(&c);
                if let Err(e) = &out {
                    log::warn!("run {} failed: {e}", c.key());
                }
                RunResult::from_output(c, out)
            })
            .collect()
    });
    let aggregates = aggregate(&runs);
    Ok(GridReport { runs, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_cover_the_product() {
        let g = GridSpec::default();
        assert_eq!(g.cells(&SimConfig::default()).len(), 4 * 2 * 2 * 2 * 3 * 3);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let g = GridSpec {
            seeds: vec![],
            ..GridSpec::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn single_cell_normalizes_to_one() {
        let base = SimConfig {
            horizon: 300,
            ..SimConfig::default()
        };
        let g = GridSpec {
            policies: vec![Policy::SM],
            n_mdcs: vec![2],
            servers_per_mdc: vec![1],
            cm: vec![1.0],
            apps: vec![AppSource::Bundled { job: 8 }],
            seeds: vec![0],
            workers: 1,
        };
        let r = run_grid(&base, &g).unwrap();
        assert_eq!(r.aggregates.len(), 1);
        assert_eq!(r.aggregates[0].norm_lt, Some(1.0));
    }

    #[test]
    fn experiment_round_trip() {
        let e = Experiment::default();
        assert_eq!(Experiment::from_toml(&e.to_toml()).unwrap(), e);
        let e = Experiment::from_toml("horizon = 50\npolicy = \"M\"\n[grid]\nseeds = [4]\n").unwrap();
        assert_eq!(e.sim.horizon, 50);
        assert_eq!(e.sim.policy, Policy::M);
        assert_eq!(e.grid.seeds, vec![4]);
    }
}
