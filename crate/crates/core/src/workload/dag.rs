use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{AppGraph, ModuleId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleDoc {
    pub id: u32,
    /// Workload per task.
    pub wl: f64,
    /// Output packet size.
    pub size: f64,
}

/// On-disk form of an application DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagDocument {
    pub name: String,
    pub source: u32,
    pub user: u32,
    pub modules: Vec<ModuleDoc>,
    #[serde(default)]
    pub edges: Vec<[u32; 2]>,
}

impl DagDocument {
    pub fn from_app(app: &AppGraph) -> Self {
        Self {
            name: app.name().to_string(),
            source: app.source().0,
            user: app.user().0,
            modules: app
                .modules()
                .iter()
                .map(|m| ModuleDoc {
                    id: m.id.0,
                    wl: m.wl,
                    size: m.size,
                })
                .collect(),
            edges: app.edges().iter().map(|&(a, b)| [a.0, b.0]).collect(),
        }
    }

    pub fn to_app(&self) -> Result<AppGraph> {
        let mods: Vec<_> = self.modules.iter().map(|m| (ModuleId(m.id), m.wl, m.size)).collect();
        let edges: Vec<_> = self.edges.iter().map(|&[a, b]| (ModuleId(a), ModuleId(b))).collect();
        AppGraph::new(self.name.clone(), &mods, &edges, ModuleId(self.source), ModuleId(self.user))
    }
}

/// Parses and validates a TOML application document.
pub fn load_dag(text: &str) -> Result<AppGraph> {
    let doc: DagDocument = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.to_app()
}

pub fn serialize_dag(app: &AppGraph) -> String {
    toml::to_string(&DagDocument::from_app(app)).expect("documents always serialize")
}

/// Structural and numeric targets for a synthetic application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppTarget {
    pub modules: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub avg_transfer: f64,
    pub avg_workload: f64,
}

impl AppTarget {
    const fn new(modules: usize, edges: usize, max_degree: usize, avg_transfer: f64, avg_workload: f64) -> Self {
        Self {
            modules,
            edges,
            max_degree,
            avg_transfer,
            avg_workload,
        }
    }
}

/// Characteristics of the ten reference cluster-trace jobs, by job id 1..=10.
pub const REFERENCE_JOBS: [AppTarget; 10] = [
    AppTarget::new(12, 9, 3, 39.33, 9.50),
    AppTarget::new(16, 17, 6, 29.00, 257.88),
    AppTarget::new(16, 17, 7, 23.63, 40.50),
    AppTarget::new(17, 17, 5, 42.82, 13.53),
    AppTarget::new(16, 17, 3, 46.06, 35.75),
    AppTarget::new(12, 11, 6, 38.67, 8.17),
    AppTarget::new(10, 10, 4, 44.30, 14.40),
    AppTarget::new(10, 9, 5, 35.60, 7.10),
    AppTarget::new(16, 16, 2, 47.19, 1.00),
    AppTarget::new(10, 9, 4, 43.40, 32.70),
];

const BUNDLED: [&str; 10] = [
    include_str!("../../apps/job1.toml"),
    include_str!("../../apps/job2.toml"),
    include_str!("../../apps/job3.toml"),
    include_str!("../../apps/job4.toml"),
    include_str!("../../apps/job5.toml"),
    include_str!("../../apps/job6.toml"),
    include_str!("../../apps/job7.toml"),
    include_str!("../../apps/job8.toml"),
    include_str!("../../apps/job9.toml"),
    include_str!("../../apps/job10.toml"),
];

/// Seed that regenerates bundled job `job` with [`synthesize_app`].
pub fn bundled_seed(job: usize) -> u64 {
    job as u64
}

/// One of the ten bundled synthetic jobs, `1..=10`.
pub fn bundled_app(job: usize) -> Result<AppGraph> {
    let text = job
        .checked_sub(1)
        .and_then(|i| BUNDLED.get(i))
        .ok_or_else(|| Error::Config(format!("no bundled job {job}; expected 1..=10")))?;
    load_dag(text)
}

const MAX_ATTEMPTS: usize = 100_000;

/// Random edge set over ids `0..n` with every edge pointing to a larger id,
/// exactly `e` edges and maximum total degree exactly `d`.
fn random_edges(n: usize, e: usize, d: usize, rng: &mut impl Rng) -> Option<Vec<(usize, usize)>> {
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    for _ in 0..MAX_ATTEMPTS {
        pairs.shuffle(rng);
        let mut deg = vec![0usize; n];
        let mut edges = Vec::with_capacity(e);
        for &(a, b) in &pairs {
            if edges.len() == e {
                break;
            }
            if deg[a] < d && deg[b] < d {
                deg[a] += 1;
                deg[b] += 1;
                edges.push((a, b));
            }
        }
        if edges.len() == e && deg.iter().max() == Some(&d) {
            edges.sort_unstable();
            return Some(edges);
        }
    }
    None
}

/// Splits `total` hundredths into `n` positive parts with random weights,
/// using largest-remainder rounding so the parts sum exactly to `total`.
fn composition(total: u64, n: usize, rng: &mut impl Rng) -> Vec<u64> {
    let base = u64::from(total >= n as u64);
    let spare = total - base * n as u64;
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.25..1.75)).collect();
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| spare as f64 * w / sum).collect();
    let mut parts: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let mut left = spare - parts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| (exact[j] - exact[j].floor()).total_cmp(&(exact[i] - exact[i].floor())).then(i.cmp(&j)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        parts[i] += 1;
        left -= 1;
    }
    parts.iter().map(|p| p + base).collect()
}

/// Generates a synthetic DAG matching `target`: module and edge counts and
/// maximum degree exactly, and per-module average transfer and workload to
/// the hundredth. Module ids are `0..n` in topological order; module 0 is the
/// source and the user sink takes id `n`.
pub fn synthesize_app(name: &str, target: &AppTarget, seed: u64) -> Result<AppGraph> {
    let n = target.modules;
    if n == 0 || target.edges > n * (n - 1) / 2 || target.max_degree > n.saturating_sub(1) {
        return Err(Error::Config(format!("unattainable application target {target:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = if target.edges == 0 && target.max_degree == 0 {
        Vec::new()
    } else {
        random_edges(n, target.edges, target.max_degree, &mut rng)
            .ok_or_else(|| Error::Config(format!("no edge set found for {target:?}")))?
    };
    let hundredths = |avg: f64| (avg * n as f64 * 100.0).round() as u64;
    let sizes = composition(hundredths(target.avg_transfer), n, &mut rng);
    let wls = composition(hundredths(target.avg_workload), n, &mut rng);
    let mods: Vec<_> = (0..n)
        .map(|i| (ModuleId(i as u32), wls[i] as f64 / 100.0, sizes[i] as f64 / 100.0))
        .collect();
    let edges: Vec<_> = edges.iter().map(|&(a, b)| (ModuleId(a as u32), ModuleId(b as u32))).collect();
    AppGraph::new(name, &mods, &edges, ModuleId(0), ModuleId(n as u32))
}
