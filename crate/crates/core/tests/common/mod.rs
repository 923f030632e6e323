//! Independent reference implementations used to cross-check the library.
#![allow(dead_code)]

use ehmec::domain::{AppGraph, CostModel, MdcId, ModuleId, Network, Placement, Server, ServerId, Tenancy};
use ehmec::energy::EhDevice;
use ehmec::engine::{SimConfig, Simulation, TraceRecord};
use ehmec::scheduler::CpReference;
use ehmec::workload::{gen_topology, ArrivalProfile, HarvestProfile, Table, Topology, TopologySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random DAG with `1..=max_n` modules; edges only point to larger ids.
pub fn random_app(rng: &mut impl Rng, max_n: usize) -> AppGraph {
    let n = rng.random_range(1..=max_n);
    let p = rng.random_range(0.15..0.6);
    let mods: Vec<_> = (0..n)
        .map(|i| (ModuleId(i as u32), rng.random_range(0.1..20.0), rng.random_range(0.1..60.0)))
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((ModuleId(a as u32), ModuleId(b as u32)));
            }
        }
    }
    AppGraph::new("rand", &mods, &edges, ModuleId(0), ModuleId(n as u32)).expect("valid by construction")
}

pub struct Setup {
    pub app: AppGraph,
    pub net: Network,
    pub placement: Placement,
    pub tenancy: Tenancy,
    pub cost: CostModel,
}

/// A random application placed at random on a random network with random
/// frequencies and co-location overhead.
pub fn random_setup(rng: &mut impl Rng, max_n: usize) -> Setup {
    let app = random_app(rng, max_n);
    let spec = TopologySpec {
        n_mdcs: rng.random_range(1..=4),
        servers_per_mdc: rng.random_range(1..=3),
        ..TopologySpec::default()
    };
    let mut net = gen_topology(&spec, rng.random()).expect("valid spec").network;
    for s in 0..net.servers().len() {
        let f = net.servers()[s].f_max * rng.random_range(0.2..1.0);
        net.set_frequency(ServerId(s as u32), f);
    }
    let n_servers = net.servers().len() as u32;
    let hosts: Vec<ServerId> = (0..app.len()).map(|_| ServerId(rng.random_range(0..n_servers))).collect();
    let placement = Placement::from_hosts(hosts);
    let tenancy = Tenancy::from_placement(&placement, n_servers as usize);
    let user_mdc = rng.random_bool(0.5).then(|| MdcId(rng.random_range(0..spec.n_mdcs as u32)));
    let cost = CostModel {
        kappa: rng.random_range(0.0..0.3),
        user_mdc,
        ..CostModel::default()
    };
    Setup {
        app,
        net,
        placement,
        tenancy,
        cost,
    }
}

/// Transfer delay between two MDCs summed hop by hop along the network's route.
pub fn hop_delay(net: &Network, size: f64, a: MdcId, b: MdcId, cost: &CostModel) -> f64 {
    if a == b {
        return 0.0;
    }
    net.route(a, b)
        .expect("connected")
        .iter()
        .map(|&l| {
            let link = net.link(l);
            size * cost.units.bits_per_size / link.bw + link.prop
        })
        .sum()
}

fn exec(s: &Setup, i: usize) -> f64 {
    let host = s.net.server(s.placement.host(i));
    let n = s.tenancy.count(host.id);
    let k = 1.0 + s.cost.kappa * (n.max(1) - 1) as f64;
    s.app.modules()[i].wl * s.cost.units.cycles_per_workload / host.f_cur * k
}

fn mdc_of(s: &Setup, i: usize) -> MdcId {
    s.net.server(s.placement.host(i)).mdc
}

fn user_mdc(s: &Setup) -> MdcId {
    s.cost.user_mdc.unwrap_or_else(|| mdc_of(s, s.app.index_of(s.app.source()).expect("source exists")))
}

fn succs(app: &AppGraph, i: usize) -> Vec<usize> {
    let id = app.modules()[i].id;
    app.edges()
        .iter()
        .filter(|(a, _)| *a == id)
        .map(|(_, b)| app.index_of(*b).expect("edge endpoints exist"))
        .collect()
}

fn roots(app: &AppGraph) -> Vec<usize> {
    (0..app.len())
        .filter(|&i| !app.edges().iter().any(|(_, b)| *b == app.modules()[i].id))
        .collect()
}

/// Every root-to-sink path as module index sequences.
pub fn all_paths(app: &AppGraph) -> Vec<Vec<usize>> {
    fn walk(app: &AppGraph, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().expect("non-empty");
        let next = succs(app, last);
        if next.is_empty() {
            out.push(path.clone());
        }
        for j in next {
            path.push(j);
            walk(app, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    for r in roots(app) {
        walk(app, &mut vec![r], &mut out);
    }
    out
}

/// Time a path's last module starts when every hop waits for the previous one.
fn path_start(s: &Setup, path: &[usize]) -> f64 {
    path.windows(2)
        .map(|w| exec(s, w[0]) + hop_delay(&s.net, s.app.modules()[w[0]].size, mdc_of(s, w[0]), mdc_of(s, w[1]), &s.cost))
        .sum()
}

/// Earliest start of `target`: the longest root-to-`target` path prefix.
pub fn oracle_est(s: &Setup, target: usize) -> f64 {
    all_paths(&s.app)
        .iter()
        .filter_map(|p| p.iter().position(|&i| i == target).map(|k| path_start(s, &p[..=k])))
        .fold(0.0, f64::max)
}

/// End-to-end latency: the longest root-to-user path.
pub fn oracle_latency(s: &Setup) -> f64 {
    let user = user_mdc(s);
    all_paths(&s.app)
        .iter()
        .map(|p| {
            let last = *p.last().expect("non-empty");
            path_start(s, p) + exec(s, last) + hop_delay(&s.net, s.app.modules()[last].size, mdc_of(s, last), user, &s.cost)
        })
        .fold(0.0, f64::max)
}

/// Reference weight of a path including the hand-off after its sink.
pub fn path_weight(app: &AppGraph, path: &[usize], r: &CpReference) -> f64 {
    path.iter()
        .map(|&i| {
            let v = &app.modules()[i];
            v.wl * r.units.cycles_per_workload / r.freq + v.size * r.units.bits_per_size / r.bw + r.prop
        })
        .sum()
}

/// Heaviest path by enumeration, with its weight.
pub fn oracle_critical_path(app: &AppGraph, r: &CpReference) -> (Vec<ModuleId>, f64) {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for p in all_paths(app) {
        let w = path_weight(app, &p, r);
        if best.as_ref().is_none_or(|(bw, _)| w > *bw) {
            best = Some((w, p));
        }
    }
    let (w, p) = best.expect("at least one path");
    (p.iter().map(|&i| app.modules()[i].id).collect(), w)
}

/// `predicted_tasks * sum(beta f^2 wl K(n))` over modules hosted on `mdc`.
pub fn oracle_demand(app: &AppGraph, net: &Network, placement: &Placement, cost: &CostModel, tasks: f64, mdc: MdcId) -> f64 {
    let tenancy = Tenancy::from_placement(placement, net.servers().len());
    (0..app.len())
        .filter(|&i| net.server(placement.host(i)).mdc == mdc)
        .map(|i| {
            let s = net.server(placement.host(i));
            let k = 1.0 + cost.kappa * (tenancy.count(s.id).max(1) - 1) as f64;
            tasks * s.beta * s.f_cur * s.f_cur * app.modules()[i].wl * cost.units.cycles_per_workload * k
        })
        .sum()
}

/// Latency of an arbitrary placement through the path oracle.
pub fn oracle_latency_of(app: &AppGraph, net: &Network, placement: &Placement, cost: &CostModel) -> f64 {
    let s = Setup {
        app: app.clone(),
        net: net.clone(),
        placement: placement.clone(),
        tenancy: Tenancy::from_placement(placement, net.servers().len()),
        cost: *cost,
    };
    oracle_latency(&s)
}

pub struct LedgerRow {
    pub harvested: f64,
    pub consumed: f64,
    pub battery: f64,
    pub busy: f64,
    pub completed: usize,
    pub latency: Option<f64>,
}

/// The hand-computed ledger of the micro scenario.
pub fn micro_fixture() -> Vec<LedgerRow> {
    include_str!("../fixtures/micro_ledger.csv")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            let f = |i: usize| c[i].parse::<f64>().unwrap();
            LedgerRow {
                harvested: f(1),
                consumed: f(2),
                battery: f(3),
                busy: f(4),
                completed: c[5].parse().unwrap(),
                latency: (!c[6].is_empty()).then(|| f(6)),
            }
        })
        .collect()
}

/// Runs the three-slot scenario; exactly one task arrives in slot 0.
pub fn micro_trace() -> Vec<TraceRecord> {
    let server = Server {
        id: ServerId(0),
        mdc: MdcId(0),
        f_max: 2e9,
        f_cur: 2e9,
        beta: 1e-27,
    };
    let topo = Topology {
        network: Network::new(1, vec![server], vec![]).unwrap(),
        devices: vec![EhDevice::new(MdcId(0), 3600.0, 1000.0, 0.1)],
    };
    let app = AppGraph::new("micro", &[(ModuleId(0), 3.0, 1.0)], &[], ModuleId(0), ModuleId(1)).unwrap();
    let cfg = SimConfig {
        horizon: 3,
        harvest: HarvestProfile::constant(5.0),
        // one arrival in [0, 1) and none afterwards
        arrival: ArrivalProfile::Tabulated {
            table: Table::new(vec![(0.0, 1.0), (1.0, 0.0), (3.0, 0.0)]).unwrap(),
        },
        ..SimConfig::default()
    };
    Simulation::from_parts(cfg, app, topo).unwrap().run().unwrap().trace
}
