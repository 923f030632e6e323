use super::{AppGraph, CostModel, Link, MdcId, Network, Placement, Server, ServerId, ServiceModule, Tenancy, Units};
use crate::error::{Error, Result};

/// Delay of one packet of `size` over a single link: transmission plus propagation.
pub fn comm_delay_link(size: f64, link: &Link, units: &Units) -> f64 {
    size * units.bits_per_size / link.bw + link.prop
}

/// Sum of per-hop delays along the route between two MDCs. Zero inside one MDC.
pub fn comm_delay_mdcs(size: f64, a: MdcId, b: MdcId, net: &Network, units: &Units) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    Ok(net
        .route(a, b)?
        .iter()
        .map(|&l| comm_delay_link(size, net.link(l), units))
        .sum())
}

pub fn comm_delay_path(size: f64, src: &Server, dst: &Server, net: &Network, units: &Units) -> Result<f64> {
    comm_delay_mdcs(size, src.mdc, dst.mdc, net, units)
}

/// Time to process one task of `v` on `s` at its current frequency.
pub fn exec_time(v: &ServiceModule, s: &Server, units: &Units) -> f64 {
    v.wl * units.cycles_per_workload / s.f_cur
}

/// Co-location overhead `K(n) = 1 + kappa (n - 1)`, with `K(1) = 1`.
pub fn colocation_factor(n: u32, kappa: f64) -> f64 {
    1.0 + kappa * (n.max(1) - 1) as f64
}

pub fn exec_time_colocated(v: &ServiceModule, s: &Server, n: u32, cost: &CostModel) -> f64 {
    exec_time(v, s, &cost.units) * colocation_factor(n, cost.kappa)
}

/// Earliest start times of every module plus the user sink.
///
/// Entries are `None` for modules left unplaced in a partial evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EstTable {
    modules: Vec<Option<f64>>,
    user: f64,
}

impl EstTable {
    pub fn get(&self, idx: usize) -> Option<f64> {
        self.modules[idx]
    }

    /// EST of a placed module. Panics on an unplaced one.
    pub fn module(&self, idx: usize) -> f64 {
        self.modules[idx].expect("EST requested for an unplaced module")
    }

    /// `EST(U)`, the end-to-end latency seen by the user.
    pub fn user(&self) -> f64 {
        self.user
    }
}

/// Resolves where the user equipment attaches.
pub(crate) fn user_mdc(app: &AppGraph, hosts: &dyn Fn(usize) -> Option<ServerId>, net: &Network, cost: &CostModel) -> MdcId {
    cost.user_mdc
        .or_else(|| app.index_of(app.source()).and_then(hosts).map(|s| net.server(s).mdc))
        .unwrap_or(MdcId(0))
}

/// EST recursion over the placed subset of modules. Unplaced modules are
/// ignored: they neither receive an EST nor contribute to their successors'.
pub fn est_partial(
    app: &AppGraph,
    hosts: &[Option<ServerId>],
    net: &Network,
    tenancy: &Tenancy,
    cost: &CostModel,
) -> Result<EstTable> {
    let lookup = |i: usize| hosts[i];
    est_impl(app, &lookup, net, tenancy, cost)
}

/// Earliest start time of every module under a total placement:
/// roots start at zero, every other module waits for its slowest predecessor
/// to finish executing and deliver its packet.
pub fn est_all(app: &AppGraph, placement: &Placement, net: &Network, tenancy: &Tenancy, cost: &CostModel) -> Result<EstTable> {
    if placement.hosts().len() != app.len() {
        let missing = app.modules()[placement.hosts().len().min(app.len() - 1)].id;
        return Err(Error::IncompletePlacement(missing));
    }
    for &s in placement.hosts() {
        net.server_checked(s)?;
    }
    let lookup = |i: usize| Some(placement.host(i));
    est_impl(app, &lookup, net, tenancy, cost)
}

/// `LT = EST(U)`.
pub fn end_to_end_latency(app: &AppGraph, placement: &Placement, net: &Network, tenancy: &Tenancy, cost: &CostModel) -> Result<f64> {
    est_all(app, placement, net, tenancy, cost).map(|t| t.user())
}

fn est_impl(
    app: &AppGraph,
    hosts: &dyn Fn(usize) -> Option<ServerId>,
    net: &Network,
    tenancy: &Tenancy,
    cost: &CostModel,
) -> Result<EstTable> {
    let n = app.len();
    let mut est: Vec<Option<f64>> = vec![None; n];
    let mut finish: Vec<f64> = vec![0.0; n];
    let user_at = user_mdc(app, hosts, net, cost);
    let mut user = 0.0f64;

    for &i in app.topo_order() {
        let Some(host) = hosts(i) else { continue };
        let server = net.server(host);
        let mut start = 0.0f64;
        for p in app.pred_indices(i) {
            let Some(ph) = hosts(p) else { continue };
            let Some(_) = est[p] else { continue };
            let arrive = finish[p] + comm_delay_mdcs(app.modules()[p].size, net.server(ph).mdc, server.mdc, net, &cost.units)?;
            start = start.max(arrive);
        }
        let v = &app.modules()[i];
        est[i] = Some(start);
        finish[i] = start + exec_time_colocated(v, server, tenancy.count(host), cost);
        if app.is_sink(i) {
            let arrive = finish[i] + comm_delay_mdcs(v.size, server.mdc, user_at, net, &cost.units)?;
            user = user.max(arrive);
        }
    }
    Ok(EstTable { modules: est, user })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{LinkId, ModuleId};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
    }

    fn link(bw: f64, prop: f64) -> Link {
        Link {
            id: LinkId(0),
            endpoints: (MdcId(0), MdcId(1)),
            bw,
            prop,
        }
    }

    fn server(id: u32, mdc: u32, f: f64) -> Server {
        Server {
            id: ServerId(id),
            mdc: MdcId(mdc),
            f_max: f.max(2.5e9),
            f_cur: f,
            beta: 1e-27,
        }
    }

    fn line_net(n: u32, f: f64) -> Network {
        let servers = (0..n).map(|i| server(i, i, f)).collect();
        let links = (0..n - 1)
            .map(|i| Link {
                id: LinkId(i),
                endpoints: (MdcId(i), MdcId(i + 1)),
                bw: 1e9,
                prop: 0.005,
            })
            .collect();
        Network::new(n as usize, servers, links).unwrap()
    }

    fn module(wl: f64, size: f64) -> ServiceModule {
        ServiceModule {
            id: ModuleId(0),
            wl,
            size,
            preds: vec![],
            succs: vec![],
        }
    }

    #[test]
    fn link_delay_examples() {
        let u = Units::default();
        let l = link(1e9, 0.005);
        assert_eq!(comm_delay_link(0.0, &l, &u), 0.005);
        assert!(close(comm_delay_link(1000.0, &l, &u), 1.005));
        assert!(close(comm_delay_link(500.0, &l, &u), 0.505));
    }

    #[test]
    fn path_delay_examples() {
        let u = Units::default();
        let net = line_net(3, 2e9);
        let s = net.servers();
        assert_eq!(comm_delay_path(1000.0, &s[1], &s[1], &net, &u).unwrap(), 0.0);
        assert!(close(comm_delay_path(1000.0, &s[0], &s[1], &net, &u).unwrap(), 1.005));
        assert!(close(comm_delay_path(1000.0, &s[0], &s[2], &net, &u).unwrap(), 2.010));
        assert!(close(comm_delay_path(1000.0, &s[2], &s[0], &net, &u).unwrap(), 2.010));
    }

    #[test]
    fn exec_examples() {
        let u = Units::default();
        assert_eq!(exec_time(&module(0.0, 0.0), &server(0, 0, 2e9), &u), 0.0);
        assert!(close(exec_time(&module(2.0, 0.0), &server(0, 0, 2e9), &u), 1.0));
        assert!(close(exec_time(&module(2.0, 0.0), &server(0, 0, 1e9), &u), 2.0));
    }

    #[test]
    fn colocated_examples() {
        let cost = CostModel::default();
        let v = module(2.0, 0.0);
        let s = server(0, 0, 2e9);
        assert!(close(exec_time_colocated(&v, &s, 1, &cost), 1.0));
        assert!(close(exec_time_colocated(&v, &s, 3, &cost), 1.2));
        let v2 = module(4.0, 0.0);
        assert!(close(exec_time_colocated(&v2, &s, 5, &cost), 2.8));
    }

    #[test]
    fn chain_est() {
        // v1 on MDC 0 takes 1 s, sends 100 Mb over one hop (0.105 s) to v2 on MDC 1.
        let net = line_net(2, 2e9);
        let app = AppGraph::new(
            "chain",
            &[(ModuleId(1), 2.0, 100.0), (ModuleId(2), 4.0, 0.0)],
            &[(ModuleId(1), ModuleId(2))],
            ModuleId(1),
            ModuleId(0),
        )
        .unwrap();
        let p = Placement::from_hosts(vec![ServerId(0), ServerId(1)]);
        let t = Tenancy::from_placement(&p, 2);
        let cost = CostModel {
            user_mdc: Some(MdcId(1)),
            ..CostModel::default()
        };
        let est = est_all(&app, &p, &net, &t, &cost).unwrap();
        assert_eq!(est.module(0), 0.0);
        assert!(close(est.module(1), 1.105));
        // v2 executes 2 s and hands a zero-size packet to the local user
        assert!(close(est.user(), 3.105));
    }

    #[test]
    fn single_module_user_latency() {
        let net = line_net(2, 2e9);
        let app = AppGraph::new("one", &[(ModuleId(0), 2.0, 1000.0)], &[], ModuleId(0), ModuleId(9)).unwrap();
        let p = Placement::from_hosts(vec![ServerId(0)]);
        let t = Tenancy::from_placement(&p, 2);
        let local = est_all(&app, &p, &net, &t, &CostModel::default()).unwrap();
        assert!(close(local.user(), 1.0));
        let remote = CostModel {
            user_mdc: Some(MdcId(1)),
            ..CostModel::default()
        };
        let est = est_all(&app, &p, &net, &t, &remote).unwrap();
        assert!(close(est.user(), 1.0 + 1.005));
    }

    #[test]
    fn diamond_takes_slowest_branch() {
        // all on one server, so comm is zero and branch latency is exec only
        let net = line_net(1, 1e9);
        let app = AppGraph::new(
            "diamond",
            &[
                (ModuleId(1), 1.0, 1.0),
                (ModuleId(2), 2.0, 1.0),
                (ModuleId(3), 3.0, 1.0),
                (ModuleId(4), 1.0, 1.0),
            ],
            &[
                (ModuleId(1), ModuleId(2)),
                (ModuleId(1), ModuleId(3)),
                (ModuleId(2), ModuleId(4)),
                (ModuleId(3), ModuleId(4)),
            ],
            ModuleId(1),
            ModuleId(0),
        )
        .unwrap();
        let p = Placement::uniform(&app, ServerId(0));
        // neutralize co-location so branch times are exactly wl / f
        let cost = CostModel {
            kappa: 0.0,
            ..CostModel::default()
        };
        let t = Tenancy::from_placement(&p, 1);
        let est = est_all(&app, &p, &net, &t, &cost).unwrap();
        assert!(close(est.module(3), 1.0 + 3.0));
        assert!(close(est.user(), 5.0));
    }

    #[test]
    fn moving_critical_module_to_slower_server_increases_latency() {
        let mut servers = vec![server(0, 0, 2.5e9), server(1, 0, 1.5e9)];
        servers[1].f_max = 2.5e9;
        let net = Network::new(1, servers, vec![]).unwrap();
        let app = AppGraph::new(
            "chain",
            &[(ModuleId(0), 5.0, 1.0), (ModuleId(1), 5.0, 1.0)],
            &[(ModuleId(0), ModuleId(1))],
            ModuleId(0),
            ModuleId(9),
        )
        .unwrap();
        let cost = CostModel::default();
        let fast = Placement::from_hosts(vec![ServerId(0), ServerId(0)]);
        let slow = Placement::from_hosts(vec![ServerId(0), ServerId(1)]);
        // same tenancy table for both so only the server speed differs
        let t = Tenancy::from_placement(&slow, 2);
        let a = end_to_end_latency(&app, &fast, &net, &t, &cost).unwrap();
        let b = end_to_end_latency(&app, &slow, &net, &t, &cost).unwrap();
        assert!(b > a);
    }
}
