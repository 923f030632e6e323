use super::critical_path::CriticalPath;
use crate::domain::user_mdc;
use crate::domain::{comm_delay_mdcs, est_partial, exec_time_colocated, AppGraph, CostModel, MdcId, Network, Placement, ServerId, Tenancy};
use crate::energy::per_task_energy;
use crate::error::{Error, Result};

const SLACK_TOLERANCE: f64 = 1e-9;

/// Per-task energy of `v` on `server` once it joins the server's current tenants.
pub fn energy_cost(app: &AppGraph, idx: usize, net: &Network, server: ServerId, tenancy: &Tenancy, cost: &CostModel) -> f64 {
    per_task_energy(&app.modules()[idx], net.server(server), tenancy.count(server) + 1, cost)
}

struct Assigner<'a> {
    app: &'a AppGraph,
    net: &'a Network,
    cost: &'a CostModel,
    mdcs: Vec<MdcId>,
    hosts: Vec<Option<ServerId>>,
    tenancy: Tenancy,
}

impl Assigner<'_> {
    fn cheapest_server(&self, idx: usize, mdc: MdcId) -> ServerId {
        let mut best: Option<(f64, ServerId)> = None;
        for &s in &self.net.mdc(mdc).servers {
            let ec = energy_cost(self.app, idx, self.net, s, &self.tenancy, self.cost);
            if best.is_none_or(|(b, _)| ec < b) {
                best = Some((ec, s));
            }
        }
        best.expect("every MDC has a server").1
    }

    fn place(&mut self, idx: usize, s: ServerId) {
        self.hosts[idx] = Some(s);
        self.tenancy.increment(s);
    }

    fn unplace(&mut self, idx: usize) {
        if let Some(s) = self.hosts[idx].take() {
            self.tenancy.decrement(s);
        }
    }

    fn est(&self) -> Result<crate::domain::EstTable> {
        est_partial(self.app, &self.hosts, self.net, &self.tenancy, self.cost)
    }

    /// Finish time of `idx` if placed on `s`, including the hand-off to the
    /// user when `idx` is a sink.
    fn finish_on(&mut self, idx: usize, s: ServerId) -> Result<f64> {
        self.place(idx, s);
        let est = self.est()?;
        let server = self.net.server(s);
        let v = &self.app.modules()[idx];
        let mut t = est.module(idx) + exec_time_colocated(v, server, self.tenancy.count(s), self.cost);
        if self.app.is_sink(idx) {
            let hosts = &self.hosts;
            let lookup = |i: usize| hosts[i];
            let user = user_mdc(self.app, &lookup, self.net, self.cost);
            t += comm_delay_mdcs(v.size, server.mdc, user, self.net, &self.cost.units)?;
        }
        self.unplace(idx);
        Ok(t)
    }

    /// MDC whose cheapest server finishes `idx` earliest; ties go to the lower id.
    fn fastest_option(&mut self, idx: usize) -> Result<ServerId> {
        let mut best: Option<(f64, ServerId)> = None;
        for m in self.mdcs.clone() {
            let s = self.cheapest_server(idx, m);
            let t = self.finish_on(idx, s)?;
            if best.is_none_or(|(b, _)| t < b - SLACK_TOLERANCE * b.abs().max(1.0)) {
                best = Some((t, s));
            }
        }
        Ok(best.expect("at least one operational MDC").1)
    }

    /// True when placing `idx` on `s` delays no already-scheduled module or the user.
    fn keeps_schedule(&mut self, idx: usize, s: ServerId) -> Result<bool> {
        let before = self.est()?;
        self.place(idx, s);
        let after = self.est()?;
        self.unplace(idx);
        let tol = |x: f64| SLACK_TOLERANCE * x.abs().max(1.0);
        for j in 0..self.app.len() {
            if j == idx {
                continue;
            }
            if let (Some(b), Some(a)) = (before.get(j), after.get(j)) {
                if a > b + tol(b) {
                    return Ok(false);
                }
            }
        }
        Ok(after.user() <= before.user() + tol(before.user()))
    }
}

/// Critical-path-first initial placement.
///
/// Critical modules, in path order, go to the MDC where they would finish
/// earliest, on that MDC's server with the lowest per-task energy. Remaining
/// modules, in topological order, go to the lowest-energy option among MDCs
/// where they delay nothing already scheduled, or to the earliest-finishing
/// option when no such MDC exists. Only operational MDCs are used.
pub fn initial_assignment(app: &AppGraph, net: &Network, cp: &CriticalPath, cost: &CostModel) -> Result<Placement> {
    let mdcs: Vec<MdcId> = net.mdcs().iter().filter(|m| m.operational).map(|m| m.id).collect();
    if mdcs.is_empty() {
        return Err(Error::NoOperationalServer);
    }
    let mut a = Assigner {
        app,
        net,
        cost,
        mdcs,
        hosts: vec![None; app.len()],
        tenancy: Tenancy::new(net.servers().len()),
    };

    for id in &cp.modules {
        let idx = app.index_of(*id).expect("critical path names app modules");
        let s = a.fastest_option(idx)?;
        a.place(idx, s);
    }

    for &idx in app.topo_order() {
        if cp.contains(idx) {
            continue;
        }
        let mut best: Option<(f64, ServerId)> = None;
        for m in a.mdcs.clone() {
            let s = a.cheapest_server(idx, m);
            if !a.keeps_schedule(idx, s)? {
                continue;
            }
            let ec = energy_cost(app, idx, net, s, &a.tenancy, cost);
            if best.is_none_or(|(b, _)| ec < b) {
                best = Some((ec, s));
            }
        }
        let s = match best {
            Some((_, s)) => s,
            None => a.fastest_option(idx)?,
        };
        a.place(idx, s);
    }

    Ok(Placement::from_hosts(a.hosts.into_iter().map(|h| h.expect("all placed")).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{end_to_end_latency, Link, LinkId, ModuleId, Server};
    use crate::scheduler::{critical_path, CpReference};

    fn server(id: u32, mdc: u32, f: f64) -> Server {
        Server {
            id: ServerId(id),
            mdc: MdcId(mdc),
            f_max: f,
            f_cur: f,
            beta: 1e-27,
        }
    }

    fn two_mdc(servers: Vec<Server>) -> Network {
        let link = Link {
            id: LinkId(0),
            endpoints: (MdcId(0), MdcId(1)),
            bw: 1e9,
            prop: 0.005,
        };
        Network::new(2, servers, vec![link]).unwrap()
    }

    #[test]
    fn single_server_takes_everything() {
        let net = Network::new(1, vec![server(0, 0, 2e9)], vec![]).unwrap();
        let app = AppGraph::new(
            "a",
            &[(ModuleId(0), 1.0, 1.0), (ModuleId(1), 2.0, 1.0), (ModuleId(2), 3.0, 1.0)],
            &[(ModuleId(0), ModuleId(1)), (ModuleId(0), ModuleId(2))],
            ModuleId(0),
            ModuleId(9),
        )
        .unwrap();
        let cp = critical_path(&app, &CpReference::default());
        let p = initial_assignment(&app, &net, &cp, &CostModel::default()).unwrap();
        assert!(p.hosts().iter().all(|&s| s == ServerId(0)));
    }

    #[test]
    fn heavy_critical_module_goes_to_fast_mdc() {
        // m0 has a 1.5 GHz server, m1 a 2.5 GHz one; 10 Gcycles take 6.67 s vs 4 s,
        // while crossing the link costs about 0.015 s for 10 Mb.
        let net = two_mdc(vec![server(0, 0, 1.5e9), server(1, 1, 2.5e9)]);
        let app = AppGraph::new("one", &[(ModuleId(0), 10.0, 10.0)], &[], ModuleId(0), ModuleId(9)).unwrap();
        let cp = critical_path(&app, &CpReference::default());
        let cost = CostModel {
            user_mdc: Some(MdcId(0)),
            ..CostModel::default()
        };
        let p = initial_assignment(&app, &net, &cp, &cost).unwrap();
        assert_eq!(p.host(0), ServerId(1));

        // exhaustive check over both placements
        let lat = |s: u32| {
            let pl = Placement::from_hosts(vec![ServerId(s)]);
            end_to_end_latency(&app, &pl, &net, &Tenancy::from_placement(&pl, 2), &cost).unwrap()
        };
        assert!(lat(1) < lat(0));
    }

    #[test]
    fn slack_module_takes_cheaper_slower_server() {
        // 0 -> 1 -> 3 is critical (heavy), 0 -> 2 -> 3 has lots of slack.
        let net = two_mdc(vec![server(0, 0, 2.5e9), server(1, 1, 1.5e9)]);
        let app = AppGraph::new(
            "slack",
            &[
                (ModuleId(0), 1.0, 1.0),
                (ModuleId(1), 40.0, 1.0),
                (ModuleId(2), 1.0, 1.0),
                (ModuleId(3), 1.0, 1.0),
            ],
            &[
                (ModuleId(0), ModuleId(1)),
                (ModuleId(0), ModuleId(2)),
                (ModuleId(1), ModuleId(3)),
                (ModuleId(2), ModuleId(3)),
            ],
            ModuleId(0),
            ModuleId(9),
        )
        .unwrap();
        let cp = critical_path(&app, &CpReference::default());
        assert!(!cp.contains(2));
        // no co-location overhead, so sharing a server costs no time
        let cost = CostModel {
            kappa: 0.0,
            user_mdc: Some(MdcId(0)),
            ..CostModel::default()
        };
        let p = initial_assignment(&app, &net, &cp, &cost).unwrap();
        assert!([0, 1, 3].iter().all(|&i| p.host(i) == ServerId(0)));
        // v2 lands on the slower, cheaper server
        assert_eq!(p.host(2), ServerId(1));

        // and the user latency equals that of the critical modules alone
        let without: Vec<Option<ServerId>> = (0..4).map(|i| (i != 2).then(|| p.host(i))).collect();
        let t = Tenancy::from_hosts(without.iter().copied(), 2);
        let base = est_partial(&app, &without, &net, &t, &cost).unwrap().user();
        let full = end_to_end_latency(&app, &p, &net, &Tenancy::from_placement(&p, 2), &cost).unwrap();
        assert!((full - base).abs() < 1e-9);
    }

    #[test]
    fn no_operational_mdc_is_an_error() {
        let mut net = Network::new(1, vec![server(0, 0, 2e9)], vec![]).unwrap();
        net.set_operational(MdcId(0), false);
        let app = AppGraph::new("one", &[(ModuleId(0), 1.0, 1.0)], &[], ModuleId(0), ModuleId(9)).unwrap();
        let cp = critical_path(&app, &CpReference::default());
        assert!(matches!(initial_assignment(&app, &net, &cp, &CostModel::default()), Err(Error::NoOperationalServer)));
    }
}
