use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{LinkId, MdcId, ServerId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Server {
    pub id: ServerId,
    pub mdc: MdcId,
    /// Maximum CPU frequency, Hz.
    pub f_max: f64,
    /// Current CPU frequency, Hz.
    pub f_cur: f64,
    /// Dynamic energy factor, J·s²·Hz⁻³.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub endpoints: (MdcId, MdcId),
    /// Bandwidth, bits/s.
    pub bw: f64,
    /// Propagation delay, s.
    pub prop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mdc {
    pub id: MdcId,
    pub servers: Vec<ServerId>,
    pub operational: bool,
}

/// MDCs, servers and inter-MDC links with a precomputed route table.
///
/// Routes are shortest by hop count. Among equally short paths the one whose
/// MDC-id sequence is lexicographically smallest (walking from the lower id
/// endpoint) wins, and the reverse direction uses the same links reversed.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    mdcs: Vec<Mdc>,
    servers: Vec<Server>,
    links: Vec<Link>,
    routes: Vec<Vec<Option<Vec<LinkId>>>>,
}

impl Network {
    /// `servers` must use dense ids `0..len` and reference MDCs `0..n_mdcs`.
    pub fn new(n_mdcs: usize, servers: Vec<Server>, links: Vec<Link>) -> Result<Self> {
        if n_mdcs == 0 {
            return Err(Error::InvalidNetwork("network has no MDCs".into()));
        }
        let mut mdcs: Vec<Mdc> = (0..n_mdcs)
            .map(|i| Mdc {
                id: MdcId(i as u32),
                servers: Vec::new(),
                operational: true,
            })
            .collect();
        for (i, s) in servers.iter().enumerate() {
            if s.id.index() != i {
                return Err(Error::InvalidNetwork(format!("server ids must be dense, found {} at {i}", s.id)));
            }
            if s.mdc.index() >= n_mdcs {
                return Err(Error::InvalidNetwork(format!("server {} references unknown MDC {}", s.id, s.mdc)));
            }
            if !(s.f_max > 0.0 && s.f_cur > 0.0 && s.f_cur <= s.f_max) {
                return Err(Error::InvalidNetwork(format!("server {} has invalid frequency", s.id)));
            }
            if s.beta.is_nan() || s.beta <= 0.0 {
                return Err(Error::InvalidNetwork(format!("server {} has non-positive beta", s.id)));
            }
            mdcs[s.mdc.index()].servers.push(s.id);
        }
        if let Some(m) = mdcs.iter().find(|m| m.servers.is_empty()) {
            return Err(Error::InvalidNetwork(format!("MDC {} has no servers", m.id)));
        }
        for (i, l) in links.iter().enumerate() {
            if l.id.index() != i {
                return Err(Error::InvalidNetwork(format!("link ids must be dense, found {} at {i}", l.id)));
            }
            let (a, b) = l.endpoints;
            if a.index() >= n_mdcs || b.index() >= n_mdcs || a == b {
                return Err(Error::InvalidNetwork(format!("link {} has invalid endpoints", l.id)));
            }
            if l.bw.is_nan() || l.bw <= 0.0 || l.prop.is_nan() || l.prop < 0.0 {
                return Err(Error::InvalidNetwork(format!("link {} has invalid bandwidth or delay", l.id)));
            }
        }

        let routes = compute_routes(n_mdcs, &links);
        for (a, row) in routes.iter().enumerate() {
            for (b, r) in row.iter().enumerate() {
                if r.is_none() {
                    return Err(Error::InvalidNetwork(format!(
                        "MDC graph is disconnected: no path m{a} -> m{b}"
                    )));
                }
            }
        }
        Ok(Self {
            mdcs,
            servers,
            links,
            routes,
        })
    }

    pub fn mdcs(&self) -> &[Mdc] {
        &self.mdcs
    }

    pub fn servers(&self) -> &[Server] {
        &self.servers
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn server(&self, id: ServerId) -> &Server {
        &self.servers[id.index()]
    }

    pub fn mdc(&self, id: MdcId) -> &Mdc {
        &self.mdcs[id.index()]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn server_checked(&self, id: ServerId) -> Result<&Server> {
        self.servers.get(id.index()).ok_or(Error::UnknownServer(id))
    }

    /// Ordered links from `a` to `b`; empty when `a == b`.
    pub fn route(&self, a: MdcId, b: MdcId) -> Result<&[LinkId]> {
        self.routes
            .get(a.index())
            .and_then(|row| row.get(b.index()))
            .and_then(|r| r.as_deref())
            .ok_or(Error::NoRoute(a, b))
    }

    /// Sets a server's current frequency, clamped to `(0, f_max]`.
    pub fn set_frequency(&mut self, id: ServerId, freq: f64) {
        let s = &mut self.servers[id.index()];
        s.f_cur = freq.min(s.f_max).max(f64::MIN_POSITIVE);
    }

    pub fn set_operational(&mut self, id: MdcId, operational: bool) {
        self.mdcs[id.index()].operational = operational;
    }

    pub fn is_operational(&self, id: MdcId) -> bool {
        self.mdcs[id.index()].operational
    }

    /// Adjacent MDCs, ascending.
    pub fn neighbours(&self, id: MdcId) -> Vec<MdcId> {
        adjacency(self.mdcs.len(), &self.links)[id.index()]
            .iter()
            .map(|&(n, _)| MdcId(n as u32))
            .collect()
    }
}

fn adjacency(n: usize, links: &[Link]) -> Vec<Vec<(usize, LinkId)>> {
    let mut adj = vec![Vec::new(); n];
    for l in links {
        let (a, b) = (l.endpoints.0.index(), l.endpoints.1.index());
        adj[a].push((b, l.id));
        adj[b].push((a, l.id));
    }
    for row in &mut adj {
        // parallel links: keep the lowest link id first
        row.sort();
    }
    adj
}

fn compute_routes(n: usize, links: &[Link]) -> Vec<Vec<Option<Vec<LinkId>>>> {
    let adj = adjacency(n, links);
    let mut routes = vec![vec![None; n]; n];
    for dst in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[dst] = 0;
        let mut q = VecDeque::from([dst]);
        while let Some(u) = q.pop_front() {
            for &(w, _) in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                }
            }
        }
        for src in 0..=dst {
            if dist[src] == usize::MAX {
                continue;
            }
            // Greedy walk toward dst: the smallest neighbour one hop closer
            // yields the lexicographically smallest shortest path.
            let mut path = Vec::with_capacity(dist[src]);
            let mut cur = src;
            while cur != dst {
                let &(next, link) = adj[cur]
                    .iter()
                    .find(|&&(w, _)| dist[w] + 1 == dist[cur])
                    .expect("bfs distance invariant");
                path.push(link);
                cur = next;
            }
            let mut rev = path.clone();
            rev.reverse();
            routes[src][dst] = Some(path);
            routes[dst][src] = Some(rev);
        }
    }
    routes
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn line(n: usize) -> Network {
        let servers = (0..n)
            .map(|i| Server {
                id: ServerId(i as u32),
                mdc: MdcId(i as u32),
                f_max: 2e9,
                f_cur: 2e9,
                beta: 1e-27,
            })
            .collect();
        let links = (0..n.saturating_sub(1))
            .map(|i| Link {
                id: LinkId(i as u32),
                endpoints: (MdcId(i as u32), MdcId(i as u32 + 1)),
                bw: 1e9,
                prop: 0.005,
            })
            .collect();
        Network::new(n, servers, links).unwrap()
    }

    #[test]
    fn routes_on_a_line() {
        let net = line(4);
        assert!(net.route(MdcId(2), MdcId(2)).unwrap().is_empty());
        assert_eq!(net.route(MdcId(0), MdcId(3)).unwrap(), &[LinkId(0), LinkId(1), LinkId(2)]);
        assert_eq!(net.route(MdcId(3), MdcId(0)).unwrap(), &[LinkId(2), LinkId(1), LinkId(0)]);
    }

    #[test]
    fn tie_break_prefers_smaller_intermediate() {
        // square 0-1-3 and 0-2-3: two shortest routes from 0 to 3
        let servers = (0..4)
            .map(|i| Server {
                id: ServerId(i),
                mdc: MdcId(i),
                f_max: 2e9,
                f_cur: 2e9,
                beta: 1e-27,
            })
            .collect();
        let mk = |id, a, b| Link {
            id: LinkId(id),
            endpoints: (MdcId(a), MdcId(b)),
            bw: 1e9,
            prop: 0.005,
        };
        let net = Network::new(4, servers, vec![mk(0, 0, 2), mk(1, 2, 3), mk(2, 0, 1), mk(3, 1, 3)]).unwrap();
        assert_eq!(net.route(MdcId(0), MdcId(3)).unwrap(), &[LinkId(2), LinkId(3)]);
        assert_eq!(net.route(MdcId(3), MdcId(0)).unwrap(), &[LinkId(3), LinkId(2)]);
    }

    #[test]
    fn disconnected_is_rejected() {
        let servers = (0..2)
            .map(|i| Server {
                id: ServerId(i),
                mdc: MdcId(i),
                f_max: 2e9,
                f_cur: 2e9,
                beta: 1e-27,
            })
            .collect();
        assert!(matches!(Network::new(2, servers, vec![]), Err(Error::InvalidNetwork(_))));
    }

    #[test]
    fn empty_mdc_is_rejected() {
        let servers = vec![Server {
            id: ServerId(0),
            mdc: MdcId(0),
            f_max: 2e9,
            f_cur: 2e9,
            beta: 1e-27,
        }];
        let link = Link {
            id: LinkId(0),
            endpoints: (MdcId(0), MdcId(1)),
            bw: 1e9,
            prop: 0.0,
        };
        assert!(Network::new(2, servers, vec![link]).is_err());
    }
}
