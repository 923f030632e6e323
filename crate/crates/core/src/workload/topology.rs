use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Link, LinkId, MdcId, Network, Server, ServerId};
use crate::energy::EhDevice;
use crate::error::{Error, Result};

/// Parameters of a generated edge network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologySpec {
    pub n_mdcs: usize,
    pub servers_per_mdc: usize,
    /// Links added per new MDC by preferential attachment.
    pub attachment_m: usize,
    /// Inclusive range of server `f_max`, Hz.
    pub freq_range: (f64, f64),
    /// Link bandwidth, bits/s.
    pub bw: f64,
    /// Link propagation delay, s.
    pub prop: f64,
    pub beta: f64,
    /// Battery capacity, J.
    pub capacity: f64,
    /// Initial charge as a fraction range of capacity.
    pub initial_battery_range: (f64, f64),
    pub safety_fraction: f64,
}

impl Default for TopologySpec {
    fn default() -> Self {
        Self {
            n_mdcs: 2,
            servers_per_mdc: 2,
            attachment_m: 1,
            freq_range: (1.5e9, 2.5e9),
            bw: 1e9,
            prop: 0.005,
            beta: 1e-27,
            capacity: 3600.0,
            initial_battery_range: (0.25, 0.75),
            safety_fraction: 0.1,
        }
    }
}

impl TopologySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_mdcs == 0 || self.servers_per_mdc == 0 {
            return bad("topology needs at least one MDC and one server per MDC");
        }
        if self.n_mdcs > 1 && (self.attachment_m == 0 || self.attachment_m >= self.n_mdcs) {
            return bad("attachment_m must satisfy 1 <= attachment_m < n_mdcs");
        }
        let (lo, hi) = self.freq_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad("freq_range must satisfy 0 < low <= high");
        }
        if !(self.bw > 0.0 && self.prop >= 0.0 && self.beta > 0.0 && self.capacity > 0.0) {
            return bad("bw, beta and capacity must be positive and prop non-negative");
        }
        let (b0, b1) = self.initial_battery_range;
        if !(0.0 <= b0 && b0 <= b1 && b1 <= 1.0) {
            return bad("initial_battery_range must lie within [0, 1]");
        }
        if !(0.0..1.0).contains(&self.safety_fraction) {
            return bad("safety_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// A generated network together with the devices powering its MDCs.
#[derive(Debug, Clone)]
pub struct Topology {
    pub network: Network,
    /// Indexed by MDC id.
    pub devices: Vec<EhDevice>,
}

/// Plain-data form of a [`Topology`] for dumping and reloading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDump {
    pub n_mdcs: usize,
    pub servers: Vec<Server>,
    pub links: Vec<Link>,
    pub devices: Vec<EhDevice>,
}

impl Topology {
    pub fn dump(&self) -> TopologyDump {
        TopologyDump {
            n_mdcs: self.network.mdcs().len(),
            servers: self.network.servers().to_vec(),
            links: self.network.links().to_vec(),
            devices: self.devices.clone(),
        }
    }

    pub fn from_dump(d: TopologyDump) -> Result<Self> {
        if d.devices.len() != d.n_mdcs {
            return Err(Error::InvalidNetwork("one device per MDC required".into()));
        }
        Ok(Self {
            network: Network::new(d.n_mdcs, d.servers, d.links)?,
            devices: d.devices,
        })
    }
}

/// Preferential-attachment MDC graph: a clique of `m` seed nodes, then each
/// new node links to `m` distinct existing nodes with probability
/// proportional to their degree. Returns undirected edges `(low, high)` in
/// creation order.
pub fn barabasi_albert(n: usize, m: usize, rng: &mut impl Rng) -> Result<Vec<(usize, usize)>> {
    if n == 1 {
        return Ok(Vec::new());
    }
    if m == 0 || m >= n {
        return Err(Error::Config(format!("attachment_m = {m} must lie in [1, {n})")));
    }
    let mut edges = Vec::new();
    let mut degree = vec![0usize; n];
    for a in 0..m {
        for b in a + 1..m {
            edges.push((a, b));
            degree[a] += 1;
            degree[b] += 1;
        }
    }
    for new in m..n {
        let mut pool: Vec<usize> = (0..new).collect();
        let mut chosen = Vec::with_capacity(m);
        for _ in 0..m {
            let weights: Vec<usize> = pool.iter().map(|&i| degree[i]).collect();
            let total: usize = weights.iter().sum();
            let pick = if total == 0 {
                rng.random_range(0..pool.len())
            } else {
                let mut r = rng.random_range(0..total);
                weights
                    .iter()
                    .position(|&w| {
                        if r < w {
                            true
                        } else {
                            r -= w;
                            false
                        }
                    })
                    .expect("draw falls inside the total weight")
            };
            chosen.push(pool.remove(pick));
        }
        chosen.sort_unstable();
        for t in chosen {
            edges.push((t, new));
            degree[t] += 1;
            degree[new] += 1;
        }
    }
    Ok(edges)
}

/// Generates a network and its devices. Draw order: graph, then server
/// frequencies by server id, then initial charges by MDC id.
pub fn gen_topology(spec: &TopologySpec, seed: u64) -> Result<Topology> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = barabasi_albert(spec.n_mdcs, spec.attachment_m, &mut rng)?;
    let links = edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Link {
            id: LinkId(i as u32),
            endpoints: (MdcId(a as u32), MdcId(b as u32)),
            bw: spec.bw,
            prop: spec.prop,
        })
        .collect();
    let (lo, hi) = spec.freq_range;
    let mut servers = Vec::with_capacity(spec.n_mdcs * spec.servers_per_mdc);
    for m in 0..spec.n_mdcs {
        for _ in 0..spec.servers_per_mdc {
            let f = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            servers.push(Server {
                id: ServerId(servers.len() as u32),
                mdc: MdcId(m as u32),
                f_max: f,
                f_cur: f,
                beta: spec.beta,
            });
        }
    }
    let (b0, b1) = spec.initial_battery_range;
    let devices = (0..spec.n_mdcs)
        .map(|m| {
            let frac = if b0 == b1 { b0 } else { rng.random_range(b0..=b1) };
            EhDevice::new(MdcId(m as u32), spec.capacity, frac * spec.capacity, spec.safety_fraction)
        })
        .collect();
    Ok(Topology {
        network: Network::new(spec.n_mdcs, servers, links)?,
        devices,
    })
}
