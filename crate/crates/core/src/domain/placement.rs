use std::collections::BTreeMap;

use super::{AppGraph, ModuleId, Network, ServerId};
use crate::error::{Error, Result};

/// Total mapping from service modules to servers, indexed by the module's
/// dense index in its [`AppGraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    hosts: Vec<ServerId>,
}

impl Placement {
    /// Validates totality against `app` and existence of every target in `net`.
    pub fn from_map(app: &AppGraph, net: &Network, map: &BTreeMap<ModuleId, ServerId>) -> Result<Self> {
        let mut hosts = Vec::with_capacity(app.len());
        for m in app.modules() {
            let s = *map.get(&m.id).ok_or(Error::IncompletePlacement(m.id))?;
            net.server_checked(s)?;
            hosts.push(s);
        }
        Ok(Self { hosts })
    }

    /// Places every module on `server`.
    pub fn uniform(app: &AppGraph, server: ServerId) -> Self {
        Self {
            hosts: vec![server; app.len()],
        }
    }

    /// Hosts by module index; not checked against any application.
    pub fn from_hosts(hosts: Vec<ServerId>) -> Self {
        Self { hosts }
    }

    pub fn host(&self, idx: usize) -> ServerId {
        self.hosts[idx]
    }

    pub fn host_of(&self, app: &AppGraph, id: ModuleId) -> Option<ServerId> {
        app.index_of(id).map(|i| self.hosts[i])
    }

    pub fn set_host(&mut self, idx: usize, server: ServerId) {
        self.hosts[idx] = server;
    }

    pub fn hosts(&self) -> &[ServerId] {
        &self.hosts
    }

    pub fn to_map(&self, app: &AppGraph) -> BTreeMap<ModuleId, ServerId> {
        app.modules().iter().zip(&self.hosts).map(|(m, &s)| (m.id, s)).collect()
    }

    /// Dense module indices hosted on `server`, ascending.
    pub fn modules_on(&self, server: ServerId) -> impl Iterator<Item = usize> + '_ {
        self.hosts
            .iter()
            .enumerate()
            .filter(move |(_, &s)| s == server)
            .map(|(i, _)| i)
    }
}

/// Number of services deployed on each server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tenancy {
    counts: Vec<u32>,
}

impl Tenancy {
    pub fn new(n_servers: usize) -> Self {
        Self {
            counts: vec![0; n_servers],
        }
    }

    pub fn from_placement(placement: &Placement, n_servers: usize) -> Self {
        Self::from_hosts(placement.hosts().iter().map(|&s| Some(s)), n_servers)
    }

    pub(crate) fn from_hosts(hosts: impl Iterator<Item = Option<ServerId>>, n_servers: usize) -> Self {
        let mut t = Self::new(n_servers);
        for s in hosts.flatten() {
            t.counts[s.index()] += 1;
        }
        t
    }

    pub fn count(&self, server: ServerId) -> u32 {
        self.counts.get(server.index()).copied().unwrap_or(0)
    }

    pub fn set(&mut self, server: ServerId, n: u32) {
        self.counts[server.index()] = n;
    }

    pub fn increment(&mut self, server: ServerId) {
        self.counts[server.index()] += 1;
    }

    pub fn decrement(&mut self, server: ServerId) {
        let c = &mut self.counts[server.index()];
        *c = c.saturating_sub(1);
    }
}
