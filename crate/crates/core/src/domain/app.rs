use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::ModuleId;
use crate::error::{Error, Result};

/// One service of a DAG application.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceModule {
    pub id: ModuleId,
    /// Workload per task, in workload units (gigacycles by default).
    pub wl: f64,
    /// Size of each result packet sent to every successor, in size units
    /// (megabits by default).
    pub size: f64,
    pub preds: Vec<ModuleId>,
    pub succs: Vec<ModuleId>,
}

/// A validated application DAG.
///
/// Modules with no predecessors receive their input straight from the data
/// sources and start at time zero. Modules with no successors deliver their
/// result to the user sink. `source` names the designated entry module; it
/// must be one of the roots, but other roots may exist.
#[derive(Debug, Clone, PartialEq)]
pub struct AppGraph {
    name: String,
    modules: Vec<ServiceModule>,
    edges: Vec<(ModuleId, ModuleId)>,
    source: ModuleId,
    user: ModuleId,
    index: BTreeMap<ModuleId, usize>,
    topo: Vec<usize>,
}

/// Structural statistics in the format of the application characteristics
/// table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppStats {
    pub modules: usize,
    pub edges: usize,
    /// Maximum total (in + out) degree over module-to-module edges.
    pub max_degree: usize,
    /// Mean output packet size over modules.
    pub avg_transfer: f64,
    /// Mean workload over modules.
    pub avg_workload: f64,
}

impl AppGraph {
    /// Builds and validates an application from `(id, wl, size)` triples and
    /// module-to-module edges.
    pub fn new(
        name: impl Into<String>,
        modules: &[(ModuleId, f64, f64)],
        edges: &[(ModuleId, ModuleId)],
        source: ModuleId,
        user: ModuleId,
    ) -> Result<Self> {
        if modules.is_empty() {
            return Err(Error::InvalidApp("application has no modules".into()));
        }
        let mut sorted: Vec<(ModuleId, f64, f64)> = modules.to_vec();
        sorted.sort_by_key(|m| m.0);
        let mut index = BTreeMap::new();
        for (i, &(id, wl, size)) in sorted.iter().enumerate() {
            if index.insert(id, i).is_some() {
                return Err(Error::InvalidApp(format!("duplicate module id {id}")));
            }
            if !(wl.is_finite() && wl >= 0.0) {
                return Err(Error::InvalidApp(format!("module {id} has invalid workload {wl}")));
            }
            if !(size.is_finite() && size >= 0.0) {
                return Err(Error::InvalidApp(format!("module {id} has invalid size {size}")));
            }
        }
        if index.contains_key(&user) {
            return Err(Error::InvalidApp(format!(
                "user sink id {user} collides with a module id"
            )));
        }
        if !index.contains_key(&source) {
            return Err(Error::InvalidApp(format!("source module {source} does not exist")));
        }

        let mut svc: Vec<ServiceModule> = sorted
            .iter()
            .map(|&(id, wl, size)| ServiceModule {
                id,
                wl,
                size,
                preds: Vec::new(),
                succs: Vec::new(),
            })
            .collect();

        let mut edge_set = BTreeSet::new();
        for &(a, b) in edges {
            let (Some(&ia), Some(&ib)) = (index.get(&a), index.get(&b)) else {
                return Err(Error::InvalidApp(format!("edge {a}->{b} has a dangling endpoint")));
            };
            if a == b {
                return Err(Error::Cycle(a));
            }
            if !edge_set.insert((a, b)) {
                return Err(Error::InvalidApp(format!("duplicate edge {a}->{b}")));
            }
            svc[ia].succs.push(b);
            svc[ib].preds.push(a);
        }
        for m in &mut svc {
            m.preds.sort();
            m.succs.sort();
        }
        if !svc[index[&source]].preds.is_empty() {
            return Err(Error::InvalidApp(format!("source module {source} has predecessors")));
        }

        // Kahn's algorithm; the smallest ready id goes first so the order is canonical.
        let mut indeg: Vec<usize> = svc.iter().map(|m| m.preds.len()).collect();
        let mut ready: BTreeSet<usize> = (0..svc.len()).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(svc.len());
        while let Some(i) = ready.pop_first() {
            topo.push(i);
            for s in &svc[i].succs {
                let j = index[s];
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if topo.len() != svc.len() {
            let stuck = (0..svc.len()).find(|&i| indeg[i] > 0).unwrap();
            return Err(Error::Cycle(svc[stuck].id));
        }

        Ok(Self {
            name: name.into(),
            modules: svc,
            edges: edge_set.into_iter().collect(),
            source,
            user,
            index,
            topo,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    /// Modules sorted by id. Position in this slice is the module's dense index.
    pub fn modules(&self) -> &[ServiceModule] {
        &self.modules
    }

    pub fn edges(&self) -> &[(ModuleId, ModuleId)] {
        &self.edges
    }

    pub fn source(&self) -> ModuleId {
        self.source
    }

    pub fn user(&self) -> ModuleId {
        self.user
    }

    pub fn index_of(&self, id: ModuleId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn module(&self, id: ModuleId) -> Option<&ServiceModule> {
        self.index_of(id).map(|i| &self.modules[i])
    }

    /// Dense indices in a canonical topological order.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn is_root(&self, idx: usize) -> bool {
        self.modules[idx].preds.is_empty()
    }

    pub fn is_sink(&self, idx: usize) -> bool {
        self.modules[idx].succs.is_empty()
    }

    /// Number of sink modules, i.e. inputs the user must receive to complete a task.
    pub fn sink_count(&self) -> usize {
        self.modules.iter().filter(|m| m.succs.is_empty()).count()
    }

    pub fn pred_indices(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.modules[idx].preds.iter().map(|p| self.index[p])
    }

    pub fn succ_indices(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.modules[idx].succs.iter().map(|s| self.index[s])
    }

    pub fn stats(&self) -> AppStats {
        let n = self.modules.len();
        let max_degree = self
            .modules
            .iter()
            .map(|m| m.preds.len() + m.succs.len())
            .max()
            .unwrap_or(0);
        AppStats {
            modules: n,
            edges: self.edges.len(),
            max_degree,
            avg_transfer: self.modules.iter().map(|m| m.size).sum::<f64>() / n as f64,
            avg_workload: self.modules.iter().map(|m| m.wl).sum::<f64>() / n as f64,
        }
    }

    /// Modules reachable from `idx` (inclusive), by breadth-first search.
    pub fn descendants(&self, idx: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([idx]);
        seen[idx] = true;
        while let Some(i) = queue.pop_front() {
            for j in self.succ_indices(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }
}
