use serde::{Deserialize, Serialize};

use crate::domain::{AppGraph, ModuleId, Units};

/// Placement-independent weights for the critical path: every module runs at
/// `freq` and every dependency, including the hand-off to the user, costs one
/// nominal hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpReference {
    pub freq: f64,
    pub bw: f64,
    pub prop: f64,
    pub units: Units,
}

impl Default for CpReference {
    fn default() -> Self {
        Self {
            freq: 2e9,
            bw: 1e9,
            prop: 0.005,
            units: Units::default(),
        }
    }
}

impl CpReference {
    pub fn node_weight(&self, wl: f64) -> f64 {
        wl * self.units.cycles_per_workload / self.freq
    }

    pub fn edge_weight(&self, size: f64) -> f64 {
        size * self.units.bits_per_size / self.bw + self.prop
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPath {
    /// Module ids from a root to a sink.
    pub modules: Vec<ModuleId>,
    /// Membership by dense module index.
    pub member: Vec<bool>,
    /// Total reference weight of the path.
    pub length: f64,
}

impl CriticalPath {
    pub fn contains(&self, idx: usize) -> bool {
        self.member[idx]
    }
}

pub(crate) fn same_weight(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Heaviest root-to-user path under `reference`. Equal-weight paths resolve
/// to the lexicographically smallest module-id sequence.
pub fn critical_path(app: &AppGraph, reference: &CpReference) -> CriticalPath {
    let n = app.len();
    let mods = app.modules();
    // tail[i]: weight of the heaviest path from i to the user, starting with i's execution.
    let mut tail = vec![0.0f64; n];
    let mut next: Vec<Option<usize>> = vec![None; n];
    for &i in app.topo_order().iter().rev() {
        let mut best: Option<(f64, usize)> = None;
        // successors ascend by id, so the first of equal tails is the smallest
        for j in app.succ_indices(i) {
            match best {
                Some((w, _)) if !(tail[j] > w && !same_weight(tail[j], w)) => {}
                _ => best = Some((tail[j], j)),
            }
        }
        let own = reference.node_weight(mods[i].wl) + reference.edge_weight(mods[i].size);
        tail[i] = own + best.map_or(0.0, |(w, _)| w);
        next[i] = best.map(|(_, j)| j);
    }

    let mut start: Option<usize> = None;
    for i in (0..n).filter(|&i| app.is_root(i)) {
        match start {
            Some(s) if !(tail[i] > tail[s] && !same_weight(tail[i], tail[s])) => {}
            _ => start = Some(i),
        }
    }
    let mut cur = start.expect("a DAG has at least one root");
    let mut modules = vec![mods[cur].id];
    let mut member = vec![false; n];
    member[cur] = true;
    while let Some(j) = next[cur] {
        modules.push(mods[j].id);
        member[j] = true;
        cur = j;
    }
    CriticalPath {
        length: tail[start.unwrap()],
        modules,
        member,
    }
}
