//! Decision logic: critical-path initial assignment and the periodic
//! scaling/migration policies.
//!
//! Every runtime policy works on a [`Planner`], a private working copy of the
//! scheduler's snapshot. Each accepted decision is applied to the working
//! copy before the next one is evaluated, so later decisions see the
//! placement, tenancy, frequencies and demand left by earlier ones.

mod assignment;
mod critical_path;
mod policy;

use serde::{Deserialize, Serialize};

pub use assignment::{energy_cost, initial_assignment};
pub use critical_path::{critical_path, CpReference, CriticalPath};
pub use policy::{
    best_mig_target, deficit_policy, dsm_step, mixed_policy, sufficient_policy, MigrationAudit, MigrationCandidate, Plan,
    Planner, Snapshot,
};

use crate::domain::{CostModel, ModuleId, ServerId};
use crate::energy::MdcClassification;

/// System-wide energy situation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Sufficient,
    Deficient,
    Mixed,
}

/// A command for the platform: retune a server or move a service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    Scale { server: ServerId, freq: f64 },
    Migrate { module: ModuleId, target: ServerId },
}

impl Decision {
    pub fn is_migration(&self) -> bool {
        matches!(self, Decision::Migrate { .. })
    }
}

/// Order in which non-critical services leave a deficit MDC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReliefOrder {
    /// Heaviest per-task energy first.
    #[default]
    Descending,
    Ascending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsmConfig {
    /// Surplus safety threshold.
    pub alpha: f64,
    pub cost: CostModel,
    pub allow_scaling: bool,
    pub allow_migration: bool,
    pub relief_order: ReliefOrder,
    /// Scale-down floor as a fraction of each server's `f_max`.
    pub min_freq_fraction: f64,
    /// Minimum predicted latency reduction, s, for a migration to count as
    /// an improvement.
    pub min_latency_gain: f64,
}

impl Default for DsmConfig {
    fn default() -> Self {
        Self {
            alpha: 1.2,
            cost: CostModel::default(),
            allow_scaling: true,
            allow_migration: true,
            relief_order: ReliefOrder::Descending,
            min_freq_fraction: 1e-3,
            min_latency_gain: 1e-9,
        }
    }
}

pub fn assess_scenario(cls: &MdcClassification) -> Scenario {
    match (cls.surplus.is_empty(), cls.deficit.is_empty()) {
        (_, true) => Scenario::Sufficient,
        (true, false) => Scenario::Deficient,
        (false, false) => Scenario::Mixed,
    }
}

/// `min(f_max / f_prev, sqrt(supply / (alpha * demand)))`. With no demand the
/// frequency cap is the only bound.
pub fn scale_up_factor(f_prev: f64, f_max: f64, supply: f64, demand: f64, alpha: f64) -> f64 {
    let cap = f_max / f_prev;
    if demand <= 0.0 {
        return cap;
    }
    cap.min((supply.max(0.0) / (alpha * demand)).sqrt())
}

/// `sqrt(supply / demand)`, never above one.
pub fn scale_down_factor(supply: f64, demand: f64) -> f64 {
    if demand <= 0.0 {
        return 1.0;
    }
    (supply.max(0.0) / demand).sqrt().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MdcId;

    #[test]
    fn scenarios() {
        let set = |xs: &[u32]| xs.iter().map(|&x| MdcId(x)).collect();
        let cls = |s: &[u32], d: &[u32]| MdcClassification {
            surplus: set(s),
            deficit: set(d),
            neutral: Default::default(),
        };
        assert_eq!(assess_scenario(&cls(&[1, 2], &[])), Scenario::Sufficient);
        assert_eq!(assess_scenario(&cls(&[], &[1, 2])), Scenario::Deficient);
        assert_eq!(assess_scenario(&cls(&[1], &[2])), Scenario::Mixed);
        assert_eq!(assess_scenario(&cls(&[], &[])), Scenario::Sufficient);
    }

    #[test]
    fn scale_up_examples() {
        assert_eq!(scale_up_factor(2e9, 2.5e9, 120.0, 100.0, 1.2), 1.0);
        let f = scale_up_factor(1.5e9, 2.5e9, 200.0, 100.0, 1.2);
        assert!((f - (200.0f64 / 120.0).sqrt()).abs() < 1e-12);
        assert!((f - 1.2910).abs() < 1e-4);
        let f = scale_up_factor(2.4e9, 2.5e9, 400.0, 100.0, 1.0);
        assert!((f - 2.5 / 2.4).abs() < 1e-12);
        assert_eq!(scale_up_factor(1.25e9, 2.5e9, 10.0, 0.0, 1.2), 2.0);
    }

    #[test]
    fn scale_down_examples() {
        assert_eq!(scale_down_factor(100.0, 400.0), 0.5);
        assert_eq!(scale_down_factor(250.0, 250.0), 1.0);
        assert_eq!(scale_down_factor(500.0, 250.0), 1.0);
        // energy per fixed workload goes as f^2, so the sqrt factor lands demand on supply
        let factor = scale_down_factor(50.0, 200.0);
        assert_eq!(2e9 * factor, 1e9);
        assert!((200.0 * factor * factor - 50.0).abs() < 1e-12);
    }
}
