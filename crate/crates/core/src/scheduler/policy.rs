use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::critical_path::CriticalPath;
use super::{assess_scenario, scale_down_factor, scale_up_factor, Decision, DsmConfig, ReliefOrder, Scenario};
use crate::domain::{end_to_end_latency, AppGraph, MdcId, ModuleId, Network, Placement, ServerId, Tenancy};
use crate::energy::{classify_mdcs, estimate_demand, estimate_supply, per_task_energy, EhDevice, EnergyForecast, MdcClassification, Predictor, Window};
use crate::error::Result;

/// Read-only view of the system handed to the scheduler at a decision point.
#[derive(Debug, Clone)]
pub struct Snapshot<'a> {
    pub app: &'a AppGraph,
    pub cp: &'a CriticalPath,
    pub net: &'a Network,
    pub placement: &'a Placement,
    /// Spendable energy per MDC over the coming window, J.
    pub supply: Vec<f64>,
    /// Tasks each hosted service is expected to process in the window.
    pub predicted_tasks: f64,
}

impl Snapshot<'_> {
    /// Supply of every device, ordered by MDC id.
    pub fn supply_from(devices: &[EhDevice], window: &Window, predictor: &dyn Predictor) -> Vec<f64> {
        devices.iter().map(|d| estimate_supply(d, window, predictor)).collect()
    }
}

/// A feasible migration target and its predicted effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MigrationCandidate {
    pub server: ServerId,
    pub mdc: MdcId,
    /// Target MDC demand with the module moved in, J.
    pub demand_after: f64,
    /// Predicted end-to-end latency with the module moved, s.
    pub latency: f64,
}

/// Everything needed to re-check one migration independently of the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationAudit {
    pub module: ModuleId,
    pub from: ServerId,
    pub to: ServerId,
    pub target_mdc: MdcId,
    pub supply: f64,
    pub demand_after: f64,
    pub latency_before: f64,
    pub latency_after: f64,
    pub surplus: BTreeSet<MdcId>,
    /// Hosts by module index just before the move.
    pub hosts_before: Vec<ServerId>,
    /// Frequencies by server index just before the move.
    pub freqs_before: Vec<f64>,
    pub predicted_tasks: f64,
}

/// Outcome of one scheduling round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub forecast: EnergyForecast,
    pub classification: MdcClassification,
    pub scenario: Scenario,
    pub decisions: Vec<Decision>,
    pub audits: Vec<MigrationAudit>,
}

/// Mutable working copy of a [`Snapshot`]. Decisions are applied here as
/// they are accepted.
#[derive(Debug, Clone)]
pub struct Planner<'a> {
    pub app: &'a AppGraph,
    pub cp: &'a CriticalPath,
    pub cfg: &'a DsmConfig,
    pub net: Network,
    pub placement: Placement,
    pub tenancy: Tenancy,
    pub supply: Vec<f64>,
    pub predicted_tasks: f64,
    pub decisions: Vec<Decision>,
    pub audits: Vec<MigrationAudit>,
    scaled: BTreeSet<ServerId>,
}

impl<'a> Planner<'a> {
    pub fn new(snap: &Snapshot<'a>, cfg: &'a DsmConfig) -> Self {
        let net = snap.net.clone();
        let tenancy = Tenancy::from_placement(snap.placement, net.servers().len());
        Self {
            app: snap.app,
            cp: snap.cp,
            cfg,
            net,
            placement: snap.placement.clone(),
            tenancy,
            supply: snap.supply.clone(),
            predicted_tasks: snap.predicted_tasks,
            decisions: Vec::new(),
            audits: Vec::new(),
            scaled: BTreeSet::new(),
        }
    }

    pub fn demand(&self, m: MdcId) -> f64 {
        estimate_demand(m, self.app, &self.placement, &self.net, &self.tenancy, self.predicted_tasks, &self.cfg.cost)
    }

    pub fn forecast(&self) -> EnergyForecast {
        EnergyForecast {
            supply: self.supply.clone(),
            demand: self.net.mdcs().iter().map(|m| self.demand(m.id)).collect(),
        }
    }

    pub fn classify(&self) -> MdcClassification {
        classify_mdcs(&self.forecast(), self.cfg.alpha)
    }

    pub fn latency(&self) -> Result<f64> {
        end_to_end_latency(self.app, &self.placement, &self.net, &self.tenancy, &self.cfg.cost)
    }

    fn relocate(&mut self, idx: usize, to: ServerId) {
        let from = self.placement.host(idx);
        self.tenancy.decrement(from);
        self.tenancy.increment(to);
        self.placement.set_host(idx, to);
    }

    /// Applies a migration and records it with its audit trail.
    pub fn migrate(&mut self, idx: usize, cand: &MigrationCandidate, surplus: &BTreeSet<MdcId>) -> Result<()> {
        let from = self.placement.host(idx);
        let audit = MigrationAudit {
            module: self.app.modules()[idx].id,
            from,
            to: cand.server,
            target_mdc: cand.mdc,
            supply: self.supply[cand.mdc.index()],
            demand_after: cand.demand_after,
            latency_before: self.latency()?,
            latency_after: cand.latency,
            surplus: surplus.clone(),
            hosts_before: self.placement.hosts().to_vec(),
            freqs_before: self.net.servers().iter().map(|s| s.f_cur).collect(),
            predicted_tasks: self.predicted_tasks,
        };
        self.relocate(idx, cand.server);
        self.decisions.push(Decision::Migrate {
            module: audit.module,
            target: cand.server,
        });
        self.audits.push(audit);
        Ok(())
    }

    /// Lowest frequency a scale-down may reach.
    fn floor(&self, s: ServerId) -> f64 {
        self.cfg.min_freq_fraction * self.net.server(s).f_max
    }

    /// Multiplies a server's frequency by `factor`, bounded by the floor and
    /// `f_max`. Records a decision only when the frequency changes.
    pub fn scale(&mut self, s: ServerId, factor: f64) {
        let server = self.net.server(s);
        let target = (server.f_cur * factor).clamp(self.floor(s).min(server.f_cur), server.f_max);
        self.scaled.insert(s);
        if target != server.f_cur {
            self.net.set_frequency(s, target);
            self.decisions.push(Decision::Scale { server: s, freq: target });
        }
    }

    pub fn was_scaled(&self, s: ServerId) -> bool {
        self.scaled.contains(&s)
    }
}

/// Best server in an operational surplus MDC for module `idx`: the move must
/// keep the target MDC's supply above its new demand and strictly lower the
/// predicted end-to-end latency. Lowest latency wins, then lowest server id.
pub fn best_mig_target(p: &mut Planner<'_>, idx: usize, surplus: &BTreeSet<MdcId>) -> Result<Option<MigrationCandidate>> {
    let from = p.placement.host(idx);
    let before = p.latency()?;
    let mut best: Option<MigrationCandidate> = None;
    for &m in surplus {
        if !p.net.is_operational(m) {
            continue;
        }
        for s in p.net.mdc(m).servers.clone() {
            if s == from {
                continue;
            }
            p.relocate(idx, s);
            let demand_after = p.demand(m);
            let latency = p.latency();
            p.relocate(idx, from);
            let latency = latency?;
            if !(p.supply[m.index()] > demand_after && latency < before - p.cfg.min_latency_gain) {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => latency < b.latency || (latency == b.latency && s < b.server),
            };
            if better {
                best = Some(MigrationCandidate {
                    server: s,
                    mdc: m,
                    demand_after,
                    latency,
                });
            }
        }
    }
    Ok(best)
}

/// Raises sub-maximal servers in surplus MDCs, then moves critical services
/// wherever a surplus target lowers latency.
pub fn sufficient_policy(p: &mut Planner<'_>, cls: &MdcClassification) -> Result<()> {
    if p.cfg.allow_scaling {
        for &m in &cls.surplus {
            let supply = p.supply[m.index()];
            let demand = p.demand(m);
            for s in p.net.mdc(m).servers.clone() {
                let server = p.net.server(s);
                if server.f_cur < server.f_max {
                    let factor = scale_up_factor(server.f_cur, server.f_max, supply, demand, p.cfg.alpha);
                    p.scale(s, factor);
                }
            }
        }
    }
    if p.cfg.allow_migration {
        for id in p.cp.modules.clone() {
            let idx = p.app.index_of(id).expect("critical path names app modules");
            if let Some(c) = best_mig_target(p, idx, &cls.surplus)? {
                p.migrate(idx, &c, &cls.surplus)?;
            }
        }
    }
    Ok(())
}

/// Scales every server of each deficit MDC by that MDC's factor. Never migrates.
pub fn deficit_policy(p: &mut Planner<'_>, cls: &MdcClassification) -> Result<()> {
    if !p.cfg.allow_scaling {
        return Ok(());
    }
    for &m in &cls.deficit {
        let factor = scale_down_factor(p.supply[m.index()], p.demand(m));
        for s in p.net.mdc(m).servers.clone() {
            p.scale(s, factor);
        }
    }
    Ok(())
}

fn hosted_on<'p>(p: &'p Planner<'_>, m: MdcId) -> impl Iterator<Item = usize> + 'p {
    (0..p.app.len()).filter(move |&i| p.net.server(p.placement.host(i)).mdc == m)
}

/// Phase 1 moves non-critical services off deficit MDCs, heaviest first;
/// phase 2 picks, for each critical service still on a deficit MDC, whichever
/// of migrating it or slowing its host gives the lower latency.
pub fn mixed_policy(p: &mut Planner<'_>, cls: &MdcClassification) -> Result<()> {
    if p.cfg.allow_migration {
        for &m in &cls.deficit {
            let mut relief: Vec<(f64, usize)> = hosted_on(p, m)
                .filter(|&i| !p.cp.contains(i))
                .map(|i| {
                    let s = p.placement.host(i);
                    let e = per_task_energy(&p.app.modules()[i], p.net.server(s), p.tenancy.count(s), &p.cfg.cost);
                    (e, i)
                })
                .collect();
            relief.sort_by(|a, b| match p.cfg.relief_order {
                ReliefOrder::Descending => b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)),
                ReliefOrder::Ascending => a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)),
            });
            for (_, i) in relief {
                let surplus = p.classify().surplus;
                if let Some(c) = best_mig_target(p, i, &surplus)? {
                    p.migrate(i, &c, &surplus)?;
                }
            }
        }
    }

    for &m in &cls.deficit {
        let critical: Vec<usize> = p.cp.modules.iter().filter_map(|id| p.app.index_of(*id)).collect();
        for i in critical {
            if p.net.server(p.placement.host(i)).mdc != m {
                continue;
            }
            let now = p.classify();
            if !now.deficit.contains(&m) {
                break;
            }
            let host = p.placement.host(i);
            let mig = if p.cfg.allow_migration {
                best_mig_target(p, i, &now.surplus)?
            } else {
                None
            };
            let can_scale = p.cfg.allow_scaling && !p.was_scaled(host);
            let factor = scale_down_factor(p.supply[m.index()], p.demand(m));
            let est_sca = if can_scale {
                let mut trial = p.clone();
                trial.scale(host, factor);
                trial.latency()?
            } else {
                p.latency()?
            };
            match mig {
                Some(c) if c.latency < est_sca => p.migrate(i, &c, &now.surplus)?,
                _ if can_scale => p.scale(host, factor),
                _ => {}
            }
        }
    }
    Ok(())
}

/// One scheduling round: forecast, classify, and dispatch to the matching policy.
pub fn dsm_step(snap: &Snapshot<'_>, cfg: &DsmConfig) -> Result<Plan> {
    let mut p = Planner::new(snap, cfg);
    let forecast = p.forecast();
    let classification = classify_mdcs(&forecast, cfg.alpha);
    let scenario = assess_scenario(&classification);
    match scenario {
        Scenario::Sufficient => sufficient_policy(&mut p, &classification)?,
        Scenario::Deficient => deficit_policy(&mut p, &classification)?,
        Scenario::Mixed => mixed_policy(&mut p, &classification)?,
    }
    Ok(Plan {
        forecast,
        classification,
        scenario,
        decisions: p.decisions,
        audits: p.audits,
    })
}
