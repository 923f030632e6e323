use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EhDevice, Predictor, Window};
use crate::domain::{colocation_factor, AppGraph, CostModel, MdcId, Network, Placement, Server, ServiceModule, Tenancy};

/// Predicted per-MDC energy budget and need for the next window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyForecast {
    /// Indexed by MDC id, J.
    pub supply: Vec<f64>,
    /// Indexed by MDC id, J.
    pub demand: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MdcClassification {
    pub surplus: BTreeSet<MdcId>,
    pub deficit: BTreeSet<MdcId>,
    pub neutral: BTreeSet<MdcId>,
}

/// Spendable energy over the window: headroom above the safe line plus the
/// predicted harvest, never negative.
pub fn estimate_supply(dev: &EhDevice, window: &Window, predictor: &dyn Predictor) -> f64 {
    (dev.battery - dev.safe_line + predictor.harvest(dev.mdc, window)).max(0.0)
}

/// Energy for one task of `v` on `s` with `n` co-tenants: `beta f^3` over
/// `wl / f * K(n)` seconds.
pub fn per_task_energy(v: &ServiceModule, s: &Server, n: u32, cost: &CostModel) -> f64 {
    s.beta * s.f_cur * s.f_cur * v.wl * cost.units.cycles_per_workload * colocation_factor(n, cost.kappa)
}

/// Energy needed by the services hosted on `mdc` to process `predicted_tasks`.
pub fn estimate_demand(
    mdc: MdcId,
    app: &AppGraph,
    placement: &Placement,
    net: &Network,
    tenancy: &Tenancy,
    predicted_tasks: f64,
    cost: &CostModel,
) -> f64 {
    app.modules()
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            let s = net.server(placement.host(i));
            (s.mdc == mdc).then(|| predicted_tasks * per_task_energy(v, s, tenancy.count(s.id), cost))
        })
        .sum()
}

/// Surplus when supply beats the alpha-inflated demand, deficit when it falls
/// short of demand, neutral in between.
pub fn classify_mdcs(forecast: &EnergyForecast, alpha: f64) -> MdcClassification {
    let mut cls = MdcClassification::default();
    for (m, (&supply, &demand)) in forecast.supply.iter().zip(&forecast.demand).enumerate() {
        let id = MdcId(m as u32);
        if supply > demand * alpha {
            cls.surplus.insert(id);
        } else if supply < demand {
            cls.deficit.insert(id);
        } else {
            cls.neutral.insert(id);
        }
    }
    cls
}
