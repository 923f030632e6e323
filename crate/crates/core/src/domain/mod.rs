//! Static system model: the MDC network, the application DAG, service
//! placement, and latency evaluated against a placement.

mod app;
mod latency;
mod network;
mod placement;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use app::{AppGraph, AppStats, ServiceModule};
pub use latency::{
    colocation_factor, comm_delay_link, comm_delay_mdcs, comm_delay_path, end_to_end_latency,
    est_all, est_partial, exec_time, exec_time_colocated, EstTable,
};
pub use network::{Link, Mdc, Network, Server};
pub use placement::{Placement, Tenancy};
pub(crate) use latency::user_mdc;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// Service module identifier. Unique within one application.
    ModuleId,
    "v"
);
id_type!(
    /// Global server identifier, dense from zero across the whole network.
    ServerId,
    "s"
);
id_type!(
    /// Micro datacenter identifier, dense from zero. Also names the MDC's
    /// energy-harvesting device.
    MdcId,
    "m"
);
id_type!(LinkId, "l");

/// Scale factors from the unitless numbers in application documents to
/// physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Units {
    /// CPU cycles per unit of module workload (`wl`).
    pub cycles_per_workload: f64,
    /// Bits per unit of module output size (`size`).
    pub bits_per_size: f64,
}

impl Default for Units {
    fn default() -> Self {
        // gigacycles and megabits
        Self {
            cycles_per_workload: 1e9,
            bits_per_size: 1e6,
        }
    }
}

/// Parameters shared by every latency and energy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// Per-extra-tenant slowdown: `K(n) = 1 + kappa * (n - 1)`.
    pub kappa: f64,
    pub units: Units,
    /// MDC where the user equipment attaches. `None` means the MDC of the
    /// server hosting the application's source module.
    pub user_mdc: Option<MdcId>,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            kappa: 0.1,
            units: Units::default(),
            user_mdc: None,
        }
    }
}
