//! Simulator for energy-harvesting micro datacenters with frequency scaling
//! and service migration.

pub mod domain;
pub mod energy;
pub mod engine;
pub mod grid;
pub mod metrics;
pub mod report;
pub mod scheduler;
pub mod workload;

mod error;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/scheduling.md")]
    mod scheduling {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/workloads.md")]
    mod workloads {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
}
