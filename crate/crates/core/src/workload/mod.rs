//! Experimental inputs: topologies, application DAGs, and arrival and
//! harvest profiles.

mod dag;
mod profiles;
mod topology;

pub use dag::{bundled_app, bundled_seed, load_dag, serialize_dag, synthesize_app, AppTarget, DagDocument, ModuleDoc, REFERENCE_JOBS};
pub use profiles::{harvest_power, ArrivalAccumulator, ArrivalProfile, HarvestProfile, HarvestShape, Table};
pub use topology::{barabasi_albert, gen_topology, Topology, TopologyDump, TopologySpec};
