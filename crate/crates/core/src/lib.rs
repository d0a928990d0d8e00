//! Resource-aware topology management for software-defined data centers.
//!
//! The crate models a hierarchical data-center topology and runs resource
//! requests through an admission pipeline: an SLA gate, a compute-resource
//! gate, and a path computation element (PCE) that selects constrained paths
//! and caches them in a path allocation table. Admitted work receives
//! share-fair CPU and rigid memory/I/O reservations. A deterministic
//! discrete-event simulator replays batch workloads against the pipeline and
//! two comparison admission schemes, and [`metrics`] turns the runs into
//! utilization series and a comparison report.

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

pub mod admission;
pub mod baselines;
pub mod exec;
pub mod fairshare;
pub mod metrics;
pub mod pce;
pub mod resources;
pub mod sim;
pub mod sla;
pub mod topo;

pub use admission::{AdmissionController, AllocationDecision, Lease, Rejection, Request, RequestId};
pub use baselines::{CapacityAwareParams, RealisticParams, Scheme, SchemeParams};
pub use exec::ExecMode;
pub use pce::{Path, PathAllocationTable, PathConstraints, ResidualState};
pub use resources::{Dimension, Resources};
pub use sim::{SimConfig, SimResult, WorkloadTrace};
pub use sla::{SlaPolicy, SlaViolation};
pub use topo::{LinkId, NodeId, NodeKind, RoutingGraph, Topology};
