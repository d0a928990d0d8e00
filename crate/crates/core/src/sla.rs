//! SLA policies and the compliance check that opens the admission pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::Request;
use crate::resources::Dimension;

/// Bounds a request must respect. An absent bound leaves that dimension
/// unconstrained.
///
/// `max_path_latency` is not checked here; it becomes a path-computation
/// constraint because only the PCE knows candidate paths. `min_bandwidth`
/// is validated for sign and carried with the policy, while bandwidth
/// feasibility itself is decided by the PCE against residual capacity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlaPolicy {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_path_latency: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cpu_demand: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mem_demand: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_io_demand: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("SLA bound `{field}` must be a finite value >= 0, got {value}")]
pub struct InvalidSlaBound {
    pub field: &'static str,
    pub value: f64,
}

impl SlaPolicy {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), InvalidSlaBound> {
        let bounds = [
            ("min_bandwidth", self.min_bandwidth),
            ("max_cpu_demand", self.max_cpu_demand),
            ("max_mem_demand", self.max_mem_demand),
            ("max_io_demand", self.max_io_demand),
        ];
        for (field, bound) in bounds {
            if let Some(value) = bound {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(InvalidSlaBound { field, value });
                }
            }
        }
        Ok(())
    }

    fn demand_cap(&self, dim: Dimension) -> Option<f64> {
        match dim {
            Dimension::Cpu => self.max_cpu_demand,
            Dimension::Mem => self.max_mem_demand,
            Dimension::Io => self.max_io_demand,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaViolation {
    pub dimension: Dimension,
    pub bound: f64,
    pub offered: f64,
}

impl fmt::Display for SlaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} demand {} exceeds SLA cap {}", self.dimension, self.offered, self.bound)
    }
}

/// Returns every demand cap the request exceeds, ordered by dimension name
/// (cpu, io, mem). Boundaries are inclusive: a demand equal to its cap passes.
pub fn check_sla(request: &Request, policy: &SlaPolicy) -> Vec<SlaViolation> {
    let demand = request.demand();
    let mut dims = Dimension::ALL;
    dims.sort_by_key(|d| d.name());
    dims.into_iter()
        .filter_map(|dim| {
            let bound = policy.demand_cap(dim)?;
            let offered = demand.get(dim) as f64;
            (offered > bound).then_some(SlaViolation { dimension: dim, bound, offered })
        })
        .collect()
}
