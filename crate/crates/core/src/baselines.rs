//! Comparison admission schemes.
//!
//! Both baselines replace only the resource gate of the pipeline; the SLA
//! gate and the path gate are shared, so the three schemes differ purely in
//! how they judge host capacity.
//!
//! * **Realistic** scores a request with product logic: each demanded
//!   dimension's headroom membership is `clamp(1 − projected utilization,
//!   0, 1)` and the score is their product (1 when nothing is demanded). The
//!   request is admitted when the score reaches the threshold θ and no
//!   dimension would be over capacity.
//! * **Capacity-aware** inflates CPU and I/O demand by risk factors before
//!   testing free capacity, and takes memory at face value.
//!
//! Default parameters (θ = 0.2, both risk factors 1.3) are scenario
//! defaults, not tuned values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::{self, AdmissionError, ComputeState, Rejection, Request, ResourceCheck};
use crate::resources::Dimension;
use crate::topo::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Proposed,
    Realistic,
    CapacityAware,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::Realistic, Scheme::CapacityAware];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Realistic => "realistic",
            Scheme::CapacityAware => "capacity-aware",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scheme `{0}` (expected proposed, realistic or capacity-aware)")]
pub struct UnknownScheme(String);

impl FromStr for Scheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL.into_iter().find(|scheme| scheme.label() == s).ok_or_else(|| UnknownScheme(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("realistic.theta must lie in (0, 1], got {0}")]
    Theta(f64),
    #[error("capacity_aware.{field} must be >= 1, got {value}")]
    Risk { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealisticParams {
    pub theta: f64,
}

impl Default for RealisticParams {
    fn default() -> Self {
        Self { theta: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityAwareParams {
    pub risk_cpu: f64,
    pub risk_io: f64,
}

impl Default for CapacityAwareParams {
    fn default() -> Self {
        Self { risk_cpu: 1.3, risk_io: 1.3 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    #[serde(default)]
    pub realistic: RealisticParams,
    #[serde(default)]
    pub capacity_aware: CapacityAwareParams,
}

impl SchemeParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let theta = self.realistic.theta;
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(ParamError::Theta(theta));
        }
        for (field, value) in [("risk_cpu", self.capacity_aware.risk_cpu), ("risk_io", self.capacity_aware.risk_io)] {
            if !(value >= 1.0 && value.is_finite()) {
                return Err(ParamError::Risk { field, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RealisticVerdict {
    Admit { score: f64 },
    Reject { score: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityAwareVerdict {
    Admit,
    Reject { dimension: Dimension },
}

/// `(allocated + demand) / capacity`; a zero-capacity dimension is 0 while
/// untouched and infinitely over-committed otherwise.
pub fn projected_utilization(allocated: u64, demand: u64, capacity: u64) -> f64 {
    let used = allocated as f64 + demand as f64;
    if capacity == 0 {
        if used == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        used / capacity as f64
    }
}

pub fn realistic_admit(
    request: &Request,
    state: &ComputeState,
    topology: &Topology,
    params: &RealisticParams,
) -> Result<RealisticVerdict, AdmissionError> {
    let capacity = admission::target_capacity(topology, &request.target)?;
    let allocated = state.allocated(&request.target);
    let demand = request.demand();

    let projected = Dimension::ALL.map(|d| projected_utilization(allocated.get(d), demand.get(d), capacity.get(d)));
    let score: f64 = Dimension::ALL
        .iter()
        .zip(projected)
        .filter(|(&d, _)| demand.get(d) > 0)
        .map(|(_, u)| (1.0 - u).clamp(0.0, 1.0))
        .product();
    let within = projected.iter().all(|&u| u <= 1.0);

    Ok(if within && score >= params.theta {
        RealisticVerdict::Admit { score }
    } else {
        RealisticVerdict::Reject { score }
    })
}

pub fn capacity_aware_admit(
    request: &Request,
    state: &ComputeState,
    topology: &Topology,
    params: &CapacityAwareParams,
) -> Result<CapacityAwareVerdict, AdmissionError> {
    let capacity = admission::target_capacity(topology, &request.target)?;
    let allocated = state.allocated(&request.target);
    let demand = request.demand();

    let checks = [(Dimension::Cpu, params.risk_cpu), (Dimension::Io, params.risk_io), (Dimension::Mem, 1.0)];
    for (dim, risk) in checks {
        let inflated = allocated.get(dim) as f64 + risk * demand.get(dim) as f64;
        if inflated > capacity.get(dim) as f64 {
            return Ok(CapacityAwareVerdict::Reject { dimension: dim });
        }
    }
    Ok(CapacityAwareVerdict::Admit)
}

/// The scheme-specific resource gate. `Ok(None)` lets the request through.
pub fn resource_gate(
    scheme: Scheme,
    params: &SchemeParams,
    request: &Request,
    state: &ComputeState,
    topology: &Topology,
) -> Result<Option<Rejection>, AdmissionError> {
    Ok(match scheme {
        Scheme::Proposed => match admission::check_resources(request, state, topology)? {
            ResourceCheck::Sufficient => None,
            ResourceCheck::Insufficient(dimension) => Some(Rejection::InsufficientResources { dimension }),
        },
        Scheme::Realistic => match realistic_admit(request, state, topology, &params.realistic)? {
            RealisticVerdict::Admit { .. } => None,
            RealisticVerdict::Reject { score } => Some(Rejection::LowAdmissionScore { score }),
        },
        Scheme::CapacityAware => match capacity_aware_admit(request, state, topology, &params.capacity_aware)? {
            CapacityAwareVerdict::Admit => None,
            CapacityAwareVerdict::Reject { dimension } => Some(Rejection::InsufficientResources { dimension }),
        },
    })
}
