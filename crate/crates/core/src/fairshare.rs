//! Share-fair CPU semantics.
//!
//! CPU on a host is divided by weighted max-min fairness (water-filling):
//! a common level `λ` rises until `Σ min(demandᵢ, weightᵢ·λ)` reaches the
//! smaller of capacity and total demand. A lone consumer therefore gets the
//! whole host up to its demand. What a lease *uses* is its share scaled by a
//! usage fraction, so allocation and utilization stay distinct.
//!
//! Memory and I/O are reserved rigidly and never pass through here.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::admission::{Lease, RequestId};
use crate::topo::{NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FairShareError {
    #[error("share weight must be finite and positive, got {0}")]
    InvalidWeight(f64),
    #[error("cpu demand must be finite and non-negative, got {0}")]
    InvalidDemand(f64),
    #[error("usage fraction must lie in [0, 1], got {0}")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareEntry {
    lease: RequestId,
    weight: f64,
    cpu_demand: f64,
}

impl ShareEntry {
    /// Unit-weight entry.
    pub fn new(lease: RequestId, cpu_demand: f64) -> Result<Self, FairShareError> {
        Self::weighted(lease, 1.0, cpu_demand)
    }

    pub fn weighted(lease: RequestId, weight: f64, cpu_demand: f64) -> Result<Self, FairShareError> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(FairShareError::InvalidWeight(weight));
        }
        if !(cpu_demand.is_finite() && cpu_demand >= 0.0) {
            return Err(FairShareError::InvalidDemand(cpu_demand));
        }
        Ok(Self { lease, weight, cpu_demand })
    }

    pub fn lease(&self) -> &RequestId {
        &self.lease
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn cpu_demand(&self) -> f64 {
        self.cpu_demand
    }
}

/// Effective CPU share per lease, in entry order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EffectiveShares(Vec<(RequestId, f64)>);

impl EffectiveShares {
    pub fn get(&self, lease: &RequestId) -> Option<f64> {
        self.0.iter().find(|(id, _)| id == lease).map(|&(_, s)| s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RequestId, f64)> {
        self.0.iter().map(|(id, s)| (id, *s))
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|&(_, s)| s)
    }

    pub fn total(&self) -> f64 {
        self.values().fold(0.0, |acc, s| acc + s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weighted max-min division of `cpu_capacity` among `entries`.
///
/// Exact progressive filling: entries are satisfied in order of
/// `demand / weight` while their demand fits under the current level; the
/// rest split what remains in proportion to weight.
pub fn fair_shares(entries: &[ShareEntry], cpu_capacity: f64) -> EffectiveShares {
    let capacity = cpu_capacity.max(0.0);
    let total: f64 = entries.iter().map(|e| e.cpu_demand).sum();
    let mut shares: Vec<f64> = entries.iter().map(|e| e.cpu_demand).collect();

    if total > capacity {
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (&entries[i], &entries[j]);
            (a.cpu_demand / a.weight).total_cmp(&(b.cpu_demand / b.weight)).then(i.cmp(&j))
        });

        let mut remaining = capacity;
        let mut k = 0;
        while k < order.len() {
            let weight: f64 = order[k..].iter().map(|&i| entries[i].weight).sum();
            let e = &entries[order[k]];
            if e.cpu_demand > e.weight * (remaining / weight) {
                break;
            }
            remaining = (remaining - e.cpu_demand).max(0.0);
            k += 1;
        }

        let rest = &order[k..];
        if let [only] = rest {
            shares[*only] = remaining;
        } else {
            let weight: f64 = rest.iter().map(|&i| entries[i].weight).sum();
            for &i in rest {
                shares[i] = (remaining * entries[i].weight / weight).min(entries[i].cpu_demand);
            }
        }
    }

    EffectiveShares(entries.iter().map(|e| e.lease.clone()).zip(shares).collect())
}

/// Per-lease fraction of the effective share actually consumed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UsageModel {
    fractions: BTreeMap<RequestId, f64>,
}

impl UsageModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, lease: RequestId, fraction: f64) -> Result<(), FairShareError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(FairShareError::InvalidFraction(fraction));
        }
        self.fractions.insert(lease, fraction);
        Ok(())
    }

    /// Defaults to 1 for leases without an explicit fraction.
    pub fn fraction(&self, lease: &RequestId) -> f64 {
        self.fractions.get(lease).copied().unwrap_or(1.0)
    }
}

/// `shareᵢ × fractionᵢ` for every lease in `shares`.
pub fn usage(shares: &EffectiveShares, model: &UsageModel) -> Vec<(RequestId, f64)> {
    shares.iter().map(|(id, share)| (id.clone(), share * model.fraction(id))).collect()
}

/// Fair shares on every compute host for the given live leases, plus the
/// usage model their fractions define.
pub fn host_shares<'a>(
    topology: &Topology,
    leases: impl IntoIterator<Item = &'a Lease>,
) -> (BTreeMap<NodeId, EffectiveShares>, UsageModel) {
    let mut per_host: BTreeMap<NodeId, Vec<ShareEntry>> = BTreeMap::new();
    let mut model = UsageModel::new();
    for lease in leases {
        let entry =
            ShareEntry::new(lease.request.clone(), lease.reserved.cpu as f64).expect("integer demands are valid");
        per_host.entry(lease.target.clone()).or_default().push(entry);
        model.set(lease.request.clone(), lease.usage_fraction).expect("lease fractions are validated on admission");
    }
    let shares = per_host
        .into_iter()
        .map(|(host, entries)| {
            let capacity = topology.node(&host).map_or(0, |n| n.capacity.cpu) as f64;
            (host, fair_shares(&entries, capacity))
        })
        .collect();
    (shares, model)
}
