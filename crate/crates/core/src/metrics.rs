//! Utilization sampling, scheme comparison and CSV/JSON export.
//!
//! CPU utilization counts what leases actually *use* (fair share times usage
//! fraction) while memory utilization counts what is *reserved*. Overall
//! utilization is the unweighted mean of the two.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::ComputeState;
use crate::baselines::Scheme;
use crate::fairshare::{self, EffectiveShares, UsageModel};
use crate::sim::SimResult;
use crate::topo::{NodeId, Topology};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("series `{scheme}` is sampled on a different tick grid than `{reference}`")]
    GridMismatch { scheme: Scheme, reference: Scheme },
    #[error("sample at tick {tick} is out of range or inconsistent")]
    InvalidSample { tick: u64 },
    #[error("ticks must be strictly increasing: {next} after {last}")]
    NonIncreasingTick { last: u64, next: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSample {
    pub tick: u64,
    pub cpu: f64,
    pub mem: f64,
    pub overall: f64,
}

impl UtilizationSample {
    pub fn new(tick: u64, cpu: f64, mem: f64) -> Self {
        Self { tick, cpu, mem, overall: (cpu + mem) / 2.0 }
    }

    /// All fields within [0, 1] and `overall` equal to the stored mean.
    pub fn is_consistent(&self) -> bool {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        unit(self.cpu) && unit(self.mem) && unit(self.overall) && self.overall == (self.cpu + self.mem) / 2.0
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Utilization of the compute hosts at `tick`.
pub fn sample(
    topology: &Topology,
    compute: &ComputeState,
    shares: &BTreeMap<NodeId, EffectiveShares>,
    usage: &UsageModel,
    tick: u64,
) -> UtilizationSample {
    let capacity = topology.total_capacity();
    let cpu_used: f64 = shares.values().flat_map(|s| fairshare::usage(s, usage)).fold(0.0, |acc, (_, u)| acc + u);
    let mem_reserved = compute.total().mem as f64;
    UtilizationSample::new(tick, ratio(cpu_used, capacity.cpu as f64), ratio(mem_reserved, capacity.mem as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSeries {
    pub scheme: Scheme,
    samples: Vec<UtilizationSample>,
}

impl UtilizationSeries {
    pub fn new(scheme: Scheme) -> Self {
        Self { scheme, samples: Vec::new() }
    }

    pub fn push(&mut self, sample: UtilizationSample) -> Result<(), MetricsError> {
        if let Some(last) = self.samples.last() {
            if sample.tick <= last.tick {
                return Err(MetricsError::NonIncreasingTick { last: last.tick, next: sample.tick });
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[UtilizationSample] {
        &self.samples
    }

    pub fn ticks(&self) -> impl Iterator<Item = u64> + '_ {
        self.samples.iter().map(|s| s.tick)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Arithmetic means over all samples; zeros for an empty series.
    pub fn means(&self) -> SchemeMeans {
        let n = self.samples.len() as f64;
        if self.samples.is_empty() {
            return SchemeMeans::default();
        }
        let sum = |f: fn(&UtilizationSample) -> f64| self.samples.iter().map(f).sum::<f64>() / n;
        SchemeMeans { cpu: sum(|s| s.cpu), mem: sum(|s| s.mem), overall: sum(|s| s.overall) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemeMeans {
    pub cpu: f64,
    pub mem: f64,
    pub overall: f64,
}

impl SchemeMeans {
    /// `|mean cpu − mean mem|`.
    pub fn asymmetry(&self) -> f64 {
        (self.cpu - self.mem).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scheme_means: BTreeMap<Scheme, SchemeMeans>,
    /// Proposed overall mean at or below the mean of the two baselines'
    /// overall means; `None` unless all three schemes are present.
    pub proposed_below_baseline_average: Option<bool>,
    pub asymmetry: BTreeMap<Scheme, f64>,
}

/// Compares series sampled on one tick grid.
pub fn compare<'a>(series: impl IntoIterator<Item = &'a UtilizationSeries>) -> Result<ComparisonReport, MetricsError> {
    let mut reference: Option<&UtilizationSeries> = None;
    let mut scheme_means = BTreeMap::new();
    for s in series {
        match reference {
            None => reference = Some(s),
            Some(r) if !r.ticks().eq(s.ticks()) => {
                return Err(MetricsError::GridMismatch { scheme: s.scheme, reference: r.scheme })
            }
            Some(_) => {}
        }
        scheme_means.insert(s.scheme, s.means());
    }

    let proposed_below_baseline_average = match (
        scheme_means.get(&Scheme::Proposed),
        scheme_means.get(&Scheme::Realistic),
        scheme_means.get(&Scheme::CapacityAware),
    ) {
        (Some(p), Some(r), Some(c)) => Some(p.overall <= (r.overall + c.overall) / 2.0),
        _ => None,
    };
    let asymmetry = scheme_means.iter().map(|(&s, m)| (s, m.asymmetry())).collect();
    Ok(ComparisonReport { scheme_means, proposed_below_baseline_average, asymmetry })
}

/// [`compare`] over the series of finished simulation runs.
pub fn compare_results(results: &BTreeMap<Scheme, SimResult>) -> Result<ComparisonReport, MetricsError> {
    compare(results.values().map(|r| &r.series))
}

/// Writes `tick,cpu,mem,overall` rows. Refuses samples that break the
/// [0, 1] range or the overall-mean identity.
pub fn write_series_csv(series: &UtilizationSeries, mut out: impl Write) -> Result<(), MetricsError> {
    writeln!(out, "tick,cpu,mem,overall")?;
    for s in series.samples() {
        if !s.is_consistent() {
            return Err(MetricsError::InvalidSample { tick: s.tick });
        }
        writeln!(out, "{},{},{},{}", s.tick, s.cpu, s.mem, s.overall)?;
    }
    Ok(())
}

/// One row per scheme with its means and asymmetry, then the flag row.
pub fn write_report_csv(report: &ComparisonReport, mut out: impl Write) -> Result<(), MetricsError> {
    writeln!(out, "scheme,cpu,mem,overall,asymmetry")?;
    for (scheme, m) in &report.scheme_means {
        writeln!(out, "{},{},{},{},{}", scheme, m.cpu, m.mem, m.overall, m.asymmetry())?;
    }
    let flag = report.proposed_below_baseline_average.map_or("null".to_owned(), |b| b.to_string());
    writeln!(out, "proposed_below_baseline_average,{flag}")?;
    Ok(())
}

pub fn write_report_json(report: &ComparisonReport, mut out: impl Write) -> Result<(), MetricsError> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    Ok(())
}
