//! Scenario loading and the `topoman` subcommands.
//!
//! A scenario is a JSON document naming a topology file and either a trace
//! file or generator parameters, plus scheme, SLA and baseline settings.
//! Relative paths resolve against the scenario file's directory. Command-line
//! overrides beat scenario keys, which beat `TOPOMAN_OUT` and built-in
//! defaults.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use topoman::metrics::{self, ComparisonReport};
use topoman::pce::CacheCounters;
use topoman::sim::{self, SimResult, TraceGenParams, WorkloadTrace};
use topoman::topo::{TopologyDoc, TopologyError};
use topoman::{CapacityAwareParams, ExecMode, RealisticParams, Scheme, SchemeParams, SimConfig, SlaPolicy, Topology};

pub const OUT_ENV: &str = "TOPOMAN_OUT";
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retry {
    #[default]
    Never,
}

/// The scenario document as written on disk.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub topology: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<TraceGenParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<Scheme>>,
    #[serde(default)]
    pub sla: SlaPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realistic: Option<RealisticParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_aware: Option<CapacityAwareParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub retry: Retry,
}

/// Command-line values that take precedence over scenario keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub scheme: Option<Scheme>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Workload {
    Trace(PathBuf),
    Generated(TraceGenParams),
}

/// A scenario with paths resolved and overrides applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: PathBuf,
    pub workload: Workload,
    pub scheme: Scheme,
    pub schemes: Vec<Scheme>,
    pub sla: SlaPolicy,
    pub params: SchemeParams,
    pub sample_interval: u64,
    pub out: PathBuf,
}

impl Scenario {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read scenario {}", path.display()))?;
        let doc: ScenarioDoc =
            serde_json::from_str(&text).with_context(|| format!("malformed scenario {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::resolve(doc, base, overrides, std::env::var_os(OUT_ENV).map(PathBuf::from))
    }

    /// Applies flag > file > environment > default precedence.
    pub fn resolve(doc: ScenarioDoc, base: &Path, overrides: &Overrides, env_out: Option<PathBuf>) -> Result<Self> {
        let workload = match (doc.trace, doc.generator) {
            (Some(trace), None) => Workload::Trace(base.join(trace)),
            (None, Some(mut generator)) => {
                if let Some(seed) = overrides.seed.or(doc.seed) {
                    generator.seed = seed;
                }
                Workload::Generated(generator)
            }
            (Some(_), Some(_)) => bail!("scenario sets both `trace` and `generator`; exactly one is allowed"),
            (None, None) => bail!("scenario needs either `trace` or `generator`"),
        };
        let scheme = overrides.scheme.or(doc.scheme).unwrap_or(Scheme::Proposed);
        let schemes = doc.schemes.unwrap_or_else(|| Scheme::ALL.to_vec());
        if schemes.is_empty() {
            bail!("`schemes` must name at least one scheme");
        }
        let params = SchemeParams {
            realistic: doc.realistic.unwrap_or_default(),
            capacity_aware: doc.capacity_aware.unwrap_or_default(),
        };
        params.validate()?;
        doc.sla.validate()?;
        let sample_interval = doc.sample_interval.unwrap_or(1);
        if sample_interval == 0 {
            bail!("`sample_interval` must be positive");
        }
        let out = overrides
            .out
            .clone()
            .or_else(|| doc.out.map(|o| base.join(o)))
            .or(env_out)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok(Self {
            topology: base.join(doc.topology),
            workload,
            scheme,
            schemes,
            sla: doc.sla,
            params,
            sample_interval,
            out,
        })
    }

    pub fn config(&self, scheme: Scheme) -> SimConfig {
        SimConfig { scheme, params: self.params, sla: self.sla, sample_interval: self.sample_interval }
    }

    pub fn load_topology(&self) -> Result<Topology> {
        let text = read(&self.topology, "topology")?;
        Topology::from_json(&text).with_context(|| format!("in {}", self.topology.display()))
    }

    pub fn load_trace(&self) -> Result<WorkloadTrace> {
        match &self.workload {
            Workload::Trace(path) => {
                let text = read(path, "trace")?;
                WorkloadTrace::from_json(&text).with_context(|| format!("in {}", path.display()))
            }
            Workload::Generated(params) => Ok(sim::generate_batch_trace(params)?),
        }
    }
}

fn read(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} file {}", path.display()))
}

/// Every problem found with a scenario; empty when it is valid.
pub fn cmd_validate(scenario: &Path, overrides: &Overrides) -> Result<Vec<String>> {
    let scenario = Scenario::load(scenario, overrides)?;
    let text = read(&scenario.topology, "topology")?;
    let doc: TopologyDoc = serde_json::from_str(&text)
        .map_err(TopologyError::Parse)
        .with_context(|| format!("in {}", scenario.topology.display()))?;
    let violations = topoman::topo::validate(&doc);
    if !violations.is_empty() {
        return Ok(violations.iter().map(|v| format!("{}: {v}", scenario.topology.display())).collect());
    }
    let topology = Topology::from_doc(&doc)?;
    let trace = scenario.load_trace()?;
    let mut problems = Vec::new();
    for request in trace.requests() {
        if let Err(e) = request.validate(&topology) {
            problems.push(format!("request `{}`: {e}", request.id));
        }
    }
    Ok(problems)
}

/// Files written by a command, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    files.push(path);
    Ok(BufWriter::new(file))
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn ensure_conserved(result: &SimResult) -> Result<()> {
    if let Some(first) = result.conservation_violations.first() {
        bail!(
            "{} run broke capacity conservation ({} violations, first: {first})",
            result.scheme,
            result.conservation_violations.len()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct CacheSummary<'a> {
    scheme: Scheme,
    admitted: usize,
    rejected: usize,
    cache: &'a CacheCounters,
}

/// Runs the scenario's single scheme and writes `utilization.csv`,
/// `events.log`, `decisions.csv` and `cache.json`.
pub fn cmd_run(scenario: &Path, overrides: &Overrides) -> Result<(SimResult, Written)> {
    let scenario = Scenario::load(scenario, overrides)?;
    let topology = scenario.load_topology()?;
    let trace = scenario.load_trace()?;
    let result = sim::run(&topology, &trace, &scenario.config(scenario.scheme))?;
    ensure_conserved(&result)?;

    fs::create_dir_all(&scenario.out).with_context(|| format!("cannot create {}", scenario.out.display()))?;
    let mut files = Vec::new();
    let mut w = create(&scenario.out, "utilization.csv", &mut files)?;
    metrics::write_series_csv(&result.series, &mut w)?;
    finish(w)?;
    let mut w = create(&scenario.out, "events.log", &mut files)?;
    sim::write_event_log(&result.events, &mut w)?;
    finish(w)?;
    let mut w = create(&scenario.out, "decisions.csv", &mut files)?;
    sim::write_decisions_csv(&result.decisions, &mut w)?;
    finish(w)?;
    let mut w = create(&scenario.out, "cache.json", &mut files)?;
    let summary = CacheSummary {
        scheme: result.scheme,
        admitted: result.admitted(),
        rejected: result.rejected(),
        cache: &result.cache,
    };
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    finish(w)?;
    Ok((result, Written { files }))
}

/// Runs every scheme in the scenario and writes `utilization_<scheme>.csv`
/// per scheme plus `report.json` and `report.csv`.
pub fn cmd_compare(scenario: &Path, overrides: &Overrides, mode: ExecMode) -> Result<(ComparisonReport, Written)> {
    let scenario = Scenario::load(scenario, overrides)?;
    let topology = scenario.load_topology()?;
    let trace = scenario.load_trace()?;
    let results: BTreeMap<Scheme, SimResult> =
        sim::run_comparison(mode, &topology, &trace, &scenario.schemes, &scenario.config(Scheme::Proposed))?;
    for result in results.values() {
        ensure_conserved(result)?;
    }
    let report = metrics::compare_results(&results)?;

    fs::create_dir_all(&scenario.out).with_context(|| format!("cannot create {}", scenario.out.display()))?;
    let mut files = Vec::new();
    for (scheme, result) in &results {
        let mut w = create(&scenario.out, &format!("utilization_{scheme}.csv"), &mut files)?;
        metrics::write_series_csv(&result.series, &mut w)?;
        finish(w)?;
    }
    let mut w = create(&scenario.out, "report.json", &mut files)?;
    metrics::write_report_json(&report, &mut w)?;
    finish(w)?;
    let mut w = create(&scenario.out, "report.csv", &mut files)?;
    metrics::write_report_csv(&report, &mut w)?;
    finish(w)?;
    Ok((report, Written { files }))
}

/// Writes the scenario's generated trace to `trace.json`.
pub fn cmd_gen_trace(scenario: &Path, overrides: &Overrides) -> Result<(WorkloadTrace, Written)> {
    let scenario = Scenario::load(scenario, overrides)?;
    if !matches!(scenario.workload, Workload::Generated(_)) {
        bail!("gen-trace needs a scenario with `generator` parameters");
    }
    let topology = scenario.load_topology()?;
    let trace = scenario.load_trace()?;
    trace.validate(&topology)?;

    fs::create_dir_all(&scenario.out).with_context(|| format!("cannot create {}", scenario.out.display()))?;
    let mut files = Vec::new();
    let mut w = create(&scenario.out, "trace.json", &mut files)?;
    w.write_all(trace.to_json()?.as_bytes())?;
    writeln!(w)?;
    finish(w)?;
    Ok((trace, Written { files }))
}
