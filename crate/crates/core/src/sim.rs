//! Deterministic discrete-event simulation of batch workloads.
//!
//! Requests arrive into a FIFO job queue and each arrival schedules an
//! admission attempt at the same tick, which takes the queue head through
//! the selected scheme's pipeline. Rejected jobs are dropped. Admitted jobs
//! hold their lease until it expires. Utilization is sampled every
//! `sample_interval` ticks from tick 0 until the first sample at or after
//! the last possible lease end, so every scheme run on the same trace shares
//! one tick grid.
//!
//! Events at one tick are ordered expiry < arrival < attempt < sample, then
//! by payload id. Time is integer ticks, so a run is bit-reproducible.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::{AdmissionController, AdmissionError, AllocationDecision, ComputeState, Request, RequestId};
use crate::baselines::{ParamError, Scheme, SchemeParams};
use crate::exec::{self, ExecMode};
use crate::fairshare;
use crate::metrics::{self, MetricsError, UtilizationSeries};
use crate::pce::{CacheCounters, CacheOutcome, ResidualState};
use crate::sla::{InvalidSlaBound, SlaPolicy};
use crate::topo::{NodeId, Topology};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid range for `{field}`: {reason}")]
    InvalidRange { field: &'static str, reason: String },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("sample_interval must be positive")]
    ZeroSampleInterval,
    #[error("job queue holds {pending} request(s) but no events remain")]
    SchedulerStall { pending: usize },
    #[error(transparent)]
    Admission(#[from] AdmissionError),
    #[error(transparent)]
    Sla(#[from] InvalidSlaBound),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Requests ordered by arrival, with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkloadTrace {
    requests: Vec<Request>,
}

impl WorkloadTrace {
    pub fn new(requests: Vec<Request>) -> Result<Self, SimError> {
        let trace = Self { requests };
        trace.check_order()?;
        Ok(trace)
    }

    pub fn from_json(json: &str) -> Result<Self, SimError> {
        let trace: WorkloadTrace = serde_json::from_str(json)?;
        trace.check_order()?;
        Ok(trace)
    }

    pub fn to_json(&self) -> Result<String, SimError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    /// Last tick at which any lease of this trace could still be live.
    pub fn horizon(&self) -> u64 {
        self.requests.iter().map(|r| r.arrival_time + r.duration).max().unwrap_or(0)
    }

    fn check_order(&self) -> Result<(), SimError> {
        let mut seen = BTreeSet::new();
        for pair in self.requests.windows(2) {
            if pair[1].arrival_time < pair[0].arrival_time {
                return Err(SimError::InvalidTrace(format!(
                    "request `{}` arrives before its predecessor `{}`",
                    pair[1].id, pair[0].id
                )));
            }
        }
        for r in &self.requests {
            if !seen.insert(&r.id) {
                return Err(SimError::InvalidTrace(format!("duplicate request id `{}`", r.id)));
            }
        }
        Ok(())
    }

    /// Checks every request against `topology`.
    pub fn validate(&self, topology: &Topology) -> Result<(), SimError> {
        self.check_order()?;
        for r in &self.requests {
            r.validate(topology)?;
        }
        Ok(())
    }
}

/// Inclusive `[lo, hi]` range, written as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Range<T: Copy> {
    pub lo: T,
    pub hi: T,
}

impl<T: Copy> Range<T> {
    pub const fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub const fn fixed(v: T) -> Self {
        Self { lo: v, hi: v }
    }
}

impl<T: Copy> From<[T; 2]> for Range<T> {
    fn from([lo, hi]: [T; 2]) -> Self {
        Self { lo, hi }
    }
}

impl<T: Copy> From<Range<T>> for [T; 2] {
    fn from(r: Range<T>) -> Self {
        [r.lo, r.hi]
    }
}

/// Parameters of the seeded batch-trace generator. Each request gets a
/// source drawn from `sources` and a target drawn from `targets`; the target
/// is also the traffic destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceGenParams {
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    pub cpu: Range<u64>,
    pub mem: Range<u64>,
    #[serde(default = "zero_range")]
    pub io: Range<u64>,
    #[serde(default = "zero_range")]
    pub bw: Range<u64>,
    pub duration: Range<u64>,
    #[serde(default = "zero_range")]
    pub interarrival: Range<u64>,
    #[serde(default = "unit_fraction")]
    pub usage_fraction: Range<f64>,
    #[serde(default)]
    pub sources: Vec<NodeId>,
    #[serde(default)]
    pub targets: Vec<NodeId>,
}

fn zero_range() -> Range<u64> {
    Range::fixed(0)
}

fn unit_fraction() -> Range<f64> {
    Range::fixed(1.0)
}

impl TraceGenParams {
    fn check(&self) -> Result<(), SimError> {
        let ranges = [
            ("cpu", self.cpu),
            ("mem", self.mem),
            ("io", self.io),
            ("bw", self.bw),
            ("duration", self.duration),
            ("interarrival", self.interarrival),
        ];
        for (field, r) in ranges {
            if r.lo > r.hi {
                return Err(SimError::InvalidRange { field, reason: format!("{} > {}", r.lo, r.hi) });
            }
        }
        if self.duration.lo == 0 {
            return Err(SimError::InvalidRange { field: "duration", reason: "durations must be positive".into() });
        }
        let f = self.usage_fraction;
        if !(0.0 <= f.lo && f.lo <= f.hi && f.hi <= 1.0) {
            return Err(SimError::InvalidRange {
                field: "usage_fraction",
                reason: format!("[{}, {}] is not a sub-range of [0, 1]", f.lo, f.hi),
            });
        }
        if self.count > 0 {
            for (field, list) in [("sources", &self.sources), ("targets", &self.targets)] {
                if list.is_empty() {
                    return Err(SimError::InvalidRange { field, reason: "no candidates".into() });
                }
            }
        }
        Ok(())
    }
}

/// Generates a batch trace; identical parameters give an identical trace.
pub fn generate_batch_trace(params: &TraceGenParams) -> Result<WorkloadTrace, SimError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let width = params.count.to_string().len().max(3);
    let mut arrival = 0u64;
    let mut requests = Vec::with_capacity(params.count);
    for i in 0..params.count {
        let mut draw = |r: Range<u64>| rng.gen_range(r.lo..=r.hi);
        arrival += draw(params.interarrival);
        let cpu = draw(params.cpu);
        let mem = draw(params.mem);
        let io = draw(params.io);
        let bandwidth = draw(params.bw);
        let duration = draw(params.duration);
        let source = params.sources[rng.gen_range(0..params.sources.len())].clone();
        let target = params.targets[rng.gen_range(0..params.targets.len())].clone();
        let f = params.usage_fraction;
        let fraction = if f.lo == f.hi { f.lo } else { rng.gen_range(f.lo..=f.hi) };
        requests.push(Request {
            id: RequestId::new(format!("job-{i:0width$}")),
            arrival_time: arrival,
            source,
            destination: target.clone(),
            target,
            cpu,
            mem,
            io,
            bandwidth,
            duration,
            usage_fraction: (fraction != 1.0).then_some(fraction),
        });
    }
    WorkloadTrace::new(requests)
}

/// Everything besides topology and trace that determines a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub params: SchemeParams,
    pub sla: SlaPolicy,
    pub sample_interval: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Proposed,
            params: SchemeParams::default(),
            sla: SlaPolicy::default(),
            sample_interval: 1,
        }
    }
}

impl SimConfig {
    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Expiry,
    Arrival,
    AdmissionAttempt,
    Sample,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Expiry => "expiry",
            EventKind::Arrival => "arrival",
            EventKind::AdmissionAttempt => "attempt",
            EventKind::Sample => "sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SimEvent {
    time: u64,
    kind: EventKind,
    payload: String,
}

/// One line of the event log: `time,kind,id,detail`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: u64,
    pub kind: EventKind,
    pub id: String,
    pub detail: String,
}

impl fmt::Display for EventRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.time, self.kind.name(), self.id, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub time: u64,
    pub arrival: u64,
    pub decision: AllocationDecision,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub scheme: Scheme,
    pub events: Vec<EventRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub series: UtilizationSeries,
    pub cache: CacheCounters,
    pub final_compute: ComputeState,
    pub final_residuals: ResidualState,
    /// Capacity breaches seen at sample points; empty in a correct run.
    pub conservation_violations: Vec<String>,
}

impl SimResult {
    pub fn admitted(&self) -> usize {
        self.decisions.iter().filter(|d| d.decision.is_admitted()).count()
    }

    pub fn rejected(&self) -> usize {
        self.decisions.len() - self.admitted()
    }
}

fn describe(decision: &AllocationDecision) -> String {
    match decision {
        AllocationDecision::Admitted { lease, cache } => {
            let path: Vec<&str> = lease.path.links.iter().map(|l| l.as_str()).collect();
            let cache = match cache {
                CacheOutcome::Hit => "hit",
                CacheOutcome::Miss => "miss",
                CacheOutcome::StaleRecompute => "stale",
            };
            format!("admitted target={} path={} cache={} until={}", lease.target, path.join(";"), cache, lease.end)
        }
        AllocationDecision::Rejected { reason, .. } => format!("rejected reason={reason}"),
    }
}

/// Runs one scheme over `trace`.
pub fn run(topology: &Topology, trace: &WorkloadTrace, config: &SimConfig) -> Result<SimResult, SimError> {
    if config.sample_interval == 0 {
        return Err(SimError::ZeroSampleInterval);
    }
    config.sla.validate()?;
    config.params.validate()?;
    trace.validate(topology)?;

    let by_id: BTreeMap<&RequestId, &Request> = trace.requests().iter().map(|r| (&r.id, r)).collect();
    let horizon = trace.horizon();
    let mut controller = AdmissionController::new(topology);
    let mut heap: BinaryHeap<Reverse<SimEvent>> = trace
        .requests()
        .iter()
        .map(|r| Reverse(SimEvent { time: r.arrival_time, kind: EventKind::Arrival, payload: r.id.to_string() }))
        .collect();
    heap.push(Reverse(SimEvent { time: 0, kind: EventKind::Sample, payload: String::new() }));

    let mut queue: VecDeque<&Request> = VecDeque::new();
    let mut events = Vec::new();
    let mut decisions = Vec::new();
    let mut series = UtilizationSeries::new(config.scheme);
    let mut conservation_violations = Vec::new();

    while let Some(Reverse(event)) = heap.pop() {
        let now = event.time;
        let mut log = |id: String, detail: String| events.push(EventRecord { time: now, kind: event.kind, id, detail });
        match event.kind {
            EventKind::Expiry => {
                let id = RequestId::new(&event.payload);
                if let Some(lease) = controller.release_lease(&id) {
                    log(event.payload.clone(), format!("released target={}", lease.target));
                }
            }
            EventKind::Arrival => {
                let request = by_id[&RequestId::new(&event.payload)];
                queue.push_back(request);
                log(event.payload.clone(), "enqueued".into());
                heap.push(Reverse(SimEvent { time: now, kind: EventKind::AdmissionAttempt, payload: event.payload }));
            }
            EventKind::AdmissionAttempt => {
                let request = queue.pop_front().ok_or(SimError::SchedulerStall { pending: 0 })?;
                let decision = controller.admit_with(request, &config.sla, now, config.scheme, &config.params)?;
                if let AllocationDecision::Admitted { lease, .. } = &decision {
                    heap.push(Reverse(SimEvent {
                        time: lease.end,
                        kind: EventKind::Expiry,
                        payload: lease.request.to_string(),
                    }));
                }
                log(request.id.to_string(), describe(&decision));
                decisions.push(DecisionRecord { time: now, arrival: request.arrival_time, decision });
            }
            EventKind::Sample => {
                let (shares, usage) = fairshare::host_shares(topology, controller.leases().values());
                let sample = metrics::sample(topology, controller.compute_state(), &shares, &usage, now);
                for v in controller.conservation_violations() {
                    conservation_violations.push(format!("tick {now}: {v}"));
                }
                log(String::new(), format!("cpu={} mem={} overall={}", sample.cpu, sample.mem, sample.overall));
                series.push(sample)?;
                if now < horizon {
                    heap.push(Reverse(SimEvent {
                        time: now + config.sample_interval,
                        kind: EventKind::Sample,
                        payload: String::new(),
                    }));
                }
            }
        }
    }

    if !queue.is_empty() {
        return Err(SimError::SchedulerStall { pending: queue.len() });
    }

    Ok(SimResult {
        scheme: config.scheme,
        events,
        decisions,
        series,
        cache: controller.path_table().counters(),
        final_compute: controller.compute_state().clone(),
        final_residuals: controller.residuals().clone(),
        conservation_violations,
    })
}

/// Runs each scheme independently on identical inputs.
pub fn run_comparison(
    mode: ExecMode,
    topology: &Topology,
    trace: &WorkloadTrace,
    schemes: &[Scheme],
    config: &SimConfig,
) -> Result<BTreeMap<Scheme, SimResult>, SimError> {
    let unique: Vec<Scheme> = schemes.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    exec::map(mode, &unique, |&scheme| run(topology, trace, &config.with_scheme(scheme)))
        .into_iter()
        .map(|r| r.map(|res| (res.scheme, res)))
        .collect()
}

/// Runs many independent (trace, config) jobs on one topology.
pub fn run_many(
    mode: ExecMode,
    topology: &Topology,
    jobs: &[(WorkloadTrace, SimConfig)],
) -> Vec<Result<SimResult, SimError>> {
    exec::map(mode, jobs, |(trace, config)| run(topology, trace, config))
}

pub fn write_event_log(events: &[EventRecord], mut out: impl Write) -> io::Result<()> {
    for e in events {
        writeln!(out, "{e}")?;
    }
    Ok(())
}

/// `time,request,arrival,outcome,target,path,cache,reason` rows.
pub fn write_decisions_csv(decisions: &[DecisionRecord], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "time,request,arrival,outcome,target,path,cache,reason")?;
    for d in decisions {
        match &d.decision {
            AllocationDecision::Admitted { lease, cache } => {
                let path: Vec<&str> = lease.path.links.iter().map(|l| l.as_str()).collect();
                let cache = serde_json::to_value(cache).expect("cache outcome serializes");
                writeln!(
                    out,
                    "{},{},{},admitted,{},{},{},",
                    d.time,
                    lease.request,
                    d.arrival,
                    lease.target,
                    path.join(";"),
                    cache.as_str().unwrap_or_default()
                )?;
            }
            AllocationDecision::Rejected { request, reason } => {
                writeln!(out, "{},{},{},rejected,,,,{}", d.time, request, d.arrival, reason)?;
            }
        }
    }
    Ok(())
}
