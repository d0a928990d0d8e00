use std::collections::BTreeMap;

use topoman::metrics;
use topoman::resources::Resources;
use topoman::sim::{self, generate_batch_trace, Range, TraceGenParams, WorkloadTrace};
use topoman::topo::{LinkDoc, NodeDoc, NodeKind, TopologyDoc};
use topoman::{
    AdmissionController, AllocationDecision, ExecMode, RealisticParams, Rejection, Request, Scheme, SchemeParams,
    SimConfig, SlaPolicy, Topology,
};

fn fabric() -> Topology {
    let sw =
        |id: &str| NodeDoc { id: id.into(), kind: NodeKind::Switch, parent: Some("z".into()), cpu: 0, mem: 0, io: 0 };
    let host = |id: &str, cpu| NodeDoc {
        id: id.into(),
        kind: NodeKind::Server,
        parent: Some("z".into()),
        cpu,
        mem: 12,
        io: 6,
    };
    let link =
        |id: &str, a: &str, b: &str, bw, latency| LinkDoc { id: id.into(), a: a.into(), b: b.into(), bw, latency };
    Topology::from_doc(&TopologyDoc {
        nodes: vec![
            NodeDoc { id: "z".into(), kind: NodeKind::Zone, parent: None, cpu: 0, mem: 0, io: 0 },
            sw("core"),
            sw("tor-a"),
            sw("tor-b"),
            host("h1", 8),
            host("h2", 8),
            host("h3", 16),
        ],
        links: vec![
            link("core-a", "core", "tor-a", 20, 2),
            link("core-b", "core", "tor-b", 20, 2),
            link("a-b", "tor-a", "tor-b", 5, 1),
            link("a-h1", "tor-a", "h1", 10, 1),
            link("a-h2", "tor-a", "h2", 10, 1),
            link("b-h3", "tor-b", "h3", 10, 1),
        ],
        pools: vec![],
    })
    .unwrap()
}

fn params(count: usize, seed: u64) -> TraceGenParams {
    TraceGenParams {
        count,
        seed,
        cpu: Range::new(1, 8),
        mem: Range::new(1, 6),
        io: Range::new(0, 3),
        bw: Range::new(1, 6),
        duration: Range::new(2, 15),
        interarrival: Range::new(0, 3),
        usage_fraction: Range::new(0.25, 1.0),
        sources: vec!["core".into(), "tor-a".into()],
        targets: vec!["h1".into(), "h2".into(), "h3".into()],
    }
}

#[test]
fn causality_and_fifo_over_many_seeds() {
    let topology = fabric();
    for seed in 0..30 {
        let trace = generate_batch_trace(&params(50, seed)).unwrap();
        for scheme in Scheme::ALL {
            let config = SimConfig { scheme, sample_interval: 1 + seed % 3, ..Default::default() };
            let r = sim::run(&topology, &trace, &config).unwrap();
            assert!(r.conservation_violations.is_empty());
            assert_eq!(r.decisions.len(), trace.len());
            for (d, req) in r.decisions.iter().zip(trace.requests()) {
                assert_eq!(d.decision.request(), &req.id, "FIFO order");
                assert!(d.time >= req.arrival_time, "decided before arrival");
                if let AllocationDecision::Admitted { lease, .. } = &d.decision {
                    assert!(lease.end > lease.start && lease.start == d.time);
                }
            }
            let released: BTreeMap<&str, u64> =
                r.events.iter().filter(|e| e.kind == sim::EventKind::Expiry).map(|e| (e.id.as_str(), e.time)).collect();
            for d in &r.decisions {
                if let AllocationDecision::Admitted { lease, .. } = &d.decision {
                    assert_eq!(released.get(lease.request.as_str()), Some(&lease.end));
                }
            }
            assert_eq!(r.final_compute.total(), Resources::ZERO);
        }
    }
}

#[test]
fn schemes_share_one_grid_and_sla_rejections() {
    let topology = fabric();
    let trace = generate_batch_trace(&params(80, 42)).unwrap();
    let config = SimConfig { sla: SlaPolicy { max_cpu_demand: Some(6.0), ..Default::default() }, ..Default::default() };
    let results = sim::run_comparison(ExecMode::default(), &topology, &trace, &Scheme::ALL, &config).unwrap();
    let report = metrics::compare_results(&results).unwrap();
    assert_eq!(report.scheme_means.len(), 3);
    assert!(report.proposed_below_baseline_average.is_some());

    let sla_rejected = |s: Scheme| -> Vec<String> {
        results[&s]
            .decisions
            .iter()
            .filter(|d| matches!(d.decision.rejection(), Some(Rejection::Sla { .. })))
            .map(|d| d.decision.request().to_string())
            .collect()
    };
    let proposed = sla_rejected(Scheme::Proposed);
    assert!(!proposed.is_empty());
    assert_eq!(proposed, sla_rejected(Scheme::Realistic));
    assert_eq!(proposed, sla_rejected(Scheme::CapacityAware));
}

#[test]
fn empty_trace_comparisons_are_identical() {
    let topology = fabric();
    let results = sim::run_comparison(
        ExecMode::Sequential,
        &topology,
        &WorkloadTrace::default(),
        &[Scheme::Realistic, Scheme::CapacityAware],
        &SimConfig::default(),
    )
    .unwrap();
    let mut it = results.values();
    let (a, b) = (it.next().unwrap(), it.next().unwrap());
    assert_eq!(a.series.samples(), b.series.samples());
    assert_eq!(a.events, b.events);
    assert!(a.decisions.is_empty());
}

#[test]
fn strict_theta_rejects_loaded_requests() {
    let topology = fabric();
    let trace = generate_batch_trace(&params(30, 3)).unwrap();
    let config = SimConfig {
        scheme: Scheme::Realistic,
        params: SchemeParams { realistic: RealisticParams { theta: 1.0 }, ..Default::default() },
        ..Default::default()
    };
    let r = sim::run(&topology, &trace, &config).unwrap();
    assert_eq!(r.admitted(), 0);
    assert!(r.series.samples().iter().all(|s| s.overall == 0.0));
}

#[test]
fn parallel_sweep_matches_sequential() {
    let topology = fabric();
    let jobs: Vec<_> =
        (0..8).map(|seed| (generate_batch_trace(&params(40, seed)).unwrap(), SimConfig::default())).collect();
    let seq: Vec<_> = sim::run_many(ExecMode::Sequential, &topology, &jobs).into_iter().map(Result::unwrap).collect();
    let par: Vec<_> = sim::run_many(ExecMode::Parallel, &topology, &jobs).into_iter().map(Result::unwrap).collect();
    assert_eq!(seq, par);
}

#[test]
fn proposed_pipeline_equals_plain_admit() {
    let topology = fabric();
    let trace = generate_batch_trace(&params(40, 8)).unwrap();
    let policy = SlaPolicy { max_path_latency: Some(4), ..Default::default() };
    let mut a = AdmissionController::new(&topology);
    let mut b = AdmissionController::new(&topology);
    for req in trace.requests() {
        let now = req.arrival_time;
        a.expire_leases(now);
        b.expire_leases(now);
        let x = a.admit(req, &policy, now).unwrap();
        let y = b.admit_with(req, &policy, now, Scheme::Proposed, &SchemeParams::default()).unwrap();
        assert_eq!(x, y);
    }
    assert_eq!(a.compute_state(), b.compute_state());
}

#[test]
fn trace_file_round_trip_keeps_simulation() {
    let topology = fabric();
    let trace = generate_batch_trace(&params(20, 5)).unwrap();
    let reloaded = WorkloadTrace::from_json(&trace.to_json().unwrap()).unwrap();
    let config = SimConfig::default();
    assert_eq!(sim::run(&topology, &trace, &config).unwrap(), sim::run(&topology, &reloaded, &config).unwrap());
    let manual = vec![Request::builder("x", "core", "h1", "h1").arrival(1).demand(Resources::new(1, 1, 0)).build()];
    assert_eq!(WorkloadTrace::new(manual).unwrap().horizon(), 2);
}
