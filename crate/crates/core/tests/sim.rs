mod common;

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use gwsim::control::GatewayVariant;
use gwsim::packet::{FiveTuple, PROTO_UDP};
use gwsim::sim::config::{FabricSpec, Locality, Popularity, WorkloadSpec};
use gwsim::sim::metrics::counter_rows;
use gwsim::sim::trace::{read_traces, JsonlSink};
use gwsim::sim::{
    generate_workload, metrics_report, run, run_with_trace, software_core_model, trace_query, ReportFormat, RunMetrics,
    ScenarioConfig, TraceRecord,
};
use gwsim::verdict::PathKind;
use proptest::prelude::*;

fn local_only(variant: GatewayVariant, packets: u64, flows: u32) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(variant, packets, flows);
    c.workload.locality = Locality { local: 1.0, cross_region: 0.0, control: 0.0 };
    c
}

fn traced(cfg: &ScenarioConfig) -> (RunMetrics, Vec<TraceRecord>) {
    let mut sink: Vec<TraceRecord> = Vec::new();
    let m = run_with_trace(cfg, Some(&mut sink)).unwrap();
    (m, sink)
}

fn tuple(sport: u16) -> FiveTuple {
    FiveTuple::new(Ipv4Addr::new(10, 0, 0, 1), Ipv4Addr::new(10, 0, 0, 2), sport, 4789, PROTO_UDP)
}

/// Evenly spaced arrivals of `n` packets at `pps`, cycling over `tuples`.
fn stream(n: u64, pps: u64, tuples: &[FiveTuple]) -> Vec<(u64, FiveTuple)> {
    (0..n).map(|i| ((i as u128 * 1_000_000_000 / pps as u128) as u64, tuples[i as usize % tuples.len()])).collect()
}

#[test]
fn single_flow_repeats_one_tuple() {
    let spec = WorkloadSpec { flows: 1, ..WorkloadSpec::default() };
    let w = generate_workload(&spec, &FabricSpec::default(), 100, 1_000_000, 9).unwrap();
    let tuples: BTreeSet<_> = w.iter().map(|p| p.inner).collect();
    assert_eq!(w.len(), 100);
    assert_eq!(tuples.len(), 1);
}

#[test]
fn zipf_head_carries_most_packets() {
    let spec = WorkloadSpec { flows: 10_000, distribution: Popularity::Zipf(1.0), ..WorkloadSpec::default() };
    let w = generate_workload(&spec, &FabricSpec::default(), 1_000_000, 10_000_000, 1).unwrap();
    let mut counts = w.packets_per_flow();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let top: u64 = counts[..100].iter().sum();
    // Harmonic numbers: H(100) / H(10000) is about 0.53.
    let h = |n: u32| (1..=n).map(|k| 1.0 / f64::from(k)).sum::<f64>();
    let expect = h(100) / h(10_000);
    let got = top as f64 / 1e6;
    assert!(got >= 0.5, "top 1% carried {got}");
    assert!((got - expect).abs() < 0.01, "{got} vs {expect}");
}

#[test]
fn workload_depends_only_on_seed() {
    let spec = WorkloadSpec { flows: 500, ..WorkloadSpec::default() };
    let f = FabricSpec::default();
    let a: Vec<_> = generate_workload(&spec, &f, 5000, 1_000_000, 4).unwrap().iter().collect();
    let b: Vec<_> = generate_workload(&spec, &f, 5000, 1_000_000, 4).unwrap().iter().collect();
    let c: Vec<_> = generate_workload(&spec, &f, 5000, 1_000_000, 5).unwrap().iter().collect();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn workload_rejects_bad_specs() {
    let f = FabricSpec::default();
    let bad = WorkloadSpec { locality: Locality { local: 0.5, cross_region: 0.1, control: 0.1 }, ..Default::default() };
    assert!(generate_workload(&bad, &f, 1_000_000, 1, 1).is_err());
    let few = WorkloadSpec { flows: 10, ..Default::default() };
    assert!(generate_workload(&few, &f, 9, 1, 1).is_err());
}

#[test]
fn software_below_capacity_is_lossless() {
    let tuples: Vec<_> = (0..64).map(tuple).collect();
    // 64 flows over 4 cores at a tenth of one core's rate.
    let r = software_core_model(stream(100_000, 100_000, &tuples), 4, 1_000_000, 64);
    assert_eq!(r.dropped, 0);
    assert_eq!(r.delivered, 100_000);
}

#[test]
fn software_overload_serves_core_rate() {
    // One flow offered at λ = 2.5 Mpps to a core serving μ = 1 Mpps keeps
    // about μ/λ of the packets once the queue is full.
    let n = 1_000_000;
    let r = software_core_model(stream(n, 2_500_000, &[tuple(7)]), 8, 1_000_000, 128);
    let served = r.delivered as f64 / n as f64;
    assert!((served - 0.4).abs() < 0.001, "served {served}");
    let busy: Vec<_> = r.per_core.iter().filter(|c| c.served + c.dropped > 0).collect();
    assert_eq!(busy.len(), 1);
}

#[test]
fn elephant_loss_stays_on_its_core() {
    let elephant = tuple(1);
    let mut s = stream(400_000, 2_000_000, &[elephant]);
    let mice: Vec<_> = (100..400).map(tuple).collect();
    // Mice interleave at 200 kpps.
    s.extend(stream(40_000, 200_000, &mice));
    s.sort_by_key(|(t, _)| *t);
    let r = software_core_model(s.iter().copied(), 16, 1_000_000, 256);
    let hot = gwsim::sim::software::SoftwareCores::new(gwsim::sim::config::SoftwareParams {
        cores: 16,
        per_core_pps: 1_000_000,
        queue_depth: 256,
    })
    .core_for(&elephant);
    for (i, c) in r.per_core.iter().enumerate() {
        if i != hot {
            assert_eq!(c.dropped, 0, "core {i}");
        }
    }
    assert!(r.per_core[hot].dropped > 0);

    let lone = |cores| software_core_model(stream(400_000, 2_000_000, &[elephant]), cores, 1_000_000, 256).loss_ratio();
    assert_eq!(lone(16), lone(32));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn software_loss_grows_with_rate(a in 100_000u64..4_000_000, b in 100_000u64..4_000_000) {
        let (lo, hi) = (a.min(b), a.max(b));
        let tuples: Vec<_> = (0..8).map(tuple).collect();
        let loss = |pps| software_core_model(stream(20_000, pps, &tuples), 2, 500_000, 32).loss_ratio();
        prop_assert!(loss(hi) + 2.0 / 20_000.0 >= loss(lo));
    }
}

#[test]
fn metrics_json_roundtrip_and_csv_rows() {
    let m = run(&ScenarioConfig::load(common::scenario_path("mixed_traffic.toml")).unwrap()).unwrap();
    let mut json = Vec::new();
    metrics_report(&m, ReportFormat::Json, &mut json).unwrap();
    let back: RunMetrics = serde_json::from_slice(&json).unwrap();
    assert_eq!(back, m);

    let mut csv_out = Vec::new();
    metrics_report(&m, ReportFormat::Csv, &mut csv_out).unwrap();
    let mut r = csv::Reader::from_reader(csv_out.as_slice());
    let records: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(r.headers().unwrap(), vec!["section", "name", "value"]);
    assert_eq!(records.len(), counter_rows(&m).len() + 25);
    let hist: u64 = records.iter().filter(|x| &x[0] == "histogram").map(|x| x[2].parse::<u64>().unwrap()).sum();
    assert_eq!(hist, m.latency.all.count);
    let edges: Vec<String> = records.iter().filter(|x| &x[0] == "histogram").map(|x| x[1].to_string()).collect();
    let expect: Vec<String> = (0..24).map(|i| (1000u64 << i).to_string()).chain([u64::MAX.to_string()]).collect();
    assert_eq!(edges, expect);
}

#[test]
fn empty_run_is_all_zero() {
    let m = run(&ScenarioConfig::new(GatewayVariant::AsicDpu, 0, 10)).unwrap();
    assert_eq!((m.injected, m.delivered, m.dropped, m.punted), (0, 0, 0, 0));
    assert_eq!(m.offload_ratio, 0.0);
    assert_eq!(m.loss_ratio, 0.0);
    assert_eq!(m.latency.all.count, 0);
    assert!(m.latency.histogram.iter().all(|b| b.count == 0));
}

#[test]
fn runs_are_byte_identical() {
    let cfg = ScenarioConfig::load(common::scenario_path("mixed_traffic.toml")).unwrap();
    let once = || {
        let mut sink = JsonlSink::new(Vec::new());
        let m = run_with_trace(&cfg, Some(&mut sink)).unwrap();
        let mut out = Vec::new();
        metrics_report(&m, ReportFormat::Json, &mut out).unwrap();
        (out, sink.finish().unwrap())
    };
    let (m1, t1) = once();
    let (m2, t2) = once();
    assert_eq!(m1, m2);
    assert_eq!(t1, t2);
    let parsed = read_traces(t1.as_slice()).unwrap();
    assert_eq!(parsed.len() as u64, cfg.packet_count);
}

#[test]
fn first_packet_installs_second_hits() {
    let (m, t) = traced(&local_only(GatewayVariant::AsicDpu, 2, 1));
    assert_eq!(m.paths.slow_path, 1);
    assert_eq!(m.paths.fast_hit, 1);
    let first = trace_query(&t, 0).unwrap();
    let second = trace_query(&t, 1).unwrap();
    assert!(first.has_stage("slow_path") && first.has_action("install"));
    assert!(second.has_action("cache_hit") && !second.has_stage("slow_path"));
    for r in [first, second] {
        let order: Vec<&str> = r.hops.iter().map(|h| h.stage.as_str()).collect();
        assert_eq!(order.first(), Some(&"pre_dpu"));
        assert_eq!(order.last(), Some(&"post_dpu"));
        assert!(r.hops[1..r.hops.len() - 1].iter().all(|h| h.component.starts_with("dpu")));
    }
    assert!(trace_query(&t, 2).is_err());
}

#[test]
fn trace_timestamps_and_paths() {
    let cfg = ScenarioConfig::load(common::scenario_path("mixed_traffic.toml")).unwrap();
    let (m, t) = traced(&cfg);
    let mut seen = [0u64; 5];
    for r in &t {
        assert!(r.hops.windows(2).all(|w| w[0].t_ns <= w[1].t_ns), "{r:?}");
        let p = r.disposition.path;
        seen[PathKind::ALL.iter().position(|k| *k == p).unwrap()] += 1;
        match p {
            PathKind::AsicOnly => assert!(!r.touches("dpu")),
            PathKind::FastHit => assert!(r.has_action("cache_hit") && !r.has_stage("slow_path")),
            PathKind::SlowPath => assert!(r.has_stage("slow_path") && !r.has_action("cache_hit")),
            PathKind::PuntToCpu => assert!(r.touches("cpu") && r.disposition.latency_ns.is_none()),
            PathKind::Drop => {
                let stage = r.disposition.drop_stage.as_deref().unwrap();
                assert!(r.has_stage(stage));
                assert!(r.disposition.drop_reason.is_some());
            }
        }
    }
    for (k, n) in PathKind::ALL.iter().zip(seen) {
        assert_eq!(m.paths.get(*k), n);
    }
    assert!(m.paths.asic_only > 0 && m.paths.fast_hit > 0 && m.paths.slow_path > 0 && m.paths.punt_to_cpu > 0);
}

#[test]
fn oversized_payload_drops_at_ingress() {
    let mut cfg = local_only(GatewayVariant::AsicDpu, 5, 1);
    cfg.workload.payload_len = 4000;
    let (m, t) = traced(&cfg);
    assert_eq!(m.dropped, 5);
    assert!(t.iter().all(|r| r.disposition.drop_stage.as_deref() == Some("ingress")));
}

#[test]
fn every_variant_conserves_packets() {
    for v in [GatewayVariant::SoftwareOnly, GatewayVariant::AsicOnly, GatewayVariant::AsicDpu] {
        let mut cfg = ScenarioConfig::load(common::scenario_path("mixed_traffic.toml")).unwrap();
        cfg.variant = v;
        let m = run(&cfg).unwrap();
        assert!(m.conserved(), "{v:?}");
        assert_eq!(
            m.paths.asic_only + m.paths.fast_hit + m.paths.slow_path + m.paths.punt_to_cpu + m.paths.drop,
            m.injected
        );
    }
}

#[test]
fn latency_orders_by_path() {
    let m = run(&local_only(GatewayVariant::AsicDpu, 10_000, 100)).unwrap();
    let fast = &m.latency.by_path[&PathKind::FastHit];
    let slow = &m.latency.by_path[&PathKind::SlowPath];
    let mut cfg = local_only(GatewayVariant::AsicOnly, 10_000, 100);
    cfg.seed = 1;
    let asic = run(&cfg).unwrap();
    let a = &asic.latency.by_path[&PathKind::AsicOnly];
    assert!(a.mean_ns < fast.mean_ns && fast.mean_ns < slow.mean_ns);
    assert!(fast.p99_ns < slow.p99_ns);
}

#[test]
fn version_event_forces_one_miss_per_flow() {
    let m = run(&ScenarioConfig::load(common::scenario_path("version_update.toml")).unwrap()).unwrap();
    let flows = 2000;
    assert_eq!(m.slow_path_by_reason.values().sum::<u64>(), m.paths.slow_path);
    assert!(m.paths.slow_path >= flows);
    assert_eq!(m.control.version_bumps, 1);
}
