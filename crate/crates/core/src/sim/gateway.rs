//! Per-packet execution across ASIC, DPUs and the software baseline, and
//! the event loop that drives a scenario.

use std::collections::BTreeMap;

use super::config::{ConfigError, EventAction, LatencyParams, ScenarioConfig, SoftwareParams};
use super::fabric::fabric_rules;
use super::metrics::{ControlMetrics, MetricsCollector, RunMetrics};
use super::software::SoftwareCores;
use super::trace::{Disposition, Hop, TraceRecord, TraceSink};
use super::workload::{generate_workload, Workload};
use crate::asic::placement::{compute_utilization, place_tables, PlacementError, Utilization};
use crate::asic::{DistributionMode, EgressAction, PathDecision, DPU_COUNT};
use crate::control::{CapacityProfile, ControlPlane, GatewayVariant};
use crate::dpu::{Dpu, DpuOutcome, InstallOutcome, MissReason};
use crate::packet::{
    assign_trace_id, parse_metadata_traced, serialize_metadata, InternalMetadata, PacketDescriptor, PathFlags, TraceId,
    TraceIdSource,
};
use crate::sim::config::PlacementSpec;
use crate::verdict::{DropReason, PathKind};

const DPU_NAMES: [&str; DPU_COUNT as usize] = ["dpu0", "dpu1", "dpu2", "dpu3"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketOutcome {
    pub trace_id: TraceId,
    pub path: PathKind,
    /// Set for delivered packets.
    pub latency_ns: Option<u64>,
    pub drop: Option<DropReason>,
    pub dpu: Option<u8>,
    /// Why a DPU packet left the fast path.
    pub miss: Option<MissReason>,
    pub egress: Option<EgressAction>,
    pub metadata: InternalMetadata,
}

struct Tracer {
    hops: Option<Vec<Hop>>,
}

impl Tracer {
    fn hop(&mut self, component: &str, stage: &str, action: &str, t_ns: u64) {
        if let Some(h) = &mut self.hops {
            h.push(Hop { component: component.into(), stage: stage.into(), action: action.into(), t_ns });
        }
    }
}

/// One gateway instance: control plane, dataplane tables and the mutable
/// per-DPU and per-core state.
#[derive(Debug, Clone)]
pub struct Gateway {
    pub control: ControlPlane,
    pub dpus: Vec<Dpu>,
    software: Option<SoftwareCores>,
    latency: LatencyParams,
    mtu: u32,
}

impl Gateway {
    pub fn new(
        variant: GatewayVariant,
        profile: CapacityProfile,
        latency: LatencyParams,
        software: SoftwareParams,
        cache_capacity: usize,
        mtu: u32,
    ) -> Self {
        let dpus = match variant {
            GatewayVariant::AsicDpu => (0..DPU_COUNT).map(|i| Dpu::new(i, cache_capacity)).collect(),
            _ => Vec::new(),
        };
        let software = (variant == GatewayVariant::SoftwareOnly).then(|| SoftwareCores::new(software));
        Gateway { control: ControlPlane::new(variant, profile), dpus, software, latency, mtu }
    }

    /// Builds the gateway and installs services, fabric rules and the
    /// scenario's extra rules.
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        let mut g = Gateway::new(
            cfg.variant,
            cfg.capacity_profile(),
            cfg.latency,
            cfg.software,
            cfg.dpu.cache_capacity,
            cfg.mtu,
        );
        for s in cfg.effective_services() {
            g.control.register_service(s).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        for (i, r) in fabric_rules(&cfg.fabric).into_iter().chain(cfg.rules.iter().cloned()).enumerate() {
            let kind = r.kind();
            g.control.install_rule(r).map_err(|e| ConfigError::Invalid(format!("rule {i} ({kind}): {e}")))?;
        }
        g.control.commit();
        Ok(g)
    }

    pub fn variant(&self) -> GatewayVariant {
        self.control.dataplane().variant
    }

    pub fn software_cores(&self) -> Option<&SoftwareCores> {
        self.software.as_ref()
    }

    /// Processes one packet. Hops are collected only when `trace` is set.
    pub fn process(&mut self, p: &PacketDescriptor, trace: bool) -> (PacketOutcome, Option<Vec<Hop>>) {
        let mut tr = Tracer { hops: trace.then(Vec::new) };
        let o = match self.variant() {
            GatewayVariant::SoftwareOnly => self.process_software(p, &mut tr),
            _ => self.process_hardware(p, &mut tr),
        };
        (o, tr.hops)
    }

    fn outcome(p: &PacketDescriptor, path: PathKind, m: InternalMetadata) -> PacketOutcome {
        PacketOutcome {
            trace_id: p.trace_id.unwrap_or(0),
            path,
            latency_ns: None,
            drop: None,
            dpu: None,
            miss: None,
            egress: None,
            metadata: m,
        }
    }

    fn dropped(p: &PacketDescriptor, m: InternalMetadata, r: DropReason) -> PacketOutcome {
        PacketOutcome { drop: Some(r), ..Self::outcome(p, PathKind::Drop, m) }
    }

    fn process_hardware(&mut self, p: &PacketDescriptor, tr: &mut Tracer) -> PacketOutcome {
        let t0 = p.arrival_ns;
        let half = self.latency.asic_ns / 2;
        if p.check_mtu(self.mtu).is_err() {
            tr.hop("asic", "ingress", "drop", t0);
            return Self::dropped(p, InternalMetadata::default(), DropReason::PayloadTooLarge);
        }
        let dp = self.control.dataplane();
        let (mut m, decision) = dp.asic.pre_dpu_process(p, &dp.services, &dp.mode);
        let d = match decision {
            PathDecision::PuntToCpu => {
                tr.hop("asic", "divert", "punt_to_cpu", t0);
                tr.hop("cpu", "control", "receive", t0 + half);
                return Self::outcome(p, PathKind::PuntToCpu, m);
            }
            PathDecision::Drop(r) => {
                tr.hop("asic", r.stage(), "drop", t0);
                return Self::dropped(p, m, r);
            }
            PathDecision::AsicOnly => {
                tr.hop("asic", "pre_dpu", "asic_only", t0);
                return self.egress(p, m, PathKind::AsicOnly, t0 + half, self.latency.asic_ns, tr);
            }
            PathDecision::ToDpu(d) => d,
        };
        tr.hop("asic", "pre_dpu", "to_dpu", t0);
        debug_assert!(m.path_flags.contains(PathFlags::TO_DPU));
        // The metadata crosses to the DPU as its 16-byte header.
        m = parse_metadata_traced(&serialize_metadata(&m), m.trace_id).expect("well-formed header");

        let name = DPU_NAMES[usize::from(d)];
        let t1 = t0 + half;
        let t2 = t1 + self.latency.dpu_fast_ns;
        let dp = self.control.dataplane();
        let outcome = self.dpus[usize::from(d)].process(p, &mut m, &dp.services, &dp.slow);
        let mut o = match outcome {
            DpuOutcome::Hit(_) => {
                tr.hop(name, "fast_path", "cache_hit", t1);
                self.egress(p, m, PathKind::FastHit, t2, self.latency.asic_ns + self.latency.dpu_fast_ns, tr)
            }
            DpuOutcome::SlowPath { miss, install, .. } => {
                tr.hop(name, "fast_path", miss_action(miss), t1);
                tr.hop(name, "slow_path", "forward", t2);
                let t3 = t2 + self.latency.slow_path_ns;
                let act = match install {
                    InstallOutcome::Installed => "install",
                    InstallOutcome::EvictedAndInstalled(_) => "evict_and_install",
                    InstallOutcome::Rejected => "install_rejected",
                };
                tr.hop(name, "offload", act, t3);
                let total = self.latency.asic_ns + self.latency.dpu_fast_ns + self.latency.slow_path_ns;
                let mut o = self.egress(p, m, PathKind::SlowPath, t3, total, tr);
                o.miss = Some(miss);
                o
            }
            DpuOutcome::Dropped { miss, error } => {
                let r = error.drop_reason();
                match miss {
                    Some(mr) => {
                        tr.hop(name, "fast_path", miss_action(mr), t1);
                        tr.hop(name, r.stage(), "drop", t2);
                    }
                    None => tr.hop(name, r.stage(), "drop", t1),
                }
                let mut o = Self::dropped(p, m, r);
                o.miss = miss;
                o
            }
        };
        o.dpu = Some(d);
        o
    }

    fn egress(
        &self,
        p: &PacketDescriptor,
        m: InternalMetadata,
        path: PathKind,
        t_ns: u64,
        latency_ns: u64,
        tr: &mut Tracer,
    ) -> PacketOutcome {
        match self.control.dataplane().asic.post_dpu_process(&m) {
            Ok(e) => {
                tr.hop("asic", "post_dpu", "egress", t_ns);
                PacketOutcome { latency_ns: Some(latency_ns), egress: Some(e), ..Self::outcome(p, path, m) }
            }
            Err(e) => {
                let r = e.drop_reason();
                tr.hop("asic", r.stage(), "drop", t_ns);
                Self::dropped(p, m, r)
            }
        }
    }

    fn process_software(&mut self, p: &PacketDescriptor, tr: &mut Tracer) -> PacketOutcome {
        let t0 = p.arrival_ns;
        if p.check_mtu(self.mtu).is_err() {
            tr.hop("software", "ingress", "drop", t0);
            return Self::dropped(p, InternalMetadata::default(), DropReason::PayloadTooLarge);
        }
        let cores = self.software.as_mut().expect("software variant has cores");
        let Some(latency) = cores.offer(t0, &p.inner) else {
            tr.hop("software", "rx_queue", "drop", t0);
            return Self::dropped(p, InternalMetadata::default(), DropReason::QueueOverflow);
        };
        tr.hop("software", "rx_queue", "enqueue", t0);
        let dp = self.control.dataplane();
        let (m, decision) = dp.asic.pre_dpu_process(p, &dp.services, &dp.mode);
        let done = t0 + latency;
        match decision {
            PathDecision::PuntToCpu => {
                tr.hop("software", "control", "receive", done);
                Self::outcome(p, PathKind::PuntToCpu, m)
            }
            PathDecision::Drop(r) => {
                tr.hop("software", r.stage(), "drop", done);
                Self::dropped(p, m, r)
            }
            PathDecision::AsicOnly => match dp.asic.post_dpu_process(&m) {
                Ok(e) => {
                    tr.hop("software", "forward", "egress", done);
                    PacketOutcome {
                        latency_ns: Some(latency),
                        egress: Some(e),
                        ..Self::outcome(p, PathKind::SlowPath, m)
                    }
                }
                Err(e) => {
                    let r = e.drop_reason();
                    tr.hop("software", r.stage(), "drop", done);
                    Self::dropped(p, m, r)
                }
            },
            PathDecision::ToDpu(_) => unreachable!("software tables resolve local VMs inline"),
        }
    }
}

fn miss_action(m: MissReason) -> &'static str {
    match m {
        MissReason::NoEntry => "miss_no_entry",
        MissReason::VersionMismatch => "version_mismatch",
    }
}

pub fn trace_record(o: &PacketOutcome, hops: Vec<Hop>) -> TraceRecord {
    TraceRecord {
        trace_id: o.trace_id,
        hops,
        disposition: Disposition {
            path: o.path,
            latency_ns: o.latency_ns,
            drop_reason: o.drop,
            drop_stage: o.drop.map(|r| r.stage().to_string()),
        },
    }
}

pub fn placement_report(spec: &PlacementSpec) -> Result<Utilization, PlacementError> {
    let budgets = spec.stage_budgets();
    let plan = place_tables(&spec.tables, &budgets, &spec.geometry)?;
    Ok(compute_utilization(&plan, &spec.tables, &budgets))
}

fn apply_event(g: &mut Gateway, w: &Workload, action: &EventAction, c: &mut ControlMetrics) {
    let cp = &mut g.control;
    match action {
        EventAction::BumpVersion { svc_id, rules } => match cp.bump_version_with(*svc_id, rules.clone()) {
            Ok(_) => c.version_bumps += 1,
            Err(_) => c.rejected_ops += 1,
        },
        EventAction::SetDistribution { pins } => {
            let mode = if pins.is_empty() {
                DistributionMode::Hash
            } else {
                DistributionMode::Pinned(
                    pins.iter().map(|p| (w.flows[p.flow as usize].tuple, p.dpu)).collect::<BTreeMap<_, _>>(),
                )
            };
            if cp.set_distribution_mode(mode).is_err() {
                c.rejected_ops += 1;
            }
        }
        EventAction::InstallRules { rules } => {
            for r in rules {
                if cp.install_rule(r.clone()).is_err() {
                    c.rejected_ops += 1;
                }
            }
        }
    }
}

/// Runs a scenario without tracing.
pub fn run(cfg: &ScenarioConfig) -> Result<RunMetrics, ConfigError> {
    run_with_trace(cfg, None)
}

/// Runs a scenario, emitting one trace record per packet to `sink`.
///
/// All validation happens before the first packet; afterwards the run
/// always completes and refused control operations are only counted.
pub fn run_with_trace(cfg: &ScenarioConfig, mut sink: Option<&mut dyn TraceSink>) -> Result<RunMetrics, ConfigError> {
    cfg.validate()?;
    let workload = generate_workload(&cfg.workload, &cfg.fabric, cfg.packet_count, cfg.send_rate_pps, cfg.seed)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let placement = match &cfg.placement {
        Some(p) => Some(placement_report(p).map_err(|e| ConfigError::Invalid(e.to_string()))?),
        None => None,
    };
    let mut g = Gateway::from_config(cfg)?;

    let mut events: Vec<_> = cfg.events.iter().collect();
    events.sort_by_key(|e| e.at_packet);
    let mut next_event = 0;
    let mut control = ControlMetrics::default();
    let mut ids = TraceIdSource::new();
    let mut metrics = MetricsCollector::new();
    let tracing = sink.is_some();

    for i in 0..workload.len() {
        if events.get(next_event).is_some_and(|e| e.at_packet <= i as u64) {
            while let Some(e) = events.get(next_event).filter(|e| e.at_packet <= i as u64) {
                apply_event(&mut g, &workload, &e.action, &mut control);
                next_event += 1;
            }
            g.control.commit();
        }
        let p = assign_trace_id(workload.packet(i), &mut ids);
        let (o, hops) = g.process(&p, tracing);
        metrics.observe(&o);
        if let (Some(s), Some(h)) = (sink.as_deref_mut(), hops) {
            s.record(trace_record(&o, h));
        }
    }
    for e in &events[next_event..] {
        apply_event(&mut g, &workload, &e.action, &mut control);
    }
    g.control.commit();
    control.generation = g.control.dataplane().generation;

    let cores = g.software_cores().map(|s| s.per_core()).unwrap_or_default();
    Ok(metrics.finish(cfg.variant, cfg.seed, &g.dpus, cores, control, placement))
}
