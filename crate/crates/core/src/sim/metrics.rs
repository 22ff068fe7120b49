//! Run metrics and their JSON / CSV renderings.
//!
//! CSV layout: a `section,name,value` header, then one `counter` row per
//! entry of [`counter_rows`], then [`HISTOGRAM_BUCKETS`] `histogram` rows
//! whose name is the bucket's upper edge in ns. Bucket `i < 24` holds
//! latencies in `(1µs·2^(i-1), 1µs·2^i]` (bucket 0 starts at zero); the
//! last bucket is unbounded and its edge is written as `u64::MAX`.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gateway::PacketOutcome;
use super::software::CoreStats;
use crate::asic::placement::Utilization;
use crate::control::GatewayVariant;
use crate::dpu::{Dpu, MissReason};
use crate::verdict::{DropReason, PathKind};

pub const HISTOGRAM_BUCKETS: usize = 25;

pub fn bucket_edges() -> [u64; HISTOGRAM_BUCKETS] {
    let mut e = [u64::MAX; HISTOGRAM_BUCKETS];
    for (i, edge) in e.iter_mut().take(HISTOGRAM_BUCKETS - 1).enumerate() {
        *edge = 1000 << i;
    }
    e
}

fn bucket_of(latency_ns: u64) -> usize {
    bucket_edges().iter().position(|e| latency_ns <= *e).expect("last edge is unbounded")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub le_ns: u64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLatency {
    pub count: u64,
    pub mean_ns: f64,
    pub p99_ns: u64,
    pub max_ns: u64,
}

impl PathLatency {
    fn from_sorted(s: &[u32]) -> Self {
        if s.is_empty() {
            return PathLatency { count: 0, mean_ns: 0.0, p99_ns: 0, max_ns: 0 };
        }
        let sum: u128 = s.iter().map(|x| u128::from(*x)).sum();
        PathLatency {
            count: s.len() as u64,
            mean_ns: sum as f64 / s.len() as f64,
            p99_ns: u64::from(percentile_sorted(s, 99)),
            max_ns: u64::from(*s.last().unwrap()),
        }
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile_sorted(s: &[u32], pct: u32) -> u32 {
    assert!(!s.is_empty() && pct <= 100);
    let rank = (s.len() as u64 * u64::from(pct)).div_ceil(100).max(1);
    s[rank as usize - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    #[serde(flatten)]
    pub all: PathLatency,
    /// Delivered paths only.
    pub by_path: BTreeMap<PathKind, PathLatency>,
    pub histogram: Vec<HistogramBucket>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathCounts {
    pub asic_only: u64,
    pub fast_hit: u64,
    pub slow_path: u64,
    pub punt_to_cpu: u64,
    pub drop: u64,
}

impl PathCounts {
    pub fn get(&self, p: PathKind) -> u64 {
        match p {
            PathKind::AsicOnly => self.asic_only,
            PathKind::FastHit => self.fast_hit,
            PathKind::SlowPath => self.slow_path,
            PathKind::PuntToCpu => self.punt_to_cpu,
            PathKind::Drop => self.drop,
        }
    }

    fn bump(&mut self, p: PathKind) {
        *match p {
            PathKind::AsicOnly => &mut self.asic_only,
            PathKind::FastHit => &mut self.fast_hit,
            PathKind::SlowPath => &mut self.slow_path,
            PathKind::PuntToCpu => &mut self.punt_to_cpu,
            PathKind::Drop => &mut self.drop,
        } += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpuMetrics {
    pub index: u8,
    pub packets: u64,
    pub hits: u64,
    pub miss_no_entry: u64,
    pub miss_version: u64,
    pub installs: u64,
    pub evictions: u64,
    pub rejected: u64,
    pub occupancy: u64,
    pub overflow_entries: u64,
    pub net_acl_probes: u64,
}

impl DpuMetrics {
    pub fn of(d: &Dpu) -> Self {
        let c = d.counters;
        DpuMetrics {
            index: d.index,
            packets: c.packets,
            hits: c.hits,
            miss_no_entry: c.miss_no_entry,
            miss_version: c.miss_version,
            installs: c.installs,
            evictions: c.evictions,
            rejected: c.rejected,
            occupancy: d.cache.len() as u64,
            overflow_entries: d.cache.overflow_len() as u64,
            net_acl_probes: c.net_acl_probes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlMetrics {
    pub generation: u64,
    pub version_bumps: u64,
    /// Scheduled control operations refused (capacity, duplicates, ...).
    pub rejected_ops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub variant: GatewayVariant,
    pub seed: u64,
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub punted: u64,
    pub dropped_by_reason: BTreeMap<DropReason, u64>,
    pub paths: PathCounts,
    pub slow_path_by_reason: BTreeMap<MissReason, u64>,
    /// (ASIC-only + fast hits) / (ASIC-only + fast hits + slow path).
    pub offload_ratio: f64,
    /// Dropped / injected.
    pub loss_ratio: f64,
    pub latency: LatencySummary,
    pub dpus: Vec<DpuMetrics>,
    pub software_cores: Vec<CoreStats>,
    pub control: ControlMetrics,
    pub placement: Option<Utilization>,
}

impl RunMetrics {
    pub fn conserved(&self) -> bool {
        self.injected == self.delivered + self.dropped + self.punted
    }

    pub fn slow_path_transits(&self) -> u64 {
        self.paths.slow_path
    }
}

/// Accumulates per-packet outcomes.
#[derive(Debug, Clone, Default)]
pub struct MetricsCollector {
    injected: u64,
    delivered: u64,
    dropped: u64,
    punted: u64,
    dropped_by_reason: BTreeMap<DropReason, u64>,
    paths: PathCounts,
    slow_path_by_reason: BTreeMap<MissReason, u64>,
    samples: BTreeMap<PathKind, Vec<u32>>,
    histogram: [u64; HISTOGRAM_BUCKETS],
}

impl MetricsCollector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, o: &PacketOutcome) {
        self.injected += 1;
        self.paths.bump(o.path);
        if let Some(m) = o.miss {
            if o.path == PathKind::SlowPath {
                *self.slow_path_by_reason.entry(m).or_insert(0) += 1;
            }
        }
        match o.path {
            PathKind::Drop => {
                self.dropped += 1;
                let r = o.drop.expect("drop carries a reason");
                *self.dropped_by_reason.entry(r).or_insert(0) += 1;
            }
            PathKind::PuntToCpu => self.punted += 1,
            p => {
                self.delivered += 1;
                let l = o.latency_ns.expect("delivered packets carry latency");
                self.histogram[bucket_of(l)] += 1;
                let l = u32::try_from(l).unwrap_or(u32::MAX);
                self.samples.entry(p).or_default().push(l);
            }
        }
    }

    pub fn finish(
        mut self,
        variant: GatewayVariant,
        seed: u64,
        dpus: &[Dpu],
        software_cores: Vec<CoreStats>,
        control: ControlMetrics,
        placement: Option<Utilization>,
    ) -> RunMetrics {
        let mut all: Vec<u32> = Vec::with_capacity(self.delivered as usize);
        let mut by_path = BTreeMap::new();
        for (p, s) in &mut self.samples {
            s.sort_unstable();
            by_path.insert(*p, PathLatency::from_sorted(s));
            all.extend_from_slice(s);
        }
        all.sort_unstable();
        let edges = bucket_edges();
        let histogram =
            edges.iter().zip(self.histogram).map(|(le_ns, count)| HistogramBucket { le_ns: *le_ns, count }).collect();

        let hw = self.paths.asic_only + self.paths.fast_hit;
        let handled = hw + self.paths.slow_path;
        RunMetrics {
            variant,
            seed,
            injected: self.injected,
            delivered: self.delivered,
            dropped: self.dropped,
            punted: self.punted,
            dropped_by_reason: self.dropped_by_reason,
            paths: self.paths,
            slow_path_by_reason: self.slow_path_by_reason,
            offload_ratio: if handled == 0 { 0.0 } else { hw as f64 / handled as f64 },
            loss_ratio: if self.injected == 0 { 0.0 } else { self.dropped as f64 / self.injected as f64 },
            latency: LatencySummary { all: PathLatency::from_sorted(&all), by_path, histogram },
            dpus: dpus.iter().map(DpuMetrics::of).collect(),
            software_cores,
            control,
            placement,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// From a file extension; anything other than `.csv` is JSON.
    pub fn for_path(p: &Path) -> Self {
        match p.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

/// Counter rows of the CSV rendering, in output order.
pub fn counter_rows(m: &RunMetrics) -> Vec<(String, String)> {
    let mut rows: Vec<(String, String)> = Vec::new();
    let mut push = |k: String, v: String| rows.push((k, v));
    push("injected".into(), m.injected.to_string());
    push("delivered".into(), m.delivered.to_string());
    push("dropped".into(), m.dropped.to_string());
    push("punted".into(), m.punted.to_string());
    for p in PathKind::ALL {
        push(format!("path.{}", p.as_str()), m.paths.get(p).to_string());
    }
    for r in DropReason::ALL {
        push(format!("drop.{}", r.as_str()), m.dropped_by_reason.get(&r).copied().unwrap_or(0).to_string());
    }
    for (r, name) in [(MissReason::NoEntry, "no_entry"), (MissReason::VersionMismatch, "version_mismatch")] {
        push(format!("slow_path.{name}"), m.slow_path_by_reason.get(&r).copied().unwrap_or(0).to_string());
    }
    push("offload_ratio".into(), m.offload_ratio.to_string());
    push("loss_ratio".into(), m.loss_ratio.to_string());
    push("latency.count".into(), m.latency.all.count.to_string());
    push("latency.mean_ns".into(), m.latency.all.mean_ns.to_string());
    push("latency.p99_ns".into(), m.latency.all.p99_ns.to_string());
    push("latency.max_ns".into(), m.latency.all.max_ns.to_string());
    for d in &m.dpus {
        let i = d.index;
        for (k, v) in [
            ("packets", d.packets),
            ("hits", d.hits),
            ("miss_no_entry", d.miss_no_entry),
            ("miss_version", d.miss_version),
            ("installs", d.installs),
            ("evictions", d.evictions),
            ("occupancy", d.occupancy),
        ] {
            push(format!("dpu{i}.{k}"), v.to_string());
        }
    }
    for (i, c) in m.software_cores.iter().enumerate() {
        push(format!("core{i}.served"), c.served.to_string());
        push(format!("core{i}.dropped"), c.dropped.to_string());
    }
    push("control.generation".into(), m.control.generation.to_string());
    push("control.version_bumps".into(), m.control.version_bumps.to_string());
    push("control.rejected_ops".into(), m.control.rejected_ops.to_string());
    rows
}

pub fn metrics_report(m: &RunMetrics, format: ReportFormat, out: &mut dyn Write) -> io::Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, m)?;
            out.write_all(b"\n")
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["section", "name", "value"])?;
            for (k, v) in counter_rows(m) {
                w.write_record(["counter", k.as_str(), v.as_str()])?;
            }
            for b in &m.latency.histogram {
                w.write_record(["histogram".to_string(), b.le_ns.to_string(), b.count.to_string()])?;
            }
            w.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_double() {
        let e = bucket_edges();
        assert_eq!(e[0], 1000);
        assert_eq!(e[3], 8000);
        assert_eq!(e[HISTOGRAM_BUCKETS - 1], u64::MAX);
        assert_eq!(bucket_of(0), 0);
        assert_eq!(bucket_of(1000), 0);
        assert_eq!(bucket_of(1001), 1);
        assert_eq!(bucket_of(10_000), 4);
        assert_eq!(bucket_of(u64::MAX), HISTOGRAM_BUCKETS - 1);
    }

    #[test]
    fn nearest_rank() {
        let s: Vec<u32> = (1..=100).collect();
        assert_eq!(percentile_sorted(&s, 99), 99);
        assert_eq!(percentile_sorted(&s, 100), 100);
        assert_eq!(percentile_sorted(&[7], 99), 7);
    }

    #[test]
    fn empty_run_is_zero() {
        let m =
            MetricsCollector::new().finish(GatewayVariant::AsicDpu, 0, &[], vec![], ControlMetrics::default(), None);
        assert!(m.conserved());
        assert_eq!((m.injected, m.offload_ratio, m.loss_ratio), (0, 0.0, 0.0));
        assert!(m.latency.histogram.iter().all(|b| b.count == 0));
    }
}
