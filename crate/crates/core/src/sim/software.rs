//! Software-only gateway: RSS spreads flows over cores, each core is a
//! FIFO served at a fixed packet rate, and arrivals to a full queue drop.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::config::SoftwareParams;
use crate::hash::flow_hash;
use crate::packet::FiveTuple;

#[derive(Debug, Clone)]
pub struct SoftwareCores {
    service_ps: u64,
    queue_depth: usize,
    /// Departure times (ps) of packets still in each core's system.
    queues: Vec<VecDeque<u64>>,
    dropped: Vec<u64>,
    served: Vec<u64>,
}

impl SoftwareCores {
    pub fn new(p: SoftwareParams) -> Self {
        assert!(p.cores >= 1 && p.per_core_pps > 0 && p.queue_depth > 0);
        SoftwareCores {
            service_ps: 1_000_000_000_000 / p.per_core_pps,
            queue_depth: p.queue_depth as usize,
            queues: vec![VecDeque::new(); p.cores as usize],
            dropped: vec![0; p.cores as usize],
            served: vec![0; p.cores as usize],
        }
    }

    pub fn core_for(&self, t: &FiveTuple) -> usize {
        flow_hash(t) as usize % self.queues.len()
    }

    /// Queue wait plus service time in ns, or `None` if the queue was full.
    pub fn offer(&mut self, arrival_ns: u64, t: &FiveTuple) -> Option<u64> {
        let c = self.core_for(t);
        let now = arrival_ns * 1000;
        let q = &mut self.queues[c];
        while q.front().is_some_and(|d| *d <= now) {
            q.pop_front();
        }
        if q.len() >= self.queue_depth {
            self.dropped[c] += 1;
            return None;
        }
        let start = q.back().map_or(now, |last| (*last).max(now));
        let depart = start + self.service_ps;
        q.push_back(depart);
        self.served[c] += 1;
        Some((depart - now).div_ceil(1000))
    }

    pub fn per_core(&self) -> Vec<CoreStats> {
        self.served.iter().zip(&self.dropped).map(|(s, d)| CoreStats { served: *s, dropped: *d }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoreStats {
    pub served: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoreModelResult {
    pub delivered: u64,
    pub dropped: u64,
    pub latencies_ns: Vec<u64>,
    pub per_core: Vec<CoreStats>,
}

impl CoreModelResult {
    pub fn loss_ratio(&self) -> f64 {
        let total = self.delivered + self.dropped;
        if total == 0 {
            0.0
        } else {
            self.dropped as f64 / total as f64
        }
    }
}

/// Runs a stream of (arrival ns, five-tuple) through the core model.
pub fn software_core_model(
    stream: impl IntoIterator<Item = (u64, FiveTuple)>,
    cores: u32,
    per_core_pps: u64,
    queue_depth: u32,
) -> CoreModelResult {
    let mut m = SoftwareCores::new(SoftwareParams { cores, per_core_pps, queue_depth });
    let mut r = CoreModelResult::default();
    for (t_ns, tuple) in stream {
        match m.offer(t_ns, &tuple) {
            Some(l) => {
                r.delivered += 1;
                r.latencies_ns.push(l);
            }
            None => r.dropped += 1,
        }
    }
    r.per_core = m.per_core();
    r
}
