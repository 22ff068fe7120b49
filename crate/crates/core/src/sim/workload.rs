//! Deterministic packet streams.
//!
//! Packet counts per flow are apportioned from the popularity weights
//! rather than sampled: every flow gets one packet, the rest is split in
//! proportion to the weights by largest remainder. The per-packet flow
//! order is then shuffled with the run's seed.

use std::collections::HashSet;
use std::net::Ipv4Addr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{FabricSpec, Popularity, WorkloadSpec};
use super::fabric::{bgp_peer_ip, tenant_vni, vm_ip, vtep_ip, CROSS_REGION, GATEWAY_IP};
use crate::packet::{FiveTuple, PacketDescriptor, VxlanEncap, PROTO_TCP, PROTO_UDP};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid workload: {0}")]
pub struct InvalidSpec(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowClass {
    Local,
    CrossRegion,
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: u32,
    pub class: FlowClass,
    pub tenant: u16,
    pub outer_src: Ipv4Addr,
    pub encap: Option<VxlanEncap>,
    pub tuple: FiveTuple,
}

#[derive(Debug, Clone)]
pub struct Workload {
    /// Indexed by flow id; id 0 is the most popular.
    pub flows: Vec<FlowSpec>,
    order: Vec<u32>,
    rate_pps: u64,
    payload_len: u32,
}

impl Workload {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn flow_of(&self, i: usize) -> &FlowSpec {
        &self.flows[self.order[i] as usize]
    }

    /// Arrival time of packet `i`; arrivals are evenly spaced.
    pub fn arrival_ns(&self, i: usize) -> u64 {
        (i as u128 * 1_000_000_000 / u128::from(self.rate_pps)) as u64
    }

    /// Packet `i` of the stream, without a trace id.
    pub fn packet(&self, i: usize) -> PacketDescriptor {
        let f = self.flow_of(i);
        let (outer_src_ip, outer_dst_ip) = match f.class {
            FlowClass::Control => (f.tuple.src_ip, f.tuple.dst_ip),
            _ => (f.outer_src, GATEWAY_IP),
        };
        PacketDescriptor {
            outer_src_ip,
            outer_dst_ip,
            encap: f.encap,
            inner: f.tuple,
            payload_len: self.payload_len,
            trace_id: None,
            arrival_ns: self.arrival_ns(i),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = PacketDescriptor> + '_ {
        (0..self.len()).map(|i| self.packet(i))
    }

    pub fn packets_per_flow(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.flows.len()];
        for f in &self.order {
            counts[*f as usize] += 1;
        }
        counts
    }
}

fn weights(p: Popularity, n: usize) -> Vec<f64> {
    match p {
        Popularity::Uniform => vec![1.0; n],
        Popularity::Zipf(s) => (1..=n).map(|k| (k as f64).powf(-s)).collect(),
    }
}

/// Splits `total` over `weights`, at least one each when `total` allows.
pub fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let n = weights.len() as u64;
    if n == 0 {
        return Vec::new();
    }
    let base = u64::from(total >= n);
    let rest = total - base * n;
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| rest as f64 * w / sum).collect();
    let mut counts: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let mut left = rest - counts.iter().sum::<u64>();
    let mut by_frac: Vec<usize> = (0..weights.len()).collect();
    by_frac.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in by_frac.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts.iter().map(|c| c + base).collect()
}

fn draw_flow(
    id: u32,
    spec: &WorkloadSpec,
    fabric: &FabricSpec,
    tenants: &Option<WeightedIndex<f64>>,
    rng: &mut ChaCha8Rng,
) -> FlowSpec {
    let tenant = match tenants {
        Some(w) => w.sample(rng) as u16,
        None => rng.random_range(0..fabric.tenants),
    };
    let u: f64 = rng.random();
    let l = spec.locality;
    let class = if u < l.local {
        FlowClass::Local
    } else if u < l.local + l.cross_region {
        FlowClass::CrossRegion
    } else {
        FlowClass::Control
    };
    let sport = rng.random_range(1024..=u16::MAX);
    if class == FlowClass::Control {
        let peer = bgp_peer_ip(rng.random_range(0..8));
        return FlowSpec {
            id,
            class,
            tenant,
            outer_src: peer,
            encap: None,
            tuple: FiveTuple::new(peer, GATEWAY_IP, sport, 179, PROTO_TCP),
        };
    }
    let src = rng.random_range(0..fabric.vms_per_tenant);
    let dst_ip = match class {
        FlowClass::Local => {
            let mut dst = rng.random_range(0..fabric.vms_per_tenant - 1);
            if dst >= src {
                dst += 1;
            }
            vm_ip(dst)
        }
        _ => Ipv4Addr::from(CROSS_REGION.bits() + rng.random_range(0..1u32 << 20)),
    };
    let proto = if rng.random_bool(0.5) { PROTO_TCP } else { PROTO_UDP };
    let dport = rng.random_range(1..=u16::MAX);
    FlowSpec {
        id,
        class,
        tenant,
        outer_src: vtep_ip(rng.random_range(0..fabric.vteps)),
        encap: Some(VxlanEncap { vni: tenant_vni(tenant) }),
        tuple: FiveTuple::new(vm_ip(src), dst_ip, sport, dport, proto),
    }
}

pub fn generate_workload(
    spec: &WorkloadSpec,
    fabric: &FabricSpec,
    packet_count: u64,
    rate_pps: u64,
    seed: u64,
) -> Result<Workload, InvalidSpec> {
    let l = spec.locality;
    if (l.local + l.cross_region + l.control - 1.0).abs() > 1e-9 {
        return Err(InvalidSpec("locality fractions must sum to 1".into()));
    }
    if spec.flows == 0 || rate_pps == 0 || fabric.tenants == 0 || fabric.vms_per_tenant < 2 {
        return Err(InvalidSpec("flows, rate, tenants must be positive and vms_per_tenant at least 2".into()));
    }
    if packet_count > 0 && packet_count < u64::from(spec.flows) {
        return Err(InvalidSpec("fewer packets than flows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tenants = match spec.tenant_distribution {
        Popularity::Uniform => None,
        p => Some(WeightedIndex::new(weights(p, usize::from(fabric.tenants))).map_err(|e| InvalidSpec(e.to_string()))?),
    };

    let mut seen = HashSet::with_capacity(spec.flows as usize);
    let mut flows = Vec::with_capacity(spec.flows as usize);
    while flows.len() < spec.flows as usize {
        let f = draw_flow(flows.len() as u32, spec, fabric, &tenants, &mut rng);
        if seen.insert((f.encap, f.tuple)) {
            flows.push(f);
        }
    }

    let counts = if packet_count == 0 {
        vec![0; flows.len()]
    } else {
        apportion(packet_count, &weights(spec.distribution, flows.len()))
    };
    let mut order = Vec::with_capacity(packet_count as usize);
    for (id, c) in counts.iter().enumerate() {
        order.extend(std::iter::repeat_n(id as u32, *c as usize));
    }
    order.shuffle(&mut rng);
    Ok(Workload { flows, order, rate_pps, payload_len: spec.payload_len })
}
