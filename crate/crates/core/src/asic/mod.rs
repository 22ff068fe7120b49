//! Folded four-pipeline switching ASIC: the pre-DPU lookup chain, control
//! traffic diversion, DPU fan-out, post-DPU nexthop resolution and the table
//! placement model.
//!
//! Lookup order for tenant traffic:
//!
//! ```text
//! classify -> tenant (VNI -> route table) -> policy route (inner src LPM)
//!          -> route (inner dst LPM) -> ECMP -> nexthop
//! ```
//!
//! Control packets are diverted to the CPU at ingress pipe 3.

pub mod placement;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ServiceRegistry;
use crate::dpu::tables::{vm_nc_lookup, HostNexthops, VmNcTable};
use crate::hash::flow_hash;
use crate::packet::{FiveTuple, InternalMetadata, NexthopIndex, PacketDescriptor, PathFlags, RouteTableId, Vni};
use crate::prefix::{Ipv4Prefix, PrefixTrie};
use crate::verdict::DropReason;

pub const PIPELINES: u8 = 4;
pub const STAGES_PER_PIPELINE: u8 = 12;
pub const DPU_COUNT: u8 = 4;

/// Aggregate bandwidth of the four independent pipelines.
pub const UNFOLDED_TBPS: f64 = 6.4;
pub const DPU_GBPS: f64 = 400.0;

/// Folding chains the pipelines serially, so every packet crosses all four
/// and the external bandwidth drops by the same factor.
pub fn folded_throughput_tbps() -> f64 {
    UNFOLDED_TBPS / f64::from(PIPELINES)
}

pub fn dpu_aggregate_tbps() -> f64 {
    f64::from(DPU_COUNT) * DPU_GBPS / 1000.0
}

/// Pipe where control packets leave for the CPU.
pub const PUNT_PIPE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficClass {
    TenantVxlan,
    ControlProtocol,
    Unknown,
}

/// Matches the header of unencapsulated packets. Unset fields match anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolRule {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proto: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_port: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst_port: Option<u16>,
}

impl ProtocolRule {
    pub fn bgp() -> Vec<ProtocolRule> {
        vec![
            ProtocolRule { name: "bgp".into(), proto: Some(6), src_port: None, dst_port: Some(179) },
            ProtocolRule { name: "bgp-reply".into(), proto: Some(6), src_port: Some(179), dst_port: None },
        ]
    }

    fn matches(&self, t: &FiveTuple) -> bool {
        self.proto.is_none_or(|p| p == t.proto)
            && self.src_port.is_none_or(|p| p == t.src_port)
            && self.dst_port.is_none_or(|p| p == t.dst_port)
    }
}

pub fn classify_traffic(p: &PacketDescriptor, vteps: &BTreeSet<Ipv4Addr>, rules: &[ProtocolRule]) -> TrafficClass {
    match p.encap {
        Some(_) if vteps.contains(&p.outer_src_ip) => TrafficClass::TenantVxlan,
        Some(_) => TrafficClass::Unknown,
        None if rules.iter().any(|r| r.matches(&p.inner)) => TrafficClass::ControlProtocol,
        None => TrafficClass::Unknown,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divert {
    PuntToCpu,
    Continue,
    Drop(DropReason),
}

pub fn divert_control(class: TrafficClass) -> Divert {
    match class {
        TrafficClass::ControlProtocol => Divert::PuntToCpu,
        TrafficClass::TenantVxlan => Divert::Continue,
        TrafficClass::Unknown => Divert::Drop(DropReason::NoClassification),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("no tenant bound to VNI {0}")]
    TenantMiss(Vni),
    #[error("no route")]
    RouteMiss,
    #[error("no nexthop {0:?}")]
    NexthopMiss(NexthopIndex),
    #[error("no ECMP group {0}")]
    EcmpGroupMiss(u32),
}

impl LookupError {
    pub fn drop_reason(self) -> DropReason {
        match self {
            LookupError::TenantMiss(_) => DropReason::TenantMiss,
            LookupError::RouteMiss => DropReason::RouteMiss,
            LookupError::NexthopMiss(_) => DropReason::NexthopMiss,
            LookupError::EcmpGroupMiss(_) => DropReason::EcmpGroupMiss,
        }
    }
}

/// A routing instance within a tenant's policy routing context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoutingInstanceId {
    pub table: RouteTableId,
    pub instance: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteTarget {
    Nexthop(NexthopIndex),
    Ecmp(u32),
    /// Destination is a VM behind this gateway; resolved through VM-NC.
    LocalVm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteEntry {
    pub prefix: Ipv4Prefix,
    pub target: RouteTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcmpGroup {
    pub group_id: u32,
    pub members: Vec<NexthopIndex>,
}

pub fn ecmp_select(group: &EcmpGroup, t: &FiveTuple) -> NexthopIndex {
    assert!(!group.members.is_empty(), "empty ECMP group {}", group.group_id);
    group.members[flow_hash(t) as usize % group.members.len()]
}

/// Outer header rewrite applied on egress. A missing VNI keeps the
/// packet's own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncapAction {
    pub outer_dst_ip: Ipv4Addr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vni: Option<Vni>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NexthopEntry {
    pub index: NexthopIndex,
    pub out_port: u16,
    pub encap: EncapAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EgressAction {
    pub nexthop: NexthopIndex,
    pub out_port: u16,
    pub encap: EncapAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum DistributionMode {
    #[default]
    Hash,
    /// Flows in the map go to the named DPU, the rest are hashed.
    Pinned(BTreeMap<FiveTuple, u8>),
}

pub fn select_dpu(t: &FiveTuple, mode: &DistributionMode) -> u8 {
    let hashed = (flow_hash(t) % u32::from(DPU_COUNT)) as u8;
    match mode {
        DistributionMode::Hash => hashed,
        DistributionMode::Pinned(pins) => pins.get(t).copied().unwrap_or(hashed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathDecision {
    AsicOnly,
    ToDpu(u8),
    PuntToCpu,
    Drop(DropReason),
}

/// Where local-VM destinations are resolved.
#[derive(Debug, Clone)]
pub enum LocalResolution {
    /// VM-NC lives on the DPUs; local traffic is handed over.
    Dpu,
    /// VM-NC is held in ASIC SRAM and resolved inline.
    Asic { vm_nc: VmNcTable, host_nexthops: HostNexthops },
}

/// Installed ASIC tables. Lookups are read-only.
#[derive(Debug, Clone)]
pub struct AsicPipeline {
    pub vteps: BTreeSet<Ipv4Addr>,
    pub protocol_rules: Vec<ProtocolRule>,
    pub tenants: HashMap<Vni, RouteTableId>,
    pub policy: HashMap<RouteTableId, PrefixTrie<u16>>,
    pub routes: HashMap<RoutingInstanceId, PrefixTrie<RouteTarget>>,
    pub ecmp: HashMap<u32, EcmpGroup>,
    pub nexthops: HashMap<NexthopIndex, NexthopEntry>,
    pub local: LocalResolution,
}

impl AsicPipeline {
    pub fn new(local: LocalResolution) -> Self {
        AsicPipeline {
            vteps: BTreeSet::new(),
            protocol_rules: Vec::new(),
            tenants: HashMap::new(),
            policy: HashMap::new(),
            routes: HashMap::new(),
            ecmp: HashMap::new(),
            nexthops: HashMap::new(),
            local,
        }
    }

    pub fn classify(&self, p: &PacketDescriptor) -> TrafficClass {
        classify_traffic(p, &self.vteps, &self.protocol_rules)
    }

    pub fn tenant_lookup(&self, vni: Vni) -> Result<RouteTableId, LookupError> {
        self.tenants.get(&vni).copied().ok_or(LookupError::TenantMiss(vni))
    }

    /// Policy-route misses fall back to instance 0 of the tenant.
    pub fn policy_route(&self, table: RouteTableId, inner_src: Ipv4Addr) -> RoutingInstanceId {
        let instance = self.policy.get(&table).and_then(|t| t.lookup(inner_src)).map_or(0, |(_, i)| *i);
        RoutingInstanceId { table, instance }
    }

    pub fn route_lookup(&self, instance: RoutingInstanceId, inner_dst: Ipv4Addr) -> Result<RouteTarget, LookupError> {
        self.routes
            .get(&instance)
            .and_then(|t| t.lookup(inner_dst))
            .map(|(_, target)| *target)
            .ok_or(LookupError::RouteMiss)
    }

    fn resolve_remote(&self, target: RouteTarget, t: &FiveTuple) -> Result<NexthopIndex, LookupError> {
        match target {
            RouteTarget::Nexthop(nh) => Ok(nh),
            RouteTarget::Ecmp(g) => {
                let group = self.ecmp.get(&g).ok_or(LookupError::EcmpGroupMiss(g))?;
                Ok(ecmp_select(group, t))
            }
            RouteTarget::LocalVm => unreachable!("local targets are not remote"),
        }
    }

    /// Runs the pre-DPU segment and decides the datapath.
    pub fn pre_dpu_process(
        &self,
        p: &PacketDescriptor,
        services: &ServiceRegistry,
        mode: &DistributionMode,
    ) -> (InternalMetadata, PathDecision) {
        let mut meta = InternalMetadata { trace_id: p.trace_id.unwrap_or(0), ..Default::default() };
        let drop = |meta, r| (meta, PathDecision::Drop(r));

        let class = self.classify(p);
        match divert_control(class) {
            Divert::PuntToCpu => {
                meta.path_flags = PathFlags::TO_CPU;
                return (meta, PathDecision::PuntToCpu);
            }
            Divert::Drop(r) => return drop(meta, r),
            Divert::Continue => {}
        }
        let vni = p.encap.expect("tenant traffic is encapsulated").vni;
        let table = match self.tenant_lookup(vni) {
            Ok(t) => t,
            Err(e) => return drop(meta, e.drop_reason()),
        };
        let Some(svc_id) = services.service_for_table(table) else {
            return drop(meta, DropReason::ServiceMiss);
        };
        meta.svc_id = svc_id;
        meta.version = services.version(svc_id).unwrap_or(0);
        meta.route_table_id = table;

        let instance = self.policy_route(table, p.inner.src_ip);
        let target = match self.route_lookup(instance, p.inner.dst_ip) {
            Ok(t) => t,
            Err(e) => return drop(meta, e.drop_reason()),
        };
        match target {
            RouteTarget::LocalVm => match &self.local {
                LocalResolution::Dpu => {
                    meta.path_flags = PathFlags::TO_DPU;
                    (meta, PathDecision::ToDpu(select_dpu(&p.inner, mode)))
                }
                LocalResolution::Asic { vm_nc, host_nexthops } => {
                    let Ok(host) = vm_nc_lookup(vm_nc, table, p.inner.dst_ip) else {
                        return drop(meta, DropReason::VmNcMiss);
                    };
                    let Some(nh) = host_nexthops.get(&host) else {
                        return drop(meta, DropReason::HostNexthopMiss);
                    };
                    meta.nexthop_index = *nh;
                    meta.path_flags = PathFlags::ASIC_ONLY;
                    (meta, PathDecision::AsicOnly)
                }
            },
            remote => match self.resolve_remote(remote, &p.inner) {
                Ok(nh) => {
                    meta.nexthop_index = nh;
                    meta.path_flags = PathFlags::ASIC_ONLY;
                    (meta, PathDecision::AsicOnly)
                }
                Err(e) => drop(meta, e.drop_reason()),
            },
        }
    }

    pub fn post_dpu_process(&self, m: &InternalMetadata) -> Result<EgressAction, LookupError> {
        let nh = self.nexthops.get(&m.nexthop_index).ok_or(LookupError::NexthopMiss(m.nexthop_index))?;
        Ok(EgressAction { nexthop: nh.index, out_port: nh.out_port, encap: nh.encap })
    }
}
