//! One DPU: the eight-stage exact-match fast path with its flow cache and
//! version check, the software slow path on the ARM cores, and the offload
//! agent that writes slow-path results back into the cache.

pub mod cache;
pub mod coalesce;
pub mod tables;

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ServiceRegistry;
use crate::packet::{InternalMetadata, NexthopIndex, PacketDescriptor, PathFlags, SvcId};
use crate::verdict::DropReason;

pub use cache::{FlowCache, FlowEntry, InstallOutcome};
pub use coalesce::{coalesced_lookup, CoalescedTable, NetAcl, NoMatch};
pub use tables::{vm_nc_lookup, Acl, AclAction, AclRule, FlowKey, HostNexthops, VmNcEntry, VmNcTable};

/// Match-action stages every packet crosses in the DPU pipeline.
pub const FAST_PATH_STAGES: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DpuError {
    #[error("service {0} is not registered")]
    UnknownService(SvcId),
    #[error("denied by ACL")]
    AclDeny,
    #[error("denied by network ACL")]
    NetAclDeny,
    #[error("no VM-NC entry")]
    VmNcMiss,
    #[error("no nexthop for host")]
    HostNexthopMiss,
}

impl DpuError {
    pub fn drop_reason(self) -> DropReason {
        match self {
            DpuError::UnknownService(_) => DropReason::UnknownService,
            DpuError::AclDeny => DropReason::AclDeny,
            DpuError::NetAclDeny => DropReason::NetAclDeny,
            DpuError::VmNcMiss => DropReason::VmNcMiss,
            DpuError::HostNexthopMiss => DropReason::HostNexthopMiss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissReason {
    NoEntry,
    VersionMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FastPathResult {
    Hit(NexthopIndex),
    MissToSlowPath(MissReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlowPathDecision {
    pub nexthop_index: NexthopIndex,
    pub host: Ipv4Addr,
    pub svc_id: SvcId,
    /// Network-ACL probes issued while deciding.
    pub net_acl_probes: u32,
}

/// Tables consulted by the slow path, replicated to every DPU.
#[derive(Debug, Clone, Default)]
pub struct SlowPathTables {
    pub vm_nc: VmNcTable,
    pub host_nexthops: HostNexthops,
    pub acl: Acl,
    pub net_acl: NetAcl,
}

pub fn flow_key(p: &PacketDescriptor) -> FlowKey {
    FlowKey { vni: p.encap.expect("DPU traffic is encapsulated").vni, tuple: p.inner }
}

pub fn fast_path(
    p: &PacketDescriptor,
    m: &mut InternalMetadata,
    cache: &mut FlowCache,
    services: &ServiceRegistry,
) -> Result<FastPathResult, DpuError> {
    debug_assert!(m.path_flags.contains(PathFlags::TO_DPU));
    let current = services.version(m.svc_id).ok_or(DpuError::UnknownService(m.svc_id))?;
    let key = flow_key(p);
    let Some(entry) = cache.get(&key) else {
        return Ok(FastPathResult::MissToSlowPath(MissReason::NoEntry));
    };
    if entry.version != current {
        return Ok(FastPathResult::MissToSlowPath(MissReason::VersionMismatch));
    }
    let nh = entry.nexthop_index;
    assert_eq!(entry.version, current, "hit on stale version");
    cache.touch(&key, p.arrival_ns);
    m.nexthop_index = nh;
    m.path_flags |= PathFlags::CACHE_HIT;
    Ok(FastPathResult::Hit(nh))
}

/// Recomputes the forwarding decision in software using the route table id
/// carried in the metadata.
pub fn slow_path(
    p: &PacketDescriptor,
    m: &mut InternalMetadata,
    tables: &SlowPathTables,
) -> Result<SlowPathDecision, DpuError> {
    let key = flow_key(p);
    if tables.acl.evaluate(&key) == AclAction::Deny {
        return Err(DpuError::AclDeny);
    }
    let (net, net_acl_probes) = tables.net_acl.evaluate(p.inner.dst_ip);
    if net == Some(AclAction::Deny) {
        return Err(DpuError::NetAclDeny);
    }
    let host = vm_nc_lookup(&tables.vm_nc, m.route_table_id, p.inner.dst_ip)?;
    let nexthop_index = *tables.host_nexthops.get(&host).ok_or(DpuError::HostNexthopMiss)?;
    m.nexthop_index = nexthop_index;
    m.path_flags |= PathFlags::SLOW_PATH;
    Ok(SlowPathDecision { nexthop_index, host, svc_id: m.svc_id, net_acl_probes })
}

/// Writes a slow-path decision into the cache, stamped with the service's
/// current version.
pub fn offload_install(
    cache: &mut FlowCache,
    key: FlowKey,
    decision: &SlowPathDecision,
    services: &ServiceRegistry,
    now_ns: u64,
) -> Result<InstallOutcome, DpuError> {
    let version = services.version(decision.svc_id).ok_or(DpuError::UnknownService(decision.svc_id))?;
    Ok(cache.insert(FlowEntry::new(key, decision.nexthop_index, version, decision.svc_id, now_ns)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpuCounters {
    pub packets: u64,
    pub hits: u64,
    pub miss_no_entry: u64,
    pub miss_version: u64,
    pub installs: u64,
    pub evictions: u64,
    pub rejected: u64,
    pub net_acl_probes: u64,
}

/// Per-DPU mutable state. Each DPU owns its cache.
#[derive(Debug, Clone)]
pub struct Dpu {
    pub index: u8,
    pub cache: FlowCache,
    pub counters: DpuCounters,
}

/// What happened to a packet inside a DPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpuOutcome {
    Hit(NexthopIndex),
    SlowPath { miss: MissReason, decision: SlowPathDecision, install: InstallOutcome },
    Dropped { miss: Option<MissReason>, error: DpuError },
}

impl Dpu {
    pub fn new(index: u8, cache_capacity: usize) -> Self {
        Dpu { index, cache: FlowCache::new(cache_capacity), counters: DpuCounters::default() }
    }

    /// Fast path, then on a miss the slow path and offload.
    pub fn process(
        &mut self,
        p: &PacketDescriptor,
        m: &mut InternalMetadata,
        services: &ServiceRegistry,
        tables: &SlowPathTables,
    ) -> DpuOutcome {
        self.counters.packets += 1;
        let miss = match fast_path(p, m, &mut self.cache, services) {
            Ok(FastPathResult::Hit(nh)) => {
                self.counters.hits += 1;
                return DpuOutcome::Hit(nh);
            }
            Ok(FastPathResult::MissToSlowPath(r)) => r,
            Err(error) => return DpuOutcome::Dropped { miss: None, error },
        };
        match miss {
            MissReason::NoEntry => self.counters.miss_no_entry += 1,
            MissReason::VersionMismatch => self.counters.miss_version += 1,
        }
        let decision = match slow_path(p, m, tables) {
            Ok(d) => d,
            Err(error) => return DpuOutcome::Dropped { miss: Some(miss), error },
        };
        self.counters.net_acl_probes += u64::from(decision.net_acl_probes);
        let install = match offload_install(&mut self.cache, flow_key(p), &decision, services, p.arrival_ns) {
            Ok(o) => o,
            Err(error) => return DpuOutcome::Dropped { miss: Some(miss), error },
        };
        match install {
            InstallOutcome::Installed => self.counters.installs += 1,
            InstallOutcome::EvictedAndInstalled(_) => {
                self.counters.installs += 1;
                self.counters.evictions += 1;
            }
            InstallOutcome::Rejected => self.counters.rejected += 1,
        }
        DpuOutcome::SlowPath { miss, decision, install }
    }
}
