//! Control plane: rule installation with per-table capacity limits,
//! service versions, DPU distribution mode and net-ACL coalescing.
//!
//! Mutations are queued and become visible together on [`ControlPlane::commit`],
//! which the simulator calls only between packets.

pub mod collision;
mod services;

use std::collections::{BTreeMap, HashSet};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asic::{
    AsicPipeline, DistributionMode, EcmpGroup, LocalResolution, NexthopEntry, ProtocolRule, RouteTarget,
    RoutingInstanceId, DPU_COUNT,
};
use crate::dpu::coalesce::NetAcl;
use crate::dpu::tables::{AclAction, AclRule, VmNcEntry, VmNcTable};
use crate::dpu::{CoalescedTable, SlowPathTables};
use crate::packet::{NexthopIndex, RouteTableId, SvcId, Vni};
use crate::prefix::Ipv4Prefix;

pub use collision::{
    check_collision, coalesce_tables, CoalescePlan, CoalesceVerdict, Conflict, LogicalTableId, PlanReport, PrefixTable,
    TaggedPrefix,
};
pub use services::{ServiceObject, ServiceRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControlError {
    #[error("service {0} already registered")]
    DuplicateService(SvcId),
    #[error("route table {table} already bound to service {svc_id}")]
    TableAlreadyBound { table: RouteTableId, svc_id: SvcId },
    #[error("unknown service {0}")]
    UnknownService(SvcId),
    #[error("service {0} version counter exhausted")]
    VersionExhausted(SvcId),
    #[error("{kind} is full at {limit} entries")]
    CapacityExceeded { kind: TableKind, limit: u64 },
    #[error("duplicate key in {0}")]
    DuplicateKey(TableKind),
    #[error("{0} is not supported by this gateway")]
    UnsupportedTable(TableKind),
    #[error("invalid DPU index {0}")]
    InvalidDpuIndex(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    GwHost,
    GwNetAcl,
    GwInterface,
    GwMeter,
    GwRoute,
    GwNexthop,
    GwNexthopAffinity,
    Vtep,
    ProtocolRule,
    PolicyRoute,
    Ecmp,
    HostNexthop,
    Acl,
}

impl TableKind {
    pub const GOVERNED: [TableKind; 7] = [
        TableKind::GwHost,
        TableKind::GwNetAcl,
        TableKind::GwInterface,
        TableKind::GwMeter,
        TableKind::GwRoute,
        TableKind::GwNexthop,
        TableKind::GwNexthopAffinity,
    ];

    /// Whether the capacity profile limits this kind.
    pub fn is_governed(self) -> bool {
        Self::GOVERNED.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TableKind::GwHost => "gw_host",
            TableKind::GwNetAcl => "gw_net_acl",
            TableKind::GwInterface => "gw_interface",
            TableKind::GwMeter => "gw_meter",
            TableKind::GwRoute => "gw_route",
            TableKind::GwNexthop => "gw_nexthop",
            TableKind::GwNexthopAffinity => "gw_nexthop_affinity",
            TableKind::Vtep => "vtep",
            TableKind::ProtocolRule => "protocol_rule",
            TableKind::PolicyRoute => "policy_route",
            TableKind::Ecmp => "ecmp",
            TableKind::HostNexthop => "host_nexthop",
            TableKind::Acl => "acl",
        }
    }
}

impl std::fmt::Display for TableKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityLimit {
    Unbounded,
    Max(u64),
    Unsupported,
}

/// Max entries per governed table kind. Governed kinds missing from the
/// map are unsupported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CapacityProfile {
    limits: BTreeMap<TableKind, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    AsicOnly,
    AsicDpu,
    Unbounded,
}

impl CapacityProfile {
    pub fn new(limits: BTreeMap<TableKind, u64>) -> Result<Self, String> {
        for (k, v) in &limits {
            if !k.is_governed() {
                return Err(format!("{k} has no capacity limit"));
            }
            if *v == 0 {
                return Err(format!("{k} capacity must be positive"));
            }
        }
        Ok(CapacityProfile { limits })
    }

    /// ASIC-only gateway at full scale.
    pub fn asic_only() -> Self {
        use TableKind::*;
        let limits = [
            (GwHost, 1_000_000),
            (GwNetAcl, 10_000),
            (GwInterface, 4_096),
            (GwMeter, 8_192),
            (GwRoute, 100_000),
            (GwNexthop, 65_536),
        ];
        CapacityProfile { limits: limits.into_iter().collect() }
    }

    /// ASIC with DPUs at full scale.
    pub fn asic_dpu() -> Self {
        use TableKind::*;
        let limits = [
            (GwHost, 2_000_000),
            (GwNetAcl, 1_000_000),
            (GwInterface, 40_960),
            (GwMeter, 81_920),
            (GwRoute, 1_000_000),
            (GwNexthop, 655_360),
            (GwNexthopAffinity, 100_000),
        ];
        CapacityProfile { limits: limits.into_iter().collect() }
    }

    pub fn unbounded() -> Self {
        CapacityProfile { limits: TableKind::GOVERNED.iter().map(|k| (*k, u64::MAX)).collect() }
    }

    pub fn named(name: ProfileName) -> Self {
        match name {
            ProfileName::AsicOnly => Self::asic_only(),
            ProfileName::AsicDpu => Self::asic_dpu(),
            ProfileName::Unbounded => Self::unbounded(),
        }
    }

    /// Divides every finite limit, keeping at least one entry.
    pub fn scaled(&self, divisor: u64) -> Self {
        assert!(divisor > 0);
        let limits =
            self.limits.iter().map(|(k, v)| (*k, if *v == u64::MAX { *v } else { (v / divisor).max(1) })).collect();
        CapacityProfile { limits }
    }

    pub fn limit(&self, kind: TableKind) -> CapacityLimit {
        if !kind.is_governed() {
            return CapacityLimit::Unbounded;
        }
        match self.limits.get(&kind) {
            Some(&u64::MAX) => CapacityLimit::Unbounded,
            Some(n) => CapacityLimit::Max(*n),
            None => CapacityLimit::Unsupported,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (TableKind, u64)> + '_ {
        self.limits.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayVariant {
    SoftwareOnly,
    AsicOnly,
    #[default]
    AsicDpu,
}

impl GatewayVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            GatewayVariant::SoftwareOnly => "software_only",
            GatewayVariant::AsicOnly => "asic_only",
            GatewayVariant::AsicDpu => "asic_dpu",
        }
    }
}

/// One installable rule. The table kind follows from the variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleEntry {
    Vtep {
        ip: Ipv4Addr,
    },
    ProtocolRule(ProtocolRule),
    /// VNI to routing context binding, held in `gw_interface`.
    Tenant {
        vni: Vni,
        route_table_id: RouteTableId,
    },
    PolicyRoute {
        table: RouteTableId,
        src: Ipv4Prefix,
        instance: u16,
    },
    Route {
        table: RouteTableId,
        #[serde(default)]
        instance: u16,
        prefix: Ipv4Prefix,
        target: RouteTarget,
    },
    Ecmp(EcmpGroup),
    Nexthop(NexthopEntry),
    Host(VmNcEntry),
    HostNexthop {
        host: Ipv4Addr,
        nexthop: NexthopIndex,
    },
    Acl(AclRule),
    NetAcl {
        table: LogicalTableId,
        prefix: Ipv4Prefix,
        action: AclAction,
    },
    Meter {
        id: u32,
        rate_pps: u64,
    },
    NexthopAffinity {
        route_table_id: RouteTableId,
        vm_ip: Ipv4Addr,
        nexthop: NexthopIndex,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum RuleKey {
    Exact(ExactKey),
    Prefix(PrefixKey),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ExactKey {
    Vtep(Ipv4Addr),
    Tenant(Vni),
    Ecmp(u32),
    Nexthop(NexthopIndex),
    Host(RouteTableId, Ipv4Addr),
    HostNexthop(Ipv4Addr),
    Meter(u32),
    Affinity(RouteTableId, Ipv4Addr),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum PrefixKey {
    Policy(RouteTableId, Ipv4Prefix),
    Route(RoutingInstanceId, Ipv4Prefix),
    NetAcl(LogicalTableId, Ipv4Prefix),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Asic,
    Dpu,
    Software,
}

impl RuleEntry {
    pub fn kind(&self) -> TableKind {
        match self {
            RuleEntry::Vtep { .. } => TableKind::Vtep,
            RuleEntry::ProtocolRule(_) => TableKind::ProtocolRule,
            RuleEntry::Tenant { .. } => TableKind::GwInterface,
            RuleEntry::PolicyRoute { .. } => TableKind::PolicyRoute,
            RuleEntry::Route { .. } => TableKind::GwRoute,
            RuleEntry::Ecmp(_) => TableKind::Ecmp,
            RuleEntry::Nexthop(_) => TableKind::GwNexthop,
            RuleEntry::Host(_) => TableKind::GwHost,
            RuleEntry::HostNexthop { .. } => TableKind::HostNexthop,
            RuleEntry::Acl(_) => TableKind::Acl,
            RuleEntry::NetAcl { .. } => TableKind::GwNetAcl,
            RuleEntry::Meter { .. } => TableKind::GwMeter,
            RuleEntry::NexthopAffinity { .. } => TableKind::GwNexthopAffinity,
        }
    }

    /// Which component holds the table under a given gateway variant.
    pub fn component(&self, variant: GatewayVariant) -> Component {
        match variant {
            GatewayVariant::SoftwareOnly => Component::Software,
            GatewayVariant::AsicOnly => Component::Asic,
            GatewayVariant::AsicDpu => match self.kind() {
                TableKind::GwHost
                | TableKind::HostNexthop
                | TableKind::Acl
                | TableKind::GwNetAcl
                | TableKind::GwNexthopAffinity => Component::Dpu,
                _ => Component::Asic,
            },
        }
    }

    fn key(&self) -> Option<RuleKey> {
        use ExactKey as E;
        use PrefixKey as P;
        Some(match self {
            RuleEntry::Vtep { ip } => RuleKey::Exact(E::Vtep(*ip)),
            RuleEntry::Tenant { vni, .. } => RuleKey::Exact(E::Tenant(*vni)),
            RuleEntry::Ecmp(g) => RuleKey::Exact(E::Ecmp(g.group_id)),
            RuleEntry::Nexthop(n) => RuleKey::Exact(E::Nexthop(n.index)),
            RuleEntry::Host(h) => RuleKey::Exact(E::Host(h.route_table_id, h.vm_ip)),
            RuleEntry::HostNexthop { host, .. } => RuleKey::Exact(E::HostNexthop(*host)),
            RuleEntry::Meter { id, .. } => RuleKey::Exact(E::Meter(*id)),
            RuleEntry::NexthopAffinity { route_table_id, vm_ip, .. } => {
                RuleKey::Exact(E::Affinity(*route_table_id, *vm_ip))
            }
            RuleEntry::PolicyRoute { table, src, .. } => RuleKey::Prefix(P::Policy(*table, *src)),
            RuleEntry::Route { table, instance, prefix, .. } => {
                RuleKey::Prefix(P::Route(RoutingInstanceId { table: *table, instance: *instance }, *prefix))
            }
            RuleEntry::NetAcl { table, prefix, .. } => RuleKey::Prefix(P::NetAcl(*table, *prefix)),
            RuleEntry::ProtocolRule(_) | RuleEntry::Acl(_) => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meter {
    pub id: u32,
    pub rate_pps: u64,
}

/// Tables as seen by packets. Only the control plane mutates it.
#[derive(Debug, Clone)]
pub struct Dataplane {
    pub variant: GatewayVariant,
    pub asic: AsicPipeline,
    pub slow: SlowPathTables,
    pub services: ServiceRegistry,
    pub mode: DistributionMode,
    pub meters: BTreeMap<u32, Meter>,
    pub affinity: BTreeMap<(RouteTableId, Ipv4Addr), NexthopIndex>,
    /// Logical net-ACL tables before coalescing.
    pub net_acl_tables: BTreeMap<LogicalTableId, BTreeMap<Ipv4Prefix, AclAction>>,
    pub net_acl_plan: Option<PlanReport>,
    /// Incremented by every commit.
    pub generation: u64,
}

impl Dataplane {
    pub fn new(variant: GatewayVariant) -> Self {
        let local = match variant {
            GatewayVariant::AsicDpu => LocalResolution::Dpu,
            _ => {
                LocalResolution::Asic { vm_nc: VmNcTable::with_capacity(usize::MAX), host_nexthops: Default::default() }
            }
        };
        Dataplane {
            variant,
            asic: AsicPipeline::new(local),
            slow: SlowPathTables { vm_nc: VmNcTable::with_capacity(usize::MAX), ..Default::default() },
            services: ServiceRegistry::new(),
            mode: DistributionMode::Hash,
            meters: BTreeMap::new(),
            affinity: BTreeMap::new(),
            net_acl_tables: BTreeMap::new(),
            net_acl_plan: None,
            generation: 0,
        }
    }

    fn apply(&mut self, entry: RuleEntry) {
        match entry {
            RuleEntry::Vtep { ip } => {
                self.asic.vteps.insert(ip);
            }
            RuleEntry::ProtocolRule(r) => self.asic.protocol_rules.push(r),
            RuleEntry::Tenant { vni, route_table_id } => {
                self.asic.tenants.insert(vni, route_table_id);
            }
            RuleEntry::PolicyRoute { table, src, instance } => {
                self.asic.policy.entry(table).or_default().insert(src, instance);
            }
            RuleEntry::Route { table, instance, prefix, target } => {
                let id = RoutingInstanceId { table, instance };
                self.asic.routes.entry(id).or_default().insert(prefix, target);
            }
            RuleEntry::Ecmp(g) => {
                self.asic.ecmp.insert(g.group_id, g);
            }
            RuleEntry::Nexthop(n) => {
                self.asic.nexthops.insert(n.index, n);
            }
            RuleEntry::Host(h) => {
                let table = match &mut self.asic.local {
                    LocalResolution::Asic { vm_nc, .. } => vm_nc,
                    LocalResolution::Dpu => &mut self.slow.vm_nc,
                };
                table.insert(h).expect("validated at install");
            }
            RuleEntry::HostNexthop { host, nexthop } => {
                let map = match &mut self.asic.local {
                    LocalResolution::Asic { host_nexthops, .. } => host_nexthops,
                    LocalResolution::Dpu => &mut self.slow.host_nexthops,
                };
                map.insert(host, nexthop);
            }
            RuleEntry::Acl(r) => self.slow.acl.push(r),
            RuleEntry::NetAcl { table, prefix, action } => {
                self.net_acl_tables.entry(table).or_default().insert(prefix, action);
            }
            RuleEntry::Meter { id, rate_pps } => {
                self.meters.insert(id, Meter { id, rate_pps });
            }
            RuleEntry::NexthopAffinity { route_table_id, vm_ip, nexthop } => {
                self.affinity.insert((route_table_id, vm_ip), nexthop);
            }
        }
    }

    /// Rebuilds the DPU net ACL, coalesced if no prefix in one logical
    /// table contains a prefix in another.
    fn rebuild_net_acl(&mut self) {
        let tables: Vec<PrefixTable<AclAction>> = self
            .net_acl_tables
            .iter()
            .map(|(id, m)| PrefixTable { id: *id, entries: m.iter().map(|(p, a)| (*p, *a)).collect() })
            .collect();
        let plan = coalesce_tables(&tables);
        self.net_acl_plan = Some(plan.report());
        self.slow.net_acl = match plan.verdict {
            CoalesceVerdict::Coalesced(ct) => NetAcl::Coalesced(ct),
            CoalesceVerdict::Refused(_) => {
                NetAcl::Separate(tables.into_iter().map(|t| CoalescedTable::build(t.entries)).collect())
            }
        };
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Mutation {
    Install(RuleEntry),
    Bump(SvcId),
    Mode(DistributionMode),
}

/// A committed version change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionEvent {
    pub generation: u64,
    pub svc_id: SvcId,
    pub version: u16,
}

struct Reservation {
    kind: TableKind,
    key: Option<RuleKey>,
    fresh: bool,
}

#[derive(Debug, Clone)]
pub struct ControlPlane {
    dp: Dataplane,
    profile: CapacityProfile,
    counts: BTreeMap<TableKind, u64>,
    keys: HashSet<RuleKey>,
    pending: Vec<Mutation>,
    pending_versions: BTreeMap<SvcId, u16>,
    history: Vec<VersionEvent>,
}

impl ControlPlane {
    pub fn new(variant: GatewayVariant, profile: CapacityProfile) -> Self {
        ControlPlane {
            dp: Dataplane::new(variant),
            profile,
            counts: BTreeMap::new(),
            keys: HashSet::new(),
            pending: Vec::new(),
            pending_versions: BTreeMap::new(),
            history: Vec::new(),
        }
    }

    pub fn dataplane(&self) -> &Dataplane {
        &self.dp
    }

    pub fn profile(&self) -> &CapacityProfile {
        &self.profile
    }

    /// Installed plus pending entries of a kind.
    pub fn count(&self, kind: TableKind) -> u64 {
        self.counts.get(&kind).copied().unwrap_or(0)
    }

    pub fn history(&self) -> &[VersionEvent] {
        &self.history
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Services are registered at setup time and visible immediately.
    pub fn register_service(&mut self, svc: ServiceObject) -> Result<(), ControlError> {
        let (id, v) = (svc.svc_id, svc.version);
        self.dp.services.register(svc)?;
        self.history.push(VersionEvent { generation: self.dp.generation, svc_id: id, version: v });
        Ok(())
    }

    fn reserve(&mut self, entry: &RuleEntry) -> Result<Reservation, ControlError> {
        let kind = entry.kind();
        let limit = self.profile.limit(kind);
        if limit == CapacityLimit::Unsupported {
            return Err(ControlError::UnsupportedTable(kind));
        }
        let key = entry.key();
        let fresh = match &key {
            Some(k @ RuleKey::Exact(_)) if self.keys.contains(k) => return Err(ControlError::DuplicateKey(kind)),
            Some(k) => !self.keys.contains(k),
            None => true,
        };
        if fresh {
            let n = self.count(kind);
            if let CapacityLimit::Max(max) = limit {
                if n >= max {
                    return Err(ControlError::CapacityExceeded { kind, limit: max });
                }
            }
            *self.counts.entry(kind).or_insert(0) += 1;
            if let Some(k) = &key {
                self.keys.insert(k.clone());
            }
        }
        Ok(Reservation { kind, key, fresh })
    }

    fn release(&mut self, r: Reservation) {
        if r.fresh {
            *self.counts.get_mut(&r.kind).expect("reserved") -= 1;
            if let Some(k) = r.key {
                self.keys.remove(&k);
            }
        }
    }

    /// Validates and queues one rule. Exact-match keys must be new; a
    /// repeated prefix in an LPM table replaces the old entry.
    pub fn install_rule(&mut self, entry: RuleEntry) -> Result<(), ControlError> {
        self.reserve(&entry)?;
        self.pending.push(Mutation::Install(entry));
        Ok(())
    }

    fn next_version(&self, svc_id: SvcId) -> Result<u16, ControlError> {
        let cur = match self.pending_versions.get(&svc_id) {
            Some(v) => *v,
            None => self.dp.services.version(svc_id).ok_or(ControlError::UnknownService(svc_id))?,
        };
        cur.checked_add(1).ok_or(ControlError::VersionExhausted(svc_id))
    }

    pub fn bump_version(&mut self, svc_id: SvcId) -> Result<u16, ControlError> {
        self.bump_version_with(svc_id, Vec::new())
    }

    /// Queues rule changes together with a version bump. Either all of
    /// them are accepted or none is.
    pub fn bump_version_with(&mut self, svc_id: SvcId, changes: Vec<RuleEntry>) -> Result<u16, ControlError> {
        let v = self.next_version(svc_id)?;
        let mut held = Vec::with_capacity(changes.len());
        for c in &changes {
            match self.reserve(c) {
                Ok(r) => held.push(r),
                Err(e) => {
                    for r in held {
                        self.release(r);
                    }
                    return Err(e);
                }
            }
        }
        self.pending.extend(changes.into_iter().map(Mutation::Install));
        self.pending.push(Mutation::Bump(svc_id));
        self.pending_versions.insert(svc_id, v);
        Ok(v)
    }

    pub fn set_distribution_mode(&mut self, mode: DistributionMode) -> Result<(), ControlError> {
        if let DistributionMode::Pinned(pins) = &mode {
            if let Some(bad) = pins.values().find(|d| **d >= DPU_COUNT) {
                return Err(ControlError::InvalidDpuIndex(*bad));
            }
        }
        self.pending.push(Mutation::Mode(mode));
        Ok(())
    }

    /// Applies everything queued since the last commit as one step.
    /// Returns the new generation.
    pub fn commit(&mut self) -> u64 {
        if self.pending.is_empty() {
            return self.dp.generation;
        }
        self.dp.generation += 1;
        let generation = self.dp.generation;
        let mut acl_dirty = false;
        for m in std::mem::take(&mut self.pending) {
            match m {
                Mutation::Install(e) => {
                    acl_dirty |= matches!(e, RuleEntry::NetAcl { .. });
                    self.dp.apply(e);
                }
                Mutation::Bump(svc_id) => {
                    let version = self.dp.services.bump(svc_id).expect("validated at queue time");
                    self.history.push(VersionEvent { generation, svc_id, version });
                }
                Mutation::Mode(mode) => self.dp.mode = mode,
            }
        }
        self.pending_versions.clear();
        if acl_dirty {
            self.dp.rebuild_net_acl();
        }
        generation
    }
}
