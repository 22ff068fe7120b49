//! Drop reasons and final packet dispositions shared by every component.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoClassification,
    TenantMiss,
    ServiceMiss,
    RouteMiss,
    EcmpGroupMiss,
    NexthopMiss,
    VmNcMiss,
    HostNexthopMiss,
    AclDeny,
    NetAclDeny,
    UnknownService,
    QueueOverflow,
    PayloadTooLarge,
}

impl DropReason {
    pub const ALL: [DropReason; 13] = [
        DropReason::NoClassification,
        DropReason::TenantMiss,
        DropReason::ServiceMiss,
        DropReason::RouteMiss,
        DropReason::EcmpGroupMiss,
        DropReason::NexthopMiss,
        DropReason::VmNcMiss,
        DropReason::HostNexthopMiss,
        DropReason::AclDeny,
        DropReason::NetAclDeny,
        DropReason::UnknownService,
        DropReason::QueueOverflow,
        DropReason::PayloadTooLarge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NoClassification => "no_classification",
            DropReason::TenantMiss => "tenant_miss",
            DropReason::ServiceMiss => "service_miss",
            DropReason::RouteMiss => "route_miss",
            DropReason::EcmpGroupMiss => "ecmp_group_miss",
            DropReason::NexthopMiss => "nexthop_miss",
            DropReason::VmNcMiss => "vm_nc_miss",
            DropReason::HostNexthopMiss => "host_nexthop_miss",
            DropReason::AclDeny => "acl_deny",
            DropReason::NetAclDeny => "net_acl_deny",
            DropReason::UnknownService => "unknown_service",
            DropReason::QueueOverflow => "queue_overflow",
            DropReason::PayloadTooLarge => "payload_too_large",
        }
    }

    /// Name of the stage that raises this drop.
    pub fn stage(self) -> &'static str {
        match self {
            DropReason::NoClassification => "classify",
            DropReason::TenantMiss => "tenant",
            DropReason::ServiceMiss => "service",
            DropReason::RouteMiss => "route",
            DropReason::EcmpGroupMiss => "ecmp",
            DropReason::NexthopMiss => "nexthop",
            DropReason::VmNcMiss => "vm_nc",
            DropReason::HostNexthopMiss => "host_nexthop",
            DropReason::AclDeny => "acl",
            DropReason::NetAclDeny => "net_acl",
            DropReason::UnknownService => "version_check",
            DropReason::QueueOverflow => "rx_queue",
            DropReason::PayloadTooLarge => "ingress",
        }
    }
}

/// Final classification of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    AsicOnly,
    FastHit,
    SlowPath,
    PuntToCpu,
    Drop,
}

impl PathKind {
    pub const ALL: [PathKind; 5] =
        [PathKind::AsicOnly, PathKind::FastHit, PathKind::SlowPath, PathKind::PuntToCpu, PathKind::Drop];

    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::AsicOnly => "asic_only",
            PathKind::FastHit => "fast_hit",
            PathKind::SlowPath => "slow_path",
            PathKind::PuntToCpu => "punt_to_cpu",
            PathKind::Drop => "drop",
        }
    }
}
