use std::collections::HashMap;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::DpuError;
use crate::packet::{FiveTuple, NexthopIndex, RouteTableId, Vni};
use crate::prefix::Ipv4Prefix;

/// Exact-match flow identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub vni: Vni,
    pub tuple: FiveTuple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TableInsertError {
    #[error("table full at {capacity} entries")]
    CapacityExceeded { capacity: usize },
    #[error("duplicate key")]
    DuplicateKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmNcEntry {
    pub vm_ip: Ipv4Addr,
    pub route_table_id: RouteTableId,
    pub host: Ipv4Addr,
}

/// VM to node-controller mapping, keyed by routing context and VM address.
#[derive(Debug, Clone, Default)]
pub struct VmNcTable {
    capacity: usize,
    map: HashMap<(RouteTableId, Ipv4Addr), Ipv4Addr>,
}

impl VmNcTable {
    pub fn with_capacity(capacity: usize) -> Self {
        VmNcTable { capacity, map: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn insert(&mut self, e: VmNcEntry) -> Result<(), TableInsertError> {
        let key = (e.route_table_id, e.vm_ip);
        if self.map.contains_key(&key) {
            return Err(TableInsertError::DuplicateKey);
        }
        if self.map.len() >= self.capacity {
            return Err(TableInsertError::CapacityExceeded { capacity: self.capacity });
        }
        self.map.insert(key, e.host);
        Ok(())
    }

    pub fn remove(&mut self, route_table_id: RouteTableId, vm_ip: Ipv4Addr) -> Option<Ipv4Addr> {
        self.map.remove(&(route_table_id, vm_ip))
    }
}

pub fn vm_nc_lookup(table: &VmNcTable, route_table_id: RouteTableId, vm_ip: Ipv4Addr) -> Result<Ipv4Addr, DpuError> {
    table.map.get(&(route_table_id, vm_ip)).copied().ok_or(DpuError::VmNcMiss)
}

/// Host (node controller) address to the ASIC nexthop that reaches it.
pub type HostNexthops = HashMap<Ipv4Addr, NexthopIndex>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AclAction {
    Allow,
    Deny,
}

/// One ordered ACL rule. Unset fields match anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AclRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vni: Option<Vni>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<Ipv4Prefix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst: Option<Ipv4Prefix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proto: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst_port: Option<u16>,
    pub action: AclAction,
}

impl AclRule {
    pub fn matches(&self, key: &FlowKey) -> bool {
        self.vni.is_none_or(|v| v == key.vni)
            && self.src.is_none_or(|p| p.contains_addr(key.tuple.src_ip))
            && self.dst.is_none_or(|p| p.contains_addr(key.tuple.dst_ip))
            && self.proto.is_none_or(|p| p == key.tuple.proto)
            && self.dst_port.is_none_or(|p| p == key.tuple.dst_port)
    }
}

/// First match wins; no match allows.
#[derive(Debug, Clone, Default)]
pub struct Acl {
    rules: Vec<AclRule>,
}

impl Acl {
    pub fn new(rules: Vec<AclRule>) -> Self {
        Acl { rules }
    }

    pub fn push(&mut self, rule: AclRule) {
        self.rules.push(rule);
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn evaluate(&self, key: &FlowKey) -> AclAction {
        self.rules.iter().find(|r| r.matches(key)).map_or(AclAction::Allow, |r| r.action)
    }
}
