//! Addressing plan shared by the generated rules and workload.
//!
//! Tenant `t` uses VNI 1000+t and route table t+1. Its VMs are 10.0.0.1
//! upward, so tenants overlap. Hosts sit in 100.64/16, VTEPs in
//! 192.0.2.1.., BGP peers at 192.0.2.200.., the gateway at 192.0.2.254.
//! Other regions (172.16/12) are reached over an ECMP group and the IDC
//! (192.168/16) over a single nexthop.

use std::net::Ipv4Addr;

use super::config::FabricSpec;
use crate::asic::{EcmpGroup, EncapAction, NexthopEntry, ProtocolRule, RouteTarget};
use crate::control::RuleEntry;
use crate::dpu::tables::VmNcEntry;
use crate::packet::{NexthopIndex, RouteTableId, Vni};
use crate::prefix::Ipv4Prefix;

pub const GATEWAY_IP: Ipv4Addr = Ipv4Addr::new(192, 0, 2, 254);
pub const CROSS_REGION: Ipv4Prefix = Ipv4Prefix::masked(0xAC10_0000, 12);
pub const IDC: Ipv4Prefix = Ipv4Prefix::masked(0xC0A8_0000, 16);
pub const LOCAL_VMS: Ipv4Prefix = Ipv4Prefix::masked(0x0A00_0000, 16);
pub const ECMP_GROUP: u32 = 1;
pub const IDC_NEXTHOP: u32 = 10;
pub const HOST_NEXTHOP_BASE: u32 = 1000;

fn nh(i: u32) -> NexthopIndex {
    NexthopIndex::new(i).expect("small index")
}

pub fn tenant_vni(t: u16) -> Vni {
    Vni::new(1000 + u32::from(t)).expect("small vni")
}

pub fn tenant_table(t: u16) -> RouteTableId {
    t + 1
}

/// VM `i` of any tenant.
pub fn vm_ip(i: u32) -> Ipv4Addr {
    Ipv4Addr::from(0x0A00_0001 + i)
}

pub fn host_ip(h: u32) -> Ipv4Addr {
    Ipv4Addr::from(0x6440_0001 + h)
}

pub fn vtep_ip(v: u8) -> Ipv4Addr {
    Ipv4Addr::new(192, 0, 2, 1 + v)
}

pub fn bgp_peer_ip(p: u8) -> Ipv4Addr {
    Ipv4Addr::new(192, 0, 2, 200 + p % 50)
}

/// Host serving VM `i` of tenant `t`.
pub fn host_of(spec: &FabricSpec, t: u16, i: u32) -> u32 {
    ((u64::from(t) * u64::from(spec.vms_per_tenant) + u64::from(i)) % u64::from(spec.hosts)) as u32
}

pub fn fabric_rules(spec: &FabricSpec) -> Vec<RuleEntry> {
    let mut out = Vec::new();
    for v in 0..spec.vteps {
        out.push(RuleEntry::Vtep { ip: vtep_ip(v) });
    }
    out.extend(ProtocolRule::bgp().into_iter().map(RuleEntry::ProtocolRule));

    let members: Vec<NexthopIndex> = (1..=spec.remote_nexthops).map(nh).collect();
    for (k, m) in members.iter().enumerate() {
        out.push(RuleEntry::Nexthop(NexthopEntry {
            index: *m,
            out_port: k as u16,
            encap: EncapAction { outer_dst_ip: Ipv4Addr::new(198, 51, 100, 1 + k as u8), vni: None },
        }));
    }
    out.push(RuleEntry::Ecmp(EcmpGroup { group_id: ECMP_GROUP, members }));
    out.push(RuleEntry::Nexthop(NexthopEntry {
        index: nh(IDC_NEXTHOP),
        out_port: 250,
        encap: EncapAction { outer_dst_ip: Ipv4Addr::new(203, 0, 113, 1), vni: None },
    }));
    for h in 0..spec.hosts {
        let index = nh(HOST_NEXTHOP_BASE + h);
        out.push(RuleEntry::Nexthop(NexthopEntry {
            index,
            out_port: (h % 64) as u16,
            encap: EncapAction { outer_dst_ip: host_ip(h), vni: None },
        }));
        out.push(RuleEntry::HostNexthop { host: host_ip(h), nexthop: index });
    }

    for t in 0..spec.tenants {
        let table = tenant_table(t);
        out.push(RuleEntry::Tenant { vni: tenant_vni(t), route_table_id: table });
        let routes = [
            (LOCAL_VMS, RouteTarget::LocalVm),
            (CROSS_REGION, RouteTarget::Ecmp(ECMP_GROUP)),
            (IDC, RouteTarget::Nexthop(nh(IDC_NEXTHOP))),
        ];
        for (prefix, target) in routes {
            out.push(RuleEntry::Route { table, instance: 0, prefix, target });
        }
        for i in 0..spec.vms_per_tenant {
            out.push(RuleEntry::Host(VmNcEntry {
                vm_ip: vm_ip(i),
                route_table_id: table,
                host: host_ip(host_of(spec, t, i)),
            }));
        }
    }
    out
}
