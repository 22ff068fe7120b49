//! Pre-DPU lookups on the ASIC: classify, divert, tenant, policy route,
//! route, ECMP. Prints the path each sample packet takes.

use std::net::Ipv4Addr;

use gwsim::control::{ControlPlane, GatewayVariant, RuleEntry};
use gwsim::packet::{FiveTuple, PacketDescriptor, VxlanEncap, PROTO_TCP};
use gwsim::sim::config::ScenarioConfig;
use gwsim::sim::fabric::{fabric_rules, tenant_table, tenant_vni, vm_ip, vtep_ip, GATEWAY_IP};

fn packet(vni: u32, src: Ipv4Addr, dst: Ipv4Addr, dport: u16, outer_src: Ipv4Addr) -> PacketDescriptor {
    PacketDescriptor {
        outer_src_ip: outer_src,
        outer_dst_ip: GATEWAY_IP,
        encap: Some(VxlanEncap { vni: vni.try_into().unwrap() }),
        inner: FiveTuple::new(src, dst, 40_000, dport, PROTO_TCP),
        payload_len: 256,
        trace_id: None,
        arrival_ns: 0,
    }
}

fn main() {
    let cfg = ScenarioConfig::new(GatewayVariant::AsicDpu, 1, 1);
    let mut cp = ControlPlane::new(cfg.variant, cfg.capacity_profile());
    for s in cfg.effective_services() {
        cp.register_service(s).unwrap();
    }
    for r in fabric_rules(&cfg.fabric) {
        cp.install_rule(r).unwrap();
    }
    // Tenant 0 sends 10.0.128.0/17 sources through routing instance 1,
    // where other regions leave over the IDC link (nexthop 10).
    let t = tenant_table(0);
    cp.install_rule(RuleEntry::PolicyRoute { table: t, src: "10.0.128.0/17".parse().unwrap(), instance: 1 }).unwrap();
    cp.install_rule(RuleEntry::Route {
        table: t,
        instance: 1,
        prefix: "172.16.0.0/12".parse().unwrap(),
        target: gwsim::asic::RouteTarget::Nexthop(10.try_into().unwrap()),
    })
    .unwrap();
    cp.commit();

    let dp = cp.dataplane();
    let vni = tenant_vni(0).get();
    let vtep = vtep_ip(0);
    let samples = [
        ("local vm", packet(vni, vm_ip(1), vm_ip(2), 443, vtep)),
        ("cross-region", packet(vni, vm_ip(1), Ipv4Addr::new(172, 20, 1, 1), 443, vtep)),
        ("cross-region, policy", packet(vni, vm_ip(40_000), Ipv4Addr::new(172, 20, 1, 1), 443, vtep)),
        ("idc", packet(vni, vm_ip(1), Ipv4Addr::new(192, 168, 3, 3), 22, vtep)),
        ("unknown vni", packet(9_999, vm_ip(1), vm_ip(2), 443, vtep)),
        ("no route", packet(vni, vm_ip(1), Ipv4Addr::new(8, 8, 8, 8), 53, vtep)),
        ("unknown vtep", packet(vni, vm_ip(1), vm_ip(2), 443, Ipv4Addr::new(203, 0, 113, 9))),
    ];
    for (name, p) in samples {
        let (m, d) = dp.asic.pre_dpu_process(&p, &dp.services, &dp.mode);
        println!("{name:<22} {d:?}  svc={} rt={} nh={}", m.svc_id, m.route_table_id, m.nexthop_index.get());
    }

    let mut bgp = packet(vni, vm_ip(1), vm_ip(2), 179, gwsim::sim::fabric::bgp_peer_ip(0));
    bgp.encap = None;
    bgp.inner = FiveTuple::new(gwsim::sim::fabric::bgp_peer_ip(0), GATEWAY_IP, 50_000, 179, PROTO_TCP);
    let (_, d) = dp.asic.pre_dpu_process(&bgp, &dp.services, &dp.mode);
    println!("{:<22} {d:?}", "bgp");
}
