//! A DPU on its own: first packet misses, goes through the ARM slow path
//! and installs a cache entry; the rest hit in hardware. A tiny cache
//! shows LRU eviction.

use std::net::Ipv4Addr;

use gwsim::control::{ServiceObject, ServiceRegistry};
use gwsim::dpu::tables::{VmNcEntry, VmNcTable};
use gwsim::dpu::{Dpu, DpuOutcome, InstallOutcome, SlowPathTables};
use gwsim::packet::{FiveTuple, InternalMetadata, PacketDescriptor, PathFlags, VxlanEncap, PROTO_UDP};

fn main() {
    let mut services = ServiceRegistry::new();
    services.register(ServiceObject { svc_id: 1, version: 1, tables: vec![1] }).unwrap();

    let mut tables = SlowPathTables { vm_nc: VmNcTable::with_capacity(64), ..Default::default() };
    let host = Ipv4Addr::new(100, 64, 0, 9);
    for i in 0..8u32 {
        let vm_ip = Ipv4Addr::from(0x0A00_0001 + i);
        tables.vm_nc.insert(VmNcEntry { vm_ip, route_table_id: 1, host }).unwrap();
    }
    tables.host_nexthops.insert(host, 1009.try_into().unwrap());

    let mut dpu = Dpu::new(0, 4);
    let flows: Vec<FiveTuple> = (0..5u32)
        .map(|i| FiveTuple::new(Ipv4Addr::new(10, 0, 0, 1), Ipv4Addr::from(0x0A00_0002 + i), 9000, 53, PROTO_UDP))
        .collect();

    // Warm four flows, touch them again, then a fifth flow evicts the
    // least recently used one, which misses when it comes back.
    let sequence = [0, 1, 2, 3, 0, 1, 2, 3, 2, 4, 0, 2];
    for (step, &i) in sequence.iter().enumerate() {
        let p = PacketDescriptor {
            outer_src_ip: Ipv4Addr::new(192, 0, 2, 1),
            outer_dst_ip: Ipv4Addr::new(192, 0, 2, 254),
            encap: Some(VxlanEncap { vni: 1000.try_into().unwrap() }),
            inner: flows[i],
            payload_len: 128,
            trace_id: None,
            arrival_ns: step as u64 * 1_000,
        };
        let mut m = InternalMetadata {
            svc_id: 1,
            version: 1,
            route_table_id: 1,
            path_flags: PathFlags::TO_DPU,
            ..Default::default()
        };
        let what = match dpu.process(&p, &mut m, &services, &tables) {
            DpuOutcome::Hit(nh) => format!("hit, nexthop {}", nh.get()),
            DpuOutcome::SlowPath { miss, install: InstallOutcome::EvictedAndInstalled(k), .. } => {
                format!("{miss:?}, installed, evicted flow to {}", k.tuple.dst_ip)
            }
            DpuOutcome::SlowPath { miss, install, .. } => format!("{miss:?}, {install:?}"),
            DpuOutcome::Dropped { error, .. } => format!("dropped: {error}"),
        };
        println!("flow to {:<10} {what}", flows[i].dst_ip);
    }
    dpu.cache.check_invariants().unwrap();
    println!("{:?}", dpu.counters);
}
