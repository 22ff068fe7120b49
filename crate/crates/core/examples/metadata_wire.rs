//! The 16-byte header the pre-DPU stage hands to a DPU, and back.

use gwsim::packet::{
    parse_metadata, parse_metadata_traced, serialize_metadata, InternalMetadata, NexthopIndex, PathFlags,
};

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    let m = InternalMetadata {
        svc_id: 7,
        version: 3,
        route_table_id: 0x0102,
        nexthop_index: NexthopIndex::new(0x0A0B0C).unwrap(),
        path_flags: PathFlags::TO_DPU,
        trace_id: 42,
    };
    let wire = serialize_metadata(&m);
    println!("wire     {}", hex(&wire));

    // The trace id never goes on the wire.
    let plain = parse_metadata(&wire).unwrap();
    println!(
        "parsed   svc={} ver={} rt={:#06x} nh={:#08x} flags={:?} trace={}",
        plain.svc_id,
        plain.version,
        plain.route_table_id,
        plain.nexthop_index.get(),
        plain.path_flags,
        plain.trace_id
    );
    let traced = parse_metadata_traced(&wire, m.trace_id).unwrap();
    assert_eq!(traced, m);

    let mut bad = wire;
    bad[9] = (PathFlags::TO_DPU | PathFlags::ASIC_ONLY).bits();
    println!("two routing bits -> {}", parse_metadata(&bad).unwrap_err());
    println!("short header     -> {}", parse_metadata(&wire[..15]).unwrap_err());
    println!("too-wide nexthop -> {}", NexthopIndex::new(1 << 24).unwrap_err());
}
