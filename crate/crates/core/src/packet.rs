//! Packets, flow keys and the private metadata header exchanged between the
//! switching ASIC and the DPUs.
//!
//! # Metadata wire layout
//!
//! All multi-byte fields are big-endian. The header is the same length in
//! both directions (ASIC to DPU and DPU back to ASIC).
//!
//! ```text
//! offset  len  field
//! ------  ---  ---------------------------------------------
//!  0       2   svc_id
//!  2       2   version
//!  4       2   route_table_id
//!  6       3   nexthop_index
//!  9       1   path_flags
//! 10       2   reserved, zero
//! 12       4   padding, zero
//! ------  ---
//!         16   HEADER_LEN
//! ```
//!
//! The trace id is not carried on the wire. The simulator keeps it in a
//! sidecar next to the header, see [`parse_metadata_traced`].

use std::fmt;
use std::net::Ipv4Addr;

use bitflags::bitflags;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HEADER_LEN: usize = 16;

pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

/// Largest value of a 24-bit field.
pub const MAX_U24: u32 = (1 << 24) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("metadata buffer is {got} bytes, expected {HEADER_LEN}")]
    LengthMismatch { got: usize },
    #[error("invalid path flags {0:#04x}")]
    InvalidFlags(u8),
    #[error("value {0} does not fit in 24 bits")]
    Overflow24(u32),
    #[error("payload length {len} exceeds MTU {mtu}")]
    PayloadTooLarge { len: u32, mtu: u32 },
}

/// VXLAN network identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Vni(u32);

impl Vni {
    pub fn new(v: u32) -> Result<Self, PacketError> {
        if v > MAX_U24 {
            return Err(PacketError::Overflow24(v));
        }
        Ok(Vni(v))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for Vni {
    type Error = PacketError;
    fn try_from(v: u32) -> Result<Self, Self::Error> {
        Vni::new(v)
    }
}

impl From<Vni> for u32 {
    fn from(v: Vni) -> u32 {
        v.0
    }
}

impl fmt::Display for Vni {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into the ASIC nexthop table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct NexthopIndex(u32);

impl NexthopIndex {
    pub const ZERO: NexthopIndex = NexthopIndex(0);

    pub fn new(v: u32) -> Result<Self, PacketError> {
        if v > MAX_U24 {
            return Err(PacketError::Overflow24(v));
        }
        Ok(NexthopIndex(v))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for NexthopIndex {
    type Error = PacketError;
    fn try_from(v: u32) -> Result<Self, Self::Error> {
        NexthopIndex::new(v)
    }
}

impl From<NexthopIndex> for u32 {
    fn from(v: NexthopIndex) -> u32 {
        v.0
    }
}

pub type SvcId = u16;
pub type RouteTableId = u16;
pub type TraceId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FiveTuple {
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub proto: u8,
}

impl FiveTuple {
    /// Ports are cleared for protocols other than TCP and UDP.
    pub fn new(src_ip: Ipv4Addr, dst_ip: Ipv4Addr, src_port: u16, dst_port: u16, proto: u8) -> Self {
        let (src_port, dst_port) = if proto == PROTO_TCP || proto == PROTO_UDP { (src_port, dst_port) } else { (0, 0) };
        FiveTuple { src_ip, dst_ip, src_port, dst_port, proto }
    }

    /// The 13-byte key fed to the flow hash.
    pub fn to_bytes(&self) -> [u8; 13] {
        let mut b = [0u8; 13];
        b[0..4].copy_from_slice(&self.src_ip.octets());
        b[4..8].copy_from_slice(&self.dst_ip.octets());
        b[8..10].copy_from_slice(&self.src_port.to_be_bytes());
        b[10..12].copy_from_slice(&self.dst_port.to_be_bytes());
        b[12] = self.proto;
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VxlanEncap {
    pub vni: Vni,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketDescriptor {
    /// Remote VTEP physical address for encapsulated traffic.
    pub outer_src_ip: Ipv4Addr,
    pub outer_dst_ip: Ipv4Addr,
    pub encap: Option<VxlanEncap>,
    pub inner: FiveTuple,
    pub payload_len: u32,
    pub trace_id: Option<TraceId>,
    pub arrival_ns: u64,
}

impl PacketDescriptor {
    pub fn check_mtu(&self, mtu: u32) -> Result<(), PacketError> {
        if self.payload_len > mtu {
            return Err(PacketError::PayloadTooLarge { len: self.payload_len, mtu });
        }
        Ok(())
    }
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
    #[serde(transparent)]
    pub struct PathFlags: u8 {
        const ASIC_ONLY = 0x01;
        const TO_DPU = 0x02;
        const TO_CPU = 0x04;
        const CACHE_HIT = 0x08;
        const SLOW_PATH = 0x10;
    }
}

impl PathFlags {
    const ROUTING: PathFlags = PathFlags::ASIC_ONLY.union(PathFlags::TO_DPU).union(PathFlags::TO_CPU);

    /// Rejects undefined bits and more than one routing bit. A header with
    /// no routing bit has not been through pre-DPU processing yet.
    pub fn validate(bits: u8) -> Result<PathFlags, PacketError> {
        let flags = PathFlags::from_bits(bits).ok_or(PacketError::InvalidFlags(bits))?;
        if flags.intersection(Self::ROUTING).bits().count_ones() > 1 {
            return Err(PacketError::InvalidFlags(bits));
        }
        Ok(flags)
    }

    pub fn has_single_route(self) -> bool {
        self.intersection(Self::ROUTING).bits().count_ones() == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InternalMetadata {
    pub svc_id: SvcId,
    pub version: u16,
    pub route_table_id: RouteTableId,
    pub nexthop_index: NexthopIndex,
    pub path_flags: PathFlags,
    /// Sidecar only, never serialized.
    pub trace_id: TraceId,
}

pub fn serialize_metadata(m: &InternalMetadata) -> [u8; HEADER_LEN] {
    let mut b = [0u8; HEADER_LEN];
    b[0..2].copy_from_slice(&m.svc_id.to_be_bytes());
    b[2..4].copy_from_slice(&m.version.to_be_bytes());
    b[4..6].copy_from_slice(&m.route_table_id.to_be_bytes());
    b[6..9].copy_from_slice(&m.nexthop_index.get().to_be_bytes()[1..4]);
    b[9] = m.path_flags.bits();
    b
}

/// Parses a header received on the wire. The returned trace id is zero.
pub fn parse_metadata(b: &[u8]) -> Result<InternalMetadata, PacketError> {
    parse_metadata_traced(b, 0)
}

/// Parses a header and reattaches the trace id kept alongside the packet.
pub fn parse_metadata_traced(b: &[u8], trace_id: TraceId) -> Result<InternalMetadata, PacketError> {
    if b.len() != HEADER_LEN {
        return Err(PacketError::LengthMismatch { got: b.len() });
    }
    let path_flags = PathFlags::validate(b[9])?;
    let nh = u32::from_be_bytes([0, b[6], b[7], b[8]]);
    Ok(InternalMetadata {
        svc_id: u16::from_be_bytes([b[0], b[1]]),
        version: u16::from_be_bytes([b[2], b[3]]),
        route_table_id: u16::from_be_bytes([b[4], b[5]]),
        nexthop_index: NexthopIndex(nh),
        path_flags,
        trace_id,
    })
}

/// Run-scoped monotone trace id counter.
#[derive(Debug, Default)]
pub struct TraceIdSource {
    next: TraceId,
}

impl TraceIdSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

/// Stamps an ingress packet with the next trace id.
///
/// Panics if the packet already carries one.
pub fn assign_trace_id(mut p: PacketDescriptor, source: &mut TraceIdSource) -> PacketDescriptor {
    assert!(p.trace_id.is_none(), "packet already traced");
    p.trace_id = Some(source.next);
    source.next += 1;
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_packet() -> PacketDescriptor {
        PacketDescriptor {
            outer_src_ip: Ipv4Addr::new(192, 0, 2, 1),
            outer_dst_ip: Ipv4Addr::new(192, 0, 2, 254),
            encap: Some(VxlanEncap { vni: Vni::new(100).unwrap() }),
            inner: FiveTuple::new(Ipv4Addr::new(10, 0, 0, 1), Ipv4Addr::new(10, 0, 0, 2), 1234, 80, PROTO_TCP),
            payload_len: 64,
            trace_id: None,
            arrival_ns: 0,
        }
    }

    #[test]
    fn ports_cleared_for_icmp() {
        let t = FiveTuple::new(Ipv4Addr::LOCALHOST, Ipv4Addr::LOCALHOST, 5, 6, 1);
        assert_eq!((t.src_port, t.dst_port), (0, 0));
        let t = FiveTuple::new(Ipv4Addr::LOCALHOST, Ipv4Addr::LOCALHOST, 5, 6, PROTO_UDP);
        assert_eq!((t.src_port, t.dst_port), (5, 6));
    }

    #[test]
    fn vni_range() {
        assert!(Vni::new(MAX_U24).is_ok());
        assert_eq!(Vni::new(1 << 24), Err(PacketError::Overflow24(1 << 24)));
        assert!(NexthopIndex::new(1 << 24).is_err());
    }

    #[test]
    fn zero_metadata_is_all_zero_bytes() {
        let m = InternalMetadata { trace_id: 99, ..Default::default() };
        assert_eq!(serialize_metadata(&m), [0u8; HEADER_LEN]);
    }

    #[test]
    fn svc_and_version_offsets() {
        let m = InternalMetadata { svc_id: 7, version: 3, ..Default::default() };
        let b = serialize_metadata(&m);
        assert_eq!(&b[0..2], &[0x00, 0x07]);
        assert_eq!(&b[2..4], &[0x00, 0x03]);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_metadata(&[0u8; 12]), Err(PacketError::LengthMismatch { got: 12 }));
        let mut b = [0u8; HEADER_LEN];
        b[9] = (PathFlags::ASIC_ONLY | PathFlags::TO_DPU).bits();
        assert_eq!(parse_metadata(&b), Err(PacketError::InvalidFlags(0x03)));
        b[9] = 0x80;
        assert_eq!(parse_metadata(&b), Err(PacketError::InvalidFlags(0x80)));
        b[9] = (PathFlags::TO_DPU | PathFlags::CACHE_HIT).bits();
        assert!(parse_metadata(&b).is_ok());
    }

    #[test]
    fn trace_ids_start_at_zero_and_increase() {
        let mut src = TraceIdSource::new();
        let a = assign_trace_id(sample_packet(), &mut src);
        let b = assign_trace_id(sample_packet(), &mut src);
        assert_eq!(a.trace_id, Some(0));
        assert_eq!(b.trace_id, Some(1));
        assert_eq!(src.issued(), 2);
    }

    #[test]
    #[should_panic(expected = "already traced")]
    fn retrace_panics() {
        let mut src = TraceIdSource::new();
        let a = assign_trace_id(sample_packet(), &mut src);
        let _ = assign_trace_id(a, &mut src);
    }

    #[test]
    fn mtu_check() {
        let p = sample_packet();
        assert!(p.check_mtu(1500).is_ok());
        assert!(p.check_mtu(10).is_err());
    }
}
