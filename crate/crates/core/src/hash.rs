//! Flow hash shared by ECMP member selection, DPU fan-out, flow-cache bucket
//! indexing and software RSS.
//!
//! FNV-1a (32-bit) over the 13-byte five-tuple key, seeded by XOR into the
//! offset basis, followed by the murmur3 `fmix32` finalizer so the low bits
//! are usable for `mod n` selection.

use crate::packet::FiveTuple;

const FNV_OFFSET: u32 = 0x811c_9dc5;
const FNV_PRIME: u32 = 0x0100_0193;

/// Seed used for every selection in a run.
pub const RUN_SEED: u32 = 0;

pub fn hash_bytes(bytes: &[u8], seed: u32) -> u32 {
    let mut h = FNV_OFFSET ^ seed;
    for &b in bytes {
        h ^= u32::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    fmix32(h)
}

fn fmix32(mut h: u32) -> u32 {
    h ^= h >> 16;
    h = h.wrapping_mul(0x85eb_ca6b);
    h ^= h >> 13;
    h = h.wrapping_mul(0xc2b2_ae35);
    h ^= h >> 16;
    h
}

pub fn flow_hash(t: &FiveTuple) -> u32 {
    hash_bytes(&t.to_bytes(), RUN_SEED)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_is_finalized_basis() {
        assert_eq!(hash_bytes(&[], 0), fmix32(FNV_OFFSET));
    }

    #[test]
    fn seed_changes_output() {
        assert_ne!(hash_bytes(b"abc", 0), hash_bytes(b"abc", 1));
    }
}
