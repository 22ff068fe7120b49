//! Reference implementations the tests compare against. They scan
//! everything and share no code with the library's lookup structures.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use gwsim::prefix::Ipv4Prefix;
use gwsim::sim::ScenarioConfig;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(scenario_path(name)).unwrap()
}

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).unwrap()
}

fn netmask(len: u8) -> u32 {
    (((1u64 << len) - 1) << (32 - u32::from(len))) as u32
}

pub fn matches(p: &Ipv4Prefix, ip: Ipv4Addr) -> bool {
    let m = netmask(p.len());
    u32::from(ip) & m == u32::from(p.addr()) & m
}

/// `a` contains `b`: no shorter than `a` and agrees on `a`'s bits.
pub fn contains(a: &Ipv4Prefix, b: &Ipv4Prefix) -> bool {
    a.len() <= b.len() && matches(a, b.addr())
}

/// Longest matching prefix by full scan. Ties go to the later entry.
pub fn brute_lpm<A>(entries: &[(Ipv4Prefix, A)], ip: Ipv4Addr) -> Option<&A> {
    let mut best: Option<(u8, &A)> = None;
    for (p, a) in entries {
        if matches(p, ip) && best.is_none_or(|(l, _)| p.len() >= l) {
            best = Some((p.len(), a));
        }
    }
    best.map(|(_, a)| a)
}

/// Every (outer table, outer prefix, inner table, inner prefix) where the
/// tables differ and the outer prefix contains the inner one. A prefix
/// present in two tables counts once, lower table id outer.
pub fn brute_conflicts(tables: &[(u16, Vec<Ipv4Prefix>)]) -> BTreeSet<(u16, Ipv4Prefix, u16, Ipv4Prefix)> {
    let mut out = BTreeSet::new();
    for (ta, pa) in tables {
        for (tb, pb) in tables {
            if ta == tb {
                continue;
            }
            for a in pa {
                for b in pb {
                    if contains(a, b) && !(a == b && ta > tb) {
                        out.insert((*ta, *a, *tb, *b));
                    }
                }
            }
        }
    }
    out
}

/// A prefix drawn from a narrow address range so that nesting across
/// tables is common but not universal.
pub fn random_prefix(rng: &mut ChaCha8Rng) -> Ipv4Prefix {
    let len = match rng.random_range(0..10) {
        0 => rng.random_range(4..=12),
        1..=5 => rng.random_range(13..=24),
        _ => rng.random_range(25..=32),
    };
    let addr = 0x0A00_0000 | (rng.random::<u32>() & 0x00FF_FFFF) & (rng.random::<u32>() | 0xFFF0_0000);
    Ipv4Prefix::from_bits(addr & netmask(len), len).unwrap()
}

/// Addresses near the prefixes under test, plus some anywhere.
pub fn random_addr(rng: &mut ChaCha8Rng, near: &[Ipv4Prefix]) -> Ipv4Addr {
    if near.is_empty() || rng.random_range(0..8) == 0 {
        return Ipv4Addr::from(rng.random::<u32>());
    }
    let p = near[rng.random_range(0..near.len())];
    let host = rng.random::<u32>() & !netmask(p.len());
    Ipv4Addr::from(u32::from(p.addr()) | host)
}

/// Random logical tables; prefixes are unique within a table.
pub fn random_tables(rng: &mut ChaCha8Rng, max_tables: usize, max_entries: usize) -> Vec<(u16, Vec<Ipv4Prefix>)> {
    let n = rng.random_range(1..=max_tables);
    (0..n)
        .map(|i| {
            let k = rng.random_range(0..=max_entries);
            let set: BTreeSet<Ipv4Prefix> = (0..k).map(|_| random_prefix(rng)).collect();
            (i as u16 + 1, set.into_iter().collect())
        })
        .collect()
}
