use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::tables::FlowKey;
use crate::hash::{hash_bytes, RUN_SEED};
use crate::packet::{NexthopIndex, SvcId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub key: FlowKey,
    pub nexthop_index: NexthopIndex,
    pub version: u16,
    pub svc_id: SvcId,
    pub last_hit_ns: u64,
    pub hit_count: u64,
    seq: u64,
}

impl FlowEntry {
    pub fn new(key: FlowKey, nexthop_index: NexthopIndex, version: u16, svc_id: SvcId, now_ns: u64) -> Self {
        FlowEntry { key, nexthop_index, version, svc_id, last_hit_ns: now_ns, hit_count: 0, seq: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome", content = "victim")]
pub enum InstallOutcome {
    Installed,
    /// The least recently hit entry was evicted to make room.
    EvictedAndInstalled(FlowKey),
    Rejected,
}

/// Bucket index over the five-tuple followed by the 24-bit VNI.
fn bucket_hash(key: &FlowKey) -> u32 {
    let mut b = [0u8; 16];
    b[..13].copy_from_slice(&key.tuple.to_bytes());
    b[13..].copy_from_slice(&key.vni.get().to_be_bytes()[1..]);
    hash_bytes(&b, RUN_SEED)
}

/// Exact-match flow cache: a direct-mapped base table with one entry per
/// bucket plus an overflow map for keys whose bucket is taken. Total
/// entries never exceed `capacity`.
#[derive(Debug, Clone)]
pub struct FlowCache {
    capacity: usize,
    base: Vec<Option<FlowEntry>>,
    overflow: HashMap<FlowKey, FlowEntry>,
    lru: BTreeSet<(u64, u64, FlowKey)>,
    next_seq: u64,
}

impl FlowCache {
    pub fn new(capacity: usize) -> Self {
        FlowCache { capacity, base: vec![None; capacity], overflow: HashMap::new(), lru: BTreeSet::new(), next_seq: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.lru.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lru.is_empty()
    }

    pub fn overflow_len(&self) -> usize {
        self.overflow.len()
    }

    fn bucket(&self, key: &FlowKey) -> usize {
        bucket_hash(key) as usize % self.base.len()
    }

    pub fn get(&self, key: &FlowKey) -> Option<&FlowEntry> {
        if self.capacity == 0 {
            return None;
        }
        match &self.base[self.bucket(key)] {
            Some(e) if e.key == *key => Some(e),
            _ => self.overflow.get(key),
        }
    }

    fn get_mut(&mut self, key: &FlowKey) -> Option<&mut FlowEntry> {
        if self.capacity == 0 {
            return None;
        }
        let b = self.bucket(key);
        match &mut self.base[b] {
            Some(e) if e.key == *key => Some(e),
            _ => self.overflow.get_mut(key),
        }
    }

    /// Records a hit: bumps the counter and refreshes recency.
    pub fn touch(&mut self, key: &FlowKey, now_ns: u64) {
        let Some(e) = self.get_mut(key) else { return };
        let old = (e.last_hit_ns, e.seq, e.key);
        e.last_hit_ns = now_ns;
        e.hit_count += 1;
        let new = (e.last_hit_ns, e.seq, e.key);
        self.lru.remove(&old);
        self.lru.insert(new);
    }

    fn remove(&mut self, key: &FlowKey) -> Option<FlowEntry> {
        let b = self.bucket(key);
        let e = match &self.base[b] {
            Some(e) if e.key == *key => self.base[b].take(),
            _ => self.overflow.remove(key),
        }?;
        self.lru.remove(&(e.last_hit_ns, e.seq, e.key));
        Some(e)
    }

    /// Entry with the smallest last-hit time; ties go to the older insert.
    pub fn lru_victim(&self) -> Option<FlowKey> {
        self.lru.first().map(|(_, _, k)| *k)
    }

    /// Inserts or overwrites. At capacity the LRU entry is evicted first.
    pub fn insert(&mut self, mut entry: FlowEntry) -> InstallOutcome {
        if self.capacity == 0 {
            return InstallOutcome::Rejected;
        }
        let mut outcome = InstallOutcome::Installed;
        if self.remove(&entry.key).is_none() && self.len() >= self.capacity {
            let victim = self.lru_victim().expect("full cache has a victim");
            self.remove(&victim);
            outcome = InstallOutcome::EvictedAndInstalled(victim);
        }
        entry.seq = self.next_seq;
        self.next_seq += 1;
        self.lru.insert((entry.last_hit_ns, entry.seq, entry.key));
        let b = self.bucket(&entry.key);
        if self.base[b].is_none() {
            self.base[b] = Some(entry);
        } else {
            self.overflow.insert(entry.key, entry);
        }
        outcome
    }

    /// Checks the structural invariants; used by tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        let base: Vec<&FlowEntry> = self.base.iter().flatten().collect();
        let count = base.len() + self.overflow.len();
        if count > self.capacity {
            return Err(format!("{count} entries over capacity {}", self.capacity));
        }
        if count != self.lru.len() {
            return Err(format!("{count} entries but {} recency records", self.lru.len()));
        }
        for e in &base {
            if self.overflow.contains_key(&e.key) {
                return Err(format!("{:?} in both base and overflow", e.key));
            }
            if self.bucket(&e.key) != self.base.iter().position(|x| x.as_ref() == Some(*e)).unwrap() {
                return Err(format!("{:?} in wrong bucket", e.key));
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &FlowEntry> {
        self.base.iter().flatten().chain(self.overflow.values())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{FiveTuple, Vni, PROTO_UDP};
    use std::net::Ipv4Addr;

    fn key(i: u16) -> FlowKey {
        FlowKey {
            vni: Vni::new(1).unwrap(),
            tuple: FiveTuple::new(Ipv4Addr::new(10, 0, 0, 1), Ipv4Addr::new(10, 0, 0, 2), i, 53, PROTO_UDP),
        }
    }

    fn entry(i: u16, now: u64) -> FlowEntry {
        FlowEntry::new(key(i), NexthopIndex::new(u32::from(i)).unwrap(), 1, 1, now)
    }

    #[test]
    fn install_into_empty() {
        let mut c = FlowCache::new(4);
        assert_eq!(c.insert(entry(1, 0)), InstallOutcome::Installed);
        assert_eq!(c.get(&key(1)).unwrap().nexthop_index.get(), 1);
        c.check_invariants().unwrap();
    }

    #[test]
    fn full_cache_evicts_stale_entry() {
        let mut c = FlowCache::new(3);
        c.insert(entry(1, 10));
        c.insert(entry(2, 20));
        c.insert(entry(3, 30));
        c.touch(&key(1), 40);
        // key 2 now has the oldest last hit.
        assert_eq!(c.insert(entry(4, 50)), InstallOutcome::EvictedAndInstalled(key(2)));
        assert!(c.get(&key(2)).is_none());
        assert_eq!(c.len(), 3);
        c.check_invariants().unwrap();
    }

    #[test]
    fn ties_broken_by_insertion_order() {
        let mut c = FlowCache::new(2);
        c.insert(entry(7, 5));
        c.insert(entry(3, 5));
        assert_eq!(c.lru_victim(), Some(key(7)));
    }

    #[test]
    fn overwrite_keeps_single_copy() {
        let mut c = FlowCache::new(2);
        c.insert(entry(1, 0));
        let mut e = entry(1, 1);
        e.version = 2;
        assert_eq!(c.insert(e), InstallOutcome::Installed);
        assert_eq!(c.len(), 1);
        assert_eq!(c.get(&key(1)).unwrap().version, 2);
        c.check_invariants().unwrap();
    }

    #[test]
    fn zero_capacity_rejects() {
        let mut c = FlowCache::new(0);
        assert_eq!(c.insert(entry(1, 0)), InstallOutcome::Rejected);
        assert!(c.get(&key(1)).is_none());
    }

    #[test]
    fn collisions_go_to_overflow() {
        let mut c = FlowCache::new(1);
        c.insert(entry(1, 0));
        assert_eq!(c.overflow_len(), 0);
        let mut c = FlowCache::new(64);
        for i in 0..64 {
            c.insert(entry(i, u64::from(i)));
        }
        assert!(c.overflow_len() > 0, "64 keys into 64 buckets should collide");
        for i in 0..64 {
            assert!(c.get(&key(i)).is_some());
        }
        c.check_invariants().unwrap();
    }
}
