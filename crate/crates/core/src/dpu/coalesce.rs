//! LPM emulated over exact-match hash tables.
//!
//! Each prefix length present becomes one probe; the address is masked to
//! that length and looked up in a single map keyed by (length, bits).
//! Several logical tables can share one map once the control plane has shown
//! that no prefix in one table contains a prefix in another.

use std::collections::{BTreeSet, HashMap};
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::dpu::tables::AclAction;
use crate::prefix::{mask, Ipv4Prefix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no matching prefix")]
pub struct NoMatch;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalescedTable<A> {
    map: HashMap<(u8, u32), A>,
    probes: Vec<u8>,
}

impl<A> CoalescedTable<A> {
    /// Later duplicates of the same prefix replace earlier ones.
    pub fn build(entries: impl IntoIterator<Item = (Ipv4Prefix, A)>) -> Self {
        let mut map = HashMap::new();
        let mut lengths = BTreeSet::new();
        for (p, a) in entries {
            lengths.insert(p.len());
            map.insert((p.len(), p.bits()), a);
        }
        CoalescedTable { map, probes: lengths.into_iter().rev().collect() }
    }

    /// Prefix lengths in probe order, strictly decreasing.
    pub fn probe_list(&self) -> &[u8] {
        &self.probes
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Lookup that also reports how many probes were issued.
    pub fn lookup_counted(&self, ip: Ipv4Addr) -> (Result<&A, NoMatch>, u32) {
        let addr = u32::from(ip);
        for (i, &len) in self.probes.iter().enumerate() {
            if let Some(a) = self.map.get(&(len, addr & mask(len))) {
                return (Ok(a), i as u32 + 1);
            }
        }
        (Err(NoMatch), self.probes.len() as u32)
    }
}

pub fn coalesced_lookup<A>(ct: &CoalescedTable<A>, ip: Ipv4Addr) -> Result<&A, NoMatch> {
    ct.lookup_counted(ip).0
}

/// Prefix-keyed network ACL on the DPU, coalesced when the control plane
/// allowed it, otherwise one probe chain per logical table.
#[derive(Debug, Clone)]
pub enum NetAcl {
    Coalesced(CoalescedTable<AclAction>),
    Separate(Vec<CoalescedTable<AclAction>>),
}

impl Default for NetAcl {
    fn default() -> Self {
        NetAcl::Coalesced(CoalescedTable::build(std::iter::empty()))
    }
}

impl NetAcl {
    /// Longest match across all logical tables, earlier tables winning
    /// ties, plus the probe count. `None` means no rule matched.
    pub fn evaluate(&self, ip: Ipv4Addr) -> (Option<AclAction>, u32) {
        match self {
            NetAcl::Coalesced(ct) => {
                let (r, n) = ct.lookup_counted(ip);
                (r.ok().copied(), n)
            }
            NetAcl::Separate(tables) => {
                let mut probes = 0;
                let mut best: Option<(u8, AclAction)> = None;
                for t in tables {
                    for (i, &len) in t.probes.iter().enumerate() {
                        if let Some(a) = t.map.get(&(len, u32::from(ip) & mask(len))) {
                            probes += i as u32 + 1;
                            if best.is_none_or(|(l, _)| len > l) {
                                best = Some((len, *a));
                            }
                            break;
                        }
                        if i + 1 == t.probes.len() {
                            probes += t.probes.len() as u32;
                        }
                    }
                }
                (best.map(|(_, a)| a), probes)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Ipv4Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn first_probe_hit() {
        let ct = CoalescedTable::build([(p("10.1.0.0/16"), 'a'), (p("11.0.0.0/8"), 'b')]);
        assert_eq!(ct.probe_list(), &[16, 8]);
        let (r, n) = ct.lookup_counted(Ipv4Addr::new(10, 1, 2, 3));
        assert_eq!((r, n), (Ok(&'a'), 1));
    }

    #[test]
    fn second_probe_hit() {
        let ct = CoalescedTable::build([(p("10.0.0.0/8"), 'a'), (p("12.1.0.0/16"), 'b')]);
        let (r, n) = ct.lookup_counted(Ipv4Addr::new(10, 2, 0, 1));
        assert_eq!((r, n), (Ok(&'a'), 2));
    }

    #[test]
    fn miss() {
        let ct = CoalescedTable::build([(p("10.0.0.0/8"), 'a')]);
        assert_eq!(coalesced_lookup(&ct, Ipv4Addr::new(9, 0, 0, 1)), Err(NoMatch));
        let empty: CoalescedTable<char> = CoalescedTable::build([]);
        assert_eq!(coalesced_lookup(&empty, Ipv4Addr::new(9, 0, 0, 1)), Err(NoMatch));
    }

    #[test]
    fn separate_tables_agree_with_coalesced_when_disjoint() {
        let a = [(p("10.0.0.0/16"), AclAction::Deny)];
        let b = [(p("11.0.0.0/16"), AclAction::Allow), (p("11.0.1.0/24"), AclAction::Deny)];
        let sep = NetAcl::Separate(vec![CoalescedTable::build(a), CoalescedTable::build(b)]);
        let co = NetAcl::Coalesced(CoalescedTable::build(a.into_iter().chain(b)));
        for ip in [[10, 0, 5, 5], [11, 0, 1, 9], [11, 0, 2, 9], [12, 0, 0, 0]] {
            let ip = Ipv4Addr::from(ip);
            assert_eq!(sep.evaluate(ip).0, co.evaluate(ip).0, "{ip}");
        }
    }
}
