//! Cross-table prefix containment and hash-table coalescing.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dpu::coalesce::CoalescedTable;
use crate::prefix::Ipv4Prefix;

/// Identifier of a logical prefix table.
pub type LogicalTableId = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaggedPrefix {
    pub table: LogicalTableId,
    pub prefix: Ipv4Prefix,
}

/// `outer` covers `inner` and they come from different logical tables, so
/// an address could match both. A prefix present in two tables is one
/// conflict, with the lower table id as `outer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Conflict {
    pub outer: TaggedPrefix,
    pub inner: TaggedPrefix,
}

/// All cross-table containment pairs, sorted and deduplicated.
///
/// Sorting by (address, length) puts every covering prefix before the
/// prefixes it covers, so a stack of open prefixes holds exactly the
/// ancestors of the current one.
pub fn check_collision(entries: &[TaggedPrefix]) -> Vec<Conflict> {
    let mut sorted: Vec<TaggedPrefix> = entries.to_vec();
    sorted.sort_by_key(|t| (t.prefix.bits(), t.prefix.len(), t.table));
    sorted.dedup();

    let mut out = Vec::new();
    let mut stack: Vec<TaggedPrefix> = Vec::new();
    for cur in sorted {
        while stack.last().is_some_and(|top| !top.prefix.covers(&cur.prefix)) {
            stack.pop();
        }
        for anc in &stack {
            if anc.table != cur.table {
                out.push(Conflict { outer: *anc, inner: cur });
            }
        }
        stack.push(cur);
    }
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixTable<A> {
    pub id: LogicalTableId,
    pub entries: Vec<(Ipv4Prefix, A)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoalesceVerdict<A> {
    Coalesced(CoalescedTable<A>),
    Refused(Vec<Conflict>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalescePlan<A> {
    pub constituents: Vec<LogicalTableId>,
    /// Distinct prefix lengths across all constituents, longest first.
    pub probe_list: Vec<u8>,
    pub verdict: CoalesceVerdict<A>,
}

impl<A> CoalescePlan<A> {
    pub fn is_coalesced(&self) -> bool {
        matches!(self.verdict, CoalesceVerdict::Coalesced(_))
    }

    pub fn report(&self) -> PlanReport {
        let (verdict, conflicts) = match &self.verdict {
            CoalesceVerdict::Coalesced(_) => ("coalesced", Vec::new()),
            CoalesceVerdict::Refused(c) => ("refused", c.clone()),
        };
        PlanReport {
            constituents: self.constituents.clone(),
            probe_list: self.probe_list.clone(),
            verdict: verdict.to_string(),
            conflicts,
        }
    }
}

/// Serializable summary of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanReport {
    pub constituents: Vec<LogicalTableId>,
    pub probe_list: Vec<u8>,
    pub verdict: String,
    pub conflicts: Vec<Conflict>,
}

pub fn coalesce_tables<A: Clone>(tables: &[PrefixTable<A>]) -> CoalescePlan<A> {
    let tagged: Vec<TaggedPrefix> =
        tables.iter().flat_map(|t| t.entries.iter().map(|(p, _)| TaggedPrefix { table: t.id, prefix: *p })).collect();
    let lengths: BTreeSet<u8> = tagged.iter().map(|t| t.prefix.len()).collect();
    let conflicts = check_collision(&tagged);
    let verdict = if conflicts.is_empty() {
        CoalesceVerdict::Coalesced(CoalescedTable::build(tables.iter().flat_map(|t| t.entries.iter().cloned())))
    } else {
        CoalesceVerdict::Refused(conflicts)
    };
    CoalescePlan {
        constituents: tables.iter().map(|t| t.id).collect(),
        probe_list: lengths.into_iter().rev().collect(),
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(table: u16, s: &str) -> TaggedPrefix {
        TaggedPrefix { table, prefix: s.parse().unwrap() }
    }

    #[test]
    fn nested_across_tables() {
        let c = check_collision(&[tp(1, "10.0.0.0/8"), tp(2, "10.1.0.0/16")]);
        assert_eq!(c, vec![Conflict { outer: tp(1, "10.0.0.0/8"), inner: tp(2, "10.1.0.0/16") }]);
    }

    #[test]
    fn disjoint_and_empty() {
        assert!(check_collision(&[tp(1, "10.0.0.0/16"), tp(2, "11.0.0.0/16")]).is_empty());
        assert!(check_collision(&[]).is_empty());
    }

    #[test]
    fn same_table_nesting_is_fine() {
        assert!(check_collision(&[tp(1, "10.0.0.0/8"), tp(1, "10.1.0.0/16")]).is_empty());
    }

    #[test]
    fn equal_prefixes_conflict() {
        let c = check_collision(&[tp(2, "10.0.0.0/8"), tp(1, "10.0.0.0/8")]);
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn stack_pops_siblings() {
        // 10.0/16 and 10.1/16 are siblings under 10/8; only the /8 conflicts.
        let c = check_collision(&[tp(1, "10.0.0.0/8"), tp(1, "10.0.0.0/16"), tp(2, "10.1.0.0/16")]);
        assert_eq!(c, vec![Conflict { outer: tp(1, "10.0.0.0/8"), inner: tp(2, "10.1.0.0/16") }]);
    }

    #[test]
    fn plans() {
        let a = PrefixTable {
            id: 1,
            entries: vec![("10.0.0.0/16".parse().unwrap(), 'a'), ("12.0.0.0/8".parse().unwrap(), 'c')],
        };
        let b = PrefixTable { id: 2, entries: vec![("11.0.0.0/24".parse().unwrap(), 'b')] };
        let ok = coalesce_tables(&[a.clone(), b]);
        assert!(ok.is_coalesced());
        assert_eq!(ok.probe_list, vec![24, 16, 8]);

        let bad = PrefixTable { id: 3, entries: vec![("10.0.1.0/24".parse().unwrap(), 'x')] };
        let refused = coalesce_tables(&[a.clone(), bad]);
        match refused.verdict {
            CoalesceVerdict::Refused(c) => {
                assert_eq!(c, vec![Conflict { outer: tp(1, "10.0.0.0/16"), inner: tp(3, "10.0.1.0/24") }])
            }
            _ => panic!("expected refusal"),
        }

        let single = coalesce_tables(&[a]);
        assert!(single.is_coalesced());
        assert_eq!(single.probe_list, vec![16, 8]);
    }
}
