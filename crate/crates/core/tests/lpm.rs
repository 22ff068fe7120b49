mod common;

use std::net::Ipv4Addr;

use gwsim::asic::{AsicPipeline, LocalResolution, RouteTarget, RoutingInstanceId};
use gwsim::packet::NexthopIndex;
use gwsim::prefix::{Ipv4Prefix, PrefixTrie};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unique(entries: Vec<(Ipv4Prefix, u32)>) -> Vec<(Ipv4Prefix, u32)> {
    let mut out: Vec<(Ipv4Prefix, u32)> = Vec::new();
    for (p, v) in entries {
        out.retain(|(q, _)| *q != p);
        out.push((p, v));
    }
    out
}

proptest! {
    #[test]
    fn trie_matches_scan(seed in any::<u64>(), n in 0usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = unique((0..n).map(|i| (common::random_prefix(&mut rng), i as u32)).collect());
        let mut trie = PrefixTrie::new();
        for (p, v) in &entries {
            trie.insert(*p, *v);
        }
        let prefixes: Vec<Ipv4Prefix> = entries.iter().map(|e| e.0).collect();
        for _ in 0..200 {
            let ip = common::random_addr(&mut rng, &prefixes);
            prop_assert_eq!(trie.lookup(ip).map(|(_, v)| v), common::brute_lpm(&entries, ip));
        }
    }

    #[test]
    fn route_lookup_matches_scan(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = unique((0..n).map(|i| (common::random_prefix(&mut rng), i as u32 + 1)).collect());
        let mut asic = AsicPipeline::new(LocalResolution::Dpu);
        let id = RoutingInstanceId { table: 1, instance: 0 };
        let mut trie = PrefixTrie::new();
        for (p, v) in &entries {
            trie.insert(*p, RouteTarget::Nexthop(NexthopIndex::new(*v).unwrap()));
        }
        asic.routes.insert(id, trie);
        let prefixes: Vec<Ipv4Prefix> = entries.iter().map(|e| e.0).collect();
        for _ in 0..200 {
            let ip = common::random_addr(&mut rng, &prefixes);
            let got = asic.route_lookup(id, ip).ok().map(|t| match t {
                RouteTarget::Nexthop(nh) => nh.get(),
                _ => unreachable!(),
            });
            prop_assert_eq!(got, common::brute_lpm(&entries, ip).copied());
        }
    }

    #[test]
    fn policy_route_matches_scan(seed in any::<u64>(), n in 0usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<(Ipv4Prefix, u32)> =
            unique((0..n).map(|i| (common::random_prefix(&mut rng), i as u32 + 1)).collect());
        let mut asic = AsicPipeline::new(LocalResolution::Dpu);
        let mut trie = PrefixTrie::new();
        for (p, v) in &entries {
            trie.insert(*p, *v as u16);
        }
        asic.policy.insert(3, trie);
        let prefixes: Vec<Ipv4Prefix> = entries.iter().map(|e| e.0).collect();
        for _ in 0..200 {
            let ip = common::random_addr(&mut rng, &prefixes);
            let want = common::brute_lpm(&entries, ip).map_or(0, |v| *v as u16);
            prop_assert_eq!(asic.policy_route(3, ip), RoutingInstanceId { table: 3, instance: want });
        }
    }
}

#[test]
fn default_route_and_host_route() {
    let entries = vec![("0.0.0.0/0".parse().unwrap(), 1u32), ("10.0.0.7/32".parse().unwrap(), 2)];
    let mut trie = PrefixTrie::new();
    for (p, v) in &entries {
        trie.insert(*p, *v);
    }
    for ip in [Ipv4Addr::new(10, 0, 0, 7), Ipv4Addr::new(10, 0, 0, 8), Ipv4Addr::new(255, 255, 255, 255)] {
        assert_eq!(trie.lookup(ip).map(|(_, v)| v), common::brute_lpm(&entries, ip));
    }
}
