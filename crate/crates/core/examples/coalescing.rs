//! Merging DPU net-ACL hash tables. Tables whose prefixes never nest are
//! coalesced into one table probed longest prefix first; a nesting pair
//! keeps them apart.

use std::net::Ipv4Addr;

use gwsim::control::{check_collision, coalesce_tables, CoalesceVerdict, PrefixTable, TaggedPrefix};
use gwsim::dpu::coalesced_lookup;

fn table(id: u16, prefixes: &[&str]) -> PrefixTable<&'static str> {
    let name: &'static str = Box::leak(format!("t{id}").into_boxed_str());
    PrefixTable { id, entries: prefixes.iter().map(|p| (p.parse().unwrap(), name)).collect() }
}

fn main() {
    let ok = [table(1, &["10.1.0.0/16", "172.16.0.0/12"]), table(2, &["10.2.3.0/24"]), table(3, &["100.64.0.7/32"])];
    let plan = coalesce_tables(&ok);
    println!("{}", serde_json::to_string(&plan.report()).unwrap());
    if let CoalesceVerdict::Coalesced(ct) = &plan.verdict {
        for ip in ["10.1.9.9", "10.2.3.4", "100.64.0.7", "8.8.8.8"] {
            let ip: Ipv4Addr = ip.parse().unwrap();
            let (r, probes) = ct.lookup_counted(ip);
            println!("  {ip:<12} -> {:?} after {probes} probes", r.ok());
            assert_eq!(r.ok(), coalesced_lookup(ct, ip).ok());
        }
    }

    let nested = [table(1, &["10.1.0.0/16"]), table(2, &["10.1.7.0/24"])];
    println!("{}", serde_json::to_string(&coalesce_tables(&nested).report()).unwrap());

    // The check alone, on tagged prefixes.
    let tagged: Vec<TaggedPrefix> = ["0.0.0.0/0", "10.0.0.0/8"]
        .iter()
        .zip([5, 6])
        .map(|(p, table)| TaggedPrefix { table, prefix: p.parse().unwrap() })
        .collect();
    println!("conflicts: {}", serde_json::to_string(&check_collision(&tagged)).unwrap());
}
