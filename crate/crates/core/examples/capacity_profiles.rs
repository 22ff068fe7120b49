//! Table capacity of the ASIC-only and hybrid gateways, at 1:100 scale.
//! Installs host and net-ACL entries until the control plane refuses.

use std::net::Ipv4Addr;

use gwsim::control::{CapacityProfile, ControlPlane, GatewayVariant, RuleEntry, TableKind};
use gwsim::dpu::tables::{AclAction, VmNcEntry};
use gwsim::prefix::Ipv4Prefix;

fn fill(variant: GatewayVariant, profile: CapacityProfile, kind: TableKind) -> u64 {
    let mut cp = ControlPlane::new(variant, profile);
    let mut n = 0u32;
    loop {
        let r = match kind {
            TableKind::GwHost => RuleEntry::Host(VmNcEntry {
                vm_ip: Ipv4Addr::from(0x0A00_0000 + n),
                route_table_id: 1,
                host: Ipv4Addr::new(100, 64, 0, 1),
            }),
            _ => RuleEntry::NetAcl {
                table: 1,
                prefix: Ipv4Prefix::from_bits(0x0A00_0000 + n, 32).unwrap(),
                action: AclAction::Deny,
            },
        };
        match cp.install_rule(r) {
            Ok(()) => n += 1,
            Err(e) => {
                println!("  {:<10} {:<12} refused entry {}: {e}", variant.as_str(), kind.as_str(), n + 1);
                return u64::from(n);
            }
        }
    }
}

fn main() {
    for kind in [TableKind::GwHost, TableKind::GwNetAcl] {
        let a = fill(GatewayVariant::AsicOnly, CapacityProfile::asic_only().scaled(100), kind);
        let h = fill(GatewayVariant::AsicDpu, CapacityProfile::asic_dpu().scaled(100), kind);
        println!("{}: {h} vs {a} entries ({}x)", kind.as_str(), h / a);
    }
}
