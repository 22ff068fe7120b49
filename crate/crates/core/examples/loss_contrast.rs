//! Packet loss against run length at 10 Mpps for the three gateways. The
//! software gateway pins each flow to one core, so the elephant flows
//! overrun their cores once the queues fill.

use std::path::Path;

use gwsim::control::GatewayVariant;
use gwsim::sim::{run, ScenarioConfig};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/loss_software.toml");
    let base = ScenarioConfig::load(&path).unwrap();
    let max: u64 = std::env::args().nth(1).map_or(base.packet_count, |s| s.parse().expect("packet count"));

    println!("{:>10}  {:>12}  {:>10}  {:>10}", "packets", "software", "asic", "asic+dpu");
    let mut n = 1_000u64;
    while n <= max {
        let mut row = Vec::new();
        for v in [GatewayVariant::SoftwareOnly, GatewayVariant::AsicOnly, GatewayVariant::AsicDpu] {
            let mut cfg = base.clone();
            cfg.variant = v;
            cfg.packet_count = n;
            cfg.workload.flows = cfg.workload.flows.min(n as u32);
            row.push(run(&cfg).unwrap().loss_ratio);
        }
        println!("{n:>10}  {:>11.4}%  {:>9.4}%  {:>9.4}%", row[0] * 100.0, row[1] * 100.0, row[2] * 100.0);
        n *= 10;
    }
}
