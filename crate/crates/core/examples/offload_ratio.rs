//! Share of packets handled in hardware under a Zipf workload. Pass a
//! packet count to shrink the run; the default is ten million.

use std::path::Path;

use gwsim::sim::{run, ScenarioConfig};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/offload.toml");
    let mut cfg = ScenarioConfig::load(&path).unwrap();
    if let Some(n) = std::env::args().nth(1) {
        cfg.packet_count = n.parse().expect("packet count");
    }
    let m = run(&cfg).unwrap();
    println!("packets       {}", m.injected);
    println!("flows         {}", cfg.workload.flows);
    println!("slow path     {}", m.slow_path_transits());
    println!("offload ratio {:.6}", m.offload_ratio);
    for d in &m.dpus {
        println!(
            "  dpu{} packets {} hits {} installs {} evictions {}",
            d.index, d.packets, d.hits, d.installs, d.evictions
        );
    }
}
