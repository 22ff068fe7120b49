//! Per-stage SRAM use of the folded pipeline, with the VM-NC table on the
//! ASIC and with it moved to the DPUs.

use std::path::Path;

use gwsim::sim::{placement_report, ScenarioConfig};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in ["placement_baseline", "placement_hybrid"] {
        let cfg = ScenarioConfig::load(dir.join(format!("{name}.toml"))).unwrap();
        let u = placement_report(cfg.placement.as_ref().unwrap()).unwrap();
        println!("{name}");
        for (p, pu) in &u.pipelines {
            let stages: Vec<String> = pu.stages.values().map(|s| format!("{:5.1}", s.sram_pct)).collect();
            println!(
                "  pipe {p}: mean {:5.1}%  saturated {:2}/12  [{}]",
                pu.sram_mean_pct,
                pu.saturated_stages,
                stages.join(" ")
            );
        }
    }
}
