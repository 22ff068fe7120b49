//! Hash-based DPU selection against pinning hot flows to one DPU. A pinned
//! flow misses once on its new DPU; unpinning returns it to a DPU that
//! still holds its entry.

use std::path::Path;

use gwsim::sim::{run, ScenarioConfig};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/pinned.toml");
    let pinned = ScenarioConfig::load(&path).unwrap();
    let mut hashed = pinned.clone();
    hashed.events.clear();

    for (name, cfg) in [("hash", &hashed), ("pinned", &pinned)] {
        let m = run(cfg).unwrap();
        let per: Vec<String> = m.dpus.iter().map(|d| format!("dpu{}={}", d.index, d.packets)).collect();
        println!("{name:<7} slow path {:>5}  {}", m.slow_path_transits(), per.join(" "));
    }
}
