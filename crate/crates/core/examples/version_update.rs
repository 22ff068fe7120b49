//! Bumping a service version invalidates its cached flows at once. Each
//! stale flow takes the slow path exactly one more time.

use std::path::Path;

use gwsim::sim::{run, ScenarioConfig};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/version_update.toml");
    let mut cfg = ScenarioConfig::load(&path).unwrap();

    let before = {
        let mut c = cfg.clone();
        c.events.clear();
        run(&c).unwrap()
    };
    let after = run(&cfg).unwrap();
    println!("without bump: slow path {:?}", before.slow_path_by_reason);
    println!("with bump:    slow path {:?}", after.slow_path_by_reason);

    // Bumping twice before any packet sees the first version is no worse.
    let first = cfg.events[0].clone();
    cfg.events.push(first);
    let twice = run(&cfg).unwrap();
    println!("double bump:  slow path {:?}  version bumps {}", twice.slow_path_by_reason, twice.control.version_bumps);
}
