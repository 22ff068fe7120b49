//! Per-packet traces: one record per packet with every hop, written as
//! JSON lines and queried back by trace id.

use std::io::BufReader;
use std::path::Path;

use gwsim::sim::trace::{read_traces, JsonlSink};
use gwsim::sim::{run_with_trace, trace_query, ScenarioConfig};
use gwsim::verdict::PathKind;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/mixed_traffic.toml");
    let cfg = ScenarioConfig::load(&path).unwrap();

    let mut sink = JsonlSink::new(Vec::new());
    let m = run_with_trace(&cfg, Some(&mut sink)).unwrap();
    let bytes = sink.finish().unwrap();
    let traces = read_traces(BufReader::new(&bytes[..])).unwrap();
    println!("{} packets, {} trace records, {} bytes of JSONL", m.injected, traces.len(), bytes.len());

    for kind in PathKind::ALL {
        let Some(first) = traces.iter().find(|r| r.disposition.path == kind) else { continue };
        let r = trace_query(&traces, first.trace_id).unwrap();
        println!("\n{} (trace {})", kind.as_str(), r.trace_id);
        for h in &r.hops {
            println!("  {:>7} ns  {:<6} {:<12} {}", h.t_ns, h.component, h.stage, h.action);
        }
    }
    println!("\nunknown id: {}", trace_query(&traces, u64::MAX).unwrap_err());
}
