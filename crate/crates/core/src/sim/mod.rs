//! Scenario execution: configuration, workload generation, the software
//! baseline, metrics and per-packet traces.

pub mod config;
pub mod fabric;
pub mod gateway;
pub mod metrics;
pub mod software;
pub mod trace;
pub mod workload;

pub use config::{ConfigError, ScenarioConfig};
pub use gateway::{placement_report, run, run_with_trace, Gateway, PacketOutcome};
pub use metrics::{metrics_report, ReportFormat, RunMetrics};
pub use software::software_core_model;
pub use trace::{trace_query, TraceRecord};
pub use workload::generate_workload;
