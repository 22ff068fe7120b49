use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gwsim::sim::config::PrefixRulesFile;
use gwsim::sim::metrics::{metrics_report, ReportFormat};
use gwsim::sim::trace::JsonlSink;
use gwsim::sim::{placement_report, run_with_trace, ConfigError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "gwsim", version, about = "Packet-level simulator of an ASIC + DPU cloud gateway")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and report metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON-lines trace output, one record per packet.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Metrics output; `.csv` selects CSV, anything else JSON. Defaults to JSON on stdout.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Place the scenario's ASIC tables and print utilization as JSON.
    Placement {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check whether prefix tables can be coalesced and print the verdict as JSON.
    OracleCheck {
        #[arg(long)]
        rules: PathBuf,
    },
}

enum Failure {
    Config(ConfigError),
    Io(String, io::Error),
    Placement(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 3,
            Failure::Io(..) => 4,
            Failure::Placement(_) => 5,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => format!("config error: {e}"),
            Failure::Io(what, e) => format!("io error ({what}): {e}"),
            Failure::Placement(e) => format!("placement error: {e}"),
        }
    }
}

fn io_err(what: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(what.display().to_string(), e)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| Failure::Io("stdout".into(), e.into()))?;
    writeln!(out).map_err(|e| Failure::Io("stdout".into(), e))
}

fn execute(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run { config, seed, trace, metrics } => {
            let mut cfg = ScenarioConfig::load(&config).map_err(Failure::Config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let m = match &trace {
                Some(path) => {
                    let f = File::create(path).map_err(io_err(path))?;
                    let mut sink = JsonlSink::new(BufWriter::new(f));
                    let m = run_with_trace(&cfg, Some(&mut sink)).map_err(Failure::Config)?;
                    sink.finish().map_err(io_err(path))?;
                    m
                }
                None => run_with_trace(&cfg, None).map_err(Failure::Config)?,
            };
            match &metrics {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
                    metrics_report(&m, ReportFormat::for_path(path), &mut w).map_err(io_err(path))?;
                    w.flush().map_err(io_err(path))
                }
                None => metrics_report(&m, ReportFormat::Json, &mut io::stdout().lock())
                    .map_err(|e| Failure::Io("stdout".into(), e)),
            }
        }
        Cmd::Placement { config } => {
            let cfg = ScenarioConfig::load(&config).map_err(Failure::Config)?;
            let spec = cfg
                .placement
                .as_ref()
                .ok_or_else(|| Failure::Config(ConfigError::Invalid("no [placement] section".into())))?;
            let u = placement_report(spec).map_err(|e| Failure::Placement(e.to_string()))?;
            print_json(&u)
        }
        Cmd::OracleCheck { rules } => {
            let file = PrefixRulesFile::load(&rules).map_err(Failure::Config)?;
            print_json(&file.plan().report())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gwsim: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
