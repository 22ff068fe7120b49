//! Scenario files. TOML, versioned by `schema_version`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asic::placement::{BlockGeometry, LogicalTable, Phv, StageBudget};
use crate::asic::{PIPELINES, STAGES_PER_PIPELINE};
use crate::control::{
    coalesce_tables, CapacityProfile, CoalescePlan, GatewayVariant, LogicalTableId, PrefixTable, ProfileName,
    RuleEntry, ServiceObject,
};
use crate::packet::SvcId;
use crate::prefix::Ipv4Prefix;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    SchemaVersion(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Per-component service times, nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyParams {
    /// Full ASIC traversal, split evenly across the pre- and post-DPU halves.
    pub asic_ns: u64,
    pub dpu_fast_ns: u64,
    pub slow_path_ns: u64,
}

impl Default for LatencyParams {
    fn default() -> Self {
        LatencyParams { asic_ns: 2_000, dpu_fast_ns: 8_000, slow_path_ns: 100_000 }
    }
}

/// RSS-hashed x86 cores, each a FIFO of `queue_depth` packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftwareParams {
    pub cores: u32,
    pub per_core_pps: u64,
    pub queue_depth: u32,
}

impl Default for SoftwareParams {
    fn default() -> Self {
        SoftwareParams { cores: 16, per_core_pps: 700_000, queue_depth: 4096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpuParams {
    /// Flow-cache entries per DPU.
    pub cache_capacity: usize,
}

impl Default for DpuParams {
    fn default() -> Self {
        DpuParams { cache_capacity: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySpec {
    /// Defaults to the profile matching the variant.
    pub profile: Option<ProfileName>,
    /// Divisor applied to every limit.
    #[serde(default = "one")]
    pub scale: u64,
}

fn one() -> u64 {
    1
}

impl Default for CapacitySpec {
    fn default() -> Self {
        CapacitySpec { profile: None, scale: 1 }
    }
}

/// Synthetic addressing plan the rules and workload are generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FabricSpec {
    pub tenants: u16,
    pub vms_per_tenant: u32,
    pub hosts: u32,
    pub vteps: u8,
    pub remote_nexthops: u32,
}

impl Default for FabricSpec {
    fn default() -> Self {
        FabricSpec { tenants: 4, vms_per_tenant: 1024, hosts: 256, vteps: 8, remote_nexthops: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Popularity {
    Uniform,
    Zipf(f64),
}

/// Fractions of flows by destination. Must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Locality {
    pub local: f64,
    pub cross_region: f64,
    pub control: f64,
}

impl Default for Locality {
    fn default() -> Self {
        Locality { local: 0.8, cross_region: 0.15, control: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSpec {
    pub flows: u32,
    /// Packets per flow.
    pub distribution: Popularity,
    /// How flows are spread over tenants.
    pub tenant_distribution: Popularity,
    pub locality: Locality,
    pub payload_len: u32,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            flows: 100_000,
            distribution: Popularity::Zipf(1.0),
            tenant_distribution: Popularity::Uniform,
            locality: Locality::default(),
            payload_len: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pin {
    /// Workload flow id; 0 is the most popular flow.
    pub flow: u32,
    pub dpu: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventAction {
    BumpVersion {
        svc_id: SvcId,
        #[serde(default)]
        rules: Vec<RuleEntry>,
    },
    SetDistribution {
        #[serde(default)]
        pins: Vec<Pin>,
    },
    InstallRules {
        rules: Vec<RuleEntry>,
    },
}

/// Control-plane action applied just before packet `at_packet` is injected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub at_packet: u64,
    #[serde(flatten)]
    pub action: EventAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformBudget {
    pub sram_blocks: u32,
    pub tcam_blocks: u32,
    #[serde(default)]
    pub phv: Phv,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    #[serde(default)]
    pub geometry: BlockGeometry,
    /// Applied to every stage not listed in `budgets`.
    pub default_budget: Option<UniformBudget>,
    #[serde(default)]
    pub budgets: Vec<StageBudget>,
    pub tables: Vec<LogicalTable>,
}

impl PlacementSpec {
    /// One budget per stage, explicit entries overriding the default.
    pub fn stage_budgets(&self) -> Vec<StageBudget> {
        let Some(d) = self.default_budget else { return self.budgets.clone() };
        let mut out = StageBudget::uniform(d.sram_blocks, d.tcam_blocks, d.phv);
        for b in &self.budgets {
            if let Some(slot) = out.iter_mut().find(|s| s.pipeline == b.pipeline && s.stage == b.stage) {
                *slot = *b;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub variant: GatewayVariant,
    #[serde(default)]
    pub seed: u64,
    pub packet_count: u64,
    pub send_rate_pps: u64,
    #[serde(default = "default_mtu")]
    pub mtu: u32,
    #[serde(default)]
    pub latency: LatencyParams,
    #[serde(default)]
    pub software: SoftwareParams,
    #[serde(default)]
    pub dpu: DpuParams,
    #[serde(default)]
    pub capacity: CapacitySpec,
    #[serde(default)]
    pub fabric: FabricSpec,
    #[serde(default)]
    pub workload: WorkloadSpec,
    /// Defaults to one service per tenant at version 1.
    #[serde(default)]
    pub services: Vec<ServiceObject>,
    /// Installed after the generated fabric rules.
    #[serde(default)]
    pub rules: Vec<RuleEntry>,
    #[serde(default)]
    pub events: Vec<ScheduledEvent>,
    pub placement: Option<PlacementSpec>,
}

fn default_mtu() -> u32 {
    1500
}

impl ScenarioConfig {
    /// A small valid scenario, for examples and tests to modify.
    pub fn new(variant: GatewayVariant, packet_count: u64, flows: u32) -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            variant,
            seed: 1,
            packet_count,
            send_rate_pps: 10_000_000,
            mtu: default_mtu(),
            latency: LatencyParams::default(),
            software: SoftwareParams::default(),
            dpu: DpuParams::default(),
            capacity: CapacitySpec { profile: None, scale: 1 },
            fabric: FabricSpec::default(),
            workload: WorkloadSpec { flows, ..WorkloadSpec::default() },
            services: Vec::new(),
            rules: Vec::new(),
            events: Vec::new(),
            placement: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn capacity_profile(&self) -> CapacityProfile {
        let name = self.capacity.profile.unwrap_or(match self.variant {
            GatewayVariant::SoftwareOnly => ProfileName::Unbounded,
            GatewayVariant::AsicOnly => ProfileName::AsicOnly,
            GatewayVariant::AsicDpu => ProfileName::AsicDpu,
        });
        CapacityProfile::named(name).scaled(self.capacity.scale)
    }

    /// Services as configured, or one per tenant bound to its table.
    pub fn effective_services(&self) -> Vec<ServiceObject> {
        if !self.services.is_empty() {
            return self.services.clone();
        }
        (0..self.fabric.tenants).map(|t| ServiceObject { svc_id: t + 1, version: 1, tables: vec![t + 1] }).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion(self.schema_version));
        }
        if self.send_rate_pps == 0 {
            return invalid("send_rate_pps must be positive");
        }
        if self.mtu == 0 {
            return invalid("mtu must be positive");
        }
        if self.capacity.scale == 0 {
            return invalid("capacity.scale must be positive");
        }
        let s = &self.software;
        if s.cores == 0 || s.per_core_pps == 0 || s.queue_depth == 0 {
            return invalid("software cores, per_core_pps and queue_depth must be positive");
        }
        let f = &self.fabric;
        if f.tenants == 0 || f.hosts == 0 || f.vteps == 0 || f.remote_nexthops == 0 {
            return invalid("fabric counts must be positive");
        }
        if f.vteps > 100 {
            return invalid("at most 100 VTEPs");
        }
        if f.vms_per_tenant < 2 || f.vms_per_tenant > 65_000 {
            return invalid("vms_per_tenant must be in 2..=65000");
        }
        if f.hosts > 60_000 || f.remote_nexthops > 200 {
            return invalid("hosts at most 60000, remote_nexthops at most 200");
        }
        let w = &self.workload;
        if w.flows == 0 {
            return invalid("workload.flows must be positive");
        }
        if self.packet_count > 0 && self.packet_count < u64::from(w.flows) {
            return invalid("packet_count must be at least workload.flows so every flow appears");
        }
        let l = &w.locality;
        if [l.local, l.cross_region, l.control].iter().any(|x| !(0.0..=1.0).contains(x)) {
            return invalid("locality fractions must lie in [0, 1]");
        }
        if (l.local + l.cross_region + l.control - 1.0).abs() > 1e-9 {
            return invalid("locality fractions must sum to 1");
        }
        for p in [w.distribution, w.tenant_distribution] {
            if let Popularity::Zipf(s) = p {
                if !(s.is_finite() && s >= 0.0) {
                    return invalid("zipf exponent must be finite and non-negative");
                }
            }
        }
        if w.payload_len == 0 {
            return invalid("payload_len must be positive");
        }
        for e in &self.events {
            if let EventAction::SetDistribution { pins } = &e.action {
                if let Some(p) = pins.iter().find(|p| p.flow >= w.flows) {
                    return invalid(format!("pin references flow {} of {}", p.flow, w.flows));
                }
            }
        }
        if let Some(p) = &self.placement {
            let budgets = p.stage_budgets();
            let expected = usize::from(PIPELINES) * usize::from(STAGES_PER_PIPELINE);
            if budgets.len() != expected {
                return invalid(format!("placement needs {expected} stage budgets, got {}", budgets.len()));
            }
        }
        Ok(())
    }
}

/// Input of the standalone coalescing check: logical tables of prefixes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefixRulesFile {
    pub tables: Vec<PrefixRulesTable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefixRulesTable {
    pub id: LogicalTableId,
    pub prefixes: Vec<Ipv4Prefix>,
}

impl PrefixRulesFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Ok(toml::from_str(&text)?)
    }

    pub fn plan(&self) -> CoalescePlan<()> {
        let tables: Vec<PrefixTable<()>> = self
            .tables
            .iter()
            .map(|t| PrefixTable { id: t.id, entries: t.prefixes.iter().map(|p| (*p, ())).collect() })
            .collect();
        coalesce_tables(&tables)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
variant = "asic_dpu"
packet_count = 1000
send_rate_pps = 10000000

[workload]
flows = 10
distribution = { zipf = 1.0 }
locality = { local = 1.0, cross_region = 0.0, control = 0.0 }

[[events]]
at_packet = 500
action = "bump_version"
svc_id = 1

[[events]]
at_packet = 600
action = "set_distribution"
pins = [{ flow = 0, dpu = 2 }]
"#;

    #[test]
    fn parses_minimal() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.latency, LatencyParams::default());
        assert_eq!(c.events.len(), 2);
        assert_eq!(c.events[0].action, EventAction::BumpVersion { svc_id: 1, rules: vec![] });
        assert_eq!(c.effective_services().len(), 4);
    }

    #[test]
    fn roundtrips() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        let bad_version = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(ScenarioConfig::from_toml(&bad_version), Err(ConfigError::SchemaVersion(2))));
        let bad_rate = MINIMAL.replace("send_rate_pps = 10000000", "send_rate_pps = 0");
        assert!(matches!(ScenarioConfig::from_toml(&bad_rate), Err(ConfigError::Invalid(_))));
        let bad_mix = MINIMAL.replace("local = 1.0", "local = 0.9");
        assert!(matches!(ScenarioConfig::from_toml(&bad_mix), Err(ConfigError::Invalid(_))));
        let unknown = format!("{MINIMAL}\nbogus = 1\n");
        assert!(matches!(ScenarioConfig::from_toml(&unknown), Err(ConfigError::Parse(_))));
    }
}
