//! Table-to-stage placement over the folded pipeline and its resource
//! accounting.
//!
//! Stages are addressed in folded order: pipeline 0 stages 1..=12, then
//! pipeline 1, and so on. Placement is first-fit in the order the tables
//! are given. A table starts strictly after the last stage of every table it
//! depends on and may spill across as many stages as it needs. Exact-match
//! tables draw SRAM blocks, LPM and ternary tables draw TCAM blocks, in
//! multiples of the table's allocation unit. A table also needs its declared
//! PHV containers free in every stage it occupies.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PIPELINES, STAGES_PER_PIPELINE};

/// A stage whose SRAM utilization is above this counts as saturated.
pub const SATURATION_THRESHOLD_PCT: f64 = 95.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Lpm,
    Ternary,
}

/// PHV container counts by width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Phv {
    #[serde(default)]
    pub b8: u32,
    #[serde(default)]
    pub b16: u32,
    #[serde(default)]
    pub b32: u32,
}

impl Phv {
    fn fits(&self, free: &Phv) -> bool {
        self.b8 <= free.b8 && self.b16 <= free.b16 && self.b32 <= free.b32
    }

    fn add(&mut self, o: &Phv) {
        self.b8 += o.b8;
        self.b16 += o.b16;
        self.b32 += o.b32;
    }

    fn minus(&self, o: &Phv) -> Phv {
        Phv { b8: self.b8 - o.b8, b16: self.b16 - o.b16, b32: self.b32 - o.b32 }
    }
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalTable {
    pub name: String,
    pub kind: MatchKind,
    pub entries: u64,
    pub entry_bits: u32,
    #[serde(default)]
    pub depends_on: Vec<String>,
    /// Blocks are granted per stage in multiples of this.
    #[serde(default = "one")]
    pub alloc_unit_blocks: u32,
    #[serde(default)]
    pub phv: Phv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageBudget {
    pub pipeline: u8,
    pub stage: u8,
    pub sram_blocks: u32,
    pub tcam_blocks: u32,
    #[serde(default)]
    pub phv: Phv,
}

impl StageBudget {
    /// The same budget for all 4 x 12 stages.
    pub fn uniform(sram_blocks: u32, tcam_blocks: u32, phv: Phv) -> Vec<StageBudget> {
        (0..PIPELINES)
            .flat_map(|pipeline| {
                (1..=STAGES_PER_PIPELINE).map(move |stage| StageBudget {
                    pipeline,
                    stage,
                    sram_blocks,
                    tcam_blocks,
                    phv,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGeometry {
    pub sram_block_bits: u64,
    pub tcam_block_bits: u64,
}

impl Default for BlockGeometry {
    /// 128-bit x 1024-word SRAM and 44-bit x 512-word TCAM blocks.
    fn default() -> Self {
        BlockGeometry { sram_block_bits: 128 * 1024, tcam_block_bits: 44 * 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub pipeline: u8,
    pub stage: u8,
    pub sram_blocks: u32,
    pub tcam_blocks: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub tables: BTreeMap<String, Vec<Slice>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlacementError {
    #[error("table {table} cannot be placed")]
    Infeasible { table: String },
    #[error("no budget for pipeline {pipeline} stage {stage}")]
    MissingBudget { pipeline: u8, stage: u8 },
    #[error("duplicate budget for pipeline {pipeline} stage {stage}")]
    DuplicateBudget { pipeline: u8, stage: u8 },
    #[error("table {table} depends on {dep}, which is not placed before it")]
    UnknownDependency { table: String, dep: String },
    #[error("table {0} listed twice")]
    DuplicateTable(String),
    #[error("table {0} has a zero allocation unit")]
    ZeroUnit(String),
}

const POSITIONS: usize = PIPELINES as usize * STAGES_PER_PIPELINE as usize;

fn position(pipeline: u8, stage: u8) -> usize {
    usize::from(pipeline) * usize::from(STAGES_PER_PIPELINE) + usize::from(stage - 1)
}

fn coordinates(pos: usize) -> (u8, u8) {
    ((pos / STAGES_PER_PIPELINE as usize) as u8, (pos % STAGES_PER_PIPELINE as usize) as u8 + 1)
}

fn index_budgets(budgets: &[StageBudget]) -> Result<Vec<StageBudget>, PlacementError> {
    let mut slots: Vec<Option<StageBudget>> = vec![None; POSITIONS];
    for b in budgets {
        if b.pipeline >= PIPELINES || b.stage == 0 || b.stage > STAGES_PER_PIPELINE {
            continue;
        }
        let slot = &mut slots[position(b.pipeline, b.stage)];
        if slot.is_some() {
            return Err(PlacementError::DuplicateBudget { pipeline: b.pipeline, stage: b.stage });
        }
        *slot = Some(*b);
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(pos, b)| {
            let (pipeline, stage) = coordinates(pos);
            b.ok_or(PlacementError::MissingBudget { pipeline, stage })
        })
        .collect()
}

/// Blocks a table needs before rounding to its allocation unit.
pub fn blocks_needed(t: &LogicalTable, geometry: &BlockGeometry) -> u64 {
    let bits = t.entries * u64::from(t.entry_bits);
    let block = match t.kind {
        MatchKind::Exact => geometry.sram_block_bits,
        MatchKind::Lpm | MatchKind::Ternary => geometry.tcam_block_bits,
    };
    bits.div_ceil(block)
}

#[derive(Clone, Copy, Default)]
struct Used {
    sram: u32,
    tcam: u32,
    phv: Phv,
}

pub fn place_tables(
    tables: &[LogicalTable],
    budgets: &[StageBudget],
    geometry: &BlockGeometry,
) -> Result<PlacementPlan, PlacementError> {
    let budgets = index_budgets(budgets)?;
    let mut used = vec![Used::default(); POSITIONS];
    let mut last_pos: HashMap<&str, usize> = HashMap::new();
    let mut plan = PlacementPlan::default();

    for t in tables {
        if last_pos.contains_key(t.name.as_str()) {
            return Err(PlacementError::DuplicateTable(t.name.clone()));
        }
        if t.alloc_unit_blocks == 0 {
            return Err(PlacementError::ZeroUnit(t.name.clone()));
        }
        let mut earliest = 0usize;
        for dep in &t.depends_on {
            let p = last_pos
                .get(dep.as_str())
                .ok_or_else(|| PlacementError::UnknownDependency { table: t.name.clone(), dep: dep.clone() })?;
            earliest = earliest.max(p + 1);
        }
        let unit = u64::from(t.alloc_unit_blocks);
        let mut remaining = blocks_needed(t, geometry).div_ceil(unit) * unit;
        let sram = t.kind == MatchKind::Exact;
        let mut slices = Vec::new();

        for pos in earliest..POSITIONS {
            let b = &budgets[pos];
            let u = &mut used[pos];
            if !t.phv.fits(&b.phv.minus(&u.phv)) {
                continue;
            }
            let free = if sram { b.sram_blocks - u.sram } else { b.tcam_blocks - u.tcam };
            let take = remaining.min(u64::from(free) / unit * unit) as u32;
            if take == 0 && remaining > 0 {
                continue;
            }
            if sram {
                u.sram += take;
            } else {
                u.tcam += take;
            }
            u.phv.add(&t.phv);
            let (pipeline, stage) = coordinates(pos);
            slices.push(Slice {
                pipeline,
                stage,
                sram_blocks: if sram { take } else { 0 },
                tcam_blocks: if sram { 0 } else { take },
            });
            remaining -= u64::from(take);
            if remaining == 0 {
                break;
            }
        }
        let Some(last) = slices.last() else {
            return Err(PlacementError::Infeasible { table: t.name.clone() });
        };
        if remaining > 0 {
            return Err(PlacementError::Infeasible { table: t.name.clone() });
        }
        last_pos.insert(&t.name, position(last.pipeline, last.stage));
        plan.tables.insert(t.name.clone(), slices);
    }
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageUtilization {
    pub sram_used: u32,
    pub sram_pct: f64,
    pub tcam_used: u32,
    pub tcam_pct: f64,
    pub phv8_pct: f64,
    pub phv16_pct: f64,
    pub phv32_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineUtilization {
    pub sram_mean_pct: f64,
    pub tcam_mean_pct: f64,
    pub saturated_stages: u32,
    /// Share of stages whose SRAM utilization exceeds the saturation threshold.
    pub saturation_fraction: f64,
    pub phv8_max_pct: f64,
    pub phv16_max_pct: f64,
    pub phv32_max_pct: f64,
    pub stages: BTreeMap<u8, StageUtilization>,
}

/// Keyed by pipeline, then stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    pub pipelines: BTreeMap<u8, PipelineUtilization>,
}

fn pct(used: u32, budget: u32) -> f64 {
    if budget == 0 {
        0.0
    } else {
        100.0 * f64::from(used) / f64::from(budget)
    }
}

/// Per-stage utilization of a plan. PHV demand is charged in every stage a
/// table occupies, so `tables` supplies the per-table demand.
pub fn compute_utilization(plan: &PlacementPlan, tables: &[LogicalTable], budgets: &[StageBudget]) -> Utilization {
    let mut used: BTreeMap<(u8, u8), Used> = BTreeMap::new();
    let demand: HashMap<&str, Phv> = tables.iter().map(|t| (t.name.as_str(), t.phv)).collect();
    for (name, slices) in &plan.tables {
        for s in slices {
            let u = used.entry((s.pipeline, s.stage)).or_default();
            u.sram += s.sram_blocks;
            u.tcam += s.tcam_blocks;
            if let Some(p) = demand.get(name.as_str()) {
                u.phv.add(p);
            }
        }
    }

    let mut pipelines: BTreeMap<u8, PipelineUtilization> = BTreeMap::new();
    for b in budgets {
        let u = used.get(&(b.pipeline, b.stage)).copied().unwrap_or_default();
        let s = StageUtilization {
            sram_used: u.sram,
            sram_pct: pct(u.sram, b.sram_blocks),
            tcam_used: u.tcam,
            tcam_pct: pct(u.tcam, b.tcam_blocks),
            phv8_pct: pct(u.phv.b8, b.phv.b8),
            phv16_pct: pct(u.phv.b16, b.phv.b16),
            phv32_pct: pct(u.phv.b32, b.phv.b32),
        };
        pipelines
            .entry(b.pipeline)
            .or_insert_with(|| PipelineUtilization {
                sram_mean_pct: 0.0,
                tcam_mean_pct: 0.0,
                saturated_stages: 0,
                saturation_fraction: 0.0,
                phv8_max_pct: 0.0,
                phv16_max_pct: 0.0,
                phv32_max_pct: 0.0,
                stages: BTreeMap::new(),
            })
            .stages
            .insert(b.stage, s);
    }
    for p in pipelines.values_mut() {
        let n = p.stages.len() as f64;
        p.sram_mean_pct = p.stages.values().map(|s| s.sram_pct).sum::<f64>() / n;
        p.tcam_mean_pct = p.stages.values().map(|s| s.tcam_pct).sum::<f64>() / n;
        p.saturated_stages = p.stages.values().filter(|s| s.sram_pct > SATURATION_THRESHOLD_PCT).count() as u32;
        p.saturation_fraction = f64::from(p.saturated_stages) / n;
        p.phv8_max_pct = p.stages.values().map(|s| s.phv8_pct).fold(0.0, f64::max);
        p.phv16_max_pct = p.stages.values().map(|s| s.phv16_pct).fold(0.0, f64::max);
        p.phv32_max_pct = p.stages.values().map(|s| s.phv32_pct).fold(0.0, f64::max);
    }
    Utilization { pipelines }
}
