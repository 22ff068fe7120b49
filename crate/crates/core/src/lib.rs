//! Deterministic packet-level simulator of a cloud gateway built from a
//! folded switching-ASIC pipeline and four DPUs, with a software-only
//! baseline for comparison.
//!
//! Packets take one of three hardware paths: resolved entirely in the ASIC,
//! handed to a DPU whose flow cache hits, or punted to the DPU's ARM slow
//! path which then offloads the decision into the cache.

pub mod asic;
pub mod control;
pub mod dpu;
pub mod hash;
pub mod packet;
pub mod prefix;
pub mod sim;
pub mod verdict;
