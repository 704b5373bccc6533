//! Causal discovery for multivariate time series with greedy causation
//! entropy, on extended summary graphs.
//!
//! The pipeline is: [`skeleton::build_skeleton`] with a [`citest::CiTest`],
//! then either [`orient_pc`] (no hidden common causes) or [`orient_fci`]
//! (hidden common causes allowed).

pub mod citest;
pub mod data;
pub mod error;
pub mod estimator;
pub mod evaluate;
pub mod graph;
pub mod orient_fci;
pub mod orient_pc;
pub mod simulate;
pub mod skeleton;

pub use citest::{CiTest, PermutationTester};
pub use data::TimeSeriesDataset;
pub use error::{Error, Result};
pub use estimator::{conditional_gce, gce, instantaneous_cmi, CITestResult, EstimatorConfig};
pub use graph::{Edge, ExtendedSummaryGraph, Mark, Sepset, SepsetTable, Slice, SliceNode, SummaryGraph};
pub use orient_fci::fcigce;
pub use orient_pc::{pcgce, Discovery};
pub use skeleton::{build_skeleton, SkeletonOptions};

/// 64-bit FNV-1a. Stable across platforms and releases, unlike the std
/// hashers, so it can seed per-test random streams.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
