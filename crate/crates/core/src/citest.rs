//! Conditional independence tests as seen by the discovery algorithms.

use crate::data::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::estimator::{self, CITestResult, EstimatorConfig};
use crate::graph::{Slice, SliceNode};

/// Decides `x _||_ y | conditioners` where `y` is a present-slice node and
/// `x` is either a past node (greedy causation entropy) or another present
/// node (instantaneous mutual information).
pub trait CiTest: Sync {
    fn test(&self, x: SliceNode, y: SliceNode, conditioners: &[SliceNode]) -> Result<CITestResult>;

    /// Series names, used for order-free tie breaking.
    fn names(&self) -> &[String];

    fn d(&self) -> usize {
        self.names().len()
    }
}

/// kNN estimate plus local permutation test on a standardized dataset.
///
/// Every test draws its surrogates from a seed derived from the master seed
/// and the *names* of the series involved, so decisions do not change when
/// the dataset's columns are reordered.
pub struct PermutationTester {
    prepared: TimeSeriesDataset,
    cfg: EstimatorConfig,
}

impl PermutationTester {
    pub fn new(ds: &TimeSeriesDataset, cfg: EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        if ds.len() <= cfg.gamma + cfg.k {
            return Err(Error::InsufficientData { needed: cfg.gamma + cfg.k + 1, available: ds.len() });
        }
        Ok(Self { prepared: ds.standardized(cfg.seed), cfg })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    fn tag(&self, n: SliceNode) -> String {
        let slice = match n.slice {
            Slice::Past => "past",
            Slice::Present => "present",
        };
        format!("{}@{}", self.prepared.names()[n.series], slice)
    }

    fn query_seed(&self, x: SliceNode, y: SliceNode, conditioners: &[SliceNode]) -> u64 {
        let mut cond: Vec<String> = conditioners.iter().map(|&c| self.tag(c)).collect();
        cond.sort();
        cond.dedup();
        let key = format!("{}|{}|{}", self.tag(x), self.tag(y), cond.join(","));
        crate::stable_hash(key.as_bytes()) ^ self.cfg.seed.rotate_left(17)
    }
}

impl CiTest for PermutationTester {
    fn test(&self, x: SliceNode, y: SliceNode, conditioners: &[SliceNode]) -> Result<CITestResult> {
        let names = self.prepared.names();
        // instantaneous pairs: the lexicographically smaller name is permuted
        let (x, y) =
            if x.is_present() && y.is_present() && names[y.series] < names[x.series] { (y, x) } else { (x, y) };
        let seed = self.query_seed(x, y, conditioners);
        estimator::test_prepared(&self.prepared, x, y, conditioners, &self.cfg, seed)
    }

    fn names(&self) -> &[String] {
        self.prepared.names()
    }
}
