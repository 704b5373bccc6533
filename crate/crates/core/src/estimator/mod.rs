//! Information-theoretic machinery: lag embedding, kNN conditional mutual
//! information, greedy causation entropy and its significance test.

mod embed;
mod ksg;
mod permutation;

use serde::{Deserialize, Serialize};

pub use embed::{lag_embed, SampleBlock, WindowSpec};
pub use ksg::ksg_cmi;
pub use permutation::{local_permutation_test, CITestResult};

use crate::data::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::graph::SliceNode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Largest lag covered by a past window.
    pub gamma: usize,
    /// Neighbour count of the kNN estimator.
    pub k: usize,
    /// Neighbourhood size of the local permutation scheme.
    pub k_perm: usize,
    pub n_perm: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { gamma: 5, k: 10, k_perm: 5, n_perm: 100, alpha: 0.05, seed: 0 }
    }
}

impl EstimatorConfig {
    /// Defaults with the significance level used when hidden common causes
    /// may be present.
    pub fn hidden_causes() -> Self {
        Self { alpha: 0.1, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma == 0 || self.k == 0 || self.k_perm == 0 || self.n_perm == 0 {
            return Err(Error::InvalidConfig("gamma, k, k_perm and n_perm must all be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// The three blocks of a test of `x _||_ y | conditioners`: the cause (past
/// window or present instant), the present effect, and the conditioning
/// embeddings in the given order.
pub(crate) fn query_blocks(
    ds: &TimeSeriesDataset,
    x: SliceNode,
    y: SliceNode,
    conditioners: &[SliceNode],
    gamma: usize,
) -> Result<(SampleBlock, SampleBlock, SampleBlock)> {
    if !y.is_present() {
        return Err(Error::InvalidConditioner(y));
    }
    if x == y {
        return Err(Error::InvariantViolation(format!("cannot test {x} against itself")));
    }
    let xb = embed::embed_node(ds, x, gamma)?;
    let yb = embed::embed_node(ds, y, gamma)?;
    let mut parts = Vec::with_capacity(conditioners.len());
    let mut seen = Vec::with_capacity(conditioners.len());
    for &c in conditioners {
        if c == x || c == y {
            return Err(Error::InvalidConditioner(c));
        }
        if seen.contains(&c) {
            continue;
        }
        seen.push(c);
        parts.push(embed::embed_node(ds, c, gamma)?);
    }
    let n = xb.rows();
    let zb = SampleBlock::concat(n, &parts)?;
    Ok((xb, yb, zb))
}

fn estimate(
    ds: &TimeSeriesDataset,
    x: SliceNode,
    y: SliceNode,
    cond: &[SliceNode],
    cfg: &EstimatorConfig,
) -> Result<f64> {
    cfg.validate()?;
    let prepared = ds.standardized(cfg.seed);
    let (xb, yb, zb) = query_blocks(&prepared, x, y, cond, cfg.gamma)?;
    ksg_cmi(&yb, &xb, &zb, cfg.k)
}

/// Greedy causation entropy `I(X^q_t ; X^p_{t-gamma:t-1})`.
pub fn gce(ds: &TimeSeriesDataset, cause: usize, effect: usize, cfg: &EstimatorConfig) -> Result<f64> {
    conditional_gce(ds, cause, effect, &[], cfg)
}

/// `I(X^q_t ; X^p_{t-gamma:t-1} | conditioners)`, each conditioner embedded
/// as a past window or a present instant according to its slice.
pub fn conditional_gce(
    ds: &TimeSeriesDataset,
    cause: usize,
    effect: usize,
    conditioners: &[SliceNode],
    cfg: &EstimatorConfig,
) -> Result<f64> {
    estimate(ds, SliceNode::past(cause), SliceNode::present(effect), conditioners, cfg)
}

/// `I(X^q_t ; X^p_t | conditioners)` within the present slice.
pub fn instantaneous_cmi(
    ds: &TimeSeriesDataset,
    p: usize,
    q: usize,
    conditioners: &[SliceNode],
    cfg: &EstimatorConfig,
) -> Result<f64> {
    if p == q {
        return Err(Error::InvariantViolation("instantaneous CMI needs two distinct series".into()));
    }
    estimate(ds, SliceNode::present(p), SliceNode::present(q), conditioners, cfg)
}

/// Permutation test of the edge `x - y` given `conditioners`, on an already
/// standardized dataset.
pub(crate) fn test_prepared(
    prepared: &TimeSeriesDataset,
    x: SliceNode,
    y: SliceNode,
    conditioners: &[SliceNode],
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<CITestResult> {
    let (xb, yb, zb) = query_blocks(prepared, x, y, conditioners, cfg.gamma)?;
    local_permutation_test(&xb, &yb, &zb, cfg, seed)
}
