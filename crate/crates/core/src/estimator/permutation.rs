//! Local permutation significance test for (conditional) mutual information.
//!
//! Surrogates permute the rows of the tested block only among the
//! `k_perm` nearest neighbours (supremum norm) of each sample in the
//! conditioning block, drawing neighbours so that as few indices as
//! possible repeat. Without a conditioning block the shuffle is uniform.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::embed::SampleBlock;
use super::ksg::{check_inputs, DistanceMatrix, MatrixEstimator};
use super::EstimatorConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CITestResult {
    /// Estimated (conditional) mutual information in nats.
    pub statistic: f64,
    pub p_value: f64,
    pub independent: bool,
    pub n_used: usize,
}

impl CITestResult {
    /// Outcome reported for degenerate (constant) inputs.
    pub fn degenerate(n_used: usize) -> Self {
        Self { statistic: 0.0, p_value: 1.0, independent: true, n_used }
    }
}

/// `k_perm` nearest rows of every row in `z`, nearest first (ties by index,
/// so the row itself leads unless it has exact duplicates).
fn neighbourhoods(z: &DistanceMatrix, k_perm: usize) -> Vec<Vec<usize>> {
    let n = z.len();
    let k_perm = k_perm.min(n);
    let mut idx: Vec<usize> = Vec::with_capacity(n);
    (0..n)
        .map(|i| {
            let row = z.row(i);
            idx.clear();
            idx.extend(0..n);
            let key = |&a: &usize, &b: &usize| row[a].total_cmp(&row[b]).then(a.cmp(&b));
            if k_perm < n {
                idx.select_nth_unstable_by(k_perm - 1, key);
            }
            let mut nb = idx[..k_perm].to_vec();
            nb.sort_by(key);
            nb
        })
        .collect()
}

fn restricted_permutation(neighbours: &mut [Vec<usize>], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = neighbours.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for nb in neighbours.iter_mut() {
        nb.shuffle(rng);
    }
    let mut used = vec![false; n];
    let mut perm = vec![0; n];
    for &i in &order {
        let nb = &neighbours[i];
        let mut m = 0;
        let mut pick = nb[0];
        while used[pick] && m + 1 < nb.len() {
            m += 1;
            pick = nb[m];
        }
        perm[i] = pick;
        used[pick] = true;
    }
    perm
}

/// Tests `permuted _||_ other | z`. The p-value is
/// `(1 + #{surrogate >= observed}) / (1 + n_perm)` and the decision is
/// `independent <=> p > alpha`. Deterministic given `seed`.
pub fn local_permutation_test(
    permuted: &SampleBlock,
    other: &SampleBlock,
    z: &SampleBlock,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<CITestResult> {
    cfg.validate()?;
    let n = match check_inputs(permuted, other, z, cfg.k) {
        Ok(n) => n,
        Err(Error::DegenerateData(_)) => return Ok(CITestResult::degenerate(permuted.rows())),
        Err(e) => return Err(e),
    };
    let est = MatrixEstimator::new(permuted, other, z, cfg.k);
    let identity: Vec<usize> = (0..n).collect();
    let observed = est.estimate(&identity, &mut vec![0.0; cfg.k]);

    // all surrogates are drawn up front so the result is independent of
    // how the statistic evaluations are scheduled
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Vec<usize>> = match est.z_matrix() {
        Some(zm) => {
            let mut nb = neighbourhoods(zm, cfg.k_perm);
            (0..cfg.n_perm).map(|_| restricted_permutation(&mut nb, &mut rng)).collect()
        }
        None => (0..cfg.n_perm)
            .map(|_| {
                let mut p = identity.clone();
                p.shuffle(&mut rng);
                p
            })
            .collect(),
    };
    let exceed = perms
        .par_iter()
        .map_init(|| vec![0.0; cfg.k], |best, perm| est.estimate(perm, best))
        .filter(|&s| s >= observed)
        .count();
    let p_value = (1 + exceed) as f64 / (1 + cfg.n_perm) as f64;
    Ok(CITestResult { statistic: observed, p_value, independent: p_value > cfg.alpha, n_used: n })
}
