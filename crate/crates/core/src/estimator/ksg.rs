//! k-nearest-neighbour (conditional) mutual information under the
//! supremum norm.
//!
//! With `eps_i` the distance from sample `i` to its k-th neighbour in the
//! joint space and every marginal count taken over points strictly closer
//! than `eps_i` (the sample itself included):
//!
//! * `I(X;Y|Z) = psi(k) + mean_i[psi(n_z) - psi(n_xz) - psi(n_yz)]`
//! * `I(X;Y)   = psi(k) + psi(n) - mean_i[psi(n_x) + psi(n_y)]`

use crate::error::{Error, Result};

use super::embed::SampleBlock;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `psi(m)` for integer `m` in `0..=max`; index 0 is unused.
pub(crate) fn digamma_table(max: usize) -> Vec<f64> {
    let mut t = vec![f64::NEG_INFINITY; max + 1];
    if max >= 1 {
        t[1] = -EULER_GAMMA;
    }
    for m in 2..=max {
        t[m] = t[m - 1] + 1.0 / (m - 1) as f64;
    }
    t
}

pub(crate) fn check_inputs(x: &SampleBlock, y: &SampleBlock, z: &SampleBlock, k: usize) -> Result<usize> {
    let n = x.rows();
    for b in [y, z] {
        if b.rows() != n {
            return Err(Error::RowMismatch(n, b.rows()));
        }
    }
    if k == 0 || n <= k {
        return Err(Error::InsufficientSamples { n, k });
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidConfig("estimation needs non-empty x and y blocks".into()));
    }
    let mut offset = 0;
    for b in [x, y, z] {
        if let Some(c) = b.constant_column() {
            return Err(Error::DegenerateData(offset + c));
        }
        offset += b.width();
    }
    Ok(n)
}

/// Reusable per-row scratch space.
pub(crate) struct RowScratch {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    best: Vec<f64>,
}

impl RowScratch {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Self { dx: vec![0.0; n], dy: vec![0.0; n], dz: vec![0.0; n], best: vec![f64::INFINITY; k] }
    }
}

/// Per-row contribution given a fill function that writes the three
/// marginal distances from row `i` to every row `j`.
#[inline]
pub(crate) fn row_term(
    i: usize,
    k: usize,
    conditional: bool,
    psi: &[f64],
    scratch: &mut RowScratch,
    fill: impl FnOnce(&mut [f64], &mut [f64], &mut [f64]),
) -> f64 {
    let RowScratch { dx, dy, dz, best } = scratch;
    fill(dx, dy, dz);
    best.iter_mut().for_each(|b| *b = f64::INFINITY);
    let last = k - 1;
    for j in 0..dx.len() {
        if j == i {
            continue;
        }
        let joint = dx[j].max(dy[j]).max(dz[j]);
        if joint < best[last] {
            let mut pos = last;
            while pos > 0 && best[pos - 1] > joint {
                best[pos] = best[pos - 1];
                pos -= 1;
            }
            best[pos] = joint;
        }
    }
    let eps = best[last];
    if conditional {
        let (mut n_xz, mut n_yz, mut n_z) = (0usize, 0usize, 0usize);
        for j in 0..dx.len() {
            let z = dz[j];
            n_xz += (dx[j].max(z) < eps) as usize;
            n_yz += (dy[j].max(z) < eps) as usize;
            n_z += (z < eps) as usize;
        }
        // the sample itself is always inside; guard exact ties at eps == 0
        psi[n_z.max(1)] - psi[n_xz.max(1)] - psi[n_yz.max(1)]
    } else {
        let (mut n_x, mut n_y) = (0usize, 0usize);
        for j in 0..dx.len() {
            n_x += (dx[j] < eps) as usize;
            n_y += (dy[j] < eps) as usize;
        }
        -psi[n_x.max(1)] - psi[n_y.max(1)]
    }
}

pub(crate) fn finish(sum: f64, n: usize, k: usize, conditional: bool, psi: &[f64]) -> f64 {
    let mean = sum / n as f64;
    if conditional {
        psi[k] + mean
    } else {
        psi[k] + psi[n] + mean
    }
}

#[inline]
fn fill_row(block: &SampleBlock, i: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for col in block.columns() {
        let ci = col[i];
        for (o, &cj) in out.iter_mut().zip(col) {
            let d = (ci - cj).abs();
            let cur = *o;
            *o = if d > cur { d } else { cur };
        }
    }
}

/// Estimates `I(x; y | z)` in nats; an empty `z` gives plain mutual information.
pub fn ksg_cmi(x: &SampleBlock, y: &SampleBlock, z: &SampleBlock, k: usize) -> Result<f64> {
    let n = check_inputs(x, y, z, k)?;
    let conditional = !z.is_empty();
    let psi = digamma_table(n + 1);
    let mut scratch = RowScratch::new(n, k);
    let mut sum = 0.0;
    for i in 0..n {
        sum += row_term(i, k, conditional, &psi, &mut scratch, |dx, dy, dz| {
            fill_row(x, i, dx);
            fill_row(y, i, dy);
            fill_row(z, i, dz);
        });
    }
    Ok(finish(sum, n, k, conditional, &psi))
}

/// Dense symmetric supremum-distance matrix of one block.
pub(crate) struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub(crate) fn new(block: &SampleBlock) -> Self {
        let n = block.rows();
        let mut data = vec![0.0; n * n];
        for (i, row) in data.chunks_exact_mut(n.max(1)).enumerate() {
            fill_row(block, i, row);
        }
        Self { n, data }
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }
}

/// The `len` nearest entries of every row of a distance matrix, in
/// ascending order of distance (ties by index).
pub(crate) struct SortedRows {
    len: usize,
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl SortedRows {
    pub(crate) fn new(m: &DistanceMatrix, len: usize) -> Self {
        let n = m.len();
        let len = len.clamp(1, n.max(1));
        let mut idx = Vec::with_capacity(n * len);
        let mut val = Vec::with_capacity(n * len);
        let mut keys: Vec<(f64, u32)> = Vec::with_capacity(n);
        let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        for i in 0..n {
            keys.clear();
            keys.extend(m.row(i).iter().enumerate().map(|(j, &v)| (v, j as u32)));
            if len < n {
                keys.select_nth_unstable_by(len - 1, cmp);
            }
            keys[..len].sort_unstable_by(cmp);
            idx.extend(keys[..len].iter().map(|p| p.1));
            val.extend(keys[..len].iter().map(|p| p.0));
        }
        Self { len, idx, val }
    }

    #[inline]
    pub(crate) fn idx(&self, i: usize) -> &[u32] {
        &self.idx[i * self.len..(i + 1) * self.len]
    }

    #[inline]
    pub(crate) fn val(&self, i: usize) -> &[f64] {
        &self.val[i * self.len..(i + 1) * self.len]
    }
}

#[inline]
fn insert_best(best: &mut [f64], joint: f64) {
    let last = best.len() - 1;
    if joint < best[last] {
        let mut pos = last;
        while pos > 0 && best[pos - 1] > joint {
            best[pos] = best[pos - 1];
            pos -= 1;
        }
        best[pos] = joint;
    }
}

#[inline]
fn count_below(row: &[f64], eps: f64) -> usize {
    row.iter().map(|&v| (v < eps) as usize).sum()
}

/// The samples reading each row of `x` under a permutation that may
/// repeat rows.
struct Preimage {
    start: Vec<usize>,
    members: Vec<usize>,
    bijective: bool,
}

impl Preimage {
    fn new(perm: &[usize], n: usize) -> Self {
        let mut start = vec![0; n + 1];
        for &p in perm {
            start[p + 1] += 1;
        }
        let bijective = start[1..].iter().all(|&c| c == 1);
        for m in 0..n {
            start[m + 1] += start[m];
        }
        let mut fill = start.clone();
        let mut members = vec![0; perm.len()];
        for (j, &p) in perm.iter().enumerate() {
            members[fill[p]] = j;
            fill[p] += 1;
        }
        Self { start, members, bijective }
    }

    #[inline]
    fn of(&self, m: usize) -> &[usize] {
        &self.members[self.start[m]..self.start[m + 1]]
    }

    /// Samples whose `x` row lies closer than `eps` in `row`.
    fn count_below(&self, row: &[f64], eps: f64) -> usize {
        if self.bijective {
            return count_below(row, eps);
        }
        row.iter().enumerate().filter(|&(_, &v)| v < eps).map(|(m, _)| self.start[m + 1] - self.start[m]).sum()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pivot {
    X,
    Y,
    Z,
}

/// Estimator over precomputed distances, evaluated with the rows of `x`
/// read through a permutation.
///
/// The joint distance is never below any marginal distance, so each row
/// scans its neighbours in ascending order of the widest block and stops as
/// soon as no closer joint neighbour can follow. Only a prefix of every
/// row is kept sorted; rows whose search runs past it fall back to a full
/// scan.
pub(crate) struct MatrixEstimator {
    k: usize,
    psi: Vec<f64>,
    x: DistanceMatrix,
    y: DistanceMatrix,
    z: Option<DistanceMatrix>,
    pivot: Pivot,
    sorted: SortedRows,
}

impl MatrixEstimator {
    pub(crate) fn new(x: &SampleBlock, y: &SampleBlock, z: &SampleBlock, k: usize) -> Self {
        let n = x.rows();
        let prefix = (n / 4).max(4 * k + 16);
        let dx = DistanceMatrix::new(x);
        let dy = DistanceMatrix::new(y);
        let dz = (!z.is_empty()).then(|| DistanceMatrix::new(z));
        let pivot = if !z.is_empty() && z.width() >= x.width() {
            Pivot::Z
        } else if x.width() > y.width() || !z.is_empty() {
            Pivot::X
        } else {
            Pivot::Y
        };
        let sorted = match pivot {
            Pivot::X => SortedRows::new(&dx, prefix),
            Pivot::Y => SortedRows::new(&dy, prefix),
            Pivot::Z => SortedRows::new(dz.as_ref().expect("z pivot"), prefix),
        };
        Self { k, psi: digamma_table(n + 1), x: dx, y: dy, z: dz, pivot, sorted }
    }

    pub(crate) fn len(&self) -> usize {
        self.x.len()
    }

    /// Conditioning distances, if there is a conditioning block.
    pub(crate) fn z_matrix(&self) -> Option<&DistanceMatrix> {
        self.z.as_ref()
    }

    pub(crate) fn estimate(&self, perm: &[usize], best: &mut [f64]) -> f64 {
        let n = self.len();
        let pre = Preimage::new(perm, n);
        let mut sum = 0.0;
        for i in 0..n {
            sum += match self.fast_row(i, perm, &pre, best) {
                Some(v) => v,
                None => self.full_row(i, perm),
            };
        }
        finish(sum, n, self.k, self.z.is_some(), &self.psi)
    }

    fn fast_row(&self, i: usize, perm: &[usize], pre: &Preimage, best: &mut [f64]) -> Option<f64> {
        let last = self.k - 1;
        let psi = &self.psi;
        let xr = self.x.row(perm[i]);
        let yr = self.y.row(i);
        let zr = self.z.as_ref().map(|z| z.row(i));
        let by_x = self.pivot == Pivot::X;
        let row = if by_x { perm[i] } else { i };
        let (order, pv) = (self.sorted.idx(row), self.sorted.val(row));
        best.iter_mut().for_each(|b| *b = f64::INFINITY);
        let mut complete = false;
        for t in 0..order.len() {
            if pv[t] >= best[last] {
                complete = true;
                break;
            }
            let m = order[t] as usize;
            if by_x {
                for &j in pre.of(m) {
                    if j != i {
                        let joint = pv[t].max(yr[j]);
                        insert_best(best, zr.map_or(joint, |zr| joint.max(zr[j])));
                    }
                }
            } else if m != i {
                let joint = xr[perm[m]].max(pv[t]);
                // with conditioning the pivot is z, otherwise y
                insert_best(best, if zr.is_some() { joint.max(yr[m]) } else { joint });
            }
        }
        if !complete {
            return None;
        }
        let eps = best[last];
        let inside = pv.partition_point(|&v| v < eps);
        let prefix = &order[..inside];
        Some(match (zr, by_x) {
            (Some(_), false) => {
                let (mut n_xz, mut n_yz) = (0usize, 0usize);
                for &j in prefix {
                    let j = j as usize;
                    n_xz += (xr[perm[j]] < eps) as usize;
                    n_yz += (yr[j] < eps) as usize;
                }
                psi[inside.max(1)] - psi[n_xz.max(1)] - psi[n_yz.max(1)]
            }
            (Some(zr), true) => {
                let n_xz: usize =
                    prefix.iter().map(|&m| pre.of(m as usize).iter().filter(|&&j| zr[j] < eps).count()).sum();
                let (mut n_z, mut n_yz) = (0usize, 0usize);
                for (&z, &y) in zr.iter().zip(yr) {
                    n_z += (z < eps) as usize;
                    n_yz += ((z < eps) & (y < eps)) as usize;
                }
                psi[n_z.max(1)] - psi[n_xz.max(1)] - psi[n_yz.max(1)]
            }
            (None, true) => {
                let n_x: usize = prefix.iter().map(|&m| pre.of(m as usize).len()).sum();
                -psi[n_x.max(1)] - psi[count_below(yr, eps).max(1)]
            }
            (None, false) => -psi[pre.count_below(xr, eps).max(1)] - psi[inside.max(1)],
        })
    }

    fn full_row(&self, i: usize, perm: &[usize]) -> f64 {
        let psi = &self.psi;
        let xr = self.x.row(perm[i]);
        let yr = self.y.row(i);
        let mut scratch = RowScratch::new(self.len(), self.k);
        row_term(i, self.k, self.z.is_some(), psi, &mut scratch, |dx, dy, dz| {
            for (o, &pj) in dx.iter_mut().zip(perm) {
                *o = xr[pj];
            }
            dy.copy_from_slice(yr);
            match &self.z {
                Some(z) => dz.copy_from_slice(z.row(i)),
                None => dz.iter_mut().for_each(|v| *v = 0.0),
            }
        })
    }
}
