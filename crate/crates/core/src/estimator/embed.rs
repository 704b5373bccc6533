use crate::data::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::graph::{Slice, SliceNode};

/// Which instants of a series a block holds for each row `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowSpec {
    /// `(X_{t-gamma}, ..., X_{t-1})`
    PastWindow,
    /// `X_t`
    PresentInstant,
}

impl From<Slice> for WindowSpec {
    fn from(s: Slice) -> Self {
        match s {
            Slice::Past => WindowSpec::PastWindow,
            Slice::Present => WindowSpec::PresentInstant,
        }
    }
}

/// Column-major block of aligned observations; row `i` is timestamp `gamma + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBlock {
    n: usize,
    cols: Vec<Vec<f64>>,
}

impl SampleBlock {
    pub fn new(cols: Vec<Vec<f64>>) -> Result<Self> {
        let n = cols.first().map_or(0, Vec::len);
        if let Some(c) = cols.iter().find(|c| c.len() != n) {
            return Err(Error::RowMismatch(n, c.len()));
        }
        Ok(Self { n, cols })
    }

    /// A zero-width block with `n` rows (the empty conditioning set).
    pub fn empty(n: usize) -> Self {
        Self { n, cols: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.cols
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[i]).collect()
    }

    /// Side-by-side concatenation; all parts must share the row count.
    pub fn concat(n: usize, parts: &[SampleBlock]) -> Result<Self> {
        let mut cols = Vec::new();
        for p in parts {
            if p.n != n {
                return Err(Error::RowMismatch(n, p.n));
            }
            cols.extend(p.cols.iter().cloned());
        }
        Ok(Self { n, cols })
    }

    /// Index of a column with no spread, if any.
    pub fn constant_column(&self) -> Option<usize> {
        self.cols.iter().position(|c| {
            let first = c.first().copied().unwrap_or(0.0);
            c.iter().all(|&v| v == first)
        })
    }
}

/// Builds the block for series `p` over rows `t = gamma..T-1`.
pub fn lag_embed(ds: &TimeSeriesDataset, p: usize, spec: WindowSpec, gamma: usize) -> Result<SampleBlock> {
    let series = ds.series(p)?;
    let t_len = series.len();
    if t_len <= gamma {
        return Err(Error::InsufficientData { needed: gamma + 1, available: t_len });
    }
    let cols = match spec {
        WindowSpec::PresentInstant => vec![series[gamma..].to_vec()],
        WindowSpec::PastWindow => (0..gamma).map(|j| series[j..t_len - gamma + j].to_vec()).collect(),
    };
    Ok(SampleBlock { n: t_len - gamma, cols })
}

pub(crate) fn embed_node(ds: &TimeSeriesDataset, node: SliceNode, gamma: usize) -> Result<SampleBlock> {
    lag_embed(ds, node.series, node.slice.into(), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(t: usize) -> TimeSeriesDataset {
        TimeSeriesDataset::from_columns(vec![(0..t).map(|v| v as f64).collect()]).unwrap()
    }

    #[test]
    fn past_window_rows() {
        let b = lag_embed(&ramp(5), 0, WindowSpec::PastWindow, 2).unwrap();
        assert_eq!(b.rows(), 3);
        let rows: Vec<Vec<f64>> = (0..3).map(|i| b.row(i)).collect();
        assert_eq!(rows, vec![vec![0.0, 1.0], vec![1.0, 2.0], vec![2.0, 3.0]]);
    }

    #[test]
    fn present_instant_rows() {
        let b = lag_embed(&ramp(5), 0, WindowSpec::PresentInstant, 2).unwrap();
        assert_eq!(b.columns(), &[vec![2.0, 3.0, 4.0]]);
    }

    #[test]
    fn row_count_is_length_minus_gamma() {
        for t in 6..120 {
            let b = lag_embed(&ramp(t), 0, WindowSpec::PastWindow, 5).unwrap();
            assert_eq!((b.rows(), b.width()), (t - 5, 5));
            // row i of the window ends right before timestamp gamma + i
            for i in 0..b.rows() {
                assert_eq!(b.columns()[4][i], (i + 4) as f64);
            }
        }
        let b = lag_embed(&ramp(100), 0, WindowSpec::PastWindow, 5).unwrap();
        assert_eq!(b.rows(), 95);
    }

    #[test]
    fn too_short() {
        assert!(matches!(lag_embed(&ramp(3), 0, WindowSpec::PastWindow, 3), Err(Error::InsufficientData { .. })));
    }
}
