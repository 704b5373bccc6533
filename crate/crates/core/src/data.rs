//! Multivariate time series with uniform sampling.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    names: Vec<String>,
    // one vector per series, all of equal length
    columns: Vec<Vec<f64>>,
}

impl TimeSeriesDataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch { expected: names.len(), found: columns.len() });
        }
        if columns.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let len = columns[0].len();
        if let Some(bad) = columns.iter().find(|c| c.len() != len) {
            return Err(Error::RowMismatch(len, bad.len()));
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::InvalidConfig("series names must be unique".into()));
        }
        Ok(Self { names, columns })
    }

    /// Series named `X1..Xd`.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let names = crate::graph::default_names(columns.len());
        Self::new(names, columns)
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn series(&self, p: usize) -> Result<&[f64]> {
        self.columns.get(p).map(Vec::as_slice).ok_or(Error::SeriesOutOfRange { index: p, d: self.d() })
    }

    /// Reorders series: column `i` of the result is column `order[i]` of `self`.
    pub fn select(&self, order: &[usize]) -> Result<Self> {
        let mut names = Vec::with_capacity(order.len());
        let mut columns = Vec::with_capacity(order.len());
        for &i in order {
            columns.push(self.series(i)?.to_vec());
            names.push(self.names[i].clone());
        }
        Self::new(names, columns)
    }

    /// Zero-mean unit-variance copy with a tiny seeded jitter
    /// (1e-10 of the post-standardization scale) to break exact ties. The
    /// jitter stream of each series is keyed by its name, so the result does
    /// not depend on column order. Constant series stay constant.
    pub fn standardized(&self, seed: u64) -> Self {
        let columns = self
            .columns
            .iter()
            .zip(&self.names)
            .map(|(col, name)| {
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                if var <= 0.0 || !var.is_finite() {
                    return vec![0.0; col.len()];
                }
                let sd = var.sqrt();
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ crate::stable_hash(name.as_bytes()));
                col.iter().map(|v| (v - mean) / sd + 1e-10 * rng.gen_range(-1.0..1.0)).collect()
            })
            .collect();
        Self { names: self.names.clone(), columns }
    }

    /// Reads a headed CSV, one column per series. Missing or non-numeric
    /// cells are rejected with their line number.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if names.is_empty() || names.iter().any(String::is_empty) {
            return Err(Error::Malformed { line: 1, message: "empty header field".into() });
        }
        let mut columns = vec![Vec::new(); names.len()];
        for (row, record) in rdr.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(|e| Error::Malformed { line, message: e.to_string() })?;
            if record.len() != names.len() {
                return Err(Error::Malformed {
                    line,
                    message: format!("expected {} fields, found {}", names.len(), record.len()),
                });
            }
            for (j, field) in record.iter().enumerate() {
                if field.is_empty() {
                    return Err(Error::Malformed { line, message: format!("missing value in column '{}'", names[j]) });
                }
                let v: f64 = field.parse().map_err(|_| Error::Malformed {
                    line,
                    message: format!("non-numeric value '{field}' in column '{}'", names[j]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Malformed {
                        line,
                        message: format!("non-finite value in column '{}'", names[j]),
                    });
                }
                columns[j].push(v);
            }
        }
        Self::new(names, columns)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.names)?;
        for t in 0..self.len() {
            w.write_record(self.columns.iter().map(|c| format!("{}", c[t])))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let ds = TimeSeriesDataset::from_columns(vec![vec![1.0, 2.5, -3.0], vec![0.125, 0.0, 7.0]]).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("X1,X2\n"));
        let back = TimeSeriesDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = TimeSeriesDataset::read_csv("a,b\n1,2\n3,\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err}");
        let err = TimeSeriesDataset::read_csv("a,b\n1,2\n3,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }));
        let err = TimeSeriesDataset::read_csv("a,b\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
    }

    #[test]
    fn standardization_is_order_free() {
        let ds = TimeSeriesDataset::from_columns(vec![vec![1.0, 2.0, 4.0, 8.0], vec![3.0, 3.0, 3.0, 3.0]]).unwrap();
        let s = ds.standardized(9);
        let col = s.series(0).unwrap();
        let mean: f64 = col.iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-9);
        assert!(s.series(1).unwrap().iter().all(|&v| v == 0.0));
        let swapped = ds.select(&[1, 0]).unwrap().standardized(9);
        assert_eq!(swapped.series(1).unwrap(), col);
    }
}
