//! Observed spin data: per-timestamp stacks of ±1 observation vectors.

use ndarray::Array2;

use crate::error::{Error, Result};

/// A binary time series over `n` timestamps: block `i` (0-based index,
/// timestamp `i+1`) holds `n^(i) ≥ 1` observation rows of length `p`,
/// every entry exactly −1 or +1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinDataset {
    p: usize,
    blocks: Vec<Array2<i8>>,
}

impl SpinDataset {
    pub fn new(p: usize, blocks: Vec<Array2<i8>>) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidConfig(format!("p = {p} < 2")));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidConfig("dataset has no timestamps".into()));
        }
        for (i, block) in blocks.iter().enumerate() {
            if block.ncols() != p {
                return Err(Error::DimensionMismatch(format!(
                    "block at timestamp {} has {} columns, expected p = {}",
                    i + 1,
                    block.ncols(),
                    p
                )));
            }
            if block.nrows() == 0 {
                return Err(Error::InvalidConfig(format!(
                    "timestamp {} has no observations",
                    i + 1
                )));
            }
            for (r, row) in block.rows().into_iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    if v != 1 && v != -1 {
                        return Err(Error::InvalidSpin {
                            row: r + 1,
                            column: c + 1,
                            value: v.to_string(),
                        });
                    }
                }
            }
        }
        Ok(SpinDataset { p, blocks })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of timestamps `n`.
    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    /// Observation block for 0-based index `i` (timestamp `i + 1`).
    pub fn block(&self, i: usize) -> &Array2<i8> {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[Array2<i8>] {
        &self.blocks
    }

    /// Replicate counts `n^(i)` per timestamp.
    pub fn counts(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    /// Total observation count `Σ_i n^(i)`.
    pub fn total_samples(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    /// Largest per-timestamp replicate count `max_i n^(i)`.
    pub fn max_count(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn accessors_report_shape() {
        let ds = SpinDataset::new(
            3,
            vec![
                array![[1, -1, 1], [1, 1, 1]],
                array![[-1, -1, -1]],
            ],
        )
        .unwrap();
        assert_eq!(ds.p(), 3);
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.counts(), vec![2, 1]);
        assert_eq!(ds.total_samples(), 3);
        assert_eq!(ds.max_count(), 2);
    }

    #[test]
    fn rejects_invalid_entries() {
        let err = SpinDataset::new(2, vec![array![[1, 0]]]).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidSpin { row: 1, column: 2, .. }
        ));
    }

    #[test]
    fn rejects_ragged_blocks() {
        assert!(SpinDataset::new(2, vec![array![[1, 1, 1]]]).is_err());
        let empty: Array2<i8> = Array2::zeros((0, 2));
        assert!(SpinDataset::new(2, vec![empty]).is_err());
        assert!(SpinDataset::new(2, vec![]).is_err());
    }
}
