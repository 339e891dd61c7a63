use super::FedError;
use crate::synth::even_sizes;
use crate::Matrix;

/// A matrix split horizontally (by rows) across clients, with fixed row
/// order: block `s` holds the rows starting at `offsets[s]` of the source
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedDataset {
    blocks: Vec<Matrix>,
    offsets: Vec<usize>,
    cols: usize,
}

impl PartitionedDataset {
    /// Splits `a` into contiguous row blocks of the given sizes.
    pub fn partition_rows(a: &Matrix, sizes: &[usize]) -> Result<Self, FedError> {
        let total: usize = sizes.iter().sum();
        if total != a.rows() {
            return Err(FedError::SizeMismatch {
                expected: a.rows(),
                got: total,
            });
        }
        if let Some(client) = sizes.iter().position(|&s| s == 0) {
            return Err(FedError::EmptyBlock { client });
        }
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut start = 0usize;
        for &size in sizes {
            offsets.push(start);
            let data: Vec<f64> = (start..start + size)
                .flat_map(|r| a.row(r).iter().copied())
                .collect();
            blocks.push(
                Matrix::from_rows(size, a.cols(), data).expect("source rows are valid"),
            );
            start += size;
        }
        Ok(PartitionedDataset {
            blocks,
            offsets,
            cols: a.cols(),
        })
    }

    /// Splits `a` as evenly as possible into `clients` blocks.
    pub fn even_split(a: &Matrix, clients: usize) -> Result<Self, FedError> {
        if clients == 0 || clients > a.rows() {
            return Err(FedError::EmptyBlock { client: clients.min(a.rows()) });
        }
        Self::partition_rows(a, &even_sizes(a.rows(), clients))
    }

    /// Builds a dataset directly from per-client blocks (used when clients
    /// hold locally computed matrices rather than slices of one source).
    pub fn from_blocks(blocks: Vec<Matrix>) -> Result<Self, FedError> {
        assert!(!blocks.is_empty(), "need at least one block");
        let cols = blocks[0].cols();
        for (client, b) in blocks.iter().enumerate() {
            if b.cols() != cols {
                return Err(FedError::UnevenVectors {
                    client,
                    expected: cols,
                    got: b.cols(),
                });
            }
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut start = 0usize;
        for b in &blocks {
            offsets.push(start);
            start += b.rows();
        }
        Ok(PartitionedDataset {
            blocks,
            offsets,
            cols,
        })
    }

    pub fn client_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn total_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.rows()).sum()
    }

    pub fn block(&self, s: usize) -> &Matrix {
        &self.blocks[s]
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    /// Global starting row of each client's block.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Maps a global row index to `(client, local_row)`.
    pub fn owner_of(&self, row: usize) -> (usize, usize) {
        assert!(row < self.total_rows(), "row {row} out of range");
        let mut s = self.offsets.len() - 1;
        while self.offsets[s] > row {
            s -= 1;
        }
        (s, row - self.offsets[s])
    }

    /// Vertical stack of all blocks, reproducing the source matrix
    /// bit-exactly.
    pub fn stack(&self) -> Matrix {
        Matrix::vstack(&self.blocks).expect("blocks share column count")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn splits_six_rows_in_halves() {
        let a = synth::gaussian_matrix(6, 2, 1);
        let p = PartitionedDataset::partition_rows(&a, &[3, 3]).unwrap();
        assert_eq!(p.client_count(), 2);
        assert_eq!(p.offsets(), &[0, 3]);
        assert_eq!(p.block(0).rows(), 3);
        assert_eq!(p.block(1).rows(), 3);
        assert_eq!(p.stack(), a);
    }

    #[test]
    fn uneven_split_offsets() {
        let a = synth::gaussian_matrix(5, 2, 2);
        let p = PartitionedDataset::partition_rows(&a, &[2, 2, 1]).unwrap();
        assert_eq!(p.offsets(), &[0, 2, 4]);
        assert_eq!(p.stack(), a);
    }

    #[test]
    fn rejects_size_mismatch() {
        let a = synth::gaussian_matrix(6, 2, 3);
        assert_eq!(
            PartitionedDataset::partition_rows(&a, &[4, 3]).unwrap_err(),
            FedError::SizeMismatch {
                expected: 6,
                got: 7
            }
        );
    }

    #[test]
    fn rejects_empty_block() {
        let a = synth::gaussian_matrix(4, 2, 4);
        assert_eq!(
            PartitionedDataset::partition_rows(&a, &[4, 0]).unwrap_err(),
            FedError::EmptyBlock { client: 1 }
        );
    }

    #[test]
    fn owner_lookup() {
        let a = synth::gaussian_matrix(5, 2, 5);
        let p = PartitionedDataset::partition_rows(&a, &[2, 2, 1]).unwrap();
        assert_eq!(p.owner_of(0), (0, 0));
        assert_eq!(p.owner_of(1), (0, 1));
        assert_eq!(p.owner_of(2), (1, 0));
        assert_eq!(p.owner_of(4), (2, 0));
    }

    #[test]
    fn even_split_covers_all_rows() {
        let a = synth::gaussian_matrix(442, 3, 6);
        let p = PartitionedDataset::even_split(&a, 5).unwrap();
        assert_eq!(p.client_count(), 5);
        assert_eq!(p.total_rows(), 442);
        assert_eq!(p.stack(), a);
    }

    #[test]
    fn from_blocks_validates_columns() {
        let b0 = synth::gaussian_matrix(2, 3, 7);
        let b1 = synth::gaussian_matrix(4, 3, 8);
        let p = PartitionedDataset::from_blocks(vec![b0.clone(), b1]).unwrap();
        assert_eq!(p.offsets(), &[0, 2]);
        assert_eq!(p.cols(), 3);

        let bad = synth::gaussian_matrix(2, 2, 9);
        assert!(matches!(
            PartitionedDataset::from_blocks(vec![b0, bad]),
            Err(FedError::UnevenVectors { client: 1, .. })
        ));
    }
}
