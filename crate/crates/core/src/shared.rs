//! A square output matrix that many threads may accumulate into at once.

use crate::error::{MmError, Result};
use crate::exclusion::TileExclusionTable;
use crate::kernel::accumulate;
use crate::matrix::{Matrix, MatrixRegion};
use crate::metrics::Metrics;
use crate::pool::BlockStorage;
use crate::semiring::Semiring;
use crate::view::{Dst, Src};

pub struct SharedOutput<S> {
    storage: BlockStorage<S>,
    n: usize,
    metrics: Metrics,
}

impl<S: Semiring> SharedOutput<S> {
    /// Wraps a square matrix whose writes serialize per `tile x tile` block.
    pub fn new(m: &Matrix<S>, tile: usize) -> Result<Self> {
        let n = m.rows();
        if !m.is_square() || tile == 0 || n % tile != 0 {
            return Err(MmError::DimMismatch(format!("{}x{} matrix with {tile}x{tile} tiles", m.rows(), m.cols())));
        }
        let storage = BlockStorage::allocate(n * n, tile, 0)?;
        // SAFETY: freshly allocated, not shared yet.
        unsafe { std::ptr::copy_nonoverlapping(m.as_slice().as_ptr(), storage.base_ptr(), n * n) };
        Ok(SharedOutput { storage, n, metrics: Metrics::new() })
    }

    /// `C[r] <- C[r] ⊕ P`, entering the exclusion slot of every covered tile.
    pub fn atomic_accumulate(&self, r: MatrixRegion, p: &Matrix<S>) -> Result<()> {
        if r.rows != r.cols || p.rows() != r.rows || p.cols() != r.cols || r.stride != self.n {
            return Err(MmError::DimMismatch(format!(
                "{}x{} update into a {}x{} region",
                p.rows(),
                p.cols(),
                r.rows,
                r.cols
            )));
        }
        self.tiles().check_aligned(&r)?;
        // SAFETY: writes go through the tile slots only.
        let whole = unsafe { Dst::from_raw(self.storage.base_ptr(), self.n, self.n, self.storage.tiles()) };
        let dst = whole.sub((r.row0, r.col0), r.rows);
        accumulate(dst, Src::new(p.as_slice(), r.cols, r.rows), None, &self.metrics);
        Ok(())
    }

    pub fn tiles(&self) -> &TileExclusionTable {
        self.storage.tiles()
    }

    pub fn to_matrix(&self) -> Matrix<S> {
        // SAFETY: `&self` callers outside a parallel section see a quiescent buffer.
        let data = unsafe { std::slice::from_raw_parts(self.storage.base_ptr(), self.n * self.n) }.to_vec();
        Matrix::from_vec(self.n, self.n, data).expect("square buffer")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::madd;

    #[test]
    fn single_caller_matches_madd() {
        let c = Matrix::<i64>::random(8, 1);
        let p = Matrix::<i64>::random(8, 2);
        let out = SharedOutput::new(&c, 4).unwrap();
        let full = MatrixRegion::full(8, 8);
        out.atomic_accumulate(full, &p).unwrap();
        let mut expect = c.clone();
        madd(&mut expect, full, &p, full).unwrap();
        assert_eq!(out.to_matrix(), expect);
        assert_eq!(out.tiles().total_entries(), 4);
    }

    #[test]
    fn misaligned_region_is_rejected() {
        let out = SharedOutput::new(&Matrix::<i64>::zeros(8, 8), 4).unwrap();
        let r = MatrixRegion { row0: 2, col0: 0, rows: 4, cols: 4, stride: 8 };
        assert_eq!(out.atomic_accumulate(r, &Matrix::zeros(4, 4)), Err(MmError::AlignmentError(4)));
    }

    #[test]
    fn counter_tracks_entries() {
        let out = SharedOutput::new(&Matrix::<i64>::zeros(4, 4), 2).unwrap();
        let r = MatrixRegion { row0: 2, col0: 2, rows: 2, cols: 2, stride: 4 };
        for _ in 0..5 {
            out.atomic_accumulate(r, &Matrix::from_rows(&[[1, 1], [1, 1]]).unwrap()).unwrap();
        }
        assert_eq!(out.tiles().entries_at(2, 2), 5);
        assert_eq!(out.to_matrix().get(3, 3), 5);
    }
}
