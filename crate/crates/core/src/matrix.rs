//! Row-major matrix storage and rectangular region descriptors.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MmError, Result};
use crate::semiring::{Semiring, SemiringId};

/// A dense row-major matrix in one contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Semiring> Matrix<S> {
    /// A matrix filled with the additive identity.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MmError::DimMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[S]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(MmError::DimMismatch("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    /// Deterministic pseudo-random square matrix.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * n).map(|_| S::sample(&mut rng)).collect();
        Matrix { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn fill(&mut self, v: S) {
        self.data.fill(v);
    }

    /// The region covering the whole matrix.
    pub fn region(&self) -> MatrixRegion {
        MatrixRegion::full(self.rows, self.cols)
    }

    /// Copy of the cells under `r`.
    pub fn extract(&self, r: MatrixRegion) -> Result<Matrix<S>> {
        if r.row0 + r.rows > self.rows || r.col0 + r.cols > self.cols {
            return Err(MmError::DimMismatch("region exceeds matrix".into()));
        }
        let mut data = Vec::with_capacity(r.rows * r.cols);
        for i in 0..r.rows {
            let start = (r.row0 + i) * self.cols + r.col0;
            data.extend_from_slice(&self.data[start..start + r.cols]);
        }
        Ok(Matrix { rows: r.rows, cols: r.cols, data })
    }

    /// Fixture text format: a `rows cols semiring-id` header followed by
    /// whitespace-separated row-major values.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.rows, self.cols, S::ID);
        for i in 0..self.rows {
            let row: Vec<String> =
                (0..self.cols).map(|j| self.get(i, j).format_element()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut header = |what: &str| {
            tokens.next().ok_or_else(|| MmError::Parse(format!("missing {what}")))
        };
        let rows: usize =
            header("rows")?.parse().map_err(|_| MmError::Parse("bad row count".into()))?;
        let cols: usize =
            header("cols")?.parse().map_err(|_| MmError::Parse("bad column count".into()))?;
        let id: SemiringId = header("semiring id")?.parse()?;
        if id != S::ID {
            return Err(MmError::Parse(format!("file holds `{id}` elements, expected `{}`", S::ID)));
        }
        let data = tokens
            .map(|t| S::parse_element(t).ok_or_else(|| MmError::Parse(format!("bad element `{t}`"))))
            .collect::<Result<Vec<S>>>()?;
        Matrix::from_vec(rows, cols, data)
    }
}

/// A rectangular window into a row-major buffer with `stride` elements per
/// stored row. Descriptors are plain values; splitting one never copies data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatrixRegion {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
}

impl MatrixRegion {
    pub fn full(rows: usize, cols: usize) -> Self {
        MatrixRegion { row0: 0, col0: 0, rows, cols, stride: cols }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// The `(i, j)` quadrant of a square region with even extent.
    pub fn quadrant(&self, i: usize, j: usize) -> Result<MatrixRegion> {
        if !self.is_square() || self.rows % 2 != 0 || self.rows == 0 {
            return Err(MmError::InvalidSplit(format!(
                "cannot quarter a {}x{} region",
                self.rows, self.cols
            )));
        }
        if i > 1 || j > 1 {
            return Err(MmError::InvalidSplit(format!("quadrant index ({i},{j})")));
        }
        let h = self.rows / 2;
        Ok(MatrixRegion {
            row0: self.row0 + i * h,
            col0: self.col0 + j * h,
            rows: h,
            cols: h,
            stride: self.stride,
        })
    }

    /// Offset of cell `(i, j)` of the region within its buffer.
    #[inline(always)]
    pub fn offset(&self, i: usize, j: usize) -> usize {
        (self.row0 + i) * self.stride + self.col0 + j
    }

    pub fn contains_cell(&self, row: usize, col: usize) -> bool {
        row >= self.row0 && row < self.row0 + self.rows && col >= self.col0 && col < self.col0 + self.cols
    }
}

/// Checks an algorithm entry point's shape requirements and returns `n`.
pub fn check_square_operands(c: (usize, usize), a: (usize, usize), b: (usize, usize), base: usize) -> Result<usize> {
    let n = a.0;
    for (name, (r, k)) in [("C", c), ("A", a), ("B", b)] {
        if r != n || k != n {
            return Err(MmError::DimMismatch(format!("{name} is {r}x{k}, expected {n}x{n}")));
        }
    }
    if n == 0 || !n.is_power_of_two() {
        return Err(MmError::InvalidSplit(format!("dimension {n} is not a power of two")));
    }
    if n < base {
        return Err(MmError::InvalidSplit(format!("dimension {n} is below the base dimension {base}")));
    }
    Ok(n)
}
