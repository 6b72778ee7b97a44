//! The serial base kernel, matrix addition and the brute-force oracle.
//!
//! Every schedule in the crate bottoms out in [`kernel`]; there is exactly one
//! base-case implementation so that benchmark comparisons stay fair.

use crate::error::{MmError, Result};
use crate::exclusion::TileExclusionTable;
use crate::matrix::{Matrix, MatrixRegion};
use crate::metrics::Metrics;
use crate::semiring::Semiring;
use crate::view::{Dst, Src};

/// Below this extent the public [`madd`] stops splitting.
const MADD_CUTOFF: usize = 32;

/// `dst <- dst ⊕ a ⊗ b` (or `dst <- a ⊗ b` when `overwrite`), i-k-j order.
#[inline]
pub(crate) fn kernel<S: Semiring>(dst: Dst<'_, S>, a: Src<'_, S>, b: Src<'_, S>, overwrite: bool) {
    let n = dst.n();
    for i in 0..n {
        // SAFETY: the caller owns `dst` (or holds its tile slot).
        let c = unsafe { dst.row_mut(i) };
        if overwrite {
            c.fill(S::zero());
        }
        let ar = a.row(i);
        for (k, &aik) in ar.iter().enumerate() {
            for (cj, &bkj) in c.iter_mut().zip(b.row(k)) {
                *cj = cj.add(aik.mul(bkj));
            }
        }
    }
}

/// Base kernel for a destination that other tasks may also be updating.
/// `dst` must be exactly one tile of its buffer.
pub(crate) fn kernel_locked<S: Semiring>(dst: Dst<'_, S>, a: Src<'_, S>, b: Src<'_, S>, m: &Metrics) {
    debug_assert_eq!(dst.tiles().tile_dim().0.min(dst.n()), dst.n());
    dst.for_each_tile_locked(m, |t, _, init| kernel(t, a, b, !init));
}

/// `dst <- dst ⊕ coef ⊗ src` tile by tile under the exclusion slots. Tiles
/// that do not yet hold valid data are overwritten.
pub(crate) fn accumulate<S: Semiring>(dst: Dst<'_, S>, src: Src<'_, S>, coef: Option<S>, m: &Metrics) {
    dst.for_each_tile_locked(m, |t, off, init| {
        let s = src.sub(off, t.n());
        for i in 0..t.n() {
            // SAFETY: inside the tile's slot.
            let c = unsafe { t.row_mut(i) };
            let x = s.row(i);
            match (init, coef) {
                (true, None) => c.iter_mut().zip(x).for_each(|(c, &x)| *c = c.add(x)),
                (true, Some(k)) => c.iter_mut().zip(x).for_each(|(c, &x)| *c = c.add(k.mul(x))),
                (false, None) => c.copy_from_slice(x),
                (false, Some(k)) => c.iter_mut().zip(x).for_each(|(c, &x)| *c = k.mul(x)),
            }
        }
    });
}

/// `dst <- dst ⊕ coef ⊗ x` for a destination owned by the caller.
pub(crate) fn axpy<S: Semiring>(dst: Dst<'_, S>, x: Src<'_, S>, coef: Option<S>) {
    for i in 0..dst.n() {
        // SAFETY: the caller owns `dst`.
        let c = unsafe { dst.row_mut(i) };
        match coef {
            None => c.iter_mut().zip(x.row(i)).for_each(|(c, &x)| *c = c.add(x)),
            Some(k) => c.iter_mut().zip(x.row(i)).for_each(|(c, &x)| *c = c.add(k.mul(x))),
        }
    }
}

/// `dst <- x`, or `dst <- x ⊕ coef ⊗ y` when `y` is given.
pub(crate) fn combine<S: Semiring>(dst: Dst<'_, S>, x: Src<'_, S>, y: Option<(Src<'_, S>, Option<S>)>) {
    for i in 0..dst.n() {
        // SAFETY: the caller owns `dst`.
        let c = unsafe { dst.row_mut(i) };
        c.copy_from_slice(x.row(i));
    }
    if let Some((y, coef)) = y {
        axpy(dst, y, coef);
    }
}

/// Parallel `dst <- dst ⊕ src` by quadrant splitting down to `cutoff`.
pub(crate) fn madd_rec<S: Semiring>(dst: Dst<'_, S>, src: Src<'_, S>, cutoff: usize) {
    if dst.n() <= cutoff || dst.n() % 2 != 0 {
        axpy(dst, src, None);
        return;
    }
    rayon::join(
        || rayon::join(|| madd_rec(dst.quad(0, 0), src.quad(0, 0), cutoff), || madd_rec(dst.quad(0, 1), src.quad(0, 1), cutoff)),
        || rayon::join(|| madd_rec(dst.quad(1, 0), src.quad(1, 0), cutoff), || madd_rec(dst.quad(1, 1), src.quad(1, 1), cutoff)),
    );
}

fn check_region<S: Semiring>(m: &Matrix<S>, r: &MatrixRegion, name: &str) -> Result<()> {
    if r.stride != m.cols() || r.row0 + r.rows > m.rows() || r.col0 + r.cols > m.cols() {
        return Err(MmError::DimMismatch(format!("region {name} does not fit its {}x{} matrix", m.rows(), m.cols())));
    }
    if !r.is_square() {
        return Err(MmError::DimMismatch(format!("region {name} is {}x{}", r.rows, r.cols)));
    }
    Ok(())
}

fn src_of<'a, S: Semiring>(m: &'a Matrix<S>, r: &MatrixRegion) -> Src<'a, S> {
    Src::new(&m.as_slice()[r.offset(0, 0)..], r.stride, r.rows)
}

/// `C <- C ⊕ A ⊗ B` on `b x b` regions.
pub fn base_kernel<S: Semiring>(
    c: &mut Matrix<S>,
    cr: MatrixRegion,
    a: &Matrix<S>,
    ar: MatrixRegion,
    b: &Matrix<S>,
    br: MatrixRegion,
    base: usize,
) -> Result<()> {
    check_region(c, &cr, "C")?;
    check_region(a, &ar, "A")?;
    check_region(b, &br, "B")?;
    if ar.rows != cr.rows || br.rows != cr.rows {
        return Err(MmError::DimMismatch("base kernel regions differ in size".into()));
    }
    if cr.rows > base {
        return Err(MmError::NotBaseCase { dim: cr.rows, base });
    }
    let table = TileExclusionTable::new(1, 1, 1);
    // SAFETY: `c` is exclusively borrowed for the call.
    let dst = unsafe { Dst::from_raw(c.as_mut_slice().as_mut_ptr().add(cr.offset(0, 0)), cr.stride, cr.rows, &table) };
    kernel(dst, src_of(a, &ar), src_of(b, &br), false);
    Ok(())
}

/// `C <- C ⊕ D` elementwise, splitting into quadrant pairs processed in
/// parallel.
pub fn madd<S: Semiring>(c: &mut Matrix<S>, cr: MatrixRegion, d: &Matrix<S>, dr: MatrixRegion) -> Result<()> {
    check_region(c, &cr, "C")?;
    check_region(d, &dr, "D")?;
    if cr.rows != dr.rows {
        return Err(MmError::DimMismatch(format!("madd of {}x{} into {}x{}", dr.rows, dr.cols, cr.rows, cr.cols)));
    }
    let table = TileExclusionTable::new(1, 1, 1);
    // SAFETY: `c` is exclusively borrowed; quadrant tasks write disjoint parts.
    let dst = unsafe { Dst::from_raw(c.as_mut_slice().as_mut_ptr().add(cr.offset(0, 0)), cr.stride, cr.rows, &table) };
    madd_rec(dst, src_of(d, &dr), MADD_CUTOFF);
    Ok(())
}

/// The serial triple-loop product, used as the correctness oracle.
pub fn naive_mm<S: Semiring>(a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(MmError::DimMismatch(format!(
            "{}x{} times {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let n = a.rows();
    let mut c = Matrix::<S>::zeros(n, n);
    let (av, bv) = (a.as_slice(), b.as_slice());
    for (i, crow) in c.as_mut_slice().chunks_mut(n.max(1)).enumerate() {
        for k in 0..n {
            let aik = av[i * n + k];
            for (cij, &bkj) in crow.iter_mut().zip(&bv[k * n..(k + 1) * n]) {
                *cij = cij.add(aik.mul(bkj));
            }
        }
    }
    Ok(c)
}

/// Exact comparison for exact algebras, relative tolerance for floats.
pub fn matrices_equal<S: Semiring>(x: &Matrix<S>, y: &Matrix<S>, tol: f64) -> bool {
    x.rows() == y.rows()
        && x.cols() == y.cols()
        && x.as_slice().iter().zip(y.as_slice()).all(|(&p, &q)| p.close_to(q, tol))
}

/// Position and values of the first cell where `x` and `y` disagree.
pub fn first_mismatch<S: Semiring>(x: &Matrix<S>, y: &Matrix<S>, tol: f64) -> Option<(usize, usize, S, S)> {
    let n = x.cols().max(1);
    x.as_slice()
        .iter()
        .zip(y.as_slice())
        .position(|(&p, &q)| !p.close_to(q, tol))
        .map(|idx| (idx / n, idx % n, x.as_slice()[idx], y.as_slice()[idx]))
}
