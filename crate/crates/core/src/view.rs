//! Raw square views shared between tasks.
//!
//! The recursion hands the same output buffer to many tasks at once. Safety
//! rests on the schedules: a view is written either by exactly one task, or
//! only inside the exclusion slot of the tile being written.

use std::marker::PhantomData;

use crate::exclusion::TileExclusionTable;
use crate::metrics::Metrics;

/// Read-only square view.
pub(crate) struct Src<'a, S> {
    ptr: *const S,
    stride: usize,
    n: usize,
    _life: PhantomData<&'a [S]>,
}

impl<S> Clone for Src<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<S> Copy for Src<'_, S> {}

// Views are plain descriptors; what may be done through them is governed by
// the schedule (see module docs).
unsafe impl<S: Sync> Send for Src<'_, S> {}
unsafe impl<S: Sync> Sync for Src<'_, S> {}

impl<'a, S> Src<'a, S> {
    pub(crate) fn new(data: &'a [S], stride: usize, n: usize) -> Self {
        assert!(n == 0 || (n - 1) * stride + n <= data.len());
        Src { ptr: data.as_ptr(), stride, n, _life: PhantomData }
    }

    #[inline]
    pub(crate) fn quad(&self, i: usize, j: usize) -> Self {
        let h = self.n / 2;
        Src { ptr: self.ptr.wrapping_add(i * h * self.stride + j * h), stride: self.stride, n: h, _life: PhantomData }
    }

    /// The `m x m` sub-view starting at `(i, j)`.
    #[inline]
    pub(crate) fn sub(&self, (i, j): (usize, usize), m: usize) -> Self {
        debug_assert!(i + m <= self.n && j + m <= self.n);
        Src { ptr: self.ptr.wrapping_add(i * self.stride + j), stride: self.stride, n: m, _life: PhantomData }
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &'a [S] {
        debug_assert!(i < self.n);
        // SAFETY: in bounds by construction.
        unsafe { std::slice::from_raw_parts(self.ptr.add(i * self.stride), self.n) }
    }
}

/// Writable square view, tied to the exclusion table of its buffer.
pub(crate) struct Dst<'a, S> {
    ptr: *mut S,
    stride: usize,
    n: usize,
    row0: usize,
    col0: usize,
    tiles: &'a TileExclusionTable,
}

impl<S> Clone for Dst<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<S> Copy for Dst<'_, S> {}

unsafe impl<S: Send> Send for Dst<'_, S> {}
unsafe impl<S: Send> Sync for Dst<'_, S> {}

impl<'a, S> Dst<'a, S> {
    /// # Safety
    /// `ptr` must address the origin of an `n x n` buffer of stride `stride`
    /// that outlives `'a`, and every write through the returned view (or its
    /// quadrants) must follow the schedule rules in the module docs.
    pub(crate) unsafe fn from_raw(ptr: *mut S, stride: usize, n: usize, tiles: &'a TileExclusionTable) -> Self {
        Dst { ptr, stride, n, row0: 0, col0: 0, tiles }
    }

    #[inline]
    pub(crate) fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub(crate) fn quad(&self, i: usize, j: usize) -> Self {
        let h = self.n / 2;
        Dst {
            ptr: self.ptr.wrapping_add(i * h * self.stride + j * h),
            stride: self.stride,
            n: h,
            row0: self.row0 + i * h,
            col0: self.col0 + j * h,
            tiles: self.tiles,
        }
    }

    /// The `m x m` sub-view starting at `(i, j)`.
    #[inline]
    pub(crate) fn sub(&self, (i, j): (usize, usize), m: usize) -> Self {
        debug_assert!(i + m <= self.n && j + m <= self.n);
        Dst {
            ptr: self.ptr.wrapping_add(i * self.stride + j),
            stride: self.stride,
            n: m,
            row0: self.row0 + i,
            col0: self.col0 + j,
            tiles: self.tiles,
        }
    }

    #[inline]
    pub(crate) fn as_src(&self) -> Src<'a, S> {
        Src { ptr: self.ptr, stride: self.stride, n: self.n, _life: PhantomData }
    }

    /// # Safety
    /// The caller must be the only writer of row `i` of this view for the
    /// lifetime of the slice.
    #[inline]
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn row_mut(&self, i: usize) -> &mut [S] {
        debug_assert!(i < self.n);
        std::slice::from_raw_parts_mut(self.ptr.add(i * self.stride), self.n)
    }

    pub(crate) fn tiles(&self) -> &'a TileExclusionTable {
        self.tiles
    }

    /// Runs `f` on every tile-sized sub-view, each inside its exclusion slot.
    /// `f` receives the tile view, its offset within this view, and whether
    /// the tile held valid data.
    pub(crate) fn for_each_tile_locked(&self, metrics: &Metrics, mut f: impl FnMut(Dst<'a, S>, (usize, usize), bool)) {
        let (t, _) = self.tiles.tile_dim();
        let t = t.min(self.n);
        for ti in (0..self.n).step_by(t) {
            for tj in (0..self.n).step_by(t) {
                let tile = Dst {
                    ptr: self.ptr.wrapping_add(ti * self.stride + tj),
                    stride: self.stride,
                    n: t,
                    row0: self.row0 + ti,
                    col0: self.col0 + tj,
                    tiles: self.tiles,
                };
                self.tiles.with_tile(tile.row0, tile.col0, |init| {
                    metrics.record_tile_entry();
                    f(tile, (ti, tj), *init);
                    *init = true;
                });
            }
        }
    }
}
