//! Serialization points for concurrent writes.
//!
//! [`TileExclusionTable`] gives every aligned `b x b` tile of a buffer one
//! exclusion slot. The slot also records whether the tile already holds a
//! valid partial result, which lets temporaries skip zeroing: the first write
//! into an uninitialized tile stores, later writes accumulate.
//!
//! [`PairState`] coordinates the two sub-products that update the same output
//! quadrant under lazy allocation.

use std::sync::atomic::{AtomicU64, AtomicU8, Ordering};

use parking_lot::Mutex;

use crate::error::{MmError, Result};
use crate::matrix::MatrixRegion;

#[derive(Debug)]
struct TileSlot {
    initialized: Mutex<bool>,
    entries: AtomicU64,
}

#[derive(Debug)]
pub struct TileExclusionTable {
    tile_rows: usize,
    tile_cols: usize,
    tiles_per_row: usize,
    rows: usize,
    cols: usize,
    slots: Box<[TileSlot]>,
}

impl TileExclusionTable {
    /// Table for a `rows x cols` buffer. Every tile starts initialized.
    pub fn new(rows: usize, cols: usize, tile: usize) -> Self {
        let tile_rows = tile.min(rows).max(1);
        let tile_cols = tile.min(cols).max(1);
        let tiles_per_row = cols.div_ceil(tile_cols).max(1);
        let count = rows.div_ceil(tile_rows).max(1) * tiles_per_row;
        let slots = (0..count)
            .map(|_| TileSlot { initialized: Mutex::new(true), entries: AtomicU64::new(0) })
            .collect();
        TileExclusionTable { tile_rows, tile_cols, tiles_per_row, rows, cols, slots }
    }

    pub fn tile_dim(&self) -> (usize, usize) {
        (self.tile_rows, self.tile_cols)
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    fn slot_index(&self, row: usize, col: usize) -> usize {
        (row / self.tile_rows) * self.tiles_per_row + col / self.tile_cols
    }

    /// Serialized entries recorded by the slot containing cell `(row, col)`.
    pub fn entries_at(&self, row: usize, col: usize) -> u64 {
        self.slots[self.slot_index(row, col)].entries.load(Ordering::SeqCst)
    }

    pub fn total_entries(&self) -> u64 {
        self.slots.iter().map(|s| s.entries.load(Ordering::SeqCst)).sum()
    }

    /// Marks every tile as holding valid data (`true`) or garbage (`false`).
    pub fn mark_all(&self, initialized: bool) {
        for s in self.slots.iter() {
            *s.initialized.lock() = initialized;
        }
    }

    pub fn reset_counters(&self) {
        for s in self.slots.iter() {
            s.entries.store(0, Ordering::SeqCst);
        }
    }

    pub fn check_aligned(&self, r: &MatrixRegion) -> Result<()> {
        let row_ok = r.row0 % self.tile_rows == 0
            && (r.rows % self.tile_rows == 0 || r.row0 + r.rows == self.rows);
        let col_ok = r.col0 % self.tile_cols == 0
            && (r.cols % self.tile_cols == 0 || r.col0 + r.cols == self.cols);
        if row_ok && col_ok && r.row0 + r.rows <= self.rows && r.col0 + r.cols <= self.cols {
            Ok(())
        } else {
            Err(MmError::AlignmentError(self.tile_rows))
        }
    }

    /// Visits the tiles covered by `r` in row-major order, yielding the tile's
    /// sub-region.
    pub fn tiles_of(&self, r: &MatrixRegion) -> impl Iterator<Item = MatrixRegion> + '_ {
        let r = *r;
        let (th, tw) = (self.tile_rows, self.tile_cols);
        (r.row0..r.row0 + r.rows).step_by(th).flat_map(move |row| {
            (r.col0..r.col0 + r.cols).step_by(tw).map(move |col| MatrixRegion {
                row0: row,
                col0: col,
                rows: th.min(r.row0 + r.rows - row),
                cols: tw.min(r.col0 + r.cols - col),
                stride: r.stride,
            })
        })
    }

    /// Runs `f` inside the exclusion slot of the tile containing `(row, col)`.
    /// `f` receives the tile's initialized flag and may update it.
    pub(crate) fn with_tile<R>(&self, row: usize, col: usize, f: impl FnOnce(&mut bool) -> R) -> R {
        let slot = &self.slots[self.slot_index(row, col)];
        let mut init = slot.initialized.lock();
        slot.entries.fetch_add(1, Ordering::Relaxed);
        f(&mut init)
    }
}

/// How a half arrived at its pair's coordination point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrival {
    /// Claimed the parent's region; must call [`PairState::finish_first`].
    First,
    /// The sibling is still running: take a temporary.
    WhileRunning,
    /// The sibling already finished: reuse the parent's region.
    AfterDone,
}

const EMPTY: u8 = 0;
const FIRST_RUNNING: u8 = 1;
const FIRST_DONE: u8 = 2;

/// Per sibling-pair state: `Empty -> FirstRunning -> FirstDone`.
#[derive(Debug, Default)]
pub struct PairState(AtomicU8);

impl PairState {
    pub fn new() -> Self {
        PairState(AtomicU8::new(EMPTY))
    }

    pub fn arrive(&self) -> Arrival {
        match self.0.compare_exchange(EMPTY, FIRST_RUNNING, Ordering::AcqRel, Ordering::Acquire) {
            Ok(_) => Arrival::First,
            Err(FIRST_RUNNING) => Arrival::WhileRunning,
            Err(_) => Arrival::AfterDone,
        }
    }

    pub fn finish_first(&self) -> Result<()> {
        self.0
            .compare_exchange(FIRST_RUNNING, FIRST_DONE, Ordering::AcqRel, Ordering::Acquire)
            .map(|_| ())
            .map_err(|s| MmError::ContractViolation(format!("finish_first from state {s}")))
    }

    pub fn is_done(&self) -> bool {
        self.0.load(Ordering::Acquire) == FIRST_DONE
    }
}
