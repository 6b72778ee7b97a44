//! Per-worker LIFO memory pool.
//!
//! A request for `size` elements on worker `w` pops the block that worker most
//! recently released at exactly that size, so a recursion that repeatedly
//! asks for the same temporary on one worker keeps getting the same memory.
//! Blocks are never returned to the system during a run; [`Pool::reset`]
//! drops them between runs.

use std::cell::UnsafeCell;
use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering::SeqCst};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::Serialize;

use crate::error::{MmError, Result};
use crate::exclusion::TileExclusionTable;
use crate::semiring::Semiring;

/// Bytes per element; every provided algebra is 64 bits wide.
pub const ELEM_BYTES: u64 = 8;

/// Reuse discipline. `AlwaysFresh` exists only as a negative control for the
/// verifier: it never hands a released block out again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum PoolPolicy {
    #[default]
    Lifo,
    AlwaysFresh,
}

pub(crate) struct BlockStorage<S> {
    cells: Box<[UnsafeCell<S>]>,
    dim: (usize, usize),
    tiles: TileExclusionTable,
    issued: AtomicBool,
    id: u64,
}

// Cells are only written through views whose disjointness (or tile locking)
// is guaranteed by the algorithms.
unsafe impl<S: Send> Send for BlockStorage<S> {}
unsafe impl<S: Send + Sync> Sync for BlockStorage<S> {}

impl<S: Semiring> BlockStorage<S> {
    pub(crate) fn allocate(size: usize, tile: usize, id: u64) -> Result<Self> {
        let mut cells: Vec<UnsafeCell<S>> = Vec::new();
        cells.try_reserve_exact(size).map_err(|_| MmError::AllocFailure(size))?;
        cells.extend((0..size).map(|_| UnsafeCell::new(S::zero())));
        let side = size.isqrt();
        let dim = if side * side == size { (side, side) } else { (1, size) };
        Ok(BlockStorage {
            cells: cells.into_boxed_slice(),
            dim,
            tiles: TileExclusionTable::new(dim.0, dim.1, tile),
            issued: AtomicBool::new(false),
            id,
        })
    }

    pub(crate) fn base_ptr(&self) -> *mut S {
        // UnsafeCell<S> has the same layout as S.
        self.cells.as_ptr() as *mut S
    }

    pub(crate) fn dim(&self) -> (usize, usize) {
        self.dim
    }

    pub(crate) fn tiles(&self) -> &TileExclusionTable {
        &self.tiles
    }
}

/// An issued (or pooled) block. Cloning the handle does not clone the block.
pub struct BlockHandle<S> {
    id: u64,
    size: usize,
    owner: usize,
    storage: Arc<BlockStorage<S>>,
}

impl<S> Clone for BlockHandle<S> {
    fn clone(&self) -> Self {
        BlockHandle { id: self.id, size: self.size, owner: self.owner, storage: Arc::clone(&self.storage) }
    }
}

impl<S> std::fmt::Debug for BlockHandle<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockHandle").field("id", &self.id).field("size", &self.size).field("owner", &self.owner).finish()
    }
}

impl<S: Semiring> BlockHandle<S> {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn is_issued(&self) -> bool {
        self.storage.issued.load(SeqCst)
    }

    pub(crate) fn storage(&self) -> &BlockStorage<S> {
        &self.storage
    }

    /// Copies the block out. Only meaningful while no task writes to it.
    pub fn to_vec(&self) -> Vec<S> {
        // SAFETY: callers hold the only handle in use; no concurrent writers.
        self.storage.cells.iter().map(|c| unsafe { *c.get() }).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PoolStats {
    pub total_allocated_bytes: u64,
    pub issued_bytes: u64,
    pub high_water_bytes: u64,
    pub fresh_allocations: u64,
    pub reuses: u64,
    pub acquires: u64,
    pub releases: u64,
    pub per_worker_high_water_bytes: Vec<u64>,
}

impl PoolStats {
    pub fn high_water_elems(&self) -> u64 {
        self.high_water_bytes / ELEM_BYTES
    }
}

struct WorkerShard<S> {
    free: HashMap<usize, Vec<Arc<BlockStorage<S>>>>,
}

#[derive(Default)]
struct WorkerCounters {
    issued: AtomicU64,
    high_water: AtomicU64,
}

pub struct Pool<S> {
    tile: usize,
    policy: PoolPolicy,
    shards: Box<[Mutex<WorkerShard<S>>]>,
    per_worker: Box<[WorkerCounters]>,
    next_id: AtomicU64,
    total_allocated: AtomicU64,
    issued: AtomicU64,
    high_water: AtomicU64,
    fresh: AtomicU64,
    reuses: AtomicU64,
    acquires: AtomicU64,
    releases: AtomicU64,
}

impl<S: Semiring> Pool<S> {
    /// Pool for `workers` workers. `tile` sizes the exclusion table attached
    /// to every block.
    pub fn new(workers: usize, tile: usize) -> Self {
        Self::with_policy(workers, tile, PoolPolicy::Lifo)
    }

    pub fn with_policy(workers: usize, tile: usize, policy: PoolPolicy) -> Self {
        let workers = workers.max(1);
        Pool {
            tile,
            policy,
            shards: (0..workers).map(|_| Mutex::new(WorkerShard { free: HashMap::new() })).collect(),
            per_worker: (0..workers).map(|_| WorkerCounters::default()).collect(),
            next_id: AtomicU64::new(0),
            total_allocated: AtomicU64::new(0),
            issued: AtomicU64::new(0),
            high_water: AtomicU64::new(0),
            fresh: AtomicU64::new(0),
            reuses: AtomicU64::new(0),
            acquires: AtomicU64::new(0),
            releases: AtomicU64::new(0),
        }
    }

    pub fn workers(&self) -> usize {
        self.shards.len()
    }

    pub fn policy(&self) -> PoolPolicy {
        self.policy
    }

    /// Hands out a block of `size` elements owned by `worker`. Reused blocks
    /// keep their old contents.
    pub fn acquire(&self, worker: usize, size: usize) -> Result<BlockHandle<S>> {
        if size == 0 {
            return Err(MmError::ContractViolation("zero-sized acquire".into()));
        }
        let shard = self
            .shards
            .get(worker)
            .ok_or_else(|| MmError::ContractViolation(format!("worker {worker} out of range")))?;
        let reused = match self.policy {
            PoolPolicy::Lifo => shard.lock().free.get_mut(&size).and_then(Vec::pop),
            PoolPolicy::AlwaysFresh => None,
        };
        let (storage, id) = match reused {
            Some(s) => {
                self.reuses.fetch_add(1, SeqCst);
                let id = s.id;
                (s, id)
            }
            None => {
                let id = self.next_id.fetch_add(1, SeqCst);
                let s = Arc::new(BlockStorage::allocate(size, self.tile, id)?);
                self.fresh.fetch_add(1, SeqCst);
                self.total_allocated.fetch_add(size as u64 * ELEM_BYTES, SeqCst);
                (s, id)
            }
        };
        storage.issued.store(true, SeqCst);
        self.acquires.fetch_add(1, SeqCst);
        let bytes = size as u64 * ELEM_BYTES;
        let now = self.issued.fetch_add(bytes, SeqCst) + bytes;
        self.high_water.fetch_max(now, SeqCst);
        let w = &self.per_worker[worker];
        let wnow = w.issued.fetch_add(bytes, SeqCst) + bytes;
        w.high_water.fetch_max(wnow, SeqCst);
        Ok(BlockHandle { id, size, owner: worker, storage })
    }

    /// Returns `h` to its owner's stack. Must be called on the owner worker,
    /// once per acquire.
    pub fn release(&self, worker: usize, h: &BlockHandle<S>) -> Result<()> {
        if h.owner != worker {
            return Err(MmError::ContractViolation(format!(
                "block {} owned by worker {} released on worker {worker}",
                h.id, h.owner
            )));
        }
        if !h.storage.issued.swap(false, SeqCst) {
            return Err(MmError::ContractViolation(format!("block {} released twice", h.id)));
        }
        let bytes = h.size as u64 * ELEM_BYTES;
        self.issued.fetch_sub(bytes, SeqCst);
        self.per_worker[worker].issued.fetch_sub(bytes, SeqCst);
        self.releases.fetch_add(1, SeqCst);
        if self.policy == PoolPolicy::Lifo {
            self.shards[worker].lock().free.entry(h.size).or_default().push(Arc::clone(&h.storage));
        }
        Ok(())
    }

    /// Maximum simultaneously issued bytes since the last reset.
    pub fn high_water(&self) -> (u64, Vec<u64>) {
        (
            self.high_water.load(SeqCst),
            self.per_worker.iter().map(|w| w.high_water.load(SeqCst)).collect(),
        )
    }

    pub fn stats(&self) -> PoolStats {
        let (high_water_bytes, per_worker_high_water_bytes) = self.high_water();
        PoolStats {
            total_allocated_bytes: self.total_allocated.load(SeqCst),
            issued_bytes: self.issued.load(SeqCst),
            high_water_bytes,
            fresh_allocations: self.fresh.load(SeqCst),
            reuses: self.reuses.load(SeqCst),
            acquires: self.acquires.load(SeqCst),
            releases: self.releases.load(SeqCst),
            per_worker_high_water_bytes,
        }
    }

    /// Drops every pooled block and zeroes the counters. Refused while any
    /// block is still issued.
    pub fn reset(&self) -> Result<()> {
        if self.issued.load(SeqCst) != 0 {
            return Err(MmError::ContractViolation("pool reset with blocks still issued".into()));
        }
        for shard in self.shards.iter() {
            shard.lock().free.clear();
        }
        for a in [
            &self.total_allocated,
            &self.high_water,
            &self.fresh,
            &self.reuses,
            &self.acquires,
            &self.releases,
        ] {
            a.store(0, SeqCst);
        }
        for w in self.per_worker.iter() {
            w.high_water.store(0, SeqCst);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reacquire_returns_same_block() {
        let pool = Pool::<i64>::new(2, 8);
        let h1 = pool.acquire(0, 64).unwrap();
        pool.release(0, &h1).unwrap();
        let h2 = pool.acquire(0, 64).unwrap();
        assert_eq!(h1.id(), h2.id());
    }

    #[test]
    fn nothing_pooled_gives_distinct_blocks() {
        let pool = Pool::<i64>::new(1, 8);
        let a = pool.acquire(0, 64).unwrap();
        let b = pool.acquire(0, 64).unwrap();
        assert_ne!(a.id(), b.id());
    }

    #[test]
    fn lifo_order() {
        let pool = Pool::<i64>::new(1, 8);
        let h1 = pool.acquire(0, 16).unwrap();
        let h2 = pool.acquire(0, 16).unwrap();
        pool.release(0, &h1).unwrap();
        pool.release(0, &h2).unwrap();
        assert_eq!(pool.acquire(0, 16).unwrap().id(), h2.id());
        assert_eq!(pool.acquire(0, 16).unwrap().id(), h1.id());
    }

    #[test]
    fn release_contract() {
        let pool = Pool::<i64>::new(2, 8);
        let h = pool.acquire(0, 4).unwrap();
        assert!(matches!(pool.release(1, &h), Err(MmError::ContractViolation(_))));
        pool.release(0, &h).unwrap();
        assert!(!h.is_issued());
        assert!(matches!(pool.release(0, &h), Err(MmError::ContractViolation(_))));
        assert!(matches!(pool.acquire(5, 4), Err(MmError::ContractViolation(_))));
        assert!(matches!(pool.acquire(0, 0), Err(MmError::ContractViolation(_))));
    }

    #[test]
    fn high_water_accounting() {
        let pool = Pool::<f64>::new(1, 8);
        assert_eq!(pool.high_water().0, 0);
        let h = pool.acquire(0, 64).unwrap();
        assert_eq!(pool.high_water().0, 512);
        pool.release(0, &h).unwrap();
        let h = pool.acquire(0, 64).unwrap();
        pool.release(0, &h).unwrap();
        let s = pool.stats();
        assert_eq!(s.high_water_bytes, 512);
        assert_eq!(s.fresh_allocations, 1);
        assert_eq!(s.reuses, 1);
        assert_eq!(s.issued_bytes, 0);
    }

    #[test]
    fn sabotaged_policy_never_reuses() {
        let pool = Pool::<i64>::with_policy(1, 8, PoolPolicy::AlwaysFresh);
        for _ in 0..3 {
            let h = pool.acquire(0, 64).unwrap();
            pool.release(0, &h).unwrap();
        }
        assert_eq!(pool.stats().fresh_allocations, 3);
    }

    #[test]
    fn reset_requires_quiescence() {
        let pool = Pool::<i64>::new(1, 8);
        let h = pool.acquire(0, 4).unwrap();
        assert!(pool.reset().is_err());
        pool.release(0, &h).unwrap();
        pool.reset().unwrap();
        assert_eq!(pool.stats(), PoolStats { per_worker_high_water_bytes: vec![0], ..Default::default() });
    }
}
