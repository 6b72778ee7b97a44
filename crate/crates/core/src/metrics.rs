//! Runtime counters: per-depth concurrency gauges, the leaf (base-case)
//! gauge, tile serialization and pair-protocol counts, and allocation logs.
//!
//! All updates are lock-free atomics except the allocation log, which is only
//! touched when a temporary is acquired.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU64, Ordering::Relaxed, Ordering::SeqCst};

use parking_lot::Mutex;
use serde::Serialize;

use crate::error::{MmError, Result};
use crate::pool::PoolStats;

/// Deepest recursion level tracked by the gauges.
pub const MAX_DEPTH: usize = 48;

/// Temporary acquisitions of one size at one recursion depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AllocRecord {
    pub depth: u32,
    pub elems: u64,
    pub pooled: bool,
    pub count: u64,
}

#[derive(Debug)]
pub struct Metrics {
    live: [AtomicI64; MAX_DEPTH],
    peak: [AtomicI64; MAX_DEPTH],
    leaf_live: AtomicI64,
    leaf_peak: AtomicI64,
    tile_entries: AtomicU64,
    pair_claims: AtomicU64,
    pair_completions: AtomicU64,
    lazy_temps: AtomicU64,
    raw_allocs: AtomicU64,
    raw_alloc_elems: AtomicU64,
    scratch_acquired: AtomicU64,
    scratch_released: AtomicU64,
    faults: AtomicU64,
    alloc_log: Mutex<BTreeMap<(u32, u64, bool), u64>>,
    running: AtomicBool,
}

/// Point-in-time copy of every counter, taken between runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSnapshot {
    /// Maximum simultaneous tasks seen at each depth (root is depth 0).
    pub depth_peaks: Vec<i64>,
    /// Maximum simultaneous base-case tasks.
    pub leaf_peak: i64,
    pub tile_serializations: u64,
    pub pair_claims: u64,
    pub pair_completions: u64,
    /// Second halves that found their sibling running and took a temporary.
    pub lazy_temps: u64,
    pub raw_allocs: u64,
    pub raw_alloc_elems: u64,
    pub scratch_acquired: u64,
    pub scratch_released: u64,
    pub alloc_log: Vec<AllocRecord>,
    pub faults: u64,
    /// Filled in by [`crate::Engine::snapshot`].
    pub pool: Option<PoolStats>,
}

impl MetricsSnapshot {
    pub fn pair_transitions(&self) -> u64 {
        self.pair_claims + self.pair_completions
    }

    /// Total acquisitions recorded in the allocation log.
    pub fn temp_requests(&self, pooled: bool) -> u64 {
        self.alloc_log.iter().filter(|r| r.pooled == pooled).map(|r| r.count).sum()
    }

    /// Total elements requested, weighted by count.
    pub fn temp_elems(&self, pooled: bool) -> u64 {
        self.alloc_log.iter().filter(|r| r.pooled == pooled).map(|r| r.count * r.elems).sum()
    }
}

impl Default for Metrics {
    fn default() -> Self {
        Self::new()
    }
}

fn bump_peak(live: &AtomicI64, peak: &AtomicI64) {
    let now = live.fetch_add(1, SeqCst) + 1;
    peak.fetch_max(now, SeqCst);
}

fn drop_gauge(live: &AtomicI64) -> Result<()> {
    let before = live.fetch_sub(1, SeqCst);
    if before <= 0 {
        live.fetch_add(1, SeqCst);
        return Err(MmError::InternalError("gauge would go negative: unbalanced task exit".into()));
    }
    Ok(())
}

impl Metrics {
    pub fn new() -> Self {
        Metrics {
            live: std::array::from_fn(|_| AtomicI64::new(0)),
            peak: std::array::from_fn(|_| AtomicI64::new(0)),
            leaf_live: AtomicI64::new(0),
            leaf_peak: AtomicI64::new(0),
            tile_entries: AtomicU64::new(0),
            pair_claims: AtomicU64::new(0),
            pair_completions: AtomicU64::new(0),
            lazy_temps: AtomicU64::new(0),
            raw_allocs: AtomicU64::new(0),
            raw_alloc_elems: AtomicU64::new(0),
            scratch_acquired: AtomicU64::new(0),
            scratch_released: AtomicU64::new(0),
            faults: AtomicU64::new(0),
            alloc_log: Mutex::new(BTreeMap::new()),
            running: AtomicBool::new(false),
        }
    }

    pub fn task_enter(&self, depth: usize) {
        let d = depth.min(MAX_DEPTH - 1);
        bump_peak(&self.live[d], &self.peak[d]);
    }

    pub fn task_exit(&self, depth: usize) -> Result<()> {
        drop_gauge(&self.live[depth.min(MAX_DEPTH - 1)])
    }

    pub fn leaf_enter(&self) {
        bump_peak(&self.leaf_live, &self.leaf_peak);
    }

    pub fn leaf_exit(&self) -> Result<()> {
        drop_gauge(&self.leaf_live)
    }

    pub(crate) fn task(&self, depth: usize) -> TaskGuard<'_> {
        self.task_enter(depth);
        TaskGuard { metrics: self, depth: Some(depth) }
    }

    pub(crate) fn leaf(&self) -> TaskGuard<'_> {
        self.leaf_enter();
        TaskGuard { metrics: self, depth: None }
    }

    pub(crate) fn record_tile_entry(&self) {
        self.tile_entries.fetch_add(1, Relaxed);
    }

    pub(crate) fn record_pair_claim(&self) {
        self.pair_claims.fetch_add(1, Relaxed);
    }

    pub(crate) fn record_pair_completion(&self) {
        self.pair_completions.fetch_add(1, Relaxed);
    }

    pub(crate) fn record_lazy_temp(&self) {
        self.lazy_temps.fetch_add(1, Relaxed);
    }

    pub(crate) fn record_alloc(&self, depth: usize, elems: usize, pooled: bool) {
        if !pooled {
            self.raw_allocs.fetch_add(1, Relaxed);
            self.raw_alloc_elems.fetch_add(elems as u64, Relaxed);
        }
        *self.alloc_log.lock().entry((depth as u32, elems as u64, pooled)).or_insert(0) += 1;
    }

    pub(crate) fn record_scratch(&self, acquired: u64, released: u64) {
        self.scratch_acquired.fetch_add(acquired, Relaxed);
        self.scratch_released.fetch_add(released, Relaxed);
    }

    pub(crate) fn record_fault(&self) {
        self.faults.fetch_add(1, Relaxed);
    }

    pub fn begin_run(&self) -> Result<()> {
        if self.running.swap(true, SeqCst) {
            return Err(MmError::ContractViolation("a run is already in progress".into()));
        }
        Ok(())
    }

    pub fn end_run(&self) {
        self.running.store(false, SeqCst);
    }

    pub fn is_running(&self) -> bool {
        self.running.load(SeqCst)
    }

    pub fn snapshot(&self) -> MetricsSnapshot {
        let mut depth_peaks: Vec<i64> = self.peak.iter().map(|p| p.load(SeqCst)).collect();
        while depth_peaks.last() == Some(&0) {
            depth_peaks.pop();
        }
        MetricsSnapshot {
            depth_peaks,
            leaf_peak: self.leaf_peak.load(SeqCst),
            tile_serializations: self.tile_entries.load(SeqCst),
            pair_claims: self.pair_claims.load(SeqCst),
            pair_completions: self.pair_completions.load(SeqCst),
            lazy_temps: self.lazy_temps.load(SeqCst),
            raw_allocs: self.raw_allocs.load(SeqCst),
            raw_alloc_elems: self.raw_alloc_elems.load(SeqCst),
            scratch_acquired: self.scratch_acquired.load(SeqCst),
            scratch_released: self.scratch_released.load(SeqCst),
            alloc_log: self
                .alloc_log
                .lock()
                .iter()
                .map(|(&(depth, elems, pooled), &count)| AllocRecord { depth, elems, pooled, count })
                .collect(),
            faults: self.faults.load(SeqCst),
            pool: None,
        }
    }

    pub fn reset(&self) -> Result<()> {
        if self.is_running() {
            return Err(MmError::ContractViolation("reset during a run".into()));
        }
        for a in self.live.iter().chain(self.peak.iter()) {
            a.store(0, SeqCst);
        }
        for a in [&self.leaf_live, &self.leaf_peak] {
            a.store(0, SeqCst);
        }
        for a in [
            &self.tile_entries,
            &self.pair_claims,
            &self.pair_completions,
            &self.lazy_temps,
            &self.raw_allocs,
            &self.raw_alloc_elems,
            &self.scratch_acquired,
            &self.scratch_released,
            &self.faults,
        ] {
            a.store(0, SeqCst);
        }
        self.alloc_log.lock().clear();
        Ok(())
    }
}

/// Decrements its gauge on drop; an unbalanced exit is counted as a fault.
pub(crate) struct TaskGuard<'a> {
    metrics: &'a Metrics,
    depth: Option<usize>,
}

impl Drop for TaskGuard<'_> {
    fn drop(&mut self) {
        let res = match self.depth {
            Some(d) => self.metrics.task_exit(d),
            None => self.metrics.leaf_exit(),
        };
        if res.is_err() {
            self.metrics.record_fault();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_snapshot_is_zero() {
        let m = Metrics::new();
        let s = m.snapshot();
        assert!(s.depth_peaks.is_empty());
        assert_eq!(s.leaf_peak, 0);
        assert_eq!(s.tile_serializations, 0);
        assert_eq!(s.pair_transitions(), 0);
        assert!(s.alloc_log.is_empty());
    }

    #[test]
    fn serial_nesting_peaks_at_one() {
        let m = Metrics::new();
        for d in 0..4 {
            let _t = m.task(d);
            for _ in 0..3 {
                let _leaf = m.leaf();
            }
        }
        let s = m.snapshot();
        assert_eq!(s.depth_peaks, vec![1, 1, 1, 1]);
        assert_eq!(s.leaf_peak, 1);
        assert_eq!(s.faults, 0);
    }

    #[test]
    fn unbalanced_exit_is_an_internal_error() {
        let m = Metrics::new();
        assert!(matches!(m.task_exit(2), Err(MmError::InternalError(_))));
        assert!(matches!(m.leaf_exit(), Err(MmError::InternalError(_))));
        m.task_enter(2);
        assert!(m.task_exit(2).is_ok());
    }

    #[test]
    fn reset_refused_during_run() {
        let m = Metrics::new();
        m.begin_run().unwrap();
        assert!(matches!(m.reset(), Err(MmError::ContractViolation(_))));
        assert!(m.begin_run().is_err());
        m.end_run();
        m.task_enter(0);
        m.reset().unwrap();
        assert!(m.snapshot().depth_peaks.is_empty());
    }
}
