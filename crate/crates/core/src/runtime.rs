//! Shared execution context: temporaries, worker lookup and fork helpers.

use crate::error::Result;
use crate::metrics::Metrics;
use crate::pool::{BlockHandle, BlockStorage, Pool};
use crate::semiring::Semiring;
use crate::view::Dst;

/// Everything a task needs besides its operands.
pub(crate) struct Ctx<'a, S> {
    pub pool: &'a Pool<S>,
    pub metrics: &'a Metrics,
    pub base: usize,
    /// Depth at which hybrid schedules switch (root is depth 0).
    pub switch: usize,
    /// Allocation discipline of the schedules that support both.
    pub pooled: bool,
    /// `0 ⊖ 1`, present only on rings.
    pub neg: Option<S>,
}

/// Index of the worker running the current task.
pub(crate) fn worker() -> usize {
    rayon::current_thread_index().unwrap_or(0)
}

/// Runs both closures, possibly in parallel, and reports the first error.
pub(crate) fn par2<A, B>(a: A, b: B) -> Result<()>
where
    A: FnOnce() -> Result<()> + Send,
    B: FnOnce() -> Result<()> + Send,
{
    let (x, y) = rayon::join(a, b);
    x.and(y)
}

pub(crate) fn par4<A, B, C, D>(a: A, b: B, c: C, d: D) -> Result<()>
where
    A: FnOnce() -> Result<()> + Send,
    B: FnOnce() -> Result<()> + Send,
    C: FnOnce() -> Result<()> + Send,
    D: FnOnce() -> Result<()> + Send,
{
    par2(|| par2(a, b), || par2(c, d))
}

/// Runs a list of tasks by recursive halving.
pub(crate) fn par_all<F>(tasks: Vec<F>) -> Result<()>
where
    F: FnOnce() -> Result<()> + Send,
{
    fn go<F: FnOnce() -> Result<()> + Send>(mut tasks: Vec<F>) -> Result<()> {
        match tasks.len() {
            0 => Ok(()),
            1 => (tasks.pop().unwrap())(),
            len => {
                let right = tasks.split_off(len / 2);
                par2(|| go(tasks), || go(right))
            }
        }
    }
    go(tasks)
}

/// A square temporary, pooled or freshly allocated.
pub(crate) enum Temp<S> {
    Pooled(BlockHandle<S>),
    Raw(Box<BlockStorage<S>>),
}

impl<S: Semiring> Temp<S> {
    /// An `n x n` temporary requested by a task at `depth`. Contents are
    /// unspecified.
    pub(crate) fn acquire(cx: &Ctx<'_, S>, depth: usize, n: usize, pooled: bool) -> Result<Self> {
        let elems = n * n;
        cx.metrics.record_alloc(depth, elems, pooled);
        if pooled {
            Ok(Temp::Pooled(cx.pool.acquire(worker(), elems)?))
        } else {
            Ok(Temp::Raw(Box::new(BlockStorage::allocate(elems, cx.base, u64::MAX)?)))
        }
    }

    fn storage(&self) -> &BlockStorage<S> {
        match self {
            Temp::Pooled(h) => h.storage(),
            Temp::Raw(s) => s,
        }
    }

    pub(crate) fn dst(&self) -> Dst<'_, S> {
        let s = self.storage();
        let (n, _) = s.dim();
        // SAFETY: the block is issued to this task until `release`.
        unsafe { Dst::from_raw(s.base_ptr(), n, n, s.tiles()) }
    }

    /// Marks every tile as holding garbage, so the first write stores.
    pub(crate) fn invalidate(&self) {
        self.storage().tiles().mark_all(false);
    }

    pub(crate) fn release(self, cx: &Ctx<'_, S>) -> Result<()> {
        match self {
            Temp::Pooled(h) => cx.pool.release(worker(), &h),
            Temp::Raw(_) => Ok(()),
        }
    }
}
