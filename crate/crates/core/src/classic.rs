//! The classical schedules: CO2, CO3, TAR, SAR and STAR.
//!
//! Quadrant `(i, j)` of `C` receives a "top" product `A_i0 ⊗ B_0j` and a
//! "bottom" product `A_i1 ⊗ B_1j`. The schedules differ only in how the two
//! are ordered and where the bottom one writes.

use crate::error::Result;
use crate::exclusion::{Arrival, PairState};
use crate::kernel::{accumulate, kernel, kernel_locked, madd_rec};
use crate::runtime::{par4, par2, Ctx, Temp};
use crate::semiring::Semiring;
use crate::view::{Dst, Src};

pub(crate) type Fut<'s> = Box<dyn FnOnce() -> Result<()> + Send + 's>;

/// The eight sub-products in canonical order: the four tops, then the four
/// bottoms. Each entry is `(i, j, l)` for `C_ij <- A_il ⊗ B_lj`.
pub(crate) const SUBPRODUCTS: [(usize, usize, usize); 8] =
    [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 0), (0, 0, 1), (0, 1, 1), (1, 0, 1), (1, 1, 1)];

pub(crate) fn par8(t: [Fut<'_>; 8]) -> Result<()> {
    let [a, b, c, d, e, f, g, h] = t;
    par2(|| par4(a, b, c, d), || par4(e, f, g, h))
}

pub(crate) fn co2<S: Semiring>(cx: &Ctx<'_, S>, c: Dst<'_, S>, a: Src<'_, S>, b: Src<'_, S>, d: usize) -> Result<()> {
    let _g = cx.metrics.task(d);
    if c.n() <= cx.base {
        let _leaf = cx.metrics.leaf();
        kernel(c, a, b, false);
        return Ok(());
    }
    let step = |l: usize| {
        let sub = |i, j| move || co2(cx, c.quad(i, j), a.quad(i, l), b.quad(l, j), d + 1);
        par4(sub(0, 0), sub(0, 1), sub(1, 0), sub(1, 1))
    };
    step(0)?;
    step(1)
}

/// `overwrite` turns the update into `C <- A ⊗ B`, which is how the bottom
/// half fills a temporary that was never zeroed.
pub(crate) fn co3<S: Semiring>(
    cx: &Ctx<'_, S>,
    c: Dst<'_, S>,
    a: Src<'_, S>,
    b: Src<'_, S>,
    d: usize,
    overwrite: bool,
) -> Result<()> {
    let _g = cx.metrics.task(d);
    if c.n() <= cx.base {
        let _leaf = cx.metrics.leaf();
        kernel(c, a, b, overwrite);
        return Ok(());
    }
    let tmp = Temp::acquire(cx, d, c.n(), cx.pooled)?;
    let t = tmp.dst();
    let res = par8(SUBPRODUCTS.map(|(i, j, l)| -> Fut<'_> {
        if l == 0 {
            Box::new(move || co3(cx, c.quad(i, j), a.quad(i, 0), b.quad(0, j), d + 1, overwrite))
        } else {
            Box::new(move || co3(cx, t.quad(i, j), a.quad(i, 1), b.quad(1, j), d + 1, true))
        }
    }));
    if res.is_ok() {
        madd_rec(c, t.as_src(), cx.base);
    }
    tmp.release(cx).and(res)
}

/// Base case shared by TAR and the upper levels of STAR: compute into a
/// private pooled block, then fold it into `C` under the tile slot.
pub(crate) fn tar_leaf<S: Semiring>(cx: &Ctx<'_, S>, c: Dst<'_, S>, a: Src<'_, S>, b: Src<'_, S>, d: usize) -> Result<()> {
    let _leaf = cx.metrics.leaf();
    let tmp = Temp::acquire(cx, d, c.n(), true)?;
    kernel(tmp.dst(), a, b, true);
    accumulate(c, tmp.dst().as_src(), None, cx.metrics);
    tmp.release(cx)
}

pub(crate) fn tar<S: Semiring>(cx: &Ctx<'_, S>, c: Dst<'_, S>, a: Src<'_, S>, b: Src<'_, S>, d: usize) -> Result<()> {
    let _g = cx.metrics.task(d);
    if c.n() <= cx.base {
        return tar_leaf(cx, c, a, b, d);
    }
    par8(SUBPRODUCTS.map(|(i, j, l)| -> Fut<'_> {
        Box::new(move || tar(cx, c.quad(i, j), a.quad(i, l), b.quad(l, j), d + 1))
    }))
}

/// One half of a sibling pair under lazy allocation. `inner` is the schedule
/// that computes the half's product into whatever region it is given.
pub(crate) fn lazy_half<'v, S, F>(
    cx: &Ctx<'_, S>,
    pair: &PairState,
    c: Dst<'v, S>,
    d: usize,
    inner: F,
) -> Result<()>
where
    S: Semiring,
    F: for<'t> Fn(Dst<'t, S>) -> Result<()>,
{
    match pair.arrive() {
        Arrival::First => {
            cx.metrics.record_pair_claim();
            inner(c)?;
            pair.finish_first()?;
            cx.metrics.record_pair_completion();
            Ok(())
        }
        Arrival::WhileRunning => {
            cx.metrics.record_lazy_temp();
            let tmp = Temp::acquire(cx, d, c.n(), true)?;
            tmp.invalidate();
            let res = inner(tmp.dst());
            if res.is_ok() {
                accumulate(c, tmp.dst().as_src(), None, cx.metrics);
            }
            tmp.release(cx).and(res)
        }
        Arrival::AfterDone => inner(c),
    }
}

pub(crate) fn sar<S: Semiring>(cx: &Ctx<'_, S>, c: Dst<'_, S>, a: Src<'_, S>, b: Src<'_, S>, d: usize) -> Result<()> {
    let _g = cx.metrics.task(d);
    if c.n() <= cx.base {
        let _leaf = cx.metrics.leaf();
        kernel_locked(c, a, b, cx.metrics);
        return Ok(());
    }
    let pairs: [PairState; 4] = Default::default();
    let pairs = &pairs;
    par8(SUBPRODUCTS.map(|(i, j, l)| -> Fut<'_> {
        Box::new(move || {
            let (aq, bq) = (a.quad(i, l), b.quad(l, j));
            lazy_half(cx, &pairs[2 * i + j], c.quad(i, j), d + 1, |dst| sar(cx, dst, aq, bq, d + 1))
        })
    }))
}

pub(crate) fn star<S: Semiring>(cx: &Ctx<'_, S>, c: Dst<'_, S>, a: Src<'_, S>, b: Src<'_, S>, d: usize) -> Result<()> {
    if d >= cx.switch {
        return sar(cx, c, a, b, d);
    }
    let _g = cx.metrics.task(d);
    if c.n() <= cx.base {
        return tar_leaf(cx, c, a, b, d);
    }
    par8(SUBPRODUCTS.map(|(i, j, l)| -> Fut<'_> {
        Box::new(move || star(cx, c.quad(i, j), a.quad(i, l), b.quad(l, j), d + 1))
    }))
}
