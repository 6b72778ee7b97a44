//! Strassen's seven-product scheme and its space-bounded variants.
//!
//! Every entry point here overwrites `C` rather than accumulating into it.
//! Internally the lazy variants accumulate into regions whose tiles start out
//! marked as garbage, so the first contribution to a tile stores.

use crate::classic::{par8, tar_leaf, Fut, SUBPRODUCTS};
use crate::error::{MmError, Result};
use crate::kernel::{accumulate, axpy, combine, kernel, kernel_locked};
use crate::runtime::{par4, par_all, Ctx, Temp};
use crate::semiring::Semiring;
use crate::view::{Dst, Src};

type Quad = (usize, usize);

/// How an `S_r` or `T_r` operand is formed from the input quadrants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Form {
    Bare(Quad),
    Sum(Quad, Quad),
    Diff(Quad, Quad),
}

impl Form {
    pub(crate) fn is_bare(self) -> bool {
        matches!(self, Form::Bare(_))
    }
}

pub(crate) const S_FORMS: [Form; 7] = [
    Form::Sum((0, 0), (1, 1)),
    Form::Sum((1, 0), (1, 1)),
    Form::Bare((0, 0)),
    Form::Bare((1, 1)),
    Form::Sum((0, 0), (0, 1)),
    Form::Diff((1, 0), (0, 0)),
    Form::Diff((0, 1), (1, 1)),
];

pub(crate) const T_FORMS: [Form; 7] = [
    Form::Sum((0, 0), (1, 1)),
    Form::Bare((0, 0)),
    Form::Diff((0, 1), (1, 1)),
    Form::Diff((1, 0), (0, 0)),
    Form::Bare((1, 1)),
    Form::Sum((0, 0), (0, 1)),
    Form::Sum((1, 0), (1, 1)),
];

/// Where each product lands: `(quadrant of C, subtract?)`.
pub(crate) const CONTRIBUTIONS: [&[(Quad, bool)]; 7] = [
    &[((0, 0), false), ((1, 1), false)],
    &[((1, 0), false), ((1, 1), true)],
    &[((0, 1), false), ((1, 1), false)],
    &[((0, 0), false), ((1, 0), false)],
    &[((0, 0), true), ((0, 1), false)],
    &[((1, 1), false)],
    &[((0, 0), false)],
];

/// The products feeding each quadrant of `C`, in product order.
pub(crate) fn terms_of(q: Quad) -> Vec<(usize, bool)> {
    (0..7)
        .filter_map(|r| CONTRIBUTIONS[r].iter().find(|(qq, _)| *qq == q).map(|&(_, neg)| (r, neg)))
        .collect()
}

pub(crate) fn neg_of<S: Semiring>(cx: &Ctx<'_, S>) -> Result<S> {
    cx.neg.ok_or(MmError::NoAdditiveInverse)
}

fn form_into<S: Semiring>(dst: Dst<'_, S>, f: Form, x: Src<'_, S>, neg: S) {
    match f {
        Form::Bare(q) => combine(dst, x.quad(q.0, q.1), None),
        Form::Sum(p, q) => combine(dst, x.quad(p.0, p.1), Some((x.quad(q.0, q.1), None))),
        Form::Diff(p, q) => combine(dst, x.quad(p.0, p.1), Some((x.quad(q.0, q.1), Some(neg)))),
    }
}

fn operand<'x, S>(held: Option<Src<'x, S>>, f: Form, x: Src<'x, S>) -> Src<'x, S> {
    match (held, f) {
        (Some(v), _) => v,
        (None, Form::Bare(q)) => x.quad(q.0, q.1),
        (None, _) => unreachable!("non-bare operand without a temporary"),
    }
}

/// Straightforward parallel Strassen: all operand temporaries are formed,
/// the seven products run concurrently, then `C` is assembled. With `hybrid`
/// the products at depth `>= cx.switch` run [`sar_strassen`] instead.
pub(crate) fn strassen<S: Semiring>(
    cx: &Ctx<'_, S>,
    c: Dst<'_, S>,
    a: Src<'_, S>,
    b: Src<'_, S>,
    d: usize,
    hybrid: bool,
) -> Result<()> {
    let neg = neg_of(cx)?;
    let _g = cx.metrics.task(d);
    let n = c.n();
    if n <= cx.base {
        let _leaf = cx.metrics.leaf();
        kernel(c, a, b, true);
        return Ok(());
    }
    let h = n / 2;
    let mut temps = Vec::with_capacity(17);
    let res = (|| {
        let mut take = |f: Option<Form>| -> Result<Option<usize>> {
            if f.is_some_and(Form::is_bare) {
                return Ok(None);
            }
            temps.push(Temp::acquire(cx, d, h, cx.pooled)?);
            Ok(Some(temps.len() - 1))
        };
        let mut s_slot = [None; 7];
        let mut t_slot = [None; 7];
        let mut p_slot = [0; 7];
        for r in 0..7 {
            s_slot[r] = take(Some(S_FORMS[r]))?;
        }
        for r in 0..7 {
            t_slot[r] = take(Some(T_FORMS[r]))?;
        }
        for r in 0..7 {
            p_slot[r] = take(None)?.expect("product temporaries are always allocated");
        }
        let views: Vec<Dst<'_, S>> = temps.iter().map(Temp::dst).collect();
        let views = &views;

        let mut forms: Vec<Box<dyn FnOnce() -> Result<()> + Send + '_>> = Vec::new();
        for r in 0..7 {
            if let Some(i) = s_slot[r] {
                let v = views[i];
                forms.push(Box::new(move || {
                    form_into(v, S_FORMS[r], a, neg);
                    Ok(())
                }));
            }
            if let Some(i) = t_slot[r] {
                let v = views[i];
                forms.push(Box::new(move || {
                    form_into(v, T_FORMS[r], b, neg);
                    Ok(())
                }));
            }
        }
        par_all(forms)?;

        let products: Vec<_> = (0..7)
            .map(|r| {
                let (p, s, t) = (
                    views[p_slot[r]],
                    operand(s_slot[r].map(|i| views[i].as_src()), S_FORMS[r], a),
                    operand(t_slot[r].map(|i| views[i].as_src()), T_FORMS[r], b),
                );
                let tiles = p.tiles();
                move || {
                    if hybrid && d + 1 >= cx.switch {
                        tiles.mark_all(false);
                        sar_strassen(cx, p, s, t, d + 1)
                    } else {
                        strassen(cx, p, s, t, d + 1, hybrid)
                    }
                }
            })
            .collect();
        par_all(products)?;

        let assemble = |q: Quad| {
            let terms = terms_of(q);
            let dst = c.quad(q.0, q.1);
            move || {
                let p = |r: usize| views[p_slot[r]].as_src();
                let sign = |neg_term: bool| if neg_term { Some(neg) } else { None };
                let (first, rest) = terms.split_first().expect("every quadrant has a product");
                debug_assert!(!first.1);
                combine(dst, p(first.0), None);
                for &(r, n) in rest {
                    axpy(dst, p(r), sign(n));
                }
                Ok(())
            }
        };
        par4(assemble((0, 0)), assemble((0, 1)), assemble((1, 0)), assemble((1, 1)))
    })();
    let mut out = res;
    while let Some(t) = temps.pop() {
        out = out.and(t.release(cx));
    }
    out
}

/// Strassen with three scratch blocks per product: `S_r` and `T_r` are
/// formed on the fly, `P_r` is folded into its quadrants of `C` as soon as it
/// is ready. `C <- C ⊕ A ⊗ B` where garbage tiles count as zero.
pub(crate) fn sar_strassen<S: Semiring>(cx: &Ctx<'_, S>, c: Dst<'_, S>, a: Src<'_, S>, b: Src<'_, S>, d: usize) -> Result<()> {
    let neg = neg_of(cx)?;
    let _g = cx.metrics.task(d);
    let n = c.n();
    if n <= cx.base {
        let _leaf = cx.metrics.leaf();
        kernel_locked(c, a, b, cx.metrics);
        return Ok(());
    }
    let h = n / 2;
    let products: Vec<_> = (0..7)
        .map(|r| {
            move || -> Result<()> {
                let mut scratch = Vec::with_capacity(3);
                let res = (|| {
                    for _ in 0..3 {
                        scratch.push(Temp::acquire(cx, d + 1, h, true)?);
                        cx.metrics.record_scratch(1, 0);
                    }
                    let (s, t, p) = (scratch[0].dst(), scratch[1].dst(), scratch[2].dst());
                    form_into(s, S_FORMS[r], a, neg);
                    form_into(t, T_FORMS[r], b, neg);
                    scratch[2].invalidate();
                    sar_strassen(cx, p, s.as_src(), t.as_src(), d + 1)?;
                    for &(q, minus) in CONTRIBUTIONS[r] {
                        accumulate(c.quad(q.0, q.1), p.as_src(), minus.then_some(neg), cx.metrics);
                    }
                    Ok(())
                })();
                let mut out = res;
                while let Some(t) = scratch.pop() {
                    out = out.and(t.release(cx));
                    cx.metrics.record_scratch(0, 1);
                }
                out
            }
        })
        .collect();
    par_all(products)
}

/// Classical eight-way splitting above the switch depth, [`sar_strassen`]
/// below it.
pub(crate) fn star_strassen_1<S: Semiring>(cx: &Ctx<'_, S>, c: Dst<'_, S>, a: Src<'_, S>, b: Src<'_, S>, d: usize) -> Result<()> {
    if d >= cx.switch {
        return sar_strassen(cx, c, a, b, d);
    }
    let _g = cx.metrics.task(d);
    if c.n() <= cx.base {
        return tar_leaf(cx, c, a, b, d);
    }
    par8(SUBPRODUCTS.map(|(i, j, l)| -> Fut<'_> {
        Box::new(move || star_strassen_1(cx, c.quad(i, j), a.quad(i, l), b.quad(l, j), d + 1))
    }))
}

/// Straightforward Strassen above the switch depth, [`sar_strassen`] below.
pub(crate) fn star_strassen_2<S: Semiring>(cx: &Ctx<'_, S>, c: Dst<'_, S>, a: Src<'_, S>, b: Src<'_, S>) -> Result<()> {
    if cx.switch == 0 {
        sar_strassen(cx, c, a, b, 0)
    } else {
        strassen(cx, c, a, b, 0, true)
    }
}
