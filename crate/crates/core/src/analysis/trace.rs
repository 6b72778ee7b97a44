//! Serial instrumented replay of a schedule over a flat address space.
//!
//! `A` occupies addresses `[0, n^2)`, `B` the next `n^2`, `C` the next, and
//! temporaries are carved from a heap above them: fresh addresses for every
//! request in raw mode, a per-size LIFO free list in pooled mode. The replay
//! follows the same sub-product order a one-worker run executes and computes
//! real values, so its result can be checked against the oracle.

use std::collections::HashMap;
use std::io::{self, Read, Write};

use crate::classic::SUBPRODUCTS;
use crate::engine::{AllocMode, Algorithm};
use crate::error::{MmError, Result};
use crate::matrix::Matrix;
use crate::semiring::Semiring;
use crate::strassen::{terms_of, Form, CONTRIBUTIONS, S_FORMS, T_FORMS};

/// Largest dimension the recorder accepts.
pub const MAX_TRACE_N: usize = 512;
/// Largest base dimension the recorder accepts.
pub const MAX_TRACE_B: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum AccessKind {
    Read = 0,
    Write = 1,
}

pub trait TraceSink {
    fn access(&mut self, addr: u64, kind: AccessKind);
}

/// A materialized trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessTrace {
    pub records: Vec<(u64, AccessKind)>,
}

impl TraceSink for AccessTrace {
    fn access(&mut self, addr: u64, kind: AccessKind) {
        self.records.push((addr, kind));
    }
}

impl AccessTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn distinct_addresses(&self) -> usize {
        let mut v: Vec<u64> = self.records.iter().map(|r| r.0).collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    }

    /// `max address - min address + 1`, or 0 for an empty trace.
    pub fn address_span(&self) -> u64 {
        let lo = self.records.iter().map(|r| r.0).min();
        let hi = self.records.iter().map(|r| r.0).max();
        match (lo, hi) {
            (Some(lo), Some(hi)) => hi - lo + 1,
            _ => 0,
        }
    }

    /// Binary dump: one little-endian `u64` address and one kind byte per record.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for &(a, k) in &self.records {
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&[k as u8])?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> io::Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() % 9 != 0 {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "truncated trace record"));
        }
        let records = buf
            .chunks_exact(9)
            .map(|c| {
                let addr = u64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let kind = if c[8] == 0 { AccessKind::Read } else { AccessKind::Write };
                (addr, kind)
            })
            .collect();
        Ok(AccessTrace { records })
    }
}

/// Discards records, counting them.
#[derive(Debug, Default, Clone, Copy)]
pub struct CountingSink {
    pub accesses: u64,
}

impl TraceSink for CountingSink {
    fn access(&mut self, _addr: u64, _kind: AccessKind) {
        self.accesses += 1;
    }
}

/// What a replay produced besides its trace.
#[derive(Debug, Clone)]
pub struct TraceRun<S> {
    pub c: Matrix<S>,
    /// Multiply-add operations in base kernels.
    pub kernel_ops: u64,
    pub accesses: u64,
    /// One past the highest heap address handed out.
    pub heap_end: u64,
}

#[derive(Clone, Copy)]
struct V {
    base: u64,
    stride: u64,
    n: usize,
}

impl V {
    fn quad(self, i: usize, j: usize) -> V {
        let h = self.n / 2;
        V { base: self.base + (i * h) as u64 * self.stride + (j * h) as u64, stride: self.stride, n: h }
    }

    #[inline(always)]
    fn at(self, i: usize, j: usize) -> u64 {
        self.base + i as u64 * self.stride + j as u64
    }
}

struct Tracer<'t, S, T> {
    mem: Vec<S>,
    sink: &'t mut T,
    b: usize,
    pooled: bool,
    heap_top: u64,
    free: HashMap<usize, Vec<u64>>,
    ops: u64,
    accesses: u64,
    neg: Option<S>,
}

impl<S: Semiring, T: TraceSink> Tracer<'_, S, T> {
    #[inline(always)]
    fn read(&mut self, addr: u64) -> S {
        self.sink.access(addr, AccessKind::Read);
        self.accesses += 1;
        self.mem[addr as usize]
    }

    #[inline(always)]
    fn write(&mut self, addr: u64, x: S) {
        self.sink.access(addr, AccessKind::Write);
        self.accesses += 1;
        self.mem[addr as usize] = x;
    }

    fn acquire(&mut self, n: usize, pooled: bool) -> V {
        let size = n * n;
        let base = match self.free.get_mut(&size).and_then(Vec::pop).filter(|_| pooled) {
            Some(a) => a,
            None => {
                let a = self.heap_top;
                self.heap_top += size as u64;
                if self.mem.len() < self.heap_top as usize {
                    self.mem.resize(self.heap_top as usize, S::zero());
                }
                a
            }
        };
        V { base, stride: n as u64, n }
    }

    fn release(&mut self, v: V, pooled: bool) {
        if pooled {
            self.free.entry(v.n * v.n).or_default().push(v.base);
        }
    }

    /// Value-level reset of a temporary whose tiles start as garbage; the
    /// runtime tracks this with flags, so no accesses are recorded.
    fn invalidate(&mut self, v: V) {
        for i in 0..v.n {
            for j in 0..v.n {
                self.mem[v.at(i, j) as usize] = S::zero();
            }
        }
    }

    fn kernel(&mut self, c: V, a: V, b: V, overwrite: bool) {
        let n = c.n;
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    let x = self.read(a.at(i, k));
                    let y = self.read(b.at(k, j));
                    let z = self.read(c.at(i, j));
                    let z = if overwrite && k == 0 { S::zero() } else { z };
                    self.write(c.at(i, j), z.add(x.mul(y)));
                    self.ops += 1;
                }
            }
        }
    }

    /// `c <- c ⊕ coef ⊗ x`, row by row.
    fn axpy(&mut self, c: V, x: V, coef: Option<S>) {
        for i in 0..c.n {
            for j in 0..c.n {
                let z = self.read(c.at(i, j));
                let y = self.read(x.at(i, j));
                let y = coef.map_or(y, |k| k.mul(y));
                self.write(c.at(i, j), z.add(y));
            }
        }
    }

    fn copy(&mut self, c: V, x: V) {
        for i in 0..c.n {
            for j in 0..c.n {
                let y = self.read(x.at(i, j));
                self.write(c.at(i, j), y);
            }
        }
    }

    /// Addition by quadrant splitting down to the base dimension, matching
    /// the runtime's split order.
    fn madd(&mut self, c: V, d: V) {
        if c.n <= self.b {
            return self.axpy(c, d, None);
        }
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            self.madd(c.quad(i, j), d.quad(i, j));
        }
    }

    fn co2(&mut self, c: V, a: V, b: V) {
        if c.n <= self.b {
            return self.kernel(c, a, b, false);
        }
        for (i, j, l) in SUBPRODUCTS {
            self.co2(c.quad(i, j), a.quad(i, l), b.quad(l, j));
        }
    }

    fn co3(&mut self, c: V, a: V, b: V, overwrite: bool) {
        if c.n <= self.b {
            return self.kernel(c, a, b, overwrite);
        }
        let pooled = self.pooled;
        let t = self.acquire(c.n, pooled);
        for (i, j, l) in SUBPRODUCTS {
            if l == 0 {
                self.co3(c.quad(i, j), a.quad(i, 0), b.quad(0, j), overwrite);
            } else {
                self.co3(t.quad(i, j), a.quad(i, 1), b.quad(1, j), true);
            }
        }
        self.madd(c, t);
        self.release(t, pooled);
    }

    fn tar(&mut self, c: V, a: V, b: V) {
        if c.n <= self.b {
            let t = self.acquire(c.n, true);
            self.kernel(t, a, b, true);
            self.axpy(c, t, None);
            self.release(t, true);
            return;
        }
        for (i, j, l) in SUBPRODUCTS {
            self.tar(c.quad(i, j), a.quad(i, l), b.quad(l, j));
        }
    }

    /// One worker: every bottom half finds its sibling finished and reuses
    /// the parent region, so SAR runs entirely in place.
    fn sar(&mut self, c: V, a: V, b: V) {
        if c.n <= self.b {
            return self.kernel(c, a, b, false);
        }
        for (i, j, l) in SUBPRODUCTS {
            self.sar(c.quad(i, j), a.quad(i, l), b.quad(l, j));
        }
    }

    fn form(&mut self, dst: V, f: Form, x: V) {
        let neg = self.neg;
        match f {
            Form::Bare(q) => self.copy(dst, x.quad(q.0, q.1)),
            Form::Sum(p, q) => {
                self.copy(dst, x.quad(p.0, p.1));
                self.axpy(dst, x.quad(q.0, q.1), None);
            }
            Form::Diff(p, q) => {
                self.copy(dst, x.quad(p.0, p.1));
                self.axpy(dst, x.quad(q.0, q.1), neg);
            }
        }
    }

    fn strassen(&mut self, c: V, a: V, b: V) {
        if c.n <= self.b {
            return self.kernel(c, a, b, true);
        }
        let (h, pooled) = (c.n / 2, self.pooled);
        let mut held = Vec::with_capacity(17);
        let mut s_op = [a; 7];
        let mut t_op = [b; 7];
        for r in 0..7 {
            s_op[r] = match S_FORMS[r] {
                Form::Bare(q) => a.quad(q.0, q.1),
                _ => {
                    let v = self.acquire(h, pooled);
                    held.push(v);
                    v
                }
            };
        }
        for r in 0..7 {
            t_op[r] = match T_FORMS[r] {
                Form::Bare(q) => b.quad(q.0, q.1),
                _ => {
                    let v = self.acquire(h, pooled);
                    held.push(v);
                    v
                }
            };
        }
        let p: Vec<V> = (0..7).map(|_| self.acquire(h, pooled)).collect();
        held.extend(&p);
        for r in 0..7 {
            if !S_FORMS[r].is_bare() {
                self.form(s_op[r], S_FORMS[r], a);
            }
            if !T_FORMS[r].is_bare() {
                self.form(t_op[r], T_FORMS[r], b);
            }
        }
        for r in 0..7 {
            self.strassen(p[r], s_op[r], t_op[r]);
        }
        let neg = self.neg;
        for q in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let dst = c.quad(q.0, q.1);
            let terms = terms_of(q);
            self.copy(dst, p[terms[0].0]);
            for &(r, minus) in &terms[1..] {
                self.axpy(dst, p[r], if minus { neg } else { None });
            }
        }
        while let Some(v) = held.pop() {
            self.release(v, pooled);
        }
    }

    fn sar_strassen(&mut self, c: V, a: V, b: V) {
        if c.n <= self.b {
            return self.kernel(c, a, b, false);
        }
        let h = c.n / 2;
        let neg = self.neg;
        for r in 0..7 {
            let s = self.acquire(h, true);
            let t = self.acquire(h, true);
            let p = self.acquire(h, true);
            self.form(s, S_FORMS[r], a);
            self.form(t, T_FORMS[r], b);
            self.invalidate(p);
            self.sar_strassen(p, s, t);
            for &(q, minus) in CONTRIBUTIONS[r] {
                self.axpy(c.quad(q.0, q.1), p, if minus { neg } else { None });
            }
            self.release(p, true);
            self.release(t, true);
            self.release(s, true);
        }
    }
}

/// Replays a one-worker run of `algo` on `A ⊗ B` into `sink`. Classical
/// schedules compute `A ⊗ B` into a zero `C`, so every result is the product.
pub fn record_trace<S: Semiring, T: TraceSink>(
    algo: Algorithm,
    a: &Matrix<S>,
    b: &Matrix<S>,
    base: usize,
    sink: &mut T,
) -> Result<TraceRun<S>> {
    let n = a.rows();
    crate::matrix::check_square_operands((n, n), (a.rows(), a.cols()), (b.rows(), b.cols()), base)?;
    if n > MAX_TRACE_N || base > MAX_TRACE_B {
        return Err(MmError::TooLarge(format!("trace of n={n}, b={base} exceeds n<={MAX_TRACE_N}, b<={MAX_TRACE_B}")));
    }
    if algo.is_strassen() && !S::has_inverse() {
        return Err(MmError::NoAdditiveInverse);
    }
    let nn = n * n;
    let mut mem = Vec::with_capacity(3 * nn);
    mem.extend_from_slice(a.as_slice());
    mem.extend_from_slice(b.as_slice());
    mem.extend(std::iter::repeat_n(S::zero(), nn));
    let mut tr = Tracer {
        mem,
        sink,
        b: base,
        pooled: algo.mode() == AllocMode::Pooled,
        heap_top: 3 * nn as u64,
        free: HashMap::new(),
        ops: 0,
        accesses: 0,
        neg: S::neg_one(),
    };
    let view = |k: u64| V { base: k * nn as u64, stride: n as u64, n };
    let (va, vb, vc) = (view(0), view(1), view(2));
    match algo {
        Algorithm::Co2 => tr.co2(vc, va, vb),
        Algorithm::Co3(_) => tr.co3(vc, va, vb, false),
        Algorithm::Tar => tr.tar(vc, va, vb),
        // With one worker the switch depth is 0.
        Algorithm::Sar | Algorithm::Star => tr.sar(vc, va, vb),
        Algorithm::Strassen(_) => tr.strassen(vc, va, vb),
        Algorithm::SarStrassen | Algorithm::StarStrassen1 | Algorithm::StarStrassen2 => tr.sar_strassen(vc, va, vb),
    }
    let c = Matrix::from_vec(n, n, tr.mem[2 * nn..3 * nn].to_vec())?;
    Ok(TraceRun { c, kernel_ops: tr.ops, accesses: tr.accesses, heap_end: tr.heap_top })
}

/// Records the full trace of an integer instance drawn from `seed`.
pub fn collect_trace(algo: Algorithm, n: usize, base: usize, seed: u64) -> Result<AccessTrace> {
    let a = Matrix::<i64>::random(n, seed);
    let b = Matrix::<i64>::random(n, seed.wrapping_add(1));
    let mut t = AccessTrace::default();
    record_trace(algo, &a, &b, base, &mut t)?;
    Ok(t)
}
