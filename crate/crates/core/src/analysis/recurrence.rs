//! Closed recurrences for every schedule, unrolled with exact integers.
//!
//! Conventions shared with [`super::dag`]: a base kernel costs one span unit
//! and `b^3` work; every matrix addition pass (madd, merge, accumulate, form,
//! assemble) costs one span unit and one unit of work per element added.
//! Space counts elements of temporaries. Cache counts line transfers with
//! `lines(x) = ceil(x / B)` standing in for `O(x / B)`.

use serde::Serialize;

use crate::config::{switch_depth, Config};
use crate::engine::Algorithm;
use crate::error::{MmError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub algorithm: String,
    pub n: usize,
    pub b: usize,
    pub p: usize,
    pub work: u128,
    pub span: u128,
    /// Temporary elements.
    pub space: u128,
    pub q1: u128,
    pub qp: u128,
    /// Switch depth of the hybrid schedules; 0 elsewhere.
    pub switch_depth: u32,
}

/// `q1 + p * span * M / B`, the parallel cache bound with constant 1.
pub fn parallel_cache_bound(q1: u128, p: u128, span: u128, m: u128, line: u128) -> u128 {
    q1 + p * span * m / line.max(1)
}

/// Depth at which SAR stops multiplying temporaries by 8 per level: the
/// smallest `k` with `4 * (8^0 + ... + 8^k) >= p`.
pub fn sar_switch_depth(p: usize) -> u32 {
    let (mut k, mut sum) = (0u32, 4u128);
    while sum < p as u128 {
        k += 1;
        sum += 4 * 8u128.pow(k);
    }
    k
}

struct Model {
    n: u128,
    b: u128,
    p: u128,
    /// Hybrid switch depth.
    k: u32,
    /// SAR's own switch depth for the space recurrence.
    k_sar: u32,
    eps_m: f64,
    line: u128,
}

fn sq(v: u128) -> u128 {
    v * v
}

impl Model {
    fn lines(&self, x: u128) -> u128 {
        x.div_ceil(self.line)
    }

    fn fits(&self, footprint: u128) -> bool {
        footprint as f64 <= self.eps_m
    }

    /// `v^2 + (v/2)^2 + ...` down to `b`: the footprint of one chain of
    /// reused same-size temporaries.
    fn geo(&self, v: u128) -> u128 {
        let mut s = 0;
        let mut x = v;
        while x >= self.b {
            s += sq(x);
            x /= 2;
        }
        s
    }

    fn leaf(&self, v: u128) -> bool {
        v <= self.b
    }

    // Span.

    fn span_co2(&self, v: u128) -> u128 {
        if self.leaf(v) { 1 } else { 2 * self.span_co2(v / 2) }
    }

    fn span_log(&self, v: u128) -> u128 {
        if self.leaf(v) { 1 } else { self.span_log(v / 2) + 1 }
    }

    fn span_strassen(&self, v: u128) -> u128 {
        if self.leaf(v) { 1 } else { self.span_strassen(v / 2) + 2 }
    }

    fn span_sar_strassen(&self, v: u128) -> u128 {
        if self.leaf(v) { 1 } else { self.span_sar_strassen(v / 2) + 6 }
    }

    /// Eight-way TAR splitting above the switch depth, `below` from there on.
    fn span_tar_top(&self, v: u128, d: u32, below: &dyn Fn(u128) -> u128) -> u128 {
        if d >= self.k {
            below(v)
        } else if self.leaf(v) {
            1
        } else {
            2 * self.span_tar_top(v / 2, d + 1, below)
        }
    }

    fn span_ss2(&self, v: u128, d: u32) -> u128 {
        if d >= self.k {
            self.span_sar_strassen(v)
        } else if self.leaf(v) {
            1
        } else {
            self.span_ss2(v / 2, d + 1) + 2
        }
    }

    // Work.

    fn work_classic(&self, v: u128, leaf: u128, merge: u128) -> u128 {
        if self.leaf(v) { leaf } else { 8 * self.work_classic(v / 2, leaf, merge) + merge * sq(v) }
    }

    fn work_strassen(&self, v: u128) -> u128 {
        if self.leaf(v) { self.b.pow(3) } else { 7 * self.work_strassen(v / 2) + 18 * sq(v / 2) }
    }

    fn work_sar_strassen(&self, v: u128) -> u128 {
        if self.leaf(v) { self.b.pow(3) } else { 7 * self.work_sar_strassen(v / 2) + 22 * sq(v / 2) }
    }

    fn work_tar_top(&self, v: u128, d: u32, below: &dyn Fn(u128) -> u128) -> u128 {
        if d >= self.k {
            below(v)
        } else if self.leaf(v) {
            self.b.pow(3) + sq(self.b)
        } else {
            8 * self.work_tar_top(v / 2, d + 1, below)
        }
    }

    fn work_ss2(&self, v: u128, d: u32) -> u128 {
        if d >= self.k {
            self.work_sar_strassen(v)
        } else if self.leaf(v) {
            self.b.pow(3)
        } else {
            7 * self.work_ss2(v / 2, d + 1) + 18 * sq(v / 2)
        }
    }

    // Space.

    fn space_co3(&self, v: u128) -> u128 {
        if self.leaf(v) { 0 } else { 8 * self.space_co3(v / 2) + sq(v) }
    }

    /// One worker's chain of lazily reused temporaries: `S1(v) = S1(v/2) + c (v/2)^2`.
    fn chain(&self, v: u128, c: u128) -> u128 {
        if self.leaf(v) { 0 } else { self.chain(v / 2, c) + c * sq(v / 2) }
    }

    fn space_sar(&self, v: u128, d: u32) -> u128 {
        if d >= self.k_sar || self.leaf(v) {
            self.p * self.chain(v, 1)
        } else {
            8 * self.space_sar(v / 2, d + 1) + 4 * sq(v / 2)
        }
    }

    /// Temporaries of a TAR-topped hybrid: `p` chains below the switch, plus
    /// one base block per worker if the top reaches the base case.
    fn space_tar_top(&self, c: u128) -> u128 {
        let levels = (self.n / self.b).ilog2();
        if self.k > levels {
            self.p * sq(self.b)
        } else {
            self.p * self.chain(self.n >> self.k, c)
        }
    }

    fn space_strassen(&self, v: u128) -> u128 {
        if self.leaf(v) { 0 } else { 7 * self.space_strassen(v / 2) + 17 * sq(v / 2) }
    }

    fn space_ss2(&self, v: u128, d: u32) -> u128 {
        if d >= self.k {
            self.p * self.chain(v, 3)
        } else if self.leaf(v) {
            0
        } else {
            7 * self.space_ss2(v / 2, d + 1) + 17 * sq(v / 2)
        }
    }

    // Serial cache.

    fn q_stop8(&self, v: u128, footprint: &dyn Fn(u128) -> u128, per_level: &dyn Fn(u128) -> u128) -> u128 {
        if self.fits(footprint(v)) || self.leaf(v) {
            self.lines(footprint(v))
        } else {
            8 * self.q_stop8(v / 2, footprint, per_level) + per_level(v)
        }
    }

    fn q_madd(&self, v: u128) -> u128 {
        if self.fits(2 * sq(v)) || self.leaf(v) {
            self.lines(2 * sq(v))
        } else {
            4 * self.q_madd(v / 2)
        }
    }

    fn q_co3(&self, v: u128) -> u128 {
        if self.leaf(v) {
            self.lines(3 * sq(v))
        } else {
            8 * self.q_co3(v / 2) + self.q_madd(v)
        }
    }

    fn q_sar(&self, v: u128) -> u128 {
        self.q_stop8(v, &|x| self.geo(x) + 2 * sq(x), &|x| self.lines(sq(x)))
    }

    fn q_strassen(&self, v: u128) -> u128 {
        if self.leaf(v) {
            self.lines(3 * sq(v))
        } else {
            7 * self.q_strassen(v / 2) + self.lines(sq(v))
        }
    }

    fn q_sar_strassen(&self, v: u128) -> u128 {
        let fp = 3 * self.geo(v) + 3 * sq(v);
        if self.fits(fp) || self.leaf(v) {
            self.lines(fp)
        } else {
            7 * self.q_sar_strassen(v / 2) + self.lines(sq(v))
        }
    }

    fn q_tar_top(&self, v: u128, d: u32, below: &dyn Fn(u128) -> u128) -> u128 {
        let fp = 3 * sq(v) + sq(self.b);
        if d >= self.k {
            below(v)
        } else if self.fits(fp) || self.leaf(v) {
            self.lines(fp)
        } else {
            8 * self.q_tar_top(v / 2, d + 1, below)
        }
    }

    fn q_ss2(&self, v: u128, d: u32) -> u128 {
        if d >= self.k {
            self.q_sar_strassen(v)
        } else if self.leaf(v) {
            self.lines(3 * sq(v))
        } else {
            7 * self.q_ss2(v / 2, d + 1) + self.lines(sq(v))
        }
    }
}

/// Evaluates the recurrences of `algo` at dimension `n` with the base
/// dimension, worker count and cache parameters of `cfg`.
pub fn eval_recurrence(algo: Algorithm, n: usize, cfg: &Config) -> Result<CostReport> {
    cfg.validate()?;
    let b = cfg.base_dim;
    if n < b || !n.is_power_of_two() {
        return Err(MmError::InvalidSplit(format!("dimension {n} is not a power-of-two multiple of {b}")));
    }
    let m = Model {
        n: n as u128,
        b: b as u128,
        p: cfg.workers as u128,
        k: switch_depth(cfg.workers),
        k_sar: sar_switch_depth(cfg.workers),
        eps_m: cfg.epsilon * cfg.cache_size as f64,
        line: cfg.line_size as u128,
    };
    let v = m.n;
    let b3 = m.b.pow(3);
    let sar_span = |x| m.span_log(x);
    let ss_span = |x| m.span_sar_strassen(x);
    let sar_work = |x| m.work_classic(x, b3, 1);
    let ss_work = |x| m.work_sar_strassen(x);
    let sar_q = |x| m.q_sar(x);
    let ss_q = |x| m.q_sar_strassen(x);
    let tar_q = |x| m.q_stop8(x, &|y| 3 * sq(y) + sq(m.b), &|_| 0);

    let (work, span, space, q1) = match algo {
        Algorithm::Co2 => (m.work_classic(v, b3, 0), m.span_co2(v), 0, m.q_stop8(v, &|y| 3 * sq(y), &|_| 0)),
        Algorithm::Co3(_) => (m.work_classic(v, b3, 1), m.span_log(v), m.space_co3(v), m.q_co3(v)),
        Algorithm::Tar => (m.work_classic(v, b3 + sq(m.b), 0), m.span_co2(v), m.p * sq(m.b), tar_q(v)),
        Algorithm::Sar => (sar_work(v), m.span_log(v), m.space_sar(v, 0), sar_q(v)),
        Algorithm::Star => (
            m.work_tar_top(v, 0, &sar_work),
            m.span_tar_top(v, 0, &sar_span),
            m.space_tar_top(1),
            m.q_tar_top(v, 0, &sar_q),
        ),
        Algorithm::Strassen(_) => (m.work_strassen(v), m.span_strassen(v), m.space_strassen(v), m.q_strassen(v)),
        Algorithm::SarStrassen => (ss_work(v), ss_span(v), m.p * m.chain(v, 3), ss_q(v)),
        Algorithm::StarStrassen1 => (
            m.work_tar_top(v, 0, &ss_work),
            m.span_tar_top(v, 0, &ss_span),
            m.space_tar_top(3),
            m.q_tar_top(v, 0, &ss_q),
        ),
        Algorithm::StarStrassen2 => (m.work_ss2(v, 0), m.span_ss2(v, 0), m.space_ss2(v, 0), m.q_ss2(v, 0)),
    };
    let hybrid = matches!(algo, Algorithm::Star | Algorithm::StarStrassen1 | Algorithm::StarStrassen2);
    Ok(CostReport {
        algorithm: algo.id().to_string(),
        n,
        b,
        p: cfg.workers,
        work,
        span,
        space,
        q1,
        qp: parallel_cache_bound(q1, m.p, span, cfg.cache_size as u128, m.line),
        switch_depth: if hybrid { m.k } else if algo == Algorithm::Sar { m.k_sar } else { 0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AllocMode;

    fn cfg(b: usize, p: usize) -> Config {
        Config::default().with_base(b).with_workers(p)
    }

    fn span(algo: Algorithm, n: usize, c: &Config) -> u128 {
        eval_recurrence(algo, n, c).unwrap().span
    }

    #[test]
    fn unit_base_spans() {
        let c = cfg(1, 1);
        assert_eq!(span(Algorithm::Co2, 4, &c), 4);
        assert_eq!(span(Algorithm::Co3(AllocMode::Raw), 4, &c), 3);
        let co2: Vec<u128> = [4, 8, 16, 32, 64].iter().map(|&n| span(Algorithm::Co2, n, &c)).collect();
        assert_eq!(co2, [4, 8, 16, 32, 64]);
        let co3: Vec<u128> = [4, 8, 16, 32, 64].iter().map(|&n| span(Algorithm::Co3(AllocMode::Raw), n, &c)).collect();
        assert_eq!(co3, [3, 4, 5, 6, 7]);
    }

    #[test]
    fn co3_space_closed_form() {
        for n in [1usize, 2, 4, 8, 16] {
            let r = eval_recurrence(Algorithm::Co3(AllocMode::Raw), n, &cfg(1, 1)).unwrap();
            assert_eq!(r.space, (n * n * (n - 1)) as u128);
        }
    }

    #[test]
    fn switch_depths() {
        let r = eval_recurrence(Algorithm::Star, 64, &cfg(1, 16)).unwrap();
        assert_eq!(r.switch_depth, 2);
        assert_eq!(sar_switch_depth(1), 0);
        assert_eq!(sar_switch_depth(4), 0);
        assert_eq!(sar_switch_depth(5), 1);
        assert_eq!(sar_switch_depth(36), 1);
        assert_eq!(sar_switch_depth(37), 2);
    }

    #[test]
    fn star_span_is_chained_sar() {
        // k = 2: four chained SAR subtrees of dimension n/4 per output region.
        let c = cfg(1, 16);
        for n in [8usize, 16, 32] {
            assert_eq!(span(Algorithm::Star, n, &c), 4 * span(Algorithm::Sar, n / 4, &c));
        }
        // p = 1 degenerates to SAR.
        assert_eq!(span(Algorithm::Star, 32, &cfg(1, 1)), span(Algorithm::Sar, 32, &cfg(1, 1)));
    }

    #[test]
    fn sar_strassen_serial_space_is_below_n_squared() {
        for n in [2usize, 4, 8, 64] {
            let r = eval_recurrence(Algorithm::SarStrassen, n, &cfg(1, 1)).unwrap();
            assert!(r.space <= (n * n) as u128);
        }
    }

    #[test]
    fn parallel_bound_plumbing() {
        assert_eq!(parallel_cache_bound(100, 4, 10, 64, 8), 420);
        assert_eq!(parallel_cache_bound(100, 0, 10, 64, 8), 100);
        assert_eq!(parallel_cache_bound(100, 3, 0, 64, 8), 100);
        let one = parallel_cache_bound(0, 2, 10, 64, 8);
        assert_eq!(parallel_cache_bound(0, 4, 10, 64, 8), 2 * one);
    }

    #[test]
    fn report_invariants() {
        let c = cfg(2, 4).with_cache(1 << 10, 8);
        for algo in Algorithm::ALL {
            for n in [2usize, 8, 64] {
                let r = eval_recurrence(algo, n, &c).unwrap();
                assert!(r.span <= r.work, "{algo}");
                assert!(r.qp >= r.q1, "{algo}");
            }
        }
        assert!(eval_recurrence(Algorithm::Co2, 6, &c).is_err());
        assert!(eval_recurrence(Algorithm::Co2, 1, &c).is_err());
    }
}
