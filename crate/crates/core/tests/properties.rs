use std::sync::Arc;
use std::thread;

use proptest::prelude::*;
use starmm::exclusion::{Arrival, PairState};
use starmm::metrics::Metrics;
use starmm::{naive_mm, Algorithm, AllocMode, Config, Engine, Matrix, MatrixRegion, SharedOutput};

fn algorithm() -> impl Strategy<Value = Algorithm> {
    let mut all = Algorithm::ALL.to_vec();
    all.extend([Algorithm::Co3(AllocMode::Raw), Algorithm::Strassen(AllocMode::Raw)]);
    prop::sample::select(all)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn every_schedule_matches_the_oracle(algo in algorithm(), lb in 0u32..3, lr in 0u32..4, p in 1usize..6, seed in any::<u64>()) {
        let (b, n) = (1usize << lb, 1usize << (lb + lr));
        let engine = Engine::<i64>::new(Config::default().with_base(b).with_workers(p)).unwrap();
        let a = Matrix::random(n, seed);
        let bm = Matrix::random(n, seed.wrapping_add(1));
        prop_assert_eq!(engine.multiply(algo, &a, &bm).unwrap(), naive_mm(&a, &bm).unwrap());
        let s = engine.snapshot();
        prop_assert_eq!(s.pool.unwrap().issued_bytes, 0);
        prop_assert!(s.leaf_peak <= p as i64);
        prop_assert_eq!(s.faults, 0);
    }

    #[test]
    fn classical_schedules_accumulate(algo in prop::sample::select(Algorithm::CLASSICAL.to_vec()), seed in any::<u64>()) {
        let engine = Engine::<i64>::new(Config::default().with_base(2).with_workers(3)).unwrap();
        let a = Matrix::random(8, seed);
        let mut c = Matrix::random(8, seed ^ 1);
        let c0 = c.clone();
        engine.run(algo, &mut c, &a, &a).unwrap();
        let p = naive_mm(&a, &a).unwrap();
        let expect: Vec<i64> = c0.as_slice().iter().zip(p.as_slice()).map(|(x, y)| x + y).collect();
        prop_assert_eq!(c.as_slice(), &expect[..]);
    }

    #[test]
    fn pair_state_sequences(finish_before_second in any::<bool>(), extra in 0usize..4) {
        let s = PairState::new();
        prop_assert_eq!(s.arrive(), Arrival::First);
        if finish_before_second {
            s.finish_first().unwrap();
            prop_assert_eq!(s.arrive(), Arrival::AfterDone);
        } else {
            prop_assert_eq!(s.arrive(), Arrival::WhileRunning);
            s.finish_first().unwrap();
        }
        prop_assert!(s.is_done());
        prop_assert!(s.finish_first().is_err());
        for _ in 0..extra {
            prop_assert_eq!(s.arrive(), Arrival::AfterDone);
        }
    }

    /// Nested enters and exits; the peak at each depth matches a counter model.
    #[test]
    fn gauge_peaks_follow_the_model(path in prop::collection::vec(0usize..6, 1..60)) {
        let m = Metrics::new();
        let mut live = [0i64; 6];
        let mut peak = [0i64; 6];
        let mut stack = Vec::new();
        for d in path {
            if stack.last().is_some_and(|&top| top >= d) {
                let top = stack.pop().unwrap();
                m.task_exit(top).unwrap();
                live[top] -= 1;
            } else {
                m.task_enter(d);
                live[d] += 1;
                peak[d] = peak[d].max(live[d]);
                stack.push(d);
            }
        }
        while let Some(top) = stack.pop() {
            m.task_exit(top).unwrap();
        }
        let snap = m.snapshot();
        for d in 0..6 {
            prop_assert_eq!(snap.depth_peaks.get(d).copied().unwrap_or(0), peak[d]);
        }
        prop_assert!(m.task_exit(0).is_err());
    }

    /// Concurrent tile-serialized updates commute on integers.
    #[test]
    fn concurrent_accumulate_is_a_sum(seed in any::<u64>(), threads in 2usize..6) {
        let n = 16;
        let base = Matrix::<i64>::random(n, seed);
        let out = Arc::new(SharedOutput::new(&base, 4).unwrap());
        let mut expect = base.as_slice().to_vec();
        let mut jobs = Vec::new();
        for t in 0..threads {
            for (k, (r0, c0, m)) in [(0, 0, 16), (0, 8, 8), (4, 4, 4), (8, 0, 8)].into_iter().enumerate() {
                let p = Matrix::<i64>::random(m, seed ^ (t * 16 + k) as u64);
                for i in 0..m {
                    for j in 0..m {
                        expect[(r0 + i) * n + c0 + j] += p.as_slice()[i * m + j];
                    }
                }
                let r = MatrixRegion { row0: r0, col0: c0, rows: m, cols: m, stride: n };
                jobs.push((r, p));
            }
        }
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let out = Arc::clone(&out);
                let mine: Vec<_> = jobs.iter().skip(t).step_by(threads).cloned().collect();
                thread::spawn(move || {
                    for (r, p) in mine {
                        out.atomic_accumulate(r, &p).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let got = out.to_matrix();
        prop_assert_eq!(got.as_slice(), &expect[..]);
    }
}

#[test]
fn leaf_gauge_under_contention() {
    let m = Arc::new(Metrics::new());
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let m = Arc::clone(&m);
            thread::spawn(move || {
                for _ in 0..2000 {
                    m.leaf_enter();
                    m.leaf_exit().unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let s = m.snapshot();
    assert!((1..=8).contains(&s.leaf_peak), "{}", s.leaf_peak);
    assert!(m.leaf_exit().is_err());
}
