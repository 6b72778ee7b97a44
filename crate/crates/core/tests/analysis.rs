use starmm::analysis::{build_dag, eval_recurrence, longest_path, simulate_cache, collect_trace};
use starmm::{Algorithm, AllocMode, Config};

fn cfg(b: usize, p: usize) -> Config {
    Config::default().with_base(b).with_workers(p)
}

#[test]
fn dag_span_and_work_match_recurrences() {
    for algo in Algorithm::ALL {
        for ratio in [2, 4, 8] {
            for p in [1, 4, 16] {
                let b = 2;
                let n = ratio * b;
                let dag = build_dag(algo, n, b, p).unwrap();
                let rep = eval_recurrence(algo, n, &cfg(b, p)).unwrap();
                let span = longest_path(&dag).unwrap() as u128;
                assert_eq!(span, rep.span, "{algo} n={n} p={p} span");
                assert_eq!(dag.total_work(), rep.work, "{algo} n={n} p={p} work");
            }
        }
    }
}

#[test]
fn kernel_counts() {
    let b = 4;
    for p in [1, 16] {
        let classic = build_dag(Algorithm::Tar, 8 * b, b, p).unwrap();
        assert_eq!(classic.kernel_count(), 8usize.pow(3));
        // Above the switch depth the top is classical: 8 products per level.
        let fast = build_dag(Algorithm::StarStrassen1, 8 * b, b, p).unwrap();
        let expect = if p == 1 { 7usize.pow(3) } else { 8 * 8 * 7 };
        assert_eq!(fast.kernel_count(), expect);
    }
}

#[test]
fn span_scaling() {
    let c = cfg(1, 1);
    let span = |a: Algorithm, n: usize| eval_recurrence(a, n, &c).unwrap().span;
    let mut n = 4;
    while n < 64 {
        for a in [Algorithm::Co2, Algorithm::Tar] {
            assert_eq!(span(a, 2 * n), 2 * span(a, n));
        }
        for a in [Algorithm::Co3(AllocMode::Pooled), Algorithm::Sar] {
            assert_eq!(span(a, 2 * n), span(a, n) + 1);
        }
        n *= 2;
    }
    let co2: Vec<u128> = [4, 8, 16, 32, 64].iter().map(|&n| span(Algorithm::Co2, n)).collect();
    assert_eq!(co2, [4, 8, 16, 32, 64]);
    let co3: Vec<u128> = [4, 8, 16, 32, 64].iter().map(|&n| span(Algorithm::Co3(AllocMode::Pooled), n)).collect();
    assert_eq!(co3, [3, 4, 5, 6, 7]);
}

#[test]
fn star_span_at_sixteen_workers() {
    for ratio in [2, 4, 8] {
        let dag = build_dag(Algorithm::Star, ratio * 2, 2, 16).unwrap();
        let rep = eval_recurrence(Algorithm::Star, ratio * 2, &cfg(2, 16)).unwrap();
        assert_eq!(rep.switch_depth, 2);
        assert_eq!(longest_path(&dag).unwrap() as u128, rep.span);
    }
}

#[test]
fn co2_cold_misses_match_footprint() {
    let t = collect_trace(Algorithm::Co2, 64, 8, 1).unwrap();
    let m = 1 << 14;
    assert!(m >= 3 * 64 * 64 + 64);
    let misses = simulate_cache(&t, m, 8).unwrap();
    assert!(misses as f64 <= t.distinct_addresses() as f64 / 8.0 * 1.05);
}

#[test]
fn pooled_co3_beats_raw() {
    let raw = collect_trace(Algorithm::Co3(AllocMode::Raw), 64, 8, 1).unwrap();
    let pooled = collect_trace(Algorithm::Co3(AllocMode::Pooled), 64, 8, 1).unwrap();
    let m = 1 << 14;
    assert!(simulate_cache(&pooled, m, 8).unwrap() < simulate_cache(&raw, m, 8).unwrap());
}
