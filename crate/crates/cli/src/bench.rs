//! Wall-clock comparison. Every algorithm in one invocation shares the engine,
//! hence the same base kernel and base dimension.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use starmm::kernel::first_mismatch;
use starmm::{Algorithm, AllocMode, Config, Engine, Matrix, MinPlus, MmError, Semiring, SemiringId};

use crate::{BenchArgs, Failure, EXIT_OK, EXIT_VERIFY};

pub const MIN_REPS: usize = 5;
pub const HEADER: &str = "algo,n,b,p,median_ns,speedup_vs_co2_pct,speedup_vs_co3_pct";

/// `(peer / t - 1) * 100`: positive when `t` beats the peer.
pub fn speedup_pct(peer_ns: u128, t_ns: u128) -> f64 {
    (peer_ns as f64 / t_ns as f64 - 1.0) * 100.0
}

pub fn median(mut v: Vec<u128>) -> u128 {
    v.sort_unstable();
    v[v.len() / 2]
}

pub fn bench(args: &BenchArgs) -> Result<u8, Failure> {
    if args.reps < MIN_REPS {
        return Err(MmError::InvalidConfig(format!("at least {MIN_REPS} repetitions are required, got {}", args.reps)).into());
    }
    if args.n.is_empty() {
        return Err(MmError::InvalidConfig("no dimensions given".into()).into());
    }
    let algos: Vec<Algorithm> =
        args.algo.iter().map(|a| Algorithm::parse(a, args.common.mode)).collect::<Result<_, _>>()?;
    match args.common.semiring {
        SemiringId::Int => bench_with::<i64>(&algos, args),
        SemiringId::Float => bench_with::<f64>(&algos, args),
        SemiringId::Tropical => bench_with::<MinPlus>(&algos, args),
    }
}

struct Timing<S> {
    median_ns: u128,
    result: Matrix<S>,
}

fn time<S: Semiring>(engine: &Engine<S>, algo: Algorithm, a: &Matrix<S>, b: &Matrix<S>, reps: usize) -> Result<Timing<S>, MmError> {
    let result = engine.multiply(algo, a, b)?;
    let mut v = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        std::hint::black_box(engine.multiply(algo, a, b)?);
        v.push(t.elapsed().as_nanos().max(1));
    }
    Ok(Timing { median_ns: median(v), result })
}

fn bench_with<S: Semiring>(algos: &[Algorithm], args: &BenchArgs) -> Result<u8, Failure> {
    let c = &args.common;
    let p = c.workers()?;
    let engine = Engine::<S>::new(Config::default().with_base(c.b).with_workers(p))?;
    let tol = if S::ID == SemiringId::Float { 1e-9 } else { 0.0 };
    let co3 = Algorithm::Co3(AllocMode::Pooled);
    let mut csv = format!("{HEADER}\n");
    let mut mismatch = false;
    for &n in &args.n {
        let a = Matrix::<S>::random(n, c.seed);
        let b = Matrix::<S>::random(n, c.seed.wrapping_add(1));
        let mut done: HashMap<Algorithm, Timing<S>> = HashMap::new();
        for &algo in [Algorithm::Co2, co3].iter().chain(algos) {
            if !done.contains_key(&algo) {
                done.insert(algo, time(&engine, algo, &a, &b, args.reps)?);
            }
        }
        let reference = &done[&Algorithm::Co2];
        for &algo in algos {
            let t = &done[&algo];
            if first_mismatch(&t.result, &reference.result, tol).is_some() {
                eprintln!("{algo} n={n} disagrees with co2");
                mismatch = true;
            }
            let _ = writeln!(
                csv,
                "{},{n},{},{p},{},{:.2},{:.2}",
                algo.id(),
                c.b,
                t.median_ns,
                speedup_pct(reference.median_ns, t.median_ns),
                speedup_pct(done[&co3].median_ns, t.median_ns)
            );
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(if mismatch { EXIT_VERIFY } else { EXIT_OK })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speedup_formula() {
        assert_eq!(speedup_pct(100, 100), 0.0);
        assert_eq!(speedup_pct(150, 100), 50.0);
        assert_eq!(speedup_pct(100, 200), -50.0);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![5, 1, 3]), 3);
        assert_eq!(median(vec![4, 1, 3, 2]), 3);
    }
}
