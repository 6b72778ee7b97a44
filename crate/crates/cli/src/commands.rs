use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use serde::Serialize;
use starmm::analysis::{eval_recurrence, record_trace, AccessKind, MultiLru, TraceSink};
use starmm::kernel::first_mismatch;
use starmm::verify::{run_suite, VerifyOptions};
use starmm::{naive_mm, Algorithm, Config, Engine, Matrix, MetricsSnapshot, MinPlus, MmError, PoolPolicy, Semiring, SemiringId};

use crate::{AnalyzeArgs, Failure, RunArgs, SimulateArgs, VerifyArgs, EXIT_OK, EXIT_VERIFY};

#[derive(Serialize)]
struct RunReport {
    algorithm: String,
    semiring: SemiringId,
    n: usize,
    b: usize,
    p: usize,
    seed: u64,
    reps: usize,
    status: &'static str,
    /// First differing cell when the result is wrong.
    mismatch: Option<String>,
    elapsed_ns: Vec<u128>,
    metrics: MetricsSnapshot,
}

pub fn run(args: &RunArgs) -> Result<u8, Failure> {
    let algo = Algorithm::parse(&args.algo, args.common.mode)?;
    match args.common.semiring {
        SemiringId::Int => run_with::<i64>(algo, args),
        SemiringId::Float => run_with::<f64>(algo, args),
        SemiringId::Tropical => run_with::<MinPlus>(algo, args),
    }
}

fn run_with<S: Semiring>(algo: Algorithm, args: &RunArgs) -> Result<u8, Failure> {
    let c = &args.common;
    let p = c.workers()?;
    let engine = Engine::<S>::new(Config::default().with_base(c.b).with_workers(p))?;
    let a = Matrix::<S>::random(args.n, c.seed);
    let b = Matrix::<S>::random(args.n, c.seed.wrapping_add(1));
    let mut times = Vec::new();
    let mut out = None;
    for _ in 0..args.reps.max(1) {
        engine.reset()?;
        let t = Instant::now();
        out = Some(engine.multiply(algo, &a, &b)?);
        times.push(t.elapsed().as_nanos());
    }
    let got = out.expect("at least one repetition");
    let expect = naive_mm(&a, &b)?;
    let tol = if S::ID == SemiringId::Float { 1e-9 } else { 0.0 };
    let mismatch = first_mismatch(&got, &expect, tol).map(|(i, j, x, y)| {
        format!("C[{i}][{j}] = {}, expected {}", x.format_element(), y.format_element())
    });
    let report = RunReport {
        algorithm: algo.id().to_string(),
        semiring: S::ID,
        n: args.n,
        b: c.b,
        p,
        seed: c.seed,
        reps: times.len(),
        status: if mismatch.is_none() { "ok" } else { "mismatch" },
        mismatch: mismatch.clone(),
        elapsed_ns: times,
        metrics: engine.snapshot(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    match mismatch {
        None => {
            println!("ok");
            Ok(EXIT_OK)
        }
        Some(m) => {
            eprintln!("{algo} differs from the oracle: {m}");
            Ok(EXIT_VERIFY)
        }
    }
}

/// `4,8,16` or `4..64` (inclusive, doubling).
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, MmError> {
    let bad = || MmError::Parse(format!("bad size list `{s}`"));
    let v: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let (mut lo, hi): (usize, usize) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
        if lo == 0 {
            return Err(bad());
        }
        let mut v = Vec::new();
        while lo <= hi {
            v.push(lo);
            lo *= 2;
        }
        v
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if v.is_empty() {
        return Err(bad());
    }
    Ok(v)
}

pub fn analyze(args: &AnalyzeArgs) -> Result<u8, Failure> {
    let sizes = parse_sizes(&args.n)?;
    let algos: Vec<Algorithm> =
        args.algo.iter().map(|a| Algorithm::parse(a, Default::default())).collect::<Result<_, _>>()?;
    let mut csv = String::from("algo,n,b,p,M,B,work,span,space,q1,qp,k\n");
    let mut table = format!(
        "{:<16} {:>6} {:>4} {:>4} {:>8} {:>16} {:>10} {:>14} {:>14} {:>16} {:>3}\n",
        "algo", "n", "b", "p", "M", "work", "span", "space", "q1", "qp", "k"
    );
    for &algo in &algos {
        for &p in &args.p {
            for &m in &args.m {
                let cfg = Config::default().with_base(args.b).with_workers(p).with_cache(m, args.line);
                for &n in &sizes {
                    let r = eval_recurrence(algo, n, &cfg)?;
                    let _ = writeln!(
                        csv,
                        "{},{n},{},{p},{m},{},{},{},{},{},{},{}",
                        r.algorithm, r.b, args.line, r.work, r.span, r.space, r.q1, r.qp, r.switch_depth
                    );
                    let _ = writeln!(
                        table,
                        "{:<16} {n:>6} {:>4} {p:>4} {m:>8} {:>16} {:>10} {:>14} {:>14} {:>16} {:>3}",
                        r.algorithm, r.b, r.work, r.span, r.space, r.q1, r.qp, r.switch_depth
                    );
                }
            }
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{table}"),
    }
    Ok(EXIT_OK)
}

/// Feeds the simulator and optionally a dump file from one pass.
struct Tee<'a> {
    sim: &'a mut MultiLru,
    dump: Option<BufWriter<File>>,
    err: Option<std::io::Error>,
}

impl TraceSink for Tee<'_> {
    fn access(&mut self, addr: u64, kind: AccessKind) {
        self.sim.access(addr, kind);
        if let (Some(w), None) = (self.dump.as_mut(), self.err.as_ref()) {
            if let Err(e) = w.write_all(&addr.to_le_bytes()).and_then(|_| w.write_all(&[kind as u8])) {
                self.err = Some(e);
            }
        }
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let algo = Algorithm::parse(&args.algo, args.mode)?;
    let mut sim = MultiLru::new(&args.m, args.line)?;
    let a = Matrix::<i64>::random(args.n, args.seed);
    let b = Matrix::<i64>::random(args.n, args.seed.wrapping_add(1));
    let dump = args.out.as_ref().map(File::create).transpose()?.map(BufWriter::new);
    let mut tee = Tee { sim: &mut sim, dump, err: None };
    let run = record_trace(algo, &a, &b, args.b, &mut tee)?;
    if let Some(e) = tee.err.take() {
        return Err(e.into());
    }
    if let Some(mut w) = tee.dump.take() {
        w.flush()?;
    }
    if first_mismatch(&run.c, &naive_mm(&a, &b)?, 0.0).is_some() {
        eprintln!("replayed {algo} computed a wrong product");
        return Ok(EXIT_VERIFY);
    }
    println!("# {algo} n={} b={} B={} accesses={} footprint={}", args.n, args.b, args.line, run.accesses, run.heap_end);
    println!("{:>10} {:>12} {:>16}", "M", "misses", "misses*sqrt(M)");
    for (m, q) in args.m.iter().zip(sim.misses()) {
        println!("{m:>10} {q:>12} {:>16.0}", q as f64 * (*m as f64).sqrt());
    }
    Ok(EXIT_OK)
}

pub fn verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let opts = VerifyOptions {
        workers: args.p.max(1),
        seeds: args.seeds,
        strict: args.strict || VerifyOptions::default().strict,
        policy: if args.sabotage_pool { PoolPolicy::AlwaysFresh } else { PoolPolicy::Lifo },
    };
    let reports = run_suite(&args.suite, &opts)?;
    for r in &reports {
        eprintln!("{r}");
    }
    let failed = reports.iter().any(|r| r.failed());
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "suite": args.suite,
        "passed": !failed,
        "criteria": reports,
    }))
    .expect("report serializes");
    if let Some(path) = &args.out {
        std::fs::write(path, json.clone() + "\n")?;
    }
    println!("{json}");
    Ok(if failed { EXIT_VERIFY } else { EXIT_OK })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_lists() {
        assert_eq!(parse_sizes("4..64").unwrap(), [4, 8, 16, 32, 64]);
        assert_eq!(parse_sizes("8, 32").unwrap(), [8, 32]);
        assert!(parse_sizes("0..4").is_err());
        assert!(parse_sizes("x").is_err());
    }
}
