//! Public entry point: a worker pool, a memory pool and counters, and the
//! dispatch from [`Algorithm`] to the schedules.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::classic;
use crate::config::Config;
use crate::error::{MmError, Result};
use crate::exclusion::TileExclusionTable;
use crate::matrix::{check_square_operands, Matrix};
use crate::metrics::{Metrics, MetricsSnapshot};
use crate::pool::{Pool, PoolPolicy};
use crate::runtime::Ctx;
use crate::semiring::Semiring;
use crate::strassen;
use crate::view::{Dst, Src};

/// Where temporaries come from in the schedules that support both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AllocMode {
    /// A fresh buffer per request.
    Raw,
    /// The per-worker LIFO pool.
    #[default]
    Pooled,
}

impl FromStr for AllocMode {
    type Err = MmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(AllocMode::Raw),
            "pooled" => Ok(AllocMode::Pooled),
            other => Err(MmError::Parse(format!("unknown allocation mode `{other}`"))),
        }
    }
}

impl fmt::Display for AllocMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AllocMode::Raw => "raw",
            AllocMode::Pooled => "pooled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Algorithm {
    Co2,
    Co3(AllocMode),
    Tar,
    Sar,
    Star,
    Strassen(AllocMode),
    SarStrassen,
    StarStrassen1,
    StarStrassen2,
}

impl Algorithm {
    /// Every schedule, with pooled allocation where it is selectable.
    pub const ALL: [Algorithm; 9] = [
        Algorithm::Co2,
        Algorithm::Co3(AllocMode::Pooled),
        Algorithm::Tar,
        Algorithm::Sar,
        Algorithm::Star,
        Algorithm::Strassen(AllocMode::Pooled),
        Algorithm::SarStrassen,
        Algorithm::StarStrassen1,
        Algorithm::StarStrassen2,
    ];

    pub const CLASSICAL: [Algorithm; 5] =
        [Algorithm::Co2, Algorithm::Co3(AllocMode::Pooled), Algorithm::Tar, Algorithm::Sar, Algorithm::Star];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Co2 => "co2",
            Algorithm::Co3(_) => "co3",
            Algorithm::Tar => "tar",
            Algorithm::Sar => "sar",
            Algorithm::Star => "star",
            Algorithm::Strassen(_) => "strassen",
            Algorithm::SarStrassen => "sar-strassen",
            Algorithm::StarStrassen1 => "star-strassen-1",
            Algorithm::StarStrassen2 => "star-strassen-2",
        }
    }

    /// Parses a command-line id; `mode` applies to CO3 and Strassen.
    pub fn parse(id: &str, mode: AllocMode) -> Result<Self> {
        Ok(match id {
            "co2" => Algorithm::Co2,
            "co3" => Algorithm::Co3(mode),
            "tar" => Algorithm::Tar,
            "sar" => Algorithm::Sar,
            "star" => Algorithm::Star,
            "strassen" => Algorithm::Strassen(mode),
            "sar-strassen" => Algorithm::SarStrassen,
            "star-strassen-1" => Algorithm::StarStrassen1,
            "star-strassen-2" => Algorithm::StarStrassen2,
            other => return Err(MmError::Parse(format!("unknown algorithm `{other}`"))),
        })
    }

    pub fn mode(self) -> AllocMode {
        match self {
            Algorithm::Co3(m) | Algorithm::Strassen(m) => m,
            _ => AllocMode::Pooled,
        }
    }

    /// The Strassen family needs `⊖` and overwrites `C`.
    pub fn is_strassen(self) -> bool {
        matches!(
            self,
            Algorithm::Strassen(_) | Algorithm::SarStrassen | Algorithm::StarStrassen1 | Algorithm::StarStrassen2
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

pub struct Engine<S> {
    cfg: Config,
    threads: rayon::ThreadPool,
    pool: Pool<S>,
    metrics: Metrics,
}

impl<S: Semiring> Engine<S> {
    pub fn new(cfg: Config) -> Result<Self> {
        Self::with_policy(cfg, PoolPolicy::Lifo)
    }

    /// An engine whose pool follows `policy`; [`PoolPolicy::AlwaysFresh`] is
    /// only useful as a negative control.
    pub fn with_policy(cfg: Config, policy: PoolPolicy) -> Result<Self> {
        cfg.validate()?;
        let threads = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .thread_name(|i| format!("starmm-{i}"))
            .build()
            .map_err(|e| MmError::InternalError(format!("cannot start workers: {e}")))?;
        Ok(Engine { cfg, threads, pool: Pool::with_policy(cfg.workers, cfg.base_dim, policy), metrics: Metrics::new() })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn pool(&self) -> &Pool<S> {
        &self.pool
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    /// Classical schedules compute `C <- C ⊕ A ⊗ B`; the Strassen family
    /// computes `C <- A ⊗ B`.
    pub fn run(&self, algo: Algorithm, c: &mut Matrix<S>, a: &Matrix<S>, b: &Matrix<S>) -> Result<()> {
        let n = check_square_operands((c.rows(), c.cols()), (a.rows(), a.cols()), (b.rows(), b.cols()), self.cfg.base_dim)?;
        if algo.is_strassen() && !S::has_inverse() {
            return Err(MmError::NoAdditiveInverse);
        }
        self.metrics.begin_run()?;
        let tiles = TileExclusionTable::new(n, n, self.cfg.base_dim);
        if algo.is_strassen() {
            tiles.mark_all(false);
        }
        let cx = Ctx {
            pool: &self.pool,
            metrics: &self.metrics,
            base: self.cfg.base_dim,
            switch: self.cfg.switch_depth() as usize,
            pooled: algo.mode() == AllocMode::Pooled,
            neg: S::neg_one(),
        };
        // SAFETY: `c` is exclusively borrowed for the whole run; the schedules
        // coordinate all writes into it.
        let dst = unsafe { Dst::from_raw(c.as_mut_slice().as_mut_ptr(), n, n, &tiles) };
        let (sa, sb) = (Src::new(a.as_slice(), n, n), Src::new(b.as_slice(), n, n));
        let res = self.threads.install(|| match algo {
            Algorithm::Co2 => classic::co2(&cx, dst, sa, sb, 0),
            Algorithm::Co3(_) => classic::co3(&cx, dst, sa, sb, 0, false),
            Algorithm::Tar => classic::tar(&cx, dst, sa, sb, 0),
            Algorithm::Sar => classic::sar(&cx, dst, sa, sb, 0),
            Algorithm::Star => classic::star(&cx, dst, sa, sb, 0),
            Algorithm::Strassen(_) => strassen::strassen(&cx, dst, sa, sb, 0, false),
            Algorithm::SarStrassen => strassen::sar_strassen(&cx, dst, sa, sb, 0),
            Algorithm::StarStrassen1 => strassen::star_strassen_1(&cx, dst, sa, sb, 0),
            Algorithm::StarStrassen2 => strassen::star_strassen_2(&cx, dst, sa, sb),
        });
        self.metrics.end_run();
        res
    }

    /// `A ⊗ B` into a fresh matrix.
    pub fn multiply(&self, algo: Algorithm, a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>> {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        self.run(algo, &mut c, a, b)?;
        Ok(c)
    }

    /// Counters since the last reset, including the pool's.
    pub fn snapshot(&self) -> MetricsSnapshot {
        let mut s = self.metrics.snapshot();
        s.pool = Some(self.pool.stats());
        s
    }

    /// Zeroes every counter and drains the pool.
    pub fn reset(&self) -> Result<()> {
        self.metrics.reset()?;
        self.pool.reset()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{matrices_equal, naive_mm};
    use crate::semiring::MinPlus;

    fn engine<S: Semiring>(b: usize, p: usize) -> Engine<S> {
        Engine::new(Config::default().with_base(b).with_workers(p)).unwrap()
    }

    #[test]
    fn every_schedule_matches_the_oracle_on_a_small_instance() {
        for p in [1, 3] {
            let e = engine::<i64>(2, p);
            let a = Matrix::random(16, 1);
            let b = Matrix::random(16, 2);
            let expect = naive_mm(&a, &b).unwrap();
            for algo in Algorithm::ALL.into_iter().chain([Algorithm::Co3(AllocMode::Raw), Algorithm::Strassen(AllocMode::Raw)]) {
                let c = e.multiply(algo, &a, &b).unwrap();
                assert_eq!(c, expect, "{algo} p={p}");
            }
        }
    }

    #[test]
    fn classical_schedules_accumulate() {
        let e = engine::<i64>(2, 2);
        let a = Matrix::random(8, 3);
        let b = Matrix::random(8, 4);
        let c0 = Matrix::random(8, 5);
        let prod = naive_mm(&a, &b).unwrap();
        for algo in Algorithm::CLASSICAL {
            let mut c = c0.clone();
            e.run(algo, &mut c, &a, &b).unwrap();
            let expect: Vec<i64> = c0.as_slice().iter().zip(prod.as_slice()).map(|(x, y)| x + y).collect();
            assert_eq!(c.as_slice(), &expect[..], "{algo}");
        }
        // Strassen overwrites.
        let mut c = c0.clone();
        e.run(Algorithm::SarStrassen, &mut c, &a, &b).unwrap();
        assert_eq!(c, prod);
    }

    #[test]
    fn strassen_hand_example() {
        let e = engine::<i64>(1, 1);
        let a = Matrix::from_rows(&[[1, 2], [3, 4]]).unwrap();
        let b = Matrix::from_rows(&[[5, 6], [7, 8]]).unwrap();
        for algo in Algorithm::ALL {
            assert_eq!(e.multiply(algo, &a, &b).unwrap(), Matrix::from_rows(&[[19, 22], [43, 50]]).unwrap());
        }
    }

    #[test]
    fn tropical_rejects_strassen() {
        let e = engine::<MinPlus>(2, 2);
        let a = Matrix::random(4, 1);
        let b = Matrix::random(4, 2);
        for algo in Algorithm::ALL {
            let r = e.multiply(algo, &a, &b);
            if algo.is_strassen() {
                assert_eq!(r.unwrap_err(), MmError::NoAdditiveInverse);
            } else {
                assert!(matrices_equal(&r.unwrap(), &naive_mm(&a, &b).unwrap(), 0.0));
            }
        }
    }

    #[test]
    fn bad_shapes() {
        let e = engine::<i64>(2, 1);
        let a = Matrix::random(3, 1);
        assert!(matches!(e.multiply(Algorithm::Tar, &a, &a), Err(MmError::InvalidSplit(_))));
        let a = Matrix::random(4, 1);
        let b = Matrix::random(8, 1);
        assert!(matches!(e.multiply(Algorithm::Tar, &a, &b), Err(MmError::DimMismatch(_))));
        let e = engine::<i64>(8, 1);
        assert!(matches!(e.multiply(Algorithm::Co2, &a, &a), Err(MmError::InvalidSplit(_))));
    }

    #[test]
    fn algorithm_ids_round_trip() {
        for algo in Algorithm::ALL {
            assert_eq!(Algorithm::parse(algo.id(), algo.mode()).unwrap(), algo);
        }
        assert!(Algorithm::parse("co4", AllocMode::Raw).is_err());
    }
}
