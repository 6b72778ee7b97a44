//! Processor-oblivious fork-join matrix multiplication over semirings.
//!
//! The crate provides the classical recursive schedules (CO2, CO3, TAR, SAR,
//! STAR) and Strassen variants on top of a work-stealing pool, together with
//! the machinery they rely on: a per-worker LIFO memory pool, tile-serialized
//! accumulation, lazy allocation of temporaries, and runtime counters.
//! [`analysis`] evaluates the cost recurrences, builds explicit task graphs
//! and replays memory traces through an LRU cache.
//!
//! ```
//! use starmm::{Algorithm, Config, Engine, Matrix, naive_mm};
//!
//! let engine = Engine::<i64>::new(Config::default().with_base(4).with_workers(2)).unwrap();
//! let a = Matrix::random(16, 1);
//! let b = Matrix::random(16, 2);
//! let c = engine.multiply(Algorithm::Star, &a, &b).unwrap();
//! assert_eq!(c, naive_mm(&a, &b).unwrap());
//! ```

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod exclusion;
pub mod kernel;
pub mod matrix;
pub mod metrics;
pub mod pool;
pub mod semiring;
pub mod shared;
pub mod verify;

mod classic;
mod runtime;
mod strassen;
mod view;

pub use config::Config;
pub use engine::{AllocMode, Algorithm, Engine};
pub use error::{MmError, Result};
pub use kernel::{base_kernel, madd, matrices_equal, naive_mm};
pub use matrix::{Matrix, MatrixRegion};
pub use metrics::MetricsSnapshot;
pub use pool::{BlockHandle, Pool, PoolPolicy, PoolStats};
pub use semiring::{MinPlus, Semiring, SemiringId};
pub use shared::SharedOutput;
