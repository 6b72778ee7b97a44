//! Cost models and offline oracles.
//!
//! * [`recurrence`]: exact integer evaluation of the work, span, space and
//!   cache recurrences of every schedule.
//! * [`dag`]: explicit task graphs whose longest path and weight sum give an
//!   independent work/span answer.
//! * [`trace`] and [`cache`]: a serial instrumented replay of a schedule and a
//!   fully associative LRU cache to count its line transfers.

pub mod cache;
pub mod dag;
pub mod recurrence;
pub mod trace;

pub use cache::{simulate_cache, LruCache, MultiLru};
pub use dag::{build_dag, longest_path, NodeKind, TaskDag};
pub use recurrence::{eval_recurrence, parallel_cache_bound, sar_switch_depth, CostReport};
pub use trace::{collect_trace, record_trace, AccessKind, AccessTrace, CountingSink, TraceRun, TraceSink, MAX_TRACE_B, MAX_TRACE_N};
