//! Protocol execution: synchronous rounds, asynchronous continuous-time
//! runs, and seeded Monte Carlo estimation of the stabilization time.
//!
//! Trial `i` of a Monte Carlo run draws from a ChaCha8 stream selected by
//! `(base_seed, i)`, so estimates are reproducible across platforms and
//! bit-identical at any worker-thread count: trials are collected in index
//! order and reduced sequentially.

mod estimate;
mod step;
mod trial;

pub use estimate::{
    monte_carlo, token_count_curve, wilson_interval, write_trace_csv, EstimateSummary, SummaryStats,
};
pub use step::{sync_step, sync_step_tokens};
pub use trial::{async_run, default_time_limit, run_trial, TrialOptions, TrialOutcome};
