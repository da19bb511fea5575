//! Experiment orchestration for the token ring: a line-oriented experiment
//! format, engine dispatch across simulation / exact solving / closed forms /
//! bounds, append-only result records with content hashes, the three packaged
//! studies, and plot-ready CSV export.
//!
//! Everything callable from the `herman-kit` binary lives here so that tests
//! and other tools can drive experiments without shelling out.

pub mod engine;
pub mod error;
pub mod plot;
pub mod record;
pub mod spec;
pub mod studies;

pub use engine::{run_spec, run_specs};
pub use error::{Error, Result};
pub use plot::{emit_plot_data, PlotKind};
pub use record::{append_records, ResultRecord, RunManifest};
pub use spec::{mix_seed, parse_spec_line, parse_spec_text, Engine, ExperimentSpec, Generator};
pub use studies::{
    study_conjecture_scan, study_flip_scaling, study_full, ConjectureReport, FlipScalingReport,
    FullStudyReport, ScanMode,
};
