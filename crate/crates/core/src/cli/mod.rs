//! Experiment orchestration: manifests, phantoms, the pipeline, sweeps and
//! plot-data export.

mod export;
mod manifest;
mod phantom;
mod pipeline;
pub mod stages;
mod sweep;

pub use export::{export_plotdata, midline_table};
pub use manifest::{
    ExperimentManifest, GridSpec, ProbeSpec, RefineSpec, SweepSpec, MANIFEST_VERSION,
    TOOLKIT_VERSION,
};
pub use phantom::{PhantomKind, PhantomSpec};
pub use pipeline::{
    evaluation_mask, execute, file_meta, forward_stage, refine_stage, run_pipeline,
    write_measurements, write_noisy, ErrorPair, FieldWriter, PipelineOutput, ReconstructionReport,
    RefinementReport, RunStatus,
};
pub use sweep::{
    read_rows_csv, run_sweep, sweep_rows, write_rows_csv, CellSummary, SlopeFit, SweepRow,
    SweepSummary, MIN_FIT_REALIZATIONS,
};

use crate::error::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IMPROPER: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const CONFIG: i32 = 4;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Improper(_) => exit::IMPROPER,
        Error::NotConverged { .. } | Error::Singular(_) => exit::SOLVER,
        _ => exit::CONFIG,
    }
}
