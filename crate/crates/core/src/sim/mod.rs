//! Simulated data and repeated-trial studies.

mod dgp;
mod study;

pub use dgp::{gen_correlated_toy, gen_main_dgp, DgpSpec, Response};
pub use study::{
    run_loco_comparison, run_power_study, CellConfig, CellRecord, ComparisonConfig, ComparisonTable, FrequencyTable,
    PowerStudy, StudyConfig, TrialRecord,
};
