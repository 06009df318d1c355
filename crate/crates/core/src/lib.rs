//! Phase-level cost models for MapReduce jobs on a YARN-style cluster.
//!
//! The pipeline: [`simcluster`] runs jobs and [`tracelog`] writes and parses
//! their logs; [`profiler`] sweeps generic benchmarks into per-phase samples;
//! [`regress`] fits one linear model per framework phase; [`predictor`]
//! composes the models into a job estimate; [`benchsuite`] scores estimates
//! against simulated runs of a design-pattern catalogue.

pub mod benchsuite;
pub mod domain;
pub mod error;
pub mod predictor;
pub mod profiler;
pub mod regress;
pub mod seeding;
pub mod simcluster;
pub mod tracelog;
pub mod units;

pub use benchsuite::{default_suite, run_suite, Suite, SuiteEntry, SuiteReport};
pub use domain::{
    derive_features, wave_count, ClusterProfile, DerivedFeatures, DesignPattern,
    GroundTruthCoefficients, Phase, TaskKind, WorkloadSpec,
};
pub use error::{Error, Result};
pub use predictor::{
    evaluate_prediction, predict_job, predict_phase, CustomTimes, ErrorReport, FeatureRecipe,
    JobPrediction, PhaseModel, PhaseModelSet,
};
pub use profiler::{build_grid, run_profile, BenchmarkPoint, SampleSet, SweepConfig};
pub use regress::{fit_phase_models, FitConfig, LinearFit};
pub use simcluster::{simulate_job, JobTrace};
pub use tracelog::{emit_log, parse_log, JobMetrics, LogDocument, PhaseSample};
pub use units::{Megabytes, Millis};
