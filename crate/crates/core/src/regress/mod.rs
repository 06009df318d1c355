//! Least squares with t-test inference, backward elimination and k-fold
//! cross-validation, plus the per-phase fitting driver.

mod cv;
mod linalg;
mod ols;
mod tdist;

pub use cv::{fold_partition, kfold_cv, CvReport, DEFAULT_FOLDS};
pub use ols::{backward_eliminate, ols_fit, Design, LinearFit};
pub use tdist::{incomplete_beta, ln_gamma, student_t_cdf, two_sided_p_value};

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::domain::Phase;
use crate::error::{Error, Result};
use crate::predictor::{FeatureRecipe, PhaseModel, PhaseModelSet};
use crate::profiler::SampleSet;
use crate::tracelog::PhaseSample;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const MIN_PHASE_SAMPLES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub alpha: f64,
    pub folds: usize,
    pub seed: u64,
    pub min_samples: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            alpha: DEFAULT_ALPHA,
            folds: DEFAULT_FOLDS,
            seed: 42,
            min_samples: MIN_PHASE_SAMPLES,
        }
    }
}

/// Fit one phase: backward elimination over the recipe's features, then
/// cross-validation of the retained model.
pub fn fit_phase(phase: Phase, samples: &[PhaseSample], config: &FitConfig) -> Result<PhaseModel> {
    let recipe = FeatureRecipe::for_phase(phase)
        .ok_or_else(|| Error::Contract(format!("{phase} is user-defined and is not fitted")))?;
    if samples.len() < config.min_samples {
        return Err(Error::UnderSampledPhase {
            phase,
            got: samples.len(),
            needed: config.min_samples,
        });
    }
    let names = recipe.feature_names();
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features.clone()).collect();
    let design = Design::from_rows(names, &rows)?;
    let targets: Vec<f64> = samples.iter().map(|s| s.target_ms).collect();
    let fit = backward_eliminate(&design, &targets, config.alpha)?;
    let cv = kfold_cv(&design.select(&fit.feature_names)?, &targets, config.folds, config.seed)?;
    log::info!(
        "{phase}: n={} rmse={:.4} cv={:.4} kept={:?}",
        fit.n_samples,
        fit.rmse_ms,
        cv.mean_rmse,
        fit.feature_names
    );
    Ok(PhaseModel {
        recipe,
        fit,
        cv: Some(cv),
    })
}

/// Fit all six framework phases (independently, in parallel).
pub fn fit_phase_models(samples: &SampleSet, config: &FitConfig) -> Result<PhaseModelSet> {
    let fitted: Vec<(Phase, Result<PhaseModel>)> = Phase::FRAMEWORK
        .par_iter()
        .map(|&p| (p, fit_phase(p, samples.phase(p), config)))
        .collect();
    let mut phases = BTreeMap::new();
    for (phase, model) in fitted {
        phases.insert(phase, model?);
    }
    PhaseModelSet::new(phases)
}
