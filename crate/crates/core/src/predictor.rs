//! Compose per-phase models into task and job time estimates.
//!
//! A map task costs `read + map + collect + spill + merge` and a reduce task
//! `shuffle + reduce + write`. The job takes
//! `map_waves * map_task + reduce_waves * reduce_task`, with waves counted as
//! `ceil(tasks / containers)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    derive_features, merge_feature, total_keys, total_records, ClusterProfile,
    GroundTruthCoefficients, Phase, TaskShares, WorkloadSpec,
};
use crate::error::{Error, Result};
use crate::regress::{CvReport, LinearFit};
use crate::simcluster::{custom_phase_time, simulate_job};
use crate::units::Millis;

pub const UNITS_NOTE: &str = "MB, ms";

/// The feature vector a phase model is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRecipe {
    /// Task input split.
    InputMb,
    /// Task map output.
    MapOutputMb,
    /// `m ln m` of the task map output.
    MapOutputMbLnMb,
    /// Shuffled MB per reducer and the job's map task count.
    ShuffleMbAndMappers,
    /// Reducer output.
    WriteMb,
}

impl FeatureRecipe {
    pub fn for_phase(phase: Phase) -> Option<FeatureRecipe> {
        Some(match phase {
            Phase::Read => FeatureRecipe::InputMb,
            Phase::Collect | Phase::Spill => FeatureRecipe::MapOutputMb,
            Phase::Merge => FeatureRecipe::MapOutputMbLnMb,
            Phase::Shuffle => FeatureRecipe::ShuffleMbAndMappers,
            Phase::Write => FeatureRecipe::WriteMb,
            Phase::Map | Phase::Reduce => return None,
        })
    }

    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            FeatureRecipe::InputMb => Phase::Read.feature_names(),
            FeatureRecipe::MapOutputMb => Phase::Collect.feature_names(),
            FeatureRecipe::MapOutputMbLnMb => Phase::Merge.feature_names(),
            FeatureRecipe::ShuffleMbAndMappers => Phase::Shuffle.feature_names(),
            FeatureRecipe::WriteMb => Phase::Write.feature_names(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel {
    pub recipe: FeatureRecipe,
    pub fit: LinearFit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvReport>,
}

impl PhaseModel {
    /// Evaluate on a full recipe feature vector; negative values clamp to 0.
    pub fn predict(&self, features: &[f64]) -> Result<Millis> {
        let names = self.recipe.feature_names();
        if features.len() != names.len() {
            return Err(Error::Contract(format!(
                "{:?} model takes {} features, got {}",
                self.recipe,
                names.len(),
                features.len()
            )));
        }
        let mut acc = 0.0;
        for (name, coef) in self.fit.feature_names.iter().zip(&self.fit.coefficients) {
            let j = names.iter().position(|n| n == name).ok_or_else(|| {
                Error::Contract(format!("model feature `{name}` not in recipe {:?}", self.recipe))
            })?;
            acc += coef * features[j];
        }
        let value = acc + self.fit.intercept;
        if value < 0.0 {
            log::warn!("{:?} model predicted {value} ms; clamped to 0", self.recipe);
        }
        Ok(Millis(value.max(0.0)))
    }

    fn predicts_negative(&self, features: &[f64]) -> bool {
        let names = self.recipe.feature_names();
        let raw: f64 = self
            .fit
            .feature_names
            .iter()
            .zip(&self.fit.coefficients)
            .filter_map(|(n, c)| names.iter().position(|x| x == n).map(|j| c * features[j]))
            .sum::<f64>()
            + self.fit.intercept;
        raw < 0.0
    }
}

/// Same as [`PhaseModel::predict`], free-function form.
pub fn predict_phase(model: &PhaseModel, features: &[f64]) -> Result<Millis> {
    model.predict(features)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseModelSet {
    pub units: String,
    pub phases: BTreeMap<Phase, PhaseModel>,
}

impl PhaseModelSet {
    pub fn new(phases: BTreeMap<Phase, PhaseModel>) -> Result<PhaseModelSet> {
        let set = PhaseModelSet {
            units: UNITS_NOTE.to_owned(),
            phases,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        for phase in Phase::FRAMEWORK {
            let model = self.phases.get(&phase).ok_or(Error::MissingPhaseModel(phase))?;
            if Some(model.recipe) != FeatureRecipe::for_phase(phase) {
                return Err(Error::Contract(format!(
                    "{phase} model uses recipe {:?}",
                    model.recipe
                )));
            }
        }
        if let Some(p) = self.phases.keys().find(|p| !p.is_framework()) {
            return Err(Error::Contract(format!("{p} is user-defined and cannot have a model")));
        }
        Ok(())
    }

    /// Models whose coefficients are exactly the simulator's ground truth.
    pub fn from_ground_truth(gt: &GroundTruthCoefficients) -> PhaseModelSet {
        let linear = |phase: Phase, slope: f64, intercept: f64| {
            let recipe = FeatureRecipe::for_phase(phase).expect("framework phase");
            (
                phase,
                PhaseModel {
                    recipe,
                    fit: LinearFit::fixed(recipe.feature_names(), &[slope], intercept),
                    cv: None,
                },
            )
        };
        let mut phases: BTreeMap<Phase, PhaseModel> = [
            linear(Phase::Read, gt.read.slope, gt.read.intercept),
            linear(Phase::Collect, gt.collect.slope, gt.collect.intercept),
            linear(Phase::Spill, gt.spill.slope, gt.spill.intercept),
            linear(Phase::Merge, gt.merge.slope, gt.merge.intercept),
            linear(Phase::Write, gt.write.slope, gt.write.intercept),
        ]
        .into_iter()
        .collect();
        phases.insert(
            Phase::Shuffle,
            PhaseModel {
                recipe: FeatureRecipe::ShuffleMbAndMappers,
                fit: LinearFit::fixed(
                    FeatureRecipe::ShuffleMbAndMappers.feature_names(),
                    &[gt.shuffle.per_mb, gt.shuffle.per_mapper],
                    gt.shuffle.intercept,
                ),
                cv: None,
            },
        );
        PhaseModelSet {
            units: UNITS_NOTE.to_owned(),
            phases,
        }
    }

    pub fn get(&self, phase: Phase) -> Result<&PhaseModel> {
        self.phases.get(&phase).ok_or(Error::MissingPhaseModel(phase))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<PhaseModelSet> {
        let set: PhaseModelSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn read(path: &Path) -> Result<PhaseModelSet> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Fit summary: one block per phase with coefficients, p-values,
    /// RMSE, R-squared and the cross-validation line.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (phase, m) in &self.phases {
            let f = &m.fit;
            let _ = writeln!(out, "{phase} ({:?}, n = {})", m.recipe, f.n_samples);
            let _ = writeln!(
                out,
                "  {:<10} {:>16} {:>12}",
                "term", "estimate", "p-value"
            );
            let _ = writeln!(
                out,
                "  {:<10} {:>16.6} {:>12.3e}",
                "intercept", f.intercept, f.intercept_p_value
            );
            for ((name, c), p) in f.feature_names.iter().zip(&f.coefficients).zip(&f.p_values) {
                let _ = writeln!(out, "  {name:<10} {c:>16.6} {p:>12.3e}");
            }
            for name in &f.eliminated {
                let _ = writeln!(out, "  {name:<10} {:>16} {:>12}", "eliminated", "-");
            }
            for name in &f.dropped {
                let _ = writeln!(out, "  {name:<10} {:>16} {:>12}", "constant", "-");
            }
            let _ = writeln!(
                out,
                "  RMSE {:.4} ms  R^2 {:.6}  adj R^2 {:.6}",
                f.rmse_ms, f.r_squared, f.adj_r_squared
            );
            if let Some(cv) = &m.cv {
                let _ = writeln!(out, "  {}-fold CV mean RMSE {:.4} ms", cv.k, cv.mean_rmse);
            }
        }
        out
    }
}

/// Where the user-defined map and reduce times come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CustomTimes {
    /// The workload's per-record and per-key rates.
    Rates,
    /// Measured totals of all map()/reduce() calls, e.g. from a reference run.
    Totals {
        map_total_ms: Option<Millis>,
        reduce_total_ms: Option<Millis>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobPrediction {
    pub workload: String,
    pub phase_task_ms: BTreeMap<Phase, Millis>,
    pub map_task_ms: Millis,
    pub reduce_task_ms: Millis,
    pub map_waves: u32,
    pub reduce_waves: u32,
    pub total_ms: Millis,
    pub breakdown: BTreeMap<Phase, Millis>,
    /// Phases whose model extrapolated below zero and was clamped.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clamped: Vec<Phase>,
}

impl JobPrediction {
    pub fn waves_of(&self, phase: Phase) -> u32 {
        match phase.kind() {
            crate::domain::TaskKind::Map => self.map_waves,
            crate::domain::TaskKind::Reduce => self.reduce_waves,
        }
    }

    /// Human-readable breakdown: phase, per-task ms, waves, contribution, share.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "workload: {}", self.workload);
        let _ = writeln!(
            out,
            "{:<8} {:>14} {:>6} {:>16} {:>8}",
            "phase", "per-task ms", "waves", "contribution ms", "share %"
        );
        let total = self.total_ms.get();
        for (phase, per_task) in &self.phase_task_ms {
            let contribution = self.breakdown[phase].get();
            let share = if total > 0.0 { 100.0 * contribution / total } else { 0.0 };
            let _ = writeln!(
                out,
                "{:<8} {:>14.3} {:>6} {:>16.3} {:>8.2}",
                phase.as_str(),
                per_task.get(),
                self.waves_of(*phase),
                contribution,
                share
            );
        }
        let _ = writeln!(out, "map task {:.3} ms x {} waves", self.map_task_ms.get(), self.map_waves);
        let _ = writeln!(
            out,
            "reduce task {:.3} ms x {} waves",
            self.reduce_task_ms.get(),
            self.reduce_waves
        );
        let _ = writeln!(out, "total {:.3} ms ({:.0} s)", total, self.total_ms.as_secs());
        out
    }
}

pub fn predict_job(
    models: &PhaseModelSet,
    workload: &WorkloadSpec,
    cluster: &ClusterProfile,
    custom: CustomTimes,
) -> Result<JobPrediction> {
    models.validate()?;
    let f = derive_features(workload, cluster)?;
    let shares = TaskShares::new(workload, cluster, &f);
    let nc = cluster.container_count;

    let (map_fn, reduce_fn) = match custom {
        CustomTimes::Rates => (
            custom_phase_time(total_records(workload, cluster), workload.map_ms_per_record, f.total_mappers, nc),
            custom_phase_time(total_keys(workload, &f), workload.reduce_ms_per_key, workload.reducer_count, nc),
        ),
        CustomTimes::Totals {
            map_total_ms,
            reduce_total_ms,
        } => {
            let map_total = map_total_ms.ok_or(Error::MissingCustomTime("map"))?;
            let reduce = if workload.is_map_only() {
                Millis::ZERO
            } else {
                let total = reduce_total_ms.ok_or(Error::MissingCustomTime("reduce"))?;
                total / workload.reducer_count as f64 / nc as f64
            };
            (map_total / f.total_mappers as f64 / nc as f64, reduce)
        }
    };

    let mut phase_task_ms = BTreeMap::new();
    let mut clamped = Vec::new();
    let mut eval = |phase: Phase, x: &[f64]| -> Result<Millis> {
        let model = models.get(phase)?;
        if model.predicts_negative(x) {
            clamped.push(phase);
        }
        model.predict(x)
    };
    let m = shares.map_output.get();
    phase_task_ms.insert(Phase::Read, eval(Phase::Read, &[shares.map_input.get()])?);
    phase_task_ms.insert(Phase::Map, map_fn);
    phase_task_ms.insert(Phase::Collect, eval(Phase::Collect, &[m])?);
    phase_task_ms.insert(Phase::Spill, eval(Phase::Spill, &[m])?);
    let merge = if shares.merge_runs {
        eval(Phase::Merge, &[merge_feature(shares.map_output)])?
    } else {
        Millis::ZERO
    };
    phase_task_ms.insert(Phase::Merge, merge);
    if !workload.is_map_only() {
        let shuffle = eval(
            Phase::Shuffle,
            &[shares.shuffle_input.get(), f.total_mappers as f64],
        )?;
        phase_task_ms.insert(Phase::Shuffle, shuffle);
        phase_task_ms.insert(Phase::Reduce, reduce_fn);
        phase_task_ms.insert(Phase::Write, eval(Phase::Write, &[shares.reduce_output.get()])?);
    }

    let sum_side = |phases: &[Phase]| -> Millis {
        phases.iter().filter_map(|p| phase_task_ms.get(p)).copied().sum()
    };
    let map_task_ms = sum_side(&Phase::MAP_SIDE);
    let reduce_task_ms = sum_side(&Phase::REDUCE_SIDE);
    let total_ms = map_task_ms * f.map_waves as f64 + reduce_task_ms * f.reduce_waves as f64;
    let breakdown = phase_task_ms
        .iter()
        .map(|(&p, &ms)| {
            let waves = if p.kind() == crate::domain::TaskKind::Map { f.map_waves } else { f.reduce_waves };
            (p, ms * waves as f64)
        })
        .collect();

    Ok(JobPrediction {
        workload: workload.name.clone(),
        phase_task_ms,
        map_task_ms,
        reduce_task_ms,
        map_waves: f.map_waves,
        reduce_waves: f.reduce_waves,
        total_ms,
        breakdown,
        clamped,
    })
}

/// `(actual - predicted) / actual * 100`: positive when the model is fast.
pub fn error_pct(actual: Millis, predicted: Millis) -> f64 {
    if actual.get() == 0.0 {
        if predicted.get() == 0.0 {
            0.0
        } else {
            -100.0
        }
    } else {
        (actual - predicted) / actual * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub seed: u64,
    pub actual_ms: Millis,
    pub predicted_ms: Millis,
    pub error_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub workload: String,
    pub runs: Vec<RunError>,
    pub mean_abs_error_pct: f64,
    pub max_abs_error_pct: f64,
}

impl ErrorReport {
    /// True when some run missed by more than `pct` percent.
    pub fn exceeds(&self, pct: f64) -> bool {
        self.max_abs_error_pct > pct
    }
}

pub fn evaluate_prediction(
    models: &PhaseModelSet,
    workload: &WorkloadSpec,
    cluster: &ClusterProfile,
    seeds: &[u64],
    custom: CustomTimes,
) -> Result<ErrorReport> {
    let predicted = predict_job(models, workload, cluster, custom)?.total_ms;
    let runs = seeds
        .iter()
        .map(|&seed| {
            let actual = simulate_job(cluster, workload, seed)?.total_ms;
            Ok(RunError {
                seed,
                actual_ms: actual,
                predicted_ms: predicted,
                error_pct: error_pct(actual, predicted),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let abs: Vec<f64> = runs.iter().map(|r| r.error_pct.abs()).collect();
    Ok(ErrorReport {
        workload: workload.name.clone(),
        mean_abs_error_pct: if abs.is_empty() { 0.0 } else { abs.iter().sum::<f64>() / abs.len() as f64 },
        max_abs_error_pct: abs.iter().copied().fold(0.0, f64::max),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DesignPattern;
    use crate::units::Megabytes;
    use approx::assert_abs_diff_eq;

    fn gt_models() -> PhaseModelSet {
        PhaseModelSet::from_ground_truth(&GroundTruthCoefficients::default())
    }

    #[test]
    fn phase_examples() {
        let m = gt_models();
        let read = m.get(Phase::Read).unwrap().predict(&[128.0]).unwrap();
        assert_abs_diff_eq!(read.get(), 2.61, epsilon = 1e-12);
        let shuffle = m.get(Phase::Shuffle).unwrap().predict(&[1780.36, 153.0]).unwrap();
        assert_abs_diff_eq!(shuffle.get(), 113_409.9, epsilon = 0.5);
        for phase in Phase::FRAMEWORK {
            let model = m.get(phase).unwrap();
            let zeros = vec![0.0; model.recipe.feature_names().len()];
            assert_eq!(model.predict(&zeros).unwrap().get(), model.fit.intercept);
        }
    }

    #[test]
    fn negative_prediction_clamps() {
        let mut m = gt_models();
        m.phases.get_mut(&Phase::Read).unwrap().fit.intercept = -50.0;
        assert_eq!(m.get(Phase::Read).unwrap().predict(&[1.0]).unwrap(), Millis::ZERO);
    }

    #[test]
    fn feature_count_mismatch() {
        let m = gt_models();
        assert!(matches!(m.get(Phase::Shuffle).unwrap().predict(&[1.0]), Err(Error::Contract(_))));
    }

    fn workload(input: f64, reducers: u32) -> WorkloadSpec {
        WorkloadSpec {
            name: "w".into(),
            input_mb: Megabytes(input),
            map_selectivity: 0.8,
            reduce_selectivity: 0.5,
            reducer_count: reducers,
            map_ms_per_record: 1e-4,
            reduce_ms_per_key: 0.2,
            keys_per_mb: 50.0,
            design_pattern: DesignPattern::Summarisation,
        }
    }

    #[test]
    fn totals_must_be_supplied() {
        let c = ClusterProfile::default();
        let missing = CustomTimes::Totals { map_total_ms: Some(Millis(10.0)), reduce_total_ms: None };
        assert!(matches!(
            predict_job(&gt_models(), &workload(1000.0, 2), &c, missing),
            Err(Error::MissingCustomTime("reduce"))
        ));
        // map-only needs no reduce total
        let p = predict_job(&gt_models(), &workload(1000.0, 0), &c, missing).unwrap();
        assert_eq!(p.reduce_waves, 0);
        assert_abs_diff_eq!(p.total_ms.get(), p.map_task_ms.get() * p.map_waves as f64);
        let none = CustomTimes::Totals { map_total_ms: None, reduce_total_ms: None };
        assert!(predict_job(&gt_models(), &workload(1000.0, 0), &c, none).is_err());
    }

    #[test]
    fn breakdown_sums_to_total() {
        let p = predict_job(&gt_models(), &workload(7000.0, 5), &ClusterProfile::default(), CustomTimes::Rates).unwrap();
        let sum: Millis = p.breakdown.values().sum();
        assert!(((sum - p.total_ms) / p.total_ms).abs() < 1e-12);
        assert!(p.table().contains("SHUFFLE"));
    }

    #[test]
    fn ground_truth_models_match_noise_free_simulation() {
        let c = ClusterProfile::default().noise_free();
        let w = workload(4321.0, 9);
        let predicted = predict_job(&gt_models(), &w, &c, CustomTimes::Rates).unwrap().total_ms;
        let actual = simulate_job(&c, &w, 1).unwrap().total_ms;
        assert!(((predicted - actual) / actual).abs() < 1e-12);
        let report = evaluate_prediction(&gt_models(), &w, &c, &[1, 2, 3], CustomTimes::Rates).unwrap();
        assert!(report.max_abs_error_pct < 1e-9);
    }

    #[test]
    fn doubled_slopes_are_flagged() {
        let c = ClusterProfile::default();
        let bad = PhaseModelSet::from_ground_truth(&c.ground_truth.with_scaled_slopes(2.0));
        let w = WorkloadSpec::generic("join", Megabytes(19149.0), 1.0, 11);
        let report = evaluate_prediction(&bad, &w, &c, &[1, 2], CustomTimes::Rates).unwrap();
        assert!(report.exceeds(50.0), "{report:?}");
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = gt_models();
        let text = m.to_json().unwrap();
        assert!(text.contains("\"units\": \"MB, ms\""));
        assert_eq!(PhaseModelSet::from_json(&text).unwrap(), m);
        let mut partial = m.clone();
        partial.phases.remove(&Phase::Write);
        assert!(matches!(partial.validate(), Err(Error::MissingPhaseModel(Phase::Write))));
    }
}
