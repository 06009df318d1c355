use mrperf_core::domain::TaskKind;
use mrperf_core::predictor::error_pct;
use mrperf_core::profiler::InputRange;
use mrperf_core::tracelog::parse_log_text;
use mrperf_core::*;

const REFERENCE_LOG: &str = include_str!("../fixtures/reference_rsj_inner.log");

fn small_sweep() -> SweepConfig {
    SweepConfig {
        input_mb: InputRange {
            min: 512.0,
            max: 2048.0,
            step: 512.0,
        },
        map_selectivities: vec![0.2, 0.5, 0.8, 1.0],
        block_sizes_mb: vec![64.0, 128.0],
        repetitions: 1,
    }
}

#[test]
fn reference_log_features() {
    let parsed = parse_log_text(REFERENCE_LOG).unwrap();
    assert_eq!(parsed.skipped_lines, 0);
    let m = JobMetrics::from_trace(&parsed.trace);
    assert_eq!(m.input_mb, Megabytes(19584.0));
    assert_eq!(m.map_tasks, 153);
    assert_eq!(m.reduce_tasks, 11);
    assert_eq!(m.container_count, 8);
    assert_eq!(m.map_selectivity, 1.0);
    assert!((m.map_fn_total_ms.get() - 33069.0).abs() < 1e-6);
    assert!((m.reduce_fn_total_ms.get() - 286257.0).abs() < 1e-6);
    assert_eq!(parsed.trace.workload.reducer_count, 11);
}

#[test]
fn reference_prediction_from_log_totals() {
    let parsed = parse_log_text(REFERENCE_LOG).unwrap();
    let m = JobMetrics::from_trace(&parsed.trace);
    let cluster = ClusterProfile::default();
    let models = PhaseModelSet::from_ground_truth(&cluster.ground_truth);
    let p = predict_job(
        &models,
        &parsed.trace.workload,
        &cluster,
        CustomTimes::Totals {
            map_total_ms: Some(m.map_fn_total_ms),
            reduce_total_ms: Some(m.reduce_fn_total_ms),
        },
    )
    .unwrap();

    let s = 19584.0 / 11.0;
    let map_task = (0.01 * 128.0 + 1.33)
        + 33069.0 / 153.0 / 8.0
        + (0.01 * 128.0 + 0.97)
        + (0.02 * 128.0 + 0.98)
        + (0.002 * 128.0 * 128f64.ln() + 4.80);
    let reduce_task = (10.45 * s + 579.48 * 153.0 + 6144.6) + 286257.0 / 11.0 / 8.0 + (6.94 * s + 2139.98);
    let oracle = 20.0 * map_task + 2.0 * reduce_task;
    assert!((oracle - 263_146.0).abs() < 1.0, "{oracle}");
    assert!(((p.total_ms.get() - oracle) / oracle).abs() < 1e-3);
    assert_eq!((p.map_waves, p.reduce_waves), (20, 2));
    assert!((p.total_ms - parsed.trace.total_ms).get().abs() < 1e-6);
}

#[test]
fn samples_round_trip_through_csv() {
    let cluster = ClusterProfile::default();
    let set = run_profile(&cluster, &build_grid(&small_sweep(), 5).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    set.write_dir(dir.path()).unwrap();
    let back = SampleSet::read_dir(dir.path()).unwrap();
    for phase in Phase::FRAMEWORK {
        let a = set.phase(phase);
        let b = back.phase(phase);
        assert_eq!(a.len(), b.len(), "{phase}");
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.features, y.features);
            assert_eq!(x.target_ms, y.target_ms);
            assert_eq!(x.job_id, y.job_id);
        }
    }
    let cfg = FitConfig::default();
    assert_eq!(fit_phase_models(&set, &cfg).unwrap(), fit_phase_models(&back, &cfg).unwrap());
}

#[test]
fn missing_phase_file_is_reported() {
    let cluster = ClusterProfile::default();
    let set = run_profile(&cluster, &build_grid(&small_sweep(), 5).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    set.write_dir(dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("shuffle.csv")).unwrap();
    match SampleSet::read_dir(dir.path()) {
        Err(Error::MissingSamples { phase, .. }) => assert_eq!(phase, Phase::Shuffle),
        other => panic!("{other:?}"),
    }
}

#[test]
fn under_sampled_phase_names_the_phase() {
    let cluster = ClusterProfile::default();
    let sweep = SweepConfig {
        input_mb: InputRange {
            min: 512.0,
            max: 512.0,
            step: 512.0,
        },
        map_selectivities: vec![1.0],
        block_sizes_mb: vec![128.0],
        repetitions: 1,
    };
    let set = run_profile(&cluster, &build_grid(&sweep, 1).unwrap()).unwrap();
    match fit_phase_models(&set, &FitConfig::default()) {
        Err(Error::UnderSampledPhase { phase, got, needed }) => {
            assert!(phase.is_framework());
            assert!(got < needed);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn noise_free_small_sweep_recovers_read_line() {
    let cluster = ClusterProfile::default().noise_free();
    let set = run_profile(&cluster, &build_grid(&small_sweep(), 5).unwrap()).unwrap();
    let models = fit_phase_models(&set, &FitConfig::default()).unwrap();
    let read = &models.get(Phase::Read).unwrap().fit;
    assert!((read.coefficients[0] - 0.01).abs() < 1e-9);
    assert!((read.intercept - 1.33).abs() < 1e-9);
    let cv = models.get(Phase::Read).unwrap().cv.as_ref().unwrap();
    assert_eq!(cv.k, 10);
}

#[test]
fn write_phase_with_no_output_is_intercept_only() {
    let cluster = ClusterProfile::default();
    let mut samples = Vec::new();
    for seed in 0..6u64 {
        let mut w = WorkloadSpec::generic("count", Megabytes(2048.0), 0.5, 8);
        w.reduce_selectivity = 0.0;
        let trace = simulate_job(&cluster, &w, seed).unwrap();
        samples.extend(mrperf_core::tracelog::extract_samples(&trace));
    }
    let write: Vec<PhaseSample> = samples.into_iter().filter(|s| s.phase == Phase::Write).collect();
    assert!(write.len() >= 30);
    let model = mrperf_core::regress::fit_phase(Phase::Write, &write, &FitConfig::default()).unwrap();
    assert!(model.fit.feature_names.is_empty());
    assert_eq!(model.fit.dropped, vec!["r_mb".to_string()]);
    assert!((model.fit.intercept - 2139.98).abs() / 2139.98 < 0.05);
}

#[test]
fn noisy_fit_predicts_suite_within_gate() {
    let cluster = ClusterProfile::default();
    let set = run_profile(&cluster, &build_grid(&SweepConfig::default(), 11).unwrap()).unwrap();
    let models = fit_phase_models(&set, &FitConfig::default()).unwrap();
    let report = run_suite(&models, &cluster, &default_suite(), &[11, 12]).unwrap();
    assert!(report.mean_abs_error_pct <= 10.0, "{}", report.to_markdown());
    assert_eq!(report.rows.len(), 14);
}

#[test]
fn error_sign_convention() {
    assert_eq!(error_pct(Millis(100.0), Millis(90.0)), 10.0);
    assert_eq!(error_pct(Millis(100.0), Millis(110.0)), -10.0);
}

#[test]
fn simulated_schedule_respects_barrier() {
    let w = WorkloadSpec::generic("j", Megabytes(3000.0), 0.6, 5);
    let t = simulate_job(&ClusterProfile::default(), &w, 3).unwrap();
    let spans = t.schedule();
    let last_map_end = spans
        .iter()
        .filter(|s| s.kind == TaskKind::Map)
        .map(|s| s.end.get())
        .fold(0.0, f64::max);
    assert!(spans
        .iter()
        .filter(|s| s.kind == TaskKind::Reduce)
        .all(|s| s.start.get() >= last_map_end));
    assert_eq!(t.total_ms, t.makespan());
}
