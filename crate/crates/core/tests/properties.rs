use mrperf_core::domain::SUPPORTED_BLOCK_SIZES_MB;
use mrperf_core::tracelog::parse_log_text;
use mrperf_core::*;
use proptest::prelude::*;

fn workload_strategy() -> impl Strategy<Value = WorkloadSpec> {
    (
        1.0f64..40_000.0,
        0.0f64..=1.0,
        0.0f64..1.5,
        0u32..40,
        0.0f64..3e-4,
        0.0f64..0.3,
        1.0f64..500.0,
    )
        .prop_map(|(d, msel, rsel, rt, map_rate, red_rate, kpm)| WorkloadSpec {
            name: "prop".into(),
            input_mb: Megabytes(d),
            map_selectivity: msel,
            reduce_selectivity: rsel,
            reducer_count: rt,
            map_ms_per_record: map_rate,
            reduce_ms_per_key: red_rate,
            keys_per_mb: kpm,
            design_pattern: DesignPattern::Generic,
        })
}

fn cluster_strategy() -> impl Strategy<Value = ClusterProfile> {
    (1u32..64, 0usize..SUPPORTED_BLOCK_SIZES_MB.len()).prop_map(|(nc, b)| ClusterProfile {
        container_count: nc,
        block_size_mb: Megabytes(SUPPORTED_BLOCK_SIZES_MB[b]),
        ..ClusterProfile::default().noise_free()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn wave_ceiling_identities(tasks in 0u32..1_000_000, containers in 1u32..10_000) {
        let w = wave_count(tasks, containers).unwrap();
        prop_assert!(w as u64 * containers as u64 >= tasks as u64);
        if tasks > 0 {
            prop_assert!(((w - 1) as u64) * (containers as u64) < tasks as u64);
        } else {
            prop_assert_eq!(w, 0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simulator_and_predictor_agree_without_noise(
        w in workload_strategy(),
        c in cluster_strategy(),
        seed in any::<u64>(),
    ) {
        let models = PhaseModelSet::from_ground_truth(&c.ground_truth);
        let predicted = predict_job(&models, &w, &c, CustomTimes::Rates).unwrap();
        let actual = simulate_job(&c, &w, seed).unwrap();
        let rel = ((predicted.total_ms - actual.total_ms) / actual.total_ms).abs();
        prop_assert!(rel < 1e-9, "rel {}", rel);
        prop_assert_eq!(
            predicted.total_ms.get(),
            predicted.map_task_ms.get() * predicted.map_waves as f64
                + predicted.reduce_task_ms.get() * predicted.reduce_waves as f64
        );
        let sum: Millis = predicted.breakdown.values().sum();
        prop_assert!(((sum - predicted.total_ms) / predicted.total_ms).abs() < 1e-6);
        if w.reducer_count == 0 {
            prop_assert_eq!(predicted.reduce_waves, 0);
        }
    }

    #[test]
    fn log_round_trip(w in workload_strategy(), sigma in 0.0f64..0.2, seed in any::<u64>()) {
        let c = ClusterProfile::default().with_noise(sigma);
        let trace = simulate_job(&c, &w, seed).unwrap();
        let parsed = parse_log_text(&emit_log(&trace).to_string()).unwrap();
        prop_assert_eq!(parsed.trace, trace);
    }

    #[test]
    fn simulation_is_deterministic(w in workload_strategy(), seed in any::<u64>()) {
        let c = ClusterProfile::default();
        prop_assert_eq!(simulate_job(&c, &w, seed).unwrap(), simulate_job(&c, &w, seed).unwrap());
    }

    #[test]
    fn prediction_grows_with_input(
        mut w in workload_strategy(),
        c in cluster_strategy(),
        grow in 0.0f64..20_000.0,
    ) {
        w.reducer_count = w.reducer_count.max(1);
        let models = PhaseModelSet::from_ground_truth(&c.ground_truth);
        let small = predict_job(&models, &w, &c, CustomTimes::Rates).unwrap().total_ms;
        w.input_mb += Megabytes(grow);
        let large = predict_job(&models, &w, &c, CustomTimes::Rates).unwrap().total_ms;
        prop_assert!(large.get() >= small.get() * (1.0 - 1e-12), "{} < {}", large, small);
    }

    #[test]
    fn more_containers_never_slower(
        w in workload_strategy(),
        mut c in cluster_strategy(),
        extra in 1u32..64,
    ) {
        let models = PhaseModelSet::from_ground_truth(&c.ground_truth);
        let few = predict_job(&models, &w, &c, CustomTimes::Rates).unwrap().total_ms;
        c.container_count += extra;
        let many = predict_job(&models, &w, &c, CustomTimes::Rates).unwrap().total_ms;
        prop_assert!(many.get() <= few.get() * (1.0 + 1e-12), "{} > {}", many, few);
    }

    #[test]
    fn noisy_phases_stay_non_negative(w in workload_strategy(), seed in any::<u64>()) {
        let c = ClusterProfile::default().with_noise(0.6);
        let t = simulate_job(&c, &w, seed).unwrap();
        prop_assert!(t.tasks.iter().flat_map(|t| t.phase_ms.values()).all(|ms| ms.get() >= 0.0));
    }
}
