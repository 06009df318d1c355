//! Deterministic simulator of a FIFO YARN cluster running one MapReduce job.
//!
//! Map tasks are packed into waves of `container_count`, then reduce tasks
//! into their own waves once the last map wave has finished. A wave lasts as
//! long as its slowest task. Phase durations are the ground-truth linear
//! costs on the task's data share, each multiplied by an independent
//! truncated Gaussian factor `max(0, 1 + sigma * g)`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{
    derive_features, merge_feature, total_keys, total_records, ClusterProfile,
    GroundTruthCoefficients, Phase, TaskKind, TaskShares, WorkloadSpec,
};
use crate::error::{Error, Result};
use crate::units::{Megabytes, Millis};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskCounters {
    /// Map: split size. Reduce: shuffled input.
    pub input_mb: Megabytes,
    /// Map: map output. Reduce: bytes written to HDFS.
    pub output_mb: Megabytes,
    pub spill_files: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTrace {
    pub task_id: String,
    pub kind: TaskKind,
    pub wave_index: u32,
    pub phase_ms: BTreeMap<Phase, Millis>,
    pub counters: TaskCounters,
}

impl TaskTrace {
    /// Sum of the task's phases in pipeline order.
    pub fn duration(&self) -> Millis {
        self.phase_ms.values().sum()
    }

    pub fn phase(&self, phase: Phase) -> Option<Millis> {
        self.phase_ms.get(&phase).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub container_count: u32,
    pub block_size_mb: Megabytes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobTrace {
    pub job_id: String,
    pub workload: WorkloadSpec,
    pub cluster_summary: ClusterSummary,
    pub tasks: Vec<TaskTrace>,
    pub total_ms: Millis,
    pub seed: u64,
}

/// Start and end of one task on the job timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpan {
    pub kind: TaskKind,
    pub wave_index: u32,
    pub start: Millis,
    pub end: Millis,
}

impl JobTrace {
    pub fn tasks_of(&self, kind: TaskKind) -> impl Iterator<Item = &TaskTrace> {
        self.tasks.iter().filter(move |t| t.kind == kind)
    }

    pub fn map_task_count(&self) -> usize {
        self.tasks_of(TaskKind::Map).count()
    }

    pub fn reduce_task_count(&self) -> usize {
        self.tasks_of(TaskKind::Reduce).count()
    }

    fn wave_lengths(&self, kind: TaskKind) -> Vec<Millis> {
        let mut waves: BTreeMap<u32, Millis> = BTreeMap::new();
        for t in self.tasks_of(kind) {
            let slot = waves.entry(t.wave_index).or_insert(Millis::ZERO);
            *slot = slot.max(t.duration());
        }
        waves.into_values().collect()
    }

    /// Makespan: map waves back to back, then reduce waves behind the barrier.
    pub fn makespan(&self) -> Millis {
        let map: Millis = self.wave_lengths(TaskKind::Map).into_iter().sum();
        let reduce: Millis = self.wave_lengths(TaskKind::Reduce).into_iter().sum();
        map + reduce
    }

    /// Timeline of every task, in task order.
    pub fn schedule(&self) -> Vec<TaskSpan> {
        let mut wave_start: BTreeMap<(TaskKind, u32), Millis> = BTreeMap::new();
        let mut clock = Millis::ZERO;
        for kind in [TaskKind::Map, TaskKind::Reduce] {
            let mut indices: Vec<u32> = self.tasks_of(kind).map(|t| t.wave_index).collect();
            indices.sort_unstable();
            indices.dedup();
            let lengths = self.wave_lengths(kind);
            for (w, len) in indices.into_iter().zip(lengths) {
                wave_start.insert((kind, w), clock);
                clock += len;
            }
        }
        self.tasks
            .iter()
            .map(|t| {
                let start = wave_start[&(t.kind, t.wave_index)];
                TaskSpan {
                    kind: t.kind,
                    wave_index: t.wave_index,
                    start,
                    end: start + t.duration(),
                }
            })
            .collect()
    }
}

/// Per-task volumes fed to a framework phase's ground-truth cost.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseInputs {
    pub task_input: Megabytes,
    pub map_output: Megabytes,
    pub shuffle_input: Megabytes,
    pub total_mappers: u32,
    pub reduce_output: Megabytes,
}

/// Ground-truth duration of a framework phase for one task.
pub fn phase_ground_truth(
    phase: Phase,
    inputs: &PhaseInputs,
    coeffs: &GroundTruthCoefficients,
) -> Result<Millis> {
    let t = match phase {
        Phase::Read => coeffs.read.eval(inputs.task_input.get()),
        Phase::Collect => coeffs.collect.eval(inputs.map_output.get()),
        Phase::Spill => coeffs.spill.eval(inputs.map_output.get()),
        Phase::Merge => coeffs.merge.eval(merge_feature(inputs.map_output)),
        Phase::Shuffle => {
            let s = &coeffs.shuffle;
            Millis(
                s.per_mb * inputs.shuffle_input.get()
                    + s.per_mapper * inputs.total_mappers as f64
                    + s.intercept,
            )
        }
        Phase::Write => coeffs.write.eval(inputs.reduce_output.get()),
        Phase::Map | Phase::Reduce => {
            return Err(Error::Contract(format!(
                "{phase} is a user-defined phase with no ground-truth cost model"
            )))
        }
    };
    Ok(t)
}

/// Per-task time of a user-defined map or reduce function: the summed
/// per-unit cost divided over the tasks, then over the containers.
pub fn custom_phase_time(
    units: u64,
    ms_per_unit: f64,
    task_count: u32,
    container_count: u32,
) -> Millis {
    if task_count == 0 || container_count == 0 {
        return Millis::ZERO;
    }
    let total = units as f64 * ms_per_unit;
    Millis(total / task_count as f64 / container_count as f64)
}

pub fn job_id_for_seed(seed: u64) -> String {
    format!("job_{seed:016x}")
}

struct Noise {
    rng: ChaCha8Rng,
    sigma: f64,
}

impl Noise {
    fn factor(&mut self) -> f64 {
        let g: f64 = StandardNormal.sample(&mut self.rng);
        (1.0 + self.sigma * g).max(0.0)
    }
}

pub fn simulate_job(cluster: &ClusterProfile, workload: &WorkloadSpec, seed: u64) -> Result<JobTrace> {
    let features = derive_features(workload, cluster)?;
    let shares = TaskShares::new(workload, cluster, &features);
    let coeffs = &cluster.ground_truth;
    let containers = cluster.container_count;
    let job_id = job_id_for_seed(seed);
    let mut noise = Noise {
        rng: ChaCha8Rng::seed_from_u64(seed),
        sigma: cluster.noise_sigma,
    };

    let inputs = PhaseInputs {
        task_input: shares.map_input,
        map_output: shares.map_output,
        shuffle_input: shares.shuffle_input,
        total_mappers: features.total_mappers,
        reduce_output: shares.reduce_output,
    };
    let map_fn = custom_phase_time(
        total_records(workload, cluster),
        workload.map_ms_per_record,
        features.total_mappers,
        containers,
    );
    let reduce_fn = custom_phase_time(
        total_keys(workload, &features),
        workload.reduce_ms_per_key,
        workload.reducer_count,
        containers,
    );

    let mut tasks = Vec::with_capacity((features.total_mappers + workload.reducer_count) as usize);
    for i in 0..features.total_mappers {
        let mut phase_ms = BTreeMap::new();
        for phase in Phase::MAP_SIDE {
            let factor = noise.factor();
            let base = match phase {
                Phase::Map => map_fn,
                Phase::Merge if !shares.merge_runs => Millis::ZERO,
                _ => phase_ground_truth(phase, &inputs, coeffs)?,
            };
            phase_ms.insert(phase, base * factor);
        }
        tasks.push(TaskTrace {
            task_id: format!("{job_id}_m_{i:06}"),
            kind: TaskKind::Map,
            wave_index: i / containers,
            phase_ms,
            counters: TaskCounters {
                input_mb: shares.map_input,
                output_mb: shares.map_output,
                spill_files: shares.spill_files,
            },
        });
    }
    for i in 0..workload.reducer_count {
        let mut phase_ms = BTreeMap::new();
        for phase in Phase::REDUCE_SIDE {
            let factor = noise.factor();
            let base = match phase {
                Phase::Reduce => reduce_fn,
                _ => phase_ground_truth(phase, &inputs, coeffs)?,
            };
            phase_ms.insert(phase, base * factor);
        }
        tasks.push(TaskTrace {
            task_id: format!("{job_id}_r_{i:06}"),
            kind: TaskKind::Reduce,
            wave_index: i / containers,
            phase_ms,
            counters: TaskCounters {
                input_mb: shares.shuffle_input,
                output_mb: shares.reduce_output,
                spill_files: 0,
            },
        });
    }

    let mut trace = JobTrace {
        job_id,
        workload: workload.clone(),
        cluster_summary: ClusterSummary {
            container_count: containers,
            block_size_mb: cluster.block_size_mb,
        },
        tasks,
        total_ms: Millis::ZERO,
        seed,
    };
    trace.total_ms = trace.makespan();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sort_like(input: f64, msel: f64, reducers: u32) -> WorkloadSpec {
        WorkloadSpec::generic("sort", Megabytes(input), msel, reducers)
    }

    #[test]
    fn single_block_phase_values() {
        let cluster = ClusterProfile::default().noise_free();
        let trace = simulate_job(&cluster, &sort_like(128.0, 1.0, 1), 9).unwrap();
        let map = &trace.tasks[0];
        assert_abs_diff_eq!(map.phase(Phase::Read).unwrap().get(), 2.61, epsilon = 1e-12);
        assert_abs_diff_eq!(map.phase(Phase::Collect).unwrap().get(), 2.25, epsilon = 1e-12);
        assert_abs_diff_eq!(map.phase(Phase::Spill).unwrap().get(), 3.54, epsilon = 1e-12);
        assert_abs_diff_eq!(map.phase(Phase::Merge).unwrap().get(), 6.04, epsilon = 0.01);
    }

    #[test]
    fn zero_selectivity_leaves_only_intercepts() {
        let cluster = ClusterProfile::default().noise_free();
        let gt = cluster.ground_truth;
        let trace = simulate_job(&cluster, &sort_like(1000.0, 0.0, 3), 1).unwrap();
        for t in &trace.tasks {
            let expect = |p: Phase| match p {
                Phase::Collect => Some(gt.collect.intercept),
                Phase::Spill => Some(gt.spill.intercept),
                Phase::Merge => Some(gt.merge.intercept),
                Phase::Write => Some(gt.write.intercept),
                _ => None,
            };
            for (phase, ms) in &t.phase_ms {
                if let Some(v) = expect(*phase) {
                    assert_eq!(ms.get(), v, "{phase}");
                }
            }
            if let Some(shuffle) = t.phase(Phase::Shuffle) {
                // Only the mapper-count term remains.
                let mt = trace.map_task_count() as f64;
                assert_abs_diff_eq!(
                    shuffle.get(),
                    gt.shuffle.per_mapper * mt + gt.shuffle.intercept,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn phase_ground_truth_examples() {
        let gt = GroundTruthCoefficients::default();
        let merge = phase_ground_truth(
            Phase::Merge,
            &PhaseInputs { map_output: Megabytes(128.0), ..Default::default() },
            &gt,
        )
        .unwrap();
        assert_abs_diff_eq!(merge.get(), 6.04, epsilon = 0.01);

        let shuffle = phase_ground_truth(
            Phase::Shuffle,
            &PhaseInputs {
                shuffle_input: Megabytes(1780.36),
                total_mappers: 153,
                ..Default::default()
            },
            &gt,
        )
        .unwrap();
        assert_abs_diff_eq!(shuffle.get(), 113_409.9, epsilon = 0.5);

        let write = phase_ground_truth(Phase::Write, &PhaseInputs::default(), &gt).unwrap();
        assert_eq!(write, Millis(2139.98));

        assert!(matches!(
            phase_ground_truth(Phase::Map, &PhaseInputs::default(), &gt),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn custom_time_examples() {
        assert_abs_diff_eq!(custom_phase_time(1_000_000, 0.001, 10, 5).get(), 20.0, epsilon = 1e-9);
        assert_eq!(custom_phase_time(0, 3.0, 4, 4), Millis::ZERO);
        assert_eq!(custom_phase_time(37, 0.5, 1, 1), Millis(18.5));
    }

    #[test]
    fn waves_and_counts() {
        let cluster = ClusterProfile { container_count: 4, ..ClusterProfile::default() };
        let trace = simulate_job(&cluster, &sort_like(1280.0, 0.5, 6), 3).unwrap();
        assert_eq!(trace.map_task_count(), 10);
        assert_eq!(trace.reduce_task_count(), 6);
        let map_waves: Vec<u32> = trace.tasks_of(TaskKind::Map).map(|t| t.wave_index).collect();
        assert_eq!(map_waves, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2]);
        let map_phases: Vec<Phase> = trace.tasks[0].phase_ms.keys().copied().collect();
        assert_eq!(map_phases, Phase::MAP_SIDE.to_vec());
        let reduce_phases: Vec<Phase> = trace.tasks[10].phase_ms.keys().copied().collect();
        assert_eq!(reduce_phases, Phase::REDUCE_SIDE.to_vec());
    }

    #[test]
    fn reduce_waves_start_after_last_map() {
        let trace = simulate_job(&ClusterProfile::default(), &sort_like(3000.0, 0.7, 11), 5).unwrap();
        let spans = trace.schedule();
        let last_map_end = spans
            .iter()
            .filter(|s| s.kind == TaskKind::Map)
            .map(|s| s.end.get())
            .fold(0.0, f64::max);
        let first_reduce = spans
            .iter()
            .filter(|s| s.kind == TaskKind::Reduce)
            .map(|s| s.start.get())
            .fold(f64::INFINITY, f64::min);
        assert!(first_reduce >= last_map_end);
        let end = spans.iter().map(|s| s.end.get()).fold(0.0, f64::max);
        assert_abs_diff_eq!(end, trace.total_ms.get(), epsilon = 1e-9 * end);
    }

    #[test]
    fn deterministic_per_seed() {
        let c = ClusterProfile::default();
        let w = sort_like(2000.0, 0.4, 5);
        assert_eq!(simulate_job(&c, &w, 77).unwrap(), simulate_job(&c, &w, 77).unwrap());
        assert_ne!(simulate_job(&c, &w, 77).unwrap().total_ms, simulate_job(&c, &w, 78).unwrap().total_ms);
    }

    #[test]
    fn single_spill_skips_merge() {
        let cluster = ClusterProfile::default().noise_free();
        let trace = simulate_job(&cluster, &sort_like(640.0, 0.5, 1), 0).unwrap();
        let t = &trace.tasks[0];
        assert_eq!(t.counters.spill_files, 1);
        assert_eq!(t.phase(Phase::Merge), Some(Millis::ZERO));
    }

    #[test]
    fn map_only_job_has_no_reducers() {
        let trace = simulate_job(&ClusterProfile::default(), &sort_like(512.0, 0.2, 0), 2).unwrap();
        assert_eq!(trace.reduce_task_count(), 0);
        assert_eq!(trace.map_task_count(), 4);
    }
}
