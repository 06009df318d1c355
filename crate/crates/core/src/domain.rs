//! Shared vocabulary: cluster and workload descriptions, the task pipeline
//! phases, and the derived per-job quantities every other module builds on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Megabytes, Millis, MillisPerMb};

/// Block sizes the cluster model accepts.
pub const SUPPORTED_BLOCK_SIZES_MB: [f64; 5] = [32.0, 64.0, 128.0, 256.0, 512.0];

/// Bytes per megabyte, Hadoop convention.
pub const BYTES_PER_MB: f64 = 1_048_576.0;

/// One stage of the per-task pipeline, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Read,
    Map,
    Collect,
    Spill,
    Merge,
    Shuffle,
    Reduce,
    Write,
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::Read,
        Phase::Map,
        Phase::Collect,
        Phase::Spill,
        Phase::Merge,
        Phase::Shuffle,
        Phase::Reduce,
        Phase::Write,
    ];

    /// Phases implemented by the framework; these get fitted cost models.
    pub const FRAMEWORK: [Phase; 6] = [
        Phase::Read,
        Phase::Collect,
        Phase::Spill,
        Phase::Merge,
        Phase::Shuffle,
        Phase::Write,
    ];

    pub const MAP_SIDE: [Phase; 5] = [
        Phase::Read,
        Phase::Map,
        Phase::Collect,
        Phase::Spill,
        Phase::Merge,
    ];

    pub const REDUCE_SIDE: [Phase; 3] = [Phase::Shuffle, Phase::Reduce, Phase::Write];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Read => "READ",
            Phase::Map => "MAP",
            Phase::Collect => "COLLECT",
            Phase::Spill => "SPILL",
            Phase::Merge => "MERGE",
            Phase::Shuffle => "SHUFFLE",
            Phase::Reduce => "REDUCE",
            Phase::Write => "WRITE",
        }
    }

    pub fn kind(self) -> TaskKind {
        match self {
            Phase::Shuffle | Phase::Reduce | Phase::Write => TaskKind::Reduce,
            _ => TaskKind::Map,
        }
    }

    pub fn is_framework(self) -> bool {
        !matches!(self, Phase::Map | Phase::Reduce)
    }

    /// Names of the features a sample of this phase carries.
    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            Phase::Read | Phase::Map => &["d_mb"],
            Phase::Collect | Phase::Spill => &["m_mb"],
            Phase::Merge => &["m_ln_m"],
            Phase::Shuffle => &["s_mb", "mappers"],
            Phase::Reduce => &["s_mb"],
            Phase::Write => &["r_mb"],
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown phase `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskKind {
    Map,
    Reduce,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Map => "MAP",
            TaskKind::Reduce => "REDUCE",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scheduler {
    #[default]
    #[serde(rename = "FIFO")]
    Fifo,
}

/// `slope * x + intercept`, slope in ms/MB, intercept in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearCost {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearCost {
    pub const fn new(slope: f64, intercept: f64) -> Self {
        LinearCost { slope, intercept }
    }

    pub fn eval(&self, x: f64) -> Millis {
        Millis(self.slope * x + self.intercept)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuffleCost {
    /// ms per MB shuffled into the reducer.
    pub per_mb: f64,
    /// ms per map task in the job.
    pub per_mapper: f64,
    pub intercept: f64,
}

/// Hidden per-phase cost coefficients the simulator treats as the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthCoefficients {
    pub read: LinearCost,
    pub collect: LinearCost,
    pub spill: LinearCost,
    pub merge: LinearCost,
    pub shuffle: ShuffleCost,
    pub write: LinearCost,
}

impl Default for GroundTruthCoefficients {
    /// The fitted coefficients of the reference 8-node cluster.
    fn default() -> Self {
        GroundTruthCoefficients {
            read: LinearCost::new(0.01, 1.33),
            collect: LinearCost::new(0.01, 0.97),
            spill: LinearCost::new(0.02, 0.98),
            merge: LinearCost::new(0.002, 4.80),
            shuffle: ShuffleCost {
                per_mb: 10.45,
                per_mapper: 579.48,
                intercept: 6144.6,
            },
            write: LinearCost::new(6.94, 2139.98),
        }
    }
}

impl GroundTruthCoefficients {
    fn all_values(&self) -> [(&'static str, f64); 13] {
        [
            ("read.slope", self.read.slope),
            ("read.intercept", self.read.intercept),
            ("collect.slope", self.collect.slope),
            ("collect.intercept", self.collect.intercept),
            ("spill.slope", self.spill.slope),
            ("spill.intercept", self.spill.intercept),
            ("merge.slope", self.merge.slope),
            ("merge.intercept", self.merge.intercept),
            ("shuffle.per_mb", self.shuffle.per_mb),
            ("shuffle.per_mapper", self.shuffle.per_mapper),
            ("shuffle.intercept", self.shuffle.intercept),
            ("write.slope", self.write.slope),
            ("write.intercept", self.write.intercept),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.all_values() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidCluster(format!(
                    "coefficient {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Copy with every slope multiplied by `factor`; intercepts untouched.
    pub fn with_scaled_slopes(&self, factor: f64) -> Self {
        let mut c = *self;
        for cost in [&mut c.read, &mut c.collect, &mut c.spill, &mut c.merge, &mut c.write] {
            cost.slope *= factor;
        }
        c.shuffle.per_mb *= factor;
        c.shuffle.per_mapper *= factor;
        c
    }

    pub fn read_rate(&self) -> MillisPerMb {
        MillisPerMb(self.read.slope)
    }
}

fn default_block_size() -> Megabytes {
    Megabytes(128.0)
}
fn default_noise_sigma() -> f64 {
    0.05
}
fn default_spill_buffer() -> Megabytes {
    Megabytes(100.0)
}
fn default_spill_threshold() -> f64 {
    0.80
}
fn default_record_size() -> u32 {
    100
}

/// A YARN cluster as seen by the cost model: container count, HDFS block
/// size, the spill buffer of each map task, and the simulator's hidden
/// ground-truth coefficients and noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterProfile {
    pub container_count: u32,
    #[serde(default = "default_block_size")]
    pub block_size_mb: Megabytes,
    #[serde(default)]
    pub scheduler: Scheduler,
    #[serde(default)]
    pub ground_truth: GroundTruthCoefficients,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_spill_buffer")]
    pub spill_buffer_mb: Megabytes,
    #[serde(default = "default_spill_threshold")]
    pub spill_threshold: f64,
    #[serde(default = "default_record_size")]
    pub record_size_bytes: u32,
}

impl Default for ClusterProfile {
    fn default() -> Self {
        ClusterProfile {
            container_count: 8,
            block_size_mb: default_block_size(),
            scheduler: Scheduler::Fifo,
            ground_truth: GroundTruthCoefficients::default(),
            noise_sigma: default_noise_sigma(),
            spill_buffer_mb: default_spill_buffer(),
            spill_threshold: default_spill_threshold(),
            record_size_bytes: default_record_size(),
        }
    }
}

impl ClusterProfile {
    /// One 32 GB host, 24 GB to YARN at 3 GB per container.
    pub fn single_node() -> Self {
        ClusterProfile {
            container_count: 8,
            ..ClusterProfile::default()
        }
    }

    /// Eight hosts capped at eight concurrent containers.
    pub fn eight_node() -> Self {
        ClusterProfile {
            container_count: 8,
            ..ClusterProfile::default()
        }
    }

    pub fn noise_free(mut self) -> Self {
        self.noise_sigma = 0.0;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_block_size(mut self, block: Megabytes) -> Self {
        self.block_size_mb = block;
        self
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidCluster(m));
        if self.container_count == 0 {
            return bad("container_count must be at least 1".into());
        }
        let b = self.block_size_mb.get();
        if !(b > 0.0) || !SUPPORTED_BLOCK_SIZES_MB.contains(&b) {
            return bad(format!(
                "block_size_mb {b} is not one of {SUPPORTED_BLOCK_SIZES_MB:?}"
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.spill_buffer_mb.get() > 0.0) {
            return bad("spill_buffer_mb must be positive".into());
        }
        if !(self.spill_threshold > 0.0 && self.spill_threshold <= 1.0) {
            return bad(format!(
                "spill_threshold must lie in (0, 1], got {}",
                self.spill_threshold
            ));
        }
        if self.record_size_bytes == 0 {
            return bad("record_size_bytes must be positive".into());
        }
        self.ground_truth.validate()
    }

    /// Buffer fill level at which a map task writes a spill file.
    pub fn spill_capacity(&self) -> Megabytes {
        self.spill_buffer_mb * self.spill_threshold
    }

    /// Spill files written by a map task emitting `map_output`.
    pub fn spill_file_count(&self, map_output: Megabytes) -> u32 {
        if map_output.get() <= 0.0 {
            return 0;
        }
        let files = (map_output / self.spill_capacity()).ceil();
        (files as u32).max(1)
    }

    /// Whether the merge phase runs; a single in-buffer spill needs no merge.
    pub fn merge_runs(&self, map_output: Megabytes) -> bool {
        !(self.spill_file_count(map_output) == 1 && map_output <= self.spill_capacity())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DesignPattern {
    Summarisation,
    Filtering,
    DataOrganisation,
    Join,
    Generic,
}

impl fmt::Display for DesignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DesignPattern::Summarisation => "Summarisation",
            DesignPattern::Filtering => "Filtering",
            DesignPattern::DataOrganisation => "DataOrganisation",
            DesignPattern::Join => "Join",
            DesignPattern::Generic => "Generic",
        };
        f.write_str(s)
    }
}

/// The shape of one MapReduce application run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub name: String,
    pub input_mb: Megabytes,
    pub map_selectivity: f64,
    pub reduce_selectivity: f64,
    /// Zero means a map-only job.
    pub reducer_count: u32,
    pub map_ms_per_record: f64,
    pub reduce_ms_per_key: f64,
    pub keys_per_mb: f64,
    pub design_pattern: DesignPattern,
}

impl WorkloadSpec {
    /// A workload with no custom per-record cost, as used by the profiler.
    pub fn generic(
        name: impl Into<String>,
        input: Megabytes,
        map_selectivity: f64,
        reducer_count: u32,
    ) -> Self {
        WorkloadSpec {
            name: name.into(),
            input_mb: input,
            map_selectivity,
            reduce_selectivity: 1.0,
            reducer_count,
            map_ms_per_record: 0.0,
            reduce_ms_per_key: 0.0,
            keys_per_mb: 1.0,
            design_pattern: DesignPattern::Generic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWorkload(format!("{}: {m}", self.name)));
        if !(self.input_mb.get() > 0.0 && self.input_mb.get().is_finite()) {
            return bad(format!("input_mb must be positive, got {}", self.input_mb.get()));
        }
        if !(0.0..=1.0).contains(&self.map_selectivity) {
            return bad(format!(
                "map_selectivity must lie in [0, 1], got {}",
                self.map_selectivity
            ));
        }
        if !(self.reduce_selectivity >= 0.0 && self.reduce_selectivity.is_finite()) {
            return bad(format!(
                "reduce_selectivity must be >= 0, got {}",
                self.reduce_selectivity
            ));
        }
        for (field, v) in [
            ("map_ms_per_record", self.map_ms_per_record),
            ("reduce_ms_per_key", self.reduce_ms_per_key),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{field} must be >= 0, got {v}"));
            }
        }
        if !(self.keys_per_mb > 0.0 && self.keys_per_mb.is_finite()) {
            return bad(format!("keys_per_mb must be positive, got {}", self.keys_per_mb));
        }
        Ok(())
    }

    pub fn is_map_only(&self) -> bool {
        self.reducer_count == 0
    }
}

/// Whole-job quantities derived from a workload on a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedFeatures {
    pub total_mappers: u32,
    pub map_output_mb: Megabytes,
    pub shuffle_per_reducer_mb: Megabytes,
    pub reduce_output_mb: Megabytes,
    pub map_waves: u32,
    pub reduce_waves: u32,
    /// Set when reduce-side fields were ignored because the job has no reducers.
    pub map_only: bool,
}

/// Number of scheduling rounds needed to run `task_count` tasks on
/// `container_count` containers.
pub fn wave_count(task_count: u32, container_count: u32) -> Result<u32> {
    if container_count == 0 {
        return Err(Error::InvalidCluster(
            "container_count must be at least 1".into(),
        ));
    }
    Ok(task_count.div_ceil(container_count))
}

pub fn derive_features(workload: &WorkloadSpec, cluster: &ClusterProfile) -> Result<DerivedFeatures> {
    workload.validate()?;
    cluster.validate()?;

    let total_mappers = (workload.input_mb / cluster.block_size_mb).ceil() as u32;
    let map_output_mb = workload.input_mb * workload.map_selectivity;
    let map_waves = wave_count(total_mappers, cluster.container_count)?;

    if workload.is_map_only() {
        if workload.reduce_selectivity > 0.0 {
            log::warn!(
                "{}: map-only job (reducer_count = 0); reduce-side fields ignored",
                workload.name
            );
        }
        return Ok(DerivedFeatures {
            total_mappers,
            map_output_mb,
            shuffle_per_reducer_mb: Megabytes::ZERO,
            reduce_output_mb: Megabytes::ZERO,
            map_waves,
            reduce_waves: 0,
            map_only: true,
        });
    }

    Ok(DerivedFeatures {
        total_mappers,
        map_output_mb,
        shuffle_per_reducer_mb: map_output_mb / workload.reducer_count as f64,
        reduce_output_mb: map_output_mb * workload.reduce_selectivity,
        map_waves,
        reduce_waves: wave_count(workload.reducer_count, cluster.container_count)?,
        map_only: false,
    })
}

/// Data volumes seen by a single task. Input is split evenly across map
/// tasks and map output evenly across reducers, so every map task (and every
/// reduce task) of a job handles the same volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskShares {
    pub map_input: Megabytes,
    pub map_output: Megabytes,
    pub spill_files: u32,
    pub merge_runs: bool,
    pub shuffle_input: Megabytes,
    pub reduce_output: Megabytes,
}

impl TaskShares {
    pub fn new(workload: &WorkloadSpec, cluster: &ClusterProfile, features: &DerivedFeatures) -> Self {
        let map_input = workload.input_mb / features.total_mappers as f64;
        let map_output = map_input * workload.map_selectivity;
        let shuffle_input = features.shuffle_per_reducer_mb;
        TaskShares {
            map_input,
            map_output,
            spill_files: cluster.spill_file_count(map_output),
            merge_runs: cluster.merge_runs(map_output),
            shuffle_input,
            reduce_output: shuffle_input * workload.reduce_selectivity,
        }
    }
}

/// Merge cost feature `m ln m`, floored at zero for sub-megabyte outputs.
pub fn merge_feature(map_output: Megabytes) -> f64 {
    let m = map_output.get();
    if m <= 1.0 {
        0.0
    } else {
        (m * m.ln()).max(0.0)
    }
}

/// Records in the job input at the cluster's record size.
pub fn total_records(workload: &WorkloadSpec, cluster: &ClusterProfile) -> u64 {
    (workload.input_mb.get() * BYTES_PER_MB / cluster.record_size_bytes as f64).round() as u64
}

/// Distinct reduce keys in the map output.
pub fn total_keys(workload: &WorkloadSpec, features: &DerivedFeatures) -> u64 {
    (features.map_output_mb.get() * workload.keys_per_mb).round() as u64
}
