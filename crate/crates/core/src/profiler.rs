//! Generic benchmark sweep: build the (input size, map selectivity, block
//! size) grid, run each point on the cluster, push the job log through the
//! parser and collect per-phase training samples.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ClusterProfile, Phase, WorkloadSpec};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use crate::simcluster::simulate_job;
use crate::tracelog::{emit_log, extract_samples, parse_log, PhaseSample};
use crate::units::Megabytes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub input_mb: InputRange,
    pub map_selectivities: Vec<f64>,
    pub block_sizes_mb: Vec<f64>,
    #[serde(default = "one")]
    pub repetitions: u32,
}

fn one() -> u32 {
    1
}

impl Default for SweepConfig {
    /// 0.5 GB to 5 GB in 0.5 GB steps, selectivity 10%..100%, 64 and 128 MB
    /// blocks: 200 points.
    fn default() -> Self {
        SweepConfig {
            input_mb: InputRange {
                min: 512.0,
                max: 5120.0,
                step: 512.0,
            },
            map_selectivities: (1..=10).map(|i| i as f64 / 10.0).collect(),
            block_sizes_mb: vec![64.0, 128.0],
            repetitions: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPoint {
    pub input_mb: Megabytes,
    pub map_selectivity: f64,
    pub block_size_mb: Megabytes,
    pub repetitions: u32,
    pub seed: u64,
}

impl BenchmarkPoint {
    pub fn label(&self) -> String {
        format!(
            "D={} MB, M_sel={}, B={} MB",
            self.input_mb.get(),
            self.map_selectivity,
            self.block_size_mb.get()
        )
    }

    /// Seed of the `rep`-th run of this point.
    pub fn run_seed(&self, rep: u32) -> u64 {
        if rep == 0 {
            self.seed
        } else {
            derive_seed(self.seed, &[rep as u64])
        }
    }
}

fn sorted_unique(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Cartesian product ordered by input size, then selectivity, then block
/// size. Each point's seed depends only on `seed` and the point itself.
pub fn build_grid(config: &SweepConfig, seed: u64) -> Result<Vec<BenchmarkPoint>> {
    let r = &config.input_mb;
    if !(r.min > 0.0 && r.max >= r.min && r.step > 0.0) {
        return Err(Error::Config(format!(
            "input range needs 0 < min <= max and step > 0, got {}..{} step {}",
            r.min, r.max, r.step
        )));
    }
    if config.map_selectivities.is_empty() {
        return Err(Error::Config("map_selectivities is empty".into()));
    }
    if config.block_sizes_mb.is_empty() {
        return Err(Error::Config("block_sizes_mb is empty".into()));
    }
    if config.repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    if let Some(bad) = config.map_selectivities.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Config(format!("map selectivity {bad} outside [0, 1]")));
    }

    let steps = ((r.max - r.min) / r.step + 1e-9).floor() as u64;
    let sizes: Vec<f64> = (0..=steps).map(|i| r.min + i as f64 * r.step).collect();
    let selectivities = sorted_unique(&config.map_selectivities);
    let blocks = sorted_unique(&config.block_sizes_mb);

    let mut grid = Vec::with_capacity(sizes.len() * selectivities.len() * blocks.len());
    for &d in &sizes {
        for &s in &selectivities {
            for &b in &blocks {
                grid.push(BenchmarkPoint {
                    input_mb: Megabytes(d),
                    map_selectivity: s,
                    block_size_mb: Megabytes(b),
                    repetitions: config.repetitions,
                    seed: derive_seed(seed, &[d.to_bits(), s.to_bits(), b.to_bits()]),
                });
            }
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub point: BenchmarkPoint,
    pub job_id: String,
}

/// Per-phase training observations and the runs they came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub samples: BTreeMap<Phase, Vec<PhaseSample>>,
    pub provenance: Vec<Provenance>,
}

impl SampleSet {
    pub fn phase(&self, phase: Phase) -> &[PhaseSample] {
        self.samples.get(&phase).map_or(&[], Vec::as_slice)
    }

    pub fn counts(&self) -> BTreeMap<Phase, usize> {
        Phase::ALL
            .into_iter()
            .map(|p| (p, self.phase(p).len()))
            .filter(|(_, n)| *n > 0)
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.values().all(Vec::is_empty)
    }

    pub fn extend(&mut self, samples: Vec<PhaseSample>) {
        for s in samples {
            self.samples.entry(s.phase).or_default().push(s);
        }
    }

    pub fn csv_file_name(phase: Phase) -> String {
        format!("{}.csv", phase.as_str().to_lowercase())
    }

    /// One CSV per framework phase plus `provenance.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for phase in Phase::FRAMEWORK {
            let mut w = csv::Writer::from_path(dir.join(Self::csv_file_name(phase)))?;
            let mut header: Vec<&str> = phase.feature_names().to_vec();
            header.extend(["target_ms", "job_id"]);
            w.write_record(&header)?;
            for s in self.phase(phase) {
                let mut rec: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
                rec.push(s.target_ms.to_string());
                rec.push(s.job_id.clone());
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        let mut w = csv::Writer::from_path(dir.join("provenance.csv"))?;
        w.write_record([
            "input_mb",
            "map_selectivity",
            "block_size_mb",
            "repetitions",
            "seed",
            "job_id",
        ])?;
        for p in &self.provenance {
            w.write_record([
                p.point.input_mb.get().to_string(),
                p.point.map_selectivity.to_string(),
                p.point.block_size_mb.get().to_string(),
                p.point.repetitions.to_string(),
                p.point.seed.to_string(),
                p.job_id.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Load the framework-phase CSVs written by [`SampleSet::write_dir`].
    /// Provenance is optional on read.
    pub fn read_dir(dir: &Path) -> Result<SampleSet> {
        let mut set = SampleSet::default();
        for phase in Phase::FRAMEWORK {
            let path = dir.join(Self::csv_file_name(phase));
            if !path.is_file() {
                return Err(Error::MissingSamples {
                    phase,
                    path: path.display().to_string(),
                });
            }
            let arity = phase.feature_names().len();
            let mut r = csv::Reader::from_path(&path)?;
            let mut rows = Vec::new();
            for (i, rec) in r.records().enumerate() {
                let rec = rec?;
                let line = i + 2;
                if rec.len() != arity + 2 {
                    return Err(Error::Parse {
                        line,
                        message: format!("{}: expected {} fields, found {}", path.display(), arity + 2, rec.len()),
                    });
                }
                let num = |j: usize| -> Result<f64> {
                    rec[j].parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("{}: bad number `{}`", path.display(), &rec[j]),
                    })
                };
                let features = (0..arity).map(num).collect::<Result<Vec<f64>>>()?;
                rows.push(PhaseSample {
                    phase,
                    features,
                    target_ms: num(arity)?,
                    job_id: rec[arity + 1].to_owned(),
                    task_id: String::new(),
                });
            }
            set.samples.insert(phase, rows);
        }
        let prov = dir.join("provenance.csv");
        if prov.is_file() {
            let mut r = csv::Reader::from_path(&prov)?;
            for rec in r.records() {
                let rec = rec?;
                let bad = |what: &str| Error::Parse {
                    line: rec.position().map_or(0, |p| p.line() as usize),
                    message: format!("{}: bad {what}", prov.display()),
                };
                let f = |j: usize, what: &str| rec[j].parse::<f64>().map_err(|_| bad(what));
                set.provenance.push(Provenance {
                    point: BenchmarkPoint {
                        input_mb: Megabytes(f(0, "input_mb")?),
                        map_selectivity: f(1, "map_selectivity")?,
                        block_size_mb: Megabytes(f(2, "block_size_mb")?),
                        repetitions: rec[3].parse().map_err(|_| bad("repetitions"))?,
                        seed: rec[4].parse().map_err(|_| bad("seed"))?,
                    },
                    job_id: rec[5].to_owned(),
                });
            }
        }
        Ok(set)
    }
}

/// Reducer count of the generic benchmark: a third of the mappers, at most
/// one per container.
pub fn generic_reducer_count(total_mappers: u32, container_count: u32) -> u32 {
    total_mappers.div_ceil(3).clamp(1, container_count)
}

pub fn generic_workload(point: &BenchmarkPoint, cluster: &ClusterProfile) -> WorkloadSpec {
    let mappers = (point.input_mb / point.block_size_mb).ceil() as u32;
    WorkloadSpec::generic(
        format!(
            "generic_d{}_m{}_b{}",
            point.input_mb.get(),
            point.map_selectivity,
            point.block_size_mb.get()
        ),
        point.input_mb,
        point.map_selectivity,
        generic_reducer_count(mappers, cluster.container_count),
    )
}

type PointRun = (Provenance, Vec<PhaseSample>);

fn profile_point(cluster: &ClusterProfile, point: &BenchmarkPoint) -> Result<Vec<PointRun>> {
    let cluster = cluster.clone().with_block_size(point.block_size_mb);
    let workload = generic_workload(point, &cluster);
    (0..point.repetitions)
        .map(|rep| {
            let trace = simulate_job(&cluster, &workload, point.run_seed(rep))?;
            let parsed = parse_log(&emit_log(&trace))?;
            let samples = extract_samples(&parsed.trace);
            Ok((
                Provenance {
                    point: *point,
                    job_id: parsed.trace.job_id,
                },
                samples,
            ))
        })
        .collect()
}

/// Run every grid point (in parallel) and merge the samples in grid order.
pub fn run_profile(cluster: &ClusterProfile, grid: &[BenchmarkPoint]) -> Result<SampleSet> {
    cluster.validate()?;
    let results: Vec<Result<Vec<PointRun>>> = grid
        .par_iter()
        .map(|point| {
            profile_point(cluster, point).map_err(|e| Error::Simulation {
                point: point.label(),
                source: Box::new(e),
            })
        })
        .collect();
    let mut set = SampleSet::default();
    for runs in results {
        for (prov, samples) in runs? {
            set.provenance.push(prov);
            set.extend(samples);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TaskKind;

    fn config(min: f64, max: f64, step: f64, sel: &[f64], blocks: &[f64]) -> SweepConfig {
        SweepConfig {
            input_mb: InputRange { min, max, step },
            map_selectivities: sel.to_vec(),
            block_sizes_mb: blocks.to_vec(),
            repetitions: 1,
        }
    }

    #[test]
    fn default_grid_has_200_points() {
        let grid = build_grid(&SweepConfig::default(), 42).unwrap();
        assert_eq!(grid.len(), 200);
        assert_eq!(grid.iter().filter(|p| p.input_mb == Megabytes(5120.0)).count(), 20);
        let first = grid[0];
        assert_eq!((first.input_mb.get(), first.map_selectivity, first.block_size_mb.get()), (512.0, 0.1, 64.0));
        let ordered = grid.windows(2).all(|w| {
            let key = |p: &BenchmarkPoint| (p.input_mb.get(), p.map_selectivity, p.block_size_mb.get());
            key(&w[0]) < key(&w[1])
        });
        assert!(ordered);
    }

    #[test]
    fn small_grids() {
        assert_eq!(build_grid(&config(700.0, 700.0, 100.0, &[0.3], &[128.0]), 1).unwrap().len(), 1);
        assert_eq!(build_grid(&config(500.0, 1000.0, 500.0, &[0.5], &[128.0]), 1).unwrap().len(), 2);
    }

    #[test]
    fn empty_dimension_is_config_error() {
        assert!(matches!(build_grid(&config(500.0, 1000.0, 500.0, &[], &[128.0]), 1), Err(Error::Config(_))));
        assert!(matches!(build_grid(&config(500.0, 1000.0, 500.0, &[0.5], &[]), 1), Err(Error::Config(_))));
        assert!(matches!(build_grid(&config(1000.0, 500.0, 500.0, &[0.5], &[64.0]), 1), Err(Error::Config(_))));
    }

    #[test]
    fn adding_points_keeps_existing_seeds() {
        let small = build_grid(&config(512.0, 1024.0, 512.0, &[0.5], &[128.0]), 7).unwrap();
        let large = build_grid(&config(512.0, 2048.0, 512.0, &[0.2, 0.5], &[64.0, 128.0]), 7).unwrap();
        for p in &small {
            assert!(large.contains(p));
        }
    }

    #[test]
    fn empty_grid_gives_empty_set() {
        let set = run_profile(&ClusterProfile::default(), &[]).unwrap();
        assert!(set.is_empty());
        assert!(set.provenance.is_empty());
    }

    #[test]
    fn one_point_sample_counts() {
        let grid = build_grid(&config(512.0, 512.0, 1.0, &[1.0], &[128.0]), 3).unwrap();
        let set = run_profile(&ClusterProfile::default(), &grid).unwrap();
        let map_side: usize = set
            .counts()
            .iter()
            .filter(|(p, _)| p.kind() == TaskKind::Map)
            .map(|(_, n)| n)
            .sum();
        assert_eq!(map_side, 20);
        assert_eq!(set.phase(Phase::Read).len(), 4);
        assert_eq!(set.provenance.len(), 1);
    }

    #[test]
    fn read_samples_equal_map_tasks() {
        let cfg = config(512.0, 2048.0, 512.0, &[0.3, 1.0], &[64.0, 128.0]);
        let grid = build_grid(&cfg, 3).unwrap();
        let set = run_profile(&ClusterProfile::default(), &grid).unwrap();
        let expected: usize = grid
            .iter()
            .map(|p| (p.input_mb / p.block_size_mb).ceil() as usize)
            .sum();
        assert_eq!(set.phase(Phase::Read).len(), expected);
    }

    #[test]
    fn repetitions_multiply_runs() {
        let mut cfg = config(512.0, 512.0, 1.0, &[1.0], &[128.0]);
        cfg.repetitions = 3;
        let grid = build_grid(&cfg, 3).unwrap();
        let set = run_profile(&ClusterProfile::default(), &grid).unwrap();
        assert_eq!(set.provenance.len(), 3);
        assert_eq!(set.phase(Phase::Read).len(), 12);
        let ids: std::collections::BTreeSet<&str> = set.provenance.iter().map(|p| p.job_id.as_str()).collect();
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn csv_round_trip() {
        let grid = build_grid(&config(512.0, 1024.0, 512.0, &[0.4, 0.9], &[128.0]), 5).unwrap();
        let set = run_profile(&ClusterProfile::default(), &grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        set.write_dir(dir.path()).unwrap();
        let header = fs::read_to_string(dir.path().join("shuffle.csv")).unwrap();
        assert!(header.starts_with("s_mb,mappers,target_ms,job_id\n"));
        let back = SampleSet::read_dir(dir.path()).unwrap();
        assert_eq!(back.provenance, set.provenance);
        for phase in Phase::FRAMEWORK {
            let a: Vec<(&Vec<f64>, f64)> = set.phase(phase).iter().map(|s| (&s.features, s.target_ms)).collect();
            let b: Vec<(&Vec<f64>, f64)> = back.phase(phase).iter().map(|s| (&s.features, s.target_ms)).collect();
            assert_eq!(a, b, "{phase}");
        }
    }

    #[test]
    fn missing_phase_csv_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        SampleSet::default().write_dir(dir.path()).unwrap();
        fs::remove_file(dir.path().join("shuffle.csv")).unwrap();
        match SampleSet::read_dir(dir.path()) {
            Err(Error::MissingSamples { phase, .. }) => assert_eq!(phase, Phase::Shuffle),
            other => panic!("{other:?}"),
        }
    }
}
