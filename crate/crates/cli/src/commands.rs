use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mrperf_core::benchsuite::{run_suite, Suite, SuiteReport};
use mrperf_core::seeding::run_seed;
use mrperf_core::tracelog::parse_log_text;
use mrperf_core::{
    build_grid, emit_log, fit_phase_models, predict_job, run_profile, simulate_job,
    ClusterProfile, CustomTimes, FitConfig, JobMetrics, Millis, PhaseModelSet, SampleSet,
    SweepConfig, WorkloadSpec,
};

use crate::manifest::RunManifest;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_USAGE: u8 = 4;
pub const EXIT_GATE: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl CliError {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> CliError {
        CliError {
            code,
            error: error.into(),
        }
    }

    fn usage(msg: impl fmt::Display) -> CliError {
        CliError::new(EXIT_USAGE, anyhow::anyhow!("{msg}"))
    }
}

fn exit_code_for(e: &mrperf_core::Error) -> u8 {
    use mrperf_core::Error as E;
    match e {
        E::InsufficientData { .. }
        | E::SingularDesign { .. }
        | E::UnderSampledPhase { .. }
        | E::MissingSamples { .. }
        | E::Contract(_) => EXIT_DATA,
        E::MissingCustomTime(_) => EXIT_USAGE,
        E::Simulation { source, .. } => exit_code_for(source),
        _ => EXIT_INPUT,
    }
}

impl From<mrperf_core::Error> for CliError {
    fn from(e: mrperf_core::Error) -> CliError {
        let code = exit_code_for(&e);
        let error = match e {
            mrperf_core::Error::MissingCustomTime(_) => anyhow::Error::new(e).context(
                "supply --tmap-ms/--treduce-ms, --from-log <reference log>, or --rates",
            ),
            other => other.into(),
        };
        CliError { code, error }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_input(path: &Path, what: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| {
        CliError::new(
            EXIT_INPUT,
            anyhow::Error::new(e).context(format!("cannot read {what} file {}", path.display())),
        )
    })
}

fn load_json<T: DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = read_input(path, what)?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::new(
            EXIT_INPUT,
            anyhow::Error::new(e).context(format!("invalid {what} file {}", path.display())),
        )
    })
}

fn load_cluster(path: Option<&Path>) -> CliResult<ClusterProfile> {
    let cluster = match path {
        Some(p) => load_json(p, "cluster")?,
        None => ClusterProfile::default(),
    };
    cluster.validate()?;
    Ok(cluster)
}

fn load_workload(path: &Path) -> CliResult<WorkloadSpec> {
    let w: WorkloadSpec = load_json(path, "workload")?;
    w.validate()?;
    Ok(w)
}

fn load_models(path: &Path) -> CliResult<PhaseModelSet> {
    let text = read_input(path, "models")?;
    PhaseModelSet::from_json(&text).map_err(|e| {
        CliError::new(
            EXIT_INPUT,
            anyhow::Error::new(e).context(format!("invalid models file {}", path.display())),
        )
    })
}

fn load_suite(path: Option<&Path>) -> CliResult<Suite> {
    match path {
        Some(p) => {
            let text = read_input(p, "suite")?;
            Suite::from_json(&text).map_err(|e| {
                CliError::new(
                    EXIT_INPUT,
                    anyhow::Error::new(e).context(format!("invalid suite file {}", p.display())),
                )
            })
        }
        None => Ok(Suite {
            version: 1,
            entries: mrperf_core::default_suite(),
        }),
    }
}

fn write_output(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| {
        CliError::new(
            EXIT_INPUT,
            anyhow::Error::new(e).context(format!("cannot write {}", path.display())),
        )
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::new(
            EXIT_INPUT,
            anyhow::Error::new(e).context(format!("cannot create {}", dir.display())),
        )
    })
}

fn absolute(path: &mut PathBuf) {
    if let Ok(abs) = std::path::absolute(&*path) {
        *path = abs;
    }
}

fn absolute_opt(path: &mut Option<PathBuf>) {
    if let Some(p) = path {
        absolute(p);
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Run one job on the simulated cluster and write its log.
    Simulate(SimulateArgs),
    /// Sweep the generic benchmark grid and write per-phase sample CSVs.
    Profile(ProfileArgs),
    /// Fit one linear model per framework phase from sample CSVs.
    Fit(FitArgs),
    /// Estimate a job's completion time from fitted models.
    Predict(PredictArgs),
    /// Compare predictions with simulated runs over a workload suite.
    Evaluate(EvaluateArgs),
    /// Profile, fit and evaluate in one go.
    Report(ReportArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub cluster: Option<PathBuf>,
    #[arg(long)]
    pub workload: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[arg(long)]
    pub cluster: Option<PathBuf>,
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Directory written by `profile`.
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub models: PathBuf,
    /// Defaults to the workload recorded in (or inferred from) `--from-log`.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    #[arg(long)]
    pub cluster: Option<PathBuf>,
    /// Total time of all map() calls, ms.
    #[arg(long)]
    pub tmap_ms: Option<f64>,
    /// Total time of all reduce() calls, ms.
    #[arg(long)]
    pub treduce_ms: Option<f64>,
    /// Reference-run log to take the map()/reduce() totals from.
    #[arg(long, conflicts_with_all = ["tmap_ms", "treduce_ms", "rates"])]
    pub from_log: Option<PathBuf>,
    /// Use the workload's per-record and per-key rates.
    #[arg(long, conflicts_with_all = ["tmap_ms", "treduce_ms"])]
    pub rates: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub cluster: Option<PathBuf>,
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Simulated runs per workload.
    #[arg(long, default_value_t = 3)]
    pub runs: u32,
    /// Largest acceptable mean |Error%|.
    #[arg(long, default_value_t = 10.0)]
    pub gate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub cluster: Option<PathBuf>,
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub runs: u32,
    #[arg(long, default_value_t = 10.0)]
    pub gate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Profile(_) => "profile",
            Command::Fit(_) => "fit",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Report(_) => "report",
            Command::Replay(_) => "replay",
        }
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        let mut v: Vec<Option<&PathBuf>> = Vec::new();
        match self {
            Command::Simulate(a) => v.extend([a.cluster.as_ref(), Some(&a.workload)]),
            Command::Profile(a) => v.extend([a.cluster.as_ref(), a.sweep.as_ref()]),
            Command::Fit(a) => v.push(Some(&a.samples)),
            Command::Predict(a) => v.extend([
                Some(&a.models),
                a.workload.as_ref(),
                a.cluster.as_ref(),
                a.from_log.as_ref(),
            ]),
            Command::Evaluate(a) => v.extend([Some(&a.models), a.cluster.as_ref(), a.suite.as_ref()]),
            Command::Report(a) => v.extend([a.cluster.as_ref(), a.sweep.as_ref(), a.suite.as_ref()]),
            Command::Replay(a) => v.push(Some(&a.manifest)),
        }
        v.into_iter().flatten().cloned().collect()
    }

    pub fn seed(&self) -> u64 {
        match self {
            Command::Simulate(a) => a.seed,
            Command::Profile(a) => a.seed,
            Command::Fit(a) => a.seed,
            Command::Predict(a) => a.seed,
            Command::Evaluate(a) => a.seed,
            Command::Report(a) => a.seed,
            Command::Replay(_) => 0,
        }
    }

    pub fn out_dir(&self) -> &Path {
        match self {
            Command::Simulate(a) => &a.out,
            Command::Profile(a) => &a.out,
            Command::Fit(a) => &a.out,
            Command::Predict(a) => &a.out,
            Command::Evaluate(a) => &a.out,
            Command::Report(a) => &a.out,
            Command::Replay(a) => a.out.as_deref().unwrap_or(Path::new(".")),
        }
    }

    fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Simulate(a) => a.out = dir,
            Command::Profile(a) => a.out = dir,
            Command::Fit(a) => a.out = dir,
            Command::Predict(a) => a.out = dir,
            Command::Evaluate(a) => a.out = dir,
            Command::Report(a) => a.out = dir,
            Command::Replay(a) => a.out = Some(dir),
        }
    }

    /// Make every path absolute so a recorded command replays from anywhere.
    pub fn resolve_paths(&mut self) {
        match self {
            Command::Simulate(a) => {
                absolute_opt(&mut a.cluster);
                absolute(&mut a.workload);
                absolute(&mut a.out);
            }
            Command::Profile(a) => {
                absolute_opt(&mut a.cluster);
                absolute_opt(&mut a.sweep);
                absolute(&mut a.out);
            }
            Command::Fit(a) => {
                absolute(&mut a.samples);
                absolute(&mut a.out);
            }
            Command::Predict(a) => {
                absolute(&mut a.models);
                absolute_opt(&mut a.workload);
                absolute_opt(&mut a.cluster);
                absolute_opt(&mut a.from_log);
                absolute(&mut a.out);
            }
            Command::Evaluate(a) => {
                absolute(&mut a.models);
                absolute_opt(&mut a.cluster);
                absolute_opt(&mut a.suite);
                absolute(&mut a.out);
            }
            Command::Report(a) => {
                absolute_opt(&mut a.cluster);
                absolute_opt(&mut a.sweep);
                absolute_opt(&mut a.suite);
                absolute(&mut a.out);
            }
            Command::Replay(a) => {
                absolute(&mut a.manifest);
                absolute_opt(&mut a.out);
            }
        }
    }
}

/// Run a command, write its manifest, and return the process exit code.
pub fn run(mut cmd: Command) -> CliResult<u8> {
    if let Command::Replay(args) = cmd {
        let manifest = RunManifest::read(&args.manifest).map_err(|e| CliError::new(EXIT_INPUT, e))?;
        let mut recorded = manifest.args;
        if matches!(recorded, Command::Replay(_)) {
            return Err(CliError::usage("a replay manifest cannot itself be replayed"));
        }
        if let Some(out) = args.out {
            recorded.set_out_dir(out);
        }
        log::info!("replaying `{}` from {}", manifest.command, args.manifest.display());
        return run(recorded);
    }
    cmd.resolve_paths();
    create_dir(cmd.out_dir())?;
    let code = match &cmd {
        Command::Simulate(a) => simulate(a)?,
        Command::Profile(a) => profile(a)?,
        Command::Fit(a) => fit(a)?,
        Command::Predict(a) => predict(a)?,
        Command::Evaluate(a) => evaluate(a)?,
        Command::Report(a) => report(a)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    RunManifest::for_command(&cmd, cmd.seed())
        .write(cmd.out_dir())
        .map_err(|e| CliError::new(EXIT_INPUT, e))?;
    Ok(code)
}

fn simulate(a: &SimulateArgs) -> CliResult<u8> {
    let cluster = load_cluster(a.cluster.as_deref())?;
    let workload = load_workload(&a.workload)?;
    let trace = simulate_job(&cluster, &workload, a.seed)?;
    write_output(&a.out, "job.log", &emit_log(&trace).to_string())?;
    let m = JobMetrics::from_trace(&trace);
    println!(
        "{}: {} map / {} reduce tasks on {} containers, total {:.3} ms",
        trace.job_id, m.map_tasks, m.reduce_tasks, m.container_count, trace.total_ms.get()
    );
    Ok(0)
}

fn profile_into(cluster: &ClusterProfile, sweep: &SweepConfig, seed: u64, dir: &Path) -> CliResult<SampleSet> {
    let grid = build_grid(sweep, seed)?;
    let set = run_profile(cluster, &grid)?;
    create_dir(dir)?;
    set.write_dir(dir)?;
    println!("profiled {} benchmark points", grid.len());
    for (phase, n) in set.counts() {
        if phase.is_framework() {
            println!("  {:<8} {n:>7} samples", phase.as_str());
        }
    }
    Ok(set)
}

fn load_sweep(path: Option<&Path>) -> CliResult<SweepConfig> {
    match path {
        Some(p) => load_json(p, "sweep"),
        None => Ok(SweepConfig::default()),
    }
}

fn profile(a: &ProfileArgs) -> CliResult<u8> {
    let cluster = load_cluster(a.cluster.as_deref())?;
    let sweep = load_sweep(a.sweep.as_deref())?;
    profile_into(&cluster, &sweep, a.seed, &a.out)?;
    Ok(0)
}

fn fit_and_write(set: &SampleSet, seed: u64, out: &Path) -> CliResult<PhaseModelSet> {
    let config = FitConfig {
        seed,
        ..FitConfig::default()
    };
    let models = fit_phase_models(set, &config)?;
    let summary = models.summary();
    write_output(out, "models.json", &models.to_json()?)?;
    write_output(out, "fit_summary.txt", &summary)?;
    print!("{summary}");
    Ok(models)
}

fn fit(a: &FitArgs) -> CliResult<u8> {
    let set = SampleSet::read_dir(&a.samples)?;
    fit_and_write(&set, a.seed, &a.out)?;
    Ok(0)
}

fn predict(a: &PredictArgs) -> CliResult<u8> {
    let models = load_models(&a.models)?;
    let cluster = load_cluster(a.cluster.as_deref())?;
    let reference = match &a.from_log {
        Some(path) => {
            let text = read_input(path, "reference log")?;
            let parsed = parse_log_text(&text).map_err(|e| {
                CliError::new(
                    EXIT_INPUT,
                    anyhow::Error::new(e).context(format!("invalid log {}", path.display())),
                )
            })?;
            Some(parsed.trace)
        }
        None => None,
    };
    let workload = match (&a.workload, &reference) {
        (Some(p), _) => load_workload(p)?,
        (None, Some(trace)) => trace.workload.clone(),
        (None, None) => return Err(CliError::usage("predict needs --workload or --from-log")),
    };
    let custom = if let Some(trace) = &reference {
        let m = JobMetrics::from_trace(trace);
        println!(
            "reference log: map() total {:.3} ms, reduce() total {:.3} ms",
            m.map_fn_total_ms.get(),
            m.reduce_fn_total_ms.get()
        );
        CustomTimes::Totals {
            map_total_ms: Some(m.map_fn_total_ms),
            reduce_total_ms: Some(m.reduce_fn_total_ms),
        }
    } else if a.rates {
        CustomTimes::Rates
    } else if a.tmap_ms.is_some() || a.treduce_ms.is_some() {
        CustomTimes::Totals {
            map_total_ms: a.tmap_ms.map(Millis),
            reduce_total_ms: a.treduce_ms.map(Millis),
        }
    } else {
        return Err(CliError::usage(
            "no custom map/reduce time source: pass --tmap-ms/--treduce-ms with measured totals, \
             --from-log <reference log>, or --rates to use the workload's per-record rates",
        ));
    };
    let prediction = predict_job(&models, &workload, &cluster, custom)?;
    for phase in &prediction.clamped {
        eprintln!("warning: {phase} model predicted a negative time; clamped to 0");
    }
    print!("{}", prediction.table());
    let json = serde_json::to_string_pretty(&prediction).map_err(|e| CliError::new(EXIT_INPUT, e))? + "\n";
    write_output(&a.out, "prediction.json", &json)?;
    Ok(0)
}

fn write_report(report: &SuiteReport, out: &Path) -> CliResult<()> {
    write_output(out, "report.csv", &report.to_csv())?;
    write_output(out, "report.md", &report.to_markdown())?;
    write_output(out, "breakdown.csv", &report.breakdown_csv())?;
    let json = serde_json::to_string_pretty(report).map_err(|e| CliError::new(EXIT_INPUT, e))? + "\n";
    write_output(out, "report.json", &json)
}

fn gate_code(report: &SuiteReport, gate: f64) -> u8 {
    if report.mean_abs_error_pct <= gate {
        println!("gate passed: mean |Error%| {:.2} <= {gate}", report.mean_abs_error_pct);
        0
    } else {
        eprintln!("gate failed: mean |Error%| {:.2} > {gate}", report.mean_abs_error_pct);
        EXIT_GATE
    }
}

fn seeds(base: u64, runs: u32) -> CliResult<Vec<u64>> {
    if runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    Ok((0..runs as u64).map(|i| run_seed(base, i)).collect())
}

fn evaluate(a: &EvaluateArgs) -> CliResult<u8> {
    let models = load_models(&a.models)?;
    let cluster = load_cluster(a.cluster.as_deref())?;
    let suite = load_suite(a.suite.as_deref())?;
    let report = run_suite(&models, &cluster, &suite.entries, &seeds(a.seed, a.runs)?)?;
    write_report(&report, &a.out)?;
    print!("{}", report.to_markdown());
    Ok(gate_code(&report, a.gate))
}

fn report(a: &ReportArgs) -> CliResult<u8> {
    let cluster = load_cluster(a.cluster.as_deref())?;
    let sweep = load_sweep(a.sweep.as_deref())?;
    let suite = load_suite(a.suite.as_deref())?;
    let set = profile_into(&cluster, &sweep, a.seed, &a.out.join("samples"))?;
    let models = fit_and_write(&set, a.seed, &a.out)?;
    let report = run_suite(&models, &cluster, &suite.entries, &seeds(a.seed, a.runs)?)?;
    write_report(&report, &a.out)?;
    print!("{}", report.to_markdown());
    Ok(gate_code(&report, a.gate))
}
