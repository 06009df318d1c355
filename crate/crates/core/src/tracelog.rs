//! Line-oriented job log carrying per-task phase counters.
//!
//! ```text
//! JOB <job_id> START containers=<int> block_mb=<num> [seed=<int>]
//! WORKLOAD <job_id> <json>                      (optional)
//! TASK <task_id> kind=<MAP|REDUCE> wave=<int>
//! COUNTER <task_id> <GROUP>.<NAME>=<num>
//! JOB <job_id> END total_ms=<num>
//! ```
//!
//! Numbers are written in shortest round-trip decimal form, so a parsed
//! document reproduces the emitted trace bit for bit. When the `WORKLOAD`
//! line is absent the workload is reconstructed from the data counters.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{merge_feature, DesignPattern, Phase, TaskKind, WorkloadSpec};
use crate::error::{Error, Result};
use crate::simcluster::{ClusterSummary, JobTrace, TaskCounters, TaskTrace};
use crate::units::{Megabytes, Millis};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LogDocument {
    pub lines: Vec<String>,
}

impl LogDocument {
    pub fn from_text(text: &str) -> Self {
        LogDocument {
            lines: text.lines().map(str::to_owned).collect(),
        }
    }
}

impl fmt::Display for LogDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// A parsed job plus the number of unrecognised lines that were skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub trace: JobTrace,
    pub skipped_lines: usize,
}

pub fn emit_log(trace: &JobTrace) -> LogDocument {
    let mut lines = Vec::with_capacity(trace.tasks.len() * 9 + 3);
    lines.push(format!(
        "JOB {} START containers={} block_mb={} seed={}",
        trace.job_id,
        trace.cluster_summary.container_count,
        trace.cluster_summary.block_size_mb.get(),
        trace.seed
    ));
    lines.push(format!(
        "WORKLOAD {} {}",
        trace.job_id,
        serde_json::to_string(&trace.workload).expect("workload serializes")
    ));

    let mut tasks: Vec<&TaskTrace> = trace.tasks.iter().collect();
    tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    for task in tasks {
        let id = &task.task_id;
        lines.push(format!("TASK {id} kind={} wave={}", task.kind, task.wave_index));
        for (phase, ms) in &task.phase_ms {
            lines.push(format!("COUNTER {id} PHASE_MS.{phase}={}", ms.get()));
        }
        let c = &task.counters;
        match task.kind {
            TaskKind::Map => {
                lines.push(format!("COUNTER {id} DATA_MB.INPUT={}", c.input_mb.get()));
                lines.push(format!("COUNTER {id} DATA_MB.MAP_OUTPUT={}", c.output_mb.get()));
                lines.push(format!("COUNTER {id} META.SPILL_FILES={}", c.spill_files));
            }
            TaskKind::Reduce => {
                lines.push(format!("COUNTER {id} DATA_MB.SHUFFLE_INPUT={}", c.input_mb.get()));
                lines.push(format!("COUNTER {id} DATA_MB.WRITE_OUTPUT={}", c.output_mb.get()));
            }
        }
    }
    lines.push(format!("JOB {} END total_ms={}", trace.job_id, trace.total_ms.get()));
    LogDocument { lines }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, what: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| parse_err(line, format!("invalid value `{raw}` for {what}")))
}

/// Split `key=value` tokens into a map.
fn key_values<'a>(line: usize, tokens: impl Iterator<Item = &'a str>) -> Result<BTreeMap<&'a str, &'a str>> {
    tokens
        .map(|tok| {
            tok.split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected key=value, found `{tok}`")))
        })
        .collect()
}

struct TaskBuilder {
    trace: TaskTrace,
    line: usize,
}

enum Counter {
    Phase(Phase),
    Input,
    MapOutput,
    ShuffleInput,
    WriteOutput,
    SpillFiles,
}

impl Counter {
    fn parse(group: &str, name: &str) -> Option<Counter> {
        match (group, name) {
            ("PHASE_MS", n) => n.parse().ok().map(Counter::Phase),
            ("DATA_MB", "INPUT") => Some(Counter::Input),
            ("DATA_MB", "MAP_OUTPUT") => Some(Counter::MapOutput),
            ("DATA_MB", "SHUFFLE_INPUT") => Some(Counter::ShuffleInput),
            ("DATA_MB", "WRITE_OUTPUT") => Some(Counter::WriteOutput),
            ("META", "SPILL_FILES") => Some(Counter::SpillFiles),
            _ => None,
        }
    }
}

pub fn parse_log(doc: &LogDocument) -> Result<ParsedLog> {
    let mut header: Option<(String, ClusterSummary, u64)> = None;
    let mut workload: Option<WorkloadSpec> = None;
    let mut tasks: Vec<TaskBuilder> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut total: Option<Millis> = None;
    let mut skipped = 0usize;

    for (i, raw) in doc.lines.iter().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let tag = tokens.next().unwrap_or_default();
        if total.is_some() {
            skipped += 1;
            continue;
        }
        match tag {
            "JOB" => {
                let job_id = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "JOB line without job id"))?;
                match tokens.next() {
                    Some("START") => {
                        let kv = key_values(line_no, tokens)?;
                        let containers = kv
                            .get("containers")
                            .ok_or_else(|| parse_err(line_no, "START without containers="))?;
                        let block = kv
                            .get("block_mb")
                            .ok_or_else(|| parse_err(line_no, "START without block_mb="))?;
                        let seed = match kv.get("seed") {
                            Some(s) => parse_num(line_no, "seed", s)?,
                            None => 0,
                        };
                        header = Some((
                            job_id.to_owned(),
                            ClusterSummary {
                                container_count: parse_num(line_no, "containers", containers)?,
                                block_size_mb: Megabytes(parse_num(line_no, "block_mb", block)?),
                            },
                            seed,
                        ));
                    }
                    Some("END") => {
                        if header.is_none() {
                            return Err(parse_err(line_no, "JOB END before JOB START"));
                        }
                        let kv = key_values(line_no, tokens)?;
                        let t = kv
                            .get("total_ms")
                            .ok_or_else(|| parse_err(line_no, "END without total_ms="))?;
                        total = Some(Millis(parse_num(line_no, "total_ms", t)?));
                    }
                    _ => {
                        log::warn!("line {line_no}: unrecognised JOB record skipped");
                        skipped += 1;
                    }
                }
            }
            "WORKLOAD" => {
                let json = line
                    .splitn(3, ' ')
                    .nth(2)
                    .ok_or_else(|| parse_err(line_no, "WORKLOAD line without document"))?;
                workload = Some(
                    serde_json::from_str(json)
                        .map_err(|e| parse_err(line_no, format!("bad workload: {e}")))?,
                );
            }
            "TASK" => {
                let id = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "TASK line without task id"))?;
                let kv = key_values(line_no, tokens)?;
                let kind = match kv.get("kind").copied() {
                    Some("MAP") => TaskKind::Map,
                    Some("REDUCE") => TaskKind::Reduce,
                    other => {
                        return Err(parse_err(line_no, format!("bad task kind {other:?}")));
                    }
                };
                let wave = kv
                    .get("wave")
                    .ok_or_else(|| parse_err(line_no, "TASK without wave="))?;
                if index.contains_key(id) {
                    return Err(parse_err(line_no, format!("duplicate task {id}")));
                }
                index.insert(id.to_owned(), tasks.len());
                tasks.push(TaskBuilder {
                    trace: TaskTrace {
                        task_id: id.to_owned(),
                        kind,
                        wave_index: parse_num(line_no, "wave", wave)?,
                        phase_ms: BTreeMap::new(),
                        counters: TaskCounters::default(),
                    },
                    line: line_no,
                });
            }
            "COUNTER" => {
                let (id, assignment) = match (tokens.next(), tokens.next(), tokens.next()) {
                    (Some(id), Some(a), None) => (id, a),
                    _ => return Err(parse_err(line_no, "malformed COUNTER line")),
                };
                let (name, value) = assignment
                    .split_once('=')
                    .ok_or_else(|| parse_err(line_no, "COUNTER without `=`"))?;
                let counter = name
                    .split_once('.')
                    .and_then(|(g, n)| Counter::parse(g, n))
                    .ok_or_else(|| parse_err(line_no, format!("unknown counter `{name}`")))?;
                let slot = *index
                    .get(id)
                    .ok_or_else(|| parse_err(line_no, format!("COUNTER for undeclared task {id}")))?;
                let task = &mut tasks[slot].trace;
                let num = |what| parse_num::<f64>(line_no, what, value);
                match counter {
                    Counter::Phase(p) => {
                        if p.kind() != task.kind {
                            return Err(parse_err(line_no, format!("{p} counter on a {} task", task.kind)));
                        }
                        task.phase_ms.insert(p, Millis(num(name)?));
                    }
                    Counter::Input | Counter::ShuffleInput => task.counters.input_mb = Megabytes(num(name)?),
                    Counter::MapOutput | Counter::WriteOutput => task.counters.output_mb = Megabytes(num(name)?),
                    Counter::SpillFiles => task.counters.spill_files = parse_num(line_no, name, value)?,
                }
            }
            _ => {
                log::warn!("line {line_no}: unrecognised record `{tag}` skipped");
                skipped += 1;
            }
        }
    }

    let (job_id, cluster_summary, seed) =
        header.ok_or_else(|| Error::TruncatedLog("no JOB START record".into()))?;
    let total_ms = total.ok_or_else(|| Error::TruncatedLog(format!("job {job_id} has no JOB END record")))?;

    let mut out = Vec::with_capacity(tasks.len());
    for b in tasks {
        let expected: &[Phase] = match b.trace.kind {
            TaskKind::Map => &Phase::MAP_SIDE,
            TaskKind::Reduce => &Phase::REDUCE_SIDE,
        };
        if let Some(missing) = expected.iter().find(|p| !b.trace.phase_ms.contains_key(p)) {
            return Err(parse_err(
                b.line,
                format!("task {} is missing its {missing} phase counter", b.trace.task_id),
            ));
        }
        out.push(b.trace);
    }

    let mut trace = JobTrace {
        job_id,
        workload: WorkloadSpec::generic("", Megabytes::ZERO, 0.0, 0),
        cluster_summary,
        tasks: out,
        total_ms,
        seed,
    };
    trace.workload = match workload {
        Some(w) => w,
        None => infer_workload(&trace),
    };
    Ok(ParsedLog {
        trace,
        skipped_lines: skipped,
    })
}

pub fn parse_log_text(text: &str) -> Result<ParsedLog> {
    parse_log(&LogDocument::from_text(text))
}

/// Rebuild the workload shape from data counters when the log does not
/// carry it. Custom costs cannot be recovered this way and are left at zero.
fn infer_workload(trace: &JobTrace) -> WorkloadSpec {
    let m = JobMetrics::from_trace(trace);
    let reduce_selectivity = if m.shuffle_mb.get() > 0.0 {
        m.write_mb / m.shuffle_mb
    } else {
        0.0
    };
    WorkloadSpec {
        name: trace.job_id.clone(),
        input_mb: m.input_mb,
        map_selectivity: m.map_selectivity,
        reduce_selectivity,
        reducer_count: m.reduce_tasks,
        map_ms_per_record: 0.0,
        reduce_ms_per_key: 0.0,
        keys_per_mb: 1.0,
        design_pattern: DesignPattern::Generic,
    }
}

/// Job-level inputs to the cost model, as read from a log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobMetrics {
    pub input_mb: Megabytes,
    pub map_output_mb: Megabytes,
    pub map_selectivity: f64,
    pub shuffle_mb: Megabytes,
    pub write_mb: Megabytes,
    pub map_tasks: u32,
    pub reduce_tasks: u32,
    pub container_count: u32,
    /// Total time spent inside user map functions.
    pub map_fn_total_ms: Millis,
    /// Total time spent inside user reduce functions.
    pub reduce_fn_total_ms: Millis,
}

impl JobMetrics {
    /// Per-task user-function time is the total divided over tasks and
    /// containers, so totals are recovered as `sum(per-task) * containers`.
    pub fn from_trace(trace: &JobTrace) -> JobMetrics {
        let maps: Vec<&TaskTrace> = trace.tasks_of(TaskKind::Map).collect();
        let reduces: Vec<&TaskTrace> = trace.tasks_of(TaskKind::Reduce).collect();
        let input_mb: Megabytes = maps.iter().map(|t| t.counters.input_mb).sum();
        let map_output_mb: Megabytes = maps.iter().map(|t| t.counters.output_mb).sum();
        let nc = trace.cluster_summary.container_count as f64;
        let fn_total = |ts: &[&TaskTrace], p: Phase| -> Millis {
            ts.iter().filter_map(|t| t.phase(p)).sum::<Millis>() * nc
        };
        JobMetrics {
            input_mb,
            map_output_mb,
            map_selectivity: if input_mb.get() > 0.0 { map_output_mb / input_mb } else { 0.0 },
            shuffle_mb: reduces.iter().map(|t| t.counters.input_mb).sum(),
            write_mb: reduces.iter().map(|t| t.counters.output_mb).sum(),
            map_tasks: maps.len() as u32,
            reduce_tasks: reduces.len() as u32,
            container_count: trace.cluster_summary.container_count,
            map_fn_total_ms: fn_total(&maps, Phase::Map),
            reduce_fn_total_ms: fn_total(&reduces, Phase::Reduce),
        }
    }
}

/// One (features, duration) observation of a single phase of a single task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub phase: Phase,
    pub features: Vec<f64>,
    pub target_ms: f64,
    pub job_id: String,
    pub task_id: String,
}

/// One sample per executed (task, phase). A merge bypassed because the task
/// produced a single spill file is not an observation of merge cost and
/// yields no sample.
pub fn extract_samples(trace: &JobTrace) -> Vec<PhaseSample> {
    let mappers = trace.map_task_count() as f64;
    let mut samples = Vec::new();
    for task in &trace.tasks {
        let c = &task.counters;
        for (&phase, &ms) in &task.phase_ms {
            let features = match phase {
                Phase::Read | Phase::Map => vec![c.input_mb.get()],
                Phase::Collect | Phase::Spill => vec![c.output_mb.get()],
                Phase::Merge => {
                    if c.spill_files == 1 {
                        continue;
                    }
                    vec![merge_feature(c.output_mb)]
                }
                Phase::Shuffle => vec![c.input_mb.get(), mappers],
                Phase::Reduce => vec![c.input_mb.get()],
                Phase::Write => vec![c.output_mb.get()],
            };
            samples.push(PhaseSample {
                phase,
                features,
                target_ms: ms.get(),
                job_id: trace.job_id.clone(),
                task_id: task.task_id.clone(),
            });
        }
    }
    samples
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ClusterProfile;
    use crate::simcluster::simulate_job;

    fn trace(input: f64, msel: f64, reducers: u32, seed: u64) -> JobTrace {
        let w = WorkloadSpec::generic("t", Megabytes(input), msel, reducers);
        simulate_job(&ClusterProfile::default(), &w, seed).unwrap()
    }

    #[test]
    fn single_map_task_structure() {
        let doc = emit_log(&trace(100.0, 1.0, 0, 1));
        let count = |p: &str| doc.lines.iter().filter(|l| l.starts_with(p)).count();
        assert_eq!(count("JOB "), 2);
        assert_eq!(count("TASK "), 1);
        assert_eq!(
            doc.lines.iter().filter(|l| l.contains(" PHASE_MS.")).count(),
            5
        );
        assert_eq!(count("COUNTER "), 8);
    }

    #[test]
    fn empty_task_list_is_header_and_footer() {
        let mut t = trace(100.0, 1.0, 0, 1);
        t.tasks.clear();
        let doc = emit_log(&t);
        assert!(doc.lines.first().unwrap().contains(" START "));
        assert!(doc.lines.last().unwrap().contains(" END "));
        assert!(doc.lines.iter().all(|l| l.starts_with("JOB ") || l.starts_with("WORKLOAD ")));
        assert_eq!(parse_log(&doc).unwrap().trace, t);
    }

    #[test]
    fn round_trip_is_exact() {
        for seed in 0..5 {
            let t = trace(1500.0 + seed as f64 * 333.3, 0.37, 7, seed);
            let doc = emit_log(&t);
            let parsed = parse_log(&doc).unwrap();
            assert_eq!(parsed.skipped_lines, 0);
            assert_eq!(parsed.trace, t);
            assert_eq!(emit_log(&parsed.trace), doc);
        }
    }

    #[test]
    fn unknown_lines_are_counted() {
        let mut doc = emit_log(&trace(300.0, 0.5, 1, 4));
        doc.lines.insert(2, "INFO container launched".into());
        doc.lines.insert(5, "# comment".into());
        let parsed = parse_log(&doc).unwrap();
        assert_eq!(parsed.skipped_lines, 2);
    }

    #[test]
    fn corrupted_counter_names_the_line() {
        let mut doc = emit_log(&trace(300.0, 0.5, 1, 4));
        let pos = doc.lines.iter().position(|l| l.contains("PHASE_MS.READ=")).unwrap();
        let id = doc.lines[pos].split_whitespace().nth(1).unwrap().to_owned();
        doc.lines[pos] = format!("COUNTER {id} PHASE_MS.READ=abc");
        match parse_log(&doc) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, pos + 1);
                assert!(message.contains("abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_footer_is_truncated() {
        let mut doc = emit_log(&trace(300.0, 0.5, 1, 4));
        doc.lines.pop();
        assert!(matches!(parse_log(&doc), Err(Error::TruncatedLog(_))));
    }

    #[test]
    fn missing_phase_is_rejected() {
        let mut doc = emit_log(&trace(300.0, 0.5, 1, 4));
        doc.lines.retain(|l| !l.contains("PHASE_MS.SPILL="));
        assert!(matches!(parse_log(&doc), Err(Error::Parse { .. })));
    }

    #[test]
    fn workload_inferred_without_workload_line() {
        let t = trace(2560.0, 0.5, 4, 8);
        let mut doc = emit_log(&t);
        doc.lines.retain(|l| !l.starts_with("WORKLOAD "));
        let w = parse_log(&doc).unwrap().trace.workload;
        assert_eq!(w.input_mb, Megabytes(2560.0));
        assert_eq!(w.map_selectivity, 0.5);
        assert_eq!(w.reducer_count, 4);
        assert!((w.reduce_selectivity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_counts_and_features() {
        // map-only, full spill so merge runs on every task
        let t = trace(512.0, 1.0, 0, 3);
        let s = extract_samples(&t);
        assert_eq!(s.len(), 20);
        assert!(s.iter().all(|x| x.phase.kind() == TaskKind::Map));
        let read = s.iter().find(|x| x.phase == Phase::Read).unwrap();
        assert_eq!(read.features, vec![128.0]);

        let t = trace(19584.0, 1.0, 11, 3);
        assert_eq!(extract_samples(&t).len(), 153 * 5 + 11 * 3);
    }

    #[test]
    fn bypassed_merge_yields_no_sample() {
        let t = trace(512.0, 0.5, 1, 3);
        let s = extract_samples(&t);
        assert!(s.iter().all(|x| x.phase != Phase::Merge));
        assert_eq!(s.len(), 4 * 4 + 3);
    }

    #[test]
    fn map_output_sum_matches_job_counter() {
        let t = trace(3000.0, 0.3, 5, 11);
        let m = JobMetrics::from_trace(&t);
        let summed: f64 = extract_samples(&t)
            .iter()
            .filter(|s| s.phase == Phase::Collect)
            .map(|s| s.features[0])
            .sum();
        assert!((summed - m.map_output_mb.get()).abs() < 1e-9);
    }
}
