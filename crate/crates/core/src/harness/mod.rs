//! Trace replay and parameter sweeps.
//!
//! A sweep runs every (L2 size, L1:L2 ratio, policy) cell over the same
//! trace. Capacities are resolved in a first pass that counts unique keys;
//! each cell then replays its own fresh pass of the trace with isolated
//! policy state and a seed derived from the master seed and the cell index,
//! so results do not depend on how many cells run at once.

pub mod cli;

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{avg_read_latency, avg_rw_latency, LatencyParams, SimStats};
use crate::policies::{self, MultiLevelPolicy, PolicyKind, PolicySpec, TieBreak};
use crate::sketch::mix64;
use crate::workload::{count_uniques, TraceSource};
use crate::ItemKey;

/// A policy without capacities or seed; a sweep stamps those in per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTemplate {
    pub kind: PolicyKind,
    #[serde(default = "half")]
    pub window_fraction: f64,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default = "half")]
    pub promote_prob: f64,
    #[serde(default = "half")]
    pub demote_prob: f64,
}

fn half() -> f64 {
    0.5
}

impl PolicyTemplate {
    pub fn new(kind: PolicyKind) -> Self {
        PolicyTemplate {
            kind,
            window_fraction: 0.5,
            tie_break: TieBreak::Admit,
            promote_prob: 0.5,
            demote_prob: 0.5,
        }
    }

    pub fn instantiate(&self, level_capacities: Vec<usize>, rng_seed: u64) -> PolicySpec {
        PolicySpec {
            kind: self.kind,
            level_capacities,
            window_fraction: self.window_fraction,
            tie_break: self.tie_break,
            promote_prob: self.promote_prob,
            demote_prob: self.demote_prob,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

/// Everything needed to run one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub trace: TraceSource,
    /// L2 size as a fraction of the trace's unique keys, each in (0, 1].
    pub l2_size_percents: Vec<f64>,
    /// |L1| / |L2|, each in (0, 1).
    pub l1_ratios: Vec<f64>,
    pub policies: Vec<PolicyTemplate>,
    #[serde(default = "two")]
    pub levels: usize,
    #[serde(default)]
    pub latency: LatencyParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn two() -> usize {
    2
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.l2_size_percents.is_empty() || self.l1_ratios.is_empty() || self.policies.is_empty()
        {
            return bad("sweep needs at least one size, one ratio and one policy".into());
        }
        if let Some(p) = self
            .l2_size_percents
            .iter()
            .find(|&&p| !(p > 0.0 && p <= 1.0))
        {
            return bad(format!("L2 size fraction {p} outside (0, 1]"));
        }
        if let Some(r) = self.l1_ratios.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
            return bad(format!("L1:L2 ratio {r} outside (0, 1)"));
        }
        if self.levels < 2 {
            return bad(format!("need at least 2 levels, got {}", self.levels));
        }
        self.latency.validate()?;
        self.latency.for_levels(self.levels)?;
        Ok(())
    }

    /// Cells in output order: size, then ratio, then policy.
    pub fn cells(&self, uniques: u64) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &pct in &self.l2_size_percents {
            for &ratio in &self.l1_ratios {
                let caps = level_capacities(uniques, pct, ratio, self.levels);
                for template in &self.policies {
                    let index = cells.len();
                    let seed = cell_seed(self.seed, index);
                    cells.push(Cell {
                        index,
                        policy: template.instantiate(caps.clone(), seed),
                    });
                }
            }
        }
        cells
    }
}

/// One (size, ratio, policy) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub policy: PolicySpec,
}

/// `L2 = max(1, round(pct·uniques))`, `L1 = max(1, round(ratio·L2))`; each
/// level below L2 is larger than the one above by the same `1/ratio` factor.
pub fn level_capacities(uniques: u64, l2_pct: f64, l1_ratio: f64, levels: usize) -> Vec<usize> {
    let l2 = ((l2_pct * uniques as f64).round() as usize).max(1);
    let l1 = ((l1_ratio * l2 as f64).round() as usize).max(1);
    let mut caps = vec![l1, l2];
    while caps.len() < levels {
        let prev = *caps.last().unwrap() as f64;
        caps.push(((prev / l1_ratio).round() as usize).max(1));
    }
    caps
}

pub fn cell_seed(master: u64, index: usize) -> u64 {
    mix64(master ^ mix64(index as u64 + 1))
}

/// One line of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trace_id: String,
    pub policy_name: String,
    pub l2_capacity: u64,
    pub l1_capacity: u64,
    pub window_fraction: Option<f64>,
    pub tie_break: Option<TieBreak>,
    pub requests: u64,
    pub h_l1_window: u64,
    pub h_l1_veterans: u64,
    /// Hits below L1 (all lower levels, for deeper hierarchies).
    pub h_l2: u64,
    pub misses: u64,
    pub w_l1: u64,
    /// Writes below L1 (all lower levels, for deeper hierarchies).
    pub w_l2: u64,
    pub hit_ratio: f64,
    pub avg_read_latency_ns: f64,
    pub avg_rw_latency_ns: f64,
    pub rng_seed: u64,
}

pub const CSV_HEADER: &str =
    "trace_id,policy_name,l2_capacity,l1_capacity,window_fraction,tie_break,\
requests,h_l1_window,h_l1_veterans,h_l2,misses,w_l1,w_l2,hit_ratio,avg_read_latency_ns,\
avg_rw_latency_ns,rng_seed";

impl ResultRow {
    pub fn from_stats(
        trace_id: &str,
        spec: &PolicySpec,
        stats: &SimStats,
        latency: &LatencyParams,
    ) -> Result<Self> {
        let latency = latency.for_levels(stats.levels())?;
        let bidi = spec.kind.is_bidi();
        Ok(ResultRow {
            trace_id: trace_id.to_owned(),
            policy_name: spec.name(),
            l2_capacity: spec.level_capacities[1] as u64,
            l1_capacity: spec.level_capacities[0] as u64,
            window_fraction: bidi.then(|| spec.effective_window_fraction()),
            tie_break: bidi.then_some(spec.tie_break),
            requests: stats.requests,
            h_l1_window: stats.h_l1_window,
            h_l1_veterans: stats.h_l1_veterans,
            h_l2: stats.h_level.iter().sum(),
            misses: stats.misses,
            w_l1: stats.w_level[0],
            w_l2: stats.w_level[1..].iter().sum(),
            hit_ratio: stats.hit_ratio()?,
            avg_read_latency_ns: avg_read_latency(stats, &latency)?,
            avg_rw_latency_ns: avg_rw_latency(stats, &latency)?,
            rng_seed: spec.rng_seed,
        })
    }
}

/// Replays `keys` through `policy`, calling `after_each` after every request.
pub fn replay<I, F>(policy: &mut dyn MultiLevelPolicy, keys: I, mut after_each: F) -> Result<()>
where
    I: IntoIterator<Item = Result<ItemKey>>,
    F: FnMut(&dyn MultiLevelPolicy, ItemKey) -> Result<()>,
{
    for key in keys {
        let key = key?;
        policy.access(key);
        after_each(policy, key)?;
    }
    Ok(())
}

/// Runs one policy over one trace.
pub fn run_single(
    spec: &PolicySpec,
    trace: &TraceSource,
    latency: &LatencyParams,
) -> Result<ResultRow> {
    let mut policy = policies::build(spec)?;
    replay(policy.as_mut(), trace.open()?, |_, _| Ok(()))?;
    if policy.stats().requests == 0 {
        return Err(Error::EmptyTrace);
    }
    ResultRow::from_stats(&trace.trace_id(), spec, policy.stats(), latency)
}

/// How sweep cells are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Cells on the rayon pool; same as `Sequential` without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

fn map_cells<T, F>(cells: &[Cell], exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&Cell) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            cells.par_iter().map(f).collect()
        }
        _ => cells.iter().map(f).collect(),
    }
}

/// `(unique keys, total accesses)` of a trace.
pub fn count_trace(trace: &TraceSource) -> Result<(u64, u64)> {
    let mut failure = None;
    let keys = trace
        .open()?
        .map_while(|k| k.map_err(|e| failure = Some(e)).ok());
    let counts = count_uniques(keys);
    match failure {
        Some(e) => Err(e),
        None => Ok(counts),
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    run_sweep_with(spec, Execution::default())
}

pub fn run_sweep_with(spec: &SweepSpec, exec: Execution) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let (uniques, accesses) = count_trace(&spec.trace)?;
    if accesses == 0 {
        return Err(Error::EmptyTrace);
    }
    let cells = spec.cells(uniques);
    let results = map_cells(&cells, exec, |cell| {
        run_single(&cell.policy, &spec.trace, &spec.latency)
    });
    results
        .into_iter()
        .zip(&cells)
        .map(|(r, cell)| {
            r.map_err(|e| Error::Cell {
                index: cell.index,
                label: format!(
                    "{} L1={} L2={}",
                    cell.policy.name(),
                    cell.policy.level_capacities[0],
                    cell.policy.level_capacities[1]
                ),
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn write_rows<W: Write>(
    rows: &[ResultRow],
    format: OutputFormat,
    mut out: W,
) -> anyhow::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            if rows.is_empty() {
                w.write_record(CSV_HEADER.split(','))?;
            }
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        OutputFormat::Jsonl => {
            for row in rows {
                serde_json::to_writer(&mut out, row)?;
                out.write_all(b"\n")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv_rows(text: &str) -> anyhow::Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn read_jsonl_rows(text: &str) -> anyhow::Result<Vec<ResultRow>> {
    text.lines().map(|l| Ok(serde_json::from_str(l)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::SyntheticSpec;

    fn write_trace(lines: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        f
    }

    fn file_source(f: &tempfile::NamedTempFile) -> TraceSource {
        TraceSource::File {
            path: f.path().to_path_buf(),
            chunk_size: 4096,
        }
    }

    #[test]
    fn capacity_rounding() {
        assert_eq!(level_capacities(100, 0.5, 0.1, 2), [5, 50]);
        assert_eq!(level_capacities(100, 0.01, 0.01, 2), [1, 1]);
        assert_eq!(level_capacities(3, 0.1, 0.5, 2), [1, 1]);
        assert_eq!(level_capacities(1000, 0.1, 0.1, 4), [10, 100, 1000, 10000]);
    }

    #[test]
    fn demote_abab() {
        let f = write_trace("a\nb\na\nb\n");
        let spec = PolicySpec::new(PolicyKind::Demote, vec![1, 1]);
        let row = run_single(&spec, &file_source(&f), &LatencyParams::default()).unwrap();
        assert_eq!(row.requests, 4);
        assert_eq!(row.h_l1_window + row.h_l2, 2);
        assert_eq!(row.misses, 2);
    }

    #[test]
    fn naive_single_repeated_key() {
        let f = write_trace(&"k\n".repeat(100));
        let spec = PolicySpec::new(PolicyKind::NaiveLru, vec![1, 1]);
        let row = run_single(&spec, &file_source(&f), &LatencyParams::default()).unwrap();
        assert_eq!((row.h_l1_window, row.misses, row.w_l2), (99, 1, 0));
    }

    #[test]
    fn empty_trace_rejected() {
        let f = write_trace("# nothing\n");
        let spec = PolicySpec::new(PolicyKind::Demote, vec![1, 1]);
        assert!(matches!(
            run_single(&spec, &file_source(&f), &LatencyParams::default()),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn zero_capacity_rejected() {
        let f = write_trace("a\n");
        let spec = PolicySpec::new(PolicyKind::Demote, vec![0, 1]);
        assert!(matches!(
            run_single(&spec, &file_source(&f), &LatencyParams::default()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn parse_errors_propagate_with_cell() {
        let f = write_trace("a\nb,notanumber\n");
        let spec = SweepSpec {
            trace: file_source(&f),
            l2_size_percents: vec![0.5],
            l1_ratios: vec![0.5],
            policies: vec![PolicyTemplate::new(PolicyKind::Demote)],
            levels: 2,
            latency: LatencyParams::default(),
            seed: 0,
            output: None,
            format: OutputFormat::Csv,
        };
        let err = run_sweep(&spec).unwrap_err();
        assert!(
            matches!(err, Error::MalformedTrace { line: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn sweep_shape_and_order() {
        let spec = SweepSpec {
            trace: TraceSource::Synthetic(SyntheticSpec::new(3000, 200, 0.7, 0.2, 1)),
            l2_size_percents: vec![0.2, 0.5],
            l1_ratios: vec![0.1, 0.5],
            policies: vec![
                PolicyTemplate::new(PolicyKind::BiDiFilter),
                PolicyTemplate::new(PolicyKind::Demote),
            ],
            levels: 2,
            latency: LatencyParams::default(),
            seed: 9,
            output: None,
            format: OutputFormat::Csv,
        };
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].policy_name, "BiDiFilter50T");
        assert_eq!(rows[1].policy_name, "Demote");
        assert_eq!(rows[1].window_fraction, None);
        let seq = run_sweep_with(&spec, Execution::Sequential).unwrap();
        assert_eq!(rows, seq);
    }

    #[test]
    fn csv_header_is_exact() {
        let mut buf = Vec::new();
        write_rows(&[], OutputFormat::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }
}
