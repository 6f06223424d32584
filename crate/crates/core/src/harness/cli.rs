//! Command-line front end: `run` for a single cell, `sweep` for a grid.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use super::{run_sweep, write_rows, OutputFormat, PolicyTemplate, SweepSpec};
use crate::metrics::LatencyParams;
use crate::policies::{PolicyKind, TieBreak};
use crate::workload::{SyntheticSpec, TraceSource, DEFAULT_CHUNK_SIZE};

#[derive(Debug, Parser)]
#[command(name = "mlcache", version, about = "Multilevel cache policy simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one policy at one cache geometry.
    Run(CellArgs),
    /// Simulate every combination of policies, L2 sizes and L1:L2 ratios.
    Sweep {
        #[command(flatten)]
        cell: CellArgs,
        /// TOML sweep description; command-line values override it.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Default)]
pub struct CellArgs {
    /// Policies: bidi[:WINDOW[:admit|reject]], united, demote, lru, promote[:P[:Q]].
    #[arg(long, value_delimiter = ',')]
    pub policy: Vec<String>,
    /// L2 size as a fraction of unique items.
    #[arg(long = "l2-pct", value_delimiter = ',')]
    pub l2_pct: Vec<f64>,
    /// |L1| / |L2|.
    #[arg(long = "l1-ratio", value_delimiter = ',')]
    pub l1_ratio: Vec<f64>,
    /// Window share of L1 for bidi policies.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long, value_parser = parse_tie)]
    pub tie: Option<TieBreak>,
    #[arg(long = "promote-p")]
    pub promote_p: Option<f64>,
    #[arg(long = "promote-q")]
    pub promote_q: Option<f64>,
    /// Number of cache levels.
    #[arg(long)]
    pub levels: Option<usize>,
    /// LENGTH:GROUND_SET:SKEW:RECENCY
    #[arg(long, conflicts_with = "trace")]
    pub synthetic: Option<String>,
    /// Trace file with `key[,size]` lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long = "chunk-size", default_value_t = DEFAULT_CHUNK_SIZE)]
    pub chunk_size: u64,
    /// Access times: T_L1,T_L2[,...],T_MISS (e.g. 100ns,200us,2ms).
    #[arg(long)]
    pub latency: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

fn parse_tie(s: &str) -> Result<TieBreak, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

/// Parses `100ns`, `200us`, `2ms`, `1s` (bare numbers are nanoseconds).
pub fn parse_duration_ns(s: &str) -> anyhow::Result<u64> {
    let s = s.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let value: f64 = num.parse().with_context(|| format!("bad duration {s:?}"))?;
    let scale = match unit.trim() {
        "" | "ns" => 1.0,
        "us" | "µs" => 1e3,
        "ms" => 1e6,
        "s" => 1e9,
        other => bail!("unknown duration unit {other:?} in {s:?}"),
    };
    let ns = value * scale;
    if ns.fract() != 0.0 || ns <= 0.0 {
        bail!("duration {s:?} is not a positive whole number of nanoseconds");
    }
    Ok(ns as u64)
}

pub fn parse_latency(s: &str) -> anyhow::Result<LatencyParams> {
    let mut times = s
        .split(',')
        .map(parse_duration_ns)
        .collect::<anyhow::Result<Vec<_>>>()?;
    if times.len() < 3 {
        bail!("--latency needs at least T_L1,T_L2,T_MISS");
    }
    let miss = times.pop().unwrap();
    Ok(LatencyParams::new(times, miss)?)
}

pub fn parse_synthetic(s: &str, seed: u64) -> anyhow::Result<SyntheticSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let [length, ground, skew, recency] = parts[..] else {
        bail!("--synthetic expects LENGTH:GROUND_SET:SKEW:RECENCY, got {s:?}");
    };
    let spec = SyntheticSpec::new(
        length.parse().context("synthetic length")?,
        ground.parse().context("synthetic ground set")?,
        skew.parse().context("synthetic skew")?,
        recency.parse().context("synthetic recency")?,
        seed,
    );
    spec.validate()?;
    Ok(spec)
}

/// Parses one `--policy` token, falling back to the global flags for
/// parameters the token leaves out.
pub fn parse_policy(token: &str, args: &CellArgs) -> anyhow::Result<PolicyTemplate> {
    let mut parts = token.split(':');
    let name = parts.next().unwrap_or_default().to_ascii_lowercase();
    let mut t = PolicyTemplate::new(match name.as_str() {
        "bidi" | "bidifilter" => PolicyKind::BiDiFilter,
        "united" | "bidi-lru" | "bidifilterlru" => PolicyKind::BiDiFilterUnited,
        "demote" | "global-lru" => PolicyKind::Demote,
        "lru" | "naive" | "naive-lru" => PolicyKind::NaiveLru,
        "promote" => PolicyKind::Promote,
        other => bail!("unknown policy {other:?}"),
    });
    t.window_fraction = args.window.unwrap_or(0.5);
    t.tie_break = args.tie.unwrap_or_default();
    t.promote_prob = args.promote_p.unwrap_or(0.5);
    t.demote_prob = args.promote_q.unwrap_or(0.5);
    let extra: Vec<&str> = parts.collect();
    match t.kind {
        PolicyKind::BiDiFilter => {
            if let Some(w) = extra.first() {
                t.window_fraction = w.parse().with_context(|| format!("window in {token:?}"))?;
            }
            if let Some(tie) = extra.get(1) {
                t.tie_break = tie.parse()?;
            }
            if extra.len() > 2 {
                bail!("too many parameters in {token:?}");
            }
        }
        PolicyKind::BiDiFilterUnited => {
            t.window_fraction = 1.0;
            if let Some(tie) = extra.first() {
                t.tie_break = tie.parse()?;
            }
            if extra.len() > 1 {
                bail!("too many parameters in {token:?}");
            }
        }
        PolicyKind::Promote => {
            if let Some(p) = extra.first() {
                t.promote_prob = p.parse().with_context(|| format!("p in {token:?}"))?;
            }
            if let Some(q) = extra.get(1) {
                t.demote_prob = q.parse().with_context(|| format!("q in {token:?}"))?;
            }
            if extra.len() > 2 {
                bail!("too many parameters in {token:?}");
            }
        }
        PolicyKind::Demote | PolicyKind::NaiveLru => {
            if !extra.is_empty() {
                bail!("{name} takes no parameters");
            }
        }
    }
    Ok(t)
}

/// Merges command-line values over an optional base spec.
pub fn build_spec(args: &CellArgs, base: Option<SweepSpec>) -> anyhow::Result<SweepSpec> {
    let seed = args.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0);
    let trace = match (&args.synthetic, &args.trace, &base) {
        (Some(s), _, _) => TraceSource::Synthetic(parse_synthetic(s, seed)?),
        (None, Some(path), _) => TraceSource::File {
            path: path.clone(),
            chunk_size: args.chunk_size,
        },
        (None, None, Some(b)) => match &b.trace {
            TraceSource::Synthetic(s) => TraceSource::Synthetic(SyntheticSpec {
                rng_seed: seed,
                ..s.clone()
            }),
            other => other.clone(),
        },
        (None, None, None) => bail!("one of --synthetic or --trace is required"),
    };
    let policies = if args.policy.is_empty() {
        match &base {
            Some(b) => b.policies.clone(),
            None => bail!("--policy is required"),
        }
    } else {
        args.policy
            .iter()
            .map(|p| parse_policy(p, args))
            .collect::<anyhow::Result<_>>()?
    };
    let pick =
        |given: &Vec<f64>, from_base: Option<&Vec<f64>>, what: &str| -> anyhow::Result<Vec<f64>> {
            if !given.is_empty() {
                Ok(given.clone())
            } else if let Some(b) = from_base {
                Ok(b.clone())
            } else {
                bail!("--{what} is required")
            }
        };
    let l2 = pick(
        &args.l2_pct,
        base.as_ref().map(|b| &b.l2_size_percents),
        "l2-pct",
    )?;
    let l1 = pick(
        &args.l1_ratio,
        base.as_ref().map(|b| &b.l1_ratios),
        "l1-ratio",
    )?;
    let latency = match &args.latency {
        Some(s) => parse_latency(s)?,
        None => base.as_ref().map(|b| b.latency.clone()).unwrap_or_default(),
    };
    let spec = SweepSpec {
        trace,
        l2_size_percents: l2,
        l1_ratios: l1,
        policies,
        levels: args.levels.or(base.as_ref().map(|b| b.levels)).unwrap_or(2),
        latency,
        seed,
        output: args
            .out
            .clone()
            .or(base.as_ref().and_then(|b| b.output.clone())),
        format: args
            .format
            .or(base.as_ref().map(|b| b.format))
            .unwrap_or_default(),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    let spec = match &cli.command {
        Command::Run(args) => {
            let spec = build_spec(args, None)?;
            if spec.policies.len() != 1
                || spec.l2_size_percents.len() != 1
                || spec.l1_ratios.len() != 1
            {
                bail!("`run` takes exactly one policy, one --l2-pct and one --l1-ratio; use `sweep` for grids");
            }
            spec
        }
        Command::Sweep { cell, spec } => {
            let base = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    Some(
                        toml::from_str::<SweepSpec>(&text)
                            .with_context(|| format!("parsing {}", path.display()))?,
                    )
                }
                None => None,
            };
            build_spec(cell, base)?
        }
    };
    let rows = run_sweep(&spec)?;
    match &spec.output {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_rows(&rows, spec.format, BufWriter::new(file))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_rows(&rows, spec.format, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}
