//! Request streams: a synthetic Zipf-plus-recency generator and a reader for
//! plain-text trace files.
//!
//! Trace files hold one `key[,size_bytes]` record per line; `#` starts a
//! comment line. Objects larger than the chunk size are split into
//! `key#0`, `key#1`, ... so every simulated item has the same size.

use std::fs::File;
use std::hash::Hash;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{FxMap, ItemKey};

pub const DEFAULT_CHUNK_SIZE: u64 = 4096;
pub const DEFAULT_RECENT_BUFFER: usize = 10;

/// Parameters of a synthetic trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub length: u64,
    pub ground_set: u64,
    pub skew: f64,
    /// Probability of re-emitting one of the last few keys.
    pub recency: f64,
    pub rng_seed: u64,
    #[serde(default = "default_recent_buffer")]
    pub recent_buffer_size: usize,
}

fn default_recent_buffer() -> usize {
    DEFAULT_RECENT_BUFFER
}

impl SyntheticSpec {
    pub fn new(length: u64, ground_set: u64, skew: f64, recency: f64, rng_seed: u64) -> Self {
        SyntheticSpec {
            length,
            ground_set,
            skew,
            recency,
            rng_seed,
            recent_buffer_size: DEFAULT_RECENT_BUFFER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("synthetic trace: {m}")));
        if self.length == 0 {
            return bad("length must be at least 1".into());
        }
        if self.recent_buffer_size == 0 {
            return bad("recent buffer must hold at least one key".into());
        }
        if self.ground_set < self.recent_buffer_size as u64 {
            return bad(format!(
                "ground set {} smaller than the recent buffer ({})",
                self.ground_set, self.recent_buffer_size
            ));
        }
        if !(self.skew > 0.0 && self.skew < 1.0) {
            return bad(format!("skew {} outside (0, 1)", self.skew));
        }
        if !(0.0..=1.0).contains(&self.recency) {
            return bad(format!("recency {} outside [0, 1]", self.recency));
        }
        Ok(())
    }

    /// Stable identifier used in result rows.
    pub fn trace_id(&self) -> String {
        format!(
            "synthetic-{}-{}-{}-{}",
            self.length, self.ground_set, self.skew, self.recency
        )
    }
}

/// Inverse-CDF sampler for ranks `1..=n` with `P(r) ∝ r^-skew`.
#[derive(Debug, Clone)]
pub struct ZipfTable {
    cdf: Vec<f64>,
}

impl ZipfTable {
    pub fn new(ground_set: u64, skew: f64) -> Self {
        let mut cdf = Vec::with_capacity(ground_set as usize);
        let mut acc = 0.0;
        for r in 1..=ground_set {
            acc += (r as f64).powf(-skew);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        ZipfTable { cdf }
    }

    /// Maps a uniform draw in `[0, 1)` to a rank.
    pub fn rank(&self, u: f64) -> u64 {
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.cdf.len() - 1) as u64 + 1
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }
}

/// Deterministic synthetic key stream.
///
/// Each step re-emits one of the last `recent_buffer_size` emitted keys
/// with probability `recency`, otherwise draws a Zipf rank. The buffer keeps
/// duplicates, so popular keys are more likely to be repeated. The first
/// `recent_buffer_size` keys always come from the Zipf branch.
#[derive(Debug, Clone)]
pub struct SyntheticTrace {
    spec: SyntheticSpec,
    zipf: ZipfTable,
    rng: ChaCha8Rng,
    recent: Vec<u64>,
    next_slot: usize,
    emitted: u64,
    recent_draws: u64,
}

impl SyntheticTrace {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SyntheticTrace {
            zipf: ZipfTable::new(spec.ground_set, spec.skew),
            rng: ChaCha8Rng::seed_from_u64(spec.rng_seed),
            recent: Vec::with_capacity(spec.recent_buffer_size),
            next_slot: 0,
            emitted: 0,
            recent_draws: 0,
            spec,
        })
    }

    /// Number of keys taken from the recent buffer so far.
    pub fn recent_draws(&self) -> u64 {
        self.recent_draws
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }
}

impl Iterator for SyntheticTrace {
    type Item = ItemKey;

    fn next(&mut self) -> Option<ItemKey> {
        if self.emitted >= self.spec.length {
            return None;
        }
        let cap = self.spec.recent_buffer_size;
        let warm = self.recent.len() == cap;
        let key = if warm && self.rng.gen::<f64>() < self.spec.recency {
            self.recent_draws += 1;
            self.recent[self.rng.gen_range(0..cap)]
        } else {
            self.zipf.rank(self.rng.gen::<f64>())
        };
        if warm {
            self.recent[self.next_slot] = key;
            self.next_slot = (self.next_slot + 1) % cap;
        } else {
            self.recent.push(key);
        }
        self.emitted += 1;
        Some(ItemKey(key))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.spec.length - self.emitted) as usize;
        (left, Some(left))
    }
}

pub fn generate_synthetic(spec: SyntheticSpec) -> Result<SyntheticTrace> {
    SyntheticTrace::new(spec)
}

/// Chunk labels for one object: `key#0 .. key#(n-1)` with
/// `n = ceil(size / chunk_size)`, or one chunk when the size is absent or 0.
pub fn chunk_keys(
    key: &str,
    size: Option<u64>,
    chunk_size: u64,
) -> impl Iterator<Item = String> + '_ {
    (0..chunk_count(size, chunk_size)).map(move |i| format!("{key}#{i}"))
}

pub fn chunk_count(size: Option<u64>, chunk_size: u64) -> u64 {
    match size {
        None | Some(0) => 1,
        Some(s) => s.div_ceil(chunk_size),
    }
}

/// One parsed line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub key: String,
    pub size: Option<u64>,
}

/// Parses one non-comment line; `None` for lines to skip.
pub fn parse_record(line: &str) -> std::result::Result<Option<TraceRecord>, String> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let mut fields = line.split(',').map(str::trim);
    let key = fields.next().unwrap_or_default();
    if key.is_empty() {
        return Err("empty key".into());
    }
    let size = match fields.next() {
        None | Some("") => None,
        Some(s) => Some(
            s.parse::<u64>()
                .map_err(|e| format!("bad size {s:?}: {e}"))?,
        ),
    };
    if let Some(extra) = fields.next() {
        return Err(format!("unexpected extra field {extra:?}"));
    }
    Ok(Some(TraceRecord {
        key: key.to_owned(),
        size,
    }))
}

/// Streams chunk labels from a trace file.
pub struct TraceReader<R> {
    path: PathBuf,
    lines: std::io::Lines<R>,
    line_no: usize,
    chunk_size: u64,
    pending: Option<(String, u64, u64)>,
    failed: bool,
}

impl TraceReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, chunk_size: u64) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        Ok(Self::new(BufReader::new(file), path, chunk_size))
    }
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R, path: PathBuf, chunk_size: u64) -> Self {
        assert!(chunk_size > 0, "chunk size must be positive");
        TraceReader {
            path,
            lines: reader.lines(),
            line_no: 0,
            chunk_size,
            pending: None,
            failed: false,
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<String>;

    fn next(&mut self) -> Option<Result<String>> {
        if self.failed {
            return None;
        }
        loop {
            if let Some((key, next, total)) = &mut self.pending {
                if *next < *total {
                    let label = format!("{key}#{next}");
                    *next += 1;
                    return Some(Ok(label));
                }
                self.pending = None;
            }
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(source) => {
                    self.failed = true;
                    return Some(Err(Error::Io {
                        path: self.path.clone(),
                        source,
                    }));
                }
            };
            self.line_no += 1;
            match parse_record(&line) {
                Ok(None) => {}
                Ok(Some(rec)) => {
                    let total = chunk_count(rec.size, self.chunk_size);
                    self.pending = Some((rec.key, 0, total));
                }
                Err(reason) => {
                    self.failed = true;
                    return Some(Err(Error::MalformedTrace {
                        path: self.path.clone(),
                        line: self.line_no,
                        reason,
                    }));
                }
            }
        }
    }
}

pub fn ingest_trace(
    path: impl AsRef<Path>,
    chunk_size: u64,
) -> Result<TraceReader<BufReader<File>>> {
    TraceReader::open(path, chunk_size)
}

/// Assigns dense ids to chunk labels in first-seen order.
#[derive(Debug, Default)]
pub struct KeyInterner {
    ids: FxMap<String, u64>,
}

impl KeyInterner {
    pub fn intern(&mut self, label: String) -> ItemKey {
        let next = self.ids.len() as u64;
        ItemKey(*self.ids.entry(label).or_insert(next))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Where a simulation's requests come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    Synthetic(SyntheticSpec),
    File {
        path: PathBuf,
        #[serde(default = "default_chunk")]
        chunk_size: u64,
    },
}

fn default_chunk() -> u64 {
    DEFAULT_CHUNK_SIZE
}

pub type KeyStream = Box<dyn Iterator<Item = Result<ItemKey>> + Send>;

impl TraceSource {
    pub fn trace_id(&self) -> String {
        match self {
            TraceSource::Synthetic(spec) => spec.trace_id(),
            TraceSource::File { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }

    /// Opens a fresh pass over the trace.
    pub fn open(&self) -> Result<KeyStream> {
        Ok(match self {
            TraceSource::Synthetic(spec) => Box::new(SyntheticTrace::new(spec.clone())?.map(Ok)),
            TraceSource::File { path, chunk_size } => {
                let mut interner = KeyInterner::default();
                Box::new(
                    TraceReader::open(path, *chunk_size)?
                        .map(move |label| label.map(|l| interner.intern(l))),
                )
            }
        })
    }
}

/// `(unique keys, total accesses)` of a stream.
pub fn count_uniques<K, I>(stream: I) -> (u64, u64)
where
    K: Hash + Eq,
    I: IntoIterator<Item = K>,
{
    let mut seen = rustc_hash::FxHashSet::default();
    let mut accesses = 0u64;
    for key in stream {
        seen.insert(key);
        accesses += 1;
    }
    (seen.len() as u64, accesses)
}
