//! Workload traces: generation, the JSON-lines file format, and replay.
//!
//! A trace file is one header line followed by one operation per line:
//!
//! ```text
//! {"format":"metacache-trace/1","spec":{...}}
//! {"phase":"SETUP","op":"MKDIR","path":"/d0","size":0}
//! {"phase":"SETUP","op":"CREATE","path":"/d0/d1/f0","size":812}
//! {"phase":"RUN","op":"STAT","path":"/d0/d1/f0","size":0}
//! ```
//!
//! Setup operations populate the store before the simulator boots; the
//! store is then flushed so they sit on disk the way a filesystem's
//! metadata does at boot. Only run operations are measured.
//!
//! Generation uses ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`), so a
//! trace is byte-identical on every platform for the same spec.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FileType, InodeRecord, PathKey};
use crate::report::{Report, RowStats};
use crate::store::{Store, StoreConfig};
use crate::vfs::{Sim, SimConfig};

pub const TRACE_FORMAT: &str = "metacache-trace/1";
const MAX_DIRECTORIES: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpMix {
    pub stat: f64,
    pub open_read: f64,
    pub create: f64,
    pub unlink: f64,
}

impl Default for OpMix {
    /// File I/O is 21% of requests; metadata operations cover the rest.
    fn default() -> Self {
        OpMix {
            stat: 0.55,
            open_read: 0.21,
            create: 0.18,
            unlink: 0.06,
        }
    }
}

impl OpMix {
    pub fn only_stat() -> Self {
        OpMix {
            stat: 1.0,
            open_read: 0.0,
            create: 0.0,
            unlink: 0.0,
        }
    }

    fn sum(&self) -> f64 {
        self.stat + self.open_read + self.create + self.unlink
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub num_files: u64,
    pub dir_fanout: u64,
    pub tree_depth: u64,
    pub op_count: u64,
    pub op_mix: OpMix,
    pub file_size_min: u64,
    pub file_size_max: u64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            num_files: 2000,
            dir_fanout: 4,
            tree_depth: 3,
            op_count: 10_000,
            op_mix: OpMix::default(),
            file_size_min: 128,
            file_size_max: 8192,
            seed: 42,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_owned()));
        let m = &self.op_mix;
        let parts = [m.stat, m.open_read, m.create, m.unlink];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return bad("op mix fractions must be finite and non-negative");
        }
        if (m.sum() - 1.0).abs() > 1e-9 {
            return bad("op mix fractions must sum to 1");
        }
        if self.num_files == 0 || self.dir_fanout == 0 || self.tree_depth == 0 || self.op_count == 0
        {
            return bad("num_files, dir_fanout, tree_depth and op_count must be > 0");
        }
        if self.file_size_min > self.file_size_max {
            return bad("file_size_min exceeds file_size_max");
        }
        match self.directory_count() {
            Some(n) if n <= MAX_DIRECTORIES => Ok(()),
            _ => bad("directory tree too large"),
        }
    }

    /// `fanout + fanout^2 + ... + fanout^depth`
    fn directory_count(&self) -> Option<u64> {
        let mut level = 1u64;
        let mut total = 0u64;
        for _ in 0..self.tree_depth {
            level = level.checked_mul(self.dir_fanout)?;
            total = total.checked_add(level)?;
        }
        Some(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Setup,
    Run,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OpKind {
    Mkdir,
    Create,
    Stat,
    OpenRead,
    Unlink,
}

impl OpKind {
    /// Operations that appear as rows in a report.
    pub const MEASURED: [OpKind; 4] = [
        OpKind::Stat,
        OpKind::OpenRead,
        OpKind::Create,
        OpKind::Unlink,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OpKind::Mkdir => "MKDIR",
            OpKind::Create => "CREATE",
            OpKind::Stat => "STAT",
            OpKind::OpenRead => "OPEN_READ",
            OpKind::Unlink => "UNLINK",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceOp {
    pub phase: Phase,
    pub op: OpKind,
    pub path: String,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub spec: WorkloadSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub ops: Vec<TraceOp>,
}

impl Trace {
    pub fn run_ops(&self) -> impl Iterator<Item = &TraceOp> {
        self.ops.iter().filter(|o| o.phase == Phase::Run)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for op in &self.ops {
            out.push_str(&serde_json::to_string(op).expect("op serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header_line = match lines.next() {
            Some((_, l)) => l?,
            None => return Err(malformed(1, "missing header")),
        };
        let header: TraceHeader =
            serde_json::from_str(&header_line).map_err(|e| malformed(1, &e.to_string()))?;
        if header.format != TRACE_FORMAT {
            return Err(malformed(1, "unknown trace format"));
        }
        let mut ops = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let op: TraceOp =
                serde_json::from_str(&line).map_err(|e| malformed(i + 1, &e.to_string()))?;
            ops.push(op);
        }
        Ok(Trace { header, ops })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

fn malformed(line: usize, reason: &str) -> Error {
    Error::MalformedTrace {
        line,
        reason: reason.to_owned(),
    }
}

/// Builds a deterministic trace from `spec`.
///
/// The directory tree has `dir_fanout` children per directory down to
/// `tree_depth` levels; files go into leaf directories. Run operations
/// that need an existing file fall back to CREATE when none is live.
pub fn generate(spec: &WorkloadSpec) -> Result<Trace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ops = Vec::new();

    let mut level = vec![String::new()];
    for _ in 0..spec.tree_depth {
        let mut next = Vec::with_capacity(level.len() * spec.dir_fanout as usize);
        for parent in &level {
            for i in 0..spec.dir_fanout {
                let path = format!("{parent}/d{i}");
                ops.push(TraceOp {
                    phase: Phase::Setup,
                    op: OpKind::Mkdir,
                    path: path.clone(),
                    size: 0,
                });
                next.push(path);
            }
        }
        level = next;
    }
    let leaves = level;

    let mut next_file = 0u64;
    let mut new_file = |rng: &mut ChaCha8Rng| {
        let leaf = &leaves[rng.gen_range(0..leaves.len())];
        let path = format!("{leaf}/f{next_file}");
        next_file += 1;
        let size = rng.gen_range(spec.file_size_min..=spec.file_size_max);
        (path, size)
    };

    let mut live: Vec<String> = Vec::with_capacity(spec.num_files as usize);
    for _ in 0..spec.num_files {
        let (path, size) = new_file(&mut rng);
        ops.push(TraceOp {
            phase: Phase::Setup,
            op: OpKind::Create,
            path: path.clone(),
            size,
        });
        live.push(path);
    }

    let mix = spec.op_mix;
    let bounds = [
        (mix.stat, OpKind::Stat),
        (mix.stat + mix.open_read, OpKind::OpenRead),
        (mix.stat + mix.open_read + mix.create, OpKind::Create),
    ];
    for _ in 0..spec.op_count {
        let u: f64 = rng.gen();
        let mut kind = bounds
            .iter()
            .find(|(b, _)| u < *b)
            .map_or(OpKind::Unlink, |(_, k)| *k);
        if live.is_empty() && kind != OpKind::Create {
            kind = OpKind::Create;
        }
        let op = match kind {
            OpKind::Create => {
                let (path, size) = new_file(&mut rng);
                live.push(path.clone());
                TraceOp {
                    phase: Phase::Run,
                    op: kind,
                    path,
                    size,
                }
            }
            OpKind::Unlink => {
                let idx = rng.gen_range(0..live.len());
                TraceOp {
                    phase: Phase::Run,
                    op: kind,
                    path: live.swap_remove(idx),
                    size: 0,
                }
            }
            _ => {
                let idx = rng.gen_range(0..live.len());
                TraceOp {
                    phase: Phase::Run,
                    op: kind,
                    path: live[idx].clone(),
                    size: 0,
                }
            }
        };
        ops.push(op);
    }

    Ok(Trace {
        header: TraceHeader {
            format: TRACE_FORMAT.to_owned(),
            spec: spec.clone(),
        },
        ops,
    })
}

/// File contents for a generated file; a fixed function of its inode number.
fn payload(ino: u64, size: u64) -> Vec<u8> {
    (0..size).map(|i| ((ino + i) % 251) as u8).collect()
}

/// Replays `trace` against a fresh store in `data_dir`, which must be
/// empty or absent, and reports the cost of the run phase.
pub fn replay(trace: &Trace, config: SimConfig, data_dir: impl AsRef<Path>) -> Result<Report> {
    let data_dir = data_dir.as_ref();
    if data_dir.exists() && fs::read_dir(data_dir)?.next().is_some() {
        return Err(Error::InvalidConfig(format!(
            "data dir {} is not empty",
            data_dir.display()
        )));
    }
    let split = trace
        .ops
        .iter()
        .position(|o| o.phase == Phase::Run)
        .unwrap_or(trace.ops.len());
    let (setup, run) = trace.ops.split_at(split);
    // Line numbers in errors count the header as line 1.
    let run_line = |i: usize| split + i + 2;

    let mut store_cfg = StoreConfig::new(data_dir);
    store_cfg.sync_every_write = false;
    store_cfg.block_size = config.block_size;
    store_cfg.inline_threshold = config.inline_threshold.max(1);
    let mut store = Store::open(store_cfg)?;
    let mut alloc = InodeAlloc::new(config.block_size as u64);

    let dir_size = config.block_size as u64;
    store.put(
        PathKey::root(),
        InodeRecord::new(1, FileType::Directory, dir_size),
        None,
    )?;
    for (i, op) in setup.iter().enumerate() {
        let line = i + 2;
        let key = PathKey::from_path(&op.path).map_err(|e| malformed(line, &e.to_string()))?;
        match op.op {
            OpKind::Mkdir => {
                let inode = InodeRecord::new(alloc.next_ino(), FileType::Directory, dir_size);
                store.put(key, inode, None)?;
            }
            OpKind::Create => {
                let inline = op.size <= config.inline_threshold as u64;
                let inode = alloc.file(op.size, inline);
                let data = inline.then(|| payload(inode.inode_number, op.size));
                store.put(key, inode, data)?;
            }
            _ => return Err(malformed(line, "only MKDIR and CREATE may appear in setup")),
        }
    }
    store.flush()?;

    let mut sim = Sim::boot(config, store)?;
    let mut rows: Vec<(OpKind, RowStats)> = OpKind::MEASURED
        .iter()
        .map(|k| (*k, RowStats::default()))
        .collect();
    for (i, op) in run.iter().enumerate() {
        let line = run_line(i);
        if op.phase != Phase::Run {
            return Err(malformed(line, "setup operation after run operations"));
        }
        let before = sim.counters();
        let outcome = match op.op {
            OpKind::Stat => sim.stat(&op.path).map(drop),
            OpKind::OpenRead => sim.open_read(&op.path).map(drop),
            OpKind::Create => {
                let inline = op.size <= config.inline_threshold as u64;
                let inode = alloc.file(op.size, inline);
                let data = payload(inode.inode_number, op.size);
                sim.create(&op.path, inode, Some(data))
            }
            OpKind::Unlink => sim.unlink(&op.path),
            OpKind::Mkdir => return Err(malformed(line, "MKDIR is a setup operation")),
        };
        let after = sim.counters();
        let row = &mut rows
            .iter_mut()
            .find(|(k, _)| *k == op.op)
            .expect("measured kind")
            .1;
        row.calls += 1;
        row.cost_units += after.cost_units - before.cost_units;
        row.block_reads += after.block_reads - before.block_reads;
        match outcome {
            Ok(()) => {}
            Err(Error::NotFound(_) | Error::IsDirectory(_)) => row.errors += 1,
            Err(Error::InvalidName(_) | Error::InvalidParent(_)) => {
                return Err(malformed(line, "bad path"))
            }
            Err(e) => return Err(e),
        }
    }

    Ok(Report::from_rows(
        trace.header.clone(),
        config,
        rows,
        sim.counters(),
        sim.store().counters().sstable_blocks_read,
        sim.warm_loaded(),
    ))
}

struct InodeAlloc {
    block_size: u64,
    next_ino: u64,
    next_block: u64,
}

impl InodeAlloc {
    fn new(block_size: u64) -> Self {
        // Inode 1 is the root.
        InodeAlloc {
            block_size,
            next_ino: 2,
            next_block: 1,
        }
    }

    fn next_ino(&mut self) -> u64 {
        self.next_ino += 1;
        self.next_ino - 1
    }

    fn file(&mut self, size: u64, inline: bool) -> InodeRecord {
        let mut inode = InodeRecord::new(self.next_ino(), FileType::Regular, size);
        if !inline {
            let n = size.div_ceil(self.block_size);
            inode.block_refs = (self.next_block..self.next_block + n).collect();
            self.next_block += n;
        }
        inode
    }
}
