//! The metadata store: MemTable + WAL + SSTables behind one facade.
//!
//! Data directory layout:
//!
//! ```text
//! wal.log            frames for the active MemTable
//! NNNNNNNNNN.sst     immutable tables
//! MANIFEST           live table ids, one decimal id per line
//! ```
//!
//! `MANIFEST` is the authority for which tables are live. Table files not
//! listed there are leftovers from an interrupted flush or compaction and
//! are removed on open.
//!
//! Mutations take `&mut self`; lookups take `&self`, so a `Store` behind an
//! `RwLock` gives single-writer, multi-reader access.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::bloom::{DEFAULT_BITS_PER_KEY, DEFAULT_HASHES};
use crate::error::{Error, Result};
use crate::memtable::{InsertOutcome, MemTable, DEFAULT_THRESHOLD_BYTES};
use crate::model::{
    DirEntry, InodeRecord, MetaEntry, PathKey, ValueRecord, DEFAULT_BLOCK_SIZE,
    DEFAULT_INLINE_THRESHOLD,
};
use crate::sstable::{
    merge_compact, parse_table_file_name, table_file_name, SsTable, TableBuilder, TableOptions,
};
use crate::wal::{Wal, WalRecord};

pub const WAL_FILE: &str = "wal.log";
pub const MANIFEST_FILE: &str = "MANIFEST";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreConfig {
    pub data_dir: PathBuf,
    pub memtable_threshold_bytes: u64,
    pub bloom_bits_per_key: usize,
    pub bloom_hashes: u8,
    pub block_size: usize,
    pub max_tables_before_compact: usize,
    pub inline_threshold: usize,
    pub sync_every_write: bool,
}

impl StoreConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        StoreConfig {
            data_dir: data_dir.into(),
            memtable_threshold_bytes: DEFAULT_THRESHOLD_BYTES,
            bloom_bits_per_key: DEFAULT_BITS_PER_KEY,
            bloom_hashes: DEFAULT_HASHES,
            block_size: DEFAULT_BLOCK_SIZE,
            max_tables_before_compact: 4,
            inline_threshold: DEFAULT_INLINE_THRESHOLD,
            sync_every_write: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let zero = [
            (
                "memtable_threshold_bytes",
                self.memtable_threshold_bytes == 0,
            ),
            ("bloom_bits_per_key", self.bloom_bits_per_key == 0),
            ("bloom_hashes", self.bloom_hashes == 0),
            ("block_size", self.block_size == 0),
            (
                "max_tables_before_compact",
                self.max_tables_before_compact == 0,
            ),
            ("inline_threshold", self.inline_threshold == 0),
        ];
        match zero.iter().find(|(_, z)| *z) {
            Some((name, _)) => Err(Error::InvalidConfig(format!("{name} must be > 0"))),
            None => Ok(()),
        }
    }

    fn table_options(&self) -> TableOptions {
        TableOptions {
            block_size: self.block_size,
            bloom_bits_per_key: self.bloom_bits_per_key,
            bloom_hashes: self.bloom_hashes,
        }
    }
}

/// Steps inside flush and compaction where a test can abandon the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashPoint {
    /// New table file is on disk; MANIFEST not yet rewritten.
    FlushAfterTable,
    /// MANIFEST lists the new table; WAL not yet reset.
    FlushAfterManifest,
    /// Merged table is on disk; MANIFEST not yet rewritten.
    CompactAfterTable,
    /// MANIFEST lists only the merged table; inputs not yet deleted.
    CompactAfterManifest,
}

/// Which tier served a lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GetCost {
    MemtableHit,
    WarmHit,
    Disk { blocks_read: u64 },
}

impl GetCost {
    pub fn blocks_read(&self) -> u64 {
        match self {
            GetCost::Disk { blocks_read } => *blocks_read,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lookup {
    pub entry: Option<MetaEntry>,
    pub cost: GetCost,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StoreCounters {
    pub puts: u64,
    pub deletes: u64,
    pub gets: u64,
    pub memtable_hits: u64,
    pub warm_hits: u64,
    pub flushes: u64,
    pub compactions: u64,
    /// Data blocks read by point lookups.
    pub sstable_blocks_read: u64,
}

#[derive(Default)]
struct ReadCounters {
    gets: AtomicU64,
    memtable_hits: AtomicU64,
    warm_hits: AtomicU64,
    sstable_blocks_read: AtomicU64,
}

// Every live record, kept in step with writes after the load.
struct WarmCache {
    map: HashMap<PathKey, MetaEntry>,
}

pub struct Store {
    config: StoreConfig,
    memtable: MemTable,
    tables: Vec<SsTable>,
    wal: Wal,
    next_version: u64,
    next_file_id: u64,
    warm: Option<WarmCache>,
    puts: u64,
    deletes: u64,
    flushes: u64,
    compactions: u64,
    reads: ReadCounters,
    crash_point: Option<CrashPoint>,
}

impl Store {
    /// Opens (or creates) the store in `config.data_dir`, loading live
    /// tables and replaying the WAL into a fresh MemTable.
    pub fn open(config: StoreConfig) -> Result<Self> {
        config.validate()?;
        let dir = config.data_dir.clone();
        fs::create_dir_all(&dir)?;

        let live = read_manifest(&dir)?;
        let mut max_seen = live.iter().copied().max().unwrap_or(0);
        for ent in fs::read_dir(&dir)? {
            let ent = ent?;
            let name = ent.file_name();
            let Some(name) = name.to_str() else { continue };
            if name.ends_with(".tmp") {
                fs::remove_file(ent.path())?;
            } else if let Some(id) = parse_table_file_name(name) {
                max_seen = max_seen.max(id);
                if !live.contains(&id) {
                    fs::remove_file(ent.path())?;
                }
            }
        }

        let mut tables = live
            .iter()
            .map(|&id| SsTable::open(dir.join(table_file_name(id))))
            .collect::<Result<Vec<_>>>()?;
        tables.sort_by_key(SsTable::file_id);

        let wal_path = dir.join(WAL_FILE);
        let (wal, records) = if wal_path.exists() {
            Wal::recover(&wal_path)?
        } else {
            (Wal::create(&wal_path)?, Vec::new())
        };
        let mut memtable = MemTable::new(config.memtable_threshold_bytes);
        let mut max_version = tables.iter().map(SsTable::max_version).max().unwrap_or(0);
        for rec in records {
            max_version = max_version.max(rec.value.version);
            memtable.insert(rec.key, rec.value);
        }

        Ok(Store {
            config,
            memtable,
            tables,
            wal,
            next_version: max_version + 1,
            next_file_id: max_seen + 1,
            warm: None,
            puts: 0,
            deletes: 0,
            flushes: 0,
            compactions: 0,
            reads: ReadCounters::default(),
            crash_point: None,
        })
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn data_dir(&self) -> &Path {
        &self.config.data_dir
    }

    pub fn tables(&self) -> &[SsTable] {
        &self.tables
    }

    pub fn memtable(&self) -> &MemTable {
        &self.memtable
    }

    pub fn is_warm(&self) -> bool {
        self.warm.is_some()
    }

    pub fn counters(&self) -> StoreCounters {
        StoreCounters {
            puts: self.puts,
            deletes: self.deletes,
            gets: self.reads.gets.load(Ordering::Relaxed),
            memtable_hits: self.reads.memtable_hits.load(Ordering::Relaxed),
            warm_hits: self.reads.warm_hits.load(Ordering::Relaxed),
            flushes: self.flushes,
            compactions: self.compactions,
            sstable_blocks_read: self.reads.sstable_blocks_read.load(Ordering::Relaxed),
        }
    }

    /// Arms a failpoint: the next flush or compaction reaching `point`
    /// returns [`Error::InjectedCrash`], leaving files as they are.
    pub fn inject_crash(&mut self, point: CrashPoint) {
        self.crash_point = Some(point);
    }

    fn failpoint(&self, point: CrashPoint) -> Result<()> {
        if self.crash_point == Some(point) {
            return Err(Error::InjectedCrash(point));
        }
        Ok(())
    }

    /// Abandons the store like a power cut: unsynced WAL frames are lost.
    pub fn crash(mut self) {
        self.wal.discard_pending();
    }

    /// Makes every buffered WAL frame durable.
    pub fn sync(&mut self) -> Result<()> {
        self.wal.sync()
    }

    pub fn close(mut self) -> Result<()> {
        self.wal.sync()
    }

    pub fn put(
        &mut self,
        key: PathKey,
        inode: InodeRecord,
        inline_data: Option<Vec<u8>>,
    ) -> Result<()> {
        if let Some(data) = &inline_data {
            if data.len() > self.config.inline_threshold {
                return Err(Error::InlineTooLarge {
                    len: data.len(),
                    threshold: self.config.inline_threshold,
                });
            }
        }
        inode.validate(self.config.block_size)?;
        let version = self.next_version;
        let value = ValueRecord::from_entry(version, MetaEntry { inode, inline_data });
        self.write(key, value)?;
        self.puts += 1;
        Ok(())
    }

    pub fn delete(&mut self, key: PathKey) -> Result<()> {
        self.write(key, ValueRecord::tombstone(self.next_version))?;
        self.deletes += 1;
        Ok(())
    }

    fn write(&mut self, key: PathKey, value: ValueRecord) -> Result<()> {
        debug_assert_eq!(value.version, self.next_version);
        let rec = WalRecord {
            seq: self.wal.next_seq(),
            key,
            value,
        };
        self.wal.append(&rec)?;
        if self.config.sync_every_write {
            self.wal.sync()?;
        }
        self.next_version += 1;
        if let Some(w) = self.warm.as_mut() {
            match rec.value.entry() {
                Some(e) => w.map.insert(rec.key.clone(), e),
                None => w.map.remove(&rec.key),
            };
        }
        if self.memtable.insert(rec.key, rec.value) == InsertOutcome::ThresholdReached {
            self.flush()?;
            if self.tables.len() >= self.config.max_tables_before_compact {
                self.compact()?;
            }
        }
        Ok(())
    }

    /// Newest value for `key` and the tier that served it.
    pub fn get(&self, key: &PathKey) -> Result<Lookup> {
        self.reads.gets.fetch_add(1, Ordering::Relaxed);
        if let Some(v) = self.memtable.get(key) {
            self.reads.memtable_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Lookup {
                entry: v.entry(),
                cost: GetCost::MemtableHit,
            });
        }
        if let Some(w) = &self.warm {
            self.reads.warm_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Lookup {
                entry: w.map.get(key).cloned(),
                cost: GetCost::WarmHit,
            });
        }
        let mut blocks_read = 0;
        let mut entry = None;
        for t in self.tables.iter().rev() {
            let g = t.get(key)?;
            blocks_read += g.blocks_read;
            if let Some(v) = g.value {
                entry = v.entry();
                break;
            }
        }
        self.reads
            .sstable_blocks_read
            .fetch_add(blocks_read, Ordering::Relaxed);
        Ok(Lookup {
            entry,
            cost: GetCost::Disk { blocks_read },
        })
    }

    /// Newest-wins view of every key under `prefix`, tombstones included.
    fn merged_prefix(&self, prefix: &[u8]) -> Result<BTreeMap<PathKey, ValueRecord>> {
        let mut merged = BTreeMap::new();
        for t in &self.tables {
            for r in t.prefix_iter(prefix) {
                let (k, v) = r?;
                merged.insert(k, v);
            }
        }
        for (k, v) in self.memtable.prefix_iter(prefix) {
            merged.insert(k.clone(), v.clone());
        }
        Ok(merged)
    }

    /// Live children of `parent_path` in name order.
    pub fn scan_dir(&self, parent_path: &str) -> Result<Vec<(String, InodeRecord)>> {
        let prefix = PathKey::dir_prefix(parent_path)?;
        Ok(self
            .merged_prefix(&prefix)?
            .into_iter()
            .filter(|(k, _)| !k.is_root())
            .filter_map(|(k, v)| v.entry().map(|e| (k.name().to_owned(), e.inode)))
            .collect())
    }

    /// Directory entries for the live children of `parent_path`.
    pub fn dir_entries(&self, parent_path: &str) -> Result<Vec<DirEntry>> {
        let prefix = PathKey::dir_prefix(parent_path)?;
        self.merged_prefix(&prefix)?
            .into_iter()
            .filter(|(k, _)| !k.is_root())
            .filter_map(|(k, v)| v.entry().map(|e| (k, e.inode.inode_number)))
            .map(|(k, ino)| DirEntry::new(k, ino))
            .collect()
    }

    /// Writes the MemTable out as a new table and starts a fresh WAL.
    pub fn flush(&mut self) -> Result<()> {
        if self.memtable.is_empty() {
            return Ok(());
        }
        let id = self.next_file_id;
        self.next_file_id += 1;
        let dir = self.config.data_dir.clone();
        let mut b = TableBuilder::new(&dir, id, self.memtable.len(), self.config.table_options())?;
        for (k, v) in self.memtable.iter() {
            b.add(k, v)?;
        }
        let table = b.finish()?;
        self.failpoint(CrashPoint::FlushAfterTable)?;

        self.tables.push(table);
        self.write_manifest()?;
        self.failpoint(CrashPoint::FlushAfterManifest)?;

        self.wal.discard_pending();
        let wal_path = dir.join(WAL_FILE);
        fs::remove_file(&wal_path)?;
        self.wal = Wal::create(&wal_path)?;
        sync_dir(&dir)?;
        self.memtable = MemTable::new(self.config.memtable_threshold_bytes);
        self.flushes += 1;
        Ok(())
    }

    /// Merges every table into one, dropping tombstones.
    pub fn compact(&mut self) -> Result<()> {
        if self.tables.is_empty() {
            return Ok(());
        }
        let id = self.next_file_id;
        self.next_file_id += 1;
        let inputs: Vec<&SsTable> = self.tables.iter().collect();
        let merged = merge_compact(
            &self.config.data_dir,
            &inputs,
            true,
            id,
            self.config.table_options(),
        )?;
        self.failpoint(CrashPoint::CompactAfterTable)?;

        let old = std::mem::replace(&mut self.tables, merged.into_iter().collect());
        self.write_manifest()?;
        self.failpoint(CrashPoint::CompactAfterManifest)?;

        for t in old {
            fs::remove_file(t.path())?;
        }
        self.compactions += 1;
        Ok(())
    }

    /// Loads the consolidated contents of every table and the memtable into
    /// RAM. From then on every lookup is served without disk reads; writes
    /// update the loaded copy as well as the memtable.
    pub fn warm_load(&mut self) -> Result<usize> {
        let mut merged: BTreeMap<PathKey, ValueRecord> = BTreeMap::new();
        for t in &self.tables {
            for r in t.iter() {
                let (k, v) = r?;
                merged.insert(k, v);
            }
        }
        for (k, v) in self.memtable.iter() {
            merged.insert(k.clone(), v.clone());
        }
        let map: HashMap<PathKey, MetaEntry> = merged
            .into_iter()
            .filter_map(|(k, v)| v.entry().map(|e| (k, e)))
            .collect();
        let loaded = map.len();
        self.warm = Some(WarmCache { map });
        Ok(loaded)
    }

    fn write_manifest(&self) -> Result<()> {
        let dir = &self.config.data_dir;
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        let mut f = File::create(&tmp)?;
        for t in &self.tables {
            writeln!(f, "{}", t.file_id())?;
        }
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, dir.join(MANIFEST_FILE))?;
        sync_dir(dir)
    }
}

fn read_manifest(dir: &Path) -> Result<Vec<u64>> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim().parse::<u64>().map_err(|_| Error::CorruptTable {
                file: MANIFEST_FILE.into(),
                reason: format!("bad line {l:?}"),
            })
        })
        .collect()
}

fn sync_dir(dir: &Path) -> Result<()> {
    File::open(dir)?.sync_all()?;
    Ok(())
}
