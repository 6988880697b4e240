//! Simulated VFS lookup pipeline over a counted disk model.
//!
//! A lookup is served by exactly one tier:
//!
//! 1. the VFS inode cache (LRU, positive entries only),
//! 2. the metadata cache, when the store answers from its MemTable or warm
//!    cache,
//! 3. the disk. With the metadata cache disabled a cold lookup costs
//!    `depth(path) + 1` block reads (one per directory level plus the
//!    inode); with it enabled, whatever the store's SSTables actually read.
//!
//! Every metadata block read is a random access and also costs one seek.
//! Reading non-inline file data costs `ceil(size / block_size)` blocks and
//! one seek. Costs are counted, never timed.

use std::num::NonZeroUsize;

use lru::LruCache;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InodeRecord, MetaEntry, PathKey, DEFAULT_BLOCK_SIZE, DEFAULT_INLINE_THRESHOLD};
use crate::store::{GetCost, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub ram_hit: u64,
    pub block_read: u64,
    pub block_write: u64,
    pub seek: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            ram_hit: 1,
            block_read: 100,
            block_write: 100,
            seek: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub icache_capacity: usize,
    pub metacache_enabled: bool,
    pub warm_on_boot: bool,
    pub inline_threshold: usize,
    pub block_size: usize,
    pub costs: CostModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            icache_capacity: 1024,
            metacache_enabled: true,
            warm_on_boot: true,
            inline_threshold: DEFAULT_INLINE_THRESHOLD,
            block_size: DEFAULT_BLOCK_SIZE,
            costs: CostModel::default(),
        }
    }
}

impl SimConfig {
    /// Plain VFS with no metadata cache.
    pub fn baseline() -> Self {
        SimConfig {
            metacache_enabled: false,
            warm_on_boot: false,
            ..Self::default()
        }
    }

    /// Metadata cache warm-loaded at boot.
    pub fn metacache_warm() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    Icache,
    Metacache,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LookupResult {
    pub source: Source,
    pub blocks_read: u64,
    pub cost_units: u64,
}

/// Inode cache. Capacity 0 disables caching.
pub struct ICache {
    inner: Option<LruCache<PathKey, MetaEntry>>,
}

impl ICache {
    pub fn new(capacity: usize) -> Self {
        ICache {
            inner: NonZeroUsize::new(capacity).map(LruCache::new),
        }
    }

    pub fn get(&mut self, key: &PathKey) -> Option<&MetaEntry> {
        self.inner.as_mut()?.get(key)
    }

    pub fn put(&mut self, key: PathKey, entry: MetaEntry) {
        if let Some(c) = self.inner.as_mut() {
            c.put(key, entry);
        }
    }

    pub fn remove(&mut self, key: &PathKey) {
        if let Some(c) = self.inner.as_mut() {
            c.pop(key);
        }
    }

    pub fn len(&self) -> usize {
        self.inner.as_ref().map_or(0, LruCache::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keys from most to least recently used.
    pub fn keys(&self) -> Vec<PathKey> {
        self.inner
            .as_ref()
            .map(|c| c.iter().map(|(k, _)| k.clone()).collect())
            .unwrap_or_default()
    }
}

/// Monotone disk counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DiskModel {
    pub block_reads: u64,
    pub block_writes: u64,
    pub seeks: u64,
}

impl DiskModel {
    /// Cold lookup without a metadata cache: every directory level plus the inode.
    pub fn baseline_lookup_blocks(key: &PathKey) -> u64 {
        key.depth() as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimCounters {
    pub icache_hits: u64,
    pub metacache_hits: u64,
    pub disk_fallbacks: u64,
    pub block_reads: u64,
    pub metadata_block_reads: u64,
    pub data_block_reads: u64,
    pub block_writes: u64,
    pub seeks: u64,
    pub cost_units: u64,
}

pub struct Sim {
    config: SimConfig,
    store: Store,
    icache: ICache,
    disk: DiskModel,
    counters: SimCounters,
    warm_loaded: Option<usize>,
}

impl Sim {
    /// Starts with a cold inode cache, warm-loading the store if configured.
    pub fn boot(config: SimConfig, mut store: Store) -> Result<Self> {
        if config.block_size == 0 {
            return Err(Error::InvalidConfig("block_size must be > 0".into()));
        }
        if config.inline_threshold > store.config().inline_threshold {
            return Err(Error::InvalidConfig(format!(
                "inline_threshold {} exceeds the store's {}",
                config.inline_threshold,
                store.config().inline_threshold
            )));
        }
        let warm_loaded = if config.metacache_enabled && config.warm_on_boot {
            Some(store.warm_load()?)
        } else {
            None
        };
        Ok(Sim {
            config,
            store,
            icache: ICache::new(config.icache_capacity),
            disk: DiskModel::default(),
            counters: SimCounters::default(),
            warm_loaded,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn into_store(self) -> Store {
        self.store
    }

    pub fn icache(&self) -> &ICache {
        &self.icache
    }

    pub fn disk(&self) -> &DiskModel {
        &self.disk
    }

    /// Entries loaded at boot, if a warm load ran.
    pub fn warm_loaded(&self) -> Option<usize> {
        self.warm_loaded
    }

    pub fn counters(&self) -> SimCounters {
        SimCounters {
            block_reads: self.disk.block_reads,
            block_writes: self.disk.block_writes,
            seeks: self.disk.seeks,
            ..self.counters
        }
    }

    fn charge_ram(&mut self) -> u64 {
        self.counters.cost_units += self.config.costs.ram_hit;
        self.config.costs.ram_hit
    }

    fn charge_reads(&mut self, blocks: u64, seeks: u64) -> u64 {
        let c = self.config.costs;
        let cost = blocks * c.block_read + seeks * c.seek;
        self.disk.block_reads += blocks;
        self.disk.seeks += seeks;
        self.counters.cost_units += cost;
        cost
    }

    fn charge_writes(&mut self, blocks: u64, seeks: u64) -> u64 {
        let c = self.config.costs;
        let cost = blocks * c.block_write + seeks * c.seek;
        self.disk.block_writes += blocks;
        self.disk.seeks += seeks;
        self.counters.cost_units += cost;
        cost
    }

    /// Runs one key through the pipeline, charging whichever tier serves it.
    fn lookup(&mut self, key: &PathKey) -> Result<(Option<MetaEntry>, LookupResult)> {
        if let Some(e) = self.icache.get(key) {
            let e = e.clone();
            self.counters.icache_hits += 1;
            let cost_units = self.charge_ram();
            return Ok((
                Some(e),
                LookupResult {
                    source: Source::Icache,
                    blocks_read: 0,
                    cost_units,
                },
            ));
        }
        let found = self.store.get(key)?;
        let result = match (self.config.metacache_enabled, found.cost) {
            (true, GetCost::MemtableHit | GetCost::WarmHit) => {
                self.counters.metacache_hits += 1;
                LookupResult {
                    source: Source::Metacache,
                    blocks_read: 0,
                    cost_units: self.charge_ram(),
                }
            }
            (enabled, cost) => {
                let blocks = if enabled {
                    cost.blocks_read()
                } else {
                    DiskModel::baseline_lookup_blocks(key)
                };
                self.counters.disk_fallbacks += 1;
                self.counters.metadata_block_reads += blocks;
                LookupResult {
                    source: Source::Disk,
                    blocks_read: blocks,
                    cost_units: self.charge_reads(blocks, blocks),
                }
            }
        };
        if let Some(e) = &found.entry {
            self.icache.put(key.clone(), e.clone());
        }
        Ok((found.entry, result))
    }

    pub fn stat(&mut self, path: &str) -> Result<(InodeRecord, LookupResult)> {
        let key = PathKey::from_path(path)?;
        match self.lookup(&key)? {
            (Some(e), r) => Ok((e.inode, r)),
            (None, _) => Err(Error::NotFound(path.to_owned())),
        }
    }

    /// Creates `path`. Payloads up to the inline threshold are stored with
    /// the inode; larger ones are charged as separate data-block writes.
    pub fn create(
        &mut self,
        path: &str,
        inode: InodeRecord,
        payload: Option<Vec<u8>>,
    ) -> Result<()> {
        let key = PathKey::from_path(path)?;
        if !key.is_root() && key.parent() != "/" {
            let parent = PathKey::from_path(key.parent())?;
            match self.lookup(&parent)? {
                (Some(e), _) if e.inode.is_dir() => {}
                _ => return Err(Error::NotFound(key.parent().to_owned())),
            }
        }
        let inline_data = match payload {
            Some(p) if p.len() <= self.config.inline_threshold => Some(p),
            Some(p) => {
                let blocks = (p.len() as u64).div_ceil(self.config.block_size as u64);
                self.charge_writes(blocks, 1);
                None
            }
            None => None,
        };
        self.store
            .put(key.clone(), inode.clone(), inline_data.clone())?;
        self.charge_ram();
        self.icache.put(key, MetaEntry { inode, inline_data });
        Ok(())
    }

    /// Stat plus data read. Returns the file length and the combined cost.
    pub fn open_read(&mut self, path: &str) -> Result<(u64, LookupResult)> {
        let key = PathKey::from_path(path)?;
        let (entry, mut result) = self.lookup(&key)?;
        let entry = entry.ok_or_else(|| Error::NotFound(path.to_owned()))?;
        if entry.inode.is_dir() {
            return Err(Error::IsDirectory(path.to_owned()));
        }
        if let Some(data) = &entry.inline_data {
            return Ok((data.len() as u64, result));
        }
        let size = entry.inode.size_bytes;
        let blocks = size.div_ceil(self.config.block_size as u64);
        if blocks > 0 {
            self.counters.data_block_reads += blocks;
            result.cost_units += self.charge_reads(blocks, 1);
            result.blocks_read += blocks;
        }
        Ok((size, result))
    }

    pub fn unlink(&mut self, path: &str) -> Result<()> {
        let key = PathKey::from_path(path)?;
        if self.lookup(&key)?.0.is_none() {
            return Err(Error::NotFound(path.to_owned()));
        }
        self.store.delete(key.clone())?;
        self.charge_ram();
        self.icache.remove(&key);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FileType;
    use crate::oracle::ListLru;
    use crate::store::StoreConfig;
    use rand::{Rng, SeedableRng};

    fn store(dir: &std::path::Path) -> Store {
        let mut c = StoreConfig::new(dir);
        c.sync_every_write = false;
        Store::open(c).unwrap()
    }

    fn dir_inode(ino: u64) -> InodeRecord {
        InodeRecord::new(ino, FileType::Directory, 4096)
    }

    fn file_inode(ino: u64, size: u64) -> InodeRecord {
        InodeRecord::new(ino, FileType::Regular, size)
    }

    /// /a/b/f (depth 3) plus /a/b/small (inline) and /a/b/big (10000 bytes).
    fn seeded(dir: &std::path::Path) -> Store {
        let mut s = store(dir);
        s.put(PathKey::root(), dir_inode(1), None).unwrap();
        s.put(PathKey::from_path("/a").unwrap(), dir_inode(2), None)
            .unwrap();
        s.put(PathKey::from_path("/a/b").unwrap(), dir_inode(3), None)
            .unwrap();
        s.put(
            PathKey::from_path("/a/b/f").unwrap(),
            file_inode(4, 0),
            None,
        )
        .unwrap();
        s.put(
            PathKey::from_path("/a/b/small").unwrap(),
            file_inode(5, 100),
            Some(vec![9; 100]),
        )
        .unwrap();
        s.put(
            PathKey::from_path("/a/b/big").unwrap(),
            file_inode(6, 10_000),
            None,
        )
        .unwrap();
        s.flush().unwrap();
        s
    }

    #[test]
    fn boot_without_warm_leaves_store_cold() {
        let dir = tempfile::tempdir().unwrap();
        let sim = Sim::boot(
            SimConfig {
                warm_on_boot: false,
                ..SimConfig::default()
            },
            seeded(dir.path()),
        )
        .unwrap();
        assert!(!sim.store().is_warm());
        assert_eq!(sim.warm_loaded(), None);
        assert_eq!(sim.counters(), SimCounters::default());
    }

    #[test]
    fn warm_boot_counts_live_entries() {
        let dir = tempfile::tempdir().unwrap();
        let sim = Sim::boot(SimConfig::metacache_warm(), seeded(dir.path())).unwrap();
        assert_eq!(sim.warm_loaded(), Some(6));
    }

    #[test]
    fn second_stat_hits_icache() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = Sim::boot(SimConfig::baseline(), seeded(dir.path())).unwrap();
        sim.stat("/a/b/f").unwrap();
        let (_, r) = sim.stat("/a/b/f").unwrap();
        assert_eq!(r.source, Source::Icache);
        assert_eq!(r.blocks_read, 0);
    }

    #[test]
    fn baseline_cold_stat_charges_depth_plus_one() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = Sim::boot(SimConfig::baseline(), seeded(dir.path())).unwrap();
        let (ino, r) = sim.stat("/a/b/f").unwrap();
        assert_eq!(ino.inode_number, 4);
        assert_eq!(r.source, Source::Disk);
        assert_eq!(r.blocks_read, 4);
        assert_eq!(r.cost_units, 4 * 100 + 4 * 1000);
    }

    #[test]
    fn warm_metacache_cold_stat_reads_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = Sim::boot(SimConfig::metacache_warm(), seeded(dir.path())).unwrap();
        let (_, r) = sim.stat("/a/b/f").unwrap();
        assert_eq!(r.source, Source::Metacache);
        assert_eq!(r.blocks_read, 0);
        assert_eq!(r.cost_units, 1);
        assert_eq!(sim.store().counters().sstable_blocks_read, 0);
    }

    #[test]
    fn cold_metacache_reads_tables() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SimConfig {
            warm_on_boot: false,
            ..SimConfig::default()
        };
        let mut sim = Sim::boot(cfg, seeded(dir.path())).unwrap();
        let (_, r) = sim.stat("/a/b/f").unwrap();
        assert_eq!(r.source, Source::Disk);
        assert_eq!(r.blocks_read, 1);
    }

    #[test]
    fn missing_path_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = Sim::boot(SimConfig::metacache_warm(), seeded(dir.path())).unwrap();
        assert!(matches!(sim.stat("/nope"), Err(Error::NotFound(_))));
        assert!(matches!(sim.open_read("/a"), Err(Error::IsDirectory(_))));
    }

    #[test]
    fn create_inline_and_spilled() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = Sim::boot(SimConfig::metacache_warm(), seeded(dir.path())).unwrap();
        sim.create("/a/b/s", file_inode(10, 100), Some(vec![1; 100]))
            .unwrap();
        sim.create("/a/b/l", file_inode(11, 4097), Some(vec![2; 4097]))
            .unwrap();
        assert_eq!(sim.counters().block_writes, 2);
        let s = sim
            .store()
            .get(&PathKey::from_path("/a/b/s").unwrap())
            .unwrap();
        assert_eq!(s.entry.unwrap().inline_data, Some(vec![1; 100]));
        let l = sim
            .store()
            .get(&PathKey::from_path("/a/b/l").unwrap())
            .unwrap();
        assert_eq!(l.entry.unwrap().inline_data, None);
        assert!(matches!(
            sim.create("/zz/f", file_inode(12, 0), None),
            Err(Error::NotFound(_))
        ));
        assert!(matches!(
            sim.create("/a/b/f/x", file_inode(13, 0), None),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn open_read_costs() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = Sim::boot(SimConfig::metacache_warm(), seeded(dir.path())).unwrap();
        let (len, r) = sim.open_read("/a/b/small").unwrap();
        assert_eq!((len, r.blocks_read), (100, 0));
        let (len, r) = sim.open_read("/a/b/big").unwrap();
        assert_eq!(len, 10_000);
        assert_eq!(r.blocks_read, 3);
        assert_eq!(sim.counters().data_block_reads, 3);
        assert_eq!(sim.counters().seeks, 1);
    }

    #[test]
    fn read_after_stat_uses_icache() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = Sim::boot(SimConfig::baseline(), seeded(dir.path())).unwrap();
        sim.stat("/a/b/small").unwrap();
        let (_, r) = sim.open_read("/a/b/small").unwrap();
        assert_eq!(r.source, Source::Icache);
        assert_eq!(r.blocks_read, 0);
    }

    #[test]
    fn unlink_removes() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = Sim::boot(SimConfig::metacache_warm(), seeded(dir.path())).unwrap();
        sim.stat("/a/b/f").unwrap();
        sim.unlink("/a/b/f").unwrap();
        assert!(matches!(sim.stat("/a/b/f"), Err(Error::NotFound(_))));
        assert!(matches!(sim.unlink("/a/b/f"), Err(Error::NotFound(_))));
    }

    #[test]
    fn counters_zero_after_boot_and_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = Sim::boot(SimConfig::baseline(), seeded(dir.path())).unwrap();
        assert_eq!(sim.counters(), SimCounters::default());
        let paths = ["/a", "/a/b", "/a/b/f", "/a/b/small", "/a/b/big"];
        let mut prev = sim.counters();
        for p in paths {
            sim.stat(p).unwrap();
            let now = sim.counters();
            assert!(now.cost_units > prev.cost_units && now.block_reads > prev.block_reads);
            prev = now;
        }
        assert_eq!(sim.counters().disk_fallbacks, paths.len() as u64);
    }

    #[test]
    fn icache_matches_list_lru() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for cap in 0..6 {
            let mut real = ICache::new(cap);
            let mut model: ListLru<PathKey, MetaEntry> = ListLru::new(cap);
            for step in 0..3000 {
                let k = PathKey::new("/", &format!("k{}", rng.gen_range(0..10))).unwrap();
                match rng.gen_range(0..3) {
                    0 => {
                        let e = MetaEntry {
                            inode: file_inode(step + 1, 0),
                            inline_data: None,
                        };
                        real.put(k.clone(), e.clone());
                        model.put(k, e);
                    }
                    1 => assert_eq!(real.get(&k).cloned(), model.get(&k)),
                    _ => {
                        real.remove(&k);
                        model.remove(&k);
                    }
                }
                assert!(real.len() <= cap);
                assert_eq!(real.keys(), model.keys());
            }
        }
    }
}
