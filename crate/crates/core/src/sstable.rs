//! Immutable sorted runs on disk.
//!
//! # File layout
//!
//! ```text
//! header   := "MCSS" 0x01
//! block*   := (key_len:u32 key val_len:u32 value)* zero padding
//! bloom    := m:u64 k:u8 bits[ceil(m/8)]
//! index    := count:u32 (key_len:u32 first_key offset:u64)*
//! footer   := bloom_offset:u64 index_offset:u64 crc32:u32 "MCSS"
//! ```
//!
//! Data blocks start right after the header. Each block spans a whole
//! multiple of `block_size` bytes; a pair is never split, so a block only
//! grows past one `block_size` when a single pair does not fit in it. Block
//! `i` ends where block `i + 1` (or the bloom section) begins. Inside a
//! block, a zero key length or fewer than four remaining bytes ends the run.
//! `crc32` is the IEEE CRC over the bloom and index sections.
//!
//! Tables are written to `<id>.sst.tmp` and published by rename.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use crate::bloom::{BloomFilter, DEFAULT_BITS_PER_KEY, DEFAULT_HASHES};
use crate::error::{Error, Result};
use crate::model::{PathKey, Reader, ValueRecord, DEFAULT_BLOCK_SIZE};

pub const MAGIC: &[u8; 4] = b"MCSS";
pub const FORMAT_VERSION: u8 = 0x01;
const HEADER_LEN: u64 = 5;
const FOOTER_LEN: u64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableOptions {
    pub block_size: usize,
    pub bloom_bits_per_key: usize,
    pub bloom_hashes: u8,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            block_size: DEFAULT_BLOCK_SIZE,
            bloom_bits_per_key: DEFAULT_BITS_PER_KEY,
            bloom_hashes: DEFAULT_HASHES,
        }
    }
}

/// `0000000042.sst`
pub fn table_file_name(file_id: u64) -> String {
    format!("{file_id:010}.sst")
}

/// Parses a file id back out of a table file name.
pub fn parse_table_file_name(name: &str) -> Option<u64> {
    let stem = name.strip_suffix(".sst")?;
    if stem.len() != 10 || !stem.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    stem.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub first_key: PathKey,
    pub offset: u64,
}

pub struct SsTable {
    file_id: u64,
    path: PathBuf,
    file: File,
    entry_count: u64,
    min_key: PathKey,
    max_key: PathKey,
    max_version: u64,
    index: Vec<IndexEntry>,
    bloom: BloomFilter,
    bloom_offset: u64,
}

impl fmt::Debug for SsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SsTable")
            .field("file_id", &self.file_id)
            .field("entry_count", &self.entry_count)
            .field("blocks", &self.index.len())
            .field("min_key", &self.min_key)
            .field("max_key", &self.max_key)
            .finish()
    }
}

/// Streams strictly increasing entries into a new table file.
pub struct TableBuilder {
    dir: PathBuf,
    file_id: u64,
    tmp_path: PathBuf,
    out: BufWriter<File>,
    opts: TableOptions,
    offset: u64,
    block_start: u64,
    block_capacity: u64,
    index: Vec<IndexEntry>,
    bloom: BloomFilter,
    last_key: Option<PathKey>,
}

impl TableBuilder {
    /// `expected_keys` sizes the bloom filter.
    pub fn new(
        dir: impl AsRef<Path>,
        file_id: u64,
        expected_keys: usize,
        opts: TableOptions,
    ) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let tmp_path = dir.join(format!("{}.tmp", table_file_name(file_id)));
        let mut out = BufWriter::new(File::create(&tmp_path)?);
        out.write_all(MAGIC)?;
        out.write_all(&[FORMAT_VERSION])?;
        Ok(TableBuilder {
            dir,
            file_id,
            tmp_path,
            out,
            opts,
            offset: HEADER_LEN,
            block_start: HEADER_LEN,
            block_capacity: 0,
            index: Vec::new(),
            bloom: BloomFilter::for_keys(expected_keys, opts.bloom_bits_per_key, opts.bloom_hashes),
            last_key: None,
        })
    }

    fn pad_block(&mut self) -> Result<()> {
        let end = self.block_start + self.block_capacity;
        let pad = end - self.offset;
        self.out.write_all(&vec![0u8; pad as usize])?;
        self.offset = end;
        Ok(())
    }

    pub fn add(&mut self, key: &PathKey, value: &ValueRecord) -> Result<()> {
        if let Some(last) = &self.last_key {
            if key <= last {
                return Err(Error::UnsortedInput);
            }
        }
        let value_bytes = value.encode();
        let pair_len = (8 + key.as_bytes().len() + value_bytes.len()) as u64;
        let used = self.offset - self.block_start;
        if self.index.is_empty() || used + pair_len > self.block_capacity {
            if !self.index.is_empty() {
                self.pad_block()?;
            }
            let bs = self.opts.block_size as u64;
            self.block_start = self.offset;
            self.block_capacity = pair_len.div_ceil(bs).max(1) * bs;
            self.index.push(IndexEntry {
                first_key: key.clone(),
                offset: self.offset,
            });
        }
        self.out
            .write_all(&(key.as_bytes().len() as u32).to_le_bytes())?;
        self.out.write_all(key.as_bytes())?;
        self.out
            .write_all(&(value_bytes.len() as u32).to_le_bytes())?;
        self.out.write_all(&value_bytes)?;
        self.offset += pair_len;
        self.bloom.add(key);
        self.last_key = Some(key.clone());
        Ok(())
    }

    /// Writes the trailing sections, fsyncs, and renames into place.
    pub fn finish(mut self) -> Result<SsTable> {
        if self.index.is_empty() {
            let _ = fs::remove_file(&self.tmp_path);
            return Err(Error::UnsortedInput);
        }
        self.pad_block()?;
        let bloom_offset = self.offset;
        let mut tail = Vec::new();
        self.bloom.encode_into(&mut tail);
        let index_offset = bloom_offset + tail.len() as u64;
        tail.extend_from_slice(&(self.index.len() as u32).to_le_bytes());
        for e in &self.index {
            tail.extend_from_slice(&(e.first_key.as_bytes().len() as u32).to_le_bytes());
            tail.extend_from_slice(e.first_key.as_bytes());
            tail.extend_from_slice(&e.offset.to_le_bytes());
        }
        let crc = crc32fast::hash(&tail);
        tail.extend_from_slice(&bloom_offset.to_le_bytes());
        tail.extend_from_slice(&index_offset.to_le_bytes());
        tail.extend_from_slice(&crc.to_le_bytes());
        tail.extend_from_slice(MAGIC);
        self.out.write_all(&tail)?;
        let file = self.out.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        drop(file);
        let path = self.dir.join(table_file_name(self.file_id));
        fs::rename(&self.tmp_path, &path)?;
        SsTable::open(path)
    }
}

/// Writes `entries` (strictly sorted, non-empty) as table `file_id` in `dir`.
pub fn build_sstable(
    dir: impl AsRef<Path>,
    file_id: u64,
    entries: &[(PathKey, ValueRecord)],
    opts: TableOptions,
) -> Result<SsTable> {
    if entries.is_empty() || entries.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::UnsortedInput);
    }
    let mut b = TableBuilder::new(dir, file_id, entries.len(), opts)?;
    for (k, v) in entries {
        b.add(k, v)?;
    }
    b.finish()
}

/// Result of a point lookup in one table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableGet {
    pub value: Option<ValueRecord>,
    pub blocks_read: u64,
}

impl SsTable {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_owned();
        let corrupt = |reason: &str| Error::CorruptTable {
            file: name.clone(),
            reason: reason.to_owned(),
        };
        let file_id = parse_table_file_name(&name).ok_or_else(|| corrupt("bad file name"))?;
        let file = File::open(&path)?;
        let len = file.metadata()?.len();
        if len < HEADER_LEN + FOOTER_LEN {
            return Err(corrupt("file too short"));
        }
        let mut header = [0u8; HEADER_LEN as usize];
        file.read_exact_at(&mut header, 0)?;
        if &header[..4] != MAGIC || header[4] != FORMAT_VERSION {
            return Err(corrupt("bad header"));
        }
        let footer_start = len - FOOTER_LEN;
        let mut footer = [0u8; FOOTER_LEN as usize];
        file.read_exact_at(&mut footer, footer_start)?;
        if &footer[20..] != MAGIC {
            return Err(corrupt("bad footer magic"));
        }
        let bloom_offset = u64::from_le_bytes(footer[0..8].try_into().unwrap());
        let index_offset = u64::from_le_bytes(footer[8..16].try_into().unwrap());
        let crc = u32::from_le_bytes(footer[16..20].try_into().unwrap());
        if !(HEADER_LEN <= bloom_offset
            && bloom_offset <= index_offset
            && index_offset <= footer_start)
        {
            return Err(corrupt("section offsets out of range"));
        }
        let mut tail = vec![0u8; (footer_start - bloom_offset) as usize];
        file.read_exact_at(&mut tail, bloom_offset)?;
        if crc32fast::hash(&tail) != crc {
            return Err(corrupt("checksum mismatch"));
        }
        let split = (index_offset - bloom_offset) as usize;
        let bloom = BloomFilter::from_bytes(&tail[..split]).map_err(|_| corrupt("bad bloom"))?;
        let index = decode_index(&tail[split..]).ok_or_else(|| corrupt("bad index"))?;
        let offsets_ok = !index.is_empty()
            && index[0].offset == HEADER_LEN
            && index
                .windows(2)
                .all(|w| w[0].offset < w[1].offset && w[0].first_key < w[1].first_key)
            && index.last().unwrap().offset < bloom_offset;
        if !offsets_ok {
            return Err(corrupt("inconsistent index"));
        }
        let mut table = SsTable {
            file_id,
            path,
            file,
            entry_count: 0,
            min_key: index[0].first_key.clone(),
            max_key: index[0].first_key.clone(),
            max_version: 0,
            index,
            bloom,
            bloom_offset,
        };
        // Full pass: validates every block and recovers the count, the
        // largest key, and the newest version.
        let mut count = 0;
        let mut max_version = 0;
        let mut last: Option<PathKey> = None;
        for i in 0..table.index.len() {
            let block = table.read_block(i)?;
            if block.first().map(|(k, _)| k) != Some(&table.index[i].first_key) {
                return Err(table.corrupt("block does not start with its index key"));
            }
            for (k, v) in block {
                if last.as_ref().is_some_and(|l| &k <= l) {
                    return Err(table.corrupt("keys out of order"));
                }
                count += 1;
                max_version = max_version.max(v.version);
                last = Some(k);
            }
        }
        table.entry_count = count;
        table.max_version = max_version;
        table.max_key = last.expect("non-empty index implies entries");
        Ok(table)
    }

    fn corrupt(&self, reason: &str) -> Error {
        Error::CorruptTable {
            file: table_file_name(self.file_id),
            reason: reason.to_owned(),
        }
    }

    pub fn file_id(&self) -> u64 {
        self.file_id
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn entry_count(&self) -> u64 {
        self.entry_count
    }

    pub fn min_key(&self) -> &PathKey {
        &self.min_key
    }

    pub fn max_key(&self) -> &PathKey {
        &self.max_key
    }

    pub fn max_version(&self) -> u64 {
        self.max_version
    }

    pub fn sparse_index(&self) -> &[IndexEntry] {
        &self.index
    }

    pub fn bloom(&self) -> &BloomFilter {
        &self.bloom
    }

    fn block_range(&self, i: usize) -> (u64, u64) {
        let start = self.index[i].offset;
        let end = self
            .index
            .get(i + 1)
            .map_or(self.bloom_offset, |e| e.offset);
        (start, end)
    }

    fn read_block(&self, i: usize) -> Result<Vec<(PathKey, ValueRecord)>> {
        let (start, end) = self.block_range(i);
        let mut buf = vec![0u8; (end - start) as usize];
        self.file.read_exact_at(&mut buf, start)?;
        decode_block(&buf).ok_or_else(|| self.corrupt("undecodable data block"))
    }

    /// Index of the only block that may hold `key`.
    fn block_for(&self, key: &PathKey) -> usize {
        self.index
            .partition_point(|e| &e.first_key <= key)
            .saturating_sub(1)
    }

    /// Point lookup: range check, bloom, then at most one block read.
    pub fn get(&self, key: &PathKey) -> Result<TableGet> {
        if key < &self.min_key || key > &self.max_key || !self.bloom.query(key) {
            return Ok(TableGet {
                value: None,
                blocks_read: 0,
            });
        }
        let block = self.read_block(self.block_for(key))?;
        let value = block
            .binary_search_by(|(k, _)| k.cmp(key))
            .ok()
            .map(|i| block[i].1.clone());
        Ok(TableGet {
            value,
            blocks_read: 1,
        })
    }

    /// All entries in key order.
    pub fn iter(&self) -> TableIter<'_> {
        TableIter {
            table: self,
            next_block: 0,
            buf: Vec::new().into_iter(),
            blocks_read: 0,
            failed: false,
        }
    }

    /// Entries whose encoded key starts with `prefix`, in key order.
    pub fn prefix_iter<'a>(
        &'a self,
        prefix: &'a [u8],
    ) -> impl Iterator<Item = Result<(PathKey, ValueRecord)>> + 'a {
        let bound = PathKey::seek_bound(prefix);
        let mut it = self.iter();
        if bound > self.max_key {
            it.next_block = self.index.len();
        } else {
            it.next_block = self.block_for(&bound);
        }
        it.skip_while(move |r| matches!(r, Ok((k, _)) if k.as_bytes() < prefix))
            .take_while(move |r| !matches!(r, Ok((k, _)) if !k.as_bytes().starts_with(prefix)))
    }

    pub fn entries(&self) -> Result<Vec<(PathKey, ValueRecord)>> {
        self.iter().collect()
    }
}

fn decode_block(buf: &[u8]) -> Option<Vec<(PathKey, ValueRecord)>> {
    let mut r = Reader::new(buf);
    let mut out = Vec::new();
    while r.remaining() >= 4 {
        let key_len = r.u32().ok()? as usize;
        if key_len == 0 {
            break;
        }
        let key = PathKey::from_encoded(r.take(key_len).ok()?).ok()?;
        let value = ValueRecord::decode(r.bytes().ok()?).ok()?;
        out.push((key, value));
    }
    if out.is_empty() {
        return None;
    }
    Some(out)
}

fn decode_index(buf: &[u8]) -> Option<Vec<IndexEntry>> {
    let mut r = Reader::new(buf);
    let count = r.u32().ok()? as usize;
    let mut out = Vec::with_capacity(count.min(buf.len() / 12));
    for _ in 0..count {
        let first_key = PathKey::from_encoded(r.bytes().ok()?).ok()?;
        let offset = r.u64().ok()?;
        out.push(IndexEntry { first_key, offset });
    }
    (r.remaining() == 0).then_some(out)
}

/// Sequential block-by-block iterator over a table.
pub struct TableIter<'a> {
    table: &'a SsTable,
    next_block: usize,
    buf: std::vec::IntoIter<(PathKey, ValueRecord)>,
    blocks_read: u64,
    failed: bool,
}

impl TableIter<'_> {
    pub fn blocks_read(&self) -> u64 {
        self.blocks_read
    }
}

impl Iterator for TableIter<'_> {
    type Item = Result<(PathKey, ValueRecord)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.failed {
                return None;
            }
            if let Some(e) = self.buf.next() {
                return Some(Ok(e));
            }
            if self.next_block >= self.table.index.len() {
                return None;
            }
            match self.table.read_block(self.next_block) {
                Ok(block) => {
                    self.next_block += 1;
                    self.blocks_read += 1;
                    self.buf = block.into_iter();
                }
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// K-way merge of `tables` into a new table `new_file_id`.
///
/// For equal keys the table with the highest file id wins. Tombstones are
/// dropped when `drop_tombstones` is set, which is only sound when the
/// inputs are the complete table set. Returns `None` when nothing survives.
pub fn merge_compact(
    dir: impl AsRef<Path>,
    tables: &[&SsTable],
    drop_tombstones: bool,
    new_file_id: u64,
    opts: TableOptions,
) -> Result<Option<SsTable>> {
    if tables.is_empty() {
        return Err(Error::InvalidConfig("merge of zero tables".into()));
    }
    if tables.iter().any(|t| t.file_id >= new_file_id) {
        return Err(Error::InvalidConfig(format!(
            "output file id {new_file_id} must exceed every input id"
        )));
    }
    let expected: u64 = tables.iter().map(|t| t.entry_count).sum();
    let mut iters: Vec<TableIter<'_>> = tables.iter().map(|t| t.iter()).collect();
    // Min-heap on key, then highest file id first.
    let mut heap = BinaryHeap::new();
    for (i, it) in iters.iter_mut().enumerate() {
        if let Some(r) = it.next() {
            let (k, v) = r?;
            heap.push(Reverse((
                k,
                Reverse(tables[i].file_id),
                i,
                VersionedValue(v),
            )));
        }
    }
    let mut builder: Option<TableBuilder> = None;
    while let Some(Reverse((key, _, i, VersionedValue(value)))) = heap.pop() {
        if let Some(r) = iters[i].next() {
            let (k, v) = r?;
            heap.push(Reverse((
                k,
                Reverse(tables[i].file_id),
                i,
                VersionedValue(v),
            )));
        }
        // Discard older copies of the same key.
        while heap.peek().is_some_and(|Reverse((k, ..))| *k == key) {
            let Reverse((_, _, j, _)) = heap.pop().unwrap();
            if let Some(r) = iters[j].next() {
                let (k, v) = r?;
                heap.push(Reverse((
                    k,
                    Reverse(tables[j].file_id),
                    j,
                    VersionedValue(v),
                )));
            }
        }
        if drop_tombstones && value.is_tombstone() {
            continue;
        }
        let b = match builder.as_mut() {
            Some(b) => b,
            None => builder.insert(TableBuilder::new(
                dir.as_ref(),
                new_file_id,
                expected as usize,
                opts,
            )?),
        };
        b.add(&key, &value)?;
    }
    builder.map(TableBuilder::finish).transpose()
}

/// Heap payload that never participates in ordering.
struct VersionedValue(ValueRecord);

impl PartialEq for VersionedValue {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl Eq for VersionedValue {}
impl PartialOrd for VersionedValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for VersionedValue {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FileType, InodeRecord};

    fn key(i: u64) -> PathKey {
        PathKey::new("/t", &format!("k{i:06}")).unwrap()
    }

    fn val(v: u64) -> ValueRecord {
        ValueRecord::inode(v, InodeRecord::new(v + 1, FileType::Regular, v * 3))
    }

    fn entries(n: u64) -> Vec<(PathKey, ValueRecord)> {
        (0..n).map(|i| (key(i), val(i))).collect()
    }

    #[test]
    fn file_names() {
        assert_eq!(table_file_name(42), "0000000042.sst");
        assert_eq!(parse_table_file_name("0000000042.sst"), Some(42));
        assert_eq!(parse_table_file_name("42.sst"), None);
        assert_eq!(parse_table_file_name("0000000042.sst.tmp"), None);
    }

    #[test]
    fn single_entry_single_block() {
        let dir = tempfile::tempdir().unwrap();
        let t = build_sstable(dir.path(), 1, &entries(1), TableOptions::default()).unwrap();
        assert_eq!(t.sparse_index().len(), 1);
        assert_eq!(t.entry_count(), 1);
        assert_eq!(t.min_key(), t.max_key());
    }

    #[test]
    fn unsorted_and_empty_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = entries(3);
        e.swap(0, 2);
        assert!(matches!(
            build_sstable(dir.path(), 1, &e, TableOptions::default()),
            Err(Error::UnsortedInput)
        ));
        let dup = vec![(key(1), val(1)), (key(1), val(2))];
        assert!(matches!(
            build_sstable(dir.path(), 1, &dup, TableOptions::default()),
            Err(Error::UnsortedInput)
        ));
        assert!(matches!(
            build_sstable(dir.path(), 1, &[], TableOptions::default()),
            Err(Error::UnsortedInput)
        ));
    }

    #[test]
    fn read_back_every_key_with_one_block() {
        let dir = tempfile::tempdir().unwrap();
        let e = entries(10_000);
        let t = build_sstable(dir.path(), 7, &e, TableOptions::default()).unwrap();
        assert!(t.sparse_index().len() > 1);
        for (k, v) in &e {
            let got = t.get(k).unwrap();
            assert_eq!(got.value.as_ref(), Some(v));
            assert_eq!(got.blocks_read, 1);
        }
        assert_eq!(t.entries().unwrap(), e);
    }

    #[test]
    fn out_of_range_and_bloom_rejected_lookups_read_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let e: Vec<_> = (100..200).map(|i| (key(i), val(i))).collect();
        let t = build_sstable(dir.path(), 1, &e, TableOptions::default()).unwrap();
        let below = t.get(&key(5)).unwrap();
        assert_eq!((below.value, below.blocks_read), (None, 0));
        let above = t.get(&key(500)).unwrap();
        assert_eq!((above.value, above.blocks_read), (None, 0));
        // In-range absent keys: any that the bloom rejects must cost nothing.
        let mut rejected = 0;
        for i in 0..1000 {
            let k = PathKey::new("/t", &format!("k{:06}x{i}", 150)).unwrap();
            let g = t.get(&k).unwrap();
            assert!(g.value.is_none());
            if !t.bloom().query(&k) {
                assert_eq!(g.blocks_read, 0);
                rejected += 1;
            } else {
                assert_eq!(g.blocks_read, 1);
            }
        }
        assert!(rejected > 900);
    }

    #[test]
    fn reopen_yields_identical_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let t = build_sstable(dir.path(), 3, &entries(2000), TableOptions::default()).unwrap();
        let r = SsTable::open(t.path()).unwrap();
        assert_eq!(r.sparse_index(), t.sparse_index());
        assert_eq!(r.bloom().to_bytes(), t.bloom().to_bytes());
        assert_eq!(r.entry_count(), 2000);
        assert_eq!(r.max_key(), &key(1999));
        assert_eq!(r.max_version(), 1999);
    }

    #[test]
    fn exact_layout() {
        let dir = tempfile::tempdir().unwrap();
        let opts = TableOptions {
            block_size: 64,
            bloom_bits_per_key: 10,
            bloom_hashes: 7,
        };
        let k = PathKey::new("/", "a").unwrap();
        let t = build_sstable(
            dir.path(),
            1,
            &[(k.clone(), ValueRecord::tombstone(9))],
            opts,
        )
        .unwrap();
        let bytes = fs::read(t.path()).unwrap();
        assert_eq!(&bytes[..5], b"MCSS\x01");
        // pair: 4 + 3 key bytes + 4 + 9 value bytes, padded to one 64-byte block
        assert_eq!(&bytes[5..9], &3u32.to_le_bytes());
        assert_eq!(&bytes[9..12], b"/\0a");
        assert_eq!(&bytes[12..16], &9u32.to_le_bytes());
        assert_eq!(bytes[16], 3);
        assert!(bytes[25..69].iter().all(|&b| b == 0));
        let bloom_off = 69u64;
        let n = bytes.len();
        assert_eq!(&bytes[n - 4..], b"MCSS");
        assert_eq!(&bytes[n - 24..n - 16], &bloom_off.to_le_bytes());
        // bloom: 64 bits minimum -> 8 bytes, plus m and k
        assert_eq!(&bytes[69..77], &64u64.to_le_bytes());
        assert_eq!(bytes[77], 7);
        let index_off = 69 + 9 + 8;
        assert_eq!(&bytes[n - 16..n - 8], &(index_off as u64).to_le_bytes());
        let crc = crc32fast::hash(&bytes[69..n - 24]);
        assert_eq!(&bytes[n - 8..n - 4], &crc.to_le_bytes());
        assert_eq!(&bytes[index_off..index_off + 4], &1u32.to_le_bytes());
    }

    #[test]
    fn oversized_pair_gets_its_own_extended_block() {
        let dir = tempfile::tempdir().unwrap();
        let big = ValueRecord::with_inline(
            2,
            InodeRecord::new(9, FileType::Regular, 4096),
            vec![7u8; 4096],
        );
        let e = vec![(key(0), val(0)), (key(1), big.clone()), (key(2), val(2))];
        let t = build_sstable(dir.path(), 1, &e, TableOptions::default()).unwrap();
        // The extended block has room left for the small pair after it.
        let idx = t.sparse_index();
        assert_eq!(idx.len(), 2);
        assert_eq!(idx[1].offset - idx[0].offset, 4096);
        assert_eq!(t.bloom_offset - idx[1].offset, 8192);
        assert_eq!(t.get(&key(1)).unwrap().value, Some(big));
        assert_eq!(t.entries().unwrap(), e);
    }

    #[test]
    fn checksum_mismatch_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let t = build_sstable(dir.path(), 1, &entries(50), TableOptions::default()).unwrap();
        let path = t.path().to_path_buf();
        drop(t);
        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 30] ^= 0xff;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            SsTable::open(&path),
            Err(Error::CorruptTable { .. })
        ));
    }

    #[test]
    fn prefix_iteration() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = Vec::new();
        for p in ["/a", "/a/b", "/ab", "/b"] {
            for i in 0..300 {
                e.push((PathKey::new(p, &format!("n{i:03}")).unwrap(), val(i)));
            }
        }
        e.sort_by(|a, b| a.0.cmp(&b.0));
        let t = build_sstable(dir.path(), 1, &e, TableOptions::default()).unwrap();
        for p in ["/a", "/a/b", "/ab", "/b", "/c", "/"] {
            let prefix = PathKey::dir_prefix(p).unwrap();
            let got: Vec<PathKey> = t.prefix_iter(&prefix).map(|r| r.unwrap().0).collect();
            let want: Vec<PathKey> = e
                .iter()
                .filter(|(k, _)| k.parent() == p)
                .map(|(k, _)| k.clone())
                .collect();
            assert_eq!(got, want, "prefix {p}");
        }
    }

    #[test]
    fn identity_merge() {
        let dir = tempfile::tempdir().unwrap();
        let e = entries(500);
        let t = build_sstable(dir.path(), 1, &e, TableOptions::default()).unwrap();
        let m = merge_compact(dir.path(), &[&t], false, 2, TableOptions::default())
            .unwrap()
            .unwrap();
        assert_eq!(m.entries().unwrap(), e);
    }

    #[test]
    fn newest_wins_and_tombstones() {
        let dir = tempfile::tempdir().unwrap();
        let old = build_sstable(
            dir.path(),
            1,
            &[(key(1), val(1)), (key(2), val(2)), (key(3), val(3))],
            TableOptions::default(),
        )
        .unwrap();
        let new = build_sstable(
            dir.path(),
            2,
            &[(key(1), val(10)), (key(3), ValueRecord::tombstone(11))],
            TableOptions::default(),
        )
        .unwrap();
        let kept = merge_compact(dir.path(), &[&old, &new], false, 3, TableOptions::default())
            .unwrap()
            .unwrap();
        assert_eq!(
            kept.entries().unwrap(),
            vec![
                (key(1), val(10)),
                (key(2), val(2)),
                (key(3), ValueRecord::tombstone(11))
            ]
        );
        let dropped = merge_compact(dir.path(), &[&new, &old], true, 4, TableOptions::default())
            .unwrap()
            .unwrap();
        assert_eq!(
            dropped.entries().unwrap(),
            vec![(key(1), val(10)), (key(2), val(2))]
        );
    }

    #[test]
    fn merge_of_only_tombstones_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let t = build_sstable(
            dir.path(),
            1,
            &[(key(1), ValueRecord::tombstone(1))],
            TableOptions::default(),
        )
        .unwrap();
        assert!(
            merge_compact(dir.path(), &[&t], true, 2, TableOptions::default())
                .unwrap()
                .is_none()
        );
        assert!(!dir.path().join(table_file_name(2)).exists());
    }

    #[test]
    fn merge_rejects_stale_output_id() {
        let dir = tempfile::tempdir().unwrap();
        let t = build_sstable(dir.path(), 5, &entries(3), TableOptions::default()).unwrap();
        assert!(merge_compact(dir.path(), &[&t], false, 5, TableOptions::default()).is_err());
    }
}
