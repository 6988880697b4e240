//! Write-ahead log for writes buffered in the MemTable.
//!
//! A log file is a bare sequence of frames, no header or footer:
//!
//! ```text
//! frame   := len:u32 crc32:u32 payload[len]
//! payload := seq:u64 key_len:u32 key value
//! ```
//!
//! `crc32` is the IEEE CRC of the payload. Replay keeps the longest prefix
//! of well-formed frames with consecutive sequence numbers starting at 1.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{PathKey, Reader, ValueRecord};

const FRAME_HEADER: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalRecord {
    pub seq: u64,
    pub key: PathKey,
    pub value: ValueRecord,
}

impl WalRecord {
    fn encode_payload(&self) -> Vec<u8> {
        let key = self.key.as_bytes();
        let mut out = Vec::with_capacity(12 + key.len() + 32);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&(key.len() as u32).to_le_bytes());
        out.extend_from_slice(key);
        self.value.encode_into(&mut out);
        out
    }

    fn decode_payload(payload: &[u8]) -> Result<Self> {
        let mut r = Reader::new(payload);
        let seq = r.u64()?;
        let key = PathKey::from_encoded(r.bytes()?)?;
        let value = ValueRecord::decode(r.take(r.remaining())?)?;
        Ok(WalRecord { seq, key, value })
    }

    /// The complete on-disk frame for this record.
    pub fn encode_frame(&self) -> Vec<u8> {
        let payload = self.encode_payload();
        let mut frame = Vec::with_capacity(FRAME_HEADER + payload.len());
        frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        frame.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        frame.extend_from_slice(&payload);
        frame
    }
}

/// An open log. Appends are buffered in memory until [`Wal::sync`].
pub struct Wal {
    path: PathBuf,
    file: File,
    pending: Vec<u8>,
    last_seq: u64,
}

impl Wal {
    /// Creates (or truncates) a log at `path`.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)?;
        Ok(Wal {
            path,
            file,
            pending: Vec::new(),
            last_seq: 0,
        })
    }

    /// Replays an existing log, cuts off any torn tail, and reopens it for
    /// appending after the last valid record.
    pub fn recover(path: impl AsRef<Path>) -> Result<(Self, Vec<WalRecord>)> {
        let path = path.as_ref().to_path_buf();
        let (records, valid_len) = replay_prefix(&path)?;
        let file = OpenOptions::new().append(true).open(&path)?;
        file.set_len(valid_len)?;
        file.sync_all()?;
        let last_seq = records.last().map_or(0, |r| r.seq);
        Ok((
            Wal {
                path,
                file,
                pending: Vec::new(),
                last_seq,
            },
            records,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn next_seq(&self) -> u64 {
        self.last_seq + 1
    }

    /// Buffers one framed record. Durable only after [`Wal::sync`].
    pub fn append(&mut self, rec: &WalRecord) -> Result<u64> {
        let expected = self.last_seq + 1;
        if rec.seq != expected {
            return Err(Error::SeqGap {
                expected,
                got: rec.seq,
            });
        }
        self.pending.extend_from_slice(&rec.encode_frame());
        self.last_seq = rec.seq;
        Ok(rec.seq)
    }

    /// Writes buffered frames and fsyncs the file.
    pub fn sync(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        self.file.write_all(&self.pending)?;
        self.file.sync_data()?;
        self.pending.clear();
        Ok(())
    }

    /// Drops unsynced frames, as a power loss would.
    pub fn discard_pending(&mut self) {
        self.pending.clear();
    }
}

impl Drop for Wal {
    fn drop(&mut self) {
        if !self.pending.is_empty() {
            let _ = self.file.write_all(&self.pending);
        }
    }
}

/// Reads the longest valid prefix of records from a log file.
pub fn replay(path: impl AsRef<Path>) -> Result<Vec<WalRecord>> {
    Ok(replay_prefix(path.as_ref())?.0)
}

fn replay_prefix(path: &Path) -> Result<(Vec<WalRecord>, u64)> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let (records, valid) = decode_frames(&buf);
    Ok((records, valid as u64))
}

/// Decodes frames from a byte buffer, returning the records and the byte
/// length of the valid prefix.
pub fn decode_frames(buf: &[u8]) -> (Vec<WalRecord>, usize) {
    let mut records = Vec::new();
    let mut pos = 0;
    while buf.len() - pos >= FRAME_HEADER {
        let len = u32::from_le_bytes(buf[pos..pos + 4].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(buf[pos + 4..pos + 8].try_into().unwrap());
        let start = pos + FRAME_HEADER;
        if len > buf.len() - start {
            break;
        }
        let payload = &buf[start..start + len];
        if crc32fast::hash(payload) != crc {
            break;
        }
        let Ok(rec) = WalRecord::decode_payload(payload) else {
            break;
        };
        if rec.seq != records.len() as u64 + 1 {
            break;
        }
        records.push(rec);
        pos = start + len;
    }
    (records, pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FileType, InodeRecord};

    fn rec(seq: u64) -> WalRecord {
        WalRecord {
            seq,
            key: PathKey::new("/d", &format!("f{seq}")).unwrap(),
            value: ValueRecord::inode(seq, InodeRecord::new(seq + 1, FileType::Regular, seq)),
        }
    }

    #[test]
    fn first_append_returns_one() {
        let dir = tempfile::tempdir().unwrap();
        let mut wal = Wal::create(dir.path().join("wal.log")).unwrap();
        assert_eq!(wal.append(&rec(1)).unwrap(), 1);
    }

    #[test]
    fn seq_gap_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut wal = Wal::create(dir.path().join("wal.log")).unwrap();
        wal.append(&rec(1)).unwrap();
        assert!(matches!(
            wal.append(&rec(5)),
            Err(Error::SeqGap {
                expected: 2,
                got: 5
            })
        ));
        assert!(matches!(wal.append(&rec(1)), Err(Error::SeqGap { .. })));
    }

    #[test]
    fn append_sync_replay_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wal.log");
        let mut wal = Wal::create(&path).unwrap();
        for s in 1..=3 {
            wal.append(&rec(s)).unwrap();
        }
        wal.sync().unwrap();
        let got = replay(&path).unwrap();
        assert_eq!(got, vec![rec(1), rec(2), rec(3)]);
    }

    #[test]
    fn empty_file_and_empty_sync() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wal.log");
        let mut wal = Wal::create(&path).unwrap();
        wal.sync().unwrap();
        assert!(replay(&path).unwrap().is_empty());
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 0);
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(replay(dir.path().join("nope")), Err(Error::Io(_))));
    }

    #[test]
    fn crash_after_sync_keeps_all() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wal.log");
        let mut wal = Wal::create(&path).unwrap();
        for s in 1..=10 {
            wal.append(&rec(s)).unwrap();
        }
        wal.sync().unwrap();
        wal.discard_pending();
        drop(wal);
        assert_eq!(replay(&path).unwrap().len(), 10);
    }

    #[test]
    fn crash_without_sync_recovers_a_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wal.log");
        let mut wal = Wal::create(&path).unwrap();
        for s in 1..=4 {
            wal.append(&rec(s)).unwrap();
        }
        wal.sync().unwrap();
        for s in 5..=10 {
            wal.append(&rec(s)).unwrap();
        }
        wal.discard_pending();
        drop(wal);
        let got = replay(&path).unwrap();
        assert!(got.len() <= 10);
        let expected: Vec<WalRecord> = (1..=got.len() as u64).map(rec).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn truncation_sweep_of_last_frame() {
        let mut full = Vec::new();
        let mut boundary = 0;
        for s in 1..=3 {
            if s == 3 {
                boundary = full.len();
            }
            full.extend_from_slice(&rec(s).encode_frame());
        }
        for cut in boundary..full.len() {
            let (got, valid) = decode_frames(&full[..cut]);
            assert_eq!(got, vec![rec(1), rec(2)], "cut at {cut}");
            assert_eq!(valid, boundary);
        }
        assert_eq!(decode_frames(&full).0.len(), 3);
    }

    #[test]
    fn corrupt_suffix_keeps_prefix() {
        let mut full = Vec::new();
        let mut offsets = Vec::new();
        for s in 1..=5 {
            offsets.push(full.len());
            full.extend_from_slice(&rec(s).encode_frame());
        }
        for (i, &off) in offsets.iter().enumerate() {
            for flip in off..full.len() {
                let mut bad = full.clone();
                bad[flip] ^= 0x5a;
                let (got, _) = decode_frames(&bad);
                assert!(got.len() >= i, "flip at {flip}");
                assert_eq!(&got[..i], &decode_frames(&full).0[..i]);
            }
        }
    }

    #[test]
    fn recover_truncates_torn_tail_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wal.log");
        let mut wal = Wal::create(&path).unwrap();
        wal.append(&rec(1)).unwrap();
        wal.append(&rec(2)).unwrap();
        wal.sync().unwrap();
        drop(wal);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(&rec(3).encode_frame()[..7]).unwrap();
        drop(f);

        let (mut wal, got) = Wal::recover(&path).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(wal.next_seq(), 3);
        wal.append(&rec(3)).unwrap();
        wal.sync().unwrap();
        assert_eq!(replay(&path).unwrap(), vec![rec(1), rec(2), rec(3)]);
    }
}
