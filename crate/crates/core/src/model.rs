//! Inode metadata types, the ordered path key, and the binary value codec.
//!
//! The value codec is shared by the WAL and SSTable files. All integers are
//! fixed-width little-endian; variable fields carry a `u32` length prefix.
//!
//! ```text
//! value  := kind:u8 version:u64 body
//! body   := <empty>                       (TOMBSTONE)
//!         | inode                         (INODE)
//!         | inode len:u32 bytes           (INODE_WITH_INLINE_DATA)
//! inode  := ino:u64 type:u8 size:u64 uid:u32 gid:u32 mode:u16 nlink:u32 gen:u32
//!           acl_len:u32 acl
//!           xattr_count:u32 (name_len:u32 name value_len:u32 value)*
//!           block_count:u32 block:u64*
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_INLINE_THRESHOLD: usize = 4096;
pub const DEFAULT_BLOCK_SIZE: usize = 4096;

const TAG_INODE: u8 = 1;
const TAG_INODE_INLINE: u8 = 2;
const TAG_TOMBSTONE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FileType {
    Regular,
    Directory,
    Symlink,
}

impl FileType {
    fn to_byte(self) -> u8 {
        match self {
            FileType::Regular => 1,
            FileType::Directory => 2,
            FileType::Symlink => 3,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(FileType::Regular),
            2 => Some(FileType::Directory),
            3 => Some(FileType::Symlink),
            _ => None,
        }
    }
}

/// Per-file metadata. `acl` and `xattrs` are opaque payloads.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InodeRecord {
    pub inode_number: u64,
    pub file_type: FileType,
    pub size_bytes: u64,
    pub owner_uid: u32,
    pub group_gid: u32,
    pub permissions: u16,
    pub link_count: u32,
    pub generation: u32,
    pub acl: Vec<u8>,
    pub xattrs: Vec<(String, Vec<u8>)>,
    pub block_refs: Vec<u64>,
}

impl InodeRecord {
    /// A minimal live record with the given number, type and size.
    pub fn new(inode_number: u64, file_type: FileType, size_bytes: u64) -> Self {
        let (permissions, link_count) = match file_type {
            FileType::Directory => (0o755, 2),
            _ => (0o644, 1),
        };
        InodeRecord {
            inode_number,
            file_type,
            size_bytes,
            owner_uid: 0,
            group_gid: 0,
            permissions,
            link_count,
            generation: 0,
            acl: Vec::new(),
            xattrs: Vec::new(),
            block_refs: Vec::new(),
        }
    }

    pub fn is_dir(&self) -> bool {
        self.file_type == FileType::Directory
    }

    /// Checks the live-record invariants against the configured block size.
    pub fn validate(&self, block_size: usize) -> Result<()> {
        if self.inode_number == 0 {
            return Err(Error::InvalidRecord("inode_number must be > 0"));
        }
        if self.link_count == 0 {
            return Err(Error::InvalidRecord("link_count must be >= 1"));
        }
        if self.is_dir() && !self.size_bytes.is_multiple_of(block_size as u64) {
            return Err(Error::InvalidRecord(
                "directory size must be a multiple of the block size",
            ));
        }
        Ok(())
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.inode_number.to_le_bytes());
        out.push(self.file_type.to_byte());
        out.extend_from_slice(&self.size_bytes.to_le_bytes());
        out.extend_from_slice(&self.owner_uid.to_le_bytes());
        out.extend_from_slice(&self.group_gid.to_le_bytes());
        out.extend_from_slice(&self.permissions.to_le_bytes());
        out.extend_from_slice(&self.link_count.to_le_bytes());
        out.extend_from_slice(&self.generation.to_le_bytes());
        put_bytes(out, &self.acl);
        out.extend_from_slice(&(self.xattrs.len() as u32).to_le_bytes());
        for (name, value) in &self.xattrs {
            put_bytes(out, name.as_bytes());
            put_bytes(out, value);
        }
        out.extend_from_slice(&(self.block_refs.len() as u32).to_le_bytes());
        for b in &self.block_refs {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self> {
        let inode_number = r.u64()?;
        let file_type =
            FileType::from_byte(r.u8()?).ok_or(Error::CorruptValue("unknown file type"))?;
        let size_bytes = r.u64()?;
        let owner_uid = r.u32()?;
        let group_gid = r.u32()?;
        let permissions = r.u16()?;
        let link_count = r.u32()?;
        let generation = r.u32()?;
        let acl = r.bytes()?.to_vec();
        let xattr_count = r.u32()? as usize;
        let mut xattrs = Vec::with_capacity(xattr_count.min(r.remaining() / 8));
        for _ in 0..xattr_count {
            let name = std::str::from_utf8(r.bytes()?)
                .map_err(|_| Error::CorruptValue("xattr name is not UTF-8"))?
                .to_owned();
            let value = r.bytes()?.to_vec();
            xattrs.push((name, value));
        }
        let block_count = r.u32()? as usize;
        if block_count > r.remaining() / 8 {
            return Err(Error::CorruptValue("block list overruns buffer"));
        }
        let mut block_refs = Vec::with_capacity(block_count);
        for _ in 0..block_count {
            block_refs.push(r.u64()?);
        }
        Ok(InodeRecord {
            inode_number,
            file_type,
            size_bytes,
            owner_uid,
            group_gid,
            permissions,
            link_count,
            generation,
            acl,
            xattrs,
            block_refs,
        })
    }
}

/// Ordered key: parent directory path plus file name.
///
/// Encoded as `parent ++ 0x00 ++ name`; keys compare by their encoding, so
/// every child of one directory sorts contiguously. The root directory is
/// the key `("/", "")`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathKey {
    encoded: Vec<u8>,
}

impl PathKey {
    pub fn new(parent_path: &str, name: &str) -> Result<Self> {
        validate_parent(parent_path)?;
        if name.contains('/') || name.contains('\0') {
            return Err(Error::InvalidName(name.to_owned()));
        }
        if name.is_empty() && parent_path != "/" {
            return Err(Error::InvalidName(String::new()));
        }
        let mut encoded = Vec::with_capacity(parent_path.len() + 1 + name.len());
        encoded.extend_from_slice(parent_path.as_bytes());
        encoded.push(0);
        encoded.extend_from_slice(name.as_bytes());
        Ok(PathKey { encoded })
    }

    pub fn root() -> Self {
        PathKey {
            encoded: b"/\0".to_vec(),
        }
    }

    /// Splits an absolute normalized path like `/a/b/c` into `("/a/b", "c")`.
    pub fn from_path(path: &str) -> Result<Self> {
        if path == "/" {
            return Ok(Self::root());
        }
        validate_parent(path)?;
        let idx = path.rfind('/').expect("absolute path has a separator");
        let parent = if idx == 0 { "/" } else { &path[..idx] };
        PathKey::new(parent, &path[idx + 1..])
    }

    /// Rebuilds a key from its encoding, validating both halves.
    pub fn from_encoded(bytes: &[u8]) -> Result<Self> {
        let sep = bytes
            .iter()
            .position(|&b| b == 0)
            .ok_or(Error::CorruptValue("key has no separator"))?;
        let parent = std::str::from_utf8(&bytes[..sep])
            .map_err(|_| Error::CorruptValue("key parent is not UTF-8"))?;
        let name = std::str::from_utf8(&bytes[sep + 1..])
            .map_err(|_| Error::CorruptValue("key name is not UTF-8"))?;
        PathKey::new(parent, name)
    }

    /// A search bound ordering at `bytes`; not necessarily a valid key.
    pub(crate) fn seek_bound(bytes: &[u8]) -> Self {
        PathKey {
            encoded: bytes.to_vec(),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.encoded
    }

    fn sep(&self) -> usize {
        self.encoded
            .iter()
            .position(|&b| b == 0)
            .expect("encoded key always holds a separator")
    }

    pub fn parent(&self) -> &str {
        // Both halves were validated as UTF-8 on construction.
        std::str::from_utf8(&self.encoded[..self.sep()]).expect("validated")
    }

    pub fn name(&self) -> &str {
        std::str::from_utf8(&self.encoded[self.sep() + 1..]).expect("validated")
    }

    pub fn is_root(&self) -> bool {
        self.name().is_empty()
    }

    /// Full absolute path of the named entry.
    pub fn path(&self) -> String {
        match (self.parent(), self.name()) {
            (_, "") => "/".to_owned(),
            ("/", name) => format!("/{name}"),
            (parent, name) => format!("{parent}/{name}"),
        }
    }

    /// Number of path components; the root has depth 0.
    pub fn depth(&self) -> usize {
        if self.is_root() {
            0
        } else {
            path_depth(self.parent()) + 1
        }
    }

    /// Encoded prefix shared by every child of `parent_path`.
    pub fn dir_prefix(parent_path: &str) -> Result<Vec<u8>> {
        validate_parent(parent_path)?;
        let mut prefix = parent_path.as_bytes().to_vec();
        prefix.push(0);
        Ok(prefix)
    }
}

impl fmt::Debug for PathKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PathKey({:?}, {:?})", self.parent(), self.name())
    }
}

impl fmt::Display for PathKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path())
    }
}

/// Shorthand for [`PathKey::new`].
pub fn make_path_key(parent_path: &str, name: &str) -> Result<PathKey> {
    PathKey::new(parent_path, name)
}

fn validate_parent(p: &str) -> Result<()> {
    let ok = p.starts_with('/')
        && (p == "/" || !p.ends_with('/'))
        && !p.contains("//")
        && !p.contains('\0');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParent(p.to_owned()))
    }
}

fn path_depth(p: &str) -> usize {
    p.split('/').filter(|c| !c.is_empty()).count()
}

/// A directory entry: name within a parent mapped to a child inode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirEntry {
    pub key: PathKey,
    pub child_inode: u64,
}

impl DirEntry {
    pub fn new(key: PathKey, child_inode: u64) -> Result<Self> {
        if child_inode == 0 {
            return Err(Error::InvalidRecord("child_inode must be > 0"));
        }
        Ok(DirEntry { key, child_inode })
    }
}

/// A live entry as returned by lookups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaEntry {
    pub inode: InodeRecord,
    pub inline_data: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Inode,
    InodeWithInlineData,
    Tombstone,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueBody {
    Inode(InodeRecord),
    InodeWithInlineData(InodeRecord, Vec<u8>),
    Tombstone,
}

/// Stored value with the store-assigned version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueRecord {
    pub version: u64,
    pub body: ValueBody,
}

impl ValueRecord {
    pub fn inode(version: u64, inode: InodeRecord) -> Self {
        ValueRecord {
            version,
            body: ValueBody::Inode(inode),
        }
    }

    pub fn with_inline(version: u64, inode: InodeRecord, data: Vec<u8>) -> Self {
        ValueRecord {
            version,
            body: ValueBody::InodeWithInlineData(inode, data),
        }
    }

    pub fn tombstone(version: u64) -> Self {
        ValueRecord {
            version,
            body: ValueBody::Tombstone,
        }
    }

    pub fn from_entry(version: u64, entry: MetaEntry) -> Self {
        match entry.inline_data {
            Some(data) => Self::with_inline(version, entry.inode, data),
            None => Self::inode(version, entry.inode),
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self.body {
            ValueBody::Inode(_) => ValueKind::Inode,
            ValueBody::InodeWithInlineData(..) => ValueKind::InodeWithInlineData,
            ValueBody::Tombstone => ValueKind::Tombstone,
        }
    }

    pub fn is_tombstone(&self) -> bool {
        matches!(self.body, ValueBody::Tombstone)
    }

    /// The live entry, or `None` for a tombstone.
    pub fn entry(&self) -> Option<MetaEntry> {
        match &self.body {
            ValueBody::Inode(inode) => Some(MetaEntry {
                inode: inode.clone(),
                inline_data: None,
            }),
            ValueBody::InodeWithInlineData(inode, data) => Some(MetaEntry {
                inode: inode.clone(),
                inline_data: Some(data.clone()),
            }),
            ValueBody::Tombstone => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        let tag = match self.body {
            ValueBody::Inode(_) => TAG_INODE,
            ValueBody::InodeWithInlineData(..) => TAG_INODE_INLINE,
            ValueBody::Tombstone => TAG_TOMBSTONE,
        };
        out.push(tag);
        out.extend_from_slice(&self.version.to_le_bytes());
        match &self.body {
            ValueBody::Inode(inode) => inode.encode_into(out),
            ValueBody::InodeWithInlineData(inode, data) => {
                inode.encode_into(out);
                put_bytes(out, data);
            }
            ValueBody::Tombstone => {}
        }
    }

    /// Decodes exactly one value occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let tag = r.u8()?;
        let version = r.u64()?;
        let body = match tag {
            TAG_INODE => ValueBody::Inode(InodeRecord::decode_from(&mut r)?),
            TAG_INODE_INLINE => {
                let inode = InodeRecord::decode_from(&mut r)?;
                ValueBody::InodeWithInlineData(inode, r.bytes()?.to_vec())
            }
            TAG_TOMBSTONE => ValueBody::Tombstone,
            _ => return Err(Error::CorruptValue("unknown value tag")),
        };
        if r.remaining() != 0 {
            return Err(Error::CorruptValue("trailing bytes after value"));
        }
        Ok(ValueRecord { version, body })
    }
}

pub fn encode_value(v: &ValueRecord) -> Vec<u8> {
    v.encode()
}

pub fn decode_value(b: &[u8]) -> Result<ValueRecord> {
    ValueRecord::decode(b)
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

/// Bounds-checked little-endian cursor.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::CorruptValue("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn bytes(&mut self) -> Result<&'a [u8]> {
        let len = self.u32()? as usize;
        self.take(len)
    }
}
