//! An LSM-tree backed cache for filesystem inode metadata.
//!
//! The storage engine ([`store`]) buffers writes in a [`memtable`] made
//! durable by a [`wal`], and flushes them into immutable, bloom-filtered
//! [`sstable`]s that are merged by full compaction. A boot-time warm load
//! pulls every live record into RAM and keeps it in step with later writes. The [`vfs`] module drives the
//! store through a simulated VFS lookup pipeline with a counted disk model,
//! [`workload`] generates and replays metadata-heavy traces, and [`report`]
//! renders the replay costs as strace-style tables.

pub mod bloom;
pub mod error;
pub mod memtable;
pub mod model;
pub mod oracle;
pub mod report;
pub mod sstable;
pub mod store;
pub mod vfs;
pub mod wal;
pub mod workload;

pub use error::{Error, Result};
pub use model::{make_path_key, DirEntry, FileType, InodeRecord, MetaEntry, PathKey, ValueRecord};
pub use store::{GetCost, Lookup, Store, StoreConfig};
