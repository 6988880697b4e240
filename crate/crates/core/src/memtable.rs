//! The RAM-resident component: a sorted map with a byte-size flush threshold.

use std::collections::BTreeMap;
use std::ops::Bound;

use crate::model::{PathKey, ValueRecord};

pub const DEFAULT_THRESHOLD_BYTES: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Ok,
    ThresholdReached,
}

#[derive(Debug)]
pub struct MemTable {
    entries: BTreeMap<PathKey, ValueRecord>,
    approx_bytes: u64,
    threshold_bytes: u64,
}

/// Size charged for one entry: encoded key plus encoded value.
pub fn entry_size(key: &PathKey, value: &ValueRecord) -> u64 {
    (key.as_bytes().len() + value.encode().len()) as u64
}

impl MemTable {
    pub fn new(threshold_bytes: u64) -> Self {
        MemTable {
            entries: BTreeMap::new(),
            approx_bytes: 0,
            threshold_bytes,
        }
    }

    pub fn insert(&mut self, key: PathKey, value: ValueRecord) -> InsertOutcome {
        let added = entry_size(&key, &value);
        if let Some(old) = self.entries.get(&key) {
            self.approx_bytes -= entry_size(&key, old);
        }
        self.entries.insert(key, value);
        self.approx_bytes += added;
        if self.approx_bytes > self.threshold_bytes {
            InsertOutcome::ThresholdReached
        } else {
            InsertOutcome::Ok
        }
    }

    pub fn get(&self, key: &PathKey) -> Option<&ValueRecord> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn approx_bytes(&self) -> u64 {
        self.approx_bytes
    }

    pub fn threshold_bytes(&self) -> u64 {
        self.threshold_bytes
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PathKey, &ValueRecord)> {
        self.entries.iter()
    }

    /// Entries whose encoded key starts with `prefix`, in key order.
    pub fn prefix_iter<'a>(
        &'a self,
        prefix: &'a [u8],
    ) -> impl Iterator<Item = (&'a PathKey, &'a ValueRecord)> + 'a {
        self.entries
            .range((
                Bound::Included(PathKey::seek_bound(prefix)),
                Bound::Unbounded,
            ))
            .take_while(move |(k, _)| k.as_bytes().starts_with(prefix))
    }

    /// Consumes the table, yielding its entries in key order.
    pub fn freeze(self) -> Vec<(PathKey, ValueRecord)> {
        self.entries.into_iter().collect()
    }
}
