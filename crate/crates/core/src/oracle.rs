//! Brute-force reference models for differential testing.
//!
//! [`OracleMap`] is a flat ordered map with the store's key/value contract
//! and none of its machinery. [`ListLru`] is an LRU kept as a plain vector.
//! Neither is used on any production path.

use std::collections::BTreeMap;

use crate::model::{InodeRecord, MetaEntry, PathKey};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOp {
    Put(PathKey, MetaEntry),
    Delete(PathKey),
}

#[derive(Debug, Clone, Default)]
pub struct OracleMap {
    map: BTreeMap<PathKey, MetaEntry>,
}

impl OracleMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn apply(&mut self, op: OracleOp) {
        match op {
            OracleOp::Put(k, v) => {
                self.map.insert(k, v);
            }
            OracleOp::Delete(k) => {
                self.map.remove(&k);
            }
        }
    }

    pub fn put(&mut self, key: PathKey, inode: InodeRecord, inline_data: Option<Vec<u8>>) {
        self.apply(OracleOp::Put(key, MetaEntry { inode, inline_data }));
    }

    pub fn delete(&mut self, key: PathKey) {
        self.apply(OracleOp::Delete(key));
    }

    pub fn get(&self, key: &PathKey) -> Option<&MetaEntry> {
        self.map.get(key)
    }

    /// Children of `parent` sorted by name. Filters the whole map.
    pub fn scan_dir(&self, parent: &str) -> Vec<(String, InodeRecord)> {
        let mut out: Vec<(String, InodeRecord)> = self
            .map
            .iter()
            .filter(|(k, _)| k.parent() == parent && !k.is_root())
            .map(|(k, v)| (k.name().to_owned(), v.inode.clone()))
            .collect();
        out.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
        out
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PathKey, &MetaEntry)> {
        self.map.iter()
    }
}

/// LRU as a vector ordered most-recent first.
#[derive(Debug, Clone)]
pub struct ListLru<K, V> {
    capacity: usize,
    items: Vec<(K, V)>,
}

impl<K: PartialEq + Clone, V: Clone> ListLru<K, V> {
    pub fn new(capacity: usize) -> Self {
        ListLru {
            capacity,
            items: Vec::new(),
        }
    }

    pub fn get(&mut self, key: &K) -> Option<V> {
        let pos = self.items.iter().position(|(k, _)| k == key)?;
        let item = self.items.remove(pos);
        let v = item.1.clone();
        self.items.insert(0, item);
        Some(v)
    }

    pub fn put(&mut self, key: K, value: V) {
        if self.capacity == 0 {
            return;
        }
        if let Some(pos) = self.items.iter().position(|(k, _)| *k == key) {
            self.items.remove(pos);
        }
        self.items.insert(0, (key, value));
        self.items.truncate(self.capacity);
    }

    pub fn remove(&mut self, key: &K) {
        self.items.retain(|(k, _)| k != key);
    }

    /// Keys from most to least recently used.
    pub fn keys(&self) -> Vec<K> {
        self.items.iter().map(|(k, _)| k.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FileType;
    use rand::{Rng, SeedableRng};
    use std::collections::HashSet;

    fn key(p: &str, n: &str) -> PathKey {
        PathKey::new(p, n).unwrap()
    }

    fn ino(i: u64) -> InodeRecord {
        InodeRecord::new(i, FileType::Regular, 0)
    }

    #[test]
    fn put_get_delete() {
        let mut o = OracleMap::new();
        assert!(o.get(&key("/", "a")).is_none());
        assert!(o.scan_dir("/").is_empty());
        o.put(key("/", "a"), ino(2), None);
        assert_eq!(o.get(&key("/", "a")).unwrap().inode, ino(2));
        o.delete(key("/", "a"));
        assert!(o.get(&key("/", "a")).is_none());
    }

    #[test]
    fn scan_sorts_by_name() {
        let mut o = OracleMap::new();
        o.put(key("/p", "c"), ino(3), None);
        o.put(key("/p", "a"), ino(2), None);
        o.put(key("/q", "b"), ino(4), None);
        let names: Vec<String> = o.scan_dir("/p").into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["a", "c"]);
    }

    #[test]
    fn size_equals_distinct_live_keys() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut o = OracleMap::new();
        let mut log = Vec::new();
        for i in 0..2000 {
            let k = key("/d", &format!("k{}", rng.gen_range(0..100)));
            let put = rng.gen_bool(0.7);
            log.push((k.clone(), put));
            if put {
                o.put(k, ino(i + 1), None);
            } else {
                o.delete(k);
            }
        }
        // Recount by replaying the log into a set.
        let mut live = HashSet::new();
        for (k, put) in log {
            if put {
                live.insert(k);
            } else {
                live.remove(&k);
            }
        }
        assert_eq!(o.len(), live.len());
    }

    #[test]
    fn list_lru_evicts_least_recent() {
        let mut l = ListLru::new(2);
        l.put(1, 'a');
        l.put(2, 'b');
        assert_eq!(l.get(&1), Some('a'));
        l.put(3, 'c');
        assert_eq!(l.keys(), [3, 1]);
        assert_eq!(l.get(&2), None);
        let mut z: ListLru<u8, u8> = ListLru::new(0);
        z.put(1, 1);
        assert!(z.is_empty());
    }
}
