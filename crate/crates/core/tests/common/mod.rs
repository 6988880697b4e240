//! Shared helpers for integration tests and the acceptance runner.
#![allow(dead_code)]

use std::path::Path;

use metacache::oracle::OracleMap;
use metacache::{FileType, InodeRecord, MetaEntry, PathKey, Store, StoreConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small store config that flushes often.
pub fn small_config(dir: &Path, threshold: u64, sync: bool) -> StoreConfig {
    let mut c = StoreConfig::new(dir);
    c.memtable_threshold_bytes = threshold;
    c.sync_every_write = sync;
    c
}

/// Fixed key universe: the root plus `dirs - 1` directories under it, each
/// holding up to `per_dir` names.
pub struct Universe {
    pub dirs: Vec<String>,
    pub keys: Vec<PathKey>,
}

impl Universe {
    pub fn new(dirs: usize, per_dir: usize) -> Self {
        let dirs: Vec<String> = std::iter::once("/".to_owned())
            .chain((1..dirs).map(|d| format!("/dir{d}")))
            .collect();
        let mut keys = Vec::new();
        for d in &dirs {
            for n in 0..per_dir {
                keys.push(PathKey::new(d, &format!("n{n}")).unwrap());
            }
        }
        Universe { dirs, keys }
    }

    pub fn pick(&self, rng: &mut ChaCha8Rng) -> PathKey {
        self.keys.choose(rng).unwrap().clone()
    }

    /// An absent key: a name outside the universe, in a universe directory.
    pub fn absent(&self, rng: &mut ChaCha8Rng) -> PathKey {
        let d = self.dirs.choose(rng).unwrap();
        PathKey::new(d, &format!("x{}", rng.gen::<u32>())).unwrap()
    }
}

/// A random valid file record and optional inline payload.
pub fn random_entry(rng: &mut ChaCha8Rng, ino: u64) -> (InodeRecord, Option<Vec<u8>>) {
    let mut inode = InodeRecord::new(ino, FileType::Regular, rng.gen_range(0..10_000));
    inode.owner_uid = rng.gen_range(0..5);
    inode.generation = rng.gen();
    if rng.gen_bool(0.2) {
        inode
            .xattrs
            .push(("user.tag".into(), vec![rng.gen(); rng.gen_range(0..20)]));
    }
    let inline = if rng.gen_bool(0.3) {
        let n = rng.gen_range(0..300);
        Some((0..n).map(|_| rng.gen()).collect())
    } else {
        None
    };
    (inode, inline)
}

pub fn put_both(
    store: &mut Store,
    oracle: &mut OracleMap,
    key: PathKey,
    entry: (InodeRecord, Option<Vec<u8>>),
) {
    store
        .put(key.clone(), entry.0.clone(), entry.1.clone())
        .unwrap();
    oracle.put(key, entry.0, entry.1);
}

/// Compares every key of the universe and every directory listing.
/// Returns the number of probes checked or a description of the first
/// disagreement.
pub fn check_all(store: &Store, oracle: &OracleMap, u: &Universe) -> Result<u64, String> {
    let mut probes = 0;
    for k in &u.keys {
        let got = store.get(k).map_err(|e| e.to_string())?.entry;
        if got.as_ref() != oracle.get(k) {
            return Err(format!("get {k}: store {got:?} oracle {:?}", oracle.get(k)));
        }
        probes += 1;
    }
    for d in &u.dirs {
        let got = store.scan_dir(d).map_err(|e| e.to_string())?;
        if got != oracle.scan_dir(d) {
            return Err(format!("scan {d} differs"));
        }
        probes += 1;
    }
    Ok(probes)
}

/// A byte-exact rendering of every get and scan over the universe.
pub fn sweep_bytes(store: &Store, u: &Universe) -> Vec<u8> {
    let mut out = Vec::new();
    let push_entry = |out: &mut Vec<u8>, e: Option<&MetaEntry>| match e {
        None => out.push(0),
        Some(e) => {
            out.push(1);
            out.extend(metacache::ValueRecord::from_entry(0, e.clone()).encode());
        }
    };
    for k in &u.keys {
        let e = store.get(k).unwrap().entry;
        push_entry(&mut out, e.as_ref());
    }
    for d in &u.dirs {
        for (name, inode) in store.scan_dir(d).unwrap() {
            out.extend(name.as_bytes());
            out.push(0);
            push_entry(
                &mut out,
                Some(&MetaEntry {
                    inode,
                    inline_data: None,
                }),
            );
        }
        out.push(0xff);
    }
    out
}
