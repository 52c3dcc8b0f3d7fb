//! JSON-lines persistence for central values.
//!
//! The first line is a header `{"format": "lvalues", "version": 1}`; every
//! further line is one record `{p, n, char_index, re_L, im_L, method, accuracy}`.
//! A table for `(p, n, method)` is reused when every index is present, and
//! otherwise recomputed and appended.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::characters::UnitGroup;
use crate::error::{Error, Result};

use super::{LValueTable, Method};

pub const STORE_VERSION: u32 = 1;

/// Absolute accuracy recorded with each value.
pub const RECORDED_ACCURACY: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub p: u64,
    pub n: u32,
    pub char_index: u64,
    #[serde(rename = "re_L")]
    pub re_l: f64,
    #[serde(rename = "im_L")]
    pub im_l: f64,
    pub method: Method,
    pub accuracy: f64,
}

type Key = (u64, u32, Method);

#[derive(Debug)]
pub struct LValueStore {
    path: PathBuf,
    records: BTreeMap<(u64, u32, u8), BTreeMap<u64, Complex64>>,
}

fn method_tag(m: Method) -> u8 {
    match m {
        Method::Hurwitz => 0,
        Method::Afe => 1,
    }
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Cache(e.to_string())
}

impl LValueStore {
    /// Opens (or creates) the store. A file with a different format version is
    /// discarded.
    pub fn open(path: &Path) -> Result<Self> {
        let mut store = Self {
            path: path.to_path_buf(),
            records: BTreeMap::new(),
        };
        if path.exists() {
            let file = fs::File::open(path).map_err(io_err)?;
            let mut lines = BufReader::new(file).lines();
            let header_ok = match lines.next() {
                Some(Ok(line)) => serde_json::from_str::<Header>(&line)
                    .map(|h| h.format == "lvalues" && h.version == STORE_VERSION)
                    .unwrap_or(false),
                _ => false,
            };
            if header_ok {
                for line in lines {
                    let line = line.map_err(io_err)?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let rec: Record = serde_json::from_str(&line).map_err(io_err)?;
                    store
                        .records
                        .entry((rec.p, rec.n, method_tag(rec.method)))
                        .or_default()
                        .insert(rec.char_index, Complex64::new(rec.re_l, rec.im_l));
                }
                return Ok(store);
            }
            fs::remove_file(path).map_err(io_err)?;
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        let header = Header {
            format: "lvalues".into(),
            version: STORE_VERSION,
        };
        let mut f = fs::File::create(path).map_err(io_err)?;
        writeln!(f, "{}", serde_json::to_string(&header).map_err(io_err)?).map_err(io_err)?;
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn count(&self, key: Key) -> usize {
        self.records
            .get(&(key.0, key.1, method_tag(key.2)))
            .map_or(0, |m| m.len())
    }

    /// The stored table when complete, otherwise a fresh computation that is
    /// appended to the file.
    pub fn table(&mut self, group: &UnitGroup, method: Method) -> Result<LValueTable> {
        let modulus = *group.modulus();
        let key = (modulus.p(), modulus.n(), method_tag(method));
        let phi = modulus.phi();
        if let Some(map) = self.records.get(&key) {
            if map.len() as u64 == phi {
                let values = map.values().copied().collect();
                return LValueTable::from_values(modulus, method, values);
            }
        }
        let table = LValueTable::compute(group, method);
        let existing = self.records.entry(key).or_default();
        let mut f = OpenOptions::new().append(true).open(&self.path).map_err(io_err)?;
        for (idx, v) in table.values().iter().enumerate() {
            let idx = idx as u64;
            if existing.contains_key(&idx) {
                continue;
            }
            let rec = Record {
                p: modulus.p(),
                n: modulus.n(),
                char_index: idx,
                re_l: v.re,
                im_l: v.im,
                method,
                accuracy: RECORDED_ACCURACY,
            };
            writeln!(f, "{}", serde_json::to_string(&rec).map_err(io_err)?).map_err(io_err)?;
            existing.insert(idx, *v);
        }
        Ok(table)
    }
}
