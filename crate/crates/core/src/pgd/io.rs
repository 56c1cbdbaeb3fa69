//! Tensor container: little-endian binary payload plus a JSON sidecar.
//!
//! Binary layout: magic `RPGDTEN1`, then u64 n, p, K, M, then p axis sizes
//! (u64), then for each term the n×K block column-major followed by its p
//! factor tables, all as f64.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::tensor::{CanonicalTensor, RankOne};
use crate::error::{Error, Result};
use crate::provenance::Provenance;

const MAGIC: &[u8; 8] = b"RPGDTEN1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub provenance: Provenance,
    pub n: usize,
    pub p: usize,
    pub k_cols: usize,
    pub rank: usize,
    pub axis_sizes: Vec<usize>,
    pub objective_history: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

impl TensorMeta {
    pub fn describe(t: &CanonicalTensor, provenance: Provenance) -> Self {
        TensorMeta {
            provenance,
            n: t.n(),
            p: t.p(),
            k_cols: t.k_cols(),
            rank: t.rank(),
            axis_sizes: t.sizes().to_vec(),
            objective_history: Vec::new(),
            seeds: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }
}

/// Sidecar path: `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode(t: &CanonicalTensor) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [t.n(), t.p(), t.k_cols(), t.rank()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &s in t.sizes() {
        out.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for term in t.terms() {
        for x in term.block.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for f in &term.factors {
            for x in f {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<CanonicalTensor> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if cur.take(8)? != MAGIC {
        return Err(Error::parse(path, "not a tensor container (bad magic)"));
    }
    let n = cur.u64()? as usize;
    let p = cur.u64()? as usize;
    let k = cur.u64()? as usize;
    let m = cur.u64()? as usize;
    let sizes = (0..p).map(|_| cur.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let per_term = n
        .checked_mul(k)
        .and_then(|b| b.checked_add(sizes.iter().sum()))
        .ok_or_else(|| Error::parse(path, "header sizes overflow"))?;
    if per_term.checked_mul(m).map(|t| t * 8) != Some(bytes.len() - cur.pos) {
        return Err(Error::parse(path, "payload length does not match header"));
    }
    let mut t = CanonicalTensor::zeros(n, k, sizes.clone());
    for _ in 0..m {
        let block = DMatrix::from_iterator(n, k, (0..n * k).map(|_| cur.f64().expect("length checked")));
        let factors = sizes
            .iter()
            .map(|&s| (0..s).map(|_| cur.f64().expect("length checked")).collect())
            .collect();
        t.push(RankOne { block, factors })?;
    }
    Ok(t)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::parse(self.path, "truncated tensor container"));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn write_tensor(path: &Path, t: &CanonicalTensor, meta: &TensorMeta) -> Result<()> {
    fs::write(path, encode(t)).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(meta)?;
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

pub fn read_tensor(path: &Path) -> Result<(CanonicalTensor, Option<TensorMeta>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let t = decode(&bytes, path)?;
    let side = sidecar_path(path);
    let meta = if side.exists() {
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };
    Ok((t, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let mut t = CanonicalTensor::zeros(3, 2, vec![2, 4]);
        t.push(RankOne {
            block: DMatrix::from_fn(3, 2, |i, j| i as f64 - 0.5 * j as f64),
            factors: vec![vec![1.0, -1.0], vec![0.1, 0.2, 0.3, 0.4]],
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.tensor");
        let mut meta = TensorMeta::describe(&t, Provenance::library());
        meta.objective_history = vec![1.0, 0.5];
        write_tensor(&p, &t, &meta).unwrap();
        let (back, m) = read_tensor(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(m.unwrap(), meta);

        let mut bytes = encode(&t);
        bytes.pop();
        assert!(decode(&bytes, &p).is_err());
        assert!(decode(b"nonsense", &p).is_err());
    }
}
