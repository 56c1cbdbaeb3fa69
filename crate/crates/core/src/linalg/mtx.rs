//! Matrix Market coordinate files and plain vector files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::sparse::CscMatrix;
use crate::error::{Error, Result};
use crate::provenance::Provenance;

/// Writes `m` in coordinate real format. Symmetric-flagged matrices are
/// written as `symmetric` (lower triangle only).
pub fn write_mtx(path: &Path, m: &CscMatrix, prov: &Provenance) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let sym = m.is_symmetric();
    let entries: Vec<(usize, usize, f64)> = m.iter().filter(|&(i, j, _)| !sym || i >= j).collect();
    let body = (|| -> std::io::Result<()> {
        writeln!(
            w,
            "%%MatrixMarket matrix coordinate real {}",
            if sym { "symmetric" } else { "general" }
        )?;
        w.write_all(prov.comment_lines("% ").as_bytes())?;
        writeln!(w, "{} {} {}", m.n_rows(), m.n_cols(), entries.len())?;
        for (i, j, v) in entries {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
        w.flush()
    })();
    body.map_err(|e| Error::io(path, e))
}

pub fn read_mtx(path: &Path) -> Result<CscMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let banner = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty file"))?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_lowercase).collect();
    if words.len() < 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(Error::parse(path, "missing %%MatrixMarket matrix banner"));
    }
    if words[2] != "coordinate" {
        return Err(Error::parse(path, "only coordinate format is supported"));
    }
    if words[3] != "real" && words[3] != "integer" {
        return Err(Error::parse(path, format!("unsupported field `{}`", words[3])));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        s => return Err(Error::parse(path, format!("unsupported symmetry `{s}`"))),
    };
    let mut data = lines.filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let size = data
        .next()
        .ok_or_else(|| Error::parse(path, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, format!("bad size line: {e}")))?;
    let [nr, nc, nnz] = dims[..] else {
        return Err(Error::parse(path, "size line needs three integers"));
    };
    let mut trip = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    let mut count = 0;
    for line in data {
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), Some(c)) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(path, format!("bad entry line `{line}`")));
        };
        let i: usize = a.parse().map_err(|_| Error::parse(path, format!("bad row `{a}`")))?;
        let j: usize = b.parse().map_err(|_| Error::parse(path, format!("bad column `{b}`")))?;
        let v: f64 = c.parse().map_err(|_| Error::parse(path, format!("bad value `{c}`")))?;
        if i == 0 || j == 0 || i > nr || j > nc {
            return Err(Error::parse(path, format!("entry ({i}, {j}) out of bounds")));
        }
        trip.push((i - 1, j - 1, v));
        if symmetric && i != j {
            trip.push((j - 1, i - 1, v));
        }
        count += 1;
    }
    if count != nnz {
        return Err(Error::parse(path, format!("expected {nnz} entries, found {count}")));
    }
    let mut m = CscMatrix::from_triplets(nr, nc, &trip)?;
    if symmetric {
        m.set_symmetric_unchecked(true);
    }
    Ok(m)
}

/// One value per line, after `#` provenance comments.
pub fn write_vector_text(path: &Path, v: &[f64], prov: &Provenance) -> Result<()> {
    let mut s = prov.comment_lines("# ");
    for x in v {
        s.push_str(&format!("{x:e}\n"));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_vector_text(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with('%'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::parse(path, format!("bad value `{l}`")))
        })
        .collect()
}

/// Raw little-endian f64 values, no header.
pub fn write_vector_bin(path: &Path, v: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_vector_bin(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::parse(path, "length is not a multiple of 8 bytes"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Dispatches on extension: `.bin` is binary, anything else text.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    if path.extension().is_some_and(|e| e == "bin") {
        read_vector_bin(path)
    } else {
        read_vector_text(path)
    }
}

pub fn write_vector(path: &Path, v: &[f64], prov: &Provenance) -> Result<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        write_vector_bin(path, v)
    } else {
        write_vector_text(path, v, prov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let general = CscMatrix::from_triplets(3, 2, &[(0, 0, 1.0 / 3.0), (2, 1, -2.5e-17), (1, 0, 4.0)]).unwrap();
        let p = dir.path().join("g.mtx");
        write_mtx(&p, &general, &Provenance::library()).unwrap();
        assert_eq!(read_mtx(&p).unwrap(), general);

        let sym = CscMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 0.1), (1, 0, 0.1), (1, 1, 3.0)])
            .unwrap()
            .into_symmetric()
            .unwrap();
        let p = dir.path().join("s.mtx");
        write_mtx(&p, &sym, &Provenance::library()).unwrap();
        let back = read_mtx(&p).unwrap();
        assert!(back.is_symmetric());
        assert_eq!(back.to_dense(), sym.to_dense());

        let v = vec![1.0, -0.1, std::f64::consts::PI, 1e-300];
        for name in ["v.txt", "v.bin"] {
            let p = dir.path().join(name);
            write_vector(&p, &v, &Provenance::library()).unwrap();
            assert_eq!(read_vector(&p).unwrap(), v);
        }
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.mtx");
        fs::write(&p, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n").unwrap();
        assert!(matches!(read_mtx(&p), Err(Error::Parse { .. })));
        fs::write(&p, "hello\n").unwrap();
        assert!(matches!(read_mtx(&p), Err(Error::Parse { .. })));
        assert!(matches!(read_mtx(&dir.path().join("missing.mtx")), Err(Error::Io { .. })));
    }
}
