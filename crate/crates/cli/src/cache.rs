//! Binary dataset cache: magic, a version byte, shape header, then the
//! feature matrix (little-endian f64), the two binary vectors, split tags,
//! and optional standardization statistics.

use std::io::{Read, Write};
use std::path::Path;

use fairrep_core::dataset::{Dataset, SplitTag, Standardization};
use fairrep_core::matrix::Matrix;

use crate::{CliError, CliResult};

const MAGIC: &[u8; 4] = b"FRDS";
const VERSION: u8 = 1;

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialize the dataset; the byte stream is a pure function of the dataset.
pub fn encode(dataset: &Dataset) -> Vec<u8> {
    let n = dataset.len();
    let d = dataset.dim();
    let mut buf = Vec::with_capacity(16 + n * d * 8 + 3 * n);
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    put_u64(&mut buf, n as u64);
    put_u64(&mut buf, d as u64);
    put_f64s(&mut buf, dataset.x.data());
    buf.extend_from_slice(&dataset.s);
    buf.extend_from_slice(&dataset.y);
    for tag in &dataset.split {
        buf.push(match tag {
            SplitTag::Train => 0,
            SplitTag::Val => 1,
            SplitTag::Test => 2,
        });
    }
    match &dataset.standardization {
        None => buf.push(0),
        Some(st) => {
            buf.push(1);
            put_u64(&mut buf, st.mean.len() as u64);
            put_f64s(&mut buf, &st.mean);
            put_f64s(&mut buf, &st.std);
            put_u64(&mut buf, st.dropped_constant.len() as u64);
            for &j in &st.dropped_constant {
                put_u64(&mut buf, j as u64);
            }
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(CliError::user("dataset cache truncated"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> CliResult<Vec<f64>> {
        let raw = self.take(count * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(buf: &[u8]) -> CliResult<Dataset> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CliError::user("not a dataset cache (bad magic)"));
    }
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(CliError::user(format!(
            "dataset cache version {version}, expected {VERSION}"
        )));
    }
    let n = r.u64()? as usize;
    let d = r.u64()? as usize;
    let x = Matrix::from_vec(n, d, r.f64s(n * d)?)
        .map_err(|e| CliError::user(format!("cache: {e}")))?;
    let s = r.take(n)?.to_vec();
    let y = r.take(n)?.to_vec();
    let mut split = Vec::with_capacity(n);
    for &b in r.take(n)? {
        split.push(match b {
            0 => SplitTag::Train,
            1 => SplitTag::Val,
            2 => SplitTag::Test,
            other => return Err(CliError::user(format!("cache: bad split tag {other}"))),
        });
    }
    let standardization = match r.take(1)?[0] {
        0 => None,
        1 => {
            let k = r.u64()? as usize;
            let mean = r.f64s(k)?;
            let std = r.f64s(k)?;
            let nd = r.u64()? as usize;
            let mut dropped = Vec::with_capacity(nd);
            for _ in 0..nd {
                dropped.push(r.u64()? as usize);
            }
            Some(Standardization {
                mean,
                std,
                dropped_constant: dropped,
            })
        }
        other => return Err(CliError::user(format!("cache: bad flag {other}"))),
    };
    let mut dataset =
        Dataset::new(x, s, y).map_err(|e| CliError::user(format!("cache: {e}")))?;
    dataset.split = split;
    dataset.standardization = standardization;
    if !dataset.x.is_finite() {
        return Err(CliError::user("cache: non-finite feature values"));
    }
    Ok(dataset)
}

pub fn save(dataset: &Dataset, path: &Path) -> CliResult<()> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| CliError::user(format!("cannot write `{}`: {e}", path.display())))?;
    f.write_all(&encode(dataset))?;
    Ok(())
}

pub fn load(path: &Path) -> CliResult<Dataset> {
    let mut f = std::fs::File::open(path)
        .map_err(|e| CliError::user(format!("cannot open dataset `{}`: {e}", path.display())))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    decode(&buf)
}
