//! KTEN1 binary tensor file format.
//!
//! Layout: ASCII magic `KTEN1\n`, one JSON header line
//! `{"row_dims":[...],"col_dims":[...]}`, then the entries as raw
//! little-endian IEEE-754 f64 in canonical order.

use super::EvenTensor;
use crate::error::{KronError, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8] = b"KTEN1\n";
const MAX_HEADER_BYTES: usize = 1 << 16;

#[derive(Serialize, Deserialize)]
struct Header {
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
}

pub fn write_kten1<W: Write>(w: W, tensor: &EvenTensor) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(MAGIC)?;
    let header = Header {
        row_dims: tensor.row_dims().to_vec(),
        col_dims: tensor.col_dims().to_vec(),
    };
    let line = serde_json::to_string(&header)
        .map_err(|e| KronError::Malformed(format!("header encode: {e}")))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    for v in tensor.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kten1<R: Read>(r: R) -> Result<EvenTensor> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(KronError::Malformed("bad KTEN1 magic".into()));
    }
    let mut line = Vec::new();
    let n = r
        .by_ref()
        .take(MAX_HEADER_BYTES as u64)
        .read_until(b'\n', &mut line)?;
    if n == 0 || line.last() != Some(&b'\n') {
        return Err(KronError::Malformed("missing KTEN1 header line".into()));
    }
    line.pop();
    let header: Header = serde_json::from_slice(&line)
        .map_err(|e| KronError::Malformed(format!("bad KTEN1 header: {e}")))?;
    if header.row_dims.is_empty()
        || header.row_dims.len() != header.col_dims.len()
        || header.row_dims.iter().chain(&header.col_dims).any(|&d| d == 0)
    {
        return Err(KronError::Malformed("invalid KTEN1 dimensions".into()));
    }
    let numel = header
        .row_dims
        .iter()
        .chain(&header.col_dims)
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| KronError::Malformed("KTEN1 dimensions overflow".into()))?;
    crate::error::check_dense_budget(numel as u64)?;
    let mut data = Vec::with_capacity(numel);
    let mut buf = [0u8; 8];
    for _ in 0..numel {
        r.read_exact(&mut buf).map_err(|_| {
            KronError::Malformed(format!("KTEN1 payload shorter than {numel} values"))
        })?;
        data.push(f64::from_le_bytes(buf));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(KronError::Malformed("trailing bytes after KTEN1 payload".into()));
    }
    EvenTensor::new(header.row_dims, header.col_dims, data)
}

pub fn write_kten1_file<P: AsRef<Path>>(path: P, tensor: &EvenTensor) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_kten1(f, tensor)
}

pub fn read_kten1_file<P: AsRef<Path>>(path: P) -> Result<EvenTensor> {
    let f = std::fs::File::open(path)?;
    read_kten1(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn round_trip_exact() {
        let mut s = Stream::new(1);
        let data: Vec<f64> = (0..36).map(|_| s.next_f64() * 10.0 - 5.0).collect();
        let t = EvenTensor::new(vec![2, 3], vec![3, 2], data).unwrap();
        let mut buf = Vec::new();
        write_kten1(&mut buf, &t).unwrap();
        assert!(buf.starts_with(b"KTEN1\n"));
        let back = read_kten1(buf.as_slice()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn rejects_truncated_payload() {
        let t = EvenTensor::constant(vec![2], vec![2], 1.5);
        let mut buf = Vec::new();
        write_kten1(&mut buf, &t).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            read_kten1(buf.as_slice()),
            Err(KronError::Malformed(_))
        ));
    }

    #[test]
    fn rejects_trailing_garbage_and_bad_magic() {
        let t = EvenTensor::constant(vec![2], vec![2], 1.5);
        let mut buf = Vec::new();
        write_kten1(&mut buf, &t).unwrap();
        buf.push(0);
        assert!(read_kten1(buf.as_slice()).is_err());
        assert!(read_kten1(&b"KTENX\n{}"[..]).is_err());
    }
}
