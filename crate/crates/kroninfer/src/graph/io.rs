//! Edge-list text format and the JSON sample sidecar.
//!
//! Edge files start with `#kron d=<d> m=<m> l=<l> K=<K> seed=<seed>`, then one
//! edge per line: either `i alpha j beta` (1-based node/layer quadruple) or,
//! in flat mode, `u v` (1-based flattened vertex-layer labels).

use super::{GraphSample, InitiatorParams, Permutation};
use crate::error::{check_dense_matrix, KronError, Result};
use crate::tensor::EvenTensor;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeListHeader {
    pub d: usize,
    pub m: usize,
    pub l: usize,
    pub k: u32,
    pub seed: u64,
}

impl EdgeListHeader {
    pub fn n(&self) -> usize {
        self.m.pow(self.k)
    }

    pub fn layers(&self) -> usize {
        self.l.pow(self.k)
    }
}

pub fn format_header(h: &EdgeListHeader) -> String {
    format!(
        "#kron d={} m={} l={} K={} seed={}",
        h.d, h.m, h.l, h.k, h.seed
    )
}

pub fn parse_header(line: &str) -> Result<EdgeListHeader> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("#kron") {
        return Err(KronError::Malformed(
            "edge list must start with a #kron header".into(),
        ));
    }
    let mut d = None;
    let mut m = None;
    let mut l = None;
    let mut k = None;
    let mut seed = None;
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| KronError::Malformed(format!("bad header field '{part}'")))?;
        match key {
            "d" => d = Some(value.parse::<usize>()),
            "m" => m = Some(value.parse::<usize>()),
            "l" => l = Some(value.parse::<usize>()),
            "K" => k = Some(value.parse::<u32>().map(|v| v as u64)),
            "seed" => seed = Some(value.parse::<u64>()),
            _ => return Err(KronError::Malformed(format!("unknown header field '{key}'"))),
        }
    }
    let get = |name: &str, v: Option<std::result::Result<usize, _>>| {
        v.ok_or_else(|| KronError::Malformed(format!("header missing {name}")))?
            .map_err(|_| KronError::Malformed(format!("header field {name} is not an integer")))
    };
    let header = EdgeListHeader {
        d: get("d", d)?,
        m: get("m", m)?,
        l: get("l", l)?,
        k: k.ok_or_else(|| KronError::Malformed("header missing K".into()))?
            .map_err(|_| KronError::Malformed("header field K is not an integer".into()))?
            as u32,
        seed: seed
            .ok_or_else(|| KronError::Malformed("header missing seed".into()))?
            .map_err(|_| KronError::Malformed("header field seed is not an integer".into()))?,
    };
    let expect_d = header
        .m
        .checked_pow(header.k)
        .zip(header.l.checked_pow(header.k))
        .map(|(n, ll)| n * ll);
    if expect_d != Some(header.d) {
        return Err(KronError::Malformed(format!(
            "header d={} is inconsistent with m={} l={} K={}",
            header.d, header.m, header.l, header.k
        )));
    }
    Ok(header)
}

/// Writes one edge line. `u`, `v` are 0-based flattened labels.
pub fn write_edge_line<W: Write>(
    w: &mut W,
    header: &EdgeListHeader,
    u: usize,
    v: usize,
    flat: bool,
) -> Result<()> {
    if flat {
        writeln!(w, "{} {}", u + 1, v + 1)?;
    } else {
        let n = header.n();
        let (i, alpha) = (u % n + 1, u / n + 1);
        let (j, beta) = (v % n + 1, v / n + 1);
        writeln!(w, "{i} {alpha} {j} {beta}")?;
    }
    Ok(())
}

/// Writes a dense sample as an edge list; returns the edge count.
pub fn write_edge_list<W: Write>(
    w: &mut W,
    sample: &GraphSample,
    header: &EdgeListHeader,
    flat: bool,
) -> Result<u64> {
    writeln!(w, "{}", format_header(header))?;
    let a = &sample.adjacency;
    let d = a.nrows();
    let mut count = 0;
    for c in 0..d {
        for r in 0..d {
            if a.entry(r, c) != 0.0 {
                write_edge_line(w, header, r, c, flat)?;
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Reads an edge list back into a dense adjacency tensor. Accepts both line
/// formats (detected per line by token count).
pub fn read_edge_list<R: BufRead>(r: R) -> Result<(EdgeListHeader, EvenTensor)> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| KronError::Malformed("empty edge list".into()))??;
    let header = parse_header(&first)?;
    let d = header.d;
    check_dense_matrix(d, d)?;
    let n = header.n();
    let layers = header.layers();
    let mut adjacency = EvenTensor::zeros(vec![n, layers], vec![n, layers]);
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        let parse = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| KronError::Malformed(format!("line {}: bad index '{s}'", lineno + 2)))
        };
        let (u, v) = match toks.len() {
            2 => (parse(toks[0])? - 1, parse(toks[1])? - 1),
            4 => {
                let (i, alpha, j, beta) = (
                    parse(toks[0])?,
                    parse(toks[1])?,
                    parse(toks[2])?,
                    parse(toks[3])?,
                );
                if i == 0 || j == 0 || alpha == 0 || beta == 0 || i > n || j > n
                    || alpha > layers || beta > layers
                {
                    return Err(KronError::Malformed(format!(
                        "line {}: edge indices out of range",
                        lineno + 2
                    )));
                }
                ((i - 1) + (alpha - 1) * n, (j - 1) + (beta - 1) * n)
            }
            _ => {
                return Err(KronError::Malformed(format!(
                    "line {}: expected 2 or 4 indices, got {}",
                    lineno + 2,
                    toks.len()
                )))
            }
        };
        if u >= d || v >= d {
            return Err(KronError::Malformed(format!(
                "line {}: flattened index out of range",
                lineno + 2
            )));
        }
        adjacency.set_entry(u, v, 1.0);
    }
    Ok((header, adjacency))
}

/// JSON sidecar carrying the sample metadata (and ground truth, when the
/// sample is synthetic).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMeta {
    pub d: usize,
    pub m: usize,
    pub l: usize,
    pub k: u32,
    pub seed: u64,
    /// 1-based target label of each vertex.
    pub permutation: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthMeta {
    pub p: f64,
    /// Row-major entries of mat(X).
    pub x_row_major: Vec<f64>,
}

impl SampleMeta {
    pub fn for_sample(sample: &GraphSample, m: usize, l: usize, k: u32) -> Self {
        SampleMeta {
            d: sample.adjacency.nrows(),
            m,
            l,
            k,
            seed: sample.seed,
            permutation: sample.permutation.map().iter().map(|&v| v as u64 + 1).collect(),
            truth: sample.truth.as_ref().map(|t| TruthMeta {
                p: t.p(),
                x_row_major: super::x_to_row_major(t.x()),
            }),
        }
    }

    pub fn permutation(&self) -> Result<Permutation> {
        let map: Vec<usize> = self
            .permutation
            .iter()
            .map(|&v| {
                (v as usize)
                    .checked_sub(1)
                    .ok_or_else(|| KronError::Malformed("permutation labels are 1-based".into()))
            })
            .collect::<Result<_>>()?;
        Permutation::from_map(map)
    }

    pub fn truth_params(&self) -> Result<Option<InitiatorParams>> {
        match &self.truth {
            None => Ok(None),
            Some(t) => {
                let x = super::x_from_row_major(self.m, self.l, &t.x_row_major)?;
                Ok(Some(InitiatorParams::new(t.p, x, self.k)?))
            }
        }
    }
}
