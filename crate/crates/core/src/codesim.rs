//! Cached pairwise distances between encoded fragments.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::corpus::{Corpus, Granularity};
use crate::embed::{euclidean, parse_num};
use crate::error::{Error, Result};
use crate::rae::EncoderParams;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    pub granularity: Granularity,
    pub keys: Vec<String>,
    /// Row-major m×m distances.
    distances: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

/// Root encoding of the fragment stored under `key`.
pub fn encode_fragment(key: &str, corpus: &Corpus, params: &EncoderParams) -> Result<Vec<f64>> {
    let entry = corpus
        .get(key)
        .ok_or_else(|| Error::UnknownKey(key.to_string()))?;
    params.encode_tokens(&entry.tokens)
}

pub fn build_table(corpus: &Corpus, params: &EncoderParams) -> Result<SimilarityTable> {
    let mut keys = Vec::with_capacity(corpus.len());
    let mut encodings = Vec::with_capacity(corpus.len());
    for e in &corpus.entries {
        keys.push(e.key.clone());
        encodings.push(params.encode_tokens(&e.tokens)?);
    }
    Ok(SimilarityTable::from_encodings(corpus.granularity, keys, &encodings))
}

impl SimilarityTable {
    pub fn from_encodings(
        granularity: Granularity,
        keys: Vec<String>,
        encodings: &[Vec<f64>],
    ) -> SimilarityTable {
        let m = keys.len();
        let mut distances = vec![0.0; m * m];
        for i in 0..m {
            for j in i + 1..m {
                let d = euclidean(&encodings[i], &encodings[j]);
                distances[i * m + j] = d;
                distances[j * m + i] = d;
            }
        }
        let neighbors = (0..m)
            .map(|i| {
                let mut others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
                others.sort_by(|&a, &b| {
                    distances[i * m + a]
                        .total_cmp(&distances[i * m + b])
                        .then_with(|| keys[a].cmp(&keys[b]))
                });
                others
            })
            .collect();
        let index = keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        SimilarityTable {
            granularity,
            keys,
            distances,
            neighbors,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    fn idx(&self, key: &str) -> Result<usize> {
        self.index
            .get(key)
            .copied()
            .ok_or_else(|| Error::UnknownKey(key.to_string()))
    }

    pub fn distance(&self, a: &str, b: &str) -> Result<f64> {
        let (i, j) = (self.idx(a)?, self.idx(b)?);
        Ok(self.distances[i * self.len() + j])
    }

    /// Other fragments by ascending distance, ties by key.
    pub fn similar_fragments(&self, key: &str) -> Result<Vec<&str>> {
        let i = self.idx(key)?;
        Ok(self.neighbors[i].iter().map(|&j| self.keys[j].as_str()).collect())
    }

    /// `key1\tkey2\tdistance` for each unordered pair, distance to 9
    /// significant digits.
    pub fn to_similarities_text(&self) -> String {
        let m = self.len();
        let mut out = String::new();
        for i in 0..m {
            for j in i + 1..m {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}",
                    self.keys[i],
                    self.keys[j],
                    sig9(self.distances[i * m + j])
                );
            }
        }
        out
    }

    /// `key\tneighbor1\tneighbor2...` per key, in table order.
    pub fn to_sorted_text(&self) -> String {
        let mut out = String::new();
        for (i, k) in self.keys.iter().enumerate() {
            out.push_str(k);
            for &j in &self.neighbors[i] {
                out.push('\t');
                out.push_str(&self.keys[j]);
            }
            out.push('\n');
        }
        out
    }

    /// Rebuild from the pair file plus the key order of the sorted file.
    pub fn from_text(granularity: Granularity, similarities: &str, sorted: &str) -> Result<SimilarityTable> {
        let keys: Vec<String> = sorted
            .lines()
            .map(|l| l.split('\t').next().unwrap_or_default().to_string())
            .collect();
        let index: HashMap<String, usize> =
            keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        let m = keys.len();
        let mut distances = vec![0.0; m * m];
        for line in similarities.lines() {
            let parts: Vec<&str> = line.split('\t').collect();
            let [a, b, d] = parts[..] else {
                return Err(Error::Format(format!("bad similarity line {line:?}")));
            };
            let (i, j) = match (index.get(a), index.get(b)) {
                (Some(&i), Some(&j)) => (i, j),
                _ => return Err(Error::Format(format!("unknown key in {line:?}"))),
            };
            let d: f64 = parse_num(d)?;
            distances[i * m + j] = d;
            distances[j * m + i] = d;
        }
        let mut neighbors = Vec::with_capacity(m);
        for line in sorted.lines() {
            let row = line
                .split('\t')
                .skip(1)
                .map(|k| {
                    index
                        .get(k)
                        .copied()
                        .ok_or_else(|| Error::Format(format!("unknown neighbor {k:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            neighbors.push(row);
        }
        Ok(SimilarityTable {
            granularity,
            keys,
            distances,
            neighbors,
            index,
        })
    }
}

/// `%.9g`-style formatting.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mant, e) = sci.split_once('e').expect("exponent form");
    let exp: i32 = e.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mant), exp.abs());
    }
    let decimals = (8 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
