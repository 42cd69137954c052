//! Skip-gram term embeddings trained with hierarchical softmax.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 400,
            window: 10,
            epochs: 20,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub vocab: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
    index: HashMap<String, usize>,
}

impl Dictionary {
    pub fn new(vocab: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Dictionary> {
        if vocab.len() != vectors.len() {
            return Err(Error::Format(format!(
                "{} terms but {} vectors",
                vocab.len(),
                vectors.len()
            )));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::Format("ragged embedding table".into()));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, t) in vocab.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate term {t:?}")));
            }
        }
        Ok(Dictionary {
            vocab,
            vectors,
            dim,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn vector(&self, term: &str) -> Option<&[f64]> {
        self.index_of(term).map(|i| self.vectors[i].as_slice())
    }

    /// The `k` nearest other terms by Euclidean distance; ties go to the
    /// earlier vocabulary entry.
    pub fn nearest_terms(&self, term: &str, k: usize) -> Result<Vec<(String, f64)>> {
        let q = self
            .index_of(term)
            .ok_or_else(|| Error::UnknownTerm(term.to_string()))?;
        let mut scored: Vec<(usize, f64)> = (0..self.len())
            .filter(|&i| i != q)
            .map(|i| (i, euclidean(&self.vectors[q], &self.vectors[i])))
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .map(|(i, d)| (self.vocab[i].clone(), d))
            .collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (t, v) in self.vocab.iter().zip(&self.vectors) {
            out.push_str(t);
            for x in v {
                let _ = write!(out, " {x:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Dictionary> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty dictionary".into()))?;
        let mut parts = header.split_whitespace();
        let (count, dim) = match (parts.next(), parts.next()) {
            (Some(v), Some(n)) => (parse_num::<usize>(v)?, parse_num::<usize>(n)?),
            _ => return Err(Error::Format(format!("bad dictionary header {header:?}"))),
        };
        let mut vocab = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count);
        for line in lines.take(count) {
            let mut it = line.split(' ');
            let term = it.next().unwrap_or_default().to_string();
            let v = it.map(parse_num::<f64>).collect::<Result<Vec<_>>>()?;
            if v.len() != dim {
                return Err(Error::Format(format!("term {term:?} has {} dims", v.len())));
            }
            vocab.push(term);
            vectors.push(v);
        }
        if vocab.len() != count {
            return Err(Error::Format("truncated dictionary".into()));
        }
        let mut d = Dictionary::new(vocab, vectors)?;
        d.dim = dim;
        Ok(d)
    }
}

pub(crate) fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("bad number {s:?}")))
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Root-to-leaf path of a term in the Huffman tree: inner node ids and the
/// branch taken at each (0 = left).
#[derive(Debug, Clone, PartialEq, Eq)]
struct Code {
    points: Vec<usize>,
    bits: Vec<u8>,
}

#[derive(PartialEq, Eq)]
struct HeapNode {
    count: u64,
    id: usize,
}

impl Ord for HeapNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (count, id)
        other
            .count
            .cmp(&self.count)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Huffman codes for `counts`. Inner nodes are numbered 0..V-1 in creation
/// order; with a single term the tree is one inner node and a left edge.
fn huffman(counts: &[u64]) -> Vec<Code> {
    let v = counts.len();
    if v == 1 {
        return vec![Code {
            points: vec![0],
            bits: vec![0],
        }];
    }
    let mut heap: BinaryHeap<HeapNode> = counts
        .iter()
        .enumerate()
        .map(|(id, &count)| HeapNode { count, id })
        .collect();
    // node ids < v are leaves; v + j is inner node j
    let mut parent = vec![0usize; 2 * v - 1];
    let mut bit = vec![0u8; 2 * v - 1];
    let mut next = v;
    while heap.len() > 1 {
        let a = heap.pop().unwrap();
        let b = heap.pop().unwrap();
        parent[a.id] = next;
        bit[a.id] = 0;
        parent[b.id] = next;
        bit[b.id] = 1;
        heap.push(HeapNode {
            count: a.count + b.count,
            id: next,
        });
        next += 1;
    }
    let root = next - 1;
    (0..v)
        .map(|leaf| {
            let mut points = Vec::new();
            let mut bits = Vec::new();
            let mut node = leaf;
            while node != root {
                bits.push(bit[node]);
                node = parent[node];
                points.push(node - v);
            }
            points.reverse();
            bits.reverse();
            Code { points, bits }
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skip-gram model state; exposed so training can be stepped epoch by epoch.
pub struct SkipGram {
    config: SkipGramConfig,
    vocab: Vec<String>,
    lines: Vec<Vec<usize>>,
    codes: Vec<Code>,
    syn0: Vec<Vec<f64>>,
    syn1: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    total_words: usize,
    processed: usize,
}

impl SkipGram {
    pub fn new(corpus: &Corpus, config: SkipGramConfig) -> Result<SkipGram> {
        if corpus.entries.iter().all(|e| e.tokens.is_empty()) {
            return Err(Error::EmptyCorpus);
        }
        if config.dim < 2 {
            return Err(Error::Config(format!("embedding size {} < 2", config.dim)));
        }
        let vocab = corpus.vocabulary();
        let index: HashMap<&str, usize> =
            vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let lines: Vec<Vec<usize>> = corpus
            .entries
            .iter()
            .map(|e| e.tokens.iter().map(|t| index[t.as_str()]).collect())
            .collect();
        let mut counts = vec![0u64; vocab.len()];
        for l in &lines {
            for &w in l {
                counts[w] += 1;
            }
        }
        let codes = huffman(&counts);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = config.dim;
        let scale = 0.5 / n as f64;
        let syn0 = (0..vocab.len())
            .map(|_| (0..n).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect();
        let syn1 = vec![vec![0.0; n]; vocab.len().max(1)];
        let total_words = lines.iter().map(Vec::len).sum::<usize>() * config.epochs.max(1);
        Ok(SkipGram {
            config,
            vocab,
            lines,
            codes,
            syn0,
            syn1,
            rng,
            total_words,
            processed: 0,
        })
    }

    fn alpha(&self) -> f64 {
        let c = &self.config;
        let progress = self.processed as f64 / self.total_words.max(1) as f64;
        (c.learning_rate * (1.0 - progress)).max(c.min_learning_rate)
    }

    /// One pass over every line, using word2vec's reduced random window.
    pub fn epoch(&mut self) {
        let n = self.config.dim;
        let mut neu1e = vec![0.0; n];
        for li in 0..self.lines.len() {
            let len = self.lines[li].len();
            for pos in 0..len {
                let alpha = self.alpha();
                self.processed += 1;
                let b = self.rng.gen_range(0..self.config.window.max(1));
                let reach = self.config.window.max(1) - b;
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(len - 1);
                let center = self.lines[li][pos];
                for cpos in lo..=hi {
                    if cpos == pos {
                        continue;
                    }
                    let ctx = self.lines[li][cpos];
                    neu1e.iter_mut().for_each(|x| *x = 0.0);
                    let code = &self.codes[center];
                    for (&node, &bit) in code.points.iter().zip(&code.bits) {
                        let inner = &mut self.syn1[node];
                        let input = &self.syn0[ctx];
                        let f: f64 = input.iter().zip(inner.iter()).map(|(a, b)| a * b).sum();
                        let g = (1.0 - bit as f64 - sigmoid(f)) * alpha;
                        for k in 0..n {
                            neu1e[k] += g * inner[k];
                            inner[k] += g * input[k];
                        }
                    }
                    for (w, e) in self.syn0[ctx].iter_mut().zip(&neu1e) {
                        *w += e;
                    }
                }
            }
        }
    }

    /// Negative log-likelihood of every (center, context) pair within the
    /// full window.
    pub fn loss(&self) -> f64 {
        let w = self.config.window.max(1);
        let mut total = 0.0;
        for line in &self.lines {
            for pos in 0..line.len() {
                let lo = pos.saturating_sub(w);
                let hi = (pos + w).min(line.len() - 1);
                let code = &self.codes[line[pos]];
                for cpos in lo..=hi {
                    if cpos == pos {
                        continue;
                    }
                    let input = &self.syn0[line[cpos]];
                    for (&node, &bit) in code.points.iter().zip(&code.bits) {
                        let f: f64 = input.iter().zip(&self.syn1[node]).map(|(a, b)| a * b).sum();
                        let p = if bit == 0 { sigmoid(f) } else { sigmoid(-f) };
                        total -= p.max(1e-300).ln();
                    }
                }
            }
        }
        total
    }

    pub fn into_dictionary(self) -> Dictionary {
        Dictionary::new(self.vocab, self.syn0).expect("vocabulary is unique")
    }
}

pub fn train_skipgram(corpus: &Corpus, config: &SkipGramConfig) -> Result<Dictionary> {
    let mut model = SkipGram::new(corpus, config.clone())?;
    for _ in 0..config.epochs {
        model.epoch();
    }
    let dict = model.into_dictionary();
    if dict.vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("skip-gram embeddings".into()));
    }
    Ok(dict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusEntry, Granularity};

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus {
            granularity: Granularity::File,
            entries: lines
                .iter()
                .enumerate()
                .map(|(i, l)| CorpusEntry {
                    key: i.to_string(),
                    tokens: l.split_whitespace().map(String::from).collect(),
                })
                .collect(),
        }
    }

    fn small(dim: usize) -> SkipGramConfig {
        SkipGramConfig {
            dim,
            window: 2,
            epochs: 5,
            ..SkipGramConfig::default()
        }
    }

    /// `a` and `b` appear in identical contexts; `z` never shares one.
    fn ranking_corpus() -> Corpus {
        let mut lines = Vec::new();
        for _ in 0..30 {
            lines.push("p a q");
            lines.push("p b q");
            lines.push("r z s");
        }
        corpus(&lines)
    }

    #[test]
    fn defaults() {
        let c = SkipGramConfig::default();
        assert_eq!((c.dim, c.window, c.epochs), (400, 10, 20));
    }

    #[test]
    fn shape_and_finiteness() {
        let c = corpus(&["a b c d", "d e f"]);
        let d = train_skipgram(&c, &small(32)).unwrap();
        assert_eq!(d.len(), 6);
        assert!(d.vectors.iter().all(|v| v.len() == 32));
        assert!(d.vectors.iter().flatten().all(|x| x.is_finite()));
    }

    #[test]
    fn empty_corpus_is_error() {
        let c = corpus(&[]);
        assert!(matches!(train_skipgram(&c, &small(4)), Err(Error::EmptyCorpus)));
        let c = corpus(&[""]);
        assert!(matches!(train_skipgram(&c, &small(4)), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn deterministic() {
        let c = ranking_corpus();
        assert_eq!(train_skipgram(&c, &small(8)).unwrap(), train_skipgram(&c, &small(8)).unwrap());
    }

    #[test]
    fn shared_contexts_rank_closer() {
        let c = ranking_corpus();
        let cfg = SkipGramConfig {
            dim: 16,
            window: 2,
            epochs: 20,
            learning_rate: 0.05,
            ..SkipGramConfig::default()
        };
        let d = train_skipgram(&c, &cfg).unwrap();
        let a = d.vector("a").unwrap();
        let b = d.vector("b").unwrap();
        let z = d.vector("z").unwrap();
        assert!(cosine(a, b) > cosine(a, z));
        assert!(cosine(a, b) > cosine(b, z));
    }

    #[test]
    fn loss_decreases_over_first_epoch() {
        let mut m = SkipGram::new(&ranking_corpus(), small(16)).unwrap();
        let before = m.loss();
        m.epoch();
        assert!(m.loss() < before);
    }

    #[test]
    fn huffman_codes_are_prefix_free() {
        let codes = huffman(&[5, 1, 1, 2, 9, 3]);
        for (i, a) in codes.iter().enumerate() {
            for (j, b) in codes.iter().enumerate() {
                if i != j {
                    let n = a.bits.len().min(b.bits.len());
                    assert_ne!(a.bits[..n], b.bits[..n]);
                }
            }
        }
        // the most frequent term gets the shortest code
        let lens: Vec<usize> = codes.iter().map(|c| c.bits.len()).collect();
        assert_eq!(lens.iter().min(), Some(&lens[4]));
    }

    fn dict(vectors: Vec<Vec<f64>>) -> Dictionary {
        let vocab = (0..vectors.len()).map(|i| format!("t{i}")).collect();
        Dictionary::new(vocab, vectors).unwrap()
    }

    #[test]
    fn nearest_on_two_terms() {
        let d = dict(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let near = d.nearest_terms("t0", 1).unwrap();
        assert_eq!(near.len(), 1);
        assert_eq!(near[0].0, "t1");
        assert!(matches!(d.nearest_terms("nope", 1), Err(Error::UnknownTerm(_))));
    }

    #[test]
    fn nearest_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // coarse grid coordinates force distance ties
        let vectors: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.gen_range(0..4) as f64).collect())
            .collect();
        let d = dict(vectors.clone());
        for q in 0..50 {
            let got = d.nearest_terms(&format!("t{q}"), 49).unwrap();
            let mut expected = Vec::new();
            for i in 0..50 {
                if i == q {
                    continue;
                }
                let d2: f64 = (0..3).map(|k| (vectors[q][k] - vectors[i][k]).powi(2)).sum();
                expected.push((d2.sqrt(), i));
            }
            // insertion sort as an independent ordering
            for i in 1..expected.len() {
                let mut j = i;
                while j > 0
                    && (expected[j - 1].0 > expected[j].0
                        || (expected[j - 1].0 == expected[j].0 && expected[j - 1].1 > expected[j].1))
                {
                    expected.swap(j - 1, j);
                    j -= 1;
                }
            }
            let names: Vec<String> = got.iter().map(|(t, _)| t.clone()).collect();
            let want: Vec<String> = expected.iter().map(|(_, i)| format!("t{i}")).collect();
            assert_eq!(names, want);
            assert!(got.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }

    #[test]
    fn text_round_trip() {
        let d = train_skipgram(&corpus(&["a b c", "c d"]), &small(4)).unwrap();
        let text = d.to_text();
        assert!(text.starts_with("4 4\n"));
        assert_eq!(Dictionary::from_text(&text).unwrap(), d);
    }
}
