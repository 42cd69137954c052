//! Recursive autoencoder over token streams.
//!
//! A pair of n-vectors `c = [x_l; x_r]` is encoded as
//! `z = tanh(ε c + β_z) / ‖·‖` and decoded as `y = δ z + β_y`; the pair's
//! reconstruction error is `‖c − y‖²`. Streams are encoded greedily by
//! repeatedly merging the adjacent pair with the lowest error.
//!
//! All parameters live in one flat vector so the optimizer and the
//! finite-difference checker can treat them uniformly:
//! `[ε (n×2n) | δ (2n×n) | β_z (n) | β_y (2n) | embeddings (V×n)]`.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::embed::{parse_num, Dictionary};
use crate::error::{Error, Result};

pub const UNK: &str = "<UNK>";

/// Lines per parallel work unit. Fixed so that the floating-point reduction
/// order never depends on the thread count.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub n: usize,
    pub w: Vec<f64>,
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl EncoderParams {
    /// Number of autoencoder weights, excluding embeddings.
    pub fn theta_len(n: usize) -> usize {
        4 * n * n + 3 * n
    }

    /// All-zero parameters over `terms` (plus `<UNK>` if missing).
    pub fn zeros(n: usize, terms: &[String]) -> EncoderParams {
        let mut terms = terms.to_vec();
        if !terms.iter().any(|t| t == UNK) {
            terms.push(UNK.to_string());
        }
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        EncoderParams {
            n,
            w: vec![0.0; Self::theta_len(n) + terms.len() * n],
            terms,
            index,
        }
    }

    /// Glorot-uniform matrices, zero biases, embeddings copied from `dict`
    /// and `<UNK>` at the mean embedding.
    pub fn init(dict: &Dictionary, seed: u64) -> EncoderParams {
        let n = dict.dim;
        let mut p = EncoderParams::zeros(n, &dict.vocab);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limit = (6.0 / (3 * n) as f64).sqrt();
        for x in &mut p.w[..4 * n * n] {
            *x = rng.gen_range(-limit..limit);
        }
        let mut mean = vec![0.0; n];
        for (t, v) in dict.vocab.iter().zip(&dict.vectors) {
            p.embedding_mut(t).copy_from_slice(v);
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x / dict.len() as f64;
            }
        }
        if dict.index_of(UNK).is_none() {
            p.embedding_mut(UNK).copy_from_slice(&mean);
        }
        p
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    fn delta_off(&self) -> usize {
        2 * self.n * self.n
    }
    fn bz_off(&self) -> usize {
        4 * self.n * self.n
    }
    fn by_off(&self) -> usize {
        4 * self.n * self.n + self.n
    }
    fn emb_off(&self) -> usize {
        Self::theta_len(self.n)
    }

    pub fn eps(&self) -> &[f64] {
        &self.w[..self.delta_off()]
    }
    pub fn eps_mut(&mut self) -> &mut [f64] {
        let o = self.delta_off();
        &mut self.w[..o]
    }
    pub fn delta(&self) -> &[f64] {
        &self.w[self.delta_off()..self.bz_off()]
    }
    pub fn delta_mut(&mut self) -> &mut [f64] {
        let (a, b) = (self.delta_off(), self.bz_off());
        &mut self.w[a..b]
    }
    pub fn bz(&self) -> &[f64] {
        &self.w[self.bz_off()..self.by_off()]
    }
    pub fn bz_mut(&mut self) -> &mut [f64] {
        let (a, b) = (self.bz_off(), self.by_off());
        &mut self.w[a..b]
    }
    pub fn by(&self) -> &[f64] {
        &self.w[self.by_off()..self.emb_off()]
    }
    pub fn by_mut(&mut self) -> &mut [f64] {
        let (a, b) = (self.by_off(), self.emb_off());
        &mut self.w[a..b]
    }

    /// Row of `term`, falling back to `<UNK>`.
    pub fn term_index(&self, term: &str) -> usize {
        self.index
            .get(term)
            .copied()
            .unwrap_or_else(|| self.index[UNK])
    }

    fn row(&self, i: usize) -> &[f64] {
        let o = self.emb_off() + i * self.n;
        &self.w[o..o + self.n]
    }

    pub fn embedding(&self, term: &str) -> &[f64] {
        self.row(self.term_index(term))
    }

    pub fn embedding_mut(&mut self, term: &str) -> &mut [f64] {
        let o = self.emb_off() + self.term_index(term) * self.n;
        let n = self.n;
        &mut self.w[o..o + n]
    }

    /// The fine-tuned embedding table.
    pub fn to_dictionary(&self) -> Dictionary {
        let vectors = (0..self.terms.len()).map(|i| self.row(i).to_vec()).collect();
        let mut d = Dictionary::new(self.terms.clone(), vectors).expect("terms are unique");
        d.dim = self.n;
        d
    }

    fn check_dim(&self, v: &[f64], expected: usize) -> Result<()> {
        if v.len() == expected {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected,
                got: v.len(),
            })
        }
    }

    /// tanh activation before normalization.
    pub fn activation(&self, xl: &[f64], xr: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(xl, self.n)?;
        self.check_dim(xr, self.n)?;
        let c: Vec<f64> = xl.iter().chain(xr).copied().collect();
        Ok(self.eval(&c).h)
    }

    pub fn encode_pair(&self, xl: &[f64], xr: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(xl, self.n)?;
        self.check_dim(xr, self.n)?;
        let c: Vec<f64> = xl.iter().chain(xr).copied().collect();
        Ok(self.eval(&c).z)
    }

    pub fn decode(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dim(z, self.n)?;
        let mut y = self.reconstruct(z);
        let right = y.split_off(self.n);
        Ok((y, right))
    }

    pub fn reconstruction_error(&self, xl: &[f64], xr: &[f64]) -> Result<f64> {
        self.check_dim(xl, self.n)?;
        self.check_dim(xr, self.n)?;
        let c: Vec<f64> = xl.iter().chain(xr).copied().collect();
        Ok(self.eval(&c).error)
    }

    fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let delta = self.delta();
        let by = self.by();
        (0..2 * n)
            .map(|i| by[i] + (0..n).map(|j| delta[i * n + j] * z[j]).sum::<f64>())
            .collect()
    }

    fn eval(&self, c: &[f64]) -> PairEval {
        let n = self.n;
        let eps = self.eps();
        let bz = self.bz();
        let h: Vec<f64> = (0..n)
            .map(|i| {
                let row = &eps[i * 2 * n..(i + 1) * 2 * n];
                (bz[i] + row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>()).tanh()
            })
            .collect();
        let s = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        let z: Vec<f64> = if s > 0.0 {
            h.iter().map(|x| x / s).collect()
        } else {
            h.clone()
        };
        let y = self.reconstruct(&z);
        let r: Vec<f64> = y.iter().zip(c).map(|(a, b)| a - b).collect();
        let error = r.iter().map(|x| x * x).sum();
        PairEval { h, s, z, r, error }
    }

    /// Greedy encoding of a term stream; unknown terms use `<UNK>`.
    pub fn greedy_encode(&self, stream: &[String]) -> Result<MergeTrace> {
        if stream.is_empty() {
            return Err(Error::EmptyStream);
        }
        let leaves: Vec<Vec<f64>> = stream.iter().map(|t| self.embedding(t).to_vec()).collect();
        Ok(self.greedy_encode_vectors(&leaves))
    }

    /// Greedy encoding of arbitrary leaf vectors (caller guarantees dims).
    pub fn greedy_encode_vectors(&self, leaves: &[Vec<f64>]) -> MergeTrace {
        let leaf_count = leaves.len();
        let mut nodes: Vec<(usize, Vec<f64>)> = leaves.iter().cloned().enumerate().collect();
        let pair = |a: &[f64], b: &[f64]| -> PairEval {
            let c: Vec<f64> = a.iter().chain(b).copied().collect();
            self.eval(&c)
        };
        let mut cache: Vec<PairEval> = nodes
            .windows(2)
            .map(|w| pair(&w[0].1, &w[1].1))
            .collect();
        let mut merges = Vec::with_capacity(leaf_count.saturating_sub(1));
        while nodes.len() > 1 {
            let mut best = 0;
            for i in 1..cache.len() {
                if cache[i].error < cache[best].error {
                    best = i;
                }
            }
            let chosen = cache.remove(best);
            let (right_id, _) = nodes.remove(best + 1);
            let id = leaf_count + merges.len();
            merges.push(Merge {
                position: best,
                left: nodes[best].0,
                right: right_id,
                error: chosen.error,
            });
            nodes[best] = (id, chosen.z);
            if best > 0 {
                cache[best - 1] = pair(&nodes[best - 1].1, &nodes[best].1);
            }
            if best + 1 < nodes.len() {
                cache[best] = pair(&nodes[best].1, &nodes[best + 1].1);
            }
        }
        MergeTrace {
            leaves: leaf_count,
            merges,
            root: nodes.pop().map(|(_, v)| v).unwrap_or_default(),
        }
    }

    /// Root encoding of a token stream.
    pub fn encode_tokens(&self, tokens: &[String]) -> Result<Vec<f64>> {
        Ok(self.greedy_encode(tokens)?.root)
    }

    /// Frozen-structure error of one line, accumulating the gradient into
    /// `grad` when given.
    fn line_objective(&self, line: &Line, grad: Option<&mut [f64]>) -> f64 {
        let n = self.n;
        let leaf_count = line.leaves.len();
        let mut vectors: Vec<Vec<f64>> = line.leaves.iter().map(|&t| self.row(t).to_vec()).collect();
        let mut evals = Vec::with_capacity(line.merges.len());
        let mut inputs = Vec::with_capacity(line.merges.len());
        let mut total = 0.0;
        for &(l, r) in &line.merges {
            let c: Vec<f64> = vectors[l].iter().chain(&vectors[r]).copied().collect();
            let e = self.eval(&c);
            total += e.error;
            vectors.push(e.z.clone());
            evals.push(e);
            inputs.push(c);
        }
        let Some(grad) = grad else {
            return total;
        };
        let (eps, delta) = (self.eps(), self.delta());
        let (delta_off, bz_off, by_off, emb_off) =
            (self.delta_off(), self.bz_off(), self.by_off(), self.emb_off());
        let mut gz = vec![vec![0.0; n]; vectors.len()];
        for m in (0..line.merges.len()).rev() {
            let e = &evals[m];
            let c = &inputs[m];
            let node = leaf_count + m;
            let gy: Vec<f64> = e.r.iter().map(|x| 2.0 * x).collect();
            for i in 0..2 * n {
                for j in 0..n {
                    grad[delta_off + i * n + j] += gy[i] * e.z[j];
                }
                grad[by_off + i] += gy[i];
            }
            let mut g = std::mem::take(&mut gz[node]);
            for (j, gj) in g.iter_mut().enumerate() {
                *gj += (0..2 * n).map(|i| delta[i * n + j] * gy[i]).sum::<f64>();
            }
            let gh: Vec<f64> = if e.s > 0.0 {
                let dot: f64 = e.z.iter().zip(&g).map(|(a, b)| a * b).sum();
                g.iter().zip(&e.z).map(|(gj, zj)| (gj - zj * dot) / e.s).collect()
            } else {
                g
            };
            let gp: Vec<f64> = gh.iter().zip(&e.h).map(|(a, h)| a * (1.0 - h * h)).collect();
            let mut gc: Vec<f64> = gy.iter().map(|x| -x).collect();
            for i in 0..n {
                for j in 0..2 * n {
                    grad[i * 2 * n + j] += gp[i] * c[j];
                    gc[j] += eps[i * 2 * n + j] * gp[i];
                }
                grad[bz_off + i] += gp[i];
            }
            let (l, r) = line.merges[m];
            for (child, part) in [(l, &gc[..n]), (r, &gc[n..])] {
                if child < leaf_count {
                    let o = emb_off + line.leaves[child] * n;
                    for (k, x) in part.iter().enumerate() {
                        grad[o + k] += x;
                    }
                } else {
                    for (k, x) in part.iter().enumerate() {
                        gz[child][k] += x;
                    }
                }
            }
        }
        total
    }

    /// Total frozen-structure error over `lines`, with its gradient.
    pub fn objective(&self, lines: &[Line], with_grad: bool) -> (f64, Option<Vec<f64>>) {
        let len = self.w.len();
        let parts: Vec<(f64, Option<Vec<f64>>)> = lines
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = with_grad.then(|| vec![0.0; len]);
                let mut f = 0.0;
                for line in chunk {
                    f += self.line_objective(line, g.as_deref_mut());
                }
                (f, g)
            })
            .collect();
        let mut total = 0.0;
        let mut grad = with_grad.then(|| vec![0.0; len]);
        for (f, g) in parts {
            total += f;
            if let (Some(acc), Some(g)) = (grad.as_mut(), g) {
                acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
        }
        (total, grad)
    }

    /// Current greedy structure of each token line.
    pub fn structure(&self, lines: &[Vec<String>]) -> Vec<Line> {
        lines
            .par_iter()
            .map(|tokens| {
                let leaves: Vec<usize> = tokens.iter().map(|t| self.term_index(t)).collect();
                let vectors: Vec<Vec<f64>> = leaves.iter().map(|&i| self.row(i).to_vec()).collect();
                let trace = self.greedy_encode_vectors(&vectors);
                Line {
                    leaves,
                    merges: trace.merges.iter().map(|m| (m.left, m.right)).collect(),
                }
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let n = self.n;
        let mut out = format!("{n}\n");
        let mut row = |vals: &[f64]| {
            let s: Vec<String> = vals.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&s.join(" "));
            out.push('\n');
        };
        for chunk in self.eps().chunks(2 * n) {
            row(chunk);
        }
        for chunk in self.delta().chunks(n) {
            row(chunk);
        }
        row(self.bz());
        row(self.by());
        let _ = writeln!(out, "{}", self.terms.len());
        for (i, t) in self.terms.iter().enumerate() {
            out.push_str(t);
            for x in self.row(i) {
                let _ = write!(out, " {x:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<EncoderParams> {
        let bad = |what: &str| Error::Format(format!("encoder: {what}"));
        let mut lines = text.lines();
        let n: usize = parse_num(lines.next().ok_or_else(|| bad("empty"))?.trim())?;
        let mut w = Vec::with_capacity(Self::theta_len(n));
        let mut read_rows = |rows: usize, width: usize, w: &mut Vec<f64>| -> Result<()> {
            for _ in 0..rows {
                let line = lines.next().ok_or_else(|| bad("truncated"))?;
                let vals = line
                    .split_whitespace()
                    .map(parse_num::<f64>)
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != width {
                    return Err(bad("row width"));
                }
                w.extend(vals);
            }
            Ok(())
        };
        read_rows(n, 2 * n, &mut w)?;
        read_rows(2 * n, n, &mut w)?;
        read_rows(1, n, &mut w)?;
        read_rows(1, 2 * n, &mut w)?;
        let count: usize = parse_num(lines.next().ok_or_else(|| bad("no vocabulary"))?.trim())?;
        let mut terms = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next().ok_or_else(|| bad("truncated vocabulary"))?;
            let mut it = line.split(' ');
            terms.push(it.next().unwrap_or_default().to_string());
            let vals = it.map(parse_num::<f64>).collect::<Result<Vec<_>>>()?;
            if vals.len() != n {
                return Err(bad("embedding width"));
            }
            w.extend(vals);
        }
        let index: HashMap<String, usize> =
            terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != terms.len() || !index.contains_key(UNK) {
            return Err(bad("vocabulary must be unique and contain <UNK>"));
        }
        Ok(EncoderParams { n, w, terms, index })
    }
}

struct PairEval {
    h: Vec<f64>,
    s: f64,
    z: Vec<f64>,
    /// y − c
    r: Vec<f64>,
    error: f64,
}

/// One greedy merge. `left`/`right` are node ids: leaves are `0..leaves`,
/// the node made by merge `m` is `leaves + m`. `position` is the index of
/// the left operand in the working list at that step.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub position: usize,
    pub left: usize,
    pub right: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeTrace {
    pub leaves: usize,
    pub merges: Vec<Merge>,
    pub root: Vec<f64>,
}

impl MergeTrace {
    pub fn total_error(&self) -> f64 {
        self.merges.iter().map(|m| m.error).sum()
    }
}

/// A token line with its merge structure frozen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub leaves: Vec<usize>,
    pub merges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Lbfgs { memory: usize },
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaeConfig {
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub freeze_embeddings: bool,
    pub seed: u64,
}

impl Default for RaeConfig {
    fn default() -> Self {
        RaeConfig {
            epochs: 50,
            optimizer: Optimizer::Lbfgs { memory: 7 },
            freeze_embeddings: false,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub params: EncoderParams,
    /// Greedy corpus error at the start of every epoch, then after the last.
    pub history: Vec<f64>,
}

impl Trained {
    pub fn initial_error(&self) -> f64 {
        self.history[0]
    }

    pub fn best_error(&self) -> f64 {
        self.history.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

struct Lbfgs {
    memory: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl Lbfgs {
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            axpy(-a, y, &mut q);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|x| *x *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            axpy(a - b, s, &mut q);
        }
        q.iter_mut().for_each(|x| *x = -*x);
        q
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy <= 1e-12 {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn frozen_error(params: &EncoderParams, lines: &[Line]) -> f64 {
    params.objective(lines, false).0
}

/// Train on the token lines of `corpus`, starting from `dict` embeddings.
///
/// Each epoch re-derives the greedy structure of every line under the
/// current weights, then takes one line-searched step on the error with that
/// structure held fixed. The best weights seen are returned.
pub fn train_rae(corpus: &Corpus, dict: &Dictionary, config: &RaeConfig) -> Result<Trained> {
    let lines: Vec<Vec<String>> = corpus
        .entries
        .iter()
        .filter(|e| !e.tokens.is_empty())
        .map(|e| e.tokens.clone())
        .collect();
    if lines.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut params = EncoderParams::init(dict, config.seed);
    let emb_off = EncoderParams::theta_len(params.n);
    let mut lbfgs = Lbfgs {
        memory: match config.optimizer {
            Optimizer::Lbfgs { memory } => memory,
            Optimizer::GradientDescent => 0,
        },
        pairs: VecDeque::new(),
    };
    let mut history = Vec::with_capacity(config.epochs + 1);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut step_hint = 1.0;
    let remember = |err: f64, w: &[f64], best: &mut Option<(f64, Vec<f64>)>| {
        if best.as_ref().is_none_or(|(b, _)| err < *b) {
            *best = Some((err, w.to_vec()));
        }
    };

    for _ in 0..config.epochs {
        let structure = params.structure(&lines);
        let (f, grad) = params.objective(&structure, true);
        if !f.is_finite() {
            return Err(Error::NonFinite("autoencoder reconstruction error".into()));
        }
        history.push(f);
        remember(f, &params.w, &mut best);
        let mut g = grad.expect("requested");
        if config.freeze_embeddings {
            g[emb_off..].iter_mut().for_each(|x| *x = 0.0);
        }
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < 1e-12 {
            break;
        }
        let mut d = if lbfgs.memory > 0 {
            lbfgs.direction(&g)
        } else {
            g.iter().map(|x| -x).collect()
        };
        let mut slope = dot(&g, &d);
        if slope >= 0.0 || !slope.is_finite() {
            lbfgs.pairs.clear();
            d = g.iter().map(|x| -x).collect();
            slope = -gnorm * gnorm;
        }
        let mut alpha = if lbfgs.pairs.is_empty() {
            (step_hint / gnorm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial = params.clone();
            axpy(alpha, &d, &mut trial.w);
            let ft = frozen_error(&trial, &structure);
            if ft.is_finite() && ft <= f + 1e-4 * alpha * slope {
                accepted = Some(trial);
                break;
            }
            alpha *= 0.5;
        }
        let Some(next) = accepted else {
            break;
        };
        if lbfgs.memory > 0 {
            let (_, g_next) = next.objective(&structure, true);
            let mut g_next = g_next.expect("requested");
            if config.freeze_embeddings {
                g_next[emb_off..].iter_mut().for_each(|x| *x = 0.0);
            }
            let s: Vec<f64> = d.iter().map(|x| alpha * x).collect();
            let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
            lbfgs.push(s, y);
        } else {
            step_hint = alpha * gnorm * 2.0;
        }
        params = next;
    }
    let last = frozen_error(&params, &params.structure(&lines));
    if !last.is_finite() {
        return Err(Error::NonFinite("autoencoder reconstruction error".into()));
    }
    history.push(last);
    remember(last, &params.w, &mut best);
    if let Some((_, w)) = best {
        params.w = w;
    }
    Ok(Trained { params, history })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

impl GradCheck {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Relative error with a floor on the denominator, so components whose true
/// gradient is (numerically) zero are judged on absolute error instead.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compare the analytic gradient against central differences on every
/// parameter index in `indices` (a range or any list), holding each line's
/// structure fixed.
pub fn gradient_check(
    params: &EncoderParams,
    lines: &[Line],
    indices: impl IntoIterator<Item = usize>,
    h: f64,
) -> GradCheck {
    let (_, grad) = params.objective(lines, true);
    let grad = grad.expect("requested");
    let mut report = GradCheck {
        checked: 0,
        max_rel_error: 0.0,
        worst_index: 0,
    };
    let mut probe = params.clone();
    for i in indices {
        let orig = probe.w[i];
        probe.w[i] = orig + h;
        let up = frozen_error(&probe, lines);
        probe.w[i] = orig - h;
        let down = frozen_error(&probe, lines);
        probe.w[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = relative_error(grad[i], numeric);
        report.checked += 1;
        if report.checked == 1 || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    report
}
