//! k-means over identifier embeddings, with k chosen by simulated annealing
//! on the number of negative silhouettes.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::is_identifier_term;
use crate::embed::{euclidean, parse_num, Dictionary};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMap {
    pub terms: Vec<String>,
    pub assignment: Vec<usize>,
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub silhouettes: Vec<f64>,
    /// Within-cluster SSE after each centroid update.
    pub sse_history: Vec<f64>,
    index: HashMap<String, usize>,
}

impl ClusterMap {
    pub fn cluster_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).map(|&i| self.assignment[i])
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn same_cluster(&self, a: &str, b: &str) -> Result<bool> {
        let ca = self
            .cluster_of(a)
            .ok_or_else(|| Error::UnknownTerm(a.to_string()))?;
        let cb = self
            .cluster_of(b)
            .ok_or_else(|| Error::UnknownTerm(b.to_string()))?;
        Ok(ca == cb)
    }

    pub fn negative_silhouettes(&self) -> usize {
        self.silhouettes.iter().filter(|&&s| s < 0.0).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (t, c) in self.terms.iter().zip(&self.assignment) {
            let _ = writeln!(out, "{t}\t{c}");
        }
        out
    }

    /// Assignment-only map, as stored in `classes.txt`.
    pub fn from_text(text: &str) -> Result<ClusterMap> {
        let mut terms = Vec::new();
        let mut assignment = Vec::new();
        for line in text.lines() {
            let (t, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("bad class line {line:?}")))?;
            terms.push(t.to_string());
            assignment.push(parse_num::<usize>(c)?);
        }
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        Ok(ClusterMap::assemble(terms, assignment, k, Vec::new(), Vec::new(), Vec::new()))
    }

    fn assemble(
        terms: Vec<String>,
        assignment: Vec<usize>,
        k: usize,
        centroids: Vec<Vec<f64>>,
        silhouettes: Vec<f64>,
        sse_history: Vec<f64>,
    ) -> ClusterMap {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        ClusterMap {
            terms,
            assignment,
            k,
            centroids,
            silhouettes,
            sse_history,
            index,
        }
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_centers(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = vectors.len();
    let mut chosen = vec![rng.gen_range(0..m)];
    while chosen.len() < k {
        let d2: Vec<f64> = vectors
            .iter()
            .map(|v| {
                chosen
                    .iter()
                    .map(|&c| sq(v, &vectors[c]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = m - 1;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // every point coincides with a center; draw among the unchosen
            let free: Vec<usize> = (0..m).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
    }
    chosen.into_iter().map(|i| vectors[i].clone()).collect()
}

fn assign(vectors: &[Vec<f64>], centers: &[Vec<f64>], current: Option<&[usize]>) -> Vec<usize> {
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let d: Vec<f64> = centers.iter().map(|c| sq(v, c)).collect();
            let best = d.iter().copied().fold(f64::INFINITY, f64::min);
            match current {
                Some(cur) if d[cur[i]] == best => cur[i],
                _ => d.iter().position(|&x| x == best).unwrap_or(0),
            }
        })
        .collect()
}

fn centroids_of(vectors: &[Vec<f64>], assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = vectors[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (v, &c) in vectors.iter().zip(assignment) {
        counts[c] += 1;
        sums[c].iter_mut().zip(v).for_each(|(s, x)| *s += x);
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|x| *x /= n as f64);
        }
    }
    sums
}

/// Give every empty cluster the point farthest from its own centroid, taken
/// from a cluster that keeps at least one member.
fn repair_empty(vectors: &[Vec<f64>], assignment: &mut [usize], k: usize, centers: &[Vec<f64>]) {
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignment.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return;
        };
        let mut far: Option<(f64, usize)> = None;
        for (i, v) in vectors.iter().enumerate() {
            if counts[assignment[i]] < 2 {
                continue;
            }
            let d = sq(v, &centers[assignment[i]]);
            if far.is_none_or(|(fd, _)| d > fd) {
                far = Some((d, i));
            }
        }
        match far {
            Some((_, i)) => assignment[i] = empty,
            None => return,
        }
    }
}

fn sse(vectors: &[Vec<f64>], assignment: &[usize], centers: &[Vec<f64>]) -> f64 {
    vectors
        .iter()
        .zip(assignment)
        .map(|(v, &c)| sq(v, &centers[c]))
        .sum()
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans(points: &[(String, Vec<f64>)], k: usize, seed: u64) -> Result<ClusterMap> {
    if k == 0 || k > points.len() {
        return Err(Error::Config(format!(
            "k = {k} outside 1..={}",
            points.len()
        )));
    }
    let vectors: Vec<Vec<f64>> = points.iter().map(|(_, v)| v.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(&vectors, k, &mut rng);
    let mut assignment = assign(&vectors, &centers, None);
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        repair_empty(&vectors, &mut assignment, k, &centers);
        centers = centroids_of(&vectors, &assignment, k);
        history.push(sse(&vectors, &assignment, &centers));
        let next = assign(&vectors, &centers, Some(&assignment));
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let silhouettes = silhouette(&vectors, &assignment);
    Ok(ClusterMap::assemble(
        points.iter().map(|(t, _)| t.clone()).collect(),
        assignment,
        k,
        centers,
        silhouettes,
        history,
    ))
}

/// Silhouette of every point. Points in singleton clusters, points with no
/// other cluster to compare against, and 0/0 cases all score 0.
pub fn silhouette(vectors: &[Vec<f64>], assignment: &[usize]) -> Vec<f64> {
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &c in assignment {
        counts[c] += 1;
    }
    (0..vectors.len())
        .map(|i| {
            let own = assignment[i];
            if counts[own] < 2 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, v) in vectors.iter().enumerate() {
                if j != i {
                    sums[assignment[j]] += euclidean(&vectors[i], v);
                }
            }
            let a = sums[own] / (counts[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && counts[c] > 0)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annealed {
    pub map: ClusterMap,
    pub objective: usize,
    pub k0: usize,
    pub t0: f64,
    /// Objective of every k evaluated, keyed by k.
    pub evaluated: BTreeMap<usize, usize>,
    pub proposals: usize,
}

pub const MAX_PROPOSALS: usize = 200;
pub const COOLING: f64 = 0.95;
pub const MIN_TEMPERATURE: f64 = 0.1;

/// Choose k by annealing on J(k) = number of negative silhouettes.
pub fn anneal_k(points: &[(String, Vec<f64>)], seed: u64) -> Result<Annealed> {
    let v = points.len();
    if v < 2 {
        return Err(Error::Config(format!("need at least 2 points, got {v}")));
    }
    let root = (v as f64).sqrt();
    let k0 = (root.round() as usize).clamp(1, v);
    let t0 = root;
    let mut maps: BTreeMap<usize, ClusterMap> = BTreeMap::new();
    let objective = |k: usize, maps: &mut BTreeMap<usize, ClusterMap>| -> Result<usize> {
        if let Some(m) = maps.get(&k) {
            return Ok(m.negative_silhouettes());
        }
        let m = kmeans(points, k, seed)?;
        let j = m.negative_silhouettes();
        maps.insert(k, m);
        Ok(j)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a11e);
    let mut k = k0;
    let mut j = objective(k, &mut maps)?;
    let (mut best_k, mut best_j) = (k, j);
    let mut t = t0;
    let mut proposals = 0;
    while t >= MIN_TEMPERATURE && proposals < MAX_PROPOSALS {
        let step: i64 = if rng.gen_bool(0.5) { 1 } else { -1 };
        let cand = (k as i64 + step).clamp(1, v as i64) as usize;
        let jc = objective(cand, &mut maps)?;
        let accept = jc <= j || rng.gen::<f64>() < (-((jc - j) as f64) / t).exp();
        if accept {
            k = cand;
            j = jc;
        }
        if jc < best_j {
            best_k = cand;
            best_j = jc;
        }
        t *= COOLING;
        proposals += 1;
    }
    let evaluated = maps
        .iter()
        .map(|(&k, m)| (k, m.negative_silhouettes()))
        .collect();
    Ok(Annealed {
        map: maps.remove(&best_k).expect("best k was evaluated"),
        objective: best_j,
        k0,
        t0,
        evaluated,
        proposals,
    })
}

/// Identifier terms of `dict` with their vectors, in vocabulary order.
pub fn identifier_points(dict: &Dictionary) -> Vec<(String, Vec<f64>)> {
    dict.vocab
        .iter()
        .zip(&dict.vectors)
        .filter(|(t, _)| is_identifier_term(t))
        .map(|(t, v)| (t.clone(), v.clone()))
        .collect()
}

/// Cluster the identifier terms of `dict`. With fewer than two identifiers
/// every term (if any) lands in cluster 0.
pub fn cluster_identifiers(dict: &Dictionary, seed: u64) -> Result<ClusterMap> {
    let points = identifier_points(dict);
    match points.len() {
        0 => return Ok(ClusterMap::assemble(Vec::new(), Vec::new(), 1, Vec::new(), Vec::new(), Vec::new())),
        1 => return kmeans(&points, 1, seed),
        _ => {}
    }
    Ok(anneal_k(&points, seed)?.map)
}
