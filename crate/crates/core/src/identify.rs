//! Similarity fields from trained embeddings, propagation away from the reactant,
//! transition-state extraction and clustering of the embedded states.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embed::{softmax_rows, Embedding, NeighborProbabilities};
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::tpt::ReactantProductSpec;

/// Sparse rows `sim(u, .)`, each supported on the walk neighbourhood of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityField {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SimilarityField {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (u, row) in rows.iter().enumerate() {
            for &(v, s) in row {
                if v >= n || !(s >= 0.0) || !s.is_finite() {
                    return Err(Error::Shape(format!("similarity row {u}: entry ({v}, {s}) invalid")));
                }
            }
        }
        Ok(SimilarityField { rows })
    }

    pub fn num_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, u: usize) -> &[(usize, f64)] {
        &self.rows[u]
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.rows[u].iter().find(|e| e.0 == v).map_or(0.0, |e| e.1)
    }
}

/// `sim(u, v) = Pr(v | e(u))` on NP-supported pairs.
pub fn base_similarity(emb: &Embedding, np: &NeighborProbabilities) -> SimilarityField {
    SimilarityField { rows: softmax_rows(emb, np) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounds {
    Fixed(usize),
    /// Until nothing changes, capped at the number of nodes.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagationRule {
    /// Each round assigns `sum_v sim(A, v) sim(v, u)` to nodes still at zero; assigned values
    /// are never revisited.
    FillZeros,
    /// Each round pushes the newest layer of similarity one more hop through `sim` and adds it
    /// to the field, i.e. `sim(A, .) = sum_k s_0 S^k`.
    Accumulate,
}

/// Similarity to the reactant, rescaled so the largest value on a non-source node with
/// walks of its own is one.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedSimilarity {
    pub values: Vec<f64>,
    pub rounds: usize,
}

/// Relative mass below which an accumulated layer counts as exhausted.
const LAYER_TOL: f64 = 1e-12;

/// Initial row `sim(A, .)`: the weighted average of the members' rows.
pub fn source_row(sim: &SimilarityField, sources: &[(usize, f64)]) -> Result<Vec<f64>> {
    let n = sim.num_nodes();
    if sources.is_empty() {
        return Err(Error::InvalidSpec("similarity source set is empty".into()));
    }
    if let Some(&(a, _)) = sources.iter().find(|s| s.0 >= n) {
        return Err(Error::InvalidSpec(format!("source {a} outside {n} nodes")));
    }
    let total: f64 = sources.iter().map(|s| s.1.max(0.0)).sum();
    let weight = |w: f64| if total > 0.0 { w.max(0.0) / total } else { 1.0 / sources.len() as f64 };
    let mut s = vec![0.0; n];
    for &(a, w) in sources {
        for &(v, x) in sim.row(a) {
            s[v] += weight(w) * x;
        }
    }
    Ok(s)
}

/// Propagated similarity before rescaling. Sources never act as intermediate nodes.
pub fn propagate_raw(
    sim: &SimilarityField,
    sources: &[(usize, f64)],
    rounds: Rounds,
    rule: PropagationRule,
) -> Result<(Vec<f64>, usize)> {
    let n = sim.num_nodes();
    let mut s = source_row(sim, sources)?;
    let mut is_source = vec![false; n];
    for &(a, _) in sources {
        is_source[a] = true;
    }
    let cap = match rounds {
        Rounds::Fixed(r) => r,
        Rounds::Auto => n,
    };
    let step = |layer: &[f64]| -> Vec<f64> {
        let mut next = vec![0.0; n];
        for (v, &x) in layer.iter().enumerate() {
            if x > 0.0 && !is_source[v] {
                for &(u, p) in sim.row(v) {
                    next[u] += x * p;
                }
            }
        }
        next
    };
    let mut done = 0;
    match rule {
        PropagationRule::FillZeros => {
            while done < cap {
                let next = step(&s);
                let mut changed = false;
                for u in 0..n {
                    if s[u] == 0.0 && !is_source[u] && next[u] > 0.0 {
                        s[u] = next[u];
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
                done += 1;
            }
        }
        PropagationRule::Accumulate => {
            let mut layer = s.clone();
            let start: f64 = layer.iter().sum();
            while done < cap {
                layer = step(&layer);
                let mass: f64 = layer.iter().sum();
                if !(mass > LAYER_TOL * start) {
                    break;
                }
                for u in 0..n {
                    s[u] += layer[u];
                }
                done += 1;
            }
        }
    }
    Ok((s, done))
}

/// Rescales so the maximum over `reference` nodes is one, clamps to `[0, 1]` and pins the
/// sources at one.
pub fn rescale(raw: &[f64], reference: &[bool], sources: &[usize]) -> Vec<f64> {
    let max = raw.iter().zip(reference).filter(|(_, &r)| r).map(|(&x, _)| x).fold(0.0, f64::max);
    let mut out: Vec<f64> = raw.iter().map(|&x| if max > 0.0 { (x / max).clamp(0.0, 1.0) } else { 0.0 }).collect();
    for &a in sources {
        out[a] = 1.0;
    }
    out
}

pub fn propagate_similarity(
    sim: &SimilarityField,
    sources: &[(usize, f64)],
    rounds: Rounds,
    rule: PropagationRule,
) -> Result<PropagatedSimilarity> {
    let (raw, rounds) = propagate_raw(sim, sources, rounds, rule)?;
    let ids: Vec<usize> = sources.iter().map(|s| s.0).collect();
    // absorbing nodes collect everything that reaches them and would swamp the scale
    let reference: Vec<bool> = (0..raw.len()).map(|u| !ids.contains(&u) && !sim.row(u).is_empty()).collect();
    Ok(PropagatedSimilarity { values: rescale(&raw, &reference, &ids), rounds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionStateReport {
    /// `(id, similarity)` sorted by id.
    pub states: Vec<(usize, f64)>,
    pub threshold: f64,
}

/// States with `sim_a >= theta * m`, leaving out `A`, `B` and every node one undirected hop
/// from either; `m` is the largest similarity among the remaining candidates.
pub fn identify_transition_states(
    sim_a: &[f64],
    g: &DirectedGraph,
    spec: &ReactantProductSpec,
    theta: f64,
) -> Result<TransitionStateReport> {
    if sim_a.len() != g.num_nodes() {
        return Err(Error::Shape(format!("{} similarities for {} nodes", sim_a.len(), g.num_nodes())));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::validation("identify.theta", "must lie in [0, 1]"));
    }
    let adj = g.undirected_neighbors();
    let mut excluded = vec![false; sim_a.len()];
    for &e in spec.reactant().iter().chain(spec.product()) {
        excluded[e] = true;
        for &nb in &adj[e] {
            excluded[nb] = true;
        }
    }
    let max = sim_a.iter().zip(&excluded).filter(|(_, &e)| !e).map(|(&s, _)| s).fold(0.0, f64::max);
    let threshold = theta * max;
    let states: Vec<(usize, f64)> = sim_a
        .iter()
        .enumerate()
        .filter(|&(u, &s)| !excluded[u] && s > 0.0 && s >= threshold)
        .map(|(u, &s)| (u, s))
        .collect();
    if states.is_empty() {
        return Err(Error::EmptyResult(format!("no state reaches similarity {threshold:.3} outside A, B and their neighbours")));
    }
    Ok(TransitionStateReport { states, threshold })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
    pub mean_similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Ordered by smallest member id.
    pub clusters: Vec<Cluster>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
}

pub const DEFAULT_RESTARTS: usize = 100;
const LLOYD_MAX_ITERS: usize = 300;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, ctr) in centers.iter().enumerate() {
        let d = sq_dist(p, ctr);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].to_vec()];
    while centers.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
        let idx = match WeightedIndex::new(&d) {
            Ok(w) => w.sample(rng),
            Err(_) => rng.random_range(0..points.len()),
        };
        centers.push(points[idx].to_vec());
    }
    centers
}

fn lloyd(points: &[&[f64]], mut centers: Vec<Vec<f64>>) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let dim = points[0].len();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..LLOYD_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = nearest(p, &centers).0;
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for c in 0..centers.len() {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points.iter().zip(&assign).map(|(p, &c)| sq_dist(p, &centers[c])).sum();
    (assign, centers, inertia)
}

/// k-means over the embedding vectors of nodes with positive similarity, k-means++ seeding,
/// best of `restarts` runs (ties go to the earliest restart).
pub fn cluster_embeddings(
    vectors: &[Vec<f64>],
    sim_a: &[f64],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<Clustering> {
    if vectors.len() != sim_a.len() {
        return Err(Error::Shape(format!("{} vectors for {} similarities", vectors.len(), sim_a.len())));
    }
    if k == 0 || restarts == 0 {
        return Err(Error::validation("identify.clusters", "k and restarts must be >= 1"));
    }
    let ids: Vec<usize> = (0..vectors.len()).filter(|&u| sim_a[u] > 0.0).collect();
    if ids.len() < k {
        return Err(Error::InsufficientPoints { needed: k, got: ids.len() });
    }
    let points: Vec<&[f64]> = ids.iter().map(|&u| vectors[u].as_slice()).collect();
    let runs: Vec<(Vec<usize>, Vec<Vec<f64>>, f64)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(&points, kmeans_pp(&points, k, &mut rng))
        })
        .collect();
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.2 < runs[best].2 {
            best = r;
        }
    }
    let (assign, centers, inertia) = runs.into_iter().nth(best).expect("at least one restart");
    let mut clusters: Vec<Cluster> = centers
        .into_iter()
        .enumerate()
        .map(|(c, centroid)| {
            let members: Vec<usize> = ids.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(&u, _)| u).collect();
            let mean_similarity =
                if members.is_empty() { 0.0 } else { members.iter().map(|&u| sim_a[u]).sum::<f64>() / members.len() as f64 };
            Cluster { members, centroid, mean_similarity }
        })
        .collect();
    clusters.sort_by_key(|c| c.members.first().copied().unwrap_or(usize::MAX));
    Ok(Clustering { clusters, inertia })
}
