#![allow(dead_code)]

use std::sync::Arc;

use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use tsnet::graph::DirectedGraph;
use tsnet::markov::{Generator, StateSpace};
use tsnet::tpt::ReactantProductSpec;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn line_space(n: usize) -> Arc<StateSpace> {
    Arc::new(StateSpace::from_bounds(&[(0.0, (n - 1) as f64, 1.0)]).unwrap())
}

/// Birth-death chain on `0..n` with the given forward and backward rates.
pub fn chain(forward: &[f64], backward: &[f64]) -> Generator {
    let n = forward.len() + 1;
    let mut t = Vec::new();
    for i in 0..n - 1 {
        t.push((i, i + 1, forward[i]));
        t.push((i + 1, i, backward[i]));
    }
    Generator::from_triplets(line_space(n), t).unwrap()
}

pub fn uniform_chain(n: usize) -> Generator {
    chain(&vec![1.0; n - 1], &vec![1.0; n - 1])
}

pub fn random_chain(n: usize, rng: &mut impl Rng) -> Generator {
    let f: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.1..2.0)).collect();
    let b: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.1..2.0)).collect();
    chain(&f, &b)
}

pub fn ends(n: usize) -> ReactantProductSpec {
    ReactantProductSpec::new([0], [n - 1]).unwrap()
}

/// Runs the embedded jump chain from `start` until it enters `A` or `B`; true for `B`.
pub fn hits_product(gen: &Generator, spec: &ReactantProductSpec, start: usize, rng: &mut impl Rng) -> bool {
    let mut x = start;
    loop {
        if spec.in_product(x) {
            return true;
        }
        if spec.in_reactant(x) {
            return false;
        }
        let total = gen.exit_rate(x);
        let mut r = rng.random::<f64>() * total;
        let mut next = None;
        for (j, w) in gen.out(x) {
            next = Some(j);
            if r < w {
                break;
            }
            r -= w;
        }
        x = next.expect("interior states have exits");
    }
}

/// Ring `0 -> 1 -> ... -> 0` plus random chords, never antiparallel.
pub fn random_strong_digraph(n: usize, extra: usize, rng: &mut impl Rng) -> DirectedGraph {
    let mut edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, rng.random_range(0.1..3.0))).collect();
    let mut tries = 0;
    while edges.len() < n + extra && tries < 100 * (n + extra) {
        tries += 1;
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v || edges.iter().any(|&(a, b, _)| (a == u && b == v) || (a == v && b == u)) {
            continue;
        }
        edges.push((u, v, rng.random_range(0.1..3.0)));
    }
    DirectedGraph::from_edges(n, edges).unwrap()
}

/// Random acyclic graph with forward edges `u -> v`, `u < v`.
pub fn random_dag(n: usize, p: f64, rng: &mut impl Rng) -> DirectedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if v == u + 1 || rng.random_bool(p) {
                edges.push((u, v, rng.random_range(0.1..3.0)));
            }
        }
    }
    DirectedGraph::from_edges(n, edges).unwrap()
}

/// Dense symmetric eigenvalues by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite score")
}

/// Best connected interval of a chain under the boundary-score objective, by enumeration with
/// exact rational sums: highest objective, then fewest nodes, then lowest first node.
pub fn best_interval(scores: &[f64]) -> (Vec<usize>, f64) {
    let n = scores.len();
    let mut best: Option<(BigRational, usize, usize, usize, f64)> = None;
    for i in 0..n {
        for j in i..n {
            if (i..=j).any(|k| scores[k] <= 0.0) {
                continue;
            }
            let mut obj = exact(0.0);
            let mut approx = 0.0;
            for k in i..=j {
                let outside = (k > 0 && k - 1 < i) || (k + 1 < n && k + 1 > j);
                if outside {
                    obj += exact(scores[k]);
                    approx += scores[k];
                }
            }
            let size = j - i + 1;
            let better = match &best {
                None => true,
                Some(b) => obj > b.0 || (obj == b.0 && (size < b.1 || (size == b.1 && i < b.2))),
            };
            if better {
                best = Some((obj, size, i, j, approx));
            }
        }
    }
    let b = best.expect("some positive score");
    ((b.2..=b.3).collect(), b.4)
}
