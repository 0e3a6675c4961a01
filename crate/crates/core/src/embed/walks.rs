//! Random-walk sampling on the current graph and the resulting neighbor probabilities.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::TransitionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkConfig {
    pub num_walks_per_node: usize,
    pub walk_length: usize,
    pub rng_seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig { num_walks_per_node: 100, walk_length: 9, rng_seed: 0 }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_walks_per_node == 0 {
            return Err(Error::validation("walks.num_walks_per_node", "must be >= 1"));
        }
        if self.walk_length == 0 {
            return Err(Error::validation("walks.walk_length", "must be >= 1"));
        }
        Ok(())
    }
}

/// Random stream for walks started at `node`: the run seed picks the key, the node the stream.
pub fn node_rng(seed: u64, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    rng
}

/// Visit counts of walks grouped by start node, and `NP(v, u) = counter(v, u) / sum_k counter(k, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborProbabilities {
    n: usize,
    /// For each start node `u`, `(v, counter(v, u))` sorted by `v`.
    counts: Vec<Vec<(usize, u64)>>,
    totals: Vec<u64>,
}

impl NeighborProbabilities {
    /// From explicit per-start counters.
    pub fn from_counts(n: usize, counts: Vec<Vec<(usize, u64)>>) -> Result<Self> {
        if counts.len() != n {
            return Err(Error::Shape(format!("{} counter rows for {n} nodes", counts.len())));
        }
        let mut counts = counts;
        for row in counts.iter_mut() {
            row.retain(|&(_, c)| c > 0);
            row.sort_unstable();
            if row.windows(2).any(|w| w[0].0 == w[1].0) || row.iter().any(|&(v, _)| v >= n) {
                return Err(Error::Shape("counter rows must hold distinct in-range nodes".into()));
            }
        }
        let totals = counts.iter().map(|r| r.iter().map(|&(_, c)| c).sum()).collect();
        Ok(NeighborProbabilities { n, counts, totals })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// `(v, counter(v, u))` for start node `u`.
    pub fn counts(&self, u: usize) -> &[(usize, u64)] {
        &self.counts[u]
    }

    pub fn total(&self, u: usize) -> u64 {
        self.totals[u]
    }

    /// Visited nodes of walks from `u` with their probabilities.
    pub fn column(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let t = self.totals[u] as f64;
        self.counts[u].iter().map(move |&(v, c)| (v, c as f64 / t))
    }

    pub fn get(&self, v: usize, u: usize) -> f64 {
        match self.counts[u].binary_search_by_key(&v, |&(w, _)| w) {
            Ok(k) => self.counts[u][k].1 as f64 / self.totals[u] as f64,
            Err(_) => 0.0,
        }
    }

    /// Writes `v u probability` lines ordered by start node, then visited node.
    pub fn write_triplets(&self, mut w: impl Write) -> Result<()> {
        for u in 0..self.n {
            for (v, p) in self.column(u) {
                writeln!(w, "{v} {u} {p:.16e}")?;
            }
        }
        Ok(())
    }
}

/// Runs `num_walks_per_node` walks of up to `walk_length` steps from every node with an
/// out-edge. The start node is not counted at the first step; later visits, including
/// returns to the start, all count. A walk stops early on reaching an absorbing node.
pub fn simulate_walks(p: &TransitionMatrix, cfg: &WalkConfig) -> Result<NeighborProbabilities> {
    cfg.validate()?;
    let n = p.num_nodes();
    let samplers: Vec<Option<WeightedIndex<f64>>> = (0..n)
        .map(|u| if p.is_absorbing(u) { None } else { WeightedIndex::new(p.row_probs(u)).ok() })
        .collect();
    let counts: Vec<Vec<(usize, u64)>> = (0..n)
        .into_par_iter()
        .map(|u| {
            if samplers[u].is_none() {
                return Vec::new();
            }
            let mut rng = node_rng(cfg.rng_seed, u);
            let mut counter = std::collections::BTreeMap::<usize, u64>::new();
            for _ in 0..cfg.num_walks_per_node {
                let mut cur = u;
                for _ in 0..cfg.walk_length {
                    let Some(dist) = &samplers[cur] else { break };
                    cur = p.row_targets(cur)[dist.sample(&mut rng)];
                    *counter.entry(cur).or_insert(0) += 1;
                }
            }
            counter.into_iter().collect()
        })
        .collect();
    NeighborProbabilities::from_counts(n, counts)
}

/// `N(u) = { v != u : NP(v, u) >= tau }`, sorted.
pub fn neighborhoods(np: &NeighborProbabilities, tau: f64) -> Result<Vec<Vec<usize>>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::validation("identify.tau", "must lie in [0, 1]"));
    }
    Ok((0..np.n).map(|u| np.column(u).filter(|&(v, p)| v != u && p >= tau).map(|(v, _)| v).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{transition_matrix, DirectedGraph};

    fn cfg(seed: u64) -> WalkConfig {
        WalkConfig { rng_seed: seed, ..WalkConfig::default() }
    }

    #[test]
    fn single_edge_forces_step() {
        let g = DirectedGraph::from_edges(2, vec![(0, 1, 2.0)]).unwrap();
        let np = simulate_walks(&transition_matrix(&g), &cfg(1)).unwrap();
        assert_eq!(np.counts(0), &[(1, 100)]);
        assert_eq!(np.get(1, 0), 1.0);
        assert_eq!(np.total(1), 0);
    }

    #[test]
    fn columns_normalize_and_repeat() {
        let g = DirectedGraph::from_edges(4, vec![(0, 1, 3.0), (0, 2, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
            .unwrap();
        let p = transition_matrix(&g);
        let a = simulate_walks(&p, &cfg(7)).unwrap();
        for u in 0..4 {
            let s: f64 = a.column(u).map(|(_, x)| x).sum();
            assert!((s - 1.0).abs() < 1e-12);
            // no sinks: every walk runs its full length
            assert_eq!(a.total(u), 900);
        }
        assert_eq!(a, simulate_walks(&p, &cfg(7)).unwrap());
        assert_ne!(a, simulate_walks(&p, &cfg(8)).unwrap());
    }

    #[test]
    fn neighborhood_thresholds() {
        let np = NeighborProbabilities::from_counts(4, vec![vec![(1, 5), (2, 3), (3, 2)], vec![], vec![(0, 1)], vec![]])
            .unwrap();
        assert_eq!(neighborhoods(&np, 0.0).unwrap()[0], vec![1, 2, 3]);
        assert_eq!(neighborhoods(&np, 0.25).unwrap()[0], vec![1, 2]);
        assert_eq!(neighborhoods(&np, 1.0).unwrap()[0], Vec::<usize>::new());
        assert_eq!(neighborhoods(&np, 1.0).unwrap()[2], vec![0]);
        assert!(neighborhoods(&np, 1.5).is_err());
    }

    #[test]
    fn triplet_export() {
        let np = NeighborProbabilities::from_counts(2, vec![vec![(1, 4)], vec![]]).unwrap();
        let mut out = Vec::new();
        np.write_triplets(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1 0 1.0000000000000000e0\n");
    }
}
