//! Directed current graph, its random-walk transition matrix and the combinatorial Laplacian.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::markov::{stationary_distribution, Generator, StateSpace, StationaryDist};
use crate::tpt::{CurrentField, CurrentKind};

/// Edges whose current is below this fraction of the largest current are dropped.
pub const EDGE_CUTOFF: f64 = 1e-14;

/// Weighted digraph on state ids with edges in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    row_ptr: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl DirectedGraph {
    /// Builds a graph from `(u, v, w)` edges; rejects self-loops, non-positive weights,
    /// duplicates and antiparallel pairs.
    pub fn from_edges(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in edges.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::Shape(format!("duplicate edge {} -> {}", w[0].0, w[0].1)));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &(u, v, w) in &edges {
            if u >= n || v >= n {
                return Err(Error::Shape(format!("edge {u} -> {v} outside {n} nodes")));
            }
            if u == v {
                return Err(Error::Shape(format!("self-loop at {u}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Shape(format!("edge {u} -> {v} has weight {w}")));
            }
            row_ptr[u + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let g = DirectedGraph {
            n,
            row_ptr,
            targets: edges.iter().map(|e| e.1).collect(),
            weights: edges.iter().map(|e| e.2).collect(),
        };
        for &(u, v, _) in &edges {
            if g.weight(v, u) > 0.0 {
                return Err(Error::Shape(format!("antiparallel edges between {u} and {v}")));
            }
        }
        Ok(g)
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn out(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[u]..self.row_ptr[u + 1];
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.row_ptr[u + 1] - self.row_ptr[u]
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let r = self.row_ptr[u]..self.row_ptr[u + 1];
        match self.targets[r.clone()].binary_search(&v) {
            Ok(k) => self.weights[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |u| self.out(u).map(move |(v, w)| (u, v, w)))
    }

    /// Nodes touching at least one edge.
    pub fn active_nodes(&self) -> Vec<bool> {
        let mut active = vec![false; self.n];
        for (u, v, _) in self.edges() {
            active[u] = true;
            active[v] = true;
        }
        active
    }

    /// Undirected adjacency lists, sorted.
    pub fn undirected_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (u, v, _) in self.edges() {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Writes one `u v weight` line per edge.
    pub fn write_edge_list(&self, mut w: impl Write) -> Result<()> {
        for (u, v, x) in self.edges() {
            writeln!(w, "{u} {v} {x:.16e}")?;
        }
        Ok(())
    }
}

/// Graph with an edge `u -> v` of weight `f+_uv` for every effective current above the
/// relative cutoff.
pub fn build_current_graph(f_plus: &CurrentField) -> Result<DirectedGraph> {
    if f_plus.kind() != CurrentKind::Effective {
        return Err(Error::Shape("current graph needs an effective current".into()));
    }
    let max = f_plus.edges().iter().map(|e| e.2).fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::EmptyGraph);
    }
    let edges: Vec<_> = f_plus.edges().iter().copied().filter(|e| e.2 >= EDGE_CUTOFF * max).collect();
    DirectedGraph::from_edges(f_plus.num_states(), edges)
}

/// Row-stochastic random-walk matrix `p(u, v) = w(u, v) / sum_k w(u, k)`; rows of nodes
/// without out-edges are empty and flagged absorbing.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
}

impl TransitionMatrix {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[u]..self.row_ptr[u + 1];
        self.targets[r.clone()].iter().copied().zip(self.probs[r].iter().copied())
    }

    pub fn row_targets(&self, u: usize) -> &[usize] {
        &self.targets[self.row_ptr[u]..self.row_ptr[u + 1]]
    }

    pub fn row_probs(&self, u: usize) -> &[f64] {
        &self.probs[self.row_ptr[u]..self.row_ptr[u + 1]]
    }

    pub fn is_absorbing(&self, u: usize) -> bool {
        self.row_ptr[u] == self.row_ptr[u + 1]
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.row(u).find(|&(t, _)| t == v).map_or(0.0, |(_, p)| p)
    }
}

pub fn transition_matrix(g: &DirectedGraph) -> TransitionMatrix {
    let mut probs = Vec::with_capacity(g.num_edges());
    for u in 0..g.n {
        let total: f64 = g.out(u).map(|(_, w)| w).sum();
        probs.extend(g.out(u).map(|(_, w)| w / total));
    }
    TransitionMatrix { n: g.n, row_ptr: g.row_ptr.clone(), targets: g.targets.clone(), probs }
}

/// Stationary distribution of the walk, from the generator `P - I`.
pub fn walk_stationary_distribution(p: &TransitionMatrix) -> Result<StationaryDist> {
    let space = Arc::new(StateSpace::from_bounds(&[(0.0, p.n.max(2) as f64 - 1.0, 1.0)])?);
    let triplets = (0..p.n).flat_map(|u| p.row(u).map(move |(v, x)| (u, v, x)));
    let gen = Generator::from_triplets(space, triplets)?;
    stationary_distribution(&gen)
}

/// Sparse symmetric matrix stored by `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SymmetricMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    /// `y^T M y`.
    pub fn quadratic_form(&self, y: &[f64]) -> f64 {
        self.entries().map(|(i, j, v)| y[i] * v * y[j]).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.entries() {
            d[i][j] = v;
        }
        d
    }
}

/// `L = Phi - (Phi P + P^T Phi) / 2` with `Phi = diag(pi)`.
pub fn combinatorial_laplacian(p: &TransitionMatrix, pi: &[f64]) -> Result<SymmetricMatrix> {
    if pi.len() != p.n {
        return Err(Error::Shape(format!("pi has {} entries for {} nodes", pi.len(), p.n)));
    }
    let mut entries = BTreeMap::new();
    for (u, &w) in pi.iter().enumerate() {
        if w != 0.0 {
            *entries.entry((u, u)).or_insert(0.0) += w;
        }
    }
    for u in 0..p.n {
        for (v, x) in p.row(u) {
            let half = 0.5 * pi[u] * x;
            *entries.entry((u, v)).or_insert(0.0) -= half;
            *entries.entry((v, u)).or_insert(0.0) -= half;
        }
    }
    Ok(SymmetricMatrix { n: p.n, entries })
}

/// `sum_u pi_u sum_v p(u, v) (y_u - y_v)^2`, which equals `2 y^T L y` when `pi` is
/// stationary for `P` and every row of `P` is stochastic.
pub fn dirichlet_energy(y: &[f64], p: &TransitionMatrix, pi: &[f64]) -> Result<f64> {
    if y.len() != p.n || pi.len() != p.n {
        return Err(Error::Shape("dirichlet_energy inputs disagree in length".into()));
    }
    Ok((0..p.n).map(|u| pi[u] * p.row(u).map(|(v, x)| x * (y[u] - y[v]).powi(2)).sum::<f64>()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_from_current() {
        let f = CurrentField::from_entries(2, CurrentKind::Effective, vec![(0, 1, 1.5)]).unwrap();
        let g = build_current_graph(&f).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1, 1.5)]);
        let empty = CurrentField::from_entries(2, CurrentKind::Effective, vec![]).unwrap();
        assert!(matches!(build_current_graph(&empty), Err(Error::EmptyGraph)));
    }

    #[test]
    fn relative_cutoff_drops_tiny_edges() {
        let f = CurrentField::from_entries(3, CurrentKind::Effective, vec![(0, 1, 1e-120), (1, 2, 1e-136)]).unwrap();
        let g = build_current_graph(&f).unwrap();
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn probabilities_normalize_out_weights() {
        let g = DirectedGraph::from_edges(3, vec![(0, 1, 3.0), (0, 2, 1.0), (1, 2, 0.2)]).unwrap();
        let p = transition_matrix(&g);
        assert_eq!(p.get(0, 1), 0.75);
        assert_eq!(p.get(0, 2), 0.25);
        assert_eq!(p.get(1, 2), 1.0);
        assert!(p.is_absorbing(2));
    }

    #[test]
    fn antiparallel_and_loops_rejected() {
        assert!(DirectedGraph::from_edges(2, vec![(0, 1, 1.0), (1, 0, 1.0)]).is_err());
        assert!(DirectedGraph::from_edges(2, vec![(0, 0, 1.0)]).is_err());
        assert!(DirectedGraph::from_edges(2, vec![(0, 1, 0.0)]).is_err());
    }

    fn two_cycle() -> TransitionMatrix {
        TransitionMatrix { n: 2, row_ptr: vec![0, 1, 2], targets: vec![1, 0], probs: vec![1.0, 1.0] }
    }

    #[test]
    fn two_cycle_laplacian_by_hand() {
        let l = combinatorial_laplacian(&two_cycle(), &[0.5, 0.5]).unwrap();
        assert_eq!(l.to_dense(), vec![vec![0.5, -0.5], vec![-0.5, 0.5]]);
        assert_eq!(dirichlet_energy(&[1.0, 0.0], &two_cycle(), &[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(dirichlet_energy(&[3.0, 3.0], &two_cycle(), &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn walk_stationary_of_cycle() {
        let pi = walk_stationary_distribution(&two_cycle()).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn edge_list_format() {
        let g = DirectedGraph::from_edges(3, vec![(2, 0, 0.5)]).unwrap();
        let mut out = Vec::new();
        g.write_edge_list(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "2 0 5.0000000000000000e-1\n");
    }
}
