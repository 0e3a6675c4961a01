//! Transition Path Theory: committors, reactive probability currents, effective currents,
//! and the committor-weighted current criterion for transition-state subnetworks.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::markov::solve::sparse_solve;
use crate::markov::{reversed_generator, Generator, StationaryDist, MASS_FLOOR};

/// Tolerance on committor bounds and on the scaled Dirichlet residual.
pub const COMMITTOR_TOL: f64 = 1e-10;

/// Reactant set `A` and product set `B`, as sorted state ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactantProductSpec {
    reactant: Vec<usize>,
    product: Vec<usize>,
}

impl ReactantProductSpec {
    pub fn new(reactant: impl IntoIterator<Item = usize>, product: impl IntoIterator<Item = usize>) -> Result<Self> {
        let a: BTreeSet<usize> = reactant.into_iter().collect();
        let b: BTreeSet<usize> = product.into_iter().collect();
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidSpec("reactant and product sets must be nonempty".into()));
        }
        if let Some(s) = a.intersection(&b).next() {
            return Err(Error::InvalidSpec(format!("state {s} is in both reactant and product")));
        }
        Ok(ReactantProductSpec { reactant: a.into_iter().collect(), product: b.into_iter().collect() })
    }

    pub fn reactant(&self) -> &[usize] {
        &self.reactant
    }

    pub fn product(&self) -> &[usize] {
        &self.product
    }

    pub fn in_reactant(&self, i: usize) -> bool {
        self.reactant.binary_search(&i).is_ok()
    }

    pub fn in_product(&self, i: usize) -> bool {
        self.product.binary_search(&i).is_ok()
    }

    fn check(&self, n: usize) -> Result<()> {
        match self.reactant.iter().chain(&self.product).find(|&&i| i >= n) {
            Some(i) => Err(Error::InvalidSpec(format!("state {i} outside {n} states"))),
            None => Ok(()),
        }
    }
}

/// Forward and backward committors over all states.
#[derive(Debug, Clone, PartialEq)]
pub struct CommittorPair {
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
}

impl CommittorPair {
    pub fn compute(gen: &Generator, pi: &StationaryDist, spec: &ReactantProductSpec) -> Result<Self> {
        Ok(CommittorPair { q_plus: forward_committor(gen, spec)?, q_minus: backward_committor(gen, pi, spec)? })
    }
}

/// Solves `sum_j l_ij q_j = 0` off the boundary with `q = 0` on `zero` and `q = 1` on `one`.
/// States flagged in `skip` are excluded from the system and set to zero.
fn dirichlet(gen: &Generator, zero: &[usize], one: &[usize], skip: &[bool]) -> Result<Vec<f64>> {
    let n = gen.len();
    let mut q = vec![0.0; n];
    let mut fixed = skip.to_vec();
    for &i in zero {
        fixed[i] = true;
    }
    for &i in one {
        fixed[i] = true;
        q[i] = 1.0;
    }
    let interior: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    if interior.is_empty() {
        return Ok(q);
    }

    let targets: Vec<usize> = zero.iter().chain(one).copied().collect();
    let reach = gen.can_reach(&targets);
    let stuck: Vec<usize> = interior.iter().copied().filter(|&i| !reach[i]).collect();
    if let Some(&first) = stuck.first() {
        return Err(Error::DisconnectedInterior { count: stuck.len(), first });
    }

    let local: HashMap<usize, usize> = interior.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let mut entries = Vec::with_capacity(gen.nnz() + interior.len());
    let mut rhs = vec![0.0; interior.len()];
    for (k, &i) in interior.iter().enumerate() {
        // rows scaled by the exit rate keep stiff generators well balanced
        let scale = 1.0 / gen.exit_rate(i);
        entries.push((k, k, -1.0));
        for (j, r) in gen.out(i) {
            if let Some(&kj) = local.get(&j) {
                entries.push((k, kj, r * scale));
            } else if q[j] != 0.0 {
                rhs[k] -= r * scale * q[j];
            }
        }
    }
    let x = sparse_solve(interior.len(), &entries, &rhs)?;
    for (k, &i) in interior.iter().enumerate() {
        let v = x[k];
        if !(-COMMITTOR_TOL..=1.0 + COMMITTOR_TOL).contains(&v) {
            return Err(Error::SolverFailure(format!("committor {v} at state {i} outside [0, 1]")));
        }
        q[i] = v.clamp(0.0, 1.0);
    }
    for &i in &interior {
        let res: f64 = gen.out(i).map(|(j, r)| r * (q[j] - q[i])).sum();
        if res.abs() > COMMITTOR_TOL * gen.exit_rate(i) {
            return Err(Error::SolverFailure(format!("committor residual {res:e} at state {i}")));
        }
    }
    Ok(q)
}

/// Probability of reaching `B` before `A`.
pub fn forward_committor(gen: &Generator, spec: &ReactantProductSpec) -> Result<Vec<f64>> {
    spec.check(gen.len())?;
    dirichlet(gen, spec.reactant(), spec.product(), &vec![false; gen.len()])
}

/// Probability that the process was last in `A` rather than `B`, computed as a forward
/// committor of the time-reversed process. States outside the support of `pi` carry no
/// reactive current and are assigned zero.
pub fn backward_committor(gen: &Generator, pi: &StationaryDist, spec: &ReactantProductSpec) -> Result<Vec<f64>> {
    spec.check(gen.len())?;
    let rev = reversed_generator(gen, pi)?;
    let skip: Vec<bool> = pi.as_slice().iter().map(|&p| p < MASS_FLOOR).collect();
    dirichlet(&rev, spec.product(), spec.reactant(), &skip)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentKind {
    Probability,
    Effective,
}

/// Nonnegative field on directed state pairs; zero entries are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentField {
    n: usize,
    kind: CurrentKind,
    edges: Vec<(usize, usize, f64)>,
}

impl CurrentField {
    /// Builds a field from `(i, j, value)` entries; self-pairs and non-positive values are dropped.
    pub fn from_entries(n: usize, kind: CurrentKind, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::Shape(format!("current entry ({i}, {j}) outside {n} states")));
            }
            if !v.is_finite() {
                return Err(Error::Shape(format!("non-finite current on ({i}, {j})")));
            }
            if i != j && v > 0.0 {
                edges.push((i, j, v));
            }
        }
        edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        edges.dedup_by(|b, a| {
            let same = (a.0, a.1) == (b.0, b.1);
            if same {
                a.2 += b.2;
            }
            same
        });
        Ok(CurrentField { n, kind, edges })
    }

    pub fn kind(&self) -> CurrentKind {
        self.kind
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.edges.binary_search_by(|e| (e.0, e.1).cmp(&(i, j))) {
            Ok(k) => self.edges[k].2,
            Err(_) => 0.0,
        }
    }

    /// Net outflow `sum_j f_ij - sum_j f_ji` at every state.
    pub fn divergence(&self) -> Vec<f64> {
        let mut div = vec![0.0; self.n];
        for &(i, j, v) in &self.edges {
            div[i] += v;
            div[j] -= v;
        }
        div
    }
}

/// `f_ij = pi_i q-_i l_ij q+_j` for `i != j`.
pub fn probability_current(
    pi: &StationaryDist,
    q_minus: &[f64],
    gen: &Generator,
    q_plus: &[f64],
) -> Result<CurrentField> {
    let n = gen.len();
    if pi.len() != n || q_minus.len() != n || q_plus.len() != n {
        return Err(Error::Shape(format!(
            "pi/q-/q+ lengths {}/{}/{} for {n} states",
            pi.len(),
            q_minus.len(),
            q_plus.len()
        )));
    }
    let entries = (0..n).flat_map(|i| {
        let w = pi[i] * q_minus[i];
        gen.out(i).map(move |(j, r)| (i, j, w * r * q_plus[j]))
    });
    CurrentField::from_entries(n, CurrentKind::Probability, entries)
}

/// `f+_ij = max(f_ij - f_ji, 0)`.
pub fn effective_current(f: &CurrentField) -> Result<CurrentField> {
    if f.kind != CurrentKind::Probability {
        return Err(Error::Shape("effective current needs a probability current".into()));
    }
    let entries = f.edges.iter().map(|&(i, j, v)| (i, j, (v - f.get(j, i)).max(0.0)));
    CurrentField::from_entries(f.n, CurrentKind::Effective, entries)
}

/// Total outgoing effective current per state.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCurrent {
    pub c_plus: Vec<f64>,
}

pub fn total_effective_current(f_plus: &CurrentField) -> Result<NodeCurrent> {
    if f_plus.kind != CurrentKind::Effective {
        return Err(Error::Shape("total effective current needs an effective current".into()));
    }
    let mut c_plus = vec![0.0; f_plus.n];
    for &(i, _, v) in &f_plus.edges {
        c_plus[i] += v;
    }
    Ok(NodeCurrent { c_plus })
}

/// Per-node scores and the selected subnetwork for one value of `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct TptTransitionStates {
    pub sigma: f64,
    pub scores: Vec<f64>,
    pub omega: Vec<usize>,
    pub objective: f64,
}

/// `s_i = C+_i exp(-(q+_i - 1/2)^2 / sigma^2)`, or with the exponent
/// `-((q+_i - 1/2)^2 + (q-_i - 1/2)^2) / sigma^2` for non-reversible processes.
pub fn tpt_scores(c_plus: &NodeCurrent, q_plus: &[f64], q_minus: &[f64], sigma: f64, reversible: bool) -> Vec<f64> {
    let s2 = sigma * sigma;
    c_plus
        .c_plus
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mut d = (q_plus[i] - 0.5).powi(2);
            if !reversible {
                d += (q_minus[i] - 0.5).powi(2);
            }
            c * (-d / s2).exp()
        })
        .collect()
}

/// Undirected adjacency of the effective-current support.
pub fn current_adjacency(f: &CurrentField) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); f.n];
    for &(i, j, _) in &f.edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Objective of a node set: summed score over its boundary, the members with at least one
/// neighbor outside the set.
pub fn boundary_objective(set: &[usize], scores: &[f64], adj: &[Vec<usize>]) -> f64 {
    let inside: BTreeSet<usize> = set.iter().copied().collect();
    set.iter()
        .filter(|&&i| adj[i].iter().any(|j| !inside.contains(j)))
        .map(|&i| scores[i])
        .sum()
}

/// Whether candidate `(objective, size, min id)` beats the incumbent: larger objective, then
/// smaller set, then lower smallest id.
pub fn better_subnetwork(cand: (f64, usize, usize), best: (f64, usize, usize)) -> bool {
    if cand.0 != best.0 {
        return cand.0 > best.0;
    }
    if cand.1 != best.1 {
        return cand.1 < best.1;
    }
    cand.2 < best.2
}

/// Relative gap below which two rounded objectives are compared exactly.
const NEAR_TIE: f64 = 1e-9;

/// Sorted connected component of `seed` within the nodes of `prefix`.
fn component(prefix: &[usize], seed: usize, adj: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut in_prefix = vec![false; n];
    for &v in prefix {
        in_prefix[v] = true;
    }
    let mut members = vec![seed];
    let mut seen = vec![false; n];
    seen[seed] = true;
    let mut head = 0;
    while head < members.len() {
        let v = members[head];
        head += 1;
        for &u in &adj[v] {
            if !seen[u] && in_prefix[u] {
                seen[u] = true;
                members.push(u);
            }
        }
    }
    members.sort_unstable();
    members
}

fn boundary_scores(set: &[usize], scores: &[f64], adj: &[Vec<usize>]) -> Vec<f64> {
    let inside: BTreeSet<usize> = set.iter().copied().collect();
    set.iter().filter(|&&i| adj[i].iter().any(|j| !inside.contains(j))).map(|&i| scores[i]).collect()
}

/// Compares `sum(a)` with `sum(b)` without rounding, via a nonoverlapping expansion of the
/// difference (components in increasing magnitude).
fn exact_sum_cmp(a: &[f64], b: &[f64]) -> Ordering {
    let mut e: Vec<f64> = Vec::new();
    for x in a.iter().copied().chain(b.iter().map(|&x| -x)) {
        let mut q = x;
        let mut next = Vec::with_capacity(e.len() + 1);
        for &c in &e {
            let s = q + c;
            let bv = s - q;
            let err = (q - (s - bv)) + (c - bv);
            if err != 0.0 {
                next.push(err);
            }
            q = s;
        }
        if q != 0.0 {
            next.push(q);
        }
        e = next;
    }
    match e.last() {
        None => Ordering::Equal,
        Some(&top) => top.partial_cmp(&0.0).unwrap_or(Ordering::Equal),
    }
}

struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
    min_id: Vec<usize>,
    objective: Vec<f64>,
}

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        self.min_id[a] = self.min_id[a].min(self.min_id[b]);
        self.objective[a] += self.objective[b];
        a
    }
}

/// Threshold sweep over the node scores. Nodes enter in decreasing score order (equal
/// scores by increasing id); after each entry the component containing the new node is
/// scored by [`boundary_objective`], and the best component seen is returned (ties per
/// [`better_subnetwork`]).
pub fn transition_states_tpt(
    c_plus: &NodeCurrent,
    q_plus: &[f64],
    q_minus: &[f64],
    sigma: f64,
    reversible: bool,
    f_plus: &CurrentField,
) -> Result<TptTransitionStates> {
    if !(sigma > 0.0) {
        return Err(Error::validation("sigma", "must be positive"));
    }
    let n = c_plus.c_plus.len();
    if q_plus.len() != n || q_minus.len() != n || f_plus.n != n {
        return Err(Error::Shape("score inputs disagree in length".into()));
    }
    let scores = tpt_scores(c_plus, q_plus, q_minus, sigma, reversible);
    let adj = current_adjacency(f_plus);

    let mut order: Vec<usize> = (0..n).filter(|&i| scores[i] > 0.0).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut dsu = Dsu { parent: (0..n).collect(), size: vec![1; n], min_id: (0..n).collect(), objective: vec![0.0; n] };
    let mut added = vec![false; n];
    let mut outside: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut best: Option<((f64, usize, usize), usize, usize)> = None;

    for (rank, &v) in order.iter().enumerate() {
        added[v] = true;
        if outside[v] > 0 {
            dsu.objective[v] = scores[v];
        }
        for &u in &adj[v] {
            if !added[u] {
                continue;
            }
            outside[u] -= 1;
            outside[v] -= 1;
            if outside[u] == 0 {
                let r = dsu.find(u);
                dsu.objective[r] -= scores[u];
            }
            if outside[v] == 0 {
                let r = dsu.find(v);
                dsu.objective[r] -= scores[v];
            }
            dsu.union(u, v);
        }
        let r = dsu.find(v);
        let key = (dsu.objective[r].max(0.0), dsu.size[r], dsu.min_id[r]);
        let better = match best {
            None => true,
            Some((b, b_rank, b_seed)) => {
                let (lo, hi) = (key.0.min(b.0), key.0.max(b.0));
                if hi > 0.0 && hi - lo <= NEAR_TIE * hi {
                    // rounded sums cannot separate these; compare the exact sums
                    let cand = boundary_scores(&component(&order[..=rank], v, &adj, n), &scores, &adj);
                    let inc = boundary_scores(&component(&order[..=b_rank], b_seed, &adj, n), &scores, &adj);
                    match exact_sum_cmp(&cand, &inc) {
                        Ordering::Equal => better_subnetwork((0.0, key.1, key.2), (0.0, b.1, b.2)),
                        ord => ord == Ordering::Greater,
                    }
                } else {
                    better_subnetwork(key, b)
                }
            }
        };
        if better {
            best = Some((key, rank, v));
        }
    }

    let Some((_, rank, seed)) = best else {
        return Ok(TptTransitionStates { sigma, scores, omega: Vec::new(), objective: 0.0 });
    };
    let omega = component(&order[..=rank], seed, &adj, n);
    let objective = boundary_objective(&omega, &scores, &adj);
    Ok(TptTransitionStates { sigma, scores, omega, objective })
}
