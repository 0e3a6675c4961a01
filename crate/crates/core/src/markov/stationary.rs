use std::collections::HashMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::markov::solve::sparse_solve;
use crate::markov::Generator;

/// Stationary masses below this are treated as unvisited states.
pub const MASS_FLOOR: f64 = 1e-300;

/// Relative residual accepted from the direct solve, measured against the largest
/// stationary outflow `max_i pi_i * exit_i`.
const RESIDUAL_TOL: f64 = 1e-9;

const POWER_MAX_ITERS: usize = 200_000;

/// Sweeps and relative-change target of the balance refinement.
const REFINE_MAX_SWEEPS: usize = 5_000;
const REFINE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDist {
    pi: Vec<f64>,
}

impl StationaryDist {
    /// Wraps a probability vector; entries must be nonnegative and sum to one.
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Shape("stationary vector has negative or non-finite entries".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Shape(format!("stationary vector sums to {total}")));
        }
        Ok(StationaryDist { pi })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// `max_j |(pi^T L)_j|`.
    pub fn residual(&self, gen: &Generator) -> f64 {
        gen.left_apply(&self.pi).iter().map(|r| r.abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for StationaryDist {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.pi[i]
    }
}

/// Closed communicating classes of the generator's jump graph, each sorted by id.
pub fn closed_classes(gen: &Generator) -> Vec<Vec<usize>> {
    let n = gen.len();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, gen.nnz());
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for (j, _) in gen.out(i) {
            graph.add_edge(nodes[i], nodes[j], ());
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut comp = vec![0usize; n];
    for (c, scc) in sccs.iter().enumerate() {
        for v in scc {
            comp[v.index()] = c;
        }
    }
    let mut closed: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, scc)| scc.iter().all(|v| gen.out(v.index()).all(|(j, _)| comp[j] == *c)))
        .map(|(_, scc)| {
            let mut ids: Vec<usize> = scc.iter().map(|v| v.index()).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    closed.sort();
    closed
}

/// Solves `pi^T L = 0`, `sum(pi) = 1`.
///
/// Transient states receive zero mass. The solve runs on the unique closed class with one
/// balance equation replaced by the normalization; if the sparse factorization fails or
/// leaves a large residual, shifted power iteration on the uniformized chain takes over.
pub fn stationary_distribution(gen: &Generator) -> Result<StationaryDist> {
    let classes = closed_classes(gen);
    if classes.len() != 1 {
        return Err(Error::Reducible { closed_classes: classes.len() });
    }
    let class = &classes[0];
    let direct = solve_on_class(gen, class).and_then(|pi| accept(gen, pi));
    let dist = match direct {
        Ok(dist) => dist,
        Err(_) => power_iteration(gen, class).and_then(|pi| accept(gen, pi))?,
    };
    accept(gen, refine(gen, class, dist.pi))
}

/// Gauss-Seidel sweeps of the balance equations `pi_j = sum_i pi_i l_ij / l_j`.
///
/// The solves above are accurate in absolute terms only, which leaves states with tiny mass
/// at round-off level; every term here is positive, so the sweeps restore their relative
/// accuracy without disturbing the bulk.
fn refine(gen: &Generator, class: &[usize], mut pi: Vec<f64>) -> Vec<f64> {
    let mut inflow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); gen.len()];
    for &i in class {
        for (j, r) in gen.out(i) {
            inflow[j].push((i, r));
        }
    }
    for _ in 0..REFINE_MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for &j in class {
            let exit = gen.exit_rate(j);
            if exit == 0.0 {
                continue;
            }
            let new = inflow[j].iter().map(|&(i, r)| pi[i] * r).sum::<f64>() / exit;
            let old = pi[j];
            if new != old {
                change = change.max((new - old).abs() / new.max(old));
            }
            pi[j] = new;
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        if change < REFINE_TOL {
            break;
        }
    }
    pi
}

fn solve_on_class(gen: &Generator, class: &[usize]) -> Result<Vec<f64>> {
    let n = gen.len();
    let m = class.len();
    let mut pi = vec![0.0; n];
    if m == 1 {
        pi[class[0]] = 1.0;
        return Ok(pi);
    }
    let local: HashMap<usize, usize> = class.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let pinned = m - 1;
    let mut entries = Vec::with_capacity(gen.nnz() + 2 * m);
    for (k, &i) in class.iter().enumerate() {
        if k != pinned {
            entries.push((k, k, -gen.exit_rate(i)));
        }
        for (j, r) in gen.out(i) {
            let kj = local[&j];
            if kj != pinned {
                // row kj of L^T collects inflow into state j
                entries.push((kj, k, r));
            }
        }
        entries.push((pinned, k, 1.0));
    }
    let mut rhs = vec![0.0; m];
    rhs[pinned] = 1.0;
    let x = sparse_solve(m, &entries, &rhs)?;
    for (k, &i) in class.iter().enumerate() {
        pi[i] = x[k];
    }
    Ok(pi)
}

fn accept(gen: &Generator, mut pi: Vec<f64>) -> Result<StationaryDist> {
    let scale = pi.iter().map(|p| p.abs()).fold(0.0, f64::max);
    let min = pi.iter().copied().fold(f64::INFINITY, f64::min);
    if !(scale > 0.0) || min < -1e-8 * scale {
        return Err(Error::SolverFailure(format!("stationary solve produced negative mass {min}")));
    }
    for p in pi.iter_mut() {
        if *p < MASS_FLOOR {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let outflow = pi.iter().enumerate().map(|(i, p)| p * gen.exit_rate(i)).fold(0.0, f64::max);
    let dist = StationaryDist { pi };
    let residual = dist.residual(gen);
    if residual > RESIDUAL_TOL * outflow.max(f64::MIN_POSITIVE) {
        return Err(Error::SolverFailure(format!(
            "stationary residual {residual:e} exceeds tolerance (outflow scale {outflow:e})"
        )));
    }
    Ok(dist)
}

fn power_iteration(gen: &Generator, class: &[usize]) -> Result<Vec<f64>> {
    let n = gen.len();
    let lambda = 1.05 * gen.max_exit_rate();
    if !(lambda > 0.0) {
        return Err(Error::SolverFailure("generator has no jumps".into()));
    }
    let mut pi = vec![0.0; n];
    for &i in class {
        pi[i] = 1.0 / class.len() as f64;
    }
    for _ in 0..POWER_MAX_ITERS {
        let flow = gen.left_apply(&pi);
        let mut change: f64 = 0.0;
        for (p, f) in pi.iter_mut().zip(&flow) {
            let step = f / lambda;
            *p += step;
            change = change.max(step.abs());
        }
        if change < 1e-15 {
            return Ok(pi);
        }
    }
    Err(Error::SolverFailure("power iteration did not converge".into()))
}

/// Generator of the time-reversed process, `l~_ij = pi_j l_ji / pi_i`.
///
/// States with mass below [`MASS_FLOOR`] are cut out of the support (no jumps in or out).
/// A cut state that still receives appreciable stationary inflow signals an inconsistent
/// `pi` and yields [`Error::ZeroStationaryMass`].
pub fn reversed_generator(gen: &Generator, pi: &StationaryDist) -> Result<Generator> {
    if pi.len() != gen.len() {
        return Err(Error::Shape(format!("pi has {} entries for {} states", pi.len(), gen.len())));
    }
    let p = pi.as_slice();
    let outflow = (0..gen.len()).map(|i| p[i] * gen.exit_rate(i)).fold(0.0, f64::max);
    let mut inflow = vec![0.0; gen.len()];
    let mut triplets = Vec::with_capacity(gen.nnz());
    for j in 0..gen.len() {
        if p[j] < MASS_FLOOR {
            continue;
        }
        for (i, r) in gen.out(j) {
            if p[i] < MASS_FLOOR {
                inflow[i] += p[j] * r;
                continue;
            }
            triplets.push((i, j, p[j] * r / p[i]));
        }
    }
    if let Some(state) = (0..gen.len()).find(|&i| inflow[i] > 1e-12 * outflow) {
        return Err(Error::ZeroStationaryMass { state });
    }
    Generator::from_triplets(gen.space_arc().clone(), triplets)
}
