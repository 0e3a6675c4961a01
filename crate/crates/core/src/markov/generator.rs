use std::sync::Arc;

use crate::error::{Error, Result};
use crate::markov::StateSpace;

/// Infinitesimal generator of a Markov jump process on a [`StateSpace`].
///
/// Off-diagonal rates are stored in compressed rows (columns sorted, strictly positive);
/// the diagonal is implied as minus the row's total exit rate, so every row sums to zero.
#[derive(Debug, Clone)]
pub struct Generator {
    space: Arc<StateSpace>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    exit: Vec<f64>,
}

impl Generator {
    /// Assembles a generator from `(from, to, rate)` triplets. Duplicate pairs are summed and
    /// zero rates dropped; negative, non-finite or diagonal entries are rejected.
    pub fn from_triplets(
        space: Arc<StateSpace>,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let n = space.len();
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, r) in triplets {
            if i >= n || j >= n {
                return Err(Error::Shape(format!("rate ({i}, {j}) outside {n} states")));
            }
            if i == j {
                return Err(Error::Shape(format!("diagonal rate given for state {i}")));
            }
            if !r.is_finite() || r < 0.0 {
                return Err(Error::DegenerateGrid { state: i, rate: r });
            }
            if r > 0.0 {
                entries.push((i, j, r));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut rates: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, r) in entries {
            if last == Some((i, j)) {
                *rates.last_mut().unwrap() += r;
                continue;
            }
            last = Some((i, j));
            cols.push(j);
            rates.push(r);
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let exit = (0..n).map(|i| rates[row_ptr[i]..row_ptr[i + 1]].iter().sum()).collect();
        Ok(Generator { space, row_ptr, cols, rates, exit })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn space_arc(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.exit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exit.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Outgoing `(target, rate)` pairs of state `i`, excluding the diagonal.
    pub fn out(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.rates[span].iter().copied())
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Entry `l_ij` of the generator, diagonal included.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return -self.exit[i];
        }
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(k) => self.rates[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    /// Row sum `sum_j l_ij` recomputed from the stored entries.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.out(i).map(|(_, r)| r).sum::<f64>() - self.exit[i]
    }

    /// Largest absolute row sum; zero up to rounding for every valid generator.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.len()).map(|i| self.row_sum(i).abs()).fold(0.0, f64::max)
    }

    /// `(L f)_i = sum_j l_ij f_j`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.out(i).map(|(j, r)| r * f[j]).sum::<f64>() - self.exit[i] * f[i])
            .collect()
    }

    /// `(mu^T L)_j = sum_i mu_i l_ij`.
    pub fn left_apply(&self, mu: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = mu.iter().zip(&self.exit).map(|(m, e)| -m * e).collect();
        for (i, &m) in mu.iter().enumerate() {
            if m != 0.0 {
                for (j, r) in self.out(i) {
                    out[j] += m * r;
                }
            }
        }
        out
    }

    /// Incoming adjacency: for each state, the states with a positive rate into it.
    pub fn in_neighbors(&self) -> Vec<Vec<usize>> {
        let mut inn = vec![Vec::new(); self.len()];
        for i in 0..self.len() {
            for (j, _) in self.out(i) {
                inn[j].push(i);
            }
        }
        inn
    }

    /// States from which some state in `targets` can be reached along positive rates.
    pub fn can_reach(&self, targets: &[usize]) -> Vec<bool> {
        let inn = self.in_neighbors();
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = targets.to_vec();
        for &t in targets {
            seen[t] = true;
        }
        while let Some(v) = stack.pop() {
            for &u in &inn[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }

    /// States reachable from `sources` along positive rates.
    pub fn reachable_from(&self, sources: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = sources.to_vec();
        for &s in sources {
            seen[s] = true;
        }
        while let Some(u) = stack.pop() {
            for (v, _) in self.out(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Generator of the process restricted to the flagged states; jumps to removed
    /// states are dropped. Returns the old-id to new-id map.
    pub fn restrict(&self, keep: &[bool]) -> Result<(Generator, Vec<Option<usize>>)> {
        let (space, map) = self.space.restrict(keep)?;
        let mut triplets = Vec::new();
        for i in 0..self.len() {
            let Some(ni) = map[i] else { continue };
            for (j, r) in self.out(i) {
                if let Some(nj) = map[j] {
                    triplets.push((ni, nj, r));
                }
            }
        }
        Ok((Generator::from_triplets(Arc::new(space), triplets)?, map))
    }

    /// Whether `pi_i l_ij = pi_j l_ji` holds on every edge to relative tolerance `tol`.
    pub fn satisfies_detailed_balance(&self, pi: &[f64], tol: f64) -> bool {
        (0..self.len()).all(|i| {
            self.out(i).all(|(j, r)| {
                let a = pi[i] * r;
                let b = pi[j] * self.rate(j, i);
                (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
            })
        })
    }
}
