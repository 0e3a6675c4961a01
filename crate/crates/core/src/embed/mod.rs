//! Node embeddings trained on random-walk neighbor probabilities.
//!
//! The similarity of `v` to `u` is the NP-weighted softmax
//! `Pr(v | e(u)) = exp(e(v).e(u)) NP(v, u) / sum_w exp(e(w).e(u)) NP(w, u)`, and training
//! maximizes `V[e] = sum_u pi_u sum_{v in N(u)} Pr(v | e(u))` by full-batch gradient ascent.

mod encoder;
mod walks;

pub use encoder::{sigmoid, Encoder, EncoderKind, Layer};
pub use walks::{neighborhoods, node_rng, simulate_walks, NeighborProbabilities, WalkConfig};

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vectors: Vec<Vec<f64>>,
    pub encoder: Encoder,
    /// Objective before training, then after every iteration.
    pub log: Vec<f64>,
}

impl Embedding {
    pub fn from_encoder(encoder: Encoder, inputs: &[Vec<f64>]) -> Self {
        let vectors = encode_all(&encoder, inputs);
        Embedding { vectors, encoder, log: Vec::new() }
    }

    pub fn dimension(&self) -> usize {
        self.encoder.output_dim()
    }
}

fn encode_all(encoder: &Encoder, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    inputs.par_iter().map(|x| encoder.encode(x)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(v, Pr(v | e(u)))` over the walk support of `u`.
fn softmax_row(z: &[Vec<f64>], np: &NeighborProbabilities, u: usize) -> Vec<(usize, f64)> {
    let scores: Vec<(usize, f64, f64)> = np.column(u).map(|(w, p)| (w, dot(&z[w], &z[u]), p)).collect();
    let m = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<(usize, f64)> = scores.iter().map(|&(w, s, p)| (w, (s - m).exp() * p)).collect();
    let total: f64 = weights.iter().map(|w| w.1).sum();
    weights.into_iter().map(|(w, e)| (w, e / total)).collect()
}

/// `Pr(v | e(u))`; zero when `NP(v, u) = 0`.
pub fn conditional_probability(emb: &Embedding, np: &NeighborProbabilities, u: usize, v: usize) -> Result<f64> {
    if np.total(u) == 0 {
        return Err(Error::IsolatedNode(u));
    }
    Ok(softmax_row(&emb.vectors, np, u).into_iter().find(|&(w, _)| w == v).map_or(0.0, |(_, p)| p))
}

/// Full softmax rows `Pr(. | e(u))` for every node with walks.
pub fn softmax_rows(emb: &Embedding, np: &NeighborProbabilities) -> Vec<Vec<(usize, f64)>> {
    (0..np.num_nodes())
        .into_par_iter()
        .map(|u| if np.total(u) == 0 { Vec::new() } else { softmax_row(&emb.vectors, np, u) })
        .collect()
}

struct Terms {
    value: f64,
    /// `(w, dV/ds_w)` with `s_w = e(w).e(u)`.
    grads: Vec<(usize, f64)>,
}

fn node_terms(z: &[Vec<f64>], np: &NeighborProbabilities, nbhd: &[usize], pi_u: f64, u: usize) -> Terms {
    if pi_u == 0.0 || nbhd.is_empty() || np.total(u) == 0 {
        return Terms { value: 0.0, grads: Vec::new() };
    }
    let row = softmax_row(z, np, u);
    let in_n = |w: usize| nbhd.binary_search(&w).is_ok();
    let c: f64 = row.iter().filter(|(w, _)| in_n(*w)).map(|r| r.1).sum();
    let grads = row
        .iter()
        .map(|&(w, p)| (w, pi_u * p * (if in_n(w) { 1.0 } else { 0.0 } - c)))
        .collect();
    Terms { value: pi_u * c, grads }
}

fn check_shapes(n: usize, np: &NeighborProbabilities, nbhd: &[Vec<usize>], pi: &[f64]) -> Result<()> {
    if np.num_nodes() != n || nbhd.len() != n || pi.len() != n {
        return Err(Error::Shape(format!(
            "embedding has {n} nodes, NP {}, neighborhoods {}, pi {}",
            np.num_nodes(),
            nbhd.len(),
            pi.len()
        )));
    }
    Ok(())
}

fn objective_of(z: &[Vec<f64>], np: &NeighborProbabilities, nbhd: &[Vec<usize>], pi: &[f64]) -> f64 {
    let values: Vec<f64> = (0..z.len()).into_par_iter().map(|u| node_terms(z, np, &nbhd[u], pi[u], u).value).collect();
    values.iter().sum()
}

/// `V[e] = sum_u pi_u sum_{v in N(u)} Pr(v | e(u))`.
pub fn objective(emb: &Embedding, np: &NeighborProbabilities, nbhd: &[Vec<usize>], pi: &[f64]) -> Result<f64> {
    check_shapes(emb.vectors.len(), np, nbhd, pi)?;
    Ok(objective_of(&emb.vectors, np, nbhd, pi))
}

/// Objective and its gradient with respect to the flattened encoder parameters.
///
/// With `C_u = sum_{v in N(u)} Pr(v | e(u))`, the derivative of `pi_u C_u` with respect to
/// `s_w = e(w).e(u)` is `pi_u Pr(w | e(u)) ([w in N(u)] - C_u)`; it reaches `e(w)` through
/// `e(u)` and `e(u)` through `e(w)`, then the encoder by backpropagation.
pub fn objective_gradient(
    encoder: &Encoder,
    inputs: &[Vec<f64>],
    np: &NeighborProbabilities,
    nbhd: &[Vec<usize>],
    pi: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = inputs.len();
    check_shapes(n, np, nbhd, pi)?;
    let z = encode_all(encoder, inputs);
    let terms: Vec<Terms> = (0..n).into_par_iter().map(|u| node_terms(&z, np, &nbhd[u], pi[u], u)).collect();
    let m = encoder.output_dim();
    let mut dz = vec![vec![0.0; m]; n];
    let mut value = 0.0;
    for (u, t) in terms.iter().enumerate() {
        value += t.value;
        for &(w, g) in &t.grads {
            for k in 0..m {
                dz[w][k] += g * z[u][k];
                dz[u][k] += g * z[w][k];
            }
        }
    }
    let np_params = encoder.num_params();
    let partial: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .with_min_len(64)
        .fold(
            || vec![0.0; np_params],
            |mut acc, u| {
                if dz[u].iter().any(|&d| d != 0.0) {
                    encoder.backprop(&inputs[u], &dz[u], &mut acc);
                }
                acc
            },
        )
        .collect();
    // rayon's fold splits vary between runs; re-add per node sequentially when more than
    // one partial exists so the result does not depend on scheduling
    let grad = if partial.len() <= 1 {
        partial.into_iter().next().unwrap_or_else(|| vec![0.0; np_params])
    } else {
        let mut g = vec![0.0; np_params];
        for u in 0..n {
            if dz[u].iter().any(|&d| d != 0.0) {
                encoder.backprop(&inputs[u], &dz[u], &mut g);
            }
        }
        g
    };
    Ok((value, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub encoder: EncoderKind,
    pub dimension: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub init_scale: f64,
    pub backtracking: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            encoder: EncoderKind::Layered,
            dimension: 2,
            hidden_layers: 2,
            hidden_width: 8,
            learning_rate: 0.5,
            iterations: 500,
            init_scale: 0.1,
            backtracking: true,
            seed: 0,
        }
    }
}

/// Maximum number of step halvings per iteration.
pub const MAX_HALVINGS: usize = 30;

/// Full-batch gradient ascent. With backtracking, each iteration starts from the configured
/// rate and halves it until the objective does not decrease; if no step qualifies the
/// parameters stay put.
pub fn train_embedding(
    inputs: &[Vec<f64>],
    np: &NeighborProbabilities,
    nbhd: &[Vec<usize>],
    pi: &[f64],
    cfg: &TrainConfig,
) -> Result<Embedding> {
    if !(cfg.learning_rate >= 0.0) || !cfg.learning_rate.is_finite() {
        return Err(Error::validation("embed.learning_rate", "must be finite and >= 0"));
    }
    let d = inputs.first().map_or(0, |x| x.len());
    let encoder = Encoder::new(cfg.encoder, d, cfg.dimension, cfg.hidden_layers, cfg.hidden_width, cfg.init_scale, cfg.seed)?;
    train_from(encoder, inputs, np, nbhd, pi, cfg)
}

/// Training from a given starting encoder.
pub fn train_from(
    mut encoder: Encoder,
    inputs: &[Vec<f64>],
    np: &NeighborProbabilities,
    nbhd: &[Vec<usize>],
    pi: &[f64],
    cfg: &TrainConfig,
) -> Result<Embedding> {
    let eval = |p: &[f64], enc: &mut Encoder| -> Result<f64> {
        enc.set_params(p)?;
        Ok(objective_of(&encode_all(enc, inputs), np, nbhd, pi))
    };
    let (mut value, mut grad) = objective_gradient(&encoder, inputs, np, nbhd, pi)?;
    if !value.is_finite() {
        return Err(Error::Diverged { iteration: 0, value });
    }
    let mut params = encoder.params();
    let mut log = vec![value];
    let mut trial_enc = encoder.clone();
    for it in 1..=cfg.iterations {
        let mut step = cfg.learning_rate;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p + step * g).collect();
            let v = eval(&trial, &mut trial_enc)?;
            if !cfg.backtracking {
                if !v.is_finite() {
                    return Err(Error::Diverged { iteration: it, value: v });
                }
                accepted = Some((trial, v));
                break;
            }
            if v.is_finite() && v >= value {
                accepted = Some((trial, v));
                break;
            }
            step *= 0.5;
        }
        if let Some((p, _)) = accepted {
            params = p;
            encoder.set_params(&params)?;
            let (v, g) = objective_gradient(&encoder, inputs, np, nbhd, pi)?;
            value = v;
            grad = g;
        }
        log.push(value);
    }
    encoder.set_params(&params)?;
    let mut emb = Embedding::from_encoder(encoder, inputs);
    emb.log = log;
    Ok(emb)
}

/// Writes `iteration,objective` rows.
pub fn write_train_log(log: &[f64], mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "iteration,objective")?;
    for (i, v) in log.iter().enumerate() {
        writeln!(w, "{i},{v:.16e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(vectors: Vec<Vec<f64>>) -> Embedding {
        let enc = Encoder::new(EncoderKind::Linear, 1, vectors[0].len(), 0, 0, 0.0, 0).unwrap();
        Embedding { vectors, encoder: enc, log: vec![] }
    }

    fn np3() -> NeighborProbabilities {
        NeighborProbabilities::from_counts(3, vec![vec![(1, 3), (2, 1)], vec![(2, 2)], vec![]]).unwrap()
    }

    #[test]
    fn equal_vectors_reduce_to_np() {
        let e = fixed(vec![vec![0.3, 0.1]; 3]);
        assert!((conditional_probability(&e, &np3(), 0, 1).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(conditional_probability(&e, &np3(), 1, 0).unwrap(), 0.0);
        assert!(matches!(conditional_probability(&e, &np3(), 2, 0), Err(Error::IsolatedNode(2))));
    }

    #[test]
    fn hand_softmax() {
        // s_1 = 1, s_2 = -1: weights 0.75 e and 0.25 / e
        let e = fixed(vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]]);
        let a = 0.75 * 1f64.exp();
        let b = 0.25 * (-1f64).exp();
        let p = conditional_probability(&e, &np3(), 0, 1).unwrap();
        assert!((p - a / (a + b)).abs() < 1e-15);
    }

    #[test]
    fn objective_degenerate_cases() {
        let e = fixed(vec![vec![0.5]; 3]);
        let np = np3();
        let pi = [0.2, 0.3, 0.5];
        let single = vec![vec![], vec![2], vec![]];
        assert!((objective(&e, &np, &single, &pi).unwrap() - 0.3).abs() < 1e-15);
        let empty = vec![vec![]; 3];
        assert_eq!(objective(&e, &np, &empty, &pi).unwrap(), 0.0);
    }

    #[test]
    fn zero_rate_keeps_parameters() {
        let np = np3();
        let nb = neighborhoods(&np, 0.3).unwrap();
        let inputs = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let cfg = TrainConfig { learning_rate: 0.0, iterations: 5, encoder: EncoderKind::Linear, ..TrainConfig::default() };
        let emb = train_embedding(&inputs, &np, &nb, &[0.2, 0.3, 0.5], &cfg).unwrap();
        let start = Encoder::new(EncoderKind::Linear, 1, 2, 2, 8, 0.1, 0).unwrap();
        assert_eq!(emb.encoder, start);
        assert!(emb.log.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(emb.log.len(), 6);
    }
}
