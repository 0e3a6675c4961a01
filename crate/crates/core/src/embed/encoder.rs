//! Parametric maps from state coordinates to embedding vectors.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// `e(u) = E u` with `E` of shape `m x d`.
    Linear,
    /// Sigmoid hidden layers followed by an affine output layer.
    Layered,
}

/// Affine map `W x + b` (no bias for the linear encoder), optionally followed by a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
    pub sigmoid: bool,
}

impl Layer {
    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, |b| b.len())
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                let mut a: f64 = row.iter().zip(x).map(|(w, x)| w * x).sum();
                if let Some(b) = &self.bias {
                    a += b[o];
                }
                if self.sigmoid {
                    sigmoid(a)
                } else {
                    a
                }
            })
            .collect()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub kind: EncoderKind,
    pub layers: Vec<Layer>,
}

impl Encoder {
    /// Encoder from `input_dim` coordinates to `output_dim` components, parameters drawn
    /// uniformly from `[-init_scale, init_scale]`.
    pub fn new(
        kind: EncoderKind,
        input_dim: usize,
        output_dim: usize,
        hidden_layers: usize,
        hidden_width: usize,
        init_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::validation("embed.dimension", "input and output dimensions must be >= 1"));
        }
        if !(init_scale >= 0.0) || !init_scale.is_finite() {
            return Err(Error::validation("embed.init_scale", "must be finite and >= 0"));
        }
        let shapes: Vec<(usize, usize, bool)> = match kind {
            EncoderKind::Linear => vec![(input_dim, output_dim, false)],
            EncoderKind::Layered => {
                if hidden_layers == 0 || hidden_width == 0 {
                    return Err(Error::validation("embed.hidden_layers", "layered encoder needs hidden layers of width >= 1"));
                }
                let mut s = vec![(input_dim, hidden_width, true)];
                for _ in 1..hidden_layers {
                    s.push((hidden_width, hidden_width, true));
                }
                s.push((hidden_width, output_dim, false));
                s
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let mut draw = |k: usize| -> Vec<f64> {
            (0..k).map(|_| if init_scale > 0.0 { rng.random_range(-init_scale..=init_scale) } else { 0.0 }).collect()
        };
        let layers = shapes
            .into_iter()
            .map(|(i, o, sig)| Layer {
                inputs: i,
                outputs: o,
                weights: draw(i * o),
                bias: (kind == EncoderKind::Layered).then(|| draw(o)),
                sigmoid: sig,
            })
            .collect();
        Ok(Encoder { kind, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Parameters flattened layer by layer: weights, then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            if let Some(b) = &l.bias {
                p.extend_from_slice(b);
            }
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::Shape(format!("{} parameters for an encoder with {}", p.len(), self.num_params())));
        }
        let mut k = 0;
        for l in self.layers.iter_mut() {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[k..k + nw]);
            k += nw;
            if let Some(b) = &mut l.bias {
                let nb = b.len();
                b.copy_from_slice(&p[k..k + nb]);
                k += nb;
            }
        }
        Ok(())
    }

    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        self.layers.iter().fold(x.to_vec(), |h, l| l.forward(&h))
    }

    /// Adds `(d e(x) / d params)^T dz` into `grad`.
    pub fn backprop(&self, x: &[f64], dz: &[f64], grad: &mut [f64]) {
        let mut acts = vec![x.to_vec()];
        for l in &self.layers {
            let next = l.forward(acts.last().expect("input activation"));
            acts.push(next);
        }
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |k, l| {
                let o = *k;
                *k += l.num_params();
                Some(o)
            })
            .collect();
        let mut delta = dz.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            if l.sigmoid {
                for (d, a) in delta.iter_mut().zip(&acts[li + 1]) {
                    *d *= a * (1.0 - a);
                }
            }
            let input = &acts[li];
            let off = offsets[li];
            for o in 0..l.outputs {
                for i in 0..l.inputs {
                    grad[off + o * l.inputs + i] += delta[o] * input[i];
                }
            }
            if l.bias.is_some() {
                let boff = off + l.weights.len();
                for o in 0..l.outputs {
                    grad[boff + o] += delta[o];
                }
            }
            if li > 0 {
                let mut prev = vec![0.0; l.inputs];
                for o in 0..l.outputs {
                    for i in 0..l.inputs {
                        prev[i] += l.weights[o * l.inputs + i] * delta[o];
                    }
                }
                delta = prev;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_matrix_product() {
        let mut e = Encoder::new(EncoderKind::Linear, 3, 2, 0, 0, 0.1, 1).unwrap();
        e.set_params(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(e.encode(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
    }

    #[test]
    fn layered_shapes_and_init_range() {
        let e = Encoder::new(EncoderKind::Layered, 3, 2, 2, 8, 0.1, 5).unwrap();
        assert_eq!(e.num_params(), 3 * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2);
        assert!(e.params().iter().all(|p| p.abs() <= 0.1));
        assert_eq!(e.encode(&[0.5, -0.5, 1.0]).len(), 2);
        assert_eq!(e, Encoder::new(EncoderKind::Layered, 3, 2, 2, 8, 0.1, 5).unwrap());
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let e = Encoder::new(EncoderKind::Layered, 2, 2, 2, 4, 0.8, 3).unwrap();
        let x = [0.3, -0.7];
        let dz = [1.0, -0.5];
        let mut g = vec![0.0; e.num_params()];
        e.backprop(&x, &dz, &mut g);
        let p0 = e.params();
        let f = |p: &[f64]| {
            let mut e2 = e.clone();
            e2.set_params(p).unwrap();
            let z = e2.encode(&x);
            z[0] * dz[0] + z[1] * dz[1]
        };
        for k in 0..p0.len() {
            let (mut a, mut b) = (p0.clone(), p0.clone());
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let fd = (f(&a) - f(&b)) / 2e-6;
            assert!((fd - g[k]).abs() <= 1e-7 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", g[k]);
        }
    }
}
