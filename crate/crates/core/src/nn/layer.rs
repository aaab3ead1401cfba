use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{add_outer, affine, matmul_transposed, Tensor};

/// Fully connected layer `y = x W + b`, `W: [in, out]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    /// Uniform fan-in initialization, zero bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let data = (0..inputs * outputs).map(|_| rng.random_range(-bound..bound)).collect();
        Self {
            weight: Tensor::from_vec(&[inputs, outputs], data).expect("shape matches"),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }
}

/// Stack of dense layers with ReLU between them. The last layer is linear
/// unless `relu_output` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub relu_output: bool,
}

/// Activations recorded by [`Mlp::forward`]: `acts[0]` is the input,
/// `acts[l + 1]` the (activated) output of layer `l`.
#[derive(Clone, Debug)]
pub struct MlpCache {
    pub acts: Vec<Tensor>,
}

impl MlpCache {
    pub fn output(&self) -> &Tensor {
        self.acts.last().expect("at least the input")
    }
}

fn relu_in_place(t: &mut Tensor) {
    t.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], relu_output: bool, rng: &mut R) -> Self {
        let layers = sizes.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect();
        Self { layers, relu_output }
    }

    fn activated(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.relu_output
    }

    pub fn forward(&self, x: Tensor) -> MlpCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x);
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = affine(acts.last().expect("input"), &layer.weight, &layer.bias);
            if self.activated(l) {
                relu_in_place(&mut z);
            }
            acts.push(z);
        }
        MlpCache { acts }
    }

    /// Accumulates parameter gradients into `grads` (two tensors per layer,
    /// weight then bias) and returns the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, mut upstream: Tensor, grads: &mut [Tensor], need_input: bool) -> Option<Tensor> {
        for l in (0..self.layers.len()).rev() {
            if self.activated(l) {
                let out = &cache.acts[l + 1];
                for (g, &a) in upstream.as_mut_slice().iter_mut().zip(out.as_slice()) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let (gw, rest) = grads[2 * l..].split_at_mut(1);
            add_outer(&mut gw[0], &cache.acts[l], &upstream);
            let gb = &mut rest[0];
            for r in 0..upstream.rows() {
                for (b, &u) in gb.as_mut_slice().iter_mut().zip(upstream.row(r)) {
                    *b += u;
                }
            }
            if l > 0 || need_input {
                upstream = matmul_transposed(&upstream, &self.layers[l].weight);
            }
        }
        need_input.then_some(upstream)
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params().map(|p| Tensor::zeros(p.shape())).collect()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map(Dense::outputs).unwrap_or(0)
    }
}
