//! Q-network with a shared trunk, an optional state-value head and one
//! advantage head per action branch.
//!
//! With dueling aggregation each branch computes
//! `Q_n(s, a) = V(s) + A_n(s, a) - mean_a' A_n(s, a')`.
//! A branching net uses `N` heads of `M + 1` actions; a flat dueling net is
//! the one-branch case over the joint action space; a plain DQN drops the
//! value head and reads `Q` directly from the single head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{Mlp, MlpCache};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QNetSpec {
    pub input: usize,
    /// Hidden widths of the shared trunk.
    pub trunk: Vec<usize>,
    /// Hidden width of the value and advantage heads.
    pub head_hidden: usize,
    pub branches: usize,
    pub actions: usize,
    pub dueling: bool,
}

impl QNetSpec {
    /// Total output units: `branches * actions`, plus one for the value head.
    pub fn output_units(&self) -> usize {
        self.branches * self.actions + usize::from(self.dueling)
    }

    fn validate(&self) -> Result<()> {
        if self.input == 0 || self.trunk.is_empty() || self.trunk.contains(&0) || self.head_hidden == 0 {
            return Err(Error::Config(format!("degenerate network layout {self:?}")));
        }
        if self.branches == 0 || self.actions == 0 {
            return Err(Error::Config("a Q-network needs at least one branch and action".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QNet {
    pub spec: QNetSpec,
    pub trunk: Mlp,
    pub value: Option<Mlp>,
    pub heads: Vec<Mlp>,
}

/// Forward results for a batch. `q` and `advantage` are `[B, branches * actions]`.
#[derive(Clone, Debug)]
pub struct QForward {
    pub q: Tensor,
    pub advantage: Tensor,
    /// `V(s)` per sample; zeros without a value head.
    pub value: Vec<f64>,
    trunk: MlpCache,
    value_cache: Option<MlpCache>,
    heads: Vec<MlpCache>,
}

impl QForward {
    /// Q-values of branch `n` for sample `b`.
    pub fn branch(&self, b: usize, n: usize, actions: usize) -> &[f64] {
        &self.q.row(b)[n * actions..(n + 1) * actions]
    }
}

impl QNet {
    pub fn new<R: Rng + ?Sized>(spec: QNetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut trunk_sizes = vec![spec.input];
        trunk_sizes.extend(&spec.trunk);
        let trunk = Mlp::new(&trunk_sizes, true, rng);
        let top = *spec.trunk.last().expect("validated");
        let value = spec.dueling.then(|| Mlp::new(&[top, spec.head_hidden, 1], false, rng));
        let heads = (0..spec.branches)
            .map(|_| Mlp::new(&[top, spec.head_hidden, spec.actions], false, rng))
            .collect();
        let net = Self { spec, trunk, value, heads };
        debug_assert_eq!(net.output_units(), net.spec.output_units());
        Ok(net)
    }

    /// Counts output units from the constructed heads.
    pub fn output_units(&self) -> usize {
        self.heads.iter().map(Mlp::output_size).sum::<usize>()
            + self.value.as_ref().map(Mlp::output_size).unwrap_or(0)
    }

    pub fn forward(&self, input: Tensor) -> Result<QForward> {
        if input.shape().len() != 2 || input.cols() != self.spec.input {
            return Err(Error::Shape {
                expected: format!("[B, {}]", self.spec.input),
                got: format!("{:?}", input.shape()),
            });
        }
        let batch = input.rows();
        let (branches, actions) = (self.spec.branches, self.spec.actions);
        let trunk = self.trunk.forward(input);
        let top = trunk.output().clone();
        let value_cache = self.value.as_ref().map(|v| v.forward(top.clone()));
        let heads: Vec<MlpCache> = self.heads.iter().map(|h| h.forward(top.clone())).collect();

        let value: Vec<f64> = match &value_cache {
            Some(c) => c.output().as_slice().to_vec(),
            None => vec![0.0; batch],
        };
        let mut advantage = Tensor::zeros(&[batch, branches * actions]);
        for (n, h) in heads.iter().enumerate() {
            for b in 0..batch {
                advantage.row_mut(b)[n * actions..(n + 1) * actions].copy_from_slice(h.output().row(b));
            }
        }
        let mut q = advantage.clone();
        if self.spec.dueling {
            for b in 0..batch {
                let row = q.row_mut(b);
                for chunk in row.chunks_mut(actions) {
                    let mean = chunk.iter().sum::<f64>() / actions as f64;
                    chunk.iter_mut().for_each(|x| *x = value[b] + (*x - mean));
                }
            }
        }
        Ok(QForward { q, advantage, value, trunk, value_cache, heads })
    }

    /// Single-state forward returning `[branches * actions]` Q-values.
    pub fn q_values(&self, features: &[f64]) -> Result<Vec<f64>> {
        let x = Tensor::from_vec(&[1, features.len()], features.to_vec())?;
        Ok(self.forward(x)?.q.into_vec())
    }

    /// Gradients of a scalar loss given `dL/dQ` (`[B, branches * actions]`),
    /// in [`QNet::params`] order.
    pub fn backward(&self, fwd: &QForward, dq: &Tensor) -> Result<Vec<Tensor>> {
        let actions = self.spec.actions;
        if dq.shape() != fwd.q.shape() {
            return Err(Error::Shape { expected: format!("{:?}", fwd.q.shape()), got: format!("{:?}", dq.shape()) });
        }
        let batch = dq.rows();
        let mut grads = self.zero_grads();
        let trunk_len = 2 * self.trunk.layers.len();
        let value_len = self.value.as_ref().map(|v| 2 * v.layers.len()).unwrap_or(0);
        let (g_trunk, rest) = grads.split_at_mut(trunk_len);
        let (g_value, g_heads) = rest.split_at_mut(value_len);

        let top_width = *self.spec.trunk.last().expect("validated");
        let mut d_top = Tensor::zeros(&[batch, top_width]);

        // dA = dQ - mean_a dQ per branch; dV = sum of dQ over every output
        let mut d_adv = dq.clone();
        let mut d_value = Tensor::zeros(&[batch, 1]);
        if self.spec.dueling {
            for b in 0..batch {
                let mut total = 0.0;
                for chunk in d_adv.row_mut(b).chunks_mut(actions) {
                    let s: f64 = chunk.iter().sum();
                    total += s;
                    let mean = s / actions as f64;
                    chunk.iter_mut().for_each(|x| *x -= mean);
                }
                d_value.row_mut(b)[0] = total;
            }
        }

        let mut offset = 0;
        for (n, head) in self.heads.iter().enumerate() {
            let mut up = Tensor::zeros(&[batch, actions]);
            for b in 0..batch {
                up.row_mut(b).copy_from_slice(&d_adv.row(b)[n * actions..(n + 1) * actions]);
            }
            let len = 2 * head.layers.len();
            let d_in = head
                .backward(&fwd.heads[n], up, &mut g_heads[offset..offset + len], true)
                .expect("input gradient requested");
            offset += len;
            add_into(&mut d_top, &d_in);
        }
        if let (Some(v), Some(cache)) = (&self.value, &fwd.value_cache) {
            let d_in = v.backward(cache, d_value, g_value, true).expect("input gradient requested");
            add_into(&mut d_top, &d_in);
        }
        self.trunk.backward(&fwd.trunk, d_top, g_trunk, false);
        Ok(grads)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.trunk.params().collect();
        if let Some(v) = &self.value {
            out.extend(v.params());
        }
        for h in &self.heads {
            out.extend(h.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.trunk.params_mut().collect();
        if let Some(v) = &mut self.value {
            out.extend(v.params_mut());
        }
        for h in &mut self.heads {
            out.extend(h.params_mut());
        }
        out
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params().into_iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Rebuilds a network from a layout and a parameter list in
    /// [`QNet::params`] order.
    pub fn from_params(spec: QNetSpec, params: Vec<Tensor>) -> Result<Self> {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut net = Self::new(spec, &mut rng)?;
        let slots = net.params_mut();
        if slots.len() != params.len() {
            return Err(Error::Checkpoint(format!("expected {} tensors, got {}", slots.len(), params.len())));
        }
        for (slot, p) in slots.into_iter().zip(params) {
            if slot.shape() != p.shape() {
                return Err(Error::Checkpoint(format!("tensor shape {:?} != {:?}", p.shape(), slot.shape())));
            }
            *slot = p;
        }
        Ok(net)
    }

    /// Copies every parameter from `other` (same layout).
    pub fn copy_from(&mut self, other: &QNet) {
        debug_assert_eq!(self.spec, other.spec);
        self.clone_from(other);
    }
}

fn add_into(acc: &mut Tensor, x: &Tensor) {
    for (a, b) in acc.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *a += b;
    }
}
