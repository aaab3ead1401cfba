//! Versioned JSON checkpoints. Floats are written with round-trip precision
//! so a reload reproduces the network bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::qnet::{QNet, QNetSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub agent: String,
    pub spec: QNetSpec,
    pub online: Vec<Tensor>,
    pub target: Vec<Tensor>,
    pub adam: Option<AdamState>,
    pub train_steps: u64,
}

impl Checkpoint {
    pub fn capture(agent: &str, online: &QNet, target: &QNet, adam: Option<&AdamState>, train_steps: u64) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            agent: agent.to_string(),
            spec: online.spec.clone(),
            online: online.params().into_iter().cloned().collect(),
            target: target.params().into_iter().cloned().collect(),
            adam: adam.cloned(),
            train_steps,
        }
    }

    pub fn networks(&self) -> Result<(QNet, QNet)> {
        Ok((
            QNet::from_params(self.spec.clone(), self.online.clone())?,
            QNet::from_params(self.spec.clone(), self.target.clone())?,
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> QNet {
        let spec = QNetSpec { input: 7, trunk: vec![9, 5], head_hidden: 4, branches: 3, actions: 3, dueling: true };
        QNet::new(spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let online = net(11);
        let target = net(12);
        let mut adam = AdamState::new(online.params(), 1e-3, 0.95, 10_000);
        let mut p = online.clone();
        let grads: Vec<Tensor> = p
            .params()
            .into_iter()
            .map(|t| Tensor::from_vec(t.shape(), t.as_slice().iter().map(|x| x.sin() / 3.0).collect()).unwrap())
            .collect();
        adam.update(p.params_mut(), &grads).unwrap();

        let ck = Checkpoint::capture("bd3qn", &p, &target, Some(&adam), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let (o, t) = back.networks().unwrap();
        let x = [0.1, 0.9, 0.3, 0.0, 0.5, 0.25, 0.75];
        let (qa, qb) = (p.q_values(&x).unwrap(), o.q_values(&x).unwrap());
        assert!(qa.iter().zip(&qb).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(t, target);
    }

    #[test]
    fn rejects_future_versions() {
        let n = net(1);
        let mut ck = Checkpoint::capture("dqn", &n, &n, None, 0);
        ck.version = 99;
        let text = serde_json::to_string(&ck).unwrap();
        assert!(matches!(Checkpoint::from_json(&text), Err(Error::Checkpoint(_))));
    }
}
