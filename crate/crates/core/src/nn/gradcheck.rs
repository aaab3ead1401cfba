//! Central finite-difference check of [`QNet::backward`].

use super::qnet::QNet;
use super::tensor::Tensor;
use crate::error::Result;

/// Largest relative error between analytic and numerical gradients of
/// `L = sum(upstream * Q(x))` over every parameter. The relative error uses
/// `max(|a|, |n|, floor)` as denominator so exact zeros do not blow up.
pub fn max_gradient_error(net: &QNet, x: &Tensor, upstream: &Tensor, step: f64, floor: f64) -> Result<f64> {
    let fwd = net.forward(x.clone())?;
    let analytic = net.backward(&fwd, upstream)?;
    let loss = |n: &QNet| -> Result<f64> {
        let q = n.forward(x.clone())?.q;
        Ok(q.as_slice().iter().zip(upstream.as_slice()).map(|(a, b)| a * b).sum())
    };
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (k, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let orig = probe.params()[k].as_slice()[j];
            probe.params_mut()[k].as_mut_slice()[j] = orig + step;
            let up = loss(&probe)?;
            probe.params_mut()[k].as_mut_slice()[j] = orig - step;
            let down = loss(&probe)?;
            probe.params_mut()[k].as_mut_slice()[j] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = grad.as_slice()[j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::QNetSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_layer_nets_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for dueling in [true, false] {
            let spec = QNetSpec { input: 6, trunk: vec![10, 7], head_hidden: 5, branches: 3, actions: 3, dueling };
            let net = QNet::new(spec, &mut rng).unwrap();
            let x = Tensor::from_vec(&[3, 6], (0..18).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let up = Tensor::from_vec(&[3, 9], (0..27).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let err = max_gradient_error(&net, &x, &up, 1e-5, 1e-6).unwrap();
            assert!(err < 1e-4, "dueling={dueling}: {err}");
        }
    }
}
