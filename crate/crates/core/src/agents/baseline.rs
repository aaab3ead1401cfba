//! Heuristic policies used as reference points.

use rand::Rng;

use crate::environment::{repair_action, JointAction, SystemState};
use crate::system_model::Deployment;

/// Serves devices with a pending task in decreasing `alpha_i * A_i` order
/// (lower index on ties), each at its nearest base station that still has
/// room for another device.
pub fn greedy_policy(state: &SystemState, dep: &Deployment, per_bs_cap: usize) -> JointAction {
    let n = state.num_devices();
    let mut order: Vec<usize> = (0..n).filter(|&i| state.queue[i].is_some()).collect();
    order.sort_by(|&a, &b| {
        (dep.priority[b] * state.aoi[b])
            .total_cmp(&(dep.priority[a] * state.aoi[a]))
            .then(a.cmp(&b))
    });
    let mut load = vec![0usize; dep.num_bs()];
    let mut action = JointAction::idle(n);
    for i in order {
        if let Some(j) = dep.bs_by_distance(i).into_iter().find(|&j| load[j] < per_bs_cap) {
            load[j] += 1;
            action.0[i] = j + 1;
        }
    }
    action
}

/// Uniform choice over `{0, .., M}` per device, before repair.
pub fn random_draw<R: Rng + ?Sized>(num_devices: usize, num_bs: usize, rng: &mut R) -> JointAction {
    JointAction((0..num_devices).map(|_| rng.random_range(0..=num_bs)).collect())
}

pub fn random_policy<R: Rng + ?Sized>(state: &SystemState, dep: &Deployment, per_bs_cap: usize, rng: &mut R) -> JointAction {
    let raw = random_draw(state.num_devices(), dep.num_bs(), rng);
    repair_action(&raw, state, dep, per_bs_cap)
}
