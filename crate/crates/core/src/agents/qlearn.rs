//! Q-learning agents: the branching dueling double DQN and its flat
//! relatives (DQN, double DQN, dueling double DQN).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hyper::{AgentHyper, AgentKind, TargetMode};
use super::replay::{ReplayBuffer, Transition};
use crate::config::SystemConfig;
use crate::environment::feature_len;
use crate::error::{Error, Result};
use crate::nn::{AdamState, Checkpoint, QNet, QNetSpec, Tensor};

/// Largest joint action space a flat network may enumerate.
pub const FLAT_ACTION_LIMIT: u128 = 4096;

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Per-branch argmax over a `[branches * actions]` row.
pub fn branch_argmax(q: &[f64], actions: usize) -> Vec<usize> {
    q.chunks(actions).map(argmax).collect()
}

/// Mixed-radix index of a joint action, device 0 least significant.
pub fn flat_index(action: &[usize], num_bs: usize) -> usize {
    action.iter().rev().fold(0, |acc, &a| acc * (num_bs + 1) + a)
}

pub fn flat_decode(mut index: usize, num_devices: usize, num_bs: usize) -> Vec<usize> {
    (0..num_devices)
        .map(|_| {
            let a = index % (num_bs + 1);
            index /= num_bs + 1;
            a
        })
        .collect()
}

/// Exploration draw over `{0, .., M}`; a boosted device weights each
/// offload action by `boost`.
pub fn explore_draw<R: Rng + ?Sized>(num_bs: usize, boosted: bool, boost: f64, rng: &mut R) -> usize {
    if !boosted || boost == 1.0 {
        return rng.random_range(0..=num_bs);
    }
    let total = 1.0 + boost * num_bs as f64;
    let u = rng.random::<f64>() * total;
    if u < 1.0 {
        0
    } else {
        (1 + ((u - 1.0) / boost) as usize).min(num_bs)
    }
}

/// Network layout used by each learned agent.
pub fn net_spec(kind: AgentKind, config: &SystemConfig, hyper: &AgentHyper) -> Result<QNetSpec> {
    let (n, m) = (config.num_devices, config.num_bs);
    let (branches, actions, dueling) = match kind {
        AgentKind::Bd3qn => (n, m + 1, true),
        AgentKind::D3qn | AgentKind::Ddqn | AgentKind::Dqn => {
            let size = config.flat_action_count();
            if size > FLAT_ACTION_LIMIT {
                return Err(Error::ActionSpace { size, limit: FLAT_ACTION_LIMIT });
            }
            (1, size as usize, kind == AgentKind::D3qn)
        }
        AgentKind::Greedy | AgentKind::Random => {
            return Err(Error::Config(format!("{kind} has no network")));
        }
    };
    Ok(QNetSpec {
        input: feature_len(config),
        trunk: hyper.trunk.clone(),
        head_hidden: hyper.head_hidden,
        branches,
        actions,
        dueling,
    })
}

/// Double-Q targets for a branching net. `online_next` and `target_next`
/// are `[B, branches * actions]` Q-values at `s'`; the result holds one
/// target per sample and branch (all equal under [`TargetMode::GlobalMax`]).
pub fn td_targets_bd3qn(
    rewards: &[f64],
    dones: &[bool],
    online_next: &Tensor,
    target_next: &Tensor,
    actions: usize,
    gamma: f64,
    mode: TargetMode,
) -> Vec<Vec<f64>> {
    rewards
        .iter()
        .zip(dones)
        .enumerate()
        .map(|(b, (&r, &done))| {
            let picks = branch_argmax(online_next.row(b), actions);
            let evals: Vec<f64> = picks
                .iter()
                .enumerate()
                .map(|(n, &a)| target_next.row(b)[n * actions + a])
                .collect();
            let cont = if done { 0.0 } else { gamma };
            match mode {
                TargetMode::GlobalMax => {
                    let best = evals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    vec![r + cont * best; evals.len()]
                }
                TargetMode::PerBranch => evals.iter().map(|q| r + cont * q).collect(),
            }
        })
        .collect()
}

/// Mean over the batch of `(1/N) sum_n (y_n - Q_n(s, a_n))^2` and its
/// gradient with respect to every Q output (non-zero only at taken actions).
pub fn loss_bd3qn(q: &Tensor, taken: &[Vec<usize>], targets: &[Vec<f64>], actions: usize) -> (f64, Tensor) {
    let batch = q.rows();
    let mut grad = Tensor::zeros(q.shape());
    let mut loss = 0.0;
    for b in 0..batch {
        let branches = taken[b].len();
        let scale = 1.0 / (branches as f64 * batch as f64);
        for (n, &a) in taken[b].iter().enumerate() {
            let k = n * actions + a;
            let err = q.row(b)[k] - targets[b][n];
            loss += err * err * scale;
            grad.row_mut(b)[k] = 2.0 * err * scale;
        }
    }
    (loss, grad)
}

/// Flat targets: DQN evaluates `max_a Q^-(s', a)`; DDQN and D3QN select with
/// the online net and evaluate with the target net.
pub fn flat_targets(
    kind: AgentKind,
    rewards: &[f64],
    dones: &[bool],
    online_next: &Tensor,
    target_next: &Tensor,
    gamma: f64,
) -> Vec<f64> {
    rewards
        .iter()
        .zip(dones)
        .enumerate()
        .map(|(b, (&r, &done))| {
            let row = target_next.row(b);
            let next = match kind {
                AgentKind::Dqn => row[argmax(row)],
                _ => row[argmax(online_next.row(b))],
            };
            r + if done { 0.0 } else { gamma * next }
        })
        .collect()
}

/// Mean squared TD error over the batch and its gradient.
pub fn flat_loss(q: &Tensor, taken: &[usize], targets: &[f64]) -> (f64, Tensor) {
    let batch = q.rows();
    let mut grad = Tensor::zeros(q.shape());
    let mut loss = 0.0;
    for b in 0..batch {
        let err = q.row(b)[taken[b]] - targets[b];
        loss += err * err / batch as f64;
        grad.row_mut(b)[taken[b]] = 2.0 * err / batch as f64;
    }
    (loss, grad)
}

/// Online network and its periodically synchronized copy.
#[derive(Clone, Debug)]
pub struct TargetPair {
    pub online: QNet,
    pub target: QNet,
}

impl TargetPair {
    pub fn new(online: QNet) -> Self {
        Self { target: online.clone(), online }
    }

    pub fn sync(&mut self) {
        self.target.copy_from(&self.online);
    }
}

#[derive(Clone, Debug)]
pub struct QAgent {
    pub kind: AgentKind,
    pub hyper: AgentHyper,
    pub nets: TargetPair,
    pub adam: AdamState,
    pub buffer: ReplayBuffer,
    num_devices: usize,
    num_bs: usize,
    rng: ChaCha8Rng,
    episode: u64,
    epsilon: f64,
    grad_steps: u64,
}

impl QAgent {
    pub fn new(kind: AgentKind, config: &SystemConfig, hyper: AgentHyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let spec = net_spec(kind, config, &hyper)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = QNet::new(spec, &mut rng)?;
        Ok(Self::assemble(kind, config, hyper, online, None, rng))
    }

    fn assemble(
        kind: AgentKind,
        config: &SystemConfig,
        hyper: AgentHyper,
        online: QNet,
        target: Option<QNet>,
        rng: ChaCha8Rng,
    ) -> Self {
        let adam = AdamState::new(online.params(), hyper.learning_rate, hyper.lr_decay_rate, hyper.lr_decay_steps);
        let mut nets = TargetPair::new(online);
        if let Some(t) = target {
            nets.target = t;
        }
        Self {
            kind,
            buffer: ReplayBuffer::new(hyper.buffer_capacity),
            epsilon: hyper.eps_start,
            hyper,
            nets,
            adam,
            num_devices: config.num_devices,
            num_bs: config.num_bs,
            rng,
            episode: 0,
            grad_steps: 0,
        }
    }

    /// Restores networks (and optimizer state when present) from a checkpoint.
    pub fn from_checkpoint(ck: &Checkpoint, config: &SystemConfig, hyper: AgentHyper, seed: u64) -> Result<Self> {
        let kind: AgentKind = ck.agent.parse()?;
        let expected = net_spec(kind, config, &hyper)?;
        if expected.input != ck.spec.input || expected.branches != ck.spec.branches || expected.actions != ck.spec.actions {
            return Err(Error::Checkpoint(format!(
                "checkpoint layout {:?} does not fit this system ({:?})",
                ck.spec, expected
            )));
        }
        let (online, target) = ck.networks()?;
        let mut agent = Self::assemble(kind, config, hyper, online, Some(target), ChaCha8Rng::seed_from_u64(seed));
        if let Some(adam) = &ck.adam {
            agent.adam = adam.clone();
        }
        agent.grad_steps = ck.train_steps;
        agent.epsilon = agent.hyper.eps_min;
        Ok(agent)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(self.kind.as_str(), &self.nets.online, &self.nets.target, Some(&self.adam), self.grad_steps)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    /// Greedy joint action for encoded features (before repair).
    pub fn greedy_action(&self, features: &[f64]) -> Result<Vec<usize>> {
        let q = self.nets.online.q_values(features)?;
        Ok(match self.kind {
            AgentKind::Bd3qn => branch_argmax(&q, self.num_bs + 1),
            _ => flat_decode(argmax(&q), self.num_devices, self.num_bs),
        })
    }

    /// Epsilon-greedy joint action (before repair). Exploration draws every
    /// device independently, boosting the offload actions of clamped devices.
    pub fn select(&mut self, features: &[f64], boosted: &[bool], explore: bool) -> Result<Vec<usize>> {
        if explore && self.rng.random::<f64>() < self.epsilon {
            let (m, boost) = (self.num_bs, self.hyper.boost_factor);
            return Ok(boosted.iter().map(|&b| explore_draw(m, b, boost, &mut self.rng)).collect());
        }
        self.greedy_action(features)
    }

    /// Stores a transition and takes one gradient step once the buffer
    /// holds a batch. Returns the loss of that step.
    pub fn observe(&mut self, t: Transition) -> Result<Option<f64>> {
        self.buffer.push(t);
        let Some(batch) = self.buffer.sample(self.hyper.batch_size, &mut self.rng) else {
            return Ok(None);
        };
        let batch: Vec<Transition> = batch.into_iter().cloned().collect();
        let loss = self.learn(&batch)?;
        Ok(Some(loss))
    }

    /// One Adam step on a batch, followed by a target sync every
    /// `sync_interval` steps.
    pub fn learn(&mut self, batch: &[Transition]) -> Result<f64> {
        let b = batch.len();
        let f = self.nets.online.spec.input;
        let mut s = Vec::with_capacity(b * f);
        let mut s2 = Vec::with_capacity(b * f);
        for t in batch {
            s.extend_from_slice(&t.state);
            s2.extend_from_slice(&t.next_state);
        }
        let s = Tensor::from_vec(&[b, f], s)?;
        let s2 = Tensor::from_vec(&[b, f], s2)?;
        let rewards: Vec<f64> = batch.iter().map(|t| t.reward * self.hyper.reward_scale).collect();
        let dones: Vec<bool> = batch.iter().map(|t| t.done).collect();
        let online_next = self.nets.online.forward(s2.clone())?.q;
        let target_next = self.nets.target.forward(s2)?.q;
        let fwd = self.nets.online.forward(s)?;
        let gamma = self.hyper.gamma;
        let (loss, dq) = match self.kind {
            AgentKind::Bd3qn => {
                let actions = self.num_bs + 1;
                let y = td_targets_bd3qn(&rewards, &dones, &online_next, &target_next, actions, gamma, self.hyper.target_mode);
                let taken: Vec<Vec<usize>> = batch.iter().map(|t| t.action.clone()).collect();
                loss_bd3qn(&fwd.q, &taken, &y, actions)
            }
            kind => {
                let y = flat_targets(kind, &rewards, &dones, &online_next, &target_next, gamma);
                let taken: Vec<usize> = batch.iter().map(|t| flat_index(&t.action, self.num_bs)).collect();
                flat_loss(&fwd.q, &taken, &y)
            }
        };
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss after {} steps", self.grad_steps)));
        }
        let grads = self.nets.online.backward(&fwd, &dq)?;
        self.adam.update(self.nets.online.params_mut(), &grads)?;
        self.grad_steps += 1;
        if self.grad_steps % self.hyper.sync_interval == 0 {
            self.nets.sync();
        }
        Ok(loss)
    }

    /// Advances the exploration schedule by one episode.
    pub fn end_episode(&mut self) {
        self.episode += 1;
        self.epsilon = self.hyper.epsilon_at(self.episode);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2(rows: &[&[f64]]) -> Tensor {
        let cols = rows[0].len();
        Tensor::from_vec(&[rows.len(), cols], rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    fn tiny() -> (SystemConfig, AgentHyper) {
        let cfg = SystemConfig { num_devices: 2, num_bs: 1, per_bs_cap: 2, horizon: 10, ..SystemConfig::default() };
        let hyper = AgentHyper { trunk: vec![8], head_hidden: 4, batch_size: 4, ..AgentHyper::default() };
        (cfg, hyper)
    }

    #[test]
    fn per_branch_argmax() {
        assert_eq!(branch_argmax(&[1.0, 3.0, 2.0, 5.0, 4.0, 6.0], 3), vec![1, 2]);
        assert_eq!(argmax(&[2.0, 2.0, 1.0]), 0);
        let shifted: Vec<f64> = [1.0, 3.0, 2.0].iter().map(|x| x + 100.0).collect();
        assert_eq!(argmax(&shifted), 1);
    }

    #[test]
    fn flat_index_round_trips() {
        for idx in 0..81 {
            let a = flat_decode(idx, 4, 2);
            assert!(a.iter().all(|&x| x <= 2));
            assert_eq!(flat_index(&a, 2), idx);
        }
        assert_eq!(flat_index(&[1, 0], 1), 1);
        assert_eq!(flat_index(&[0, 1], 1), 2);
    }

    #[test]
    fn gamma_zero_targets_are_rewards() {
        let on = t2(&[&[1.0, 2.0, 3.0, 0.0]]);
        let tg = t2(&[&[4.0, 5.0, 6.0, 7.0]]);
        for mode in [TargetMode::GlobalMax, TargetMode::PerBranch] {
            assert_eq!(td_targets_bd3qn(&[-1.5], &[false], &on, &tg, 2, 0.0, mode), vec![vec![-1.5, -1.5]]);
        }
        for kind in [AgentKind::Dqn, AgentKind::Ddqn, AgentKind::D3qn] {
            assert_eq!(flat_targets(kind, &[-1.5], &[false], &on, &tg, 0.0), vec![-1.5]);
        }
    }

    #[test]
    fn global_max_substitution() {
        // online picks action 1 in branch 0 and action 0 in branch 1; the
        // target values there are 1.0 and 3.0
        let on = t2(&[&[0.0, 1.0, 5.0, 2.0]]);
        let tg = t2(&[&[9.0, 1.0, 3.0, 9.0]]);
        let y = td_targets_bd3qn(&[0.0], &[false], &on, &tg, 2, 0.9, TargetMode::GlobalMax);
        assert!((y[0][0] - 2.7).abs() < 1e-12 && (y[0][1] - 2.7).abs() < 1e-12);
        let y = td_targets_bd3qn(&[0.0], &[false], &on, &tg, 2, 0.9, TargetMode::PerBranch);
        assert!((y[0][0] - 0.9).abs() < 1e-12 && (y[0][1] - 2.7).abs() < 1e-12);
        let y = td_targets_bd3qn(&[0.5], &[true], &on, &tg, 2, 0.9, TargetMode::GlobalMax);
        assert_eq!(y, vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn same_nets_make_double_q_a_plain_max() {
        let q = t2(&[&[0.3, 0.9, -1.0, 0.2], &[1.0, 0.0, 0.5, 0.7]]);
        let y = td_targets_bd3qn(&[0.0, 0.0], &[false, false], &q, &q, 2, 1.0, TargetMode::PerBranch);
        assert_eq!(y, vec![vec![0.9, 0.2], vec![1.0, 0.7]]);
        let dqn = flat_targets(AgentKind::Dqn, &[0.0, 0.0], &[false, false], &q, &q, 1.0);
        let ddqn = flat_targets(AgentKind::Ddqn, &[0.0, 0.0], &[false, false], &q, &q, 1.0);
        assert_eq!(dqn, ddqn);
    }

    #[test]
    fn dqn_and_ddqn_differ_only_on_disagreement() {
        let on = t2(&[&[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
        let tg = t2(&[&[0.0, 2.0, 0.0, 0.0], &[0.0, 0.0, 5.0, 1.0]]);
        let dqn = flat_targets(AgentKind::Dqn, &[0.0, 0.0], &[false, false], &on, &tg, 1.0);
        let ddqn = flat_targets(AgentKind::Ddqn, &[0.0, 0.0], &[false, false], &on, &tg, 1.0);
        assert_eq!(dqn[0], ddqn[0]);
        assert_eq!((dqn[1], ddqn[1]), (5.0, 1.0));
    }

    #[test]
    fn exhaustive_ddqn_targets_on_four_actions() {
        // N = 2, M = 1: the flat space is {00, 10, 01, 11}
        let on = t2(&[&[0.1, 0.4, 0.3, 0.2]]);
        let tg = t2(&[&[1.0, 2.0, 3.0, 4.0]]);
        for (r, gamma) in [(0.0, 0.5), (-2.0, 0.9), (1.0, 1.0)] {
            let y = flat_targets(AgentKind::Ddqn, &[r], &[false], &on, &tg, gamma);
            // online prefers index 1, i.e. device 0 offloads, device 1 holds
            assert_eq!(flat_decode(1, 2, 1), vec![1, 0]);
            assert!((y[0] - (r + gamma * 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn bd3qn_loss_hand_values() {
        let q = t2(&[&[1.0, 0.0, 0.0, 2.0]]);
        let (l, g) = loss_bd3qn(&q, &[vec![0, 1]], &[vec![1.0, 2.0]], 2);
        assert_eq!(l, 0.0);
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
        let (l, g) = loss_bd3qn(&q, &[vec![0, 1]], &[vec![0.0, 4.0]], 2);
        assert!((l - 2.5).abs() < 1e-12);
        // untouched actions carry no gradient and do not affect the loss
        assert_eq!(g.as_slice()[1], 0.0);
        let q2 = t2(&[&[1.0, 77.0, -5.0, 2.0]]);
        assert_eq!(loss_bd3qn(&q2, &[vec![0, 1]], &[vec![0.0, 4.0]], 2).0, l);
    }

    #[test]
    fn flat_loss_zero_at_target() {
        let q = t2(&[&[0.5, -1.0]]);
        assert_eq!(flat_loss(&q, &[1], &[-1.0]).0, 0.0);
    }

    #[test]
    fn explore_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 10_000;
        let mut plain = [0usize; 3];
        let mut boosted = [0usize; 3];
        for _ in 0..draws {
            plain[explore_draw(2, false, 2.0, &mut rng)] += 1;
            boosted[explore_draw(2, true, 2.0, &mut rng)] += 1;
        }
        for c in plain {
            assert!((c as f64 / draws as f64 - 1.0 / 3.0).abs() < 0.02);
        }
        // weights 1 : 2 : 2
        assert!((boosted[0] as f64 / draws as f64 - 0.2).abs() < 0.02);
        assert!((boosted[1] as f64 / draws as f64 - 0.4).abs() < 0.02);
    }

    #[test]
    fn flat_guard_names_the_blow_up() {
        let cfg = SystemConfig { num_devices: 8, num_bs: 3, ..SystemConfig::default() };
        let err = net_spec(AgentKind::D3qn, &cfg, &AgentHyper::default()).unwrap_err();
        assert!(matches!(err, Error::ActionSpace { size: 65536, limit: 4096 }));
        assert!(err.to_string().contains("exponentially"));
        assert!(net_spec(AgentKind::Bd3qn, &cfg, &AgentHyper::default()).is_ok());
    }

    #[test]
    fn no_gradient_steps_below_batch_size() {
        let (cfg, hyper) = tiny();
        let mut agent = QAgent::new(AgentKind::Bd3qn, &cfg, hyper, 1).unwrap();
        let f = feature_len(&cfg);
        let before = agent.nets.online.clone();
        for _ in 0..3 {
            let t = Transition { state: vec![0.1; f], action: vec![1, 0], reward: -1.0, next_state: vec![0.2; f], done: false };
            assert!(agent.observe(t).unwrap().is_none());
        }
        assert_eq!(agent.grad_steps(), 0);
        assert_eq!(agent.nets.online, before);
    }

    #[test]
    fn sync_every_step_keeps_target_equal() {
        let (cfg, mut hyper) = tiny();
        hyper.sync_interval = 1;
        hyper.batch_size = 2;
        let mut agent = QAgent::new(AgentKind::Bd3qn, &cfg, hyper, 2).unwrap();
        let f = feature_len(&cfg);
        for k in 0..10 {
            let t = Transition {
                state: vec![k as f64 / 10.0; f],
                action: vec![k % 2, 1],
                reward: -(k as f64),
                next_state: vec![0.5; f],
                done: false,
            };
            agent.observe(t).unwrap();
            assert_eq!(agent.nets.online, agent.nets.target);
        }
        assert_eq!(agent.grad_steps(), 9);
    }

    #[test]
    fn target_stays_frozen_between_syncs() {
        let (cfg, mut hyper) = tiny();
        hyper.sync_interval = 5;
        hyper.batch_size = 1;
        let mut agent = QAgent::new(AgentKind::D3qn, &cfg, hyper, 3).unwrap();
        let f = feature_len(&cfg);
        let mut snapshot = agent.nets.target.clone();
        for k in 0..12u64 {
            let t = Transition { state: vec![0.3; f], action: vec![1, 1], reward: -1.0, next_state: vec![0.1; f], done: k % 4 == 0 };
            agent.observe(t).unwrap();
            if agent.grad_steps() % 5 == 0 {
                assert_eq!(agent.nets.target, agent.nets.online);
                snapshot = agent.nets.target.clone();
            } else {
                assert_eq!(agent.nets.target, snapshot);
            }
        }
    }

    #[test]
    fn single_device_branching_equals_flat_dueling() {
        let cfg = SystemConfig { num_devices: 1, num_bs: 3, per_bs_cap: 1, ..SystemConfig::default() };
        let hyper = AgentHyper { trunk: vec![16, 8], head_hidden: 8, target_mode: TargetMode::PerBranch, ..AgentHyper::default() };
        let b = QAgent::new(AgentKind::Bd3qn, &cfg, hyper.clone(), 4).unwrap();
        let mut d = QAgent::new(AgentKind::D3qn, &cfg, hyper, 5).unwrap();
        assert_eq!(b.nets.online.spec, d.nets.online.spec);
        d.nets = b.nets.clone();
        let f = feature_len(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows: Vec<f64> = (0..3 * f).map(|_| rng.random::<f64>()).collect();
        let x = Tensor::from_vec(&[3, f], rows).unwrap();
        let qb = b.nets.online.forward(x.clone()).unwrap().q;
        let qd = d.nets.online.forward(x.clone()).unwrap().q;
        assert_eq!(qb, qd);
        let yb = td_targets_bd3qn(&[1.0, 0.0, -1.0], &[false; 3], &qb, &qd, 4, 0.9, TargetMode::PerBranch);
        let yd = flat_targets(AgentKind::D3qn, &[1.0, 0.0, -1.0], &[false; 3], &qb, &qd, 0.9);
        for k in 0..3 {
            assert_eq!(yb[k], vec![yd[k]]);
        }
    }

    #[test]
    fn fixed_seed_learning_is_reproducible() {
        let (cfg, hyper) = tiny();
        let f = feature_len(&cfg);
        let run = || {
            let mut agent = QAgent::new(AgentKind::Bd3qn, &cfg, hyper.clone(), 7).unwrap();
            let mut losses = Vec::new();
            for k in 0..20 {
                let t = Transition {
                    state: vec![(k % 3) as f64 / 3.0; f],
                    action: vec![k % 2, (k / 2) % 2],
                    reward: -((k % 5) as f64),
                    next_state: vec![0.5; f],
                    done: false,
                };
                losses.extend(agent.observe(t).unwrap());
            }
            (losses, agent.nets.online)
        };
        assert_eq!(run(), run());
    }
}
