//! Offloading policies and the per-episode training loop.

pub mod baseline;
pub mod hyper;
pub mod qlearn;
pub mod replay;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use baseline::{greedy_policy, random_draw, random_policy};
pub use hyper::{AgentHyper, AgentKind, TargetMode};
pub use qlearn::{net_spec as net_spec_for, QAgent, TargetPair, FLAT_ACTION_LIMIT};
pub use replay::{ReplayBuffer, Transition};

use crate::config::SystemConfig;
use crate::environment::{Environment, JointAction, StepOutcome, SystemState};
use crate::error::{Error, Result};
use crate::nn::Checkpoint;

/// Any policy that can drive the environment.
#[derive(Clone, Debug)]
pub enum Agent {
    Learned(Box<QAgent>),
    Greedy,
    Random(ChaCha8Rng),
}

impl Agent {
    pub fn new(kind: AgentKind, config: &SystemConfig, hyper: &AgentHyper, seed: u64) -> Result<Self> {
        Ok(match kind {
            AgentKind::Greedy => Self::Greedy,
            AgentKind::Random => Self::Random(ChaCha8Rng::seed_from_u64(seed)),
            k => Self::Learned(Box::new(QAgent::new(k, config, hyper.clone(), seed)?)),
        })
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Self::Learned(a) => a.kind,
            Self::Greedy => AgentKind::Greedy,
            Self::Random(_) => AgentKind::Random,
        }
    }

    /// Repaired joint action for the current state.
    pub fn act(&mut self, env: &Environment, state: &SystemState, explore: bool) -> Result<JointAction> {
        let k = env.config.per_bs_cap;
        Ok(match self {
            Self::Learned(a) => {
                let raw = a.select(&env.encode(state), &state.boosted, explore)?;
                env.repair(&JointAction(raw), state)
            }
            Self::Greedy => greedy_policy(state, &env.deployment, k),
            Self::Random(rng) => random_policy(state, &env.deployment, k, rng),
        })
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Self::Learned(a) => a.epsilon(),
            _ => 0.0,
        }
    }

    pub fn checkpoint(&self) -> Option<Checkpoint> {
        match self {
            Self::Learned(a) => Some(a.checkpoint()),
            _ => None,
        }
    }
}

/// Per-episode summary. `mean_aoi` is the time- and device-averaged
/// weighted AoI; `objective` is the same sum divided by the horizon only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub total_reward: f64,
    pub mean_loss: Option<f64>,
    pub mean_aoi: f64,
    pub objective: f64,
    pub epsilon: f64,
    pub slots: usize,
    pub completed: usize,
    pub failed: usize,
    pub allocator_objective: f64,
    pub violations: usize,
}

/// Runs one episode from `env.reset(seed)`. With `learn` set the agent
/// explores, stores each transition and trains after every slot.
pub fn run_episode(env: &mut Environment, agent: &mut Agent, seed: u64, learn: bool) -> Result<EpisodeMetrics> {
    let mut state = env.reset(seed)?;
    let epsilon = if learn { agent.epsilon() } else { 0.0 };
    let n = env.config.num_devices;
    let mut m = EpisodeMetrics {
        total_reward: 0.0,
        mean_loss: None,
        mean_aoi: 0.0,
        objective: 0.0,
        epsilon,
        slots: 0,
        completed: 0,
        failed: 0,
        allocator_objective: 0.0,
        violations: 0,
    };
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);
    loop {
        let action = agent.act(env, &state, learn)?;
        let out = env.step(&action)?;
        tally(&mut m, &out, env);
        if learn {
            if let Agent::Learned(a) = agent {
                let t = Transition {
                    state: env.encode(&state),
                    action: out.action.0.clone(),
                    reward: out.reward,
                    next_state: env.encode(&out.next_state),
                    done: out.done,
                };
                if let Some(l) = a.observe(t)? {
                    loss_sum += l;
                    loss_n += 1;
                }
            }
        }
        state = out.next_state;
        if out.done {
            break;
        }
    }
    if learn {
        if let Agent::Learned(a) = agent {
            a.end_episode();
        }
    }
    let slots = m.slots.max(1) as f64;
    m.objective /= slots;
    m.mean_aoi = m.objective / n as f64;
    m.allocator_objective /= slots;
    m.mean_loss = (loss_n > 0).then(|| loss_sum / loss_n as f64);
    if !m.total_reward.is_finite() || !m.objective.is_finite() {
        return Err(Error::Divergence(format!("non-finite episode metrics {m:?}")));
    }
    Ok(m)
}

fn tally(m: &mut EpisodeMetrics, out: &StepOutcome, env: &Environment) {
    use crate::system_model::Outcome;
    m.slots += 1;
    m.total_reward += out.reward;
    m.objective += out
        .next_state
        .aoi
        .iter()
        .zip(&env.deployment.priority)
        .map(|(a, p)| a * p)
        .sum::<f64>();
    m.completed += out.devices.iter().filter(|d| d.outcome == Outcome::Completed).count();
    m.failed += out.devices.iter().filter(|d| d.outcome == Outcome::Failed).count();
    m.allocator_objective += out.allocator_objective;
    m.violations += out.violations.len();
}
