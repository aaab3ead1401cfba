use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which policy drives the offloading decisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Bd3qn,
    D3qn,
    Ddqn,
    Dqn,
    Greedy,
    Random,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [Self::Bd3qn, Self::D3qn, Self::Ddqn, Self::Dqn, Self::Greedy, Self::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bd3qn => "bd3qn",
            Self::D3qn => "d3qn",
            Self::Ddqn => "ddqn",
            Self::Dqn => "dqn",
            Self::Greedy => "greedy",
            Self::Random => "random",
        }
    }

    pub fn is_learned(self) -> bool {
        !matches!(self, Self::Greedy | Self::Random)
    }

    /// Learned agents whose network enumerates the joint action space.
    pub fn is_flat(self) -> bool {
        matches!(self, Self::D3qn | Self::Ddqn | Self::Dqn)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown agent '{s}' (expected one of bd3qn, d3qn, ddqn, dqn, greedy, random)")))
    }
}

/// How branch targets are formed from the double-Q estimates at `s'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// One shared target `r + gamma * max_n Q^-_n(s', a'_n)` for all branches.
    GlobalMax,
    /// `y_n = r + gamma * Q^-_n(s', a'_n)` per branch.
    PerBranch,
}

impl FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global-max" => Ok(Self::GlobalMax),
            "per-branch" => Ok(Self::PerBranch),
            _ => Err(Error::Config(format!("unknown target mode '{s}' (expected global-max or per-branch)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentHyper {
    pub gamma: f64,
    /// Gradient steps between whole-copy target syncs.
    pub sync_interval: u64,
    pub eps_start: f64,
    pub eps_min: f64,
    /// Multiplicative decay applied after every episode.
    pub eps_decay: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub lr_decay_rate: f64,
    pub lr_decay_steps: u64,
    pub trunk: Vec<usize>,
    pub head_hidden: usize,
    pub target_mode: TargetMode,
    /// Exploration weight of offload actions for a device whose AoI hit the cap.
    pub boost_factor: f64,
    /// Rewards are multiplied by this before entering TD targets.
    pub reward_scale: f64,
}

impl Default for AgentHyper {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            sync_interval: 100,
            eps_start: 1.0,
            eps_min: 0.05,
            eps_decay: 0.999,
            batch_size: 64,
            buffer_capacity: 50_000,
            learning_rate: 1e-3,
            lr_decay_rate: 0.95,
            lr_decay_steps: 10_000,
            trunk: vec![128, 128],
            head_hidden: 64,
            target_mode: TargetMode::GlobalMax,
            boost_factor: 2.0,
            reward_scale: 0.05,
        }
    }
}

impl AgentHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("agent.gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.sync_interval == 0 {
            return bad("agent.sync_interval must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_min) || self.eps_min > self.eps_start {
            return bad(format!(
                "exploration needs 0 <= eps_min <= eps_start <= 1, got {} and {}",
                self.eps_min, self.eps_start
            ));
        }
        if !(self.eps_decay > 0.0 && self.eps_decay <= 1.0) {
            return bad(format!("agent.eps_decay must lie in (0, 1], got {}", self.eps_decay));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad(format!(
                "need 1 <= batch_size <= buffer_capacity, got {} and {}",
                self.batch_size, self.buffer_capacity
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("agent.learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.lr_decay_rate > 0.0 && self.lr_decay_rate <= 1.0) || self.lr_decay_steps == 0 {
            return bad("learning-rate decay needs rate in (0, 1] and steps >= 1".into());
        }
        if self.trunk.is_empty() || self.trunk.contains(&0) || self.head_hidden == 0 {
            return bad("network widths must be positive and the trunk non-empty".into());
        }
        if !(self.boost_factor >= 1.0) || !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("boost_factor must be >= 1 and reward_scale > 0".into());
        }
        Ok(())
    }

    /// Exploration rate during episode `episode` (0-based); non-increasing
    /// and never below `eps_min`.
    pub fn epsilon_at(&self, episode: u64) -> f64 {
        (self.eps_start * self.eps_decay.powf(episode as f64)).max(self.eps_min)
    }
}
