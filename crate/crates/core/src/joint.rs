//! Alternating optimization of the offloading policy and the per-slot
//! allocation, plus frozen-policy evaluation.
//!
//! The allocator runs inside every environment step, so an outer iteration
//! only has to retrain the policy against it and re-evaluate.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{run_episode, Agent, AgentHyper, AgentKind, EpisodeMetrics};
use crate::allocator::AllocatorKind;
use crate::config::SystemConfig;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::nn::Checkpoint;

/// Independent seed streams derived from one run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedStream {
    Agent = 1,
    Train = 2,
    Eval = 3,
    RandomPolicy = 4,
}

/// SplitMix64 mix of `(run, stream, k)`.
pub fn derive_seed(run: u64, stream: SeedStream, k: u64) -> u64 {
    let mut z = run
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((stream as u64) << 56)
        .wrapping_add(k.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AOConfig {
    pub max_iters: usize,
    /// Relative change of evaluation mean AoI that counts as converged.
    pub tolerance: f64,
    pub train_episodes: usize,
    pub eval_episodes: usize,
}

impl Default for AOConfig {
    fn default() -> Self {
        Self { max_iters: 5, tolerance: 0.01, train_episodes: 200, eval_episodes: 10 }
    }
}

impl AOConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.train_episodes == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("ao.max_iters, ao.train_episodes and ao.eval_episodes must be >= 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1.0) {
            return Err(Error::Config(format!("ao.tolerance must lie in (0, 1], got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// Evaluation summary over greedy (no exploration) rollouts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub episodes: usize,
    /// Mean over episodes of the per-device time-average weighted AoI.
    pub mean_aoi: f64,
    pub std_aoi: f64,
    /// Half-width of the normal 95% interval of `mean_aoi`.
    pub ci95: f64,
    /// Mean of `(1/T) sum_t sum_i alpha_i A_i(t)`.
    pub objective: f64,
    pub mean_reward: f64,
    pub allocator_objective: f64,
    pub completed: usize,
    pub failed: usize,
    pub violations: usize,
    pub per_episode: Vec<f64>,
}

/// Rolls out `agent` without exploration or learning on `episodes` seeded
/// episodes. The agent is not modified; a random policy is reseeded from
/// `run_seed` so repeated calls agree.
pub fn evaluate_policy(
    config: &SystemConfig,
    allocator: AllocatorKind,
    agent: &Agent,
    episodes: usize,
    run_seed: u64,
) -> Result<EvalMetrics> {
    if episodes == 0 {
        return Err(Error::EmptyEvaluation("at least one evaluation episode is required".into()));
    }
    let mut env = Environment::new(config.clone(), allocator)?;
    let mut agent = agent.clone();
    if let Agent::Random(rng) = &mut agent {
        *rng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, SeedStream::RandomPolicy, 0));
    }
    let runs = (0..episodes)
        .map(|k| run_episode(&mut env, &mut agent, derive_seed(run_seed, SeedStream::Eval, k as u64), false))
        .collect::<Result<Vec<EpisodeMetrics>>>()?;
    Ok(summarize(&runs))
}

fn summarize(runs: &[EpisodeMetrics]) -> EvalMetrics {
    let n = runs.len() as f64;
    let per_episode: Vec<f64> = runs.iter().map(|m| m.mean_aoi).collect();
    let mean_aoi = per_episode.iter().sum::<f64>() / n;
    let var = if runs.len() > 1 {
        per_episode.iter().map(|x| (x - mean_aoi).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mean = |f: fn(&EpisodeMetrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
    EvalMetrics {
        episodes: runs.len(),
        mean_aoi,
        std_aoi: var.sqrt(),
        ci95: 1.96 * (var / n).sqrt(),
        objective: mean(|m| m.objective),
        mean_reward: mean(|m| m.total_reward),
        allocator_objective: mean(|m| m.allocator_objective),
        completed: runs.iter().map(|m| m.completed).sum(),
        failed: runs.iter().map(|m| m.failed).sum(),
        violations: runs.iter().map(|m| m.violations).sum(),
        per_episode,
    }
}

/// Trains for `episodes` episodes continuing from `start`, with the
/// per-episode seeds shared by every agent trained under `run_seed`.
pub fn train_agent(
    env: &mut Environment,
    agent: &mut Agent,
    run_seed: u64,
    start: usize,
    episodes: usize,
) -> Result<Vec<EpisodeMetrics>> {
    let learn = agent.kind().is_learned();
    (start..start + episodes)
        .map(|e| run_episode(env, agent, derive_seed(run_seed, SeedStream::Train, e as u64), learn))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AOIteration {
    pub iteration: usize,
    pub eval_mean_aoi: f64,
    pub eval_mean_reward: f64,
    pub allocator_objective: f64,
    pub train_mean_reward: f64,
    /// `|a - b| / max(|a|, |b|)` against the previous iteration.
    pub rel_change: Option<f64>,
}

/// One slot of the frozen strategy `{a*, B*, f*}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub slot: usize,
    pub device: usize,
    /// 0 holds locally, `j` offloads to station `j - 1`.
    pub action: usize,
    pub bandwidth: f64,
    pub compute: f64,
}

/// Frozen policy plus the allocator it was trained against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenStrategy {
    pub agent: AgentKind,
    pub allocator: AllocatorKind,
    pub checkpoint: Option<Checkpoint>,
}

#[derive(Clone, Debug)]
pub struct AOTrace {
    pub iterations: Vec<AOIteration>,
    pub converged: bool,
    pub train_history: Vec<EpisodeMetrics>,
    pub strategy: Vec<StrategyRow>,
    pub frozen: FrozenStrategy,
    pub agent: Agent,
}

fn rel_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Alternates policy training and evaluation until the evaluation mean AoI
/// moves by at most `tolerance` (relative) or `max_iters` is reached.
pub fn ao_run(
    config: &SystemConfig,
    kind: AgentKind,
    hyper: &AgentHyper,
    allocator: AllocatorKind,
    ao: &AOConfig,
    run_seed: u64,
) -> Result<AOTrace> {
    ao.validate()?;
    let mut env = Environment::new(config.clone(), allocator)?;
    let mut agent = Agent::new(kind, config, hyper, derive_seed(run_seed, SeedStream::Agent, 0))?;
    let mut iterations: Vec<AOIteration> = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    for it in 0..ao.max_iters {
        let trained = train_agent(&mut env, &mut agent, run_seed, history.len(), ao.train_episodes)?;
        let train_mean_reward = trained.iter().map(|m| m.total_reward).sum::<f64>() / trained.len() as f64;
        history.extend(trained);
        let eval = evaluate_policy(config, allocator, &agent, ao.eval_episodes, run_seed)?;
        if !eval.mean_aoi.is_finite() || !train_mean_reward.is_finite() {
            return Err(Error::Divergence(format!("non-finite metrics at outer iteration {it}")));
        }
        let change = iterations.last().map(|p| rel_change(eval.mean_aoi, p.eval_mean_aoi));
        iterations.push(AOIteration {
            iteration: it,
            eval_mean_aoi: eval.mean_aoi,
            eval_mean_reward: eval.mean_reward,
            allocator_objective: eval.allocator_objective,
            train_mean_reward,
            rel_change: change,
        });
        if change.is_some_and(|c| c <= ao.tolerance) {
            converged = true;
            break;
        }
    }
    let strategy = rollout_strategy(config, allocator, &agent, derive_seed(run_seed, SeedStream::Eval, 0))?;
    let frozen = FrozenStrategy { agent: kind, allocator, checkpoint: agent.checkpoint() };
    Ok(AOTrace { iterations, converged, train_history: history, strategy, frozen, agent })
}

/// Greedy rollout of one episode recording the executed actions and shares.
pub fn rollout_strategy(config: &SystemConfig, allocator: AllocatorKind, agent: &Agent, seed: u64) -> Result<Vec<StrategyRow>> {
    let mut env = Environment::new(config.clone(), allocator)?;
    let mut agent = agent.clone();
    let mut state = env.reset(seed)?;
    let mut rows = Vec::new();
    loop {
        let action = agent.act(&env, &state, false)?;
        let out = env.step(&action)?;
        for (i, &a) in out.action.0.iter().enumerate() {
            let (bandwidth, compute) = match a {
                0 => (0.0, 0.0),
                j => (out.allocation.bandwidth(i, j - 1), out.allocation.compute(i, j - 1)),
            };
            rows.push(StrategyRow { slot: state.clock, device: i, action: a, bandwidth, compute });
        }
        state = out.next_state;
        if out.done {
            return Ok(rows);
        }
    }
}

pub fn write_trace_csv<W: Write>(trace: &AOTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &trace.iterations {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_strategy_csv<W: Write>(rows: &[StrategyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (SystemConfig, AgentHyper) {
        let cfg = SystemConfig { horizon: 20, ..SystemConfig::default() };
        let hyper = AgentHyper { trunk: vec![16], head_hidden: 8, batch_size: 8, ..AgentHyper::default() };
        (cfg, hyper)
    }

    #[test]
    fn seeds_are_separated_by_stream() {
        let a = derive_seed(1, SeedStream::Train, 0);
        assert_ne!(a, derive_seed(1, SeedStream::Eval, 0));
        assert_ne!(a, derive_seed(2, SeedStream::Train, 0));
        assert_ne!(a, derive_seed(1, SeedStream::Train, 1));
        assert_eq!(a, derive_seed(1, SeedStream::Train, 0));
    }

    #[test]
    fn empty_evaluation_is_an_error() {
        let (cfg, hyper) = small();
        let agent = Agent::new(AgentKind::Greedy, &cfg, &hyper, 0).unwrap();
        let err = evaluate_policy(&cfg, AllocatorKind::Convex, &agent, 0, 0);
        assert!(matches!(err, Err(Error::EmptyEvaluation(_))));
    }

    #[test]
    fn evaluation_is_repeatable() {
        let (cfg, hyper) = small();
        for kind in [AgentKind::Random, AgentKind::Bd3qn] {
            let agent = Agent::new(kind, &cfg, &hyper, 3).unwrap();
            let a = evaluate_policy(&cfg, AllocatorKind::Convex, &agent, 3, 9).unwrap();
            let b = evaluate_policy(&cfg, AllocatorKind::Convex, &agent, 3, 9).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.violations, 0);
            // objective is N times the per-device figure
            assert!((a.objective - cfg.num_devices as f64 * a.mean_aoi).abs() < 1e-9);
        }
    }

    #[test]
    fn one_iteration_is_a_plain_training_run() {
        let (cfg, hyper) = small();
        let ao = AOConfig { max_iters: 1, train_episodes: 3, eval_episodes: 2, ..AOConfig::default() };
        let trace = ao_run(&cfg, AgentKind::Bd3qn, &hyper, AllocatorKind::Convex, &ao, 4).unwrap();
        assert_eq!(trace.iterations.len(), 1);
        assert_eq!(trace.train_history.len(), 3);

        let mut env = Environment::new(cfg.clone(), AllocatorKind::Convex).unwrap();
        let mut agent = Agent::new(AgentKind::Bd3qn, &cfg, &hyper, derive_seed(4, SeedStream::Agent, 0)).unwrap();
        let plain = train_agent(&mut env, &mut agent, 4, 0, 3).unwrap();
        assert_eq!(plain, trace.train_history);
        assert_eq!(trace.strategy.len(), cfg.horizon * cfg.num_devices);
        assert!(trace.frozen.checkpoint.is_some());
    }

    #[test]
    fn full_tolerance_stops_after_two_iterations() {
        let (cfg, hyper) = small();
        let ao = AOConfig { max_iters: 6, tolerance: 1.0, train_episodes: 1, eval_episodes: 1 };
        let trace = ao_run(&cfg, AgentKind::Bd3qn, &hyper, AllocatorKind::Convex, &ao, 5).unwrap();
        assert_eq!(trace.iterations.len(), 2);
        assert!(trace.converged);
    }

    #[test]
    fn trace_is_reproducible_and_serializes() {
        let (cfg, hyper) = small();
        let ao = AOConfig { max_iters: 2, tolerance: 1e-9, train_episodes: 2, eval_episodes: 1 };
        let a = ao_run(&cfg, AgentKind::Bd3qn, &hyper, AllocatorKind::Convex, &ao, 6).unwrap();
        let b = ao_run(&cfg, AgentKind::Bd3qn, &hyper, AllocatorKind::Convex, &ao, 6).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_trace_csv(&a, &mut ca).unwrap();
        write_trace_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with("iteration,eval_mean_aoi,eval_mean_reward,allocator_objective,train_mean_reward,rel_change"));
        assert_eq!(a.strategy, b.strategy);
    }

    #[test]
    fn strategy_respects_capacities() {
        let (cfg, hyper) = small();
        let agent = Agent::new(AgentKind::Greedy, &cfg, &hyper, 0).unwrap();
        let env = Environment::new(cfg.clone(), AllocatorKind::Convex).unwrap();
        let rows = rollout_strategy(&cfg, AllocatorKind::Convex, &agent, 1).unwrap();
        for slot in 0..cfg.horizon {
            for j in 0..cfg.num_bs {
                let used: Vec<&StrategyRow> = rows.iter().filter(|r| r.slot == slot && r.action == j + 1).collect();
                assert!(used.len() <= cfg.per_bs_cap);
                let b: f64 = used.iter().map(|r| r.bandwidth).sum();
                let f: f64 = used.iter().map(|r| r.compute).sum();
                assert!(b <= env.deployment.bandwidth_cap[j] * (1.0 + 1e-9));
                assert!(f <= env.deployment.compute_cap[j] * (1.0 + 1e-9));
            }
        }
    }
}
