//! Train, sweep, compare and eval drivers writing CSV results.
//!
//! Every command writes into `<out>/<scenario>/`:
//! - `results.csv` long-format rows
//!   `scenario,agent,variable,value,seed,index,metric,metric_value`
//! - `meta.json` with the smoothing window and file schemas
//! - `spec.toml`, the fully resolved spec
//!
//! Reruns with the same spec produce byte-identical CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::spec::ExperimentSpec;
use super::stats::{mean, sign_test, smooth, std_dev};
use crate::agents::{Agent, AgentHyper, AgentKind, EpisodeMetrics};
use crate::config::SystemConfig;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::joint::{derive_seed, evaluate_policy, train_agent, EvalMetrics, FrozenStrategy, SeedStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub agent: String,
    /// Sweep variable, empty outside sweeps.
    pub variable: String,
    pub value: Option<f64>,
    pub seed: u64,
    /// Episode number for training curves, evaluation episode otherwise.
    pub index: usize,
    pub metric: String,
    pub metric_value: f64,
}

/// One row of the per-seed training curve file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub episode: usize,
    pub total_reward: f64,
    pub smoothed_reward: f64,
    pub mean_loss: Option<f64>,
    pub mean_aoi: f64,
    pub objective: f64,
    pub epsilon: f64,
    pub completed: usize,
    pub failed: usize,
    pub violations: usize,
}

/// Outcome of training and evaluating one agent on one seed and point.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub agent: AgentKind,
    pub value: Option<f64>,
    pub seed: u64,
    pub history: Vec<EpisodeMetrics>,
    pub eval: EvalMetrics,
    pub frozen: FrozenStrategy,
}

impl RunResult {
    pub fn rewards(&self) -> Vec<f64> {
        self.history.iter().map(|m| m.total_reward).collect()
    }
}

/// Trains `kind` for `episodes` and evaluates the result. The run seed also
/// seeds the deployment, so every agent sees the same network and episodes.
pub fn run_one(
    spec: &ExperimentSpec,
    kind: AgentKind,
    system: &SystemConfig,
    hyper: &AgentHyper,
    value: Option<f64>,
    seed: u64,
) -> Result<RunResult> {
    let mut system = system.clone();
    system.rng_seed = seed;
    let allocator = spec.agent.allocator;
    let mut env = Environment::new(system.clone(), allocator)?;
    let mut agent = Agent::new(kind, &system, hyper, derive_seed(seed, SeedStream::Agent, 0))?;
    let history = train_agent(&mut env, &mut agent, seed, 0, spec.train.episodes)?;
    let eval = evaluate_policy(&system, allocator, &agent, spec.train.eval_episodes, seed)?;
    let frozen = FrozenStrategy { agent: kind, allocator, checkpoint: agent.checkpoint() };
    Ok(RunResult { agent: kind, value, seed, history, eval, frozen })
}

fn scenario_dir(spec: &ExperimentSpec, out: &Path) -> Result<PathBuf> {
    let dir = out.join(&spec.scenario);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("spec.toml"), spec.to_toml())?;
    Ok(dir)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_meta(dir: &Path, spec: &ExperimentSpec, command: &str, files: serde_json::Value) -> Result<()> {
    let meta = serde_json::json!({
        "command": command,
        "scenario": spec.scenario,
        "seeds": spec.seeds,
        "agents": spec.agents(),
        "smoothing": { "kind": "trailing_mean", "window": spec.train.smoothing_window },
        "metrics": {
            "mean_aoi": "per-device time-average of alpha_i * A_i over an evaluation episode",
            "objective": "(1/T) sum_t sum_i alpha_i * A_i over an evaluation episode",
        },
        "files": files,
    });
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

fn eval_rows(spec: &ExperimentSpec, run: &RunResult) -> Vec<ResultRow> {
    let variable = spec.sweep.variable.map(|v| v.as_str().to_string()).unwrap_or_default();
    let row = |index: usize, metric: &str, metric_value: f64| ResultRow {
        scenario: spec.scenario.clone(),
        agent: run.agent.as_str().into(),
        variable: variable.clone(),
        value: run.value,
        seed: run.seed,
        index,
        metric: metric.into(),
        metric_value,
    };
    let mut rows: Vec<ResultRow> = run
        .eval
        .per_episode
        .iter()
        .enumerate()
        .map(|(k, &v)| row(k, "eval_episode_mean_aoi", v))
        .collect();
    rows.push(row(0, "mean_aoi", run.eval.mean_aoi));
    rows.push(row(0, "ci95_aoi", run.eval.ci95));
    rows.push(row(0, "objective", run.eval.objective));
    rows.push(row(0, "mean_reward", run.eval.mean_reward));
    rows.push(row(0, "violations", run.eval.violations as f64));
    rows
}

fn train_rows(spec: &ExperimentSpec, run: &RunResult) -> Vec<TrainRow> {
    let smoothed = smooth(&run.rewards(), spec.train.smoothing_window);
    run.history
        .iter()
        .zip(smoothed)
        .enumerate()
        .map(|(k, (m, s))| TrainRow {
            episode: k,
            total_reward: m.total_reward,
            smoothed_reward: s,
            mean_loss: m.mean_loss,
            mean_aoi: m.mean_aoi,
            objective: m.objective,
            epsilon: m.epsilon,
            completed: m.completed,
            failed: m.failed,
            violations: m.violations,
        })
        .collect()
}

/// Trains the configured agent per seed; writes the curve, checkpoint and
/// evaluation rows of each seed.
pub fn cmd_train(spec: &ExperimentSpec, out: &Path) -> Result<Vec<RunResult>> {
    let dir = scenario_dir(spec, out)?;
    let kind = spec.agent.kind;
    let (_, system, hyper) = spec.points()?.into_iter().next().expect("at least one point");
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &seed in &spec.seeds {
        let run = run_one(spec, kind, &system, &hyper, None, seed)?;
        write_csv(&dir.join(format!("train_{kind}_seed{seed}.csv")), &train_rows(spec, &run))?;
        fs::write(
            dir.join(format!("checkpoint_{kind}_seed{seed}.json")),
            serde_json::to_string(&run.frozen)?,
        )?;
        rows.extend(eval_rows(spec, &run));
        results.push(run);
    }
    write_csv(&dir.join("results.csv"), &rows)?;
    write_meta(
        &dir,
        spec,
        "train",
        serde_json::json!({
            "train_<agent>_seed<seed>.csv": "episode,total_reward,smoothed_reward,mean_loss,mean_aoi,objective,epsilon,completed,failed,violations",
            "checkpoint_<agent>_seed<seed>.json": "frozen strategy: agent, allocator, network checkpoint",
            "results.csv": "scenario,agent,variable,value,seed,index,metric,metric_value",
        }),
    )?;
    Ok(results)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variable: String,
    pub value: Option<f64>,
    pub agent: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

/// Seed-averaged evaluation mean AoI per (value, agent).
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub runs: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
}

impl SweepReport {
    /// Seed-averaged mean AoI of `agent` at each sweep value, in sweep order.
    pub fn curve(&self, agent: AgentKind) -> Vec<(f64, f64)> {
        self.summary
            .iter()
            .filter(|r| r.agent == agent.as_str() && r.metric == "mean_aoi")
            .map(|r| (r.value.unwrap_or(f64::NAN), r.mean))
            .collect()
    }
}

fn summarize(spec: &ExperimentSpec, runs: &[RunResult]) -> Vec<SummaryRow> {
    let variable = spec.sweep.variable.map(|v| v.as_str().to_string()).unwrap_or_default();
    let mut values: Vec<Option<f64>> = Vec::new();
    for r in runs {
        if !values.contains(&r.value) {
            values.push(r.value);
        }
    }
    let mut out = Vec::new();
    for v in values {
        for agent in spec.agents() {
            let sel: Vec<&RunResult> = runs.iter().filter(|r| r.value == v && r.agent == agent).collect();
            for (metric, get) in [
                ("mean_aoi", (|r: &RunResult| r.eval.mean_aoi) as fn(&RunResult) -> f64),
                ("objective", |r: &RunResult| r.eval.objective),
                ("mean_reward", |r: &RunResult| r.eval.mean_reward),
            ] {
                let xs: Vec<f64> = sel.iter().map(|r| get(r)).collect();
                out.push(SummaryRow {
                    variable: variable.clone(),
                    value: v,
                    agent: agent.as_str().into(),
                    metric: metric.into(),
                    mean: mean(&xs),
                    std: std_dev(&xs),
                    seeds: xs.len(),
                });
            }
        }
    }
    out
}

/// Trains and evaluates every (value, agent, seed) combination.
pub fn cmd_sweep(spec: &ExperimentSpec, out: &Path) -> Result<SweepReport> {
    if spec.sweep.variable.is_none() {
        return Err(Error::Config("sweep needs sweep.variable and sweep.values".into()));
    }
    let dir = scenario_dir(spec, out)?;
    let mut runs = Vec::new();
    for (value, system, hyper) in spec.points()? {
        for agent in spec.agents() {
            for &seed in &spec.seeds {
                runs.push(run_one(spec, agent, &system, &hyper, value, seed)?);
            }
        }
    }
    let rows: Vec<ResultRow> = runs.iter().flat_map(|r| eval_rows(spec, r)).collect();
    write_csv(&dir.join("results.csv"), &rows)?;
    let summary = summarize(spec, &runs);
    write_csv(&dir.join("summary.csv"), &summary)?;
    write_meta(
        &dir,
        spec,
        "sweep",
        serde_json::json!({
            "results.csv": "scenario,agent,variable,value,seed,index,metric,metric_value",
            "summary.csv": "variable,value,agent,metric,mean,std,seeds",
        }),
    )?;
    Ok(SweepReport { runs, summary })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub agent: String,
    pub mean_aoi: f64,
    pub std: f64,
    pub seeds: usize,
}

/// Paired comparison of two agents over common seeds; `diff = a - b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub agent_a: String,
    pub agent_b: String,
    pub mean_diff: f64,
    /// Seeds where `a` has the lower mean AoI.
    pub a_better: usize,
    pub b_better: usize,
    pub sign_test_p: f64,
}

#[derive(Clone, Debug)]
pub struct CompareReport {
    pub runs: Vec<RunResult>,
    pub ranking: Vec<RankRow>,
    pub pairs: Vec<PairRow>,
}

impl CompareReport {
    /// Per-seed evaluation mean AoI of `agent`, in seed order.
    pub fn per_seed(&self, agent: AgentKind) -> Vec<f64> {
        self.runs.iter().filter(|r| r.agent == agent).map(|r| r.eval.mean_aoi).collect()
    }

    pub fn pair(&self, a: AgentKind, b: AgentKind) -> Option<&PairRow> {
        self.pairs.iter().find(|p| p.agent_a == a.as_str() && p.agent_b == b.as_str())
    }
}

pub fn paired(agent_a: AgentKind, a: &[f64], agent_b: AgentKind, b: &[f64]) -> PairRow {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (pos, neg, p) = sign_test(&diffs);
    PairRow {
        agent_a: agent_a.as_str().into(),
        agent_b: agent_b.as_str().into(),
        mean_diff: if diffs.is_empty() { 0.0 } else { mean(&diffs) },
        a_better: neg,
        b_better: pos,
        sign_test_p: p,
    }
}

/// Runs every listed agent on the same seeds and ranks them by mean AoI.
pub fn cmd_compare(spec: &ExperimentSpec, out: &Path) -> Result<CompareReport> {
    let agents = spec.agents();
    if agents.len() < 2 {
        return Err(Error::Config("compare needs at least two agents in compare.agents".into()));
    }
    let dir = scenario_dir(spec, out)?;
    let (_, system, hyper) = spec.points()?.into_iter().next().expect("at least one point");
    let mut runs = Vec::new();
    for &agent in &agents {
        for &seed in &spec.seeds {
            runs.push(run_one(spec, agent, &system, &hyper, None, seed)?);
        }
    }
    let per_seed = |k: AgentKind| -> Vec<f64> { runs.iter().filter(|r| r.agent == k).map(|r| r.eval.mean_aoi).collect() };
    let mut ranking: Vec<RankRow> = agents
        .iter()
        .map(|&k| {
            let xs = per_seed(k);
            RankRow { rank: 0, agent: k.as_str().into(), mean_aoi: mean(&xs), std: std_dev(&xs), seeds: xs.len() }
        })
        .collect();
    ranking.sort_by(|a, b| a.mean_aoi.total_cmp(&b.mean_aoi));
    for (k, r) in ranking.iter_mut().enumerate() {
        r.rank = k + 1;
    }
    let mut pairs = Vec::new();
    for (i, &a) in agents.iter().enumerate() {
        for &b in &agents[i + 1..] {
            pairs.push(paired(a, &per_seed(a), b, &per_seed(b)));
        }
    }
    let rows: Vec<ResultRow> = runs.iter().flat_map(|r| eval_rows(spec, r)).collect();
    write_csv(&dir.join("results.csv"), &rows)?;
    write_csv(&dir.join("ranking.csv"), &ranking)?;
    write_csv(&dir.join("pairs.csv"), &pairs)?;
    write_meta(
        &dir,
        spec,
        "compare",
        serde_json::json!({
            "results.csv": "scenario,agent,variable,value,seed,index,metric,metric_value",
            "ranking.csv": "rank,agent,mean_aoi,std,seeds",
            "pairs.csv": "agent_a,agent_b,mean_diff,a_better,b_better,sign_test_p (diff = a - b)",
        }),
    )?;
    Ok(CompareReport { runs, ranking, pairs })
}

/// Evaluates a frozen strategy file (or a baseline when `checkpoint` is
/// `None`) on every seed's deployment.
pub fn cmd_eval(spec: &ExperimentSpec, checkpoint: Option<&Path>, out: &Path) -> Result<Vec<EvalMetrics>> {
    let dir = scenario_dir(spec, out)?;
    let (_, system, hyper) = spec.points()?.into_iter().next().expect("at least one point");
    let frozen: Option<FrozenStrategy> = match checkpoint {
        Some(p) => Some(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => None,
    };
    let (kind, allocator) = match &frozen {
        Some(f) => (f.agent, f.allocator),
        None => (spec.agent.kind, spec.agent.allocator),
    };
    let mut rows = Vec::new();
    let mut out_metrics = Vec::new();
    for &seed in &spec.seeds {
        let mut sys = system.clone();
        sys.rng_seed = seed;
        let agent = match frozen.as_ref().and_then(|f| f.checkpoint.as_ref()) {
            Some(ck) => Agent::Learned(Box::new(crate::agents::QAgent::from_checkpoint(ck, &sys, hyper.clone(), seed)?)),
            None if kind.is_learned() => {
                return Err(Error::Checkpoint(format!("evaluating {kind} needs a checkpoint file")));
            }
            None => Agent::new(kind, &sys, &hyper, derive_seed(seed, SeedStream::Agent, 0))?,
        };
        let eval = evaluate_policy(&sys, allocator, &agent, spec.train.eval_episodes, seed)?;
        let run = RunResult { agent: kind, value: None, seed, history: Vec::new(), eval: eval.clone(), frozen: FrozenStrategy { agent: kind, allocator, checkpoint: None } };
        rows.extend(eval_rows(spec, &run));
        out_metrics.push(eval);
    }
    write_csv(&dir.join("eval.csv"), &rows)?;
    Ok(out_metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(extra: &str) -> ExperimentSpec {
        let text = format!(
            "scenario = \"t\"\nseeds = [1, 2]\nsystem.horizon = 15\ntrain.episodes = 3\ntrain.eval_episodes = 2\n\
             agent.trunk = [16]\nagent.head_hidden = 8\nagent.batch_size = 8\n{extra}"
        );
        ExperimentSpec::from_toml_str(&text, &[]).unwrap()
    }

    fn read(dir: &Path, name: &str) -> Vec<u8> {
        fs::read(dir.join(name)).unwrap()
    }

    #[test]
    fn train_writes_one_curve_and_checkpoint_per_seed() {
        let spec = tiny("");
        let tmp = tempfile::tempdir().unwrap();
        cmd_train(&spec, tmp.path()).unwrap();
        let dir = tmp.path().join("t");
        for seed in [1, 2] {
            assert!(dir.join(format!("train_bd3qn_seed{seed}.csv")).exists());
            assert!(dir.join(format!("checkpoint_bd3qn_seed{seed}.json")).exists());
        }
        let meta: serde_json::Value = serde_json::from_slice(&read(&dir, "meta.json")).unwrap();
        assert_eq!(meta["smoothing"]["window"], 50);

        let again = tempfile::tempdir().unwrap();
        cmd_train(&spec, again.path()).unwrap();
        for f in ["train_bd3qn_seed1.csv", "train_bd3qn_seed2.csv", "results.csv"] {
            assert_eq!(read(&dir, f), read(&again.path().join("t"), f), "{f}");
        }
    }

    #[test]
    fn eval_reloads_a_checkpoint() {
        let spec = tiny("");
        let tmp = tempfile::tempdir().unwrap();
        let runs = cmd_train(&spec, tmp.path()).unwrap();
        let ck = tmp.path().join("t/checkpoint_bd3qn_seed1.json");
        let one = ExperimentSpec { seeds: vec![1], ..spec.clone() };
        let m = cmd_eval(&one, Some(&ck), tmp.path()).unwrap();
        assert_eq!(m[0], runs[0].eval);
        assert!(matches!(cmd_eval(&one, None, tmp.path()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn compare_self_difference_is_zero() {
        let spec = tiny("compare.agents = [\"greedy\", \"random\", \"greedy\"]\n");
        let tmp = tempfile::tempdir().unwrap();
        let rep = cmd_compare(&spec, tmp.path()).unwrap();
        let same = rep.pairs.iter().find(|p| p.agent_a == "greedy" && p.agent_b == "greedy").unwrap();
        assert_eq!(same.mean_diff, 0.0);
        assert_eq!(same.sign_test_p, 1.0);
        assert_eq!(rep.ranking.len(), 3);
    }

    #[test]
    fn compare_needs_two_agents() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(cmd_compare(&tiny(""), tmp.path()).is_err());
    }

    #[test]
    fn sweep_summarizes_each_value() {
        let spec = tiny("agent.kind = \"greedy\"\nsweep.variable = \"lambda\"\nsweep.values = [0.2, 0.8]\n");
        let tmp = tempfile::tempdir().unwrap();
        let rep = cmd_sweep(&spec, tmp.path()).unwrap();
        let curve = rep.curve(AgentKind::Greedy);
        assert_eq!(curve.iter().map(|c| c.0).collect::<Vec<_>>(), vec![0.2, 0.8]);
        assert_eq!(rep.runs.len(), 4);
        let text = String::from_utf8(read(&tmp.path().join("t"), "summary.csv")).unwrap();
        assert!(text.starts_with("variable,value,agent,metric,mean,std,seeds\n"));
    }
}
