//! `aoimec` command-line harness.
//!
//! Exit codes: 0 success, 1 runtime or check failure, 2 configuration
//! error, 3 training divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use aoimec::agents::AgentKind;
use aoimec::experiment::{cmd_compare, cmd_eval, cmd_sweep, cmd_train, run_checks, ExperimentSpec};
use aoimec::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aoimec", version, about = "AoI-aware multi-BS edge offloading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment spec (flat dotted TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds, replacing `seeds` from the spec.
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Output root; results go to `<out>/<scenario>/`.
    #[arg(long, env = "AOIMEC_OUT", default_value = "results")]
    out: PathBuf,
    /// Agent kind (comma-separated list for `compare`).
    #[arg(long, value_delimiter = ',')]
    agent: Option<Vec<AgentKind>>,
    /// `key=value` override, repeatable (e.g. `system.num_devices=8`).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent per seed and write curves plus checkpoints.
    Train(Common),
    /// Train and evaluate over a sweep of one parameter.
    Sweep(Common),
    /// Rank several agents on paired seeds.
    Compare(Common),
    /// Evaluate a saved strategy (or a baseline) without training.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Strategy file written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(common: &Common, compare: bool) -> aoimec::Result<ExperimentSpec> {
    let mut overrides = common.overrides.clone();
    if let Some(seeds) = &common.seed_list {
        let list: Vec<String> = seeds.iter().map(u64::to_string).collect();
        overrides.push(format!("seeds=[{}]", list.join(",")));
    }
    if let Some(agents) = &common.agent {
        if compare {
            let list: Vec<String> = agents.iter().map(|a| format!("\"{a}\"")).collect();
            overrides.push(format!("compare.agents=[{}]", list.join(",")));
        } else if let [one] = agents.as_slice() {
            overrides.push(format!("agent.kind={one}"));
        } else {
            return Err(Error::Config("--agent takes a single agent outside compare".into()));
        }
    }
    ExperimentSpec::load(common.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> aoimec::Result<bool> {
    match cli.command {
        Command::Train(c) => {
            let spec = load(&c, false)?;
            for r in cmd_train(&spec, &c.out)? {
                println!("{} seed {}: mean AoI {:.4} +/- {:.4}", r.agent, r.seed, r.eval.mean_aoi, r.eval.ci95);
            }
            println!("wrote {}", c.out.join(&spec.scenario).display());
        }
        Command::Sweep(c) => {
            let spec = load(&c, false)?;
            let rep = cmd_sweep(&spec, &c.out)?;
            for row in rep.summary.iter().filter(|r| r.metric == "mean_aoi") {
                println!(
                    "{}={} {}: mean AoI {:.4} (std {:.4}, {} seeds)",
                    row.variable,
                    row.value.unwrap_or(f64::NAN),
                    row.agent,
                    row.mean,
                    row.std,
                    row.seeds
                );
            }
        }
        Command::Compare(c) => {
            let spec = load(&c, true)?;
            let rep = cmd_compare(&spec, &c.out)?;
            for r in &rep.ranking {
                println!("#{} {}: mean AoI {:.4} (std {:.4})", r.rank, r.agent, r.mean_aoi, r.std);
            }
            for p in &rep.pairs {
                println!(
                    "{} - {}: mean diff {:+.4}, better {}:{}, sign test p = {:.4}",
                    p.agent_a, p.agent_b, p.mean_diff, p.a_better, p.b_better, p.sign_test_p
                );
            }
        }
        Command::Eval { common, checkpoint } => {
            let spec = load(&common, false)?;
            for (seed, m) in spec.seeds.iter().zip(cmd_eval(&spec, checkpoint.as_deref(), &common.out)?) {
                println!("seed {seed}: mean AoI {:.4} +/- {:.4} over {} episodes", m.mean_aoi, m.ci95, m.episodes);
            }
        }
        Command::Check { seed } => {
            let results = run_checks(seed)?;
            let ok = results.iter().all(|r| r.passed);
            for r in results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::UnknownKeys(_) | Error::ActionSpace { .. } => 2,
                Error::Divergence(_) => 3,
                _ => 1,
            })
        }
    }
}
