//! Fast self-checks behind `aoimec check`. Each check is small enough to
//! run in a few seconds; the full oracles live in the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agents::{greedy_policy, net_spec_for, AgentHyper, AgentKind};
use crate::allocator::{hessian_probe, solve_p4, AllocatorKind};
use crate::config::SystemConfig;
use crate::environment::Environment;
use crate::error::Result;
use crate::nn::{max_gradient_error, QNet, QNetSpec, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_vec(&[rows, cols], (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape")
}

fn gradients(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for k in 0..5 {
        let spec = QNetSpec {
            input: rng.random_range(2..8),
            trunk: vec![rng.random_range(2..16); 1 + k % 2],
            head_hidden: rng.random_range(2..8),
            branches: rng.random_range(1..4),
            actions: rng.random_range(2..4),
            dueling: k % 2 == 0,
        };
        let net = QNet::new(spec.clone(), rng)?;
        let x = random_tensor(rng, 2, spec.input);
        let up = random_tensor(rng, 2, spec.branches * spec.actions);
        worst = worst.max(max_gradient_error(&net, &x, &up, 1e-5, 1e-6)?);
    }
    Ok(CheckResult { name: "gradients", passed: worst < 1e-4, detail: format!("max relative error {worst:.2e}") })
}

fn identifiability(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let actions = rng.random_range(2..5);
        let spec = QNetSpec { input: 5, trunk: vec![8], head_hidden: 6, branches: 3, actions, dueling: true };
        let net = QNet::new(spec, rng)?;
        let f = net.forward(random_tensor(rng, 1, 5))?;
        for n in 0..3 {
            let m = f.branch(0, n, actions).iter().map(|q| q - f.value[0]).sum::<f64>() / actions as f64;
            worst = worst.max(m.abs());
        }
    }
    Ok(CheckResult { name: "dueling-identifiability", passed: worst < 1e-9, detail: format!("max |mean(Q - V)| {worst:.2e}") })
}

fn head_scaling() -> Result<CheckResult> {
    let hyper = AgentHyper { trunk: vec![4], head_hidden: 4, ..AgentHyper::default() };
    let mut bad = Vec::new();
    for n in 1..=8 {
        for m in 1..=8 {
            let cfg = SystemConfig { num_devices: n, num_bs: m, ..SystemConfig::default() };
            let spec = net_spec_for(AgentKind::Bd3qn, &cfg, &hyper)?;
            if spec.output_units() != n * (m + 1) + 1 {
                bad.push(format!("({n}, {m})"));
            }
            let flat_ok = net_spec_for(AgentKind::D3qn, &cfg, &hyper).is_ok();
            if flat_ok != (cfg.flat_action_count() <= 4096) {
                bad.push(format!("flat guard at ({n}, {m})"));
            }
        }
    }
    Ok(CheckResult { name: "head-scaling", passed: bad.is_empty(), detail: format!("{} mismatches {bad:?}", bad.len()) })
}

/// Greedy rollouts: environment audit, water-filling against random
/// feasible perturbations, and Hessian signs on every served allocation.
fn rollouts(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let cfg = SystemConfig { num_devices: 6, num_bs: 2, horizon: 40, ..SystemConfig::default() };
    let mut env = Environment::new(cfg.clone(), AllocatorKind::Convex)?;
    let (mut violations, mut beaten, mut probes, mut sign_fail, mut worst_fd) = (0usize, 0usize, 0usize, 0usize, 0.0f64);
    let mut aoi_out = 0usize;
    for ep in 0..3 {
        let mut state = env.reset(ep)?;
        loop {
            let action = greedy_policy(&state, &env.deployment, cfg.per_bs_cap);
            let problem = env.allocation_problem(&state, &action);
            let sol = solve_p4(&problem, AllocatorKind::Convex);
            for (p, s) in problem.stations.iter().zip(&sol.stations) {
                if s.served.is_empty() {
                    continue;
                }
                // `served` holds device ids; the problem indexes its own list
                let members: Vec<usize> = s
                    .served
                    .iter()
                    .map(|d| p.devices.iter().position(|x| x.device == *d).expect("served device is listed"))
                    .collect();
                let best = p.objective(&members, &s.bandwidth, &s.compute);
                for _ in 0..20 {
                    let jitter = |xs: &[f64], cap: f64, rng: &mut ChaCha8Rng| {
                        let w: Vec<f64> = xs.iter().map(|x| x * rng.random_range(0.8..1.25)).collect();
                        let t: f64 = w.iter().sum();
                        w.iter().map(|x| x * cap / t).collect::<Vec<_>>()
                    };
                    let b = jitter(&s.bandwidth, p.bandwidth_cap, rng);
                    let f = jitter(&s.compute, p.compute_cap, rng);
                    // the bandwidth split uses a fixed-SNR weight, so the
                    // exact objective may sit slightly above its optimum
                    if p.objective(&members, &b, &f) < best * (1.0 - 5e-3) {
                        beaten += 1;
                    }
                }
                let report = hessian_probe(p, &members, &s.bandwidth, &s.compute);
                probes += 1;
                sign_fail += usize::from(!report.signs_ok);
                worst_fd = worst_fd.max(report.max_rel_err);
            }
            let out = env.step(&action)?;
            violations += out.violations.len();
            aoi_out += out.next_state.aoi.iter().filter(|&&a| !(a > 0.0 && a <= cfg.aoi_cap())).count();
            state = out.next_state;
            if out.done {
                break;
            }
        }
    }
    Ok(vec![
        CheckResult { name: "constraint-compliance", passed: violations == 0, detail: format!("{violations} violating slots") },
        CheckResult { name: "aoi-bounds", passed: aoi_out == 0, detail: format!("{aoi_out} values outside (0, cap]") },
        CheckResult {
            name: "waterfill-optimality",
            passed: beaten == 0,
            detail: format!("{beaten} perturbations beat the solver by > 0.5%"),
        },
        CheckResult {
            name: "hessian-probe",
            passed: sign_fail == 0 && worst_fd < 1e-5,
            detail: format!("{probes} probes, {sign_fail} sign failures, max fd error {worst_fd:.2e}"),
        },
    ])
}

/// Runs every check; the caller decides how to report failures.
pub fn run_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![gradients(&mut rng)?, identifiability(&mut rng)?, head_scaling()?];
    out.extend(rollouts(&mut rng)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for r in run_checks(0).unwrap() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
