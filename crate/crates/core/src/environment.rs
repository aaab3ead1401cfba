//! The offloading MDP: state encoding, action repair, slot stepping and the
//! relaxed reward.
//!
//! Within one slot at time `now = clock * slot_len`:
//!
//! 1. the joint action is repaired so no base station exceeds `K` devices;
//! 2. devices that chose a base station and hold a task form the per-BS
//!    service sets, which the allocator splits (or an external allocation is
//!    applied);
//! 3. every served device transmits; a deadline or energy violation fails the
//!    attempt, otherwise it succeeds with probability `q_succ`;
//! 4. AoI, last-slot energy and delay are updated, and the reward is computed
//!    on the post-step state;
//! 5. new tasks arrive for the next slot and the channel is redrawn.
//!
//! Random draws per slot are made in a fixed order and count, independent of
//! the action, so different policies see the same arrivals and channels.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::{
    solve_p4, AllocationMatrix, AllocationProblem, AllocationSolution, AllocatorKind, BsProblem,
    DeviceDemand,
};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::system_model::{
    aoi_step, delays_and_energy, noise_power, path_gain, transmission_rate, ChannelMatrix,
    Deployment, Outcome, SlotCost, TaskRecord,
};

/// Relative slack used when auditing sums against capacities.
const CAP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub aoi: Vec<f64>,
    /// Transmit energy spent in the last slot.
    pub energy: Vec<f64>,
    /// Transmission plus computation delay in the last slot.
    pub delay: Vec<f64>,
    pub channel: ChannelMatrix,
    /// Freshest pending task per device.
    pub queue: Vec<Option<TaskRecord>>,
    /// Devices whose AoI hit the clamp and have not delivered since.
    pub boosted: Vec<bool>,
    /// Slot index.
    pub clock: usize,
}

impl SystemState {
    pub fn num_devices(&self) -> usize {
        self.aoi.len()
    }
}

/// One choice per device: 0 holds locally, `j > 0` offloads to BS `j - 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn idle(num_devices: usize) -> Self {
        Self(vec![0; num_devices])
    }

    pub fn bs_of(&self, device: usize) -> Option<usize> {
        self.0[device].checked_sub(1)
    }

    pub fn is_feasible(&self, num_bs: usize, per_bs_cap: usize) -> bool {
        let mut load = vec![0usize; num_bs];
        for &a in &self.0 {
            if a > num_bs {
                return false;
            }
            if a > 0 {
                load[a - 1] += 1;
            }
        }
        load.iter().all(|&l| l <= per_bs_cap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    /// Removed by the allocator's constraint screening.
    Screened,
    DeadlineMiss,
    EnergyBudget,
    /// Lost with probability `1 - q_succ`.
    Channel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceReport {
    pub action: usize,
    pub outcome: Outcome,
    pub failure: Option<FailureCause>,
    pub cost: Option<SlotCost>,
    pub clamped: bool,
}

/// An executed offload that completed, kept for constraint auditing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletedOffload {
    pub device: usize,
    pub bs: usize,
    pub bandwidth: f64,
    pub compute: f64,
    pub cost: SlotCost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: SystemState,
    pub reward: f64,
    /// The repaired action that was executed.
    pub action: JointAction,
    pub devices: Vec<DeviceReport>,
    pub completed: Vec<CompletedOffload>,
    pub allocation: AllocationMatrix,
    /// Allocator objective for the slot (0 with an external allocation).
    pub allocator_objective: f64,
    /// Human-readable constraint breaches among completed offloads.
    pub violations: Vec<String>,
    pub done: bool,
}

/// Relaxed reward
/// `-sum_i [alpha_i A_i - zeta (E_max,i - E_i) - beta (tau_max - D_i)]`
/// evaluated on the post-step state.
pub fn reward_fn(state: &SystemState, dep: &Deployment, config: &SystemConfig) -> f64 {
    -(0..state.num_devices())
        .map(|i| {
            dep.priority[i] * state.aoi[i]
                - config.zeta * (dep.energy_cap[i] - state.energy[i])
                - config.beta * (config.slot_len - state.delay[i])
        })
        .sum::<f64>()
}

/// Keeps at most `K` devices per base station, preferring larger
/// `alpha_i * A_i` (lower index on ties); the rest hold locally.
pub fn repair_action(raw: &JointAction, state: &SystemState, dep: &Deployment, per_bs_cap: usize) -> JointAction {
    let num_bs = dep.num_bs();
    let mut out = raw.clone();
    for a in out.0.iter_mut() {
        if *a > num_bs {
            *a = 0;
        }
    }
    for bs in 1..=num_bs {
        let mut chosen: Vec<usize> = (0..out.0.len()).filter(|&i| out.0[i] == bs).collect();
        if chosen.len() <= per_bs_cap {
            continue;
        }
        chosen.sort_by(|&a, &b| {
            let ua = dep.priority[a] * state.aoi[a];
            let ub = dep.priority[b] * state.aoi[b];
            ub.total_cmp(&ua).then(a.cmp(&b))
        });
        for &i in &chosen[per_bs_cap..] {
            out.0[i] = 0;
        }
    }
    out
}

/// Bounds for scaling `log10 |h|^2` into `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainScale {
    pub lo: f64,
    pub hi: f64,
}

impl GainScale {
    /// From 10 m with a strong fade-up to the region diagonal with a deep fade.
    pub fn for_region(side: f64) -> Self {
        let hi = path_gain(10.0).expect("positive distance").log10() + 1.0;
        let lo = path_gain(side * std::f64::consts::SQRT_2)
            .expect("positive distance")
            .log10()
            - 3.0;
        Self { lo, hi }
    }

    pub fn scale(&self, gain: f64) -> f64 {
        ((gain.log10() - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

/// Feature vector `[A / AoI_max; E / E_max; D / tau_max; scaled log10 |h|^2]`
/// of length `3N + N*M`.
pub fn encode_state(state: &SystemState, dep: &Deployment, config: &SystemConfig, scale: &GainScale) -> Vec<f64> {
    let n = state.num_devices();
    let mut out = Vec::with_capacity(3 * n + state.channel.gain.len());
    let cap = config.aoi_cap();
    out.extend(state.aoi.iter().map(|a| a / cap));
    out.extend(state.energy.iter().zip(&dep.energy_cap).map(|(e, c)| e / c));
    out.extend(state.delay.iter().map(|d| d / config.slot_len));
    out.extend(state.channel.gain.iter().map(|&g| scale.scale(g)));
    out
}

pub fn feature_len(config: &SystemConfig) -> usize {
    3 * config.num_devices + config.num_devices * config.num_bs
}

/// Pre-drawn randomness for one slot.
struct SlotDraws {
    success: Vec<f64>,
    arrival: Vec<f64>,
    size: Vec<f64>,
}

impl SlotDraws {
    fn draw(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let take = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
        Self { success: take(rng), arrival: take(rng), size: take(rng) }
    }
}

#[derive(Clone, Debug)]
pub struct Environment {
    pub config: SystemConfig,
    pub deployment: Deployment,
    pub allocator: AllocatorKind,
    pub gain_scale: GainScale,
    rng: ChaCha8Rng,
    state: SystemState,
}

impl Environment {
    pub fn new(config: SystemConfig, allocator: AllocatorKind) -> Result<Self> {
        let deployment = Deployment::sample(&config)?;
        let gain_scale = GainScale::for_region(config.region_side);
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let state = initial_state(&config, &deployment, &mut rng)?;
        Ok(Self { config, deployment, allocator, gain_scale, rng, state })
    }

    /// Starts an episode; identical seeds give bit-identical trajectories
    /// under identical actions.
    pub fn reset(&mut self, seed: u64) -> Result<SystemState> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = initial_state(&self.config, &self.deployment, &mut self.rng)?;
        Ok(self.state.clone())
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn encode(&self, state: &SystemState) -> Vec<f64> {
        encode_state(state, &self.deployment, &self.config, &self.gain_scale)
    }

    pub fn repair(&self, raw: &JointAction, state: &SystemState) -> JointAction {
        repair_action(raw, state, &self.deployment, self.config.per_bs_cap)
    }

    /// Builds the per-BS allocation problem for an action.
    pub fn allocation_problem(&self, state: &SystemState, action: &JointAction) -> AllocationProblem {
        build_problem(&self.config, &self.deployment, state, action)
    }

    /// Advances one slot, allocating with the configured allocator.
    pub fn step(&mut self, action: &JointAction) -> Result<StepOutcome> {
        let repaired = self.repair(action, &self.state);
        let problem = self.allocation_problem(&self.state, &repaired);
        let solution = solve_p4(&problem, self.allocator);
        self.advance(repaired, Allocation::Solved(solution))
    }

    /// Advances one slot with an externally supplied allocation. Served
    /// devices are those that offload, hold a task, and have positive shares.
    pub fn step_with_allocation(&mut self, action: &JointAction, alloc: &AllocationMatrix) -> Result<StepOutcome> {
        if !action.is_feasible(self.config.num_bs, self.config.per_bs_cap) {
            return Err(Error::Action(format!("action {:?} is not repaired", action.0)));
        }
        self.advance(action.clone(), Allocation::External(alloc.clone()))
    }

    fn advance(&mut self, action: JointAction, alloc: Allocation) -> Result<StepOutcome> {
        let cfg = &self.config;
        let dep = &self.deployment;
        let n = cfg.num_devices;
        if action.0.len() != n {
            return Err(Error::Action(format!("expected {n} choices, got {}", action.0.len())));
        }
        let state = &self.state;
        let now = state.clock as f64 * cfg.slot_len;
        let draws = SlotDraws::draw(&mut self.rng, n);
        let psd = cfg.noise_psd_w();

        let (matrix, screened, allocator_objective) = match alloc {
            Allocation::Solved(sol) => {
                let screened: Vec<usize> = sol.dropped().collect();
                let obj = sol.objective();
                let AllocationSolution { matrix, .. } = sol;
                (matrix, screened, obj)
            }
            Allocation::External(m) => {
                if m.num_devices != n || m.num_bs != cfg.num_bs {
                    return Err(Error::Shape {
                        expected: format!("{n}x{}", cfg.num_bs),
                        got: format!("{}x{}", m.num_devices, m.num_bs),
                    });
                }
                (m, Vec::new(), 0.0)
            }
        };

        let mut next = state.clone();
        let mut reports = Vec::with_capacity(n);
        let mut completed = Vec::new();
        for i in 0..n {
            let a = action.0[i];
            let mut report = DeviceReport { action: a, outcome: Outcome::Idle, failure: None, cost: None, clamped: false };
            let mut energy = 0.0;
            let mut delay = 0.0;
            let mut delivered: Option<(TaskRecord, SlotCost)> = None;
            if let (Some(bs), Some(task)) = (action.bs_of(i), state.queue[i]) {
                if screened.contains(&i) {
                    report.outcome = Outcome::Failed;
                    report.failure = Some(FailureCause::Screened);
                } else {
                    let b = matrix.bandwidth(i, bs);
                    let f = matrix.compute(i, bs);
                    if !(b > 0.0 && f > 0.0) {
                        return Err(Error::InfeasibleAllocation {
                            device: i,
                            reason: format!("offloads to BS {bs} without bandwidth/compute (B={b}, f={f})"),
                        });
                    }
                    let rate = transmission_rate(b, dep.tx_power[i], state.channel.gain(i, bs), noise_power(psd, b))?;
                    let cost = delays_and_energy(&task, dep.tx_power[i], rate, f, i)?;
                    energy = cost.energy;
                    delay = cost.total_delay();
                    report.cost = Some(cost);
                    report.outcome = Outcome::Failed;
                    if delay > cfg.slot_len {
                        report.failure = Some(FailureCause::DeadlineMiss);
                    } else if energy > dep.energy_cap[i] {
                        report.failure = Some(FailureCause::EnergyBudget);
                    } else if draws.success[i] >= cfg.offload_success_prob {
                        report.failure = Some(FailureCause::Channel);
                    } else {
                        report.outcome = Outcome::Completed;
                        delivered = Some((task, cost));
                        completed.push(CompletedOffload { device: i, bs, bandwidth: b, compute: f, cost });
                    }
                }
            }
            let aoi = aoi_step(
                state.aoi[i],
                report.outcome,
                now,
                delivered.as_ref().map(|(t, c)| (t, c)),
                cfg.slot_len,
                cfg.aoi_cap(),
            )?;
            next.aoi[i] = aoi;
            next.energy[i] = energy;
            next.delay[i] = delay;
            if delivered.is_some() {
                next.queue[i] = None;
                next.boosted[i] = false;
            }
            if aoi >= cfg.aoi_cap() {
                report.clamped = true;
                next.boosted[i] = true;
            }
            reports.push(report);
        }

        let reward = reward_fn(&next, dep, cfg);
        let violations = audit(cfg, dep, &action, &matrix, &completed);

        // arrivals for the next slot replace whatever waits in the queue
        let arrival_time = now + cfg.slot_len;
        for i in 0..n {
            if draws.arrival[i] < cfg.arrival_rate {
                let [lo, hi] = cfg.task_size;
                next.queue[i] = Some(TaskRecord {
                    size_bits: lo + (hi - lo) * draws.size[i],
                    cycles_per_bit: dep.cycles_per_bit[i],
                    generated_at: arrival_time,
                });
            }
        }
        next.channel = dep.sample_channel(&mut self.rng)?;
        next.clock += 1;
        let done = next.clock >= cfg.horizon;
        self.state = next.clone();
        Ok(StepOutcome {
            next_state: next,
            reward,
            action,
            devices: reports,
            completed,
            allocation: matrix,
            allocator_objective,
            violations,
            done,
        })
    }
}

enum Allocation {
    Solved(AllocationSolution),
    External(AllocationMatrix),
}

fn initial_state(config: &SystemConfig, dep: &Deployment, rng: &mut ChaCha8Rng) -> Result<SystemState> {
    let n = config.num_devices;
    let draws = SlotDraws::draw(rng, n);
    let queue = (0..n)
        .map(|i| {
            (draws.arrival[i] < config.arrival_rate).then(|| TaskRecord {
                size_bits: config.task_size[0] + (config.task_size[1] - config.task_size[0]) * draws.size[i],
                cycles_per_bit: dep.cycles_per_bit[i],
                generated_at: 0.0,
            })
        })
        .collect();
    Ok(SystemState {
        aoi: vec![config.slot_len; n],
        energy: vec![0.0; n],
        delay: vec![0.0; n],
        channel: dep.sample_channel(rng)?,
        queue,
        boosted: vec![false; n],
        clock: 0,
    })
}

pub fn build_problem(config: &SystemConfig, dep: &Deployment, state: &SystemState, action: &JointAction) -> AllocationProblem {
    let now = state.clock as f64 * config.slot_len;
    let stations = (0..config.num_bs)
        .map(|bs| BsProblem {
            bs,
            bandwidth_cap: dep.bandwidth_cap[bs],
            compute_cap: dep.compute_cap[bs],
            noise_psd: config.noise_psd_w(),
            deadline: config.slot_len,
            devices: (0..config.num_devices)
                .filter(|&i| action.bs_of(i) == Some(bs))
                .filter_map(|i| {
                    state.queue[i].map(|task| DeviceDemand {
                        device: i,
                        priority: dep.priority[i],
                        aoi: state.aoi[i],
                        size_bits: task.size_bits,
                        cycles_per_bit: task.cycles_per_bit,
                        gain: state.channel.gain(i, bs),
                        power: dep.tx_power[i],
                        energy_cap: dep.energy_cap[i],
                        staleness: now - task.generated_at,
                    })
                })
                .collect(),
        })
        .collect();
    AllocationProblem { num_devices: config.num_devices, num_bs: config.num_bs, stations }
}

/// Checks every completed offload of the slot against the per-slot
/// constraints: one BS per device, at most `K` per BS, energy budget,
/// bandwidth and compute caps, and the slot deadline.
fn audit(
    cfg: &SystemConfig,
    dep: &Deployment,
    action: &JointAction,
    matrix: &AllocationMatrix,
    completed: &[CompletedOffload],
) -> Vec<String> {
    let mut out = Vec::new();
    if completed.is_empty() {
        return out;
    }
    for i in 0..cfg.num_devices {
        let rows = (0..cfg.num_bs).filter(|&j| matrix.bandwidth(i, j) > 0.0).count();
        if rows > 1 {
            out.push(format!("device {i} holds resources at {rows} base stations"));
        }
    }
    if !action.is_feasible(cfg.num_bs, cfg.per_bs_cap) {
        out.push(format!("action {:?} exceeds the per-BS access limit", action.0));
    }
    for j in 0..cfg.num_bs {
        if matrix.bandwidth_used(j) > dep.bandwidth_cap[j] * (1.0 + CAP_TOL) {
            out.push(format!("BS {j} bandwidth {} > {}", matrix.bandwidth_used(j), dep.bandwidth_cap[j]));
        }
        if matrix.compute_used(j) > dep.compute_cap[j] * (1.0 + CAP_TOL) {
            out.push(format!("BS {j} compute {} > {}", matrix.compute_used(j), dep.compute_cap[j]));
        }
    }
    for c in completed {
        if c.cost.energy > dep.energy_cap[c.device] {
            out.push(format!("device {} energy {} > {}", c.device, c.cost.energy, dep.energy_cap[c.device]));
        }
        if c.cost.total_delay() > cfg.slot_len {
            out.push(format!("device {} delay {} > {}", c.device, c.cost.total_delay(), cfg.slot_len));
        }
        if action.bs_of(c.device) != Some(c.bs) {
            out.push(format!("device {} completed at BS {} it did not choose", c.device, c.bs));
        }
    }
    out
}

/// Optional per-slot trace: `slot,device,action,outcome,aoi,reward`.
pub struct TraceWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(inner);
        out.write_record(["slot", "device", "action", "outcome", "aoi", "reward"])?;
        Ok(Self { out })
    }

    pub fn record(&mut self, slot: usize, step: &StepOutcome) -> Result<()> {
        for (i, d) in step.devices.iter().enumerate() {
            self.out.write_record([
                slot.to_string(),
                i.to_string(),
                d.action.to_string(),
                d.outcome.as_str().to_string(),
                step.next_state.aoi[i].to_string(),
                step.reward.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}
