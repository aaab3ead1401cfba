//! Per-slot bandwidth and compute allocation.
//!
//! Given the offloading decision, each base station solves
//!
//! ```text
//! min  sum_i  alpha_i * ( z_i / (B_i log2(1 + SNR_i)) + z_i c_i / f_i )
//! s.t. sum_i B_i <= B_max,  sum_i f_i <= f_max
//! ```
//!
//! independently. Both terms have the form `w / x`, so the KKT point is the
//! square-root water-filling split `x_i = X sqrt(w_i) / sum_k sqrt(w_k)`.
//! The SNR depends on `B_i` through the noise power; it is evaluated at an
//! equal split first and refined once at the water-filled bandwidth.
//! Devices that still miss the slot deadline or their energy budget are
//! removed lowest `alpha * AoI` first and the station is re-solved.

use serde::{Deserialize, Serialize};

use crate::system_model::{noise_power, transmission_rate};

/// Square-root water-filling: the unique minimizer of `sum w_i / x_i`
/// subject to `sum x_i <= cap`.
pub fn waterfill(weights: &[f64], cap: f64) -> Vec<f64> {
    if weights.is_empty() {
        return Vec::new();
    }
    debug_assert!(cap > 0.0 && weights.iter().all(|&w| w > 0.0));
    let roots: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    roots.iter().map(|r| cap * (r / total)).collect()
}

/// Lagrange multiplier of the sum constraint at the water-filling point.
pub fn waterfill_multiplier(weights: &[f64], cap: f64) -> f64 {
    let total: f64 = weights.iter().map(|w| w.sqrt()).sum();
    (total / cap).powi(2)
}

/// One device requesting service from a base station in the current slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceDemand {
    pub device: usize,
    pub priority: f64,
    pub aoi: f64,
    pub size_bits: f64,
    pub cycles_per_bit: f64,
    /// `|h_ij|^2` towards the requested base station.
    pub gain: f64,
    pub power: f64,
    pub energy_cap: f64,
    /// `now - generated_at`; allocation-independent part of the AoI.
    pub staleness: f64,
}

impl DeviceDemand {
    pub fn snr(&self, noise_psd: f64, bandwidth: f64) -> f64 {
        self.power * self.gain / noise_power(noise_psd, bandwidth)
    }

    pub fn compute_weight(&self) -> f64 {
        self.priority * self.size_bits * self.cycles_per_bit
    }

    /// Bandwidth weight with the spectral efficiency frozen at `ref_bandwidth`.
    pub fn bandwidth_weight(&self, noise_psd: f64, ref_bandwidth: f64) -> f64 {
        self.priority * self.size_bits / self.snr(noise_psd, ref_bandwidth).log2_1p()
    }

    fn urgency(&self) -> f64 {
        self.priority * self.aoi
    }
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsProblem {
    pub bs: usize,
    pub bandwidth_cap: f64,
    pub compute_cap: f64,
    /// Noise PSD in W/Hz.
    pub noise_psd: f64,
    /// Deadline for transmission plus computation, s.
    pub deadline: f64,
    pub devices: Vec<DeviceDemand>,
}

impl BsProblem {
    /// Exact per-device transmission and computation delay at `(b, f)`.
    pub fn delays(&self, d: &DeviceDemand, b: f64, f: f64) -> (f64, f64) {
        let rate = transmission_rate(b, d.power, d.gain, noise_power(self.noise_psd, b))
            .unwrap_or(0.0);
        (d.size_bits / rate, d.size_bits * d.cycles_per_bit / f)
    }

    /// Allocation-dependent part of the weighted AoI with the exact rate.
    pub fn objective(&self, members: &[usize], bandwidth: &[f64], compute: &[f64]) -> f64 {
        members
            .iter()
            .zip(bandwidth.iter().zip(compute))
            .map(|(&k, (&b, &f))| {
                let d = &self.devices[k];
                let (tt, tc) = self.delays(d, b, f);
                d.priority * (tt + tc)
            })
            .sum()
    }

    /// Water-filling split for the given members (indices into `devices`).
    pub fn split(&self, members: &[usize]) -> (Vec<f64>, Vec<f64>) {
        if members.is_empty() {
            return (Vec::new(), Vec::new());
        }
        let equal = self.bandwidth_cap / members.len() as f64;
        let first: Vec<f64> = members
            .iter()
            .map(|&k| self.devices[k].bandwidth_weight(self.noise_psd, equal))
            .collect();
        let b0 = waterfill(&first, self.bandwidth_cap);
        let refined: Vec<f64> = members
            .iter()
            .zip(&b0)
            .map(|(&k, &b)| self.devices[k].bandwidth_weight(self.noise_psd, b))
            .collect();
        let bandwidth = waterfill(&refined, self.bandwidth_cap);
        let wf: Vec<f64> = members.iter().map(|&k| self.devices[k].compute_weight()).collect();
        (bandwidth, waterfill(&wf, self.compute_cap))
    }

    fn equal_split(&self, members: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let k = members.len() as f64;
        (
            vec![self.bandwidth_cap / k; members.len()],
            vec![self.compute_cap / k; members.len()],
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocatorKind {
    /// KKT water-filling per base station.
    Convex,
    /// Equal split per base station; the initial feasible scheme.
    EqualSplit,
}

impl AllocatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AllocatorKind::Convex => "convex",
            AllocatorKind::EqualSplit => "equal_split",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "convex" => Some(AllocatorKind::Convex),
            "equal_split" => Some(AllocatorKind::EqualSplit),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsSolution {
    pub bs: usize,
    /// Devices that keep their allocation.
    pub served: Vec<usize>,
    pub bandwidth: Vec<f64>,
    pub compute: Vec<f64>,
    /// Devices removed by constraint screening, in removal order.
    pub dropped: Vec<usize>,
    /// Objective after every screening round; the last entry is final.
    pub objective_history: Vec<f64>,
    pub bandwidth_multiplier: f64,
    pub compute_multiplier: f64,
}

impl BsSolution {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }

    pub fn is_feasible(&self) -> bool {
        !self.served.is_empty()
    }
}

pub fn solve_bs(problem: &BsProblem, kind: AllocatorKind) -> BsSolution {
    let mut members: Vec<usize> = (0..problem.devices.len()).collect();
    let mut dropped = Vec::new();
    let mut history = Vec::new();
    loop {
        if members.is_empty() {
            return BsSolution {
                bs: problem.bs,
                served: Vec::new(),
                bandwidth: Vec::new(),
                compute: Vec::new(),
                dropped,
                objective_history: history,
                bandwidth_multiplier: 0.0,
                compute_multiplier: 0.0,
            };
        }
        let (bandwidth, compute) = match kind {
            AllocatorKind::Convex => problem.split(&members),
            AllocatorKind::EqualSplit => problem.equal_split(&members),
        };
        history.push(problem.objective(&members, &bandwidth, &compute));

        let violator = members
            .iter()
            .zip(bandwidth.iter().zip(&compute))
            .filter(|&(&k, (&b, &f))| {
                let d = &problem.devices[k];
                let (tt, tc) = problem.delays(d, b, f);
                tt + tc > problem.deadline || d.power * tt > d.energy_cap
            })
            .map(|(&k, _)| k)
            .min_by(|&a, &b| {
                let (da, db) = (&problem.devices[a], &problem.devices[b]);
                da.urgency().total_cmp(&db.urgency()).then(da.device.cmp(&db.device))
            });
        match violator {
            Some(k) => {
                dropped.push(problem.devices[k].device);
                members.retain(|&m| m != k);
            }
            None => {
                let wb: Vec<f64> = members
                    .iter()
                    .zip(&bandwidth)
                    .map(|(&k, &b)| problem.devices[k].bandwidth_weight(problem.noise_psd, b))
                    .collect();
                let wf: Vec<f64> =
                    members.iter().map(|&k| problem.devices[k].compute_weight()).collect();
                return BsSolution {
                    bs: problem.bs,
                    served: members.iter().map(|&k| problem.devices[k].device).collect(),
                    bandwidth_multiplier: waterfill_multiplier(&wb, problem.bandwidth_cap),
                    compute_multiplier: waterfill_multiplier(&wf, problem.compute_cap),
                    bandwidth,
                    compute,
                    dropped,
                    objective_history: history,
                };
            }
        }
    }
}

/// `N x M` bandwidth and compute shares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationMatrix {
    pub num_devices: usize,
    pub num_bs: usize,
    pub bandwidth: Vec<f64>,
    pub compute: Vec<f64>,
}

impl AllocationMatrix {
    pub fn zeros(num_devices: usize, num_bs: usize) -> Self {
        Self {
            num_devices,
            num_bs,
            bandwidth: vec![0.0; num_devices * num_bs],
            compute: vec![0.0; num_devices * num_bs],
        }
    }

    #[inline]
    pub fn bandwidth(&self, device: usize, bs: usize) -> f64 {
        self.bandwidth[device * self.num_bs + bs]
    }

    #[inline]
    pub fn compute(&self, device: usize, bs: usize) -> f64 {
        self.compute[device * self.num_bs + bs]
    }

    pub fn set(&mut self, device: usize, bs: usize, bandwidth: f64, compute: f64) {
        self.bandwidth[device * self.num_bs + bs] = bandwidth;
        self.compute[device * self.num_bs + bs] = compute;
    }

    pub fn bandwidth_used(&self, bs: usize) -> f64 {
        (0..self.num_devices).map(|i| self.bandwidth(i, bs)).sum()
    }

    pub fn compute_used(&self, bs: usize) -> f64 {
        (0..self.num_devices).map(|i| self.compute(i, bs)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bandwidth.iter().chain(&self.compute).all(|&x| x == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub num_devices: usize,
    pub num_bs: usize,
    pub stations: Vec<BsProblem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationSolution {
    pub matrix: AllocationMatrix,
    pub stations: Vec<BsSolution>,
    /// False when screening removed at least one device.
    pub feasible: bool,
}

impl AllocationSolution {
    pub fn dropped(&self) -> impl Iterator<Item = usize> + '_ {
        self.stations.iter().flat_map(|s| s.dropped.iter().copied())
    }

    pub fn objective(&self) -> f64 {
        self.stations.iter().map(BsSolution::objective).sum()
    }
}

/// Solves every base station independently.
pub fn solve_p4(problem: &AllocationProblem, kind: AllocatorKind) -> AllocationSolution {
    let mut matrix = AllocationMatrix::zeros(problem.num_devices, problem.num_bs);
    let stations: Vec<BsSolution> = problem.stations.iter().map(|p| solve_bs(p, kind)).collect();
    for s in &stations {
        for (k, &dev) in s.served.iter().enumerate() {
            matrix.set(dev, s.bs, s.bandwidth[k], s.compute[k]);
        }
    }
    let feasible = stations.iter().all(|s| s.dropped.is_empty());
    AllocationSolution { matrix, stations, feasible }
}

/// Analytic first/second derivatives of the per-slot objective for one
/// device next to central finite differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianEntry {
    pub device: usize,
    pub bandwidth: f64,
    pub compute: f64,
    pub grad_compute: f64,
    pub grad_bandwidth: f64,
    pub hess_compute: f64,
    pub hess_bandwidth: f64,
    /// Exactly zero: the objective is separable in `B` and `f`.
    pub hess_mixed: f64,
    pub fd_grad_compute: f64,
    pub fd_grad_bandwidth: f64,
    pub fd_hess_compute: f64,
    pub fd_hess_bandwidth: f64,
    pub fd_hess_mixed: f64,
    pub max_rel_err: f64,
    pub signs_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub bs: usize,
    pub entries: Vec<HessianEntry>,
    pub signs_ok: bool,
    pub max_rel_err: f64,
}

impl HessianReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn rel_err(approx: f64, exact: f64) -> f64 {
    (approx - exact).abs() / exact.abs()
}

/// Evaluates the derivative formulas at a positive allocation. The spectral
/// efficiency is held at its value for the allocated bandwidth, which is the
/// form under which the objective is `w / B + v / f` per device.
pub fn hessian_probe(problem: &BsProblem, members: &[usize], bandwidth: &[f64], compute: &[f64]) -> HessianReport {
    let entries: Vec<HessianEntry> = members
        .iter()
        .zip(bandwidth.iter().zip(compute))
        .map(|(&k, (&b, &f))| {
            let d = &problem.devices[k];
            let se = d.snr(problem.noise_psd, b).log2_1p();
            let wb = d.priority * d.size_bits / se;
            let wf = d.compute_weight();
            let objective = |bb: f64, ff: f64| d.priority * d.staleness + wb / bb + wf / ff;

            let grad_compute = -wf / (f * f);
            let hess_compute = 2.0 * wf / (f * f * f);
            let grad_bandwidth = -wb / (b * b);
            let hess_bandwidth = 2.0 * wb / (b * b * b);

            let (hb, hf) = (1e-4 * b, 1e-4 * f);
            let f0 = objective(b, f);
            let fd_grad_compute = (objective(b, f + hf) - objective(b, f - hf)) / (2.0 * hf);
            let fd_grad_bandwidth = (objective(b + hb, f) - objective(b - hb, f)) / (2.0 * hb);
            let fd_hess_compute = (objective(b, f + hf) - 2.0 * f0 + objective(b, f - hf)) / (hf * hf);
            let fd_hess_bandwidth =
                (objective(b + hb, f) - 2.0 * f0 + objective(b - hb, f)) / (hb * hb);
            let fd_hess_mixed = (objective(b + hb, f + hf) - objective(b + hb, f - hf)
                - objective(b - hb, f + hf)
                + objective(b - hb, f - hf))
                / (4.0 * hb * hf);

            let max_rel_err = [
                rel_err(fd_grad_compute, grad_compute),
                rel_err(fd_grad_bandwidth, grad_bandwidth),
                rel_err(fd_hess_compute, hess_compute),
                rel_err(fd_hess_bandwidth, hess_bandwidth),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            let signs_ok = grad_compute < 0.0
                && grad_bandwidth < 0.0
                && hess_compute > 0.0
                && hess_bandwidth > 0.0;
            HessianEntry {
                device: d.device,
                bandwidth: b,
                compute: f,
                grad_compute,
                grad_bandwidth,
                hess_compute,
                hess_bandwidth,
                hess_mixed: 0.0,
                fd_grad_compute,
                fd_grad_bandwidth,
                fd_hess_compute,
                fd_hess_bandwidth,
                fd_hess_mixed,
                max_rel_err,
                signs_ok,
            }
        })
        .collect();
    HessianReport {
        bs: problem.bs,
        signs_ok: entries.iter().all(|e| e.signs_ok),
        max_rel_err: entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max),
        entries,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute force over the simplex `sum k_i = steps`, `k_i >= 1`, minimizing a
    /// separable `sum g_i(x_i)`. Used as an optimality oracle.
    pub(crate) fn grid_min(n: usize, cap: f64, steps: usize, term: &dyn Fn(usize, f64) -> f64) -> f64 {
        fn rec(
            i: usize,
            n: usize,
            left: usize,
            acc: f64,
            cap: f64,
            steps: usize,
            term: &dyn Fn(usize, f64) -> f64,
            best: &mut f64,
        ) {
            if acc >= *best {
                return;
            }
            if i == n - 1 {
                if left >= 1 {
                    let v = acc + term(i, cap * left as f64 / steps as f64);
                    if v < *best {
                        *best = v;
                    }
                }
                return;
            }
            for k in 1..=left.saturating_sub(n - 1 - i) {
                let v = term(i, cap * k as f64 / steps as f64);
                rec(i + 1, n, left - k, acc + v, cap, steps, term, best);
            }
        }
        let mut best = f64::INFINITY;
        rec(0, n, steps, 0.0, cap, steps, term, &mut best);
        best
    }

    pub(crate) fn random_problem(rng: &mut ChaCha8Rng, n: usize, loose: bool) -> BsProblem {
        let devices = (0..n)
            .map(|i| {
                let dist: f64 = rng.random_range(50.0..900.0);
                let gain = crate::system_model::path_gain(dist).unwrap() * rng.random_range(0.2..3.0);
                DeviceDemand {
                    device: i,
                    priority: rng.random_range(0.5..2.0),
                    aoi: rng.random_range(1.0..10.0),
                    size_bits: rng.random_range(1e6..3e6),
                    cycles_per_bit: rng.random_range(100.0..300.0),
                    gain,
                    power: 0.6026,
                    energy_cap: if loose { 1e9 } else { rng.random_range(0.5..1.5) },
                    staleness: rng.random_range(0.0..4.0),
                }
            })
            .collect();
        BsProblem {
            bs: 0,
            bandwidth_cap: 400e3,
            compute_cap: rng.random_range(7e9..10e9),
            noise_psd: crate::config::dbm_to_watts(-174.0),
            deadline: if loose { 1e9 } else { 1.0 },
            devices,
        }
    }

    #[test]
    fn waterfill_examples() {
        assert_eq!(waterfill(&[2.0, 2.0], 10.0), vec![5.0, 5.0]);
        let x = waterfill(&[1.0, 4.0], 3.0);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
        assert_eq!(waterfill(&[7.0], 3.5), vec![3.5]);
        assert!(waterfill(&[], 3.0).is_empty());
    }

    #[test]
    fn waterfill_beats_fine_grid() {
        // weights (1, 4), cap 3: 1000-point grid along the binding constraint
        let obj = |x: f64| 1.0 / x + 4.0 / (3.0 - x);
        let kkt = waterfill(&[1.0, 4.0], 3.0);
        let best = (1..1000).map(|k| obj(3.0 * k as f64 / 1000.0)).fold(f64::INFINITY, f64::min);
        assert!(obj(kkt[0]) <= best + 1e-12);
        // the grid hits x = 1 exactly at k = 333.33.., so it cannot be better
        assert!((obj(kkt[0]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_device_gets_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_problem(&mut rng, 1, true);
        let s = solve_bs(&p, AllocatorKind::Convex);
        assert_eq!(s.served, vec![0]);
        assert_eq!(s.bandwidth, vec![p.bandwidth_cap]);
        assert_eq!(s.compute, vec![p.compute_cap]);
    }

    #[test]
    fn identical_devices_split_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = random_problem(&mut rng, 1, true);
        let mut twin = p.devices[0];
        twin.device = 1;
        p.devices.push(twin);
        let s = solve_bs(&p, AllocatorKind::Convex);
        assert!((s.bandwidth[0] - s.bandwidth[1]).abs() < 1e-9);
        assert!((s.compute[0] - s.compute[1]).abs() < 1e-3);
        let single = p.objective(&[0], &[p.bandwidth_cap / 2.0], &[p.compute_cap / 2.0]);
        assert!((s.objective() - 2.0 * single).abs() < 1e-9 * single);
    }

    #[test]
    fn three_devices_match_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_problem(&mut rng, 3, true);
        let s = solve_bs(&p, AllocatorKind::Convex);
        assert_eq!(s.served.len(), 3);
        let bw = grid_min(3, p.bandwidth_cap, 200, &|i, b| {
            let (tt, _) = p.delays(&p.devices[i], b, 1.0);
            p.devices[i].priority * tt
        });
        let cp = grid_min(3, p.compute_cap, 200, &|i, f| {
            let d = &p.devices[i];
            d.priority * d.size_bits * d.cycles_per_bit / f
        });
        let grid = bw + cp;
        assert!(s.objective() <= grid * 1.005, "{} vs grid {}", s.objective(), grid);
    }

    #[test]
    fn screening_drops_lowest_urgency_violator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = random_problem(&mut rng, 3, false);
        // device 2 cannot meet the deadline even alone
        p.devices[2].gain *= 1e-6;
        let s = solve_bs(&p, AllocatorKind::Convex);
        assert!(s.dropped.contains(&2));
        assert!(!s.served.contains(&2));
        for w in s.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        for (k, &dev) in s.served.iter().enumerate() {
            let d = p.devices.iter().find(|d| d.device == dev).unwrap();
            let (tt, tc) = p.delays(d, s.bandwidth[k], s.compute[k]);
            assert!(tt + tc <= p.deadline && d.power * tt <= d.energy_cap);
        }
    }

    #[test]
    fn all_infeasible_gives_empty_allocation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut p = random_problem(&mut rng, 2, false);
        p.deadline = 1e-6;
        let problem = AllocationProblem { num_devices: 2, num_bs: 1, stations: vec![p] };
        let sol = solve_p4(&problem, AllocatorKind::Convex);
        assert!(!sol.feasible);
        assert!(sol.matrix.is_empty());
        assert_eq!(sol.dropped().count(), 2);
    }

    #[test]
    fn hessian_probe_signs_and_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_problem(&mut rng, 3, true);
        let s = solve_bs(&p, AllocatorKind::Convex);
        let members: Vec<usize> = (0..3).collect();
        let r = hessian_probe(&p, &members, &s.bandwidth, &s.compute);
        assert!(r.signs_ok);
        assert!(r.max_rel_err < 1e-5, "{}", r.max_rel_err);
        for e in &r.entries {
            assert_eq!(e.hess_mixed, 0.0);
            assert!(e.fd_hess_mixed.abs() < 1e-6 * (e.hess_compute * e.hess_bandwidth).sqrt());
        }
        assert!(r.to_json().contains("\"signs_ok\": true"));
    }

    proptest! {
        #[test]
        fn waterfill_scale_and_permutation(ws in proptest::collection::vec(0.01f64..100.0, 1..6), cap in 0.1f64..1e3, rot in 0usize..6) {
            let x = waterfill(&ws, cap);
            let total: f64 = x.iter().sum();
            prop_assert!((total - cap).abs() <= 1e-9 * cap);
            let x2 = waterfill(&ws, 2.0 * cap);
            for (a, b) in x.iter().zip(&x2) {
                prop_assert!((2.0 * a - b).abs() <= 1e-9 * b.abs().max(1e-12));
            }
            let mut perm = ws.clone();
            perm.rotate_left(rot % ws.len());
            let xp = waterfill(&perm, cap);
            let mut expected = x.clone();
            expected.rotate_left(rot % ws.len());
            for (a, b) in xp.iter().zip(&expected) {
                prop_assert!((a - b).abs() <= 1e-9 * cap);
            }
        }

        #[test]
        fn waterfill_beats_random_feasible_points(ws in proptest::collection::vec(0.01f64..100.0, 2..5), seed in 0u64..1000) {
            let cap = 10.0;
            let x = waterfill(&ws, cap);
            let f = |x: &[f64]| ws.iter().zip(x).map(|(w, x)| w / x).sum::<f64>();
            let opt = f(&x);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let raw: Vec<f64> = ws.iter().map(|_| rng.random_range(0.01..1.0)).collect();
                let s: f64 = raw.iter().sum();
                let y: Vec<f64> = raw.iter().map(|r| cap * r / s).collect();
                prop_assert!(opt <= f(&y) + 1e-9);
            }
        }

        #[test]
        fn solve_p4_caps_bind(seed in 0u64..500, n in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, n, false);
            let s = solve_bs(&p, AllocatorKind::Convex);
            if !s.served.is_empty() {
                let b: f64 = s.bandwidth.iter().sum();
                let f: f64 = s.compute.iter().sum();
                prop_assert!((b - p.bandwidth_cap).abs() <= 1e-9 * p.bandwidth_cap);
                prop_assert!((f - p.compute_cap).abs() <= 1e-9 * p.compute_cap);
                prop_assert!(b <= p.bandwidth_cap * (1.0 + 1e-12));
            }
            prop_assert_eq!(s.served.len() + s.dropped.len(), n);
        }
    }
}
