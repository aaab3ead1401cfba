//! Physical and timing parameters of the multi-BS edge network.
//!
//! Defaults follow the simulation table of the reference scenario where it
//! gives a usable value. Ranges (`[lo, hi]`) are sampled once per deployment,
//! per device or per base station.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// Number of IIoT devices `N`.
    pub num_devices: usize,
    /// Number of BS-MEC servers `M`.
    pub num_bs: usize,
    /// Access limit `K` per base station.
    pub per_bs_cap: usize,
    /// Slot length `tau_max` in seconds; also the per-task deadline.
    pub slot_len: f64,
    /// Slots per episode `T`.
    pub horizon: usize,
    /// Bandwidth budget of every base station, Hz.
    pub bandwidth_cap: f64,
    /// Range for the CPU budget of each base station, cycles/s.
    pub compute_cap: [f64; 2],
    /// Range for the per-device energy budget, J.
    pub energy_cap: [f64; 2],
    /// Device transmit power, dBm.
    pub tx_power_dbm: f64,
    /// Noise power spectral density, dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Per-device AoI weights. Empty means all ones.
    pub priorities: Vec<f64>,
    /// Range for the task size, bits.
    pub task_size: [f64; 2],
    /// Range for the per-device processing density, cycles/bit.
    pub cycles_per_bit: [f64; 2],
    /// Bernoulli task arrival probability per slot.
    pub arrival_rate: f64,
    /// Success probability of one offload attempt.
    pub offload_success_prob: f64,
    /// AoI clamp in seconds. `None` means `20 * slot_len`.
    pub aoi_cap: Option<f64>,
    /// Energy slack coefficient of the relaxed reward.
    pub zeta: f64,
    /// Delay slack coefficient of the relaxed reward.
    pub beta: f64,
    /// Side of the square deployment region, m.
    pub region_side: f64,
    /// Seed for the deployment geometry and per-node parameters.
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_devices: 4,
            num_bs: 2,
            per_bs_cap: 3,
            slot_len: 1.0,
            horizon: 200,
            bandwidth_cap: 400e3,
            compute_cap: [7e9, 10e9],
            energy_cap: [0.5, 1.5],
            tx_power_dbm: 27.8,
            noise_psd_dbm_hz: -174.0,
            priorities: Vec::new(),
            task_size: [1e6, 3e6],
            cycles_per_bit: [100.0, 300.0],
            arrival_rate: 0.5,
            offload_success_prob: 0.95,
            aoi_cap: None,
            zeta: 0.8,
            beta: 0.95,
            region_side: 1000.0,
            rng_seed: 0,
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0] > 0.0 && r[1] >= r[0] && r[1].is_finite()) {
        return Err(Error::Config(format!(
            "{name} must satisfy 0 < lo <= hi < inf, got [{}, {}]",
            r[0], r[1]
        )));
    }
    Ok(())
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_devices == 0 || self.num_bs == 0 || self.per_bs_cap == 0 {
            return bad("num_devices, num_bs and per_bs_cap must be >= 1".into());
        }
        if !(self.slot_len > 0.0 && self.slot_len.is_finite()) {
            return bad(format!("slot_len must be > 0, got {}", self.slot_len));
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if !(self.bandwidth_cap > 0.0 && self.bandwidth_cap.is_finite()) {
            return bad(format!("bandwidth_cap must be > 0, got {}", self.bandwidth_cap));
        }
        check_range("compute_cap", self.compute_cap)?;
        check_range("energy_cap", self.energy_cap)?;
        check_range("task_size", self.task_size)?;
        check_range("cycles_per_bit", self.cycles_per_bit)?;
        if !self.tx_power_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return bad("tx_power_dbm and noise_psd_dbm_hz must be finite".into());
        }
        if !self.priorities.is_empty() {
            if self.priorities.len() != self.num_devices {
                return bad(format!(
                    "priorities has {} entries for {} devices",
                    self.priorities.len(),
                    self.num_devices
                ));
            }
            if self.priorities.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                return bad("every priority must be > 0".into());
            }
        }
        if !(0.0..=1.0).contains(&self.arrival_rate) {
            return bad(format!("arrival_rate must lie in [0, 1], got {}", self.arrival_rate));
        }
        if !(self.offload_success_prob > 0.0 && self.offload_success_prob <= 1.0) {
            return bad(format!(
                "offload_success_prob must lie in (0, 1], got {}",
                self.offload_success_prob
            ));
        }
        if let Some(cap) = self.aoi_cap {
            if !(cap > 0.0 && cap.is_finite()) {
                return bad(format!("aoi_cap must be > 0, got {cap}"));
            }
        }
        if !(self.zeta >= 0.0 && self.beta >= 0.0) {
            return bad("zeta and beta must be >= 0".into());
        }
        if !(self.region_side > 0.0) {
            return bad("region_side must be > 0".into());
        }
        Ok(())
    }

    pub fn aoi_cap(&self) -> f64 {
        self.aoi_cap.unwrap_or(20.0 * self.slot_len)
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Noise PSD in W/Hz.
    pub fn noise_psd_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz)
    }

    pub fn priority(&self, device: usize) -> f64 {
        self.priorities.get(device).copied().unwrap_or(1.0)
    }

    /// Joint action count of a flat (non-branching) Q-network.
    pub fn flat_action_count(&self) -> u128 {
        (self.num_bs as u128 + 1).saturating_pow(self.num_devices as u32)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SystemConfig::default().validate().unwrap();
    }

    #[test]
    fn tx_power_is_about_600_mw() {
        let p = SystemConfig::default().tx_power_w();
        assert!((p - 0.6026).abs() < 1e-3, "{p}");
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = SystemConfig::default();
        c.offload_success_prob = 0.0;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.arrival_rate = 1.5;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.priorities = vec![1.0; 3];
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.num_bs = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn aoi_cap_defaults_to_twenty_slots() {
        let mut c = SystemConfig::default();
        c.slot_len = 0.5;
        assert_eq!(c.aoi_cap(), 10.0);
        c.aoi_cap = Some(3.0);
        assert_eq!(c.aoi_cap(), 3.0);
    }
}
