//! Physical-layer and timing model: deployment geometry, Rayleigh-faded
//! channels with log-distance path loss, Shannon rate, per-task delays and
//! energy, and the per-device AoI recursion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Path loss in dB at `distance_m`: `128.1 + 37.6 log10(d[km])`.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::Geometry(format!("distance must be > 0, got {distance_m} m")));
    }
    Ok(128.1 + 37.6 * (distance_m / 1000.0).log10())
}

/// Linear large-scale power gain at `distance_m`.
pub fn path_gain(distance_m: f64) -> Result<f64> {
    Ok(10f64.powf(-path_loss_db(distance_m)? / 10.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Per-slot channel state: `|h_ij|^2` and the device-BS distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelMatrix {
    pub num_devices: usize,
    pub num_bs: usize,
    /// Row-major `N x M` power gains `|h_ij|^2`.
    pub gain: Vec<f64>,
    /// Row-major `N x M` distances in meters.
    pub distance: Vec<f64>,
}

impl ChannelMatrix {
    /// Builds the matrix from distances and small-scale power draws `|g_ij|^2`.
    pub fn from_draws(
        num_devices: usize,
        num_bs: usize,
        distance: Vec<f64>,
        small_scale: &[f64],
    ) -> Result<Self> {
        let cells = num_devices * num_bs;
        if distance.len() != cells || small_scale.len() != cells {
            return Err(Error::Shape {
                expected: format!("{cells} entries"),
                got: format!("{} distances, {} draws", distance.len(), small_scale.len()),
            });
        }
        let gain = distance
            .iter()
            .zip(small_scale)
            .map(|(&d, &g)| path_gain(d).map(|l| g * l))
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = gain.iter().position(|&g| !(g > 0.0)) {
            return Err(Error::Geometry(format!("channel gain at cell {bad} is not positive")));
        }
        Ok(Self { num_devices, num_bs, gain, distance })
    }

    #[inline]
    pub fn gain(&self, device: usize, bs: usize) -> f64 {
        self.gain[device * self.num_bs + bs]
    }

    #[inline]
    pub fn distance(&self, device: usize, bs: usize) -> f64 {
        self.distance[device * self.num_bs + bs]
    }
}

/// Draws a fresh channel: unit-mean exponential (Rayleigh power) times the
/// log-distance path gain. Consumes exactly `N * M` uniforms.
pub fn sample_channel<R: Rng + ?Sized>(
    rng: &mut R,
    devices: &[Position],
    base_stations: &[Position],
) -> Result<ChannelMatrix> {
    let mut distance = Vec::with_capacity(devices.len() * base_stations.len());
    let mut draws = Vec::with_capacity(distance.capacity());
    for dev in devices {
        for bs in base_stations {
            distance.push(dev.distance(bs));
            draws.push(unit_exponential(rng));
        }
    }
    ChannelMatrix::from_draws(devices.len(), base_stations.len(), distance, &draws)
}

pub(crate) fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite.
    let u: f64 = rng.random();
    let x = -(1.0 - u).ln();
    // guard the measure-zero u == 0 case which would give a zero gain
    if x > 0.0 {
        x
    } else {
        f64::MIN_POSITIVE
    }
}

/// Shannon rate `B log2(1 + p|h|^2 / sigma^2)` in bits/s.
pub fn transmission_rate(bandwidth: f64, power: f64, gain: f64, noise_power: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::Bandwidth(bandwidth));
    }
    Ok(bandwidth * (power * gain / noise_power).ln_1p() / std::f64::consts::LN_2)
}

/// Noise power over `bandwidth` Hz for a PSD in W/Hz.
pub fn noise_power(psd_w_per_hz: f64, bandwidth: f64) -> f64 {
    psd_w_per_hz * bandwidth
}

/// One status-update task sitting at the head of a device queue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub size_bits: f64,
    pub cycles_per_bit: f64,
    /// Absolute generation time in seconds.
    pub generated_at: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotCost {
    pub t_trans: f64,
    pub t_comp: f64,
    pub energy: f64,
}

impl SlotCost {
    pub fn total_delay(&self) -> f64 {
        self.t_trans + self.t_comp
    }
}

/// Transmission delay, computation delay and transmit energy of one task
/// served by a single base station.
pub fn delays_and_energy(
    task: &TaskRecord,
    power: f64,
    rate: f64,
    compute: f64,
    device: usize,
) -> Result<SlotCost> {
    if !(rate > 0.0) {
        return Err(Error::InfeasibleAllocation {
            device,
            reason: format!("transmission rate {rate} is not positive"),
        });
    }
    if !(compute > 0.0) {
        return Err(Error::InfeasibleAllocation {
            device,
            reason: format!("compute allocation {compute} is not positive"),
        });
    }
    let t_trans = task.size_bits / rate;
    let t_comp = task.size_bits * task.cycles_per_bit / compute;
    Ok(SlotCost { t_trans, t_comp, energy: power * t_trans })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Offloaded but not processed yet.
    Pending,
    Failed,
    Idle,
    Completed,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pending => "pending",
            Outcome::Failed => "failed",
            Outcome::Idle => "idle",
            Outcome::Completed => "completed",
        }
    }
}

/// AoI at the start of the next slot.
///
/// Without a completed update the age grows by one slot length. A completed
/// update resets it to the staleness of the delivered task,
/// `now - generated_at + t_trans + t_comp`. The result is clamped to `aoi_cap`.
pub fn aoi_step(
    aoi: f64,
    outcome: Outcome,
    now: f64,
    completed: Option<(&TaskRecord, &SlotCost)>,
    slot_len: f64,
    aoi_cap: f64,
) -> Result<f64> {
    let next = match outcome {
        Outcome::Pending | Outcome::Failed | Outcome::Idle => aoi + slot_len,
        Outcome::Completed => {
            let (task, cost) = completed.ok_or(Error::MissingTask)?;
            now - task.generated_at + cost.t_trans + cost.t_comp
        }
    };
    Ok(next.min(aoi_cap))
}

/// Geometry and per-node parameters, fixed for a whole run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub devices: Vec<Position>,
    pub base_stations: Vec<Position>,
    pub priority: Vec<f64>,
    pub energy_cap: Vec<f64>,
    pub cycles_per_bit: Vec<f64>,
    pub bandwidth_cap: Vec<f64>,
    pub compute_cap: Vec<f64>,
    pub tx_power: Vec<f64>,
}

fn draw_in<R: Rng + ?Sized>(rng: &mut R, range: [f64; 2]) -> f64 {
    let u: f64 = rng.random();
    range[0] + (range[1] - range[0]) * u
}

impl Deployment {
    /// Uniform placement in the square region, seeded by `config.rng_seed`.
    /// Devices and base stations draw from separate streams in a fixed order,
    /// so growing `N` keeps the stations, growing `M` keeps the devices (and
    /// adds stations after the existing ones), and capacity-only changes keep
    /// the whole geometry.
    pub fn sample(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        let side = config.region_side;
        let place = |rng: &mut ChaCha8Rng| Position {
            x: rng.random::<f64>() * side,
            y: rng.random::<f64>() * side,
        };
        let mut dev_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        dev_rng.set_stream(1);
        let mut bs_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        bs_rng.set_stream(2);
        let mut devices = Vec::with_capacity(config.num_devices);
        let mut energy_cap = Vec::with_capacity(config.num_devices);
        let mut cycles_per_bit = Vec::with_capacity(config.num_devices);
        for _ in 0..config.num_devices {
            devices.push(place(&mut dev_rng));
            energy_cap.push(draw_in(&mut dev_rng, config.energy_cap));
            cycles_per_bit.push(draw_in(&mut dev_rng, config.cycles_per_bit));
        }
        let mut base_stations = Vec::with_capacity(config.num_bs);
        let mut compute_cap = Vec::with_capacity(config.num_bs);
        for _ in 0..config.num_bs {
            base_stations.push(place(&mut bs_rng));
            compute_cap.push(draw_in(&mut bs_rng, config.compute_cap));
        }
        let dep = Self {
            priority: (0..config.num_devices).map(|i| config.priority(i)).collect(),
            tx_power: vec![config.tx_power_w(); config.num_devices],
            bandwidth_cap: vec![config.bandwidth_cap; config.num_bs],
            devices,
            base_stations,
            energy_cap,
            cycles_per_bit,
            compute_cap,
        };
        dep.check_geometry()?;
        Ok(dep)
    }

    pub fn check_geometry(&self) -> Result<()> {
        for (i, d) in self.devices.iter().enumerate() {
            for (j, b) in self.base_stations.iter().enumerate() {
                if !(d.distance(b) > 0.0) {
                    return Err(Error::Geometry(format!("device {i} coincides with BS {j}")));
                }
            }
        }
        Ok(())
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn num_bs(&self) -> usize {
        self.base_stations.len()
    }

    pub fn sample_channel<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChannelMatrix> {
        sample_channel(rng, &self.devices, &self.base_stations)
    }

    /// Base stations ordered by distance from `device`, nearest first.
    pub fn bs_by_distance(&self, device: usize) -> Vec<usize> {
        let d = &self.devices[device];
        let mut order: Vec<usize> = (0..self.num_bs()).collect();
        order.sort_by(|&a, &b| {
            d.distance(&self.base_stations[a])
                .total_cmp(&d.distance(&self.base_stations[b]))
                .then(a.cmp(&b))
        });
        order
    }
}
