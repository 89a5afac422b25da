//! Arrival processes: stationary Poisson load and the two machine-type
//! traffic models (uniform activation over 60 s, Beta(α, β) activation
//! over 10 s). All generators return per-slot arrival counts; arrivals are
//! attributed to the start of their slot.

use rand::Rng;
use rand_distr::{Beta, Distribution, Poisson};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrafficError {
    #[error("invalid traffic parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficModel {
    Poisson,
    Beta,
    Uniform,
}

impl TrafficModel {
    pub fn name(self) -> &'static str {
        match self {
            TrafficModel::Poisson => "poisson",
            TrafficModel::Beta => "beta",
            TrafficModel::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub model: TrafficModel,
    /// Total devices `M`. Only used when no load sweep drives the run.
    pub total_devices: u64,
    /// Activation window `T_A` in seconds.
    pub window_s: f64,
    pub beta_alpha: f64,
    pub beta_beta: f64,
    pub packet_size_bytes: u32,
}

impl TrafficConfig {
    pub fn poisson() -> Self {
        Self {
            model: TrafficModel::Poisson,
            total_devices: 0,
            window_s: 10.0,
            beta_alpha: 3.0,
            beta_beta: 4.0,
            packet_size_bytes: 200,
        }
    }

    /// Traffic model 1: uniform activation over 60 s.
    pub fn uniform(total_devices: u64) -> Self {
        Self { model: TrafficModel::Uniform, total_devices, window_s: 60.0, ..Self::poisson() }
    }

    /// Traffic model 2: Beta(3, 4) activation over 10 s.
    pub fn beta(total_devices: u64) -> Self {
        Self { model: TrafficModel::Beta, total_devices, window_s: 10.0, ..Self::poisson() }
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(self.window_s > 0.0) {
            return Err(TrafficError::InvalidParameter("window_s must be positive"));
        }
        if !(self.beta_alpha > 0.0 && self.beta_beta > 0.0) {
            return Err(TrafficError::InvalidParameter("beta shapes must be positive"));
        }
        if self.packet_size_bytes == 0 {
            return Err(TrafficError::InvalidParameter("packet_size_bytes must be positive"));
        }
        Ok(())
    }
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self::poisson()
    }
}

/// Independent Poisson(`load`) count per slot.
pub fn poisson_arrivals<R: Rng + ?Sized>(
    load: f64,
    n_slots: usize,
    rng: &mut R,
) -> Result<Vec<u32>, TrafficError> {
    if !(load >= 0.0) || !load.is_finite() {
        return Err(TrafficError::InvalidParameter("load must be finite and non-negative"));
    }
    if load == 0.0 {
        return Ok(vec![0; n_slots]);
    }
    let dist = Poisson::new(load).map_err(|_| TrafficError::InvalidParameter("poisson load"))?;
    Ok((0..n_slots).map(|_| dist.sample(rng) as u32).collect())
}

/// `devices` activation times drawn from Beta(`alpha`, `beta`) scaled to the
/// window, binned into `n_slots` slots of `slot_ms`. Activations past the
/// last slot are dropped, so counts sum to `devices` whenever the slots cover
/// the window.
pub fn beta_arrivals<R: Rng + ?Sized>(
    devices: u64,
    window_s: f64,
    alpha: f64,
    beta: f64,
    n_slots: usize,
    slot_ms: f64,
    rng: &mut R,
) -> Result<Vec<u32>, TrafficError> {
    check_window(window_s, slot_ms)?;
    let dist = Beta::new(alpha, beta)
        .map_err(|_| TrafficError::InvalidParameter("beta shapes must be positive"))?;
    Ok(bin_activations(
        (0..devices).map(|_| dist.sample(rng) * window_s),
        window_s,
        n_slots,
        slot_ms,
    ))
}

/// Uniform activation over the window, binned like [`beta_arrivals`].
pub fn uniform_arrivals<R: Rng + ?Sized>(
    devices: u64,
    window_s: f64,
    n_slots: usize,
    slot_ms: f64,
    rng: &mut R,
) -> Result<Vec<u32>, TrafficError> {
    check_window(window_s, slot_ms)?;
    Ok(bin_activations(
        (0..devices).map(|_| rng.random::<f64>() * window_s),
        window_s,
        n_slots,
        slot_ms,
    ))
}

/// Number of slots covering a window.
pub fn window_slots(window_s: f64, slot_ms: f64) -> usize {
    (window_s * 1000.0 / slot_ms).ceil() as usize
}

fn check_window(window_s: f64, slot_ms: f64) -> Result<(), TrafficError> {
    if !(window_s > 0.0) {
        return Err(TrafficError::InvalidParameter("window_s must be positive"));
    }
    if !(slot_ms > 0.0) {
        return Err(TrafficError::InvalidParameter("slot_ms must be positive"));
    }
    Ok(())
}

fn bin_activations(
    times_s: impl Iterator<Item = f64>,
    window_s: f64,
    n_slots: usize,
    slot_ms: f64,
) -> Vec<u32> {
    let last_in_window = window_slots(window_s, slot_ms).saturating_sub(1);
    let mut counts = vec![0u32; n_slots];
    for t in times_s {
        // t == window_s lands in the last slot of the window.
        let bin = ((t * 1000.0 / slot_ms).floor() as usize).min(last_in_window);
        if let Some(c) = counts.get_mut(bin) {
            *c += 1;
        }
    }
    counts
}
