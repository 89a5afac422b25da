//! Seeded Monte Carlo execution of one experiment.
//!
//! Realization `r` draws everything from `ChaCha8Rng::seed_from_u64(seed ^ r)`.
//! Realizations run in parallel and are merged in index order, so results
//! do not depend on the number of workers.
//!
//! Load model: with Poisson traffic each IRSA-family frame carries
//! `round(G * n_raf)` users whose arrival slots are uniform over the
//! preceding frame period, and S-ALOHA sees Poisson(G) arrivals per slot.
//! With Beta or uniform traffic the activation window is simulated in full
//! and `M` is `total_devices`, or `round(G * window_slots)` when that is 0.
//! Users arriving during one frame period transmit in the next frame.
//! S-ALOHA users still backlogged at the end count towards the delay
//! statistics with their age at that point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ExperimentConfig, HarnessError};
use crate::metrics::{MetricsReport, Tally};
use crate::model::{TransmissionRecord, UserId};
use crate::protocols::{
    assign_topology, cn_slot_count, irsa_frame, rapirsa_frame, saloha_window,
    sp_frame, Backlog, BackoffPolicy, FrameOutcome, FramePosition, Protocol, SpRequest,
};
use crate::traffic::{beta_arrivals, poisson_arrivals, uniform_arrivals, window_slots, TrafficModel};

/// Random stream of realization `r`.
pub fn realization_rng(seed: u64, r: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ r)
}

/// Runs every load point of the sweep on the current thread pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsReport>, HarnessError> {
    cfg.validate()?;
    cfg.load_sweep.iter().map(|&g| run_point(cfg, g)).collect()
}

/// [`run_experiment`] on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<Vec<MetricsReport>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    pool.install(|| run_experiment(cfg))
}

/// Aggregates `cfg.realizations` independent realizations at one load.
pub fn run_point(cfg: &ExperimentConfig, load: f64) -> Result<MetricsReport, HarnessError> {
    let tallies = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| run_realization(cfg, load, r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = Tally::new();
    for t in &tallies {
        total.merge(t);
    }
    Ok(total.report(cfg.protocol.name(), load, cfg.frame.slot_ms))
}

/// Sealed counters of realization `r`.
pub fn run_realization(cfg: &ExperimentConfig, load: f64, r: u64) -> Result<Tally, HarnessError> {
    let names: Vec<&str> = cfg.app_profiles.iter().map(|p| p.name.as_str()).collect();
    let mut tally = Tally::new();
    simulate(cfg, load, r, &mut |event| match event {
        Event::Arrival { record, profile } => tally.generated(names[profile], record.latency_budget_ms),
        Event::Frame { outcome, profiles } => {
            for rec in &outcome.records {
                if let Some(d) = rec.delay_slots() {
                    tally.delivered(names[profiles[rec.user_id.0 as usize]], d);
                }
            }
            tally.frame(outcome, cfg.frame.n_raf);
        }
        Event::Censored { age_slots } => tally.censored(age_slots),
    })?;
    Ok(tally.seal())
}

/// Frame (or S-ALOHA window) outcomes of realization `r`, in time order.
pub fn realization_outcomes(
    cfg: &ExperimentConfig,
    load: f64,
    r: u64,
) -> Result<Vec<FrameOutcome>, HarnessError> {
    let mut out = Vec::new();
    simulate(cfg, load, r, &mut |event| {
        if let Event::Frame { outcome, .. } = event {
            out.push(outcome.clone());
        }
    })?;
    Ok(out)
}

enum Event<'a> {
    Arrival { record: &'a TransmissionRecord, profile: usize },
    Frame { outcome: &'a FrameOutcome, profiles: &'a [usize] },
    Censored { age_slots: u64 },
}

struct Users {
    next_id: u64,
    profile_of: Vec<usize>,
}

impl Users {
    fn make<R: Rng + ?Sized>(&mut self, cfg: &ExperimentConfig, arrival: u64, rng: &mut R) -> TransmissionRecord {
        let k = match cfg.app_profiles.len() {
            1 => 0,
            n => rng.random_range(0..n),
        };
        let p = &cfg.app_profiles[k];
        let rec = TransmissionRecord::new(UserId(self.next_id), arrival, p.priority, p.latency_ms);
        self.next_id += 1;
        self.profile_of.push(k);
        rec
    }
}

fn arrival_counts<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    load: f64,
    rng: &mut R,
) -> Result<Option<Vec<u32>>, HarnessError> {
    let t = &cfg.traffic;
    let slot_ms = cfg.frame.slot_ms;
    let devices = |w: usize| {
        if t.total_devices > 0 {
            t.total_devices
        } else {
            (load * w as f64).round() as u64
        }
    };
    Ok(match t.model {
        TrafficModel::Poisson if cfg.protocol.is_saloha() => {
            Some(poisson_arrivals(load, cfg.horizon_slots(), rng)?)
        }
        TrafficModel::Poisson => None,
        TrafficModel::Beta => {
            let w = window_slots(t.window_s, slot_ms);
            Some(beta_arrivals(devices(w), t.window_s, t.beta_alpha, t.beta_beta, w, slot_ms, rng)?)
        }
        TrafficModel::Uniform => {
            let w = window_slots(t.window_s, slot_ms);
            Some(uniform_arrivals(devices(w), t.window_s, w, slot_ms, rng)?)
        }
    })
}

fn simulate(
    cfg: &ExperimentConfig,
    load: f64,
    r: u64,
    sink: &mut dyn FnMut(Event<'_>),
) -> Result<(), HarnessError> {
    let mut rng = realization_rng(cfg.seed, r);
    let counts = arrival_counts(cfg, load, &mut rng)?;
    let mut users = Users { next_id: 0, profile_of: Vec::new() };
    if cfg.protocol.is_saloha() {
        let counts = counts.expect("S-ALOHA always has per-slot arrivals");
        simulate_saloha(cfg, &counts, &mut users, &mut rng, sink)
    } else {
        simulate_frames(cfg, load, counts.as_deref(), &mut users, &mut rng, sink)
    }
}

fn simulate_saloha(
    cfg: &ExperimentConfig,
    counts: &[u32],
    users: &mut Users,
    rng: &mut ChaCha8Rng,
    sink: &mut dyn FnMut(Event<'_>),
) -> Result<(), HarnessError> {
    let n = cfg.frame.n_raf;
    let mut backlog = Backlog::new();
    for (k, chunk) in counts.chunks(n).enumerate() {
        let start = (k * n) as u64;
        let mut arrivals = Vec::new();
        for (slot, &m) in chunk.iter().enumerate() {
            for _ in 0..m {
                arrivals.push(users.make(cfg, start + slot as u64, rng));
            }
        }
        for a in &arrivals {
            sink(Event::Arrival { record: a, profile: users.profile_of[a.user_id.0 as usize] });
        }
        let pos = FramePosition::new(k as u64, start);
        let outcome = match cfg.protocol {
            Protocol::Saloha => saloha_window(
                &mut backlog,
                arrivals,
                &cfg.frame,
                &cfg.saloha,
                BackoffPolicy::Uniform,
                pos,
                rng,
            )?,
            _ => sp_frame(
                SpRequest::Saloha { backlog: &mut backlog, arrivals, params: &cfg.saloha },
                &cfg.frame,
                pos,
                rng,
            )?,
        };
        sink(Event::Frame { outcome: &outcome, profiles: &users.profile_of });
    }
    let end = (counts.len().div_ceil(n) * n) as u64;
    for rec in backlog.pending() {
        sink(Event::Censored { age_slots: end - rec.arrival_slot });
    }
    Ok(())
}

fn simulate_frames(
    cfg: &ExperimentConfig,
    load: f64,
    counts: Option<&[u32]>,
    users: &mut Users,
    rng: &mut ChaCha8Rng,
    sink: &mut dyn FnMut(Event<'_>),
) -> Result<(), HarnessError> {
    let n = cfg.frame.n_raf;
    let rap = cfg.rap_params();
    let forward = if cfg.protocol.uses_cns() && rap.q > 0 { cn_slot_count(&rap, &cfg.frame) } else { 0 };
    let period = n + forward;
    let frames = match counts {
        Some(c) => c.len().div_ceil(period),
        None => cfg.horizon_slots() / period,
    };
    let per_frame = (load * n as f64).round() as usize;

    for k in 0..frames {
        let window = (k * period) as u64;
        let mut active = Vec::new();
        match counts {
            Some(c) => {
                let end = ((k + 1) * period).min(c.len());
                for (slot, &m) in c[k * period..end].iter().enumerate() {
                    for _ in 0..m {
                        active.push(users.make(cfg, window + slot as u64, rng));
                    }
                }
            }
            None => {
                let mut offsets: Vec<u64> =
                    (0..per_frame).map(|_| rng.random_range(0..period as u64)).collect();
                offsets.sort_unstable();
                for off in offsets {
                    active.push(users.make(cfg, window + off, rng));
                }
            }
        }
        for a in &active {
            sink(Event::Arrival { record: a, profile: users.profile_of[a.user_id.0 as usize] });
        }

        let pos = FramePosition::new(k as u64, window + period as u64);
        let dist = &cfg.dist;
        let frame = &cfg.frame;
        let outcome = match cfg.protocol {
            Protocol::Irsa => irsa_frame(active, dist, frame, pos, rng)?,
            Protocol::SpIrsa => sp_frame(SpRequest::Irsa { users: active, dist }, frame, pos, rng)?,
            Protocol::RapIrsa | Protocol::SpRapIrsa => {
                let ids: Vec<UserId> = active.iter().map(|u| u.user_id).collect();
                let topology = assign_topology(&ids, &rap, frame, rng);
                if cfg.protocol == Protocol::RapIrsa {
                    rapirsa_frame(active, dist, frame, &topology, pos, rng)?
                } else {
                    let req = SpRequest::RapIrsa { users: active, dist, topology: &topology };
                    sp_frame(req, frame, pos, rng)?
                }
            }
            Protocol::Saloha | Protocol::SpSaloha => unreachable!("handled by simulate_saloha"),
        };
        sink(Event::Frame { outcome: &outcome, profiles: &users.profile_of });
    }
    Ok(())
}
