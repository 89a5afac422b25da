//! QoS metrics and analytic reference curves.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{DegreeDistribution, FrameParams, TransmissionRecord};
use crate::protocols::{FrameOutcome, SlotActivity};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("received count {received} exceeds generated count {generated}")]
    CountMismatch { received: u64, generated: u64 },
    #[error("slot {slot}: {compliant} compliant users out of {active} active")]
    NegativeCount { slot: usize, compliant: u32, active: u32 },
}

/// Slotted ALOHA throughput `S(G) = G e^{-G}`.
pub fn saloha_theory(load: f64) -> f64 {
    load * (-load).exp()
}

/// Delivery delay in milliseconds, `None` when undelivered.
pub fn latency_ms(record: &TransmissionRecord, frame: &FrameParams) -> Option<f64> {
    record.delay_slots().map(|d| d as f64 * frame.slot_ms)
}

/// Packet delivery ratio. An idle source (`generated == 0`) counts as fully
/// delivered.
pub fn pdr(received: u64, generated: u64) -> Result<f64, MetricsError> {
    if received > generated {
        return Err(MetricsError::CountMismatch { received, generated });
    }
    if generated == 0 {
        return Ok(1.0);
    }
    Ok(received as f64 / generated as f64)
}

pub fn plr(pdr: f64) -> f64 {
    1.0 - pdr
}

/// Hard-delay latency requirement of an application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyBudget {
    pub tau_req_ms: f64,
    pub grid_freq_hz: f64,
    /// Delay factor in grid cycles.
    pub delay_factor: f64,
}

impl LatencyBudget {
    pub fn new(tau_req_ms: f64) -> Self {
        let grid_freq_hz = 60.0;
        Self { tau_req_ms, grid_freq_hz, delay_factor: tau_req_ms / 1000.0 * grid_freq_hz }
    }

    /// Budget of `cycles` periods of a grid at `freq_hz`: `L = τ / f`.
    pub fn from_cycles(cycles: f64, freq_hz: f64) -> Self {
        Self { tau_req_ms: cycles / freq_hz * 1000.0, grid_freq_hz: freq_hz, delay_factor: cycles }
    }
}

/// `PDR` when the delay meets the requirement, zero otherwise.
pub fn reliability(pdr: f64, tau_ms: f64, budget: &LatencyBudget) -> f64 {
    if tau_ms <= budget.tau_req_ms {
        pdr
    } else {
        0.0
    }
}

/// Mean over busy slots of the fraction of users meeting their deadline.
/// Idle slots are skipped; with no busy slot at all the ratio is 1.
pub fn acr(slots: &[SlotActivity]) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (slot, s) in slots.iter().enumerate() {
        if s.compliant > s.active {
            return Err(MetricsError::NegativeCount { slot, compliant: s.compliant, active: s.active });
        }
        if s.active > 0 {
            sum += s.compliant as f64 / s.active as f64;
            n += 1;
        }
    }
    Ok(if n == 0 { 1.0 } else { sum / n as f64 })
}

/// Required bandwidth `S · 8 · M / τ_req`, in bits per second.
pub fn bw_req(packet_size_bytes: f64, tau_req_s: f64, devices: f64) -> f64 {
    packet_size_bytes * 8.0 * (1.0 / tau_req_s) * devices
}

/// Asymptotic residual user-loss probability of IRSA with Poisson slot
/// degrees, after `iters` rounds of the and-or tree recursion started from
/// full erasure.
pub fn irsa_density_evolution(dist: &DegreeDistribution, load: f64, iters: u32) -> f64 {
    let mean = dist.mean_degree();
    let mut user_to_slot = 1.0;
    let mut slot_to_user = 1.0;
    for _ in 0..iters {
        slot_to_user = 1.0 - (-load * mean * user_to_slot).exp();
        user_to_slot = dist.edge_poly(slot_to_user);
    }
    dist.node_poly(slot_to_user)
}

/// Load at which the asymptotic residual loss crosses 0.5, by bisection.
pub fn irsa_threshold(dist: &DegreeDistribution, iters: u32) -> f64 {
    let (mut lo, mut hi) = (1e-6, 2.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if irsa_density_evolution(dist, mid, iters) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Asymptotic IRSA throughput `G (1 - residual(G))`.
pub fn irsa_asymptotic_throughput(dist: &DegreeDistribution, load: f64, iters: u32) -> f64 {
    load * (1.0 - irsa_density_evolution(dist, load, iters))
}

/// Summary of one load point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub protocol: String,
    pub load: f64,
    /// Delivered packets per access slot.
    pub throughput_raf: f64,
    /// Delivered packets per slot including forwarding slots.
    pub throughput_rapc: f64,
    pub pdr: f64,
    pub plr: f64,
    /// Over delivered packets and, at their current age, packets still
    /// queued when the simulation ends.
    pub mean_delay_slots: f64,
    pub delay_per_active: f64,
    pub delay_p95_ms: f64,
    pub reliability: f64,
    pub acr: f64,
    pub realizations: u64,
    pub ci_throughput: f64,
    pub ci_plr: f64,
    pub ci_acr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    // Normal-approximation 95% half-width.
    fn half_width(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        1.96 * (var / n).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct ProfileTally {
    budget_ms: f64,
    generated: u64,
    delivered: u64,
    delay_slots: u64,
}

/// Counters of one realization, or of several merged together.
///
/// Sums and counts are merged before any ratio is formed, so merging is
/// associative and commutative up to float rounding of the moment sums.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tally {
    generated: u64,
    delivered: u64,
    delay_sum_slots: u64,
    delay_count: u64,
    delay_hist: BTreeMap<u64, u64>,
    active_users: u64,
    frames: u64,
    access_slots: u64,
    total_slots: u64,
    acr_sum: f64,
    acr_slots: u64,
    profiles: BTreeMap<String, ProfileTally>,
    throughput: Moments,
    throughput_total: Moments,
    plr: Moments,
    acr: Moments,
}

impl Tally {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts a newly generated packet of the given application class.
    pub fn generated(&mut self, profile: &str, budget_ms: f64) {
        self.generated += 1;
        let p = self.profiles.entry(profile.to_string()).or_default();
        p.budget_ms = budget_ms;
        p.generated += 1;
    }

    /// Counts a delivery with its delay.
    pub fn delivered(&mut self, profile: &str, delay_slots: u64) {
        self.delivered += 1;
        self.add_delay(delay_slots);
        let p = self.profiles.entry(profile.to_string()).or_default();
        p.delivered += 1;
        p.delay_slots += delay_slots;
    }

    /// Counts a packet still queued when the simulation ends, with the age
    /// it has reached so far. It enters the delay statistics but not the
    /// delivery counts.
    pub fn censored(&mut self, age_slots: u64) {
        self.add_delay(age_slots);
    }

    fn add_delay(&mut self, slots: u64) {
        self.delay_sum_slots += slots;
        self.delay_count += 1;
        *self.delay_hist.entry(slots).or_default() += 1;
    }

    /// Counts one frame (or window): users that transmitted in it, slots it
    /// occupied and its per-slot activity.
    pub fn frame(&mut self, outcome: &FrameOutcome, access_slots: usize) {
        self.frames += 1;
        self.active_users += outcome.records.len() as u64;
        self.access_slots += access_slots as u64;
        self.total_slots += outcome.slots_used as u64;
        for s in &outcome.slot_activity {
            if s.active > 0 {
                self.acr_sum += s.compliant as f64 / s.active as f64;
                self.acr_slots += 1;
            }
        }
    }

    /// Closes a single realization, recording its per-realization means for
    /// the confidence intervals.
    pub fn seal(mut self) -> Self {
        let thr = ratio(self.delivered, self.access_slots);
        let thr_total = ratio(self.delivered, self.total_slots);
        let plr = 1.0 - pdr(self.delivered, self.generated).unwrap_or(1.0);
        let acr = if self.acr_slots == 0 { 1.0 } else { self.acr_sum / self.acr_slots as f64 };
        self.throughput.push(thr);
        self.throughput_total.push(thr_total);
        self.plr.push(plr);
        self.acr.push(acr);
        self
    }

    pub fn merge(&mut self, o: &Tally) {
        self.generated += o.generated;
        self.delivered += o.delivered;
        self.delay_sum_slots += o.delay_sum_slots;
        self.delay_count += o.delay_count;
        for (&k, &v) in &o.delay_hist {
            *self.delay_hist.entry(k).or_default() += v;
        }
        self.active_users += o.active_users;
        self.frames += o.frames;
        self.access_slots += o.access_slots;
        self.total_slots += o.total_slots;
        self.acr_sum += o.acr_sum;
        self.acr_slots += o.acr_slots;
        for (name, p) in &o.profiles {
            let e = self.profiles.entry(name.clone()).or_default();
            e.budget_ms = p.budget_ms;
            e.generated += p.generated;
            e.delivered += p.delivered;
            e.delay_slots += p.delay_slots;
        }
        self.throughput.merge(&o.throughput);
        self.throughput_total.merge(&o.throughput_total);
        self.plr.merge(&o.plr);
        self.acr.merge(&o.acr);
    }

    pub fn generated_count(&self) -> u64 {
        self.generated
    }

    pub fn delivered_count(&self) -> u64 {
        self.delivered
    }

    /// Delay quantile in slots.
    pub fn delay_quantile_slots(&self, q: f64) -> f64 {
        if self.delay_count == 0 {
            return 0.0;
        }
        let rank = ((q * self.delay_count as f64).ceil() as u64).max(1);
        let mut seen = 0;
        for (&d, &c) in &self.delay_hist {
            seen += c;
            if seen >= rank {
                return d as f64;
            }
        }
        *self.delay_hist.keys().next_back().unwrap_or(&0) as f64
    }

    pub fn report(&self, protocol: &str, load: f64, slot_ms: f64) -> MetricsReport {
        let pdr_v = pdr(self.delivered, self.generated).unwrap_or(1.0);
        let mean_delay_slots = ratio(self.delay_sum_slots, self.delay_count);
        let active_per_frame = ratio(self.active_users, self.frames);
        let delay_per_active =
            if active_per_frame > 0.0 { mean_delay_slots / active_per_frame } else { 0.0 };

        // Per application class: PDR if its mean delay meets the class
        // budget, else zero; weighted by generated packets.
        let mut rel_num = 0.0;
        for p in self.profiles.values() {
            if p.generated == 0 {
                continue;
            }
            let class_pdr = p.delivered as f64 / p.generated as f64;
            let tau_ms = if p.delivered == 0 {
                0.0
            } else {
                p.delay_slots as f64 / p.delivered as f64 * slot_ms
            };
            let r = reliability(class_pdr, tau_ms, &LatencyBudget::new(p.budget_ms));
            rel_num += r * p.generated as f64;
        }
        let reliability_v = if self.generated == 0 { 1.0 } else { rel_num / self.generated as f64 };

        MetricsReport {
            protocol: protocol.to_string(),
            load,
            throughput_raf: self.throughput.mean(),
            throughput_rapc: self.throughput_total.mean(),
            pdr: pdr_v,
            plr: plr(pdr_v),
            mean_delay_slots,
            delay_per_active,
            delay_p95_ms: self.delay_quantile_slots(0.95) * slot_ms,
            reliability: reliability_v,
            acr: self.acr.mean(),
            realizations: self.throughput.n,
            ci_throughput: self.throughput.half_width(),
            ci_plr: self.plr.half_width(),
            ci_acr: self.acr.half_width(),
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Outcome, UserId};
    use proptest::prelude::*;

    #[test]
    fn saloha_theory_values() {
        assert!((saloha_theory(1.0) - 0.3679).abs() < 1e-4);
        assert_eq!(saloha_theory(0.0), 0.0);
        assert!((saloha_theory(2.0) - 0.2707).abs() < 1e-4);
    }

    #[test]
    fn latency_examples() {
        let frame = FrameParams::default();
        let mut r = TransmissionRecord::new(UserId(0), 0, 0, 250.0);
        r.outcome = Outcome::Decoded { at_slot: 49 };
        assert_eq!(latency_ms(&r, &frame), Some(49.0));
        r.outcome = Outcome::Failed;
        assert_eq!(latency_ms(&r, &frame), None);
    }

    #[test]
    fn pdr_plr_examples() {
        assert_eq!(pdr(95, 100).unwrap(), 0.95);
        assert!((plr(0.95) - 0.05).abs() < 1e-15);
        assert_eq!(pdr(100, 100).unwrap(), 1.0);
        assert_eq!(plr(1.0), 0.0);
        assert_eq!(pdr(0, 0).unwrap(), 1.0);
        assert!(matches!(pdr(5, 4), Err(MetricsError::CountMismatch { .. })));
    }

    #[test]
    fn reliability_examples() {
        let ami = LatencyBudget::new(250.0);
        assert_eq!(reliability(0.99, 200.0, &ami), 0.99);
        assert_eq!(reliability(0.99, 300.0, &ami), 0.0);
        assert_eq!(reliability(0.0, 10.0, &ami), 0.0);
    }

    #[test]
    fn budget_from_cycles() {
        let b = LatencyBudget::from_cycles(3.0, 60.0);
        assert!((b.tau_req_ms - 50.0).abs() < 1e-12);
        assert_eq!(b.delay_factor, 3.0);
    }

    fn slots(v: &[(u32, u32)]) -> Vec<SlotActivity> {
        v.iter().map(|&(compliant, active)| SlotActivity { active, compliant }).collect()
    }

    #[test]
    fn acr_examples() {
        assert_eq!(acr(&slots(&[(3, 3), (1, 1)])).unwrap(), 1.0);
        assert_eq!(acr(&slots(&[(2, 2), (1, 2)])).unwrap(), 0.75);
        assert_eq!(acr(&slots(&[(0, 2), (0, 5)])).unwrap(), 0.0);
        // Idle slots do not count.
        assert_eq!(acr(&slots(&[(2, 2), (0, 0), (1, 2)])).unwrap(), 0.75);
        assert!(matches!(acr(&slots(&[(3, 2)])), Err(MetricsError::NegativeCount { .. })));
    }

    #[test]
    fn bandwidth_examples() {
        assert!((bw_req(200.0, 0.25, 1000.0) - 6.4e6).abs() < 1e-6);
        assert_eq!(bw_req(200.0, 0.25, 0.0), 0.0);
        assert!((bw_req(200.0, 1.0, 1.0) - 1600.0).abs() < 1e-9);
    }

    #[test]
    fn density_evolution_limits() {
        let d = DegreeDistribution::lambda8();
        assert!(irsa_density_evolution(&d, 1e-4, 200) < 1e-9);
        assert!(irsa_density_evolution(&d, 0.5, 200) < 1e-3);
        assert!(irsa_density_evolution(&d, 1.2, 200) > 0.5);
    }

    // Fixed point of the recursion: G* = min over y of -ln(1-y) / (mean * λ(y)).
    fn threshold_oracle(dist: &DegreeDistribution) -> f64 {
        let mean = dist.mean_degree();
        (1..100_000)
            .map(|i| i as f64 / 100_000.0)
            .map(|y| -(1.0 - y).ln() / (mean * dist.edge_poly(y)))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn threshold_matches_fixed_point_oracle() {
        let d = DegreeDistribution::lambda8();
        let oracle = threshold_oracle(&d);
        assert!((oracle - 0.94).abs() < 0.01, "oracle {oracle}");
        let bisected = irsa_threshold(&d, 10_000);
        assert!((bisected - oracle).abs() < 0.005, "bisected {bisected} oracle {oracle}");
    }

    #[test]
    fn quantile_from_histogram() {
        let mut t = Tally::new();
        for d in 1..=100 {
            t.generated("AMI", 250.0);
            t.delivered("AMI", d);
        }
        assert_eq!(t.delay_quantile_slots(0.95), 95.0);
        assert_eq!(t.delay_quantile_slots(1.0), 100.0);
    }

    #[test]
    fn censored_packets_enter_delay_only() {
        let mut t = Tally::new();
        t.generated("AMI", 250.0);
        t.generated("AMI", 250.0);
        t.delivered("AMI", 10);
        t.censored(1000);
        let r = t.seal().report("saloha", 1.0, 1.0);
        assert_eq!(r.pdr, 0.5);
        assert_eq!(r.mean_delay_slots, 505.0);
        assert_eq!(r.delay_p95_ms, 1000.0);
        // Class delay for reliability uses deliveries only.
        assert_eq!(r.reliability, 0.5);
    }

    proptest! {
        #[test]
        fn plr_complements_pdr(a in 0u64..10_000, extra in 0u64..10_000) {
            let d = pdr(a, a + extra).unwrap();
            prop_assert_eq!(plr(d) + d, 1.0);
        }

        #[test]
        fn acr_in_unit_interval_and_monotone(
            v in proptest::collection::vec((0u32..5, 0u32..5), 1..30),
            pick in 0usize..30,
        ) {
            let s: Vec<SlotActivity> = v
                .iter()
                .map(|&(c, extra)| SlotActivity { active: c + extra, compliant: c })
                .collect();
            let base = acr(&s).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));
            let mut bumped = s.clone();
            let i = pick % bumped.len();
            if bumped[i].compliant < bumped[i].active {
                bumped[i].compliant += 1;
                prop_assert!(acr(&bumped).unwrap() >= base);
            }
        }
    }
}
