//! Domain types shared by every protocol: degree distributions, frame
//! parameters, per-user transmission records and the user/slot bipartite
//! graph of one MAC frame.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use thiserror::Error;

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("degree distribution sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("negative probability mass at degree {0}")]
    NegativeMass(u32),
    #[error("degree {0} outside [1, d_max]")]
    DegreeOutOfRange(u32),
    #[error("no degree at or below cap {0} carries positive mass")]
    EmptySupport(u32),
    #[error("{d} replicas do not fit in a frame of {n_raf} slots")]
    TooManyReplicas { d: u32, n_raf: usize },
    #[error("user {0} appears more than once in the frame")]
    DuplicateUserId(UserId),
    #[error("replica slot {slot} of user {user} outside frame of {n_raf} slots")]
    SlotOutOfRange { user: UserId, slot: usize, n_raf: usize },
    #[error("invalid frame parameters: {0}")]
    InvalidFrame(&'static str),
    #[error("invalid application profile: {0}")]
    InvalidProfile(&'static str),
}

/// Opaque user identifier, unique within one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub u64);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U{}", self.0)
    }
}

/// Probability mass over replica counts, `Λ(x) = Σ Λ_d x^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    mass: BTreeMap<u32, f64>,
    d_max: u32,
}

impl DegreeDistribution {
    /// Builds and validates a distribution.
    pub fn new(mass: BTreeMap<u32, f64>, d_max: u32) -> Result<Self, ModelError> {
        let dist = Self { mass, d_max };
        validate_distribution(&dist)?;
        Ok(dist)
    }

    /// Builds without validation; `validate_distribution` reports problems.
    pub fn new_unchecked(mass: BTreeMap<u32, f64>, d_max: u32) -> Self {
        Self { mass, d_max }
    }

    pub fn from_pairs(pairs: &[(u32, f64)]) -> Result<Self, ModelError> {
        let d_max = pairs.iter().map(|&(d, _)| d).max().unwrap_or(1);
        Self::new(pairs.iter().copied().collect(), d_max)
    }

    /// `Λ_8(x) = 0.5x² + 0.28x³ + 0.22x⁸`.
    pub fn lambda8() -> Self {
        Self {
            mass: [(2, 0.5), (3, 0.28), (8, 0.22)].into_iter().collect(),
            d_max: 8,
        }
    }

    pub fn mass(&self) -> &BTreeMap<u32, f64> {
        &self.mass
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn prob(&self, d: u32) -> f64 {
        self.mass.get(&d).copied().unwrap_or(0.0)
    }

    /// Average number of replicas per user, `Λ'(1)`.
    pub fn mean_degree(&self) -> f64 {
        self.mass.iter().map(|(&d, &p)| d as f64 * p).sum()
    }

    /// `Λ(x)`.
    pub fn node_poly(&self, x: f64) -> f64 {
        self.mass.iter().map(|(&d, &p)| p * x.powi(d as i32)).sum()
    }

    /// Edge-perspective polynomial `λ(x) = Λ'(x) / Λ'(1)`.
    pub fn edge_poly(&self, x: f64) -> f64 {
        let mean = self.mean_degree();
        self.mass
            .iter()
            .map(|(&d, &p)| d as f64 * p * x.powi(d as i32 - 1))
            .sum::<f64>()
            / mean
    }
}

impl Default for DegreeDistribution {
    fn default() -> Self {
        Self::lambda8()
    }
}

pub fn validate_distribution(dist: &DegreeDistribution) -> Result<(), ModelError> {
    if dist.d_max < 1 {
        return Err(ModelError::DegreeOutOfRange(dist.d_max));
    }
    for (&d, &p) in &dist.mass {
        if d < 1 || d > dist.d_max {
            return Err(ModelError::DegreeOutOfRange(d));
        }
        if p < 0.0 || p.is_nan() {
            return Err(ModelError::NegativeMass(d));
        }
    }
    let sum: f64 = dist.mass.values().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(ModelError::NotNormalized(sum));
    }
    Ok(())
}

/// Draws a replica count in `[1, min(d_max, cap)]`.
///
/// Mass above `cap` is discarded and the remainder renormalized. One uniform
/// variate is consumed per call regardless of `cap`, so streams stay aligned
/// between capped and uncapped callers. When the truncated support is empty
/// the draw falls back to a single replica and `EmptySupport` is not
/// surfaced; use [`truncated_mass`] to detect that case up front.
pub fn sample_degree<R: Rng + ?Sized>(dist: &DegreeDistribution, cap: u32, rng: &mut R) -> u32 {
    let cap = cap.max(1);
    let u: f64 = rng.random();
    let total = truncated_mass(dist, cap);
    if total <= 0.0 {
        return 1;
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 1;
    for (&d, &p) in dist.mass.range(..=cap) {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = d;
        if target < acc {
            return d;
        }
    }
    last
}

/// Probability mass at degrees `<= cap`.
pub fn truncated_mass(dist: &DegreeDistribution, cap: u32) -> f64 {
    dist.mass.range(..=cap).map(|(_, &p)| p.max(0.0)).sum()
}

/// Checked variant of [`sample_degree`] that reports an empty truncated support.
pub fn try_sample_degree<R: Rng + ?Sized>(
    dist: &DegreeDistribution,
    cap: u32,
    rng: &mut R,
) -> Result<u32, ModelError> {
    if truncated_mass(dist, cap.max(1)) <= 0.0 {
        return Err(ModelError::EmptySupport(cap));
    }
    Ok(sample_degree(dist, cap, rng))
}

/// Picks `d` distinct slots of a frame uniformly over all `d`-subsets.
/// The returned indices are sorted.
pub fn select_slots<R: Rng + ?Sized>(
    n_raf: usize,
    d: u32,
    rng: &mut R,
) -> Result<Vec<usize>, ModelError> {
    let d_us = d as usize;
    if d_us > n_raf {
        return Err(ModelError::TooManyReplicas { d, n_raf });
    }
    let mut slots = rand::seq::index::sample(rng, n_raf, d_us).into_vec();
    slots.sort_unstable();
    Ok(slots)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    /// Random access frame length in slots.
    pub n_raf: usize,
    pub slot_ms: f64,
    /// SIC iteration cap.
    pub max_sic_iters: u32,
}

impl FrameParams {
    pub fn new(n_raf: usize, slot_ms: f64, max_sic_iters: u32) -> Result<Self, ModelError> {
        let p = Self { n_raf, slot_ms, max_sic_iters };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_raf < 1 {
            return Err(ModelError::InvalidFrame("n_raf must be at least 1"));
        }
        if !(self.slot_ms > 0.0) {
            return Err(ModelError::InvalidFrame("slot_ms must be positive"));
        }
        if self.max_sic_iters < 1 {
            return Err(ModelError::InvalidFrame("max_sic_iters must be at least 1"));
        }
        Ok(())
    }

    /// Frame duration `T_F` in milliseconds.
    pub fn frame_ms(&self) -> f64 {
        self.n_raf as f64 * self.slot_ms
    }
}

impl Default for FrameParams {
    fn default() -> Self {
        Self { n_raf: 50, slot_ms: 1.0, max_sic_iters: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pending,
    /// Delivered; `at_slot` is a global slot index.
    Decoded { at_slot: u64 },
    Failed,
}

/// One user's packet attempt within a frame (or S-ALOHA window).
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionRecord {
    pub user_id: UserId,
    /// Global slot index of activation.
    pub arrival_slot: u64,
    /// Frame-local slot indices, sorted and distinct.
    pub replica_slots: Vec<usize>,
    /// 0 is the highest priority, 100 the lowest.
    pub priority: u32,
    pub latency_budget_ms: f64,
    pub outcome: Outcome,
}

impl TransmissionRecord {
    pub fn new(user_id: UserId, arrival_slot: u64, priority: u32, latency_budget_ms: f64) -> Self {
        Self {
            user_id,
            arrival_slot,
            replica_slots: Vec::new(),
            priority,
            latency_budget_ms,
            outcome: Outcome::Pending,
        }
    }

    pub fn with_slots(mut self, slots: Vec<usize>) -> Self {
        self.replica_slots = slots;
        self
    }

    pub fn is_decoded(&self) -> bool {
        matches!(self.outcome, Outcome::Decoded { .. })
    }

    /// Delay in slots from activation to delivery.
    pub fn delay_slots(&self) -> Option<u64> {
        match self.outcome {
            Outcome::Decoded { at_slot } => Some(at_slot.saturating_sub(self.arrival_slot)),
            _ => None,
        }
    }
}

/// Bipartite user/slot graph of one frame.
///
/// User nodes are stored densely by insertion order; slot nodes only exist
/// for slots that carry at least one edge.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameGraph {
    users: Vec<UserId>,
    user_edges: Vec<BTreeSet<usize>>,
    slot_edges: BTreeMap<usize, BTreeSet<usize>>,
}

impl FrameGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a user node with edges to `slots`.
    pub fn add_user(&mut self, user: UserId, slots: &[usize]) -> Result<(), ModelError> {
        if self.users.contains(&user) {
            return Err(ModelError::DuplicateUserId(user));
        }
        let idx = self.users.len();
        self.users.push(user);
        self.user_edges.push(slots.iter().copied().collect());
        for &s in slots {
            self.slot_edges.entry(s).or_default().insert(idx);
        }
        Ok(())
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn contains_user(&self, user: UserId) -> bool {
        self.users.contains(&user)
    }

    pub(crate) fn index_of(&self, user: UserId) -> Option<usize> {
        self.users.iter().position(|&u| u == user)
    }

    /// Slots currently connected to `user`.
    pub fn user_slots(&self, user: UserId) -> Option<impl Iterator<Item = usize> + '_> {
        self.index_of(user).map(|i| self.user_edges[i].iter().copied())
    }

    /// Users currently connected to slot `s`.
    pub fn slot_users(&self, s: usize) -> impl Iterator<Item = UserId> + '_ {
        self.slot_edges
            .get(&s)
            .into_iter()
            .flat_map(|set| set.iter().map(|&i| self.users[i]))
    }

    pub fn slot_degree(&self, s: usize) -> usize {
        self.slot_edges.get(&s).map_or(0, BTreeSet::len)
    }

    pub fn user_degree(&self, user: UserId) -> usize {
        self.index_of(user).map_or(0, |i| self.user_edges[i].len())
    }

    /// Slot indices that have at least one edge, ascending.
    pub fn slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.slot_edges
            .iter()
            .filter(|(_, e)| !e.is_empty())
            .map(|(&s, _)| s)
    }

    /// Degree-one slots with their lone user, ascending by slot.
    pub fn singleton_slots(&self) -> Vec<(usize, UserId)> {
        self.slot_edges
            .iter()
            .filter(|(_, e)| e.len() == 1)
            .map(|(&s, e)| (s, self.users[*e.first().expect("len checked")]))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.user_edges.iter().map(BTreeSet::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (UserId, usize)> + '_ {
        self.users
            .iter()
            .zip(&self.user_edges)
            .flat_map(|(&u, e)| e.iter().map(move |&s| (u, s)))
    }

    /// Drops every edge of `user`; the user node itself stays with degree 0.
    pub fn remove_user_edges(&mut self, user: UserId) -> bool {
        let Some(idx) = self.index_of(user) else {
            return false;
        };
        for s in std::mem::take(&mut self.user_edges[idx]) {
            if let Some(set) = self.slot_edges.get_mut(&s) {
                set.remove(&idx);
                if set.is_empty() {
                    self.slot_edges.remove(&s);
                }
            }
        }
        true
    }

    /// Subgraph induced by the given users (all their edges kept).
    pub fn induced(&self, keep: impl Fn(UserId) -> bool) -> FrameGraph {
        let mut g = FrameGraph::new();
        for (&u, e) in self.users.iter().zip(&self.user_edges) {
            if keep(u) {
                let slots: Vec<usize> = e.iter().copied().collect();
                g.add_user(u, &slots).expect("source graph has unique users");
            }
        }
        g
    }

    /// Full cross-scan of both adjacency sides.
    pub fn is_consistent(&self) -> bool {
        for (i, e) in self.user_edges.iter().enumerate() {
            for s in e {
                if !self.slot_edges.get(s).is_some_and(|set| set.contains(&i)) {
                    return false;
                }
            }
        }
        for (s, set) in &self.slot_edges {
            for &i in set {
                if i >= self.user_edges.len() || !self.user_edges[i].contains(s) {
                    return false;
                }
            }
        }
        true
    }
}

/// Builds the frame graph from the replica slots of each record.
pub fn build_frame_graph(records: &[TransmissionRecord]) -> Result<FrameGraph, ModelError> {
    let mut g = FrameGraph::new();
    for r in records {
        g.add_user(r.user_id, &r.replica_slots)?;
    }
    Ok(g)
}

/// Same as [`build_frame_graph`] with a bound check against the frame length.
pub fn build_frame_graph_checked(
    records: &[TransmissionRecord],
    n_raf: usize,
) -> Result<FrameGraph, ModelError> {
    for r in records {
        if let Some(&slot) = r.replica_slots.iter().find(|&&s| s >= n_raf) {
            return Err(ModelError::SlotOutOfRange { user: r.user_id, slot, n_raf });
        }
    }
    build_frame_graph(records)
}

/// Latency and priority requirements of an application class.
#[derive(Debug, Clone, PartialEq)]
pub struct AppProfile {
    pub name: String,
    pub latency_ms: f64,
    pub priority: u32,
}

impl AppProfile {
    pub fn new(name: impl Into<String>, latency_ms: f64, priority: u32) -> Result<Self, ModelError> {
        if !(latency_ms > 0.0) {
            return Err(ModelError::InvalidProfile("latency_ms must be positive"));
        }
        if priority > 100 {
            return Err(ModelError::InvalidProfile("priority must be in [0, 100]"));
        }
        Ok(Self { name: name.into(), latency_ms, priority })
    }

    /// Smart-grid application catalog (latency in ms, priority 0 = max).
    pub fn catalog() -> Vec<AppProfile> {
        const TABLE: &[(&str, f64, u32)] = &[
            ("Teleprotection-60Hz", 8.0, 10),
            ("Teleprotection-50Hz", 10.0, 10),
            ("SCADA-10", 10.0, 20),
            ("Teleprotection", 16.0, 15),
            ("Synchrophasors", 20.0, 12),
            ("SCADA-100", 100.0, 25),
            ("Distribution automation", 100.0, 26),
            ("DG-DS", 100.0, 27),
            ("MWF", 100.0, 30),
            ("Business voice", 200.0, 60),
            ("Dynamic Line Rating", 200.0, 28),
            ("CCTV", 200.0, 55),
            ("SCADA-DA-DG-DLR", 200.0, 45),
            ("Business data", 250.0, 70),
            ("AMI", 250.0, 40),
            ("Protection", 500.0, 80),
            ("Many/others", 2000.0, 100),
        ];
        TABLE
            .iter()
            .map(|&(n, l, p)| AppProfile { name: n.to_string(), latency_ms: l, priority: p })
            .collect()
    }

    /// Case-insensitive catalog lookup.
    pub fn lookup(name: &str) -> Option<AppProfile> {
        Self::catalog()
            .into_iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
    }
}
