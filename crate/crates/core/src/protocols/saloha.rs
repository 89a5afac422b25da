use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;

use super::{compliant, priority_backoff_limit, FrameOutcome, FramePosition, ProtocolError, SlotActivity};
use crate::model::{FrameParams, Outcome, TransmissionRecord, UserId};
use crate::sic::{DecodeSite, DecodedUser, DecodingResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SalohaParams {
    /// Largest backoff draw `B_off`, in slots.
    pub backoff_limit: u32,
    /// Drop collided users instead of backlogging them.
    pub fresh_only: bool,
}

impl SalohaParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.backoff_limit < 1 {
            return Err(ProtocolError::InvalidParameter("backoff_limit must be at least 1"));
        }
        Ok(())
    }
}

impl Default for SalohaParams {
    fn default() -> Self {
        Self { backoff_limit: 50, fresh_only: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackoffPolicy {
    /// Every user draws from `[1, backoff_limit]`.
    Uniform,
    /// The upper bound follows [`priority_backoff_limit`].
    ByPriority,
}

#[derive(Debug, Clone, PartialEq)]
struct Pending {
    record: TransmissionRecord,
    backoff_limit: u32,
}

/// Backlogged users keyed by the global slot of their next attempt.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Backlog {
    schedule: BTreeMap<u64, Vec<Pending>>,
}

impl Backlog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.schedule.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }

    /// Records still waiting for a retransmission.
    pub fn pending(&self) -> impl Iterator<Item = &TransmissionRecord> {
        self.schedule.values().flatten().map(|p| &p.record)
    }

    fn push(&mut self, slot: u64, p: Pending) {
        self.schedule.entry(slot).or_default().push(p);
    }

    fn take(&mut self, slot: u64) -> Vec<Pending> {
        self.schedule.remove(&slot).unwrap_or_default()
    }
}

/// Expands per-slot counts into fresh records with sequential ids starting
/// at `first_id`; `profile` supplies `(priority, latency_budget_ms)` per user.
pub fn records_from_counts(
    counts: &[u32],
    first_slot: u64,
    first_id: u64,
    mut profile: impl FnMut() -> (u32, f64),
) -> Vec<TransmissionRecord> {
    let mut out = Vec::new();
    let mut id = first_id;
    for (k, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            let (priority, budget) = profile();
            out.push(TransmissionRecord::new(UserId(id), first_slot + k as u64, priority, budget));
            id += 1;
        }
    }
    out
}

/// Simulates `frame.n_raf` consecutive slots of slotted ALOHA starting at
/// `pos.start`.
///
/// Fresh users send in their arrival slot and backlogged users when their
/// backoff expires. A lone transmission is delivered; every party to a
/// collision redraws a backoff uniformly in `[1, limit]` (or is dropped when
/// `fresh_only`). Records cover the users that transmitted in this window;
/// users still backlogged at the end keep `Outcome::Pending` and remain in
/// `backlog`.
pub fn saloha_window<R: Rng + ?Sized>(
    backlog: &mut Backlog,
    arrivals: Vec<TransmissionRecord>,
    frame: &FrameParams,
    params: &SalohaParams,
    policy: BackoffPolicy,
    pos: FramePosition,
    rng: &mut R,
) -> Result<FrameOutcome, ProtocolError> {
    params.validate()?;
    let n = frame.n_raf;
    let end = pos.start + n as u64;
    for a in &arrivals {
        if a.arrival_slot < pos.start || a.arrival_slot >= end {
            return Err(ProtocolError::ArrivalOutsideWindow { slot: a.arrival_slot, start: pos.start, end });
        }
    }
    for a in arrivals {
        let backoff_limit = match policy {
            BackoffPolicy::Uniform => params.backoff_limit,
            BackoffPolicy::ByPriority => priority_backoff_limit(a.priority, params.backoff_limit)?,
        };
        let slot = a.arrival_slot;
        backlog.push(slot, Pending { record: a, backoff_limit });
    }

    let mut records: Vec<TransmissionRecord> = Vec::new();
    let mut index: HashMap<UserId, usize> = HashMap::new();
    let mut activity = vec![SlotActivity::default(); n];
    let mut decoded = Vec::new();

    for (k, act) in activity.iter_mut().enumerate() {
        let t = pos.start + k as u64;
        let mut tx = backlog.take(t);
        if tx.is_empty() {
            continue;
        }
        for p in &tx {
            let i = *index.entry(p.record.user_id).or_insert_with(|| {
                let mut r = p.record.clone();
                r.replica_slots.clear();
                records.push(r);
                records.len() - 1
            });
            records[i].replica_slots.push(k);
        }
        act.active = tx.len() as u32;

        if tx.len() == 1 {
            let p = tx.pop().expect("one transmitter");
            let r = &mut records[index[&p.record.user_id]];
            r.outcome = Outcome::Decoded { at_slot: t };
            act.compliant = compliant(r, frame.slot_ms) as u32;
            decoded.push(DecodedUser { user: r.user_id, iteration: 1, site: DecodeSite::Slot(k) });
            continue;
        }
        for mut p in tx {
            if params.fresh_only {
                records[index[&p.record.user_id]].outcome = Outcome::Failed;
                continue;
            }
            let b = rng.random_range(1..=p.backoff_limit) as u64;
            p.record.replica_slots.clear();
            backlog.push(t + b, p);
        }
    }

    let done: BTreeSet<UserId> = decoded.iter().map(|d| d.user).collect();
    let residual_users = records
        .iter()
        .map(|r| r.user_id)
        .filter(|u| !done.contains(u))
        .collect();
    let iterations_used = u32::from(!decoded.is_empty());
    Ok(FrameOutcome {
        frame_index: pos.index,
        frame_start: pos.start,
        records,
        slots_used: n,
        decode_result: DecodingResult { decoded, iterations_used, residual_users },
        slot_activity: activity,
    })
}
