use std::collections::BTreeMap;

use rand::Rng;

use super::{compliant, priority_degree_cap, FrameOutcome, FramePosition, ProtocolError, SlotActivity};
use crate::model::{
    build_frame_graph, sample_degree, select_slots, DegreeDistribution, FrameGraph, FrameParams,
    Outcome, TransmissionRecord, UserId,
};
use crate::sic::{network_decode, peel, CnAllocation, DecodeSite, DecodingResult};

/// Connecting-node configuration of RapIRSA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RapParams {
    /// Number of connecting nodes.
    pub q: usize,
    /// Forwarding slots as a fraction of the access frame.
    pub eta: f64,
    /// Probability that a given cN hears a given user.
    pub p_vis: f64,
}

impl RapParams {
    pub fn new(q: usize, eta: f64, p_vis: f64) -> Result<Self, ProtocolError> {
        let p = Self { q, eta, p_vis };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(0.0..1.0).contains(&self.eta) {
            return Err(ProtocolError::InvalidParameter("eta must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.p_vis) {
            return Err(ProtocolError::InvalidParameter("p_vis must be in [0, 1]"));
        }
        Ok(())
    }
}

impl Default for RapParams {
    fn default() -> Self {
        Self { q: 8, eta: 0.25, p_vis: 0.5 }
    }
}

/// Which connecting nodes hear which users, and the forwarding slots each
/// node owns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RapTopology {
    pub visibility: BTreeMap<UserId, Vec<usize>>,
    pub allocations: Vec<CnAllocation>,
}

impl RapTopology {
    /// Total forwarding slots appended to the access frame.
    pub fn forward_slots(&self) -> usize {
        self.allocations.iter().map(|a| a.forward_budget as usize).sum()
    }

    pub fn sees(&self, cn: usize, user: UserId) -> bool {
        self.visibility.get(&user).is_some_and(|v| v.contains(&cn))
    }
}

/// Forwarding slots `n_q = ceil(eta * n_raf)`.
pub fn cn_slot_count(rap: &RapParams, frame: &FrameParams) -> usize {
    // The epsilon keeps exact products such as 0.25 * 50 from rounding up.
    (rap.eta * frame.n_raf as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Draws an independent Bernoulli(`p_vis`) link per (user, cN) pair, users
/// outer and cNs inner, and splits `n_q` forwarding slots round-robin.
pub fn assign_topology<R: Rng + ?Sized>(
    user_ids: &[UserId],
    rap: &RapParams,
    frame: &FrameParams,
    rng: &mut R,
) -> RapTopology {
    let mut visibility = BTreeMap::new();
    if rap.q == 0 {
        return RapTopology { visibility, allocations: Vec::new() };
    }
    for &u in user_ids {
        let heard: Vec<usize> = (0..rap.q).filter(|_| rng.random_bool(rap.p_vis)).collect();
        if !heard.is_empty() {
            visibility.insert(u, heard);
        }
    }
    let n_q = cn_slot_count(rap, frame);
    let base = n_q / rap.q;
    let extra = n_q % rap.q;
    let allocations = (0..rap.q)
        .map(|j| CnAllocation { cn_id: j, forward_budget: (base + usize::from(j < extra)) as u32 })
        .collect();
    RapTopology { visibility, allocations }
}

/// One IRSA frame: each user sends `d ~ Λ` replicas in distinct random
/// slots, and the receiver peels the frame once it has been fully received.
pub fn irsa_frame<R: Rng + ?Sized>(
    active_users: Vec<TransmissionRecord>,
    dist: &DegreeDistribution,
    frame: &FrameParams,
    pos: FramePosition,
    rng: &mut R,
) -> Result<FrameOutcome, ProtocolError> {
    irsa_frame_capped(active_users, dist, frame, pos, false, rng)
}

/// IRSA with connecting nodes. The topology must have been drawn for the
/// same users.
pub fn rapirsa_frame<R: Rng + ?Sized>(
    active_users: Vec<TransmissionRecord>,
    dist: &DegreeDistribution,
    frame: &FrameParams,
    topology: &RapTopology,
    pos: FramePosition,
    rng: &mut R,
) -> Result<FrameOutcome, ProtocolError> {
    rapirsa_frame_capped(active_users, dist, frame, topology, pos, false, rng)
}

fn place_replicas<R: Rng + ?Sized>(
    users: &mut [TransmissionRecord],
    dist: &DegreeDistribution,
    frame: &FrameParams,
    by_priority: bool,
    rng: &mut R,
) -> Result<FrameGraph, ProtocolError> {
    for u in users.iter_mut() {
        let cap = if by_priority {
            priority_degree_cap(u.priority, dist.d_max())?
        } else {
            dist.d_max()
        };
        let d = sample_degree(dist, cap, rng);
        u.replica_slots = select_slots(frame.n_raf, d, rng)?;
        u.outcome = Outcome::Pending;
    }
    Ok(build_frame_graph(users)?)
}

pub(super) fn irsa_frame_capped<R: Rng + ?Sized>(
    mut users: Vec<TransmissionRecord>,
    dist: &DegreeDistribution,
    frame: &FrameParams,
    pos: FramePosition,
    by_priority: bool,
    rng: &mut R,
) -> Result<FrameOutcome, ProtocolError> {
    let graph = place_replicas(&mut users, dist, frame, by_priority, rng)?;
    let result = peel(&graph, frame.max_sic_iters);
    Ok(finish(users, result, frame, pos, 0))
}

pub(super) fn rapirsa_frame_capped<R: Rng + ?Sized>(
    mut users: Vec<TransmissionRecord>,
    dist: &DegreeDistribution,
    frame: &FrameParams,
    topology: &RapTopology,
    pos: FramePosition,
    by_priority: bool,
    rng: &mut R,
) -> Result<FrameOutcome, ProtocolError> {
    let bs = place_replicas(&mut users, dist, frame, by_priority, rng)?;
    let cn_graphs: Vec<FrameGraph> = topology
        .allocations
        .iter()
        .map(|a| bs.induced(|u| topology.sees(a.cn_id, u)))
        .collect();
    let result = network_decode(&bs, &cn_graphs, &topology.allocations, frame.max_sic_iters)?;
    Ok(finish(users, result, frame, pos, topology.forward_slots()))
}

// Base-station decoding happens after the last slot of the frame (after the
// forwarding slots when there are any); forwarded packets land in their
// forwarding slot.
fn finish(
    mut users: Vec<TransmissionRecord>,
    result: DecodingResult,
    frame: &FrameParams,
    pos: FramePosition,
    forward_slots: usize,
) -> FrameOutcome {
    let n = frame.n_raf;
    let slots_used = n + forward_slots;
    let frame_end = pos.start + slots_used as u64 - 1;
    let at: BTreeMap<UserId, u64> = result
        .decoded
        .iter()
        .map(|d| {
            let slot = match d.site {
                DecodeSite::Slot(_) => frame_end,
                DecodeSite::Forward { slot, .. } => pos.start + (n + slot) as u64,
            };
            (d.user, slot)
        })
        .collect();

    let mut activity = vec![SlotActivity::default(); n];
    for u in &mut users {
        u.outcome = match at.get(&u.user_id) {
            Some(&at_slot) => Outcome::Decoded { at_slot },
            None => Outcome::Failed,
        };
        let ok = compliant(u, frame.slot_ms) as u32;
        for &s in &u.replica_slots {
            activity[s].active += 1;
            activity[s].compliant += ok;
        }
    }
    FrameOutcome {
        frame_index: pos.index,
        frame_start: pos.start,
        records: users,
        slots_used,
        decode_result: result,
        slot_activity: activity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{sp_frame, SpRequest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn users(m: u64, priority: u32) -> Vec<TransmissionRecord> {
        (0..m).map(|i| TransmissionRecord::new(UserId(i), 0, priority, 250.0)).collect()
    }

    fn pos() -> FramePosition {
        FramePosition::new(0, 50)
    }

    #[test]
    fn empty_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = irsa_frame(vec![], &DegreeDistribution::lambda8(), &FrameParams::default(), pos(), &mut rng)
            .unwrap();
        assert_eq!(out.decoded_count(), 0);
        assert_eq!(out.slots_used, 50);
        assert!(out.slot_activity.iter().all(|a| a.active == 0));
    }

    #[test]
    fn lone_user_with_two_replicas_always_decodes() {
        let dist = DegreeDistribution::from_pairs(&[(2, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let out = irsa_frame(users(1, 0), &dist, &FrameParams::default(), pos(), &mut rng).unwrap();
            assert_eq!(out.decoded_count(), 1);
            assert_eq!(out.records[0].replica_slots.len(), 2);
            // Decoded once the frame has been received.
            assert_eq!(out.records[0].outcome, Outcome::Decoded { at_slot: 99 });
        }
    }

    #[test]
    fn half_load_has_low_loss() {
        let dist = DegreeDistribution::lambda8();
        let frame = FrameParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut lost, mut sent) = (0usize, 0usize);
        for _ in 0..4000 {
            let out = irsa_frame(users(25, 0), &dist, &frame, pos(), &mut rng).unwrap();
            lost += 25 - out.decoded_count();
            sent += 25;
        }
        // Finite-length error floor, about 0.012 at n = 50.
        let plr = lost as f64 / sent as f64;
        assert!((0.008..0.016).contains(&plr), "plr {plr}");
    }

    #[test]
    fn outcome_matches_decode_result() {
        let dist = DegreeDistribution::lambda8();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rap = RapParams::default();
        let frame = FrameParams::default();
        for m in [10u64, 40, 60, 80] {
            let u = users(m, 0);
            let ids: Vec<UserId> = u.iter().map(|r| r.user_id).collect();
            let topo = assign_topology(&ids, &rap, &frame, &mut rng);
            let out = rapirsa_frame(u, &dist, &frame, &topo, pos(), &mut rng).unwrap();
            assert_eq!(out.decoded_count(), out.decode_result.decoded.len());
            assert_eq!(out.slots_used, 63);
            assert!(out.decoded_count() <= (m as usize).min(out.slots_used));
            for r in &out.records {
                if let Outcome::Decoded { at_slot } = r.outcome {
                    assert!((50..113).contains(&at_slot));
                }
            }
        }
    }

    #[test]
    fn topology_budgets() {
        let frame = FrameParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ids: Vec<UserId> = (0..10).map(UserId).collect();

        let none = assign_topology(&ids, &RapParams { q: 0, ..RapParams::default() }, &frame, &mut rng);
        assert!(none.visibility.is_empty() && none.allocations.is_empty());
        assert_eq!(none.forward_slots(), 0);

        let two = assign_topology(&ids, &RapParams { q: 2, ..RapParams::default() }, &frame, &mut rng);
        let budgets: Vec<u32> = two.allocations.iter().map(|a| a.forward_budget).collect();
        assert_eq!(budgets, vec![7, 6]);

        let all = assign_topology(&ids, &RapParams { q: 3, eta: 0.25, p_vis: 1.0 }, &frame, &mut rng);
        assert!(ids.iter().all(|u| all.visibility[u] == vec![0, 1, 2]));
    }

    #[test]
    fn cn_slot_count_rounds_up() {
        let frame = FrameParams::default();
        assert_eq!(cn_slot_count(&RapParams::default(), &frame), 13);
        assert_eq!(cn_slot_count(&RapParams { eta: 0.0, ..RapParams::default() }, &frame), 0);
        assert_eq!(cn_slot_count(&RapParams { eta: 0.2, ..RapParams::default() }, &frame), 10);
    }

    #[test]
    fn rap_without_cns_is_irsa() {
        let dist = DegreeDistribution::lambda8();
        let frame = FrameParams::default();
        let rap = RapParams { q: 0, eta: 0.0, p_vis: 0.5 };
        for seed in 0..20 {
            let mut a = ChaCha8Rng::seed_from_u64(seed);
            let mut b = ChaCha8Rng::seed_from_u64(seed);
            let base = irsa_frame(users(55, 0), &dist, &frame, pos(), &mut a).unwrap();
            let ids: Vec<UserId> = (0..55).map(UserId).collect();
            let topo = assign_topology(&ids, &rap, &frame, &mut b);
            let rap_out = rapirsa_frame(users(55, 0), &dist, &frame, &topo, pos(), &mut b).unwrap();
            assert_eq!(base, rap_out);
        }
    }

    #[test]
    fn sp_with_top_priority_is_base() {
        let dist = DegreeDistribution::lambda8();
        let frame = FrameParams::default();
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let base = irsa_frame(users(30, 0), &dist, &frame, pos(), &mut a).unwrap();
        let sp = sp_frame(SpRequest::Irsa { users: users(30, 0), dist: &dist }, &frame, pos(), &mut b)
            .unwrap();
        assert_eq!(base, sp);
    }

    #[test]
    fn sp_priority_shapes_replica_counts() {
        let dist = DegreeDistribution::lambda8();
        let frame = FrameParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (mut high, mut low) = (0usize, 0usize);
        let frames = 10_000;
        for _ in 0..frames {
            let u = vec![
                TransmissionRecord::new(UserId(0), 0, 0, 250.0),
                TransmissionRecord::new(UserId(1), 0, 100, 250.0),
            ];
            let out = sp_frame(SpRequest::Irsa { users: u, dist: &dist }, &frame, pos(), &mut rng).unwrap();
            high += out.records[0].replica_slots.len();
            assert_eq!(out.records[1].replica_slots.len(), 1);
            low += 1;
        }
        assert!(high as f64 / frames as f64 > low as f64 / frames as f64);
    }

    #[test]
    fn sp_rejects_bad_priority() {
        let dist = DegreeDistribution::lambda8();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let r = sp_frame(
            SpRequest::Irsa { users: users(1, 150), dist: &dist },
            &FrameParams::default(),
            pos(),
            &mut rng,
        );
        assert!(matches!(r, Err(ProtocolError::Priority(_))));
    }

    #[test]
    fn too_many_replicas_propagates() {
        let dist = DegreeDistribution::lambda8();
        let frame = FrameParams { n_raf: 4, ..FrameParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut saw_error = false;
        for _ in 0..50 {
            if irsa_frame(users(1, 0), &dist, &frame, pos(), &mut rng).is_err() {
                saw_error = true;
            }
        }
        assert!(saw_error);
    }

    #[test]
    fn two_cn_instance() {
        // Replica pattern and cN visibility of the five-user example; the
        // slot pattern is fixed, so build the graphs directly.
        let frame = FrameParams { n_raf: 5, ..FrameParams::default() };
        let pattern: [(u64, &[usize]); 5] =
            [(1, &[0, 1, 2]), (2, &[0, 1, 2]), (3, &[0, 3, 4]), (4, &[1, 3, 4]), (5, &[2, 4])];
        let recs: Vec<TransmissionRecord> = pattern
            .iter()
            .map(|&(u, s)| TransmissionRecord::new(UserId(u), 0, 0, 250.0).with_slots(s.to_vec()))
            .collect();
        let topo = RapTopology {
            visibility: [(1, 0), (5, 0), (2, 1), (3, 1)]
                .into_iter()
                .map(|(u, c)| (UserId(u), vec![c]))
                .collect(),
            allocations: vec![
                CnAllocation { cn_id: 0, forward_budget: 1 },
                CnAllocation { cn_id: 1, forward_budget: 1 },
            ],
        };
        let bs = build_frame_graph(&recs).unwrap();
        let cns: Vec<FrameGraph> =
            topo.allocations.iter().map(|a| bs.induced(|u| topo.sees(a.cn_id, u))).collect();
        let r = network_decode(&bs, &cns, &topo.allocations, 20).unwrap();
        let out = finish(recs, r, &frame, FramePosition::new(0, 0), topo.forward_slots());
        let at = |u: u64| out.records.iter().find(|r| r.user_id == UserId(u)).unwrap().outcome;
        assert_eq!(at(1), Outcome::Decoded { at_slot: 5 });
        assert_eq!(at(2), Outcome::Decoded { at_slot: 6 });
        for u in [3, 4, 5] {
            assert_eq!(at(u), Outcome::Decoded { at_slot: 6 });
        }
        assert_eq!(out.slots_used, 7);
    }
}
