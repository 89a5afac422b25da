use std::collections::BTreeSet;

use gfra_sim::model::{
    build_frame_graph, sample_degree, select_slots, DegreeDistribution, FrameParams, TransmissionRecord, UserId,
};
use gfra_sim::protocols::{
    assign_topology, irsa_frame, rapirsa_frame, sp_frame, FramePosition, RapParams, SpRequest,
};
use gfra_sim::sic::{network_decode, peel, CnAllocation};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn users(m: u64, priority: u32) -> Vec<TransmissionRecord> {
    (0..m).map(|u| TransmissionRecord::new(UserId(u), 0, priority, 250.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn select_slots_distinct(n in 1usize..1000, frac in 0.0f64..1.0, seed: u64) {
        let d = ((n as f64 * frac) as u32).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = select_slots(n, d, &mut rng).unwrap();
        prop_assert_eq!(s.len(), d as usize);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.iter().all(|&x| x < n));
    }

    #[test]
    fn graph_degree_sums_match(m in 0u64..60, seed: u64) {
        let dist = DegreeDistribution::lambda8();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs: Vec<_> = users(m, 0)
            .into_iter()
            .map(|r| {
                let d = sample_degree(&dist, 8, &mut rng);
                r.with_slots(select_slots(50, d, &mut rng).unwrap())
            })
            .collect();
        let g = build_frame_graph(&recs).unwrap();
        prop_assert!(g.is_consistent());
        let by_slot: usize = g.slots().map(|s| g.slot_degree(s)).sum();
        let by_user: usize = g.users().iter().map(|&u| g.user_degree(u)).sum();
        prop_assert_eq!(by_slot, g.edge_count());
        prop_assert_eq!(by_user, g.edge_count());
    }

    #[test]
    fn frame_never_decodes_more_than_active(m in 0u64..90, seed: u64) {
        let dist = DegreeDistribution::lambda8();
        let frame = FrameParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = irsa_frame(users(m, 0), &dist, &frame, FramePosition::default(), &mut rng).unwrap();
        prop_assert!(out.decoded_count() <= m as usize);
        prop_assert_eq!(out.decoded_count(), out.decode_result.decoded.len());
        prop_assert_eq!(out.slots_used, 50);
        for a in &out.slot_activity {
            prop_assert!(a.compliant <= a.active);
        }
    }

    #[test]
    fn cn_forwarding_only_helps(m in 1u64..80, q in 0usize..6, p_vis in 0.0f64..=1.0, seed: u64) {
        let dist = DegreeDistribution::lambda8();
        let frame = FrameParams::default();
        let rap = RapParams::new(q, 0.25, p_vis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<UserId> = (0..m).map(UserId).collect();
        let topo = assign_topology(&ids, &rap, &frame, &mut rng);
        prop_assert_eq!(topo.forward_slots(), if q == 0 { 0 } else { 13 });
        let out = rapirsa_frame(users(m, 0), &dist, &frame, &topo, FramePosition::default(), &mut rng).unwrap();
        let bs = build_frame_graph(&out.records).unwrap();
        let plain = peel(&bs, 20).decoded_set();
        let with_cns = out.decode_result.decoded_set();
        prop_assert!(plain.is_subset(&with_cns));
        prop_assert_eq!(out.slots_used, 50 + topo.forward_slots());
        let residual: BTreeSet<UserId> = out.decode_result.residual_users.clone();
        prop_assert!(residual.is_disjoint(&with_cns));
        prop_assert_eq!(residual.len() + with_cns.len(), m as usize);
    }

    #[test]
    fn network_decode_partitions_users(m in 1u64..40, seed: u64) {
        let dist = DegreeDistribution::lambda8();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs: Vec<_> = users(m, 0)
            .into_iter()
            .map(|r| {
                let d = sample_degree(&dist, 8, &mut rng);
                r.with_slots(select_slots(30, d, &mut rng).unwrap())
            })
            .collect();
        let bs = build_frame_graph(&recs).unwrap();
        let cns = vec![bs.induced(|u| u.0 % 2 == 0), bs.induced(|u| u.0 % 3 == 0)];
        let allocs = vec![CnAllocation { cn_id: 0, forward_budget: 2 }, CnAllocation { cn_id: 1, forward_budget: 2 }];
        let r = network_decode(&bs, &cns, &allocs, 20).unwrap();
        let decoded = r.decoded_set();
        prop_assert_eq!(decoded.len(), r.decoded.len());
        prop_assert_eq!(decoded.len() + r.residual_users.len(), m as usize);
        prop_assert!(r.iterations_used <= 20);
    }

    #[test]
    fn sp_priority_zero_is_base(m in 0u64..70, seed: u64) {
        let dist = DegreeDistribution::lambda8();
        let frame = FrameParams::default();
        let base = irsa_frame(users(m, 0), &dist, &frame, FramePosition::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let sp = sp_frame(
            SpRequest::Irsa { users: users(m, 0), dist: &dist },
            &frame,
            FramePosition::default(),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        prop_assert_eq!(base, sp);
    }
}
