//! Fixtures shared by the benchmarks.

use gfra_sim::model::{sample_degree, select_slots, DegreeDistribution, FrameGraph, UserId};
use gfra_sim::sic::CnAllocation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// IRSA frame graph with `users` users drawn from `dist` over `n_raf` slots.
pub fn random_graph(users: usize, n_raf: usize, dist: &DegreeDistribution, seed: u64) -> FrameGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = FrameGraph::new();
    for u in 0..users {
        let d = sample_degree(dist, dist.d_max(), &mut rng).min(n_raf as u32);
        let slots = select_slots(n_raf, d, &mut rng).expect("degree fits frame");
        g.add_user(UserId(u as u64), &slots).expect("unique ids");
    }
    g
}

/// BS graph plus `q` cN views, each seeing every user with probability
/// `p_vis`, and round-robin budgets summing to `n_q`.
pub fn random_network(
    users: usize,
    n_raf: usize,
    q: usize,
    n_q: u32,
    p_vis: f64,
    seed: u64,
) -> (FrameGraph, Vec<FrameGraph>, Vec<CnAllocation>) {
    let dist = DegreeDistribution::lambda8();
    let bs = random_graph(users, n_raf, &dist, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let cns = (0..q)
        .map(|_| {
            let keep: Vec<bool> = (0..users).map(|_| rng.random_bool(p_vis)).collect();
            bs.induced(|u| keep[u.0 as usize])
        })
        .collect();
    let allocs = (0..q)
        .map(|i| CnAllocation {
            cn_id: i,
            forward_budget: n_q / q as u32 + u32::from((i as u32) < n_q % q as u32),
        })
        .collect();
    (bs, cns, allocs)
}
