//! Successive interference cancellation over a frame graph.
//!
//! `peel` is the base-station decoder: each round collects every slot of
//! degree one, decodes the lone user in it and cancels all of that user's
//! replicas. `network_decode` runs the connecting-node stage first: each cN
//! peels its own local view, forwards up to its slot budget of decoded
//! packets, and those users are cancelled from the base-station graph before
//! the base station peels what remains.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{FrameGraph, UserId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SicError {
    #[error("connecting node {cn} references user {user} absent from the base-station graph")]
    UnknownUser { cn: usize, user: UserId },
    #[error("{graphs} cN graphs but {allocations} allocations")]
    AllocationMismatch { graphs: usize, allocations: usize },
}

/// Where a user's packet was recovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeSite {
    /// Singleton slot (frame-local index) found during peeling.
    Slot(usize),
    /// Forwarded by connecting node `cn` in forwarding slot `slot`, counted
    /// from the first forwarding slot after the access frame.
    Forward { cn: usize, slot: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedUser {
    pub user: UserId,
    /// Peeling round, starting at 1. Forwarded users carry 0.
    pub iteration: u32,
    pub site: DecodeSite,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodingResult {
    /// Decoded users in recovery order.
    pub decoded: Vec<DecodedUser>,
    pub iterations_used: u32,
    pub residual_users: BTreeSet<UserId>,
}

impl DecodingResult {
    pub fn decoded_set(&self) -> BTreeSet<UserId> {
        self.decoded.iter().map(|d| d.user).collect()
    }

    pub fn decoded_count(&self) -> usize {
        self.decoded.len()
    }

    pub fn find(&self, user: UserId) -> Option<&DecodedUser> {
        self.decoded.iter().find(|d| d.user == user)
    }
}

/// Forwarding slots granted to one connecting node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnAllocation {
    pub cn_id: usize,
    pub forward_budget: u32,
}

/// Iterative peeling, at most `max_iters` rounds.
pub fn peel(graph: &FrameGraph, max_iters: u32) -> DecodingResult {
    let mut g = graph.clone();
    let mut decoded = Vec::new();
    let mut iterations_used = 0;
    for iteration in 1..=max_iters {
        let mut round: Vec<(UserId, usize)> = Vec::new();
        // Users in order of their first singleton; the site is the last one.
        for (slot, user) in g.singleton_slots() {
            match round.iter_mut().find(|(u, _)| *u == user) {
                Some(entry) => entry.1 = slot,
                None => round.push((user, slot)),
            }
        }
        if round.is_empty() {
            break;
        }
        iterations_used = iteration;
        for (user, slot) in round {
            g.remove_user_edges(user);
            decoded.push(DecodedUser { user, iteration, site: DecodeSite::Slot(slot) });
        }
    }
    let done: BTreeSet<UserId> = decoded.iter().map(|d| d.user).collect();
    let residual_users = graph
        .users()
        .iter()
        .copied()
        .filter(|u| !done.contains(u))
        .collect();
    DecodingResult { decoded, iterations_used, residual_users }
}

/// Packets a connecting node forwards: the first `budget` users its local
/// peeling recovers, in recovery order.
pub fn cn_local_decode(cn_graph: &FrameGraph, budget: u32, max_iters: u32) -> Vec<UserId> {
    if budget == 0 {
        return Vec::new();
    }
    peel(cn_graph, max_iters)
        .decoded
        .into_iter()
        .take(budget as usize)
        .map(|d| d.user)
        .collect()
}

/// Connecting nodes in order, then base-station peeling on the reduced graph.
pub fn network_decode(
    bs_graph: &FrameGraph,
    cn_graphs: &[FrameGraph],
    allocations: &[CnAllocation],
    max_iters: u32,
) -> Result<DecodingResult, SicError> {
    if cn_graphs.len() != allocations.len() {
        return Err(SicError::AllocationMismatch {
            graphs: cn_graphs.len(),
            allocations: allocations.len(),
        });
    }
    for (cn, g) in cn_graphs.iter().enumerate() {
        if let Some(&user) = g.users().iter().find(|&&u| !bs_graph.contains_user(u)) {
            return Err(SicError::UnknownUser { cn, user });
        }
    }

    let mut bs = bs_graph.clone();
    let mut pending: Vec<FrameGraph> = cn_graphs.to_vec();
    let mut decoded = Vec::new();
    let mut forwarded = BTreeSet::new();
    let mut offset = 0usize;
    for j in 0..pending.len() {
        let alloc = allocations[j];
        let fwd = cn_local_decode(&pending[j], alloc.forward_budget, max_iters);
        for (k, user) in fwd.into_iter().enumerate() {
            decoded.push(DecodedUser {
                user,
                iteration: 0,
                site: DecodeSite::Forward { cn: alloc.cn_id, slot: offset + k },
            });
            forwarded.insert(user);
            bs.remove_user_edges(user);
            for later in pending.iter_mut().skip(j + 1) {
                later.remove_user_edges(user);
            }
        }
        offset += alloc.forward_budget as usize;
    }

    let bs_result = peel(&bs, max_iters);
    decoded.extend(bs_result.decoded);
    let residual_users = bs_result
        .residual_users
        .into_iter()
        .filter(|u| !forwarded.contains(u))
        .collect();
    Ok(DecodingResult { decoded, iterations_used: bs_result.iterations_used, residual_users })
}
