//! Eviction policies that bring a store back within its capacity bound.
//!
//! Two signals are available per slot: the access timestamp `last_access`
//! (recency) and the relevance score, the maximum cosine similarity between
//! the slot and any query in the store's recent-query window. LRU evicts the
//! stalest slot; relevance pruning evicts the slot the recent conversation
//! cares least about.

use serde::{Deserialize, Serialize};

use crate::embedding::cosine_similarity;
use crate::error::{Error, Result};
use crate::store::{MemorySlot, MemoryStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Unbounded growth; the store is never pruned.
    None,
    /// Evict the slot with the smallest `last_access`.
    Lru,
    /// Evict the slot with the smallest relevance score over the last
    /// `window` recorded queries.
    Relevance { window: usize },
}

impl PolicyKind {
    /// Parses a policy name as used in configs and CLI flags.
    pub fn from_name(name: &str, window: usize) -> Result<PolicyKind> {
        match name {
            "none" => Ok(PolicyKind::None),
            "lru" => Ok(PolicyKind::Lru),
            "relevance" => {
                if window == 0 {
                    return Err(Error::config("relevance window must be at least 1"));
                }
                Ok(PolicyKind::Relevance { window })
            }
            other => Err(Error::config(format!(
                "unknown policy {other:?}; expected none, lru, or relevance"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::None => "none",
            PolicyKind::Lru => "lru",
            PolicyKind::Relevance { .. } => "relevance",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneReason {
    Lru,
    Relevance,
}

/// Record of one eviction: which slot was removed and why. For LRU the score
/// is the victim's access timestamp; for relevance it is the victim's
/// relevance score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneDecision {
    pub victim_id: u64,
    pub reason: PruneReason,
    pub score: f64,
}

/// Relevance of one slot: the maximum cosine similarity between the slot's
/// vector and the last `window` recorded queries. A slot scored against an
/// empty window gets `-1.0`, below any attainable cosine, so never-queried
/// stores fall back to recency order.
pub fn relevance_score(store: &MemoryStore, slot: &MemorySlot, window: usize) -> Result<f64> {
    let recorded: Vec<_> = store.recent_queries().collect();
    let start = recorded.len().saturating_sub(window);
    let mut best: Option<f64> = None;
    for entry in &recorded[start..] {
        let sim = cosine_similarity(&entry.vector, &slot.vector)?;
        best = Some(match best {
            Some(b) if b >= sim => b,
            _ => sim,
        });
    }
    Ok(best.unwrap_or(-1.0))
}

/// Picks the slot to evict from a store that is over capacity. `protected`
/// exempts one slot (the turn's fresh insert) from consideration.
///
/// Tie order is deterministic: LRU breaks timestamp ties by smallest id;
/// relevance breaks score ties by smallest timestamp, then smallest id.
pub fn select_victim(
    store: &MemoryStore,
    policy: PolicyKind,
    protected: Option<u64>,
) -> Result<PruneDecision> {
    if store.len() <= store.capacity() {
        return Err(Error::contract(format!(
            "select_victim called on a store within capacity ({} of {})",
            store.len(),
            store.capacity()
        )));
    }
    let candidates = || {
        store
            .slots()
            .iter()
            .filter(|s| Some(s.id) != protected)
    };
    if candidates().next().is_none() {
        return Err(Error::contract("no evictable slots"));
    }
    match policy {
        PolicyKind::None => Err(Error::contract(
            "the none policy never selects a victim",
        )),
        PolicyKind::Lru => {
            let mut best: Option<&MemorySlot> = None;
            for slot in candidates() {
                match best {
                    Some(b) if slot.last_access >= b.last_access => {}
                    _ => best = Some(slot),
                }
            }
            let victim = best.expect("candidates is non-empty");
            Ok(PruneDecision {
                victim_id: victim.id,
                reason: PruneReason::Lru,
                score: victim.last_access as f64,
            })
        }
        PolicyKind::Relevance { window } => {
            let mut best: Option<(&MemorySlot, f64)> = None;
            for slot in candidates() {
                let score = relevance_score(store, slot, window)?;
                let better = match best {
                    None => true,
                    Some((b, bs)) => {
                        score < bs || (score == bs && slot.last_access < b.last_access)
                    }
                };
                if better {
                    best = Some((slot, score));
                }
            }
            let (victim, score) = best.expect("candidates is non-empty");
            Ok(PruneDecision {
                victim_id: victim.id,
                reason: PruneReason::Relevance,
                score,
            })
        }
    }
}

/// Evicts until the store is back within capacity, returning the decisions in
/// order. With [`PolicyKind::None`] the store is left as-is.
pub fn manage_memory(
    store: &mut MemoryStore,
    policy: PolicyKind,
    protected: Option<u64>,
) -> Result<Vec<PruneDecision>> {
    let mut decisions = Vec::new();
    while store.len() > store.capacity() {
        if policy == PolicyKind::None {
            break;
        }
        let decision = select_victim(store, policy, protected)?;
        store.remove(decision.victim_id)?;
        decisions.push(decision);
    }
    Ok(decisions)
}
