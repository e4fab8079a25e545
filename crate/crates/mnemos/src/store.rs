//! Bounded vector memory store.
//!
//! The store owns a flat list of slots ordered by insertion (ids are assigned
//! sequentially), a logical clock that advances once per dialogue turn, and a
//! sliding window of recent query vectors used by relevance pruning.
//!
//! Capacity is deliberately not enforced here: a turn first inserts the new
//! interaction and only then runs the eviction policy, so the store may hold
//! `capacity + 1` slots in the middle of a turn. Policies in
//! [`crate::policy`] bring it back within bounds.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, EmbeddingVector};
use crate::error::{Error, Result};

/// One stored interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySlot {
    pub id: u64,
    pub text: String,
    /// Clock value at insertion.
    pub created_at: u64,
    /// Clock value of the most recent retrieval hit (or insertion).
    pub last_access: u64,
    pub vector: EmbeddingVector,
}

/// One recorded query from the sliding window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEntry {
    /// Clock value of the turn that issued the query.
    pub turn: u64,
    pub vector: EmbeddingVector,
}

/// A read-only retrieval result.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSlot {
    pub slot_id: u64,
    pub score: f64,
    /// 1-based position in the score ordering.
    pub rank: usize,
}

/// Serializable snapshot of a store. Field order is part of the format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub dimension: usize,
    pub capacity: usize,
    pub window: usize,
    pub clock: u64,
    pub slots: Vec<MemorySlot>,
    pub recent_queries: Vec<QueryEntry>,
}

#[derive(Debug, Clone)]
pub struct MemoryStore {
    dimension: usize,
    capacity: usize,
    window: usize,
    clock: u64,
    next_id: u64,
    slots: Vec<MemorySlot>,
    recent_queries: VecDeque<QueryEntry>,
}

impl MemoryStore {
    /// Creates an empty store. `capacity` is the at-rest slot bound,
    /// `window` the number of recent turns whose queries are retained.
    pub fn new(dimension: usize, capacity: usize, window: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::config(format!(
                "store dimension must be at least 2, got {dimension}"
            )));
        }
        if capacity == 0 {
            return Err(Error::config("store capacity must be at least 1"));
        }
        if window == 0 {
            return Err(Error::config("query window must be at least 1"));
        }
        Ok(MemoryStore {
            dimension,
            capacity,
            window,
            clock: 1,
            next_id: 1,
            slots: Vec::new(),
            recent_queries: VecDeque::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Slots in insertion (= id) order.
    pub fn slots(&self) -> &[MemorySlot] {
        &self.slots
    }

    pub fn recent_queries(&self) -> impl Iterator<Item = &QueryEntry> {
        self.recent_queries.iter()
    }

    pub fn get(&self, id: u64) -> Option<&MemorySlot> {
        self.slots.iter().find(|s| s.id == id)
    }

    fn check_vector(&self, vector: &EmbeddingVector) -> Result<()> {
        if vector.dim() != self.dimension {
            return Err(Error::contract(format!(
                "vector dimension {} does not match store dimension {}",
                vector.dim(),
                self.dimension
            )));
        }
        if !vector.is_finite() {
            return Err(Error::contract("vector contains non-finite values"));
        }
        Ok(())
    }

    /// Appends a new slot and returns its id. Never evicts; callers run a
    /// policy afterwards if they care about the capacity bound.
    pub fn insert(&mut self, text: impl Into<String>, vector: EmbeddingVector) -> Result<u64> {
        self.check_vector(&vector)?;
        let id = self.next_id;
        self.next_id += 1;
        self.slots.push(MemorySlot {
            id,
            text: text.into(),
            created_at: self.clock,
            last_access: self.clock,
            vector,
        });
        Ok(id)
    }

    /// Records `query` in the recent-query window for the current turn.
    /// Issuing several queries in one turn keeps only the latest, so turns in
    /// the window stay strictly increasing.
    fn record_query(&mut self, query: &EmbeddingVector) {
        match self.recent_queries.back_mut() {
            Some(entry) if entry.turn == self.clock => {
                entry.vector = query.clone();
            }
            _ => {
                self.recent_queries.push_back(QueryEntry {
                    turn: self.clock,
                    vector: query.clone(),
                });
                while self.recent_queries.len() > self.window {
                    self.recent_queries.pop_front();
                }
            }
        }
    }

    /// Retrieves the best-matching slot for `query`: highest cosine
    /// similarity, ties broken by smallest id. Records the query in the
    /// window and stamps the winner's `last_access` with the current clock.
    /// Returns `None` on an empty store (the query is still recorded).
    pub fn retrieve(&mut self, query: &EmbeddingVector) -> Result<Option<(u64, f64)>> {
        self.check_vector(query)?;
        self.record_query(query);
        let mut best: Option<(usize, f64)> = None;
        for (i, slot) in self.slots.iter().enumerate() {
            let score = cosine_similarity(query, &slot.vector)?;
            match best {
                Some((_, best_score)) if score <= best_score => {}
                _ => best = Some((i, score)),
            }
        }
        Ok(best.map(|(i, score)| {
            let slot = &mut self.slots[i];
            slot.last_access = self.clock;
            (slot.id, score)
        }))
    }

    /// Read-only ranked retrieval: top `k` slots by cosine similarity, ties
    /// broken by smallest id, ranks starting at 1. Does not record the query
    /// or touch access timestamps.
    pub fn retrieve_top_k(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<ScoredSlot>> {
        self.check_vector(query)?;
        let mut scored: Vec<(u64, f64)> = Vec::with_capacity(self.slots.len());
        for slot in &self.slots {
            scored.push((slot.id, cosine_similarity(query, &slot.vector)?));
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then(a.0.cmp(&b.0))
        });
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (slot_id, score))| ScoredSlot {
                slot_id,
                score,
                rank: i + 1,
            })
            .collect())
    }

    /// Stamps a slot's `last_access` with the current clock.
    pub fn touch(&mut self, id: u64) -> Result<()> {
        let clock = self.clock;
        match self.slots.iter_mut().find(|s| s.id == id) {
            Some(slot) => {
                slot.last_access = clock;
                Ok(())
            }
            None => Err(Error::not_found(format!("slot {id}"))),
        }
    }

    /// Removes and returns a slot.
    pub fn remove(&mut self, id: u64) -> Result<MemorySlot> {
        match self.slots.iter().position(|s| s.id == id) {
            Some(i) => Ok(self.slots.remove(i)),
            None => Err(Error::not_found(format!("slot {id}"))),
        }
    }

    /// Advances the logical clock. Called once at the end of each turn.
    pub fn tick(&mut self) {
        self.clock += 1;
    }

    pub fn to_snapshot(&self) -> Snapshot {
        Snapshot {
            dimension: self.dimension,
            capacity: self.capacity,
            window: self.window,
            clock: self.clock,
            slots: self.slots.clone(),
            recent_queries: self.recent_queries.iter().cloned().collect(),
        }
    }

    /// Rebuilds a store from a snapshot, validating every invariant the
    /// in-memory type maintains. The id counter resumes after the largest
    /// stored id.
    pub fn from_snapshot(snapshot: Snapshot) -> Result<Self> {
        if snapshot.dimension < 2 {
            return Err(Error::contract(format!(
                "snapshot dimension must be at least 2, got {}",
                snapshot.dimension
            )));
        }
        if snapshot.capacity == 0 || snapshot.window == 0 {
            return Err(Error::contract(
                "snapshot capacity and window must be at least 1",
            ));
        }
        if snapshot.clock == 0 {
            return Err(Error::contract("snapshot clock must be at least 1"));
        }
        let mut max_id = 0;
        for (i, slot) in snapshot.slots.iter().enumerate() {
            if slot.vector.dim() != snapshot.dimension {
                return Err(Error::contract(format!(
                    "slot {} vector dimension {} does not match snapshot dimension {}",
                    slot.id,
                    slot.vector.dim(),
                    snapshot.dimension
                )));
            }
            if !slot.vector.is_finite() {
                return Err(Error::contract(format!(
                    "slot {} vector contains non-finite values",
                    slot.id
                )));
            }
            if i > 0 && slot.id <= snapshot.slots[i - 1].id {
                return Err(Error::contract(
                    "snapshot slot ids must be strictly increasing",
                ));
            }
            if slot.last_access > snapshot.clock || slot.created_at > snapshot.clock {
                return Err(Error::contract(format!(
                    "slot {} timestamps exceed the snapshot clock",
                    slot.id
                )));
            }
            max_id = slot.id;
        }
        if snapshot.recent_queries.len() > snapshot.window {
            return Err(Error::contract(
                "snapshot holds more recent queries than the window allows",
            ));
        }
        for (i, entry) in snapshot.recent_queries.iter().enumerate() {
            if entry.vector.dim() != snapshot.dimension {
                return Err(Error::contract(
                    "recent query dimension does not match snapshot dimension",
                ));
            }
            if i > 0 && entry.turn <= snapshot.recent_queries[i - 1].turn {
                return Err(Error::contract(
                    "snapshot query turns must be strictly increasing",
                ));
            }
            if entry.turn > snapshot.clock {
                return Err(Error::contract("snapshot query turn exceeds the clock"));
            }
        }
        Ok(MemoryStore {
            dimension: snapshot.dimension,
            capacity: snapshot.capacity,
            window: snapshot.window,
            clock: snapshot.clock,
            next_id: max_id + 1,
            slots: snapshot.slots,
            recent_queries: snapshot.recent_queries.into(),
        })
    }

    /// Canonical JSON form of the store. Dumping, loading, and dumping again
    /// yields byte-identical output.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_snapshot())?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let snapshot: Snapshot = serde_json::from_str(json)?;
        MemoryStore::from_snapshot(snapshot)
    }

    /// Size in bytes of the canonical JSON form, the footprint measure used
    /// in reports.
    pub fn serialized_bytes(&self) -> Result<usize> {
        Ok(self.to_json()?.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Embedder;
    use crate::hash::SplitMix64;
    use proptest::prelude::*;

    fn store(dim: usize) -> MemoryStore {
        MemoryStore::new(dim, 8, 4).unwrap()
    }

    fn vecf(components: &[f64]) -> EmbeddingVector {
        EmbeddingVector(components.to_vec())
    }

    fn random_unit(rng: &mut SplitMix64, dim: usize) -> EmbeddingVector {
        let mut v = EmbeddingVector((0..dim).map(|_| rng.next_f64() * 2.0 - 1.0).collect());
        v.l2_normalize();
        v
    }

    #[test]
    fn clock_starts_at_one_and_ticks() {
        let mut s = store(2);
        assert_eq!(s.clock(), 1);
        s.tick();
        s.tick();
        assert_eq!(s.clock(), 3);
    }

    #[test]
    fn insert_assigns_sequential_ids_and_timestamps() {
        let mut s = store(2);
        let a = s.insert("a", vecf(&[1.0, 0.0])).unwrap();
        s.tick();
        let b = s.insert("b", vecf(&[0.0, 1.0])).unwrap();
        assert_eq!((a, b), (1, 2));
        assert_eq!(s.get(a).unwrap().created_at, 1);
        assert_eq!(s.get(b).unwrap().created_at, 2);
        assert_eq!(s.get(b).unwrap().last_access, 2);
    }

    #[test]
    fn retrieve_picks_highest_similarity_and_touches_winner() {
        let mut s = store(2);
        s.insert("x", vecf(&[1.0, 0.0])).unwrap();
        s.insert("y", vecf(&[0.0, 1.0])).unwrap();
        s.tick();
        s.tick();
        let hit = s.retrieve(&vecf(&[0.1, 0.9])).unwrap().unwrap();
        assert_eq!(hit.0, 2);
        assert_eq!(s.get(2).unwrap().last_access, 3);
        assert_eq!(s.get(1).unwrap().last_access, 1);
    }

    #[test]
    fn retrieve_breaks_ties_by_smallest_id() {
        let mut s = store(2);
        s.insert("first", vecf(&[1.0, 0.0])).unwrap();
        s.insert("second", vecf(&[1.0, 0.0])).unwrap();
        let hit = s.retrieve(&vecf(&[2.0, 0.0])).unwrap().unwrap();
        assert_eq!(hit.0, 1);
        assert!((hit.1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn retrieve_on_empty_store_records_query_and_returns_none() {
        let mut s = store(2);
        assert!(s.retrieve(&vecf(&[1.0, 0.0])).unwrap().is_none());
        let recorded: Vec<_> = s.recent_queries().collect();
        assert_eq!(recorded.len(), 1);
        assert_eq!(recorded[0].turn, 1);
    }

    #[test]
    fn repeat_retrieve_in_one_turn_replaces_window_entry() {
        let mut s = store(2);
        s.insert("x", vecf(&[1.0, 0.0])).unwrap();
        s.retrieve(&vecf(&[1.0, 0.0])).unwrap();
        s.retrieve(&vecf(&[0.0, 1.0])).unwrap();
        let recorded: Vec<_> = s.recent_queries().collect();
        assert_eq!(recorded.len(), 1);
        assert_eq!(recorded[0].vector, vecf(&[0.0, 1.0]));
    }

    #[test]
    fn window_keeps_only_most_recent_turns() {
        let mut s = store(2);
        s.insert("x", vecf(&[1.0, 0.0])).unwrap();
        for i in 0..7u64 {
            s.retrieve(&vecf(&[1.0, i as f64])).unwrap();
            s.tick();
        }
        let turns: Vec<u64> = s.recent_queries().map(|e| e.turn).collect();
        assert_eq!(turns, vec![4, 5, 6, 7]);
    }

    #[test]
    fn touch_and_remove_validate_ids() {
        let mut s = store(2);
        let id = s.insert("x", vecf(&[1.0, 0.0])).unwrap();
        s.tick();
        s.touch(id).unwrap();
        assert_eq!(s.get(id).unwrap().last_access, 2);
        assert!(matches!(s.touch(99), Err(Error::NotFound(_))));
        assert!(matches!(s.remove(99), Err(Error::NotFound(_))));
        let removed = s.remove(id).unwrap();
        assert_eq!(removed.id, id);
        assert!(s.is_empty());
    }

    #[test]
    fn dimension_and_finiteness_are_enforced() {
        let mut s = store(2);
        assert!(s.insert("bad", vecf(&[1.0, 0.0, 0.0])).is_err());
        assert!(s.insert("bad", vecf(&[f64::NAN, 0.0])).is_err());
        assert!(s.retrieve(&vecf(&[1.0])).is_err());
        assert!(MemoryStore::new(1, 8, 4).is_err());
        assert!(MemoryStore::new(2, 0, 4).is_err());
        assert!(MemoryStore::new(2, 8, 0).is_err());
    }

    #[test]
    fn top_k_ranks_by_score_then_id_without_mutation() {
        let mut s = store(2);
        s.insert("east", vecf(&[1.0, 0.0])).unwrap();
        s.insert("north", vecf(&[0.0, 1.0])).unwrap();
        s.insert("east again", vecf(&[1.0, 0.0])).unwrap();
        s.tick();
        let ranked = s.retrieve_top_k(&vecf(&[1.0, 0.1]), 3).unwrap();
        assert_eq!(
            ranked.iter().map(|r| (r.slot_id, r.rank)).collect::<Vec<_>>(),
            vec![(1, 1), (3, 2), (2, 3)]
        );
        assert_eq!(s.get(1).unwrap().last_access, 1);
        assert_eq!(s.recent_queries().count(), 0);
    }

    #[test]
    fn retrieval_matches_brute_force_oracle() {
        let mut rng = SplitMix64::new(0xC0FFEE);
        for round in 0..200 {
            let dim = 2 + (rng.next_below(6) as usize);
            let mut s = MemoryStore::new(dim, 64, 8).unwrap();
            let n = 1 + rng.next_below(12) as usize;
            for i in 0..n {
                s.insert(format!("slot {i}"), random_unit(&mut rng, dim)).unwrap();
            }
            let query = random_unit(&mut rng, dim);
            let expected = s
                .slots()
                .iter()
                .map(|slot| (slot.id, cosine_similarity(&query, &slot.vector).unwrap()))
                .fold(None::<(u64, f64)>, |best, (id, score)| match best {
                    Some((_, bs)) if score <= bs => best,
                    _ => Some((id, score)),
                })
                .unwrap();
            let got = s.retrieve(&query).unwrap().unwrap();
            assert_eq!(got.0, expected.0, "round {round}");
            assert!((got.1 - expected.1).abs() < 1e-12);
        }
    }

    #[test]
    fn snapshot_round_trip_is_byte_identical() {
        let e = Embedder::reference(16).unwrap();
        let mut s = MemoryStore::new(16, 4, 3).unwrap();
        for text in ["alpha beta", "gamma", "delta epsilon zeta", "eta"] {
            let v = e.embed(text).unwrap();
            s.retrieve(&v).unwrap();
            s.insert(text, v).unwrap();
            s.tick();
        }
        let dumped = s.to_json().unwrap();
        let reloaded = MemoryStore::from_json(&dumped).unwrap();
        assert_eq!(reloaded.to_json().unwrap(), dumped);
        assert_eq!(reloaded.len(), s.len());
        assert_eq!(reloaded.clock(), s.clock());
    }

    #[test]
    fn snapshot_restores_id_counter_past_largest_id() {
        let mut s = store(2);
        s.insert("a", vecf(&[1.0, 0.0])).unwrap();
        s.insert("b", vecf(&[0.0, 1.0])).unwrap();
        s.remove(1).unwrap();
        let reloaded = MemoryStore::from_json(&s.to_json().unwrap()).unwrap();
        let mut reloaded = reloaded;
        let id = reloaded.insert("c", vecf(&[1.0, 1.0])).unwrap();
        assert_eq!(id, 3);
    }

    #[test]
    fn snapshot_rejects_inconsistent_input() {
        let bad_ids = r#"{"dimension":2,"capacity":4,"window":2,"clock":3,
            "slots":[{"id":2,"text":"b","created_at":1,"last_access":1,"vector":[0.0,1.0]},
                     {"id":1,"text":"a","created_at":1,"last_access":1,"vector":[1.0,0.0]}],
            "recent_queries":[]}"#;
        assert!(MemoryStore::from_json(bad_ids).is_err());

        let bad_dim = r#"{"dimension":2,"capacity":4,"window":2,"clock":1,
            "slots":[{"id":1,"text":"a","created_at":1,"last_access":1,"vector":[1.0,0.0,0.0]}],
            "recent_queries":[]}"#;
        assert!(MemoryStore::from_json(bad_dim).is_err());

        let bad_clock = r#"{"dimension":2,"capacity":4,"window":2,"clock":1,
            "slots":[{"id":1,"text":"a","created_at":5,"last_access":5,"vector":[1.0,0.0]}],
            "recent_queries":[]}"#;
        assert!(MemoryStore::from_json(bad_clock).is_err());
    }

    proptest! {
        #[test]
        fn scores_stay_in_unit_interval(
            components in proptest::collection::vec(-100.0f64..100.0, 4),
            others in proptest::collection::vec(
                proptest::collection::vec(-100.0f64..100.0, 4), 1..8),
        ) {
            let mut s = MemoryStore::new(4, 16, 4).unwrap();
            for (i, o) in others.iter().enumerate() {
                s.insert(format!("{i}"), EmbeddingVector(o.clone())).unwrap();
            }
            let q = EmbeddingVector(components);
            if let Some((_, score)) = s.retrieve(&q).unwrap() {
                prop_assert!(score >= -1.0 - 1e-9 && score <= 1.0 + 1e-9);
            }
        }

        #[test]
        fn window_turns_are_strictly_increasing_and_bounded(
            turns in 1usize..20,
            window in 1usize..6,
        ) {
            let mut s = MemoryStore::new(2, 8, window).unwrap();
            s.insert("x", EmbeddingVector(vec![1.0, 0.0])).unwrap();
            for i in 0..turns {
                s.retrieve(&EmbeddingVector(vec![1.0, i as f64])).unwrap();
                s.tick();
            }
            let recorded: Vec<u64> = s.recent_queries().map(|e| e.turn).collect();
            prop_assert!(recorded.len() <= window);
            prop_assert!(recorded.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(*recorded.last().unwrap(), turns as u64);
        }

        #[test]
        fn last_access_never_exceeds_clock(ops in proptest::collection::vec(0u8..3, 1..40)) {
            let mut s = MemoryStore::new(2, 64, 4).unwrap();
            let mut rng = SplitMix64::new(1);
            for op in ops {
                match op {
                    0 => {
                        let v = random_unit(&mut rng, 2);
                        s.insert("t", v).unwrap();
                    }
                    1 => {
                        let v = random_unit(&mut rng, 2);
                        s.retrieve(&v).unwrap();
                    }
                    _ => s.tick(),
                }
                for slot in s.slots() {
                    prop_assert!(slot.last_access <= s.clock());
                    prop_assert!(slot.created_at <= slot.last_access);
                }
            }
        }
    }
}
