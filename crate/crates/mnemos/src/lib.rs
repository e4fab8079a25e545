//! mnemos: an embeddable vector-memory context engine for dialogue systems.
//!
//! The library is organized bottom-up:
//!
//! - [`embedding`]: text to fixed-dimension vectors (reference feature-hashing
//!   embedder plus an HTTP adapter for external embedding services).
//! - [`store`]: the bounded memory store with cosine retrieval, access
//!   timestamps, a recent-query window, and a serializable snapshot form.
//! - [`policy`]: eviction policies (LRU and relevance pruning) that keep the
//!   store within capacity.
//! - [`session`]: the turn loop wiring retrieval, response generation, memory
//!   writes, and policy enforcement together.
//! - [`metrics`]: contextual coherence, paired response transfer, accuracy,
//!   and report aggregation.
//! - [`twentyq`]: a deterministic 20 Questions environment and scripted
//!   players used to evaluate memory policies end to end.
//! - [`experiment`]: multi-arm experiment runner producing transcripts,
//!   reports, and a comparison table.

pub mod embedding;
pub mod error;
pub mod experiment;
pub mod hash;
pub mod metrics;
pub mod policy;
pub mod session;
pub mod store;
pub mod twentyq;

pub use embedding::{Embedder, EmbedderConfig, EmbeddingVector};
pub use error::{Error, Result};
pub use metrics::MetricReport;
pub use policy::{PolicyKind, PruneDecision};
pub use session::{Session, SessionConfig, Transcript, Turn};
pub use store::{MemorySlot, MemoryStore};
