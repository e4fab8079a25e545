//! Evaluation quantities computed over finished transcripts: response-context
//! coherence, paired response transfer, game accuracy, and latency/storage
//! aggregation.
//!
//! Everything here is a pure function of transcript data plus a deterministic
//! embedder, so reports are freely parallel and replayable.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::session::{Transcript, Turn};
use crate::twentyq::GameOutcome;

/// Aggregated context for one turn: the L2-normalized mean of the embeddings
/// of some prior range of texts. Zero vector when the range is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    pub vector: EmbeddingVector,
    /// Which turn indices (0-based) were pooled.
    pub built_from: Range<usize>,
}

/// L2-normalized arithmetic mean. An empty slice (or a cancelling sum) yields
/// the zero vector.
pub fn normalized_mean(vectors: &[EmbeddingVector], dimension: usize) -> EmbeddingVector {
    if vectors.is_empty() {
        return EmbeddingVector::zeros(dimension);
    }
    let mut acc = vec![0.0f64; dimension];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a += x;
        }
    }
    let count = vectors.len() as f64;
    for a in acc.iter_mut() {
        *a /= count;
    }
    let mut mean = EmbeddingVector::from(acc);
    mean.l2_normalize();
    mean
}

fn contexts_over(embedded: &[EmbeddingVector], window: Option<usize>, dimension: usize) -> Vec<ContextVector> {
    (0..embedded.len())
        .map(|i| {
            let start = match window {
                Some(w) => i.saturating_sub(w),
                None => 0,
            };
            ContextVector {
                vector: normalized_mean(&embedded[start..i], dimension),
                built_from: start..i,
            }
        })
        .collect()
}

/// Per-turn context vectors over a turn sequence: for turn i, the normalized
/// mean of the prior turns' interaction embeddings (query and response
/// together), restricted to the last `window` turns when given. The first
/// turn's context is the zero vector.
pub fn context_vectors(
    embedder: &Embedder,
    turns: &[Turn],
    window: Option<usize>,
) -> Result<Vec<ContextVector>> {
    let embedded = turns
        .iter()
        .map(|t| embedder.embed_interaction(&t.query, &t.response))
        .collect::<Result<Vec<_>>>()?;
    Ok(contexts_over(&embedded, window, embedder.dimension()))
}

/// Per-turn coherence scores: cosine between each response embedding and that
/// turn's context vector. Zero-context turns contribute exactly 0.
pub fn per_turn_coherence(
    embedder: &Embedder,
    turns: &[Turn],
    window: Option<usize>,
) -> Result<Vec<f64>> {
    let contexts = context_vectors(embedder, turns, window)?;
    turns
        .iter()
        .zip(&contexts)
        .map(|(t, c)| cosine_similarity(&embedder.embed(&t.response)?, &c.vector))
        .collect()
}

/// Mean response-context coherence with a bounded context window.
pub fn ccs_windowed(
    transcript: &Transcript,
    embedder: &Embedder,
    window: Option<usize>,
) -> Result<f64> {
    if transcript.turns.is_empty() {
        return Err(Error::contract("coherence requires a non-empty transcript"));
    }
    let scores = per_turn_coherence(embedder, &transcript.turns, window)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Mean response-context coherence with an unbounded context window.
pub fn ccs(transcript: &Transcript, embedder: &Embedder) -> Result<f64> {
    ccs_windowed(transcript, embedder, None)
}

/// Context referents for paired scoring: built from the query sequence alone
/// (strictly prior queries, unbounded window). Queries are the portion both
/// arms share verbatim, so the referent is identical no matter which arm is
/// named first, which is what makes `ptr(a, b) + ptr(b, a) <= 100` an
/// identity rather than an accident.
fn query_contexts(embedder: &Embedder, turns: &[Turn]) -> Result<Vec<ContextVector>> {
    let embedded = turns
        .iter()
        .map(|t| embedder.embed(&t.query))
        .collect::<Result<Vec<_>>>()?;
    Ok(contexts_over(&embedded, None, embedder.dimension()))
}

fn paired_wins(
    embedder: &Embedder,
    mem: &[Turn],
    base: &[Turn],
    upto: usize,
) -> Result<usize> {
    let contexts = query_contexts(embedder, &mem[..upto])?;
    let mut wins = 0;
    for i in 0..upto {
        let mem_sim = cosine_similarity(&embedder.embed(&mem[i].response)?, &contexts[i].vector)?;
        let base_sim = cosine_similarity(&embedder.embed(&base[i].response)?, &contexts[i].vector)?;
        if mem_sim > base_sim {
            wins += 1;
        }
    }
    Ok(wins)
}

/// Positive transfer percentage: the fraction of paired turns where the first
/// transcript's response sits strictly closer to the shared query context
/// than the second's. Ties are non-wins. The transcripts must pair up
/// exactly: equal turn counts and identical query sequences.
pub fn ptr(mem: &Transcript, base: &Transcript, embedder: &Embedder) -> Result<f64> {
    if mem.turns.is_empty() || base.turns.is_empty() {
        return Err(Error::contract("paired transfer requires non-empty transcripts"));
    }
    if mem.turns.len() != base.turns.len() {
        return Err(Error::contract(format!(
            "paired transfer requires equal turn counts, got {} and {}",
            mem.turns.len(),
            base.turns.len()
        )));
    }
    for (a, b) in mem.turns.iter().zip(&base.turns) {
        if a.query != b.query {
            return Err(Error::contract(format!(
                "paired transfer requires identical query sequences; turn {} diverges",
                a.index
            )));
        }
    }
    let n = mem.turns.len();
    let wins = paired_wins(embedder, &mem.turns, &base.turns, n)?;
    Ok(100.0 * wins as f64 / n as f64)
}

/// Pooled-transfer building block for arms whose query streams diverge
/// mid-session (as interactive matches do once responses differ): scores only
/// the longest shared query prefix and returns `(wins, pairs)` so callers can
/// pool across many transcript pairs. `pairs` may be zero.
pub fn ptr_aligned(
    mem: &Transcript,
    base: &Transcript,
    embedder: &Embedder,
) -> Result<(usize, usize)> {
    let upto = mem
        .turns
        .iter()
        .zip(&base.turns)
        .take_while(|(a, b)| a.query == b.query)
        .count();
    let wins = paired_wins(embedder, &mem.turns, &base.turns, upto)?;
    Ok((wins, upto))
}

/// Percentage of matches won. Empty input scores 0.
pub fn accuracy(outcomes: &[GameOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    let wins = outcomes.iter().filter(|o| o.success).count();
    100.0 * wins as f64 / outcomes.len() as f64
}

/// One arm's pooled evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ccs: f64,
    pub ptr_percent: f64,
    /// Absent for arms without game outcomes (plain dialogue replays).
    pub accuracy_percent: Option<f64>,
    pub mean_latency_ms: f64,
    pub peak_store_bytes: u64,
    /// Turns pooled for coherence and latency.
    pub turn_count: u64,
    /// Paired turns scored for transfer (0 without a baseline).
    pub interaction_count: u64,
}

impl MetricReport {
    /// Range checks; every report is validated before being emitted.
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.ccs) {
            return Err(Error::contract(format!("ccs {} outside [-1, 1]", self.ccs)));
        }
        if !(0.0..=100.0).contains(&self.ptr_percent) {
            return Err(Error::contract(format!(
                "ptr {} outside [0, 100]",
                self.ptr_percent
            )));
        }
        if let Some(acc) = self.accuracy_percent {
            if !(0.0..=100.0).contains(&acc) {
                return Err(Error::contract(format!("accuracy {acc} outside [0, 100]")));
            }
        }
        if !(self.mean_latency_ms >= 0.0) {
            return Err(Error::contract(format!(
                "mean latency {} negative or NaN",
                self.mean_latency_ms
            )));
        }
        Ok(())
    }
}

/// Pools one arm's transcripts (and optionally its game outcomes) into a
/// report. Context pooling restarts per transcript. When `baseline` is given
/// it must hold the same number of transcripts, paired by position; transfer
/// is pooled over per-pair shared query prefixes. Without a baseline the
/// transfer percentage is reported as 0.
pub fn aggregate(
    transcripts: &[Transcript],
    baseline: Option<&[Transcript]>,
    outcomes: Option<&[GameOutcome]>,
    embedder: &Embedder,
) -> Result<MetricReport> {
    if transcripts.is_empty() {
        return Err(Error::contract("aggregate requires at least one transcript"));
    }
    let fingerprint = &transcripts[0].config_fingerprint;
    for t in transcripts {
        if &t.config_fingerprint != fingerprint {
            return Err(Error::contract(format!(
                "aggregate requires a consistent configuration, session {} diverges",
                t.session_id
            )));
        }
    }

    let mut coherence_sum = 0.0;
    let mut latency_sum = 0.0;
    let mut peak_store_bytes = 0u64;
    let mut turn_count = 0u64;
    for t in transcripts {
        for score in per_turn_coherence(embedder, &t.turns, None)? {
            coherence_sum += score;
        }
        for turn in &t.turns {
            latency_sum += turn.latency_ms;
            peak_store_bytes = peak_store_bytes.max(turn.store_bytes);
            turn_count += 1;
        }
    }

    let (mut wins, mut pairs) = (0usize, 0usize);
    if let Some(base) = baseline {
        if base.len() != transcripts.len() {
            return Err(Error::contract(format!(
                "baseline arm has {} transcripts, expected {}",
                base.len(),
                transcripts.len()
            )));
        }
        for (m, b) in transcripts.iter().zip(base) {
            let (w, p) = ptr_aligned(m, b, embedder)?;
            wins += w;
            pairs += p;
        }
    }

    let report = MetricReport {
        ccs: if turn_count == 0 {
            0.0
        } else {
            coherence_sum / turn_count as f64
        },
        ptr_percent: if pairs == 0 {
            0.0
        } else {
            100.0 * wins as f64 / pairs as f64
        },
        accuracy_percent: outcomes.map(accuracy),
        mean_latency_ms: if turn_count == 0 {
            0.0
        } else {
            latency_sum / turn_count as f64
        },
        peak_store_bytes,
        turn_count,
        interaction_count: pairs as u64,
    };
    report.validate()?;
    Ok(report)
}

/// One labelled row of a comparison table.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub label: String,
    pub report: MetricReport,
}

/// Renders an aligned plain-text comparison table, one row per arm.
pub fn render_comparison(rows: &[ComparisonRow]) -> String {
    const HEADERS: [&str; 6] = [
        "Model/Arm",
        "Accuracy (%)",
        "CCS",
        "PTR (%)",
        "Peak Store (bytes)",
        "Mean Latency (ms)",
    ];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|row| {
            let r = &row.report;
            [
                row.label.clone(),
                r.accuracy_percent
                    .map(|a| format!("{a:.1}"))
                    .unwrap_or_else(|| "-".to_string()),
                format!("{:.4}", r.ccs),
                format!("{:.1}", r.ptr_percent),
                r.peak_store_bytes.to_string(),
                format!("{:.3}", r.mean_latency_ms),
            ]
        })
        .collect();

    let mut widths: Vec<usize> = HEADERS.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let push_row = |out: &mut String, cols: &[&str]| {
        for (i, (col, w)) in cols.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i == 0 {
                out.push_str(&format!("{col:<w$}"));
            } else {
                out.push_str(&format!("{col:>w$}"));
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    push_row(&mut out, &HEADERS);
    let rules: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let rule_refs: Vec<&str> = rules.iter().map(|s| s.as_str()).collect();
    push_row(&mut out, &rule_refs);
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(|s| s.as_str()).collect();
        push_row(&mut out, &refs);
    }
    out
}
