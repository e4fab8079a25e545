//! Text embedding: a deterministic reference embedder based on feature
//! hashing, plus an adapter for external HTTP embedding services.
//!
//! The reference embedder is the default for experiments because it is fast,
//! dependency-free, and bit-reproducible: the same text always maps to the
//! same vector on every platform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::stable_hash;

/// Separator placed between a query and a response when embedding a full
/// interaction. U+001F (unit separator) never survives tokenization, so the
/// joined text embeds exactly like the two parts written side by side.
pub const SEP: char = '\u{001F}';

/// A fixed-dimension embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn zeros(dimension: usize) -> Self {
        EmbeddingVector(vec![0.0; dimension])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// True when every component is exactly zero. The reference embedder
    /// produces this for texts with no tokens; callers treat it as "no
    /// information" rather than an error.
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::contract(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    /// Scales the vector to unit length in place. Zero vectors are left
    /// untouched.
    pub fn l2_normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for x in &mut self.0 {
                *x /= n;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(v: Vec<f64>) -> Self {
        EmbeddingVector(v)
    }
}

/// Cosine similarity between two same-dimension vectors. Defined as exactly
/// `0.0` when either vector has zero norm, so empty texts never match
/// anything.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    let dot = a.dot(b)?;
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    L2,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderBackendKind {
    Reference,
    External,
}

/// Configuration for constructing an [`Embedder`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub backend: EmbedderBackendKind,
    /// Vector dimension; must be at least 2.
    pub dimension: usize,
    pub normalization: Normalization,
    /// External backend endpoint. `MNEMOS_EMBED_URL` overrides this when
    /// set.
    pub url: Option<String>,
    /// Bearer token for the external backend. `MNEMOS_EMBED_TOKEN` overrides
    /// this when set.
    pub token: Option<String>,
    /// Model name sent to the external backend.
    pub model: Option<String>,
    /// Extra attempts after a failed external request.
    pub retries: u32,
    pub timeout_ms: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            backend: EmbedderBackendKind::Reference,
            dimension: 256,
            normalization: Normalization::L2,
            url: None,
            token: None,
            model: None,
            retries: 1,
            timeout_ms: 10_000,
        }
    }
}

#[derive(Debug)]
enum Backend {
    Reference,
    External(ExternalEmbedder),
}

/// Text-to-vector encoder. All session, metric, and environment code talks to
/// this one type; the backend is chosen at construction time.
#[derive(Debug)]
pub struct Embedder {
    dimension: usize,
    normalization: Normalization,
    backend: Backend,
}

impl Embedder {
    pub fn new(config: EmbedderConfig) -> Result<Self> {
        if config.dimension < 2 {
            return Err(Error::config(format!(
                "embedding dimension must be at least 2, got {}",
                config.dimension
            )));
        }
        let backend = match config.backend {
            EmbedderBackendKind::Reference => Backend::Reference,
            EmbedderBackendKind::External => {
                Backend::External(ExternalEmbedder::new(&config)?)
            }
        };
        // The reference embedder always produces unit-length vectors; the
        // normalization setting only matters for external backends.
        let normalization = match config.backend {
            EmbedderBackendKind::Reference => Normalization::L2,
            EmbedderBackendKind::External => config.normalization,
        };
        Ok(Embedder {
            dimension: config.dimension,
            normalization,
            backend,
        })
    }

    /// Reference embedder with the given dimension and L2 normalization.
    pub fn reference(dimension: usize) -> Result<Self> {
        Embedder::new(EmbedderConfig {
            dimension,
            ..EmbedderConfig::default()
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Embeds a single text. Texts with no tokens map to the zero vector.
    pub fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        match &self.backend {
            Backend::Reference => Ok(reference_embed(text, self.dimension)),
            Backend::External(ext) => {
                let mut vecs = ext.embed_batch(&[text], self.dimension)?;
                let mut v = vecs.pop().expect("batch length checked");
                if self.normalization == Normalization::L2 {
                    v.l2_normalize();
                }
                Ok(v)
            }
        }
    }

    /// Embeds several texts at once. For external backends this is a single
    /// request; for the reference backend it is a plain loop.
    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        match &self.backend {
            Backend::Reference => Ok(texts
                .iter()
                .map(|t| reference_embed(t, self.dimension))
                .collect()),
            Backend::External(ext) => {
                let mut vecs = ext.embed_batch(texts, self.dimension)?;
                if self.normalization == Normalization::L2 {
                    for v in &mut vecs {
                        v.l2_normalize();
                    }
                }
                Ok(vecs)
            }
        }
    }

    /// Embeds a query/response pair as one interaction. The pair is joined
    /// with [`SEP`] so the combined text is unambiguous yet tokenizes exactly
    /// like the concatenation of its parts.
    pub fn embed_interaction(&self, query: &str, response: &str) -> Result<EmbeddingVector> {
        self.embed(&join_interaction(query, response))
    }
}

/// Joins a query and response into the canonical single-text form used for
/// interaction embeddings and stored slot text.
pub fn join_interaction(query: &str, response: &str) -> String {
    let mut s = String::with_capacity(query.len() + response.len() + SEP.len_utf8());
    s.push_str(query);
    s.push(SEP);
    s.push_str(response);
    s
}

/// Splits slot text produced by [`join_interaction`] back into its parts.
/// Returns the whole text as the query half when no separator is present.
pub fn split_interaction(text: &str) -> (&str, &str) {
    match text.split_once(SEP) {
        Some((q, r)) => (q, r),
        None => (text, ""),
    }
}

fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
}

fn reference_embed(text: &str, dimension: usize) -> EmbeddingVector {
    let lowered = text.to_lowercase();
    let mut v = vec![0.0f64; dimension];
    for token in tokenize(&lowered) {
        let h = stable_hash(token.as_bytes());
        let idx = ((h >> 32) % dimension as u64) as usize;
        let sign = if (h >> 1) & 1 == 1 { 1.0 } else { -1.0 };
        v[idx] += sign;
    }
    let mut v = EmbeddingVector(v);
    v.l2_normalize();
    v
}

/// Client for an HTTP embedding service.
///
/// Wire contract: `POST {url}` with body `{"input": [texts...], "model": name}`
/// and optional `Authorization: Bearer <token>`; the response is
/// `{"data": [{"embedding": [f64...]}, ...]}` with one entry per input, each
/// of the configured dimension.
#[derive(Debug)]
struct ExternalEmbedder {
    client: reqwest::blocking::Client,
    url: String,
    token: Option<String>,
    model: String,
    retries: u32,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a [&'a str],
    model: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

impl ExternalEmbedder {
    fn new(config: &EmbedderConfig) -> Result<Self> {
        // Environment overrides the configured values.
        let url = std::env::var("MNEMOS_EMBED_URL")
            .ok()
            .or_else(|| config.url.clone())
            .ok_or_else(|| {
                Error::config("external embedder requires a url or MNEMOS_EMBED_URL")
            })?;
        let token = std::env::var("MNEMOS_EMBED_TOKEN")
            .ok()
            .or_else(|| config.token.clone());
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| Error::backend(format!("failed to build http client: {e}")))?;
        Ok(ExternalEmbedder {
            client,
            url,
            token,
            model: config.model.clone().unwrap_or_else(|| "default".to_string()),
            retries: config.retries,
        })
    }

    fn embed_batch(&self, texts: &[&str], dimension: usize) -> Result<Vec<EmbeddingVector>> {
        let body = EmbedRequest {
            input: texts,
            model: &self.model,
        };
        let mut last_err = None;
        for _ in 0..=self.retries {
            match self.request(&body) {
                Ok(resp) => return validate_embeddings(resp, texts.len(), dimension),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| Error::backend("embedding request failed")))
    }

    fn request(&self, body: &EmbedRequest<'_>) -> Result<EmbedResponse> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .map_err(|e| Error::backend(format!("embedding request failed: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::backend(format!(
                "embedding service returned {status}"
            )));
        }
        resp.json::<EmbedResponse>()
            .map_err(|e| Error::backend(format!("malformed embedding response: {e}")))
    }
}

fn validate_embeddings(
    resp: EmbedResponse,
    expected_count: usize,
    dimension: usize,
) -> Result<Vec<EmbeddingVector>> {
    if resp.data.len() != expected_count {
        return Err(Error::contract(format!(
            "embedding service returned {} vectors for {} inputs",
            resp.data.len(),
            expected_count
        )));
    }
    resp.data
        .into_iter()
        .map(|d| {
            if d.embedding.len() != dimension {
                return Err(Error::contract(format!(
                    "embedding dimension {} does not match configured {}",
                    d.embedding.len(),
                    dimension
                )));
            }
            let v = EmbeddingVector(d.embedding);
            if !v.is_finite() {
                return Err(Error::contract(
                    "embedding contains non-finite values".to_string(),
                ));
            }
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn embedder() -> Embedder {
        Embedder::reference(64).unwrap()
    }

    #[test]
    fn empty_text_embeds_to_flagged_zero_vector() {
        let e = embedder();
        for text in ["", "   ", "\t\n", "?!,.;--"] {
            let v = e.embed(text).unwrap();
            assert!(v.is_zero(), "expected zero vector for {text:?}");
            assert_eq!(v.norm(), 0.0);
            assert_eq!(v.dim(), 64);
        }
    }

    #[test]
    fn embedding_is_deterministic() {
        let e = embedder();
        let a = e.embed("the quick brown fox").unwrap();
        let b = e.embed("the quick brown fox").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bag_of_words_ignores_order_case_and_punctuation() {
        let e = embedder();
        let a = e.embed("cat dog").unwrap();
        let b = e.embed("dog cat").unwrap();
        let c = e.embed("Cat, dog!").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn nonempty_embeddings_are_unit_length() {
        let e = embedder();
        for text in ["hello", "a b c d e", "repeated repeated repeated"] {
            let v = e.embed(text).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-9, "norm {} for {text:?}", v.norm());
        }
    }

    #[test]
    fn interaction_embedding_matches_joined_text() {
        let e = embedder();
        let joined = e.embed_interaction("is it alive?", "yes").unwrap();
        let manual = e.embed(&join_interaction("is it alive?", "yes")).unwrap();
        let spaced = e.embed("is it alive? yes").unwrap();
        assert_eq!(joined, manual);
        assert_eq!(joined, spaced);
    }

    #[test]
    fn split_interaction_inverts_join() {
        let text = join_interaction("what color is it", "red, mostly");
        assert_eq!(split_interaction(&text), ("what color is it", "red, mostly"));
        assert_eq!(split_interaction("no separator"), ("no separator", ""));
    }

    #[test]
    fn dimension_is_validated_and_respected() {
        assert!(Embedder::reference(0).is_err());
        assert!(Embedder::reference(1).is_err());
        let small = Embedder::reference(2).unwrap();
        assert_eq!(small.embed("hello world").unwrap().dim(), 2);
        let big = Embedder::reference(512).unwrap();
        assert_eq!(big.embed("hello world").unwrap().dim(), 512);
    }

    #[test]
    fn different_texts_usually_differ() {
        let e = embedder();
        let a = e.embed("elephant").unwrap();
        let b = e.embed("submarine").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn cosine_zero_vector_is_exactly_zero() {
        let e = embedder();
        let z = e.embed("").unwrap();
        let v = e.embed("anything at all").unwrap();
        assert_eq!(cosine_similarity(&z, &v).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn cosine_rejects_dimension_mismatch() {
        let a = EmbeddingVector(vec![1.0, 0.0]);
        let b = EmbeddingVector(vec![1.0, 0.0, 0.0]);
        assert!(cosine_similarity(&a, &b).is_err());
    }

    #[test]
    fn cosine_of_identical_text_is_one() {
        let e = embedder();
        let a = e.embed("the same sentence").unwrap();
        let b = e.embed("the same sentence").unwrap();
        let sim = cosine_similarity(&a, &b).unwrap();
        assert!((sim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_single_embeds() {
        let e = embedder();
        let batch = e.embed_batch(&["one fish", "two fish", ""]).unwrap();
        assert_eq!(batch[0], e.embed("one fish").unwrap());
        assert_eq!(batch[1], e.embed("two fish").unwrap());
        assert!(batch[2].is_zero());
    }
}
