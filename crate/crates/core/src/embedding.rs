//! Text normalization, per-token embeddings, mean pooling, and cosine
//! similarity. All vector math is f64 with fixed left-to-right summation so
//! results are bit-reproducible across runs and platforms.

use serde::{Deserialize, Serialize};

/// Errors from the embedding pipeline.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EmbedError {
    #[error("no tokens survive normalization")]
    EmptyInput,
    #[error("embedding provider failure: {0}")]
    ProviderFailure(String),
    #[error("pooled embedding is all-zero")]
    DegenerateEmbedding,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for an all-zero vector")]
    ZeroVector,
}

/// An ordered sequence of normalized tokens: non-empty, lowercase, no
/// whitespace. Construct via [`normalize_text`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One embedding vector per token, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddings {
    vectors: Vec<Vec<f64>>,
    dimension: usize,
    provider_fingerprint: String,
}

impl TokenEmbeddings {
    /// Wraps provider output, enforcing the one-vector-per-token contract.
    pub fn new(
        vectors: Vec<Vec<f64>>,
        dimension: usize,
        provider_fingerprint: impl Into<String>,
    ) -> Result<Self, EmbedError> {
        if vectors.is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        for v in &vectors {
            if v.len() != dimension {
                return Err(EmbedError::ProviderFailure(format!(
                    "provider declared dimension {dimension} but returned a {}-dim vector",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::ProviderFailure(
                    "provider returned a non-finite component".into(),
                ));
            }
        }
        Ok(Self {
            vectors,
            dimension,
            provider_fingerprint: provider_fingerprint.into(),
        })
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn provider_fingerprint(&self) -> &str {
        &self.provider_fingerprint
    }
}

/// A pooled sentence vector plus the fingerprint of the provider
/// configuration that produced it (used to detect stale indexes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding {
    values: Vec<f64>,
    provider_fingerprint: String,
}

impl SentenceEmbedding {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn provider_fingerprint(&self) -> &str {
        &self.provider_fingerprint
    }

    /// Scales every component; used by scale-invariance tests.
    pub fn scaled(&self, factor: f64) -> SentenceEmbedding {
        SentenceEmbedding {
            values: self.values.iter().map(|x| x * factor).collect(),
            provider_fingerprint: self.provider_fingerprint.clone(),
        }
    }
}

/// Turns token sequences into per-token vectors. Implementations must be
/// stable within a process run; the built-in provider is bit-deterministic
/// across runs for a given `config_hash`. Providers are shared across
/// concurrent requests and must be `Send + Sync`.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dimension(&self) -> usize;
    /// Deterministic digest of the provider settings.
    fn config_hash(&self) -> &str;
    fn embed_tokens(&self, tokens: &TokenSequence) -> Result<TokenEmbeddings, EmbedError>;
}

/// Lowercases, splits on Unicode whitespace, strips leading/trailing
/// non-alphanumeric characters from each token, and drops empties.
pub fn normalize_text(text: &str) -> Result<TokenSequence, EmbedError> {
    let tokens: Vec<String> = text
        .to_lowercase()
        .split_whitespace()
        .filter_map(|raw| {
            let stripped = raw
                .trim_start_matches(|c: char| !c.is_alphanumeric())
                .trim_end_matches(|c: char| !c.is_alphanumeric());
            if stripped.is_empty() {
                None
            } else {
                Some(stripped.to_string())
            }
        })
        .collect();
    if tokens.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    Ok(TokenSequence(tokens))
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a 64-bit over a byte slice.
fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &byte in data {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Signed feature-hashing kernel of the built-in provider.
///
/// Pads the token with `#` on both ends, enumerates character 3-grams,
/// hashes each with FNV-1a 64, adds +1 or -1 (from bit 63) to component
/// `hash mod dimension`, and normalizes to unit length. Returns the all-zero
/// vector when the signed contributions cancel exactly; pooling rejects
/// all-zero sentences downstream.
pub fn hash_embed_token(token: &str, dimension: usize) -> Vec<f64> {
    assert!(dimension >= 2, "embedding dimension must be at least 2");
    assert!(
        !token.is_empty() && !token.chars().any(char::is_whitespace),
        "token must be non-empty with no whitespace"
    );

    let padded: Vec<char> = std::iter::once('#')
        .chain(token.chars())
        .chain(std::iter::once('#'))
        .collect();
    let mut acc = vec![0.0_f64; dimension];
    let mut gram = String::new();
    for window in padded.windows(3) {
        gram.clear();
        gram.extend(window);
        let hash = fnv1a64(gram.as_bytes());
        let index = (hash % dimension as u64) as usize;
        let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
        acc[index] += sign;
    }

    let mut sum_sq = 0.0_f64;
    for x in &acc {
        sum_sq += x * x;
    }
    let norm = sum_sq.sqrt();
    if norm > 0.0 {
        for x in &mut acc {
            *x /= norm;
        }
    }
    acc
}

/// The built-in deterministic provider: character 3-grams, FNV-1a 64,
/// signed hashing. Context-free, so per-token output depends only on the
/// token itself.
#[derive(Debug, Clone)]
pub struct TrigramHashProvider {
    dimension: usize,
    config_hash: String,
}

impl TrigramHashProvider {
    pub const DEFAULT_DIMENSION: usize = 256;

    pub fn new(dimension: usize) -> Result<Self, EmbedError> {
        if dimension < 2 {
            return Err(EmbedError::ProviderFailure(format!(
                "dimension must be at least 2, got {dimension}"
            )));
        }
        Ok(Self {
            dimension,
            config_hash: format!("trigram-fnv1a64-signed:d{dimension}:v1"),
        })
    }
}

impl Default for TrigramHashProvider {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION).expect("default dimension is valid")
    }
}

impl EmbeddingProvider for TrigramHashProvider {
    fn id(&self) -> &str {
        "trigram-fnv1a64-signed"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn embed_tokens(&self, tokens: &TokenSequence) -> Result<TokenEmbeddings, EmbedError> {
        let vectors = tokens
            .tokens()
            .iter()
            .map(|t| hash_embed_token(t, self.dimension))
            .collect();
        TokenEmbeddings::new(vectors, self.dimension, self.config_hash.clone())
    }
}

/// Embeds a token sequence through a provider, enforcing the provider
/// contract (declared dimension, one vector per token).
pub fn embed_tokens(
    tokens: &TokenSequence,
    provider: &dyn EmbeddingProvider,
) -> Result<TokenEmbeddings, EmbedError> {
    let embeddings = provider.embed_tokens(tokens)?;
    if embeddings.len() != tokens.len() {
        return Err(EmbedError::ProviderFailure(format!(
            "provider returned {} vectors for {} tokens",
            embeddings.len(),
            tokens.len()
        )));
    }
    if embeddings.dimension() != provider.dimension() {
        return Err(EmbedError::ProviderFailure(format!(
            "provider declared dimension {} but produced {}",
            provider.dimension(),
            embeddings.dimension()
        )));
    }
    Ok(embeddings)
}

/// Componentwise arithmetic mean over tokens, left-to-right.
pub fn mean_pool(embeddings: &TokenEmbeddings) -> Result<SentenceEmbedding, EmbedError> {
    if embeddings.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    let dimension = embeddings.dimension();
    let mut acc = vec![0.0_f64; dimension];
    for vector in embeddings.vectors() {
        for (slot, x) in acc.iter_mut().zip(vector) {
            *slot += x;
        }
    }
    let count = embeddings.len() as f64;
    for slot in &mut acc {
        *slot /= count;
    }
    if acc.iter().all(|x| *x == 0.0) {
        return Err(EmbedError::DegenerateEmbedding);
    }
    Ok(SentenceEmbedding {
        values: acc,
        provider_fingerprint: embeddings.provider_fingerprint().to_string(),
    })
}

/// Full text-to-sentence-embedding composition: normalize, embed, pool.
/// Queries and descriptions both go through this single path.
pub fn embed_text(
    provider: &dyn EmbeddingProvider,
    text: &str,
) -> Result<SentenceEmbedding, EmbedError> {
    let tokens = normalize_text(text)?;
    let embeddings = embed_tokens(&tokens, provider)?;
    mean_pool(&embeddings)
}

/// Cosine similarity clamped to [-1, 1] to absorb rounding.
pub fn cosine_similarity(u: &SentenceEmbedding, v: &SentenceEmbedding) -> Result<f64, EmbedError> {
    if u.dimension() != v.dimension() {
        return Err(EmbedError::DimensionMismatch {
            left: u.dimension(),
            right: v.dimension(),
        });
    }
    let mut dot = 0.0_f64;
    let mut norm_u = 0.0_f64;
    let mut norm_v = 0.0_f64;
    for (a, b) in u.values().iter().zip(v.values()) {
        dot += a * b;
        norm_u += a * a;
        norm_v += b * b;
    }
    if norm_u == 0.0 || norm_v == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (norm_u.sqrt() * norm_v.sqrt())).clamp(-1.0, 1.0))
}


#[cfg(test)]
mod tests {
    use super::test_support::raw_sentence;
    use super::*;

    #[test]
    fn fnv_constants_are_the_standard_ones() {
        assert_eq!(FNV_OFFSET, 14695981039346656037);
        assert_eq!(FNV_PRIME, 1099511628211);
        // Known FNV-1a 64 vectors: empty input hashes to the offset basis.
        assert_eq!(fnv1a64(b""), 14695981039346656037);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn normalize_strips_edge_punctuation_and_lowercases() {
        let toks = normalize_text("Skin rash?").unwrap();
        assert_eq!(toks.tokens(), ["skin", "rash"]);
    }

    #[test]
    fn normalize_single_letter() {
        let toks = normalize_text("A").unwrap();
        assert_eq!(toks.tokens(), ["a"]);
    }

    #[test]
    fn normalize_rejects_text_with_no_surviving_tokens() {
        assert_eq!(normalize_text("  ...  "), Err(EmbedError::EmptyInput));
        assert_eq!(normalize_text(""), Err(EmbedError::EmptyInput));
    }

    #[test]
    fn normalize_keeps_inner_punctuation() {
        let toks = normalize_text("chest x-ray, H&E stained!").unwrap();
        assert_eq!(toks.tokens(), ["chest", "x-ray", "h&e", "stained"]);
    }

    #[test]
    fn single_char_token_has_one_trigram() {
        // "#a#" is the only 3-gram, so exactly one component is +/-1.
        let v = hash_embed_token("a", 256);
        let nonzero: Vec<(usize, f64)> = v
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, x)| *x != 0.0)
            .collect();
        // Frozen from the independent reference computation.
        assert_eq!(nonzero, vec![(94, -1.0)]);
    }

    #[test]
    fn hash_embed_token_is_deterministic() {
        assert_eq!(hash_embed_token("skin", 256), hash_embed_token("skin", 256));
    }

    #[test]
    fn skin_vector_matches_frozen_golden_bit_exactly() {
        // Golden frozen from the independent pre-build reference computation:
        // "#skin#" has trigrams #sk, ski, kin, in# landing on four distinct
        // components, so each is +/- 1/2 exactly.
        let v = hash_embed_token("skin", 256);
        assert_eq!(&v[..4], &[0.0, 0.0, 0.0, 0.0]);
        let nonzero: Vec<(usize, u64)> = v
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(i, x)| (i, x.to_bits()))
            .collect();
        assert_eq!(
            nonzero,
            vec![
                (85, 0.5_f64.to_bits()),
                (134, (-0.5_f64).to_bits()),
                (199, 0.5_f64.to_bits()),
                (200, (-0.5_f64).to_bits()),
            ]
        );
        let sum_sq: f64 = v.iter().map(|x| x * x).sum();
        assert_eq!(sum_sq, 1.0);
    }

    #[test]
    fn provider_embeds_one_unit_vector_per_token() {
        let provider = TrigramHashProvider::new(256).unwrap();
        let toks = normalize_text("skin").unwrap();
        let emb = embed_tokens(&toks, &provider).unwrap();
        assert_eq!(emb.len(), 1);
        assert_eq!(emb.dimension(), 256);
        let norm: f64 = emb.vectors()[0].iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_tokens_embed_identically() {
        let provider = TrigramHashProvider::new(64).unwrap();
        let toks = normalize_text("a a").unwrap();
        let emb = embed_tokens(&toks, &provider).unwrap();
        assert_eq!(emb.vectors()[0], emb.vectors()[1]);
    }

    struct LyingProvider;

    impl EmbeddingProvider for LyingProvider {
        fn id(&self) -> &str {
            "lying"
        }
        fn dimension(&self) -> usize {
            256
        }
        fn config_hash(&self) -> &str {
            "lying:v1"
        }
        fn embed_tokens(&self, tokens: &TokenSequence) -> Result<TokenEmbeddings, EmbedError> {
            // Declares 256 but produces 128-dim vectors.
            TokenEmbeddings::new(vec![vec![1.0; 128]; tokens.len()], 128, "lying:v1")
        }
    }

    #[test]
    fn wrong_dimension_from_provider_is_a_provider_failure() {
        let toks = normalize_text("anything").unwrap();
        match embed_tokens(&toks, &LyingProvider) {
            Err(EmbedError::ProviderFailure(_)) => {}
            other => panic!("expected ProviderFailure, got {other:?}"),
        }
    }

    #[test]
    fn mean_pool_single_token_is_identity() {
        let emb = TokenEmbeddings::new(vec![vec![1.0, 0.0]], 2, "t").unwrap();
        let pooled = mean_pool(&emb).unwrap();
        assert_eq!(pooled.values(), &[1.0, 0.0]);
    }

    #[test]
    fn mean_pool_averages_componentwise() {
        let emb = TokenEmbeddings::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 2, "t").unwrap();
        let pooled = mean_pool(&emb).unwrap();
        assert_eq!(pooled.values(), &[0.5, 0.5]);
    }

    #[test]
    fn mean_pool_rejects_exact_cancellation() {
        let emb = TokenEmbeddings::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], 2, "t").unwrap();
        assert_eq!(mean_pool(&emb), Err(EmbedError::DegenerateEmbedding));
    }

    #[test]
    fn cosine_identical_direction_is_one() {
        let u = raw_sentence(&[1.0, 0.0], "t");
        let v = raw_sentence(&[1.0, 0.0], "t");
        assert_eq!(cosine_similarity(&u, &v).unwrap(), 1.0);
    }

    #[test]
    fn cosine_orthogonal_is_zero() {
        let u = raw_sentence(&[1.0, 0.0], "t");
        let v = raw_sentence(&[0.0, 1.0], "t");
        assert_eq!(cosine_similarity(&u, &v).unwrap(), 0.0);
    }

    #[test]
    fn cosine_forty_five_degrees() {
        let u = raw_sentence(&[1.0, 1.0], "t");
        let v = raw_sentence(&[1.0, 0.0], "t");
        let s = cosine_similarity(&u, &v).unwrap();
        assert!((s - 0.70710678).abs() < 1e-8);
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn cosine_rejects_dimension_mismatch_and_zero_vectors() {
        let u = raw_sentence(&[1.0, 0.0], "t");
        let v = raw_sentence(&[1.0, 0.0, 0.0], "t");
        assert_eq!(
            cosine_similarity(&u, &v),
            Err(EmbedError::DimensionMismatch { left: 2, right: 3 })
        );
        let z = raw_sentence(&[0.0, 0.0], "t");
        assert_eq!(cosine_similarity(&u, &z), Err(EmbedError::ZeroVector));
    }

    #[test]
    fn cosine_is_symmetric_exactly() {
        let u = raw_sentence(&[0.3, -1.7, 2.2], "t");
        let v = raw_sentence(&[-0.9, 0.4, 1.1], "t");
        assert_eq!(
            cosine_similarity(&u, &v).unwrap(),
            cosine_similarity(&v, &u).unwrap()
        );
    }

    #[test]
    fn embed_text_is_deterministic() {
        let provider = TrigramHashProvider::default();
        let a = embed_text(&provider, "what is this skin condition").unwrap();
        let b = embed_text(&provider, "what is this skin condition").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dimension(), 256);
    }

    #[test]
    fn provider_rejects_dimension_below_two() {
        assert!(TrigramHashProvider::new(1).is_err());
        assert!(TrigramHashProvider::new(2).is_ok());
    }
}
