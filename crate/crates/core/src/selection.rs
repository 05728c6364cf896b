//! Expert selection: score the query embedding against every description
//! embedding with cosine similarity and pick the argmax. Ordering is total
//! and deterministic — score descending, ties broken by ascending expert id.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::embedding::{
    cosine_similarity, embed_text, EmbedError, EmbeddingProvider, SentenceEmbedding,
};
use crate::registry::RegistrySnapshot;

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("registry has no experts")]
    EmptyRegistry,
    #[error("provider fingerprint mismatch: query {query:?} vs index {index:?}")]
    FingerprintMismatch { query: String, index: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("invalid selection config: {0}")]
    InvalidConfig(String),
}

/// One scored expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub expert_id: String,
    pub score: f64,
}

/// All experts of one snapshot, scored and totally ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRanking {
    pub entries: Vec<RankEntry>,
    /// Registry version the scores were computed against.
    pub query_version: u64,
}

/// The selected winner plus the (possibly top-k truncated) ranking behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub selected: String,
    pub score: f64,
    pub ranking: SimilarityRanking,
    /// Top-1 score minus top-2 score; 0 when only one expert exists.
    pub margin: f64,
    /// True unless a threshold is configured and unmet.
    pub confident: bool,
}

/// Selection knobs. The threshold is disabled by default, matching the
/// unconditional-argmax behavior; `top_k` only truncates reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub threshold: Option<f64>,
    pub top_k: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            threshold: None,
            top_k: 3,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.top_k == 0 {
            return Err(SelectionError::InvalidConfig("top_k must be >= 1".into()));
        }
        if let Some(t) = self.threshold {
            if !(-1.0..=1.0).contains(&t) {
                return Err(SelectionError::InvalidConfig(format!(
                    "threshold {t} outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Normalize, embed, and pool a raw question.
pub fn embed_query(
    question: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<SentenceEmbedding, EmbedError> {
    embed_text(provider, question)
}

/// Scores every expert in the snapshot against the query embedding.
/// The returned ranking covers exactly the snapshot's expert ids.
pub fn score_all(
    query: &SentenceEmbedding,
    snapshot: &RegistrySnapshot,
) -> Result<SimilarityRanking, SelectionError> {
    if snapshot.is_empty() {
        return Err(SelectionError::EmptyRegistry);
    }
    let index = snapshot.index();
    if query.provider_fingerprint() != index.provider_fingerprint() {
        return Err(SelectionError::FingerprintMismatch {
            query: query.provider_fingerprint().to_string(),
            index: index.provider_fingerprint().to_string(),
        });
    }
    let mut entries = Vec::with_capacity(index.len());
    for (expert_id, embedding) in index.entries() {
        let score = cosine_similarity(query, embedding)?;
        entries.push(RankEntry {
            expert_id: expert_id.clone(),
            score,
        });
    }
    sort_ranking(&mut entries);
    Ok(SimilarityRanking {
        entries,
        query_version: snapshot.version(),
    })
}

/// Score descending, ties by ascending expert id. Scores are finite
/// (cosine output is clamped), so the order is total.
fn sort_ranking(entries: &mut [RankEntry]) {
    entries.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.expert_id.cmp(&b.expert_id))
    });
}

/// End-to-end selection: embed the question, score all experts, pick the
/// argmax. The embedded ranking is truncated to `config.top_k` for
/// reporting; `margin` is computed before truncation.
pub fn select(
    question: &str,
    snapshot: &RegistrySnapshot,
    config: &SelectionConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<RouteDecision, SelectionError> {
    config.validate()?;
    let query = embed_query(question, provider)?;
    let mut ranking = score_all(&query, snapshot)?;
    let top = ranking.entries[0].clone();
    let margin = if ranking.entries.len() > 1 {
        top.score - ranking.entries[1].score
    } else {
        0.0
    };
    let confident = match config.threshold {
        Some(threshold) => top.score >= threshold,
        None => true,
    };
    ranking.entries.truncate(config.top_k);
    Ok(RouteDecision {
        selected: top.expert_id,
        score: top.score,
        ranking,
        margin,
        confident,
    })
}
