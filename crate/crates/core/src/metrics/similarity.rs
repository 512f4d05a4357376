//! String similarity kernels used by the coverage metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use text2table_gateway::{cosine, Gateway, GatewayError};

pub const DEFAULT_CHRF_N: usize = 6;
pub const DEFAULT_CHRF_BETA: f64 = 2.0;

/// Character n-gram F-score of `hyp` against `reference`.
///
/// Whitespace is removed first. Precision and recall are averaged over the
/// orders `1..=max_n` for which the reference has at least one n-gram. An
/// empty reference scores 1 against an empty hypothesis and 0 otherwise.
pub fn chrf(hyp: &str, reference: &str, max_n: usize, beta: f64) -> f64 {
    assert!(max_n >= 1 && beta > 0.0, "chrf needs max_n >= 1 and beta > 0");
    let h: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let (mut p_sum, mut r_sum, mut orders) = (0.0, 0.0, 0usize);
    for n in 1..=max_n {
        if r.len() < n {
            break;
        }
        let rc = ngram_counts(&r, n);
        let hc = ngram_counts(&h, n);
        let overlap: usize = hc.iter().map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0))).sum();
        let h_total = if h.len() >= n { h.len() - n + 1 } else { 0 };
        let r_total = r.len() - n + 1;
        p_sum += if h_total == 0 { 0.0 } else { overlap as f64 / h_total as f64 };
        r_sum += overlap as f64 / r_total as f64;
        orders += 1;
    }
    if orders == 0 {
        return if h.is_empty() { 1.0 } else { 0.0 };
    }
    let (p, r) = (p_sum / orders as f64, r_sum / orders as f64);
    let b2 = beta * beta;
    let denom = b2 * p + r;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / denom
    }
}

fn ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut m = HashMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimilarityKind {
    ExactMatch,
    Chrf { max_n: usize, beta: f64 },
    /// Cosine of backend embeddings, negative values clamped to 0.
    EmbeddingCosine,
}

impl SimilarityKind {
    pub fn chrf_default() -> Self {
        SimilarityKind::Chrf { max_n: DEFAULT_CHRF_N, beta: DEFAULT_CHRF_BETA }
    }

    /// Short label used as a report key: `em`, `chrf`, `embed`.
    pub fn label(&self) -> &'static str {
        match self {
            SimilarityKind::ExactMatch => "em",
            SimilarityKind::Chrf { .. } => "chrf",
            SimilarityKind::EmbeddingCosine => "embed",
        }
    }
}

/// Vectors for a fixed set of strings, fetched in one gateway batch.
#[derive(Debug, Clone, Default)]
pub struct Embeddings(HashMap<String, Vec<f64>>);

impl Embeddings {
    pub fn fetch(gateway: &Gateway, texts: impl IntoIterator<Item = String>) -> Result<Self, GatewayError> {
        let mut uniq: Vec<String> = texts.into_iter().collect();
        uniq.sort();
        uniq.dedup();
        if uniq.is_empty() {
            return Ok(Self::default());
        }
        let vecs = gateway.embed(&uniq)?;
        Ok(Self(uniq.into_iter().zip(vecs).collect()))
    }

    pub fn get(&self, text: &str) -> Option<&[f64]> {
        self.0.get(text).map(Vec::as_slice)
    }
}

/// A configured kernel. Always returns a score in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Similarity {
    pub kind: SimilarityKind,
    pub normalize_case: bool,
    embeddings: Embeddings,
}

impl Similarity {
    pub fn new(kind: SimilarityKind) -> Self {
        Self { kind, normalize_case: false, embeddings: Embeddings::default() }
    }

    pub fn exact() -> Self {
        Self::new(SimilarityKind::ExactMatch)
    }

    pub fn chrf(max_n: usize, beta: f64) -> Self {
        Self::new(SimilarityKind::Chrf { max_n, beta })
    }

    /// Embedding kernel over precomputed vectors. Strings missing from
    /// `embeddings` score 0.
    pub fn embedding(embeddings: Embeddings) -> Self {
        Self { kind: SimilarityKind::EmbeddingCosine, normalize_case: false, embeddings }
    }

    pub fn with_normalize_case(mut self, on: bool) -> Self {
        self.normalize_case = on;
        self
    }

    /// Similarity of a prediction-side string to a gold-side string. chrF
    /// treats `pred` as the hypothesis and `gold` as the reference.
    pub fn score(&self, gold: &str, pred: &str) -> f64 {
        let (g, p) = if self.normalize_case {
            (gold.to_lowercase().into(), pred.to_lowercase().into())
        } else {
            (std::borrow::Cow::Borrowed(gold), std::borrow::Cow::Borrowed(pred))
        };
        match self.kind {
            SimilarityKind::ExactMatch => f64::from(u8::from(g == p)),
            SimilarityKind::Chrf { max_n, beta } => chrf(&p, &g, max_n, beta),
            SimilarityKind::EmbeddingCosine => match (self.embeddings.get(gold), self.embeddings.get(pred)) {
                (Some(a), Some(b)) => cosine(a, b).clamp(0.0, 1.0),
                _ => 0.0,
            },
        }
    }
}
