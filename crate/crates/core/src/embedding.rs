//! Unit-norm embeddings and the embedder interface.

use crate::text::{fnv1a, tokenize};

/// Tolerance on `||v||₂ = 1` for stored vectors.
pub const NORM_TOLERANCE: f32 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedding is not unit norm (norm {0})")]
    NotNormalized(f32),
    #[error("embedder backend failed: {0}")]
    Backend(String),
}

/// Turns text into unit vectors of a fixed dimension.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError>;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f32; 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let tail: f32 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for i in 0..8 {
            acc[i] += ca[i] * cb[i];
        }
    }
    acc.iter().sum::<f32>() + tail
}

pub fn norm(v: &[f32]) -> f32 {
    v.iter().map(|x| x * x).sum::<f32>().sqrt()
}

/// Scales `v` to unit length. Returns false for the zero vector.
pub fn normalize(v: &mut [f32]) -> bool {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    true
}

pub fn check_unit(v: &[f32], dim: usize) -> Result<(), EmbedError> {
    if v.len() != dim {
        return Err(EmbedError::Dimension {
            expected: dim,
            got: v.len(),
        });
    }
    let n = norm(v);
    if (n - 1.0).abs() > NORM_TOLERANCE * 10.0 {
        return Err(EmbedError::NotNormalized(n));
    }
    Ok(())
}

/// Deterministic feature-hashing embedder.
///
/// Each lowercased word contributes a signed unit to one bucket; character
/// trigrams of each word contribute at a lower weight so near-identical
/// spellings land close together. Text without any word maps to a fixed
/// basis vector.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    trigram_weight: f32,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder {
            dim,
            trigram_weight: 0.35,
        }
    }

    fn bump(&self, v: &mut [f32], feature: &[u8], weight: f32) {
        let h = fnv1a(feature);
        let bucket = (h % self.dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign * weight;
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut v = vec![0f32; self.dim];
        for word in tokenize(text) {
            self.bump(&mut v, word.as_bytes(), 1.0);
            let padded: Vec<char> = format!("#{word}#").chars().collect();
            if padded.len() > 3 {
                for w in padded.windows(3) {
                    let tri: String = w.iter().collect();
                    self.bump(&mut v, tri.as_bytes(), self.trigram_weight);
                }
            }
        }
        if !normalize(&mut v) {
            v.iter_mut().for_each(|x| *x = 0.0);
            v[0] = 1.0;
        }
        Ok(v)
    }
}
