//! Hashed random-projection text embedder.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::TextEmbedding;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::text::tokenize;

/// Produces token embeddings for the fusion model.
pub trait TextEmbedder<T: Scalar> {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<TextEmbedding<T>>;
}

/// Maps each content token to a fixed pseudo-random unit vector keyed by
/// `(surface, seed)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedEmbedder {
    pub d: usize,
    pub seed: u64,
}

impl HashedEmbedder {
    pub fn new(d: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be >= 1".into()));
        }
        Ok(Self { d, seed })
    }

    /// Unit vector for one token surface, computed in f64.
    pub fn token_vector(&self, surface: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(surface.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(key);
        loop {
            let v: Vec<f64> = (0..self.d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}

impl<T: Scalar> TextEmbedder<T> for HashedEmbedder {
    fn dim(&self) -> usize {
        self.d
    }

    fn embed(&self, text: &str) -> Result<TextEmbedding<T>> {
        let surfaces: Vec<String> = tokenize(text)
            .into_iter()
            .filter(|t| t.is_content)
            .map(|t| t.surface)
            .collect();
        if surfaces.is_empty() {
            return Err(Error::EmptyInput("text has no content tokens to embed".into()));
        }
        let mut tokens = Array2::<T>::zeros((surfaces.len(), self.d));
        for (i, s) in surfaces.iter().enumerate() {
            for (j, x) in self.token_vector(s).into_iter().enumerate() {
                tokens[[i, j]] = T::of(x);
            }
        }
        Ok(TextEmbedding {
            tokens,
            token_surfaces: surfaces,
        })
    }
}

/// Convenience wrapper over [`HashedEmbedder`].
pub fn embed_text<T: Scalar>(text: &str, d: usize, seed: u64) -> Result<TextEmbedding<T>> {
    HashedEmbedder::new(d, seed)?.embed(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a: TextEmbedding<f64> = embed_text("hip pain at night", 16, 3).unwrap();
        let b: TextEmbedding<f64> = embed_text("hip pain at night", 16, 3).unwrap();
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.token_surfaces, ["hip", "pain", "night"]);
        let c: TextEmbedding<f64> = embed_text("hip pain at night", 16, 4).unwrap();
        assert_ne!(a.tokens, c.tokens);
    }

    #[test]
    fn repeated_token_repeats_row() {
        let e: TextEmbedding<f64> = embed_text("fracture fracture", 8, 1).unwrap();
        assert_eq!(e.tokens.row(0), e.tokens.row(1));
    }

    #[test]
    fn rows_are_unit_norm() {
        let e: TextEmbedding<f64> = embed_text("distal radius fracture cast weeks", 32, 9).unwrap();
        for row in e.tokens.rows() {
            let n = row.dot(&row).sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn stopword_only_text_is_an_error() {
        assert!(embed_text::<f64>("of the", 8, 1).is_err());
        assert!(embed_text::<f32>("", 8, 1).is_err());
        assert!(HashedEmbedder::new(0, 1).is_err());
    }
}
