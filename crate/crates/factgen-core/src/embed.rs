//! Embedding vectors and cosine similarity.
//!
//! Dot products use compensated (Kahan) summation: assignment thresholds
//! near 0.945 sit in a dense similarity regime for normalized embedding
//! spaces, so the last few bits matter.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_id: String) -> Self {
        Self { values, model_id }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(kahan_dot(&self.values, &self.values))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityError {
    DimMismatch { left: usize, right: usize },
    DegenerateVector,
}

impl fmt::Display for SimilarityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilarityError::DimMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            SimilarityError::DegenerateVector => write!(f, "zero-norm vector"),
        }
    }
}

fn kahan_dot(u: &[f64], v: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (a, b) in u.iter().zip(v.iter()) {
        let term = a * b - comp;
        let total = sum + term;
        comp = (total - sum) - term;
        sum = total;
    }
    sum
}

/// Cosine similarity in [-1, 1].
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, SimilarityError> {
    if u.dim() != v.dim() {
        return Err(SimilarityError::DimMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let nu = kahan_dot(&u.values, &u.values);
    let nv = kahan_dot(&v.values, &v.values);
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::DegenerateVector);
    }
    let cos = kahan_dot(&u.values, &v.values) / (libm::sqrt(nu) * libm::sqrt(nv));
    Ok(cos.clamp(-1.0, 1.0))
}
