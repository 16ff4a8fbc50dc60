use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sinusoidal encoding of the diffusion step index.
///
/// Deterministic, distinct for every index in the ranges used here
/// (frequencies follow the usual `10000^(-2k/dim)` ladder).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimestepEmbedding {
    dim: usize,
}

impl TimestepEmbedding {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 || dim % 2 != 0 {
            return Err(Error::Config(format!(
                "timestep embedding dim must be even and >= 2, got {dim}"
            )));
        }
        Ok(TimestepEmbedding { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encode(&self, i: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        let half = self.dim / 2;
        for k in 0..half {
            let freq = 10000f64.powf(-(2.0 * k as f64) / self.dim as f64);
            let x = i as f64 * freq;
            out.push(x.sin());
            out.push(x.cos());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_distinct() {
        let emb = TimestepEmbedding::new(16).unwrap();
        let codes: Vec<Vec<f64>> = (1..=10).map(|i| emb.encode(i)).collect();
        assert_eq!(codes[0], emb.encode(1));
        for a in 0..codes.len() {
            for b in a + 1..codes.len() {
                assert_ne!(codes[a], codes[b], "steps {} and {} collide", a + 1, b + 1);
            }
        }
    }

    #[test]
    fn rejects_odd_or_tiny_dims() {
        assert!(TimestepEmbedding::new(0).is_err());
        assert!(TimestepEmbedding::new(7).is_err());
    }
}
