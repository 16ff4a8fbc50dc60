use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precomputed β, α, ᾱ sequences for an N-step diffusion chain.
///
/// `β_i = 1 − exp(−β_min/N − (2i−1)/(2N²)·(β_max − β_min))` for `i = 1..N`,
/// the variance-preserving schedule. β is strictly increasing (constant in
/// the degenerate `β_max == β_min` case), ᾱ strictly decreasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceSchedule {
    n: usize,
    beta_min: f64,
    beta_max: f64,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl VarianceSchedule {
    pub fn build(n: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::Config("schedule needs at least one step".into()));
        }
        if !(beta_min > 0.0) || !beta_min.is_finite() || !beta_max.is_finite() {
            return Err(Error::Config(format!(
                "beta range must be finite and positive, got [{beta_min}, {beta_max}]"
            )));
        }
        if beta_max < beta_min {
            return Err(Error::Config(format!(
                "beta_max {beta_max} must be >= beta_min {beta_min}"
            )));
        }

        let nf = n as f64;
        let mut beta = Vec::with_capacity(n);
        let mut alpha = Vec::with_capacity(n);
        let mut alpha_bar = Vec::with_capacity(n);
        let mut prod = 1.0;
        for i in 1..=n {
            let exponent = -beta_min / nf - (2.0 * i as f64 - 1.0) / (2.0 * nf * nf) * (beta_max - beta_min);
            let b = 1.0 - exponent.exp();
            if !(0.0 < b && b < 1.0) {
                return Err(Error::Config(format!("beta_{i} = {b} outside (0, 1)")));
            }
            let a = 1.0 - b;
            prod *= a;
            beta.push(b);
            alpha.push(a);
            alpha_bar.push(prod);
        }
        Ok(VarianceSchedule {
            n,
            beta_min,
            beta_max,
            beta,
            alpha,
            alpha_bar,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    fn check_index(&self, i: usize) -> Result<usize> {
        if i < 1 || i > self.n {
            return Err(Error::StepIndex { index: i, max: self.n });
        }
        Ok(i - 1)
    }

    /// 1-based accessors matching the chain indexing `i ∈ {1..N}`.
    pub fn beta(&self, i: usize) -> f64 {
        self.beta[i - 1]
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.alpha[i - 1]
    }

    pub fn alpha_bar(&self, i: usize) -> f64 {
        self.alpha_bar[i - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub(crate) fn checked_index(&self, i: usize) -> Result<usize> {
        self.check_index(i)
    }
}

/// Closed-form forward noising: `a_i = sqrt(ᾱ_i)·a0 + sqrt(1−ᾱ_i)·eps`.
///
/// The noise is caller-supplied so sampling stays deterministic under test.
pub fn forward_noise(a0: &[f64], i: usize, eps: &[f64], schedule: &VarianceSchedule) -> Result<Vec<f64>> {
    let idx = schedule.checked_index(i)?;
    if a0.len() != eps.len() {
        return Err(Error::Dimension(format!(
            "action length {} does not match noise length {}",
            a0.len(),
            eps.len()
        )));
    }
    let ab = schedule.alpha_bar[idx];
    let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(a0
        .iter()
        .zip(eps)
        .map(|(a, e)| signal * a + noise * e)
        .collect())
}
