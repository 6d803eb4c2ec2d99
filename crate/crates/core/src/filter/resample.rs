use rand::Rng;

use crate::{Error, Real, Result};

/// Systematic resampling: `n_out` evenly spaced pointers offset by one
/// uniform draw `u ∈ [0, 1)` walk the cumulative weights.
pub fn systematic_resample<T: Real>(weights: &[T], n_out: usize, u: f64) -> Result<Vec<usize>> {
    let total = validate(weights)?;
    let step = total / n_out as f64;
    let mut out = Vec::with_capacity(n_out);
    let mut cumulative = 0.0;
    let mut idx = 0usize;
    let last_positive = weights.iter().rposition(|w| w.as_f64() > 0.0).unwrap_or(0);
    for k in 0..n_out {
        let pointer = (u + k as f64) * step;
        while idx < last_positive && cumulative + weights[idx].as_f64() <= pointer {
            cumulative += weights[idx].as_f64();
            idx += 1;
        }
        out.push(idx);
    }
    Ok(out)
}

/// [`systematic_resample`] with as many outputs as weights.
pub fn resample<T: Real, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> Result<Vec<usize>> {
    let u: f64 = rng.random();
    systematic_resample(weights, weights.len(), u)
}

/// Effective sample size `(Σw)² / Σw²`.
pub fn effective_sample_size<T: Real>(weights: &[T]) -> f64 {
    let (s, s2) = weights
        .iter()
        .fold((0.0, 0.0), |(s, s2), w| (s + w.as_f64(), s2 + w.as_f64().powi(2)));
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

fn validate<T: Real>(weights: &[T]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::DegenerateWeights("no particles".into()));
    }
    let mut total = 0.0;
    for (k, w) in weights.iter().enumerate() {
        let w = w.as_f64();
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::DegenerateWeights(format!("weight {k} is {w}")));
        }
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights("all weights are zero".into()));
    }
    Ok(total)
}
