//! Nonnegative vectors and the distances used on them.

use crate::error::{Error, Result};

/// Tolerance on `Σ ξ = 1` when a probability vector is required.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// A vector with finite nonnegative entries, not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NonNegVector(Vec<f64>);

impl NonNegVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("empty vector".into()));
        }
        if let Some((index, &value)) = entries.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidEntry { index, value });
        }
        if entries.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateNormalization);
        }
        Ok(NonNegVector(entries))
    }

    pub fn ones(dim: usize) -> Self {
        NonNegVector(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }
}

impl AsRef<[f64]> for NonNegVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `v / (1ᵀ v)`.
pub fn normalize_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::DegenerateNormalization);
    }
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateNormalization);
    }
    Ok(v.iter().map(|x| x / total).collect())
}

fn check_probability(v: &[f64]) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|x| *x < 0.0 || !x.is_finite()) || (sum - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::NotProbability { sum });
    }
    Ok(())
}

fn check_same_dim(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: a.len(), got: b.len() })
    }
}

/// Total variation distance `½ Σ |ξ_i − η_i|` between probability vectors.
pub fn tv_distance(xi: &[f64], eta: &[f64]) -> Result<f64> {
    check_same_dim(xi, eta)?;
    check_probability(xi)?;
    check_probability(eta)?;
    Ok(0.5 * xi.iter().zip(eta).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Hilbert projective distance `log max_{k,l} (x_k/y_k)/(x_l/y_l)`.
///
/// Computed as the spread of `log x_k − log y_k`, which is invariant under
/// positive rescaling of either argument.
pub fn hilbert_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_dim(x, y)?;
    if x.is_empty() || x.iter().chain(y).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::NotStrictlyPositive);
    }
    let (lo, hi) = x
        .iter()
        .zip(y)
        .map(|(a, b)| a.ln() - b.ln())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    Ok(hi - lo)
}

/// `|x ∧ y|` in the Gram-determinant norm, `sqrt(|x|²|y|² − ⟨x,y⟩²)`.
///
/// Evaluated through the Lagrange identity as the root sum of squared 2x2
/// minors, which avoids the cancellation of the Gram form for nearly
/// collinear arguments.
pub fn wedge_magnitude(x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_dim(x, y)?;
    let mut acc = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let m = x[i] * y[j] - x[j] * y[i];
            acc += m * m;
        }
    }
    Ok(acc.sqrt())
}
