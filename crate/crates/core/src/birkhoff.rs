//! Birkhoff contraction coefficient of nonnegative matrices.
//!
//! For a strictly positive `A`,
//! `φ(A) = log max_{i,j,k,l} (A_ik A_jl)/(A_jk A_il)` is the largest Hilbert
//! distance between two rows, and `τ(A) = tanh(φ(A)/4)`. Any zero entry
//! makes `φ = +∞` and `τ = 1`: such a matrix does not strictly contract the
//! Hilbert metric.
//!
//! The row-allowable but not column-allowable case is accepted; zero
//! columns do not enter row cross-ratios, but `τ` is then not the Hilbert
//! operator norm (`Ax` need not be positive). Callers that need that
//! interpretation should check [`NonNegMatrix::is_allowable`].

use crate::error::{Error, Result};
use crate::exterior::{signed_mul_into, PairIndex};
use crate::matrix::{mul_into, NonNegMatrix};

fn first_zero_row(a: &NonNegMatrix) -> Option<usize> {
    (0..a.dim()).find(|&i| a.row(i).iter().all(|&v| v == 0.0))
}

/// `φ(A)`, or `+∞` when `A` has a zero entry.
pub fn birkhoff_phi(a: &NonNegMatrix) -> Result<f64> {
    if let Some(row) = first_zero_row(a) {
        return Err(Error::ZeroRow { row });
    }
    if !a.is_strictly_positive() {
        return Ok(f64::INFINITY);
    }
    let p = a.dim();
    let logs: Vec<f64> = a.as_slice().iter().map(|v| v.ln()).collect();
    let mut phi: f64 = 0.0;
    for i in 0..p {
        for j in i + 1..p {
            let (lo, hi) = (0..p)
                .map(|k| logs[i * p + k] - logs[j * p + k])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
            phi = phi.max(hi - lo);
        }
    }
    Ok(phi)
}

/// `τ(A) = tanh(φ(A)/4) ∈ [0, 1]`.
pub fn birkhoff_tau(a: &NonNegMatrix) -> Result<f64> {
    birkhoff_phi(a).map(tau_from_phi)
}

pub fn tau_from_phi(phi: f64) -> f64 {
    if phi.is_infinite() {
        1.0
    } else {
        (phi / 4.0).tanh()
    }
}

/// `ln τ` for a given `φ`; accurate for tiny `φ` where `τ ≈ φ/4`.
pub fn ln_tau_from_phi(phi: f64) -> f64 {
    if phi.is_infinite() {
        0.0
    } else if phi <= 0.0 {
        f64::NEG_INFINITY
    } else {
        (phi / 4.0).tanh().ln()
    }
}

/// A running product `M = A_m ⋯ A_1` carried together with its compound
/// `C(M)`, so that the cross-ratios in `φ(M)` stay accurate when `M` is
/// numerically rank one.
///
/// Each cross-ratio is `1 + C(M)_{(ij),(kl)} / (M_jk M_il)`, so `φ` comes
/// from `log1p` of a ratio whose numerator was never formed by
/// subtraction of nearly equal products.
#[derive(Debug, Clone)]
pub struct BirkhoffProduct {
    index: PairIndex,
    m: Vec<f64>,
    ln_m: f64,
    c: Vec<f64>,
    ln_c: f64,
    step_compound: Vec<f64>,
    scratch_m: Vec<f64>,
    scratch_c: Vec<f64>,
    factors: usize,
}

impl BirkhoffProduct {
    pub fn new(p: usize) -> Self {
        let index = PairIndex::new(p);
        let n = index.len();
        let mut m = vec![0.0; p * p];
        (0..p).for_each(|i| m[i * p + i] = 1.0);
        let mut c = vec![0.0; n * n];
        (0..n).for_each(|i| c[i * n + i] = 1.0);
        BirkhoffProduct {
            index,
            m,
            ln_m: 0.0,
            c,
            ln_c: 0.0,
            step_compound: vec![0.0; n * n],
            scratch_m: vec![0.0; p * p],
            scratch_c: vec![0.0; n * n],
            factors: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    /// `M ← A M`.
    pub fn push(&mut self, a: &NonNegMatrix) -> Result<()> {
        let p = self.dim();
        if a.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: a.dim() });
        }
        mul_into(p, a.as_slice(), &self.m, &mut self.scratch_m);
        std::mem::swap(&mut self.m, &mut self.scratch_m);
        let n = self.index.len();
        if n > 0 {
            self.index.compound_into(a, &mut self.step_compound);
            signed_mul_into(n, &self.step_compound, &self.c, &mut self.scratch_c);
            std::mem::swap(&mut self.c, &mut self.scratch_c);
        }
        self.ln_m += rescale(&mut self.m);
        self.ln_c += rescale(&mut self.c);
        self.factors += 1;
        Ok(())
    }

    /// The product with its entries scaled by `e^{-ln_scale}`.
    pub fn scaled_product(&self) -> (NonNegMatrix, f64) {
        (NonNegMatrix::from_trusted(self.dim(), self.m.clone()), self.ln_m)
    }

    /// `φ(M)`.
    pub fn phi(&self) -> Result<f64> {
        self.ln_phi().map(f64::exp)
    }

    /// `ln φ(M)`; stays finite after `φ` itself would underflow.
    pub fn ln_phi(&self) -> Result<f64> {
        let p = self.dim();
        if let Some(row) = (0..p).find(|&i| self.m[i * p..(i + 1) * p].iter().all(|&v| v == 0.0)) {
            return Err(Error::ZeroRow { row });
        }
        if self.m.contains(&0.0) {
            return Ok(f64::INFINITY);
        }
        let n = self.index.len();
        // true minor / (M_jk M_il) picks up e^{ln_c - 2 ln_m} from the scales
        let shift = self.ln_c - 2.0 * self.ln_m;
        let pairs = self.index.pairs();
        let mut best = f64::NEG_INFINITY;
        for (r, &(i, j)) in pairs.iter().enumerate() {
            for (col, &(k, l)) in pairs.iter().enumerate() {
                let minor = self.c[r * n + col];
                if minor == 0.0 {
                    continue;
                }
                let ln_ratio = minor.abs().ln() + shift - (self.m[j * p + k] * self.m[i * p + l]).ln();
                let ln_term = if ln_ratio < SMALL_LN {
                    // |log1p(r)| = |r| (1 + O(r))
                    ln_ratio
                } else {
                    (minor.signum() * ln_ratio.exp()).ln_1p().abs().ln()
                };
                best = best.max(ln_term);
            }
        }
        Ok(best)
    }

    /// `ln τ(M)`.
    pub fn ln_tau(&self) -> Result<f64> {
        let ln_phi = self.ln_phi()?;
        Ok(if ln_phi < SMALL_LN { ln_phi - 4f64.ln() } else { ln_tau_from_phi(ln_phi.exp()) })
    }
}

const SMALL_LN: f64 = -30.0;

fn rescale(buf: &mut [f64]) -> f64 {
    let m = buf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 && m.is_finite() && m != 1.0 {
        let inv = 1.0 / m;
        buf.iter_mut().for_each(|v| *v *= inv);
        m.ln()
    } else {
        0.0
    }
}
