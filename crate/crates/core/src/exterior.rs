//! Second exterior power: 2x2 minors of matrices and wedge products of
//! vector pairs.
//!
//! Coordinates of `∧²ℝᵖ` are indexed by pairs `i < j` in lexicographic
//! order. For vectors, `(x ∧ y)_{ij} = x_i y_j − x_j y_i`; for a matrix,
//! the compound `C(A)_{(ij),(kl)} = A_ik A_jl − A_il A_jk`. Cauchy–Binet
//! gives `C(AB) = C(A) C(B)` and `(Ax) ∧ (Ay) = C(A)(x ∧ y)`.
//!
//! Tracking minors through the compound keeps them accurate relative to
//! their own size. Forming them from an already-computed product instead
//! would cancel catastrophically once the product is close to rank one,
//! which is exactly the regime where contraction rates are measured.

use crate::logscale::ScaledVec;
use crate::matrix::NonNegMatrix;

/// Lexicographic enumeration of index pairs `i < j < p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairIndex {
    p: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairIndex {
    pub fn new(p: usize) -> Self {
        let pairs = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
        PairIndex { p, pairs }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// `p(p−1)/2`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Position of the unordered pair `{i, j}` (`i != j`).
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        // rows before a contribute (p-1) + (p-2) + ... + (p-a)
        a * (2 * self.p - a - 1) / 2 + (b - a - 1)
    }

    /// `(x ∧ y)_{ij}` read with orientation: negated when `i > j`.
    #[inline]
    pub fn oriented(&self, z: &[f64], i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => z[self.position(i, j)],
            std::cmp::Ordering::Greater => -z[self.position(j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    pub fn wedge(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.pairs.iter().map(|&(i, j)| x[i] * y[j] - x[j] * y[i]).collect()
    }

    /// Dense row-major compound matrix `C(A)`, of side `len()`.
    pub fn compound(&self, a: &NonNegMatrix) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n * n];
        self.compound_into(a, &mut out);
        out
    }

    pub fn compound_into(&self, a: &NonNegMatrix, out: &mut [f64]) {
        let n = self.len();
        for (r, &(i, j)) in self.pairs.iter().enumerate() {
            let (ri, rj) = (a.row(i), a.row(j));
            let row = &mut out[r * n..(r + 1) * n];
            for (c, &(k, l)) in self.pairs.iter().enumerate() {
                row[c] = ri[k] * rj[l] - ri[l] * rj[k];
            }
        }
    }
}

/// Signed square matrix product `out = a * b` (row-major, side `n`).
pub(crate) fn signed_mul_into(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..n {
        let out_row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik != 0.0 {
                for (o, bkj) in out_row.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                    *o += aik * bkj;
                }
            }
        }
    }
}

/// `out = C v` for a dense side-`n` matrix.
pub(crate) fn signed_apply_into(n: usize, c: &[f64], v: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(c.chunks_exact(n)) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// The wedge `x ∧ y` of a pair evolving under `x ← A x`, `y ← A y`, kept
/// in log-scaled form.
#[derive(Debug, Clone)]
pub struct WedgeTracker {
    index: PairIndex,
    z: ScaledVec,
    compound: Vec<f64>,
    scratch: Vec<f64>,
}

impl WedgeTracker {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let index = PairIndex::new(x.len());
        let z = ScaledVec::new(index.wedge(x, y));
        let n = index.len();
        WedgeTracker { index, z, compound: vec![0.0; n * n], scratch: vec![0.0; n] }
    }

    pub fn index(&self) -> &PairIndex {
        &self.index
    }

    pub fn scaled(&self) -> &ScaledVec {
        &self.z
    }

    pub fn apply(&mut self, a: &NonNegMatrix) {
        let n = self.index.len();
        self.index.compound_into(a, &mut self.compound);
        signed_apply_into(n, &self.compound, &self.z.values, &mut self.scratch);
        std::mem::swap(&mut self.z.values, &mut self.scratch);
        self.z.renormalize();
    }

    /// `ln |x ∧ y|` in the Gram-determinant norm.
    pub fn ln_magnitude(&self) -> f64 {
        self.z.ln_norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pair_positions_are_lexicographic() {
        for p in 2..8 {
            let idx = PairIndex::new(p);
            assert_eq!(idx.len(), p * (p - 1) / 2);
            for (n, &(i, j)) in idx.pairs().iter().enumerate() {
                assert_eq!(idx.position(i, j), n);
                assert_eq!(idx.position(j, i), n);
            }
        }
    }

    #[test]
    fn cauchy_binet() {
        let a = NonNegMatrix::from_rows(&[[0.3, 1.2, 0.0], [2.0, 0.1, 0.7], [0.5, 0.5, 0.9]]).unwrap();
        let b = NonNegMatrix::from_rows(&[[1.0, 0.4, 0.2], [0.0, 1.5, 0.3], [0.8, 0.0, 1.1]]).unwrap();
        let idx = PairIndex::new(3);
        let ab = idx.compound(&a.mul(&b).unwrap());
        let mut prod = vec![0.0; 9];
        signed_mul_into(3, &idx.compound(&a), &idx.compound(&b), &mut prod);
        for (u, v) in ab.iter().zip(&prod) {
            assert_relative_eq!(u, v, epsilon = 1e-14);
        }
    }

    #[test]
    fn tracker_follows_products() {
        let a = NonNegMatrix::diagonal(&[2.0, 3.0]).unwrap();
        let mut t = WedgeTracker::new(&[1.0, 0.0], &[0.0, 1.0]);
        for _ in 0..1000 {
            t.apply(&a);
        }
        assert_relative_eq!(t.ln_magnitude(), 1000.0 * 6f64.ln(), max_relative = 1e-13);
        let oriented = t.index().oriented(&t.scaled().values, 1, 0);
        assert!(oriented < 0.0);
    }
}
