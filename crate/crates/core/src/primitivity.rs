//! Boolean pattern algebra and sequential primitivity indices.
//!
//! A nonnegative product is positive exactly where the boolean product of
//! the factors' zero patterns is true, so every positivity question about
//! products reduces to patterns.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::generators::MatrixProcess;
use crate::matrix::NonNegMatrix;
use crate::stats::fit_line;

/// Default cap on distinct reachable states in [`is_family_primitive`].
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Default cap on the number of factors when sampling ψ or ρ.
pub const DEFAULT_INDEX_CAP: u64 = 100_000;

/// `p × p` booleans, one bitset per row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoolPattern {
    p: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BoolPattern {
    pub fn zeros(p: usize) -> Self {
        let words = p.div_ceil(64).max(1);
        BoolPattern { p, words, bits: vec![0; p * words] }
    }

    pub fn identity(p: usize) -> Self {
        let mut b = Self::zeros(p);
        (0..p).for_each(|i| b.set(i, i, true));
        b
    }

    pub fn full(p: usize) -> Self {
        let mut b = Self::zeros(p);
        for i in 0..p {
            for j in 0..p {
                b.set(i, j, true);
            }
        }
        b
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let p = rows.len();
        let mut b = Self::zeros(p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                b.set(i, j, v);
            }
        }
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        let w = &mut self.bits[i * self.words + j / 64];
        if v {
            *w |= 1 << (j % 64);
        } else {
            *w &= !(1 << (j % 64));
        }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    fn last_word_mask(&self) -> u64 {
        match self.p % 64 {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    /// Every entry true.
    pub fn is_full(&self) -> bool {
        let last = self.last_word_mask();
        (0..self.p).all(|i| {
            let row = self.row(i);
            row[..self.words - 1].iter().all(|&w| w == u64::MAX) && row[self.words - 1] == last
        })
    }

    /// No zero row and no zero column.
    pub fn is_allowable(&self) -> bool {
        let mut cols = vec![0u64; self.words];
        for i in 0..self.p {
            let row = self.row(i);
            if row.iter().all(|&w| w == 0) {
                return false;
            }
            cols.iter_mut().zip(row).for_each(|(c, w)| *c |= w);
        }
        self.p == 0
            || (cols[..self.words - 1].iter().all(|&w| w == u64::MAX) && cols[self.words - 1] == self.last_word_mask())
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        (0..self.p).map(|i| (0..self.p).map(|j| self.get(i, j)).collect()).collect()
    }

    fn product_into(&self, other: &BoolPattern, out: &mut BoolPattern) {
        out.bits.iter_mut().for_each(|w| *w = 0);
        for i in 0..self.p {
            for k in 0..self.p {
                if self.get(i, k) {
                    let (dst, src) = (i * self.words, k * self.words);
                    for w in 0..self.words {
                        out.bits[dst + w] |= other.bits[src + w];
                    }
                }
            }
        }
    }
}

/// `γ(A)`: true exactly at the positive entries.
pub fn pattern_of(a: &NonNegMatrix) -> BoolPattern {
    let p = a.dim();
    let mut b = BoolPattern::zeros(p);
    for i in 0..p {
        for (j, &v) in a.row(i).iter().enumerate() {
            if v > 0.0 {
                b.set(i, j, true);
            }
        }
    }
    b
}

/// Boolean product `(PQ)_ij = OR_k (P_ik AND Q_kj)`.
pub fn bool_product(p: &BoolPattern, q: &BoolPattern) -> Result<BoolPattern> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    let mut out = BoolPattern::zeros(p.dim());
    p.product_into(q, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrimitivityReport {
    pub family_primitive: bool,
    /// Family indices in application order: the product is
    /// `γ(A_{w_last}) ⋯ γ(A_{w_1})`. A shortest such word.
    pub witness_word: Option<Vec<usize>>,
    pub states_explored: usize,
    pub capped: bool,
}

/// Replays a word in application order and returns its product pattern.
pub fn replay_word(patterns: &[BoolPattern], word: &[usize]) -> Result<BoolPattern> {
    let first = patterns.first().ok_or(Error::EmptyFamily)?;
    let mut acc = BoolPattern::identity(first.dim());
    for &k in word {
        let f = patterns.get(k).ok_or_else(|| invalid(format!("word index {k} outside the family")))?;
        acc = bool_product(f, &acc)?;
    }
    Ok(acc)
}

/// Breadth-first search over the semigroup of boolean products generated
/// by `patterns`, stopping at the all-true pattern or after `state_cap`
/// distinct states.
pub fn is_family_primitive(patterns: &[BoolPattern], state_cap: usize) -> Result<PrimitivityReport> {
    let first = patterns.first().ok_or(Error::EmptyFamily)?;
    let p = first.dim();
    if let Some(bad) = patterns.iter().find(|q| q.dim() != p) {
        return Err(Error::DimensionMismatch { expected: p, got: bad.dim() });
    }
    if let Some(k) = patterns.iter().position(|q| !q.is_allowable()) {
        return Err(invalid(format!("family member {k} is not allowable")));
    }
    // parent link: state -> (previous state id, generator applied last)
    let mut ids: HashMap<BoolPattern, usize> = HashMap::new();
    let mut parents: Vec<(Option<usize>, usize)> = Vec::new();
    let mut states: Vec<BoolPattern> = Vec::new();
    let mut queue = VecDeque::new();
    let mut found = None;
    let mut capped = false;
    let witness = |parents: &[(Option<usize>, usize)], mut id: usize| {
        let mut word = Vec::new();
        loop {
            let (prev, g) = parents[id];
            word.push(g);
            match prev {
                Some(q) => id = q,
                None => break,
            }
        }
        word.reverse();
        word
    };
    'outer: for (g, pat) in patterns.iter().enumerate() {
        if ids.contains_key(pat) {
            continue;
        }
        if states.len() >= state_cap {
            capped = true;
            break;
        }
        let id = states.len();
        ids.insert(pat.clone(), id);
        states.push(pat.clone());
        parents.push((None, g));
        if pat.is_full() {
            found = Some(id);
            break 'outer;
        }
        queue.push_back(id);
    }
    let mut next = BoolPattern::zeros(p);
    while found.is_none() && !capped {
        let Some(id) = queue.pop_front() else { break };
        for (g, pat) in patterns.iter().enumerate() {
            pat.product_into(&states[id], &mut next);
            if ids.contains_key(&next) {
                continue;
            }
            if states.len() >= state_cap {
                capped = true;
                break;
            }
            let nid = states.len();
            ids.insert(next.clone(), nid);
            states.push(next.clone());
            parents.push((Some(id), g));
            if next.is_full() {
                found = Some(nid);
                break;
            }
            queue.push_back(nid);
        }
    }
    Ok(PrimitivityReport {
        family_primitive: found.is_some(),
        witness_word: found.map(|id| witness(&parents, id)),
        states_explored: states.len(),
        capped: capped && found.is_none(),
    })
}

fn alphabet_patterns(process: &MatrixProcess) -> Vec<BoolPattern> {
    process.alphabet().iter().map(pattern_of).collect()
}

/// Draws ψ for the current position of the process: the number of fresh
/// emissions whose left-multiplied pattern product first becomes
/// all-true. The emissions are consumed.
pub fn sample_forward_index(process: &mut MatrixProcess, cap: u64) -> Result<u64> {
    ForwardSampler::new(process, cap).sample(process)
}

/// Forward index sampler with the alphabet patterns precomputed.
#[derive(Debug, Clone)]
pub struct ForwardSampler {
    patterns: Vec<BoolPattern>,
    cap: u64,
}

impl ForwardSampler {
    pub fn new(process: &MatrixProcess, cap: u64) -> Self {
        ForwardSampler { patterns: alphabet_patterns(process), cap }
    }

    pub fn sample(&self, process: &mut MatrixProcess) -> Result<u64> {
        let p = process.dim();
        let mut acc = BoolPattern::identity(p);
        let mut next = BoolPattern::zeros(p);
        for k in 1..=self.cap {
            let s = process.next_symbol();
            self.patterns[s].product_into(&acc, &mut next);
            std::mem::swap(&mut acc, &mut next);
            if acc.is_full() {
                return Ok(k);
            }
        }
        Err(Error::CapExceeded { cap: self.cap })
    }
}

/// Backward index sampler: keeps the last `cap` emitted symbols so that
/// ρ can be read off at any end point.
#[derive(Debug, Clone)]
pub struct BackwardSampler {
    patterns: Vec<BoolPattern>,
    cap: u64,
    history: VecDeque<usize>,
}

impl BackwardSampler {
    pub fn new(process: &MatrixProcess, cap: u64) -> Self {
        BackwardSampler {
            patterns: alphabet_patterns(process),
            cap,
            history: VecDeque::with_capacity(cap.min(1 << 20) as usize),
        }
    }

    /// Emits `steps` more matrices into the history.
    pub fn advance(&mut self, process: &mut MatrixProcess, steps: u64) {
        for _ in 0..steps {
            if self.history.len() as u64 == self.cap {
                self.history.pop_front();
            }
            self.history.push_back(process.next_symbol());
        }
    }

    /// ρ at the most recent emission: the least `ρ` with
    /// `γ(A_end) ⋯ γ(A_{end−ρ+1})` all-true.
    pub fn index_at_latest(&self) -> Result<u64> {
        let patterns = &self.patterns;
        let mut it = self.history.iter().rev();
        let Some(&last) = it.next() else {
            return Err(Error::CapExceeded { cap: self.cap });
        };
        let mut acc = patterns[last].clone();
        if acc.is_full() {
            return Ok(1);
        }
        let mut next = BoolPattern::zeros(acc.dim());
        for (k, &s) in it.enumerate() {
            acc.product_into(&patterns[s], &mut next);
            std::mem::swap(&mut acc, &mut next);
            if acc.is_full() {
                return Ok(k as u64 + 2);
            }
        }
        Err(Error::CapExceeded { cap: self.cap })
    }

    /// ρ at the emission `stride` steps after the current one.
    pub fn sample(&mut self, process: &mut MatrixProcess, stride: u64) -> Result<u64> {
        self.advance(process, stride);
        self.index_at_latest()
    }
}

/// Positions `end = stride, 2·stride, …` are sampled by [`sample_backward_indices`].
pub const DEFAULT_BACKWARD_STRIDE: u64 = 1024;

/// `count` draws of ρ taken `stride` emissions apart.
pub fn sample_backward_indices(process: &mut MatrixProcess, count: usize, stride: u64, cap: u64) -> Result<Vec<u64>> {
    let mut sampler = BackwardSampler::new(process, cap);
    (0..count).map(|_| sampler.sample(process, stride)).collect()
}

/// `count` consecutive, non-overlapping draws of ψ.
pub fn sample_forward_indices(process: &mut MatrixProcess, count: usize, cap: u64) -> Result<Vec<u64>> {
    let sampler = ForwardSampler::new(process, cap);
    (0..count).map(|_| sampler.sample(process)).collect()
}

/// ρ at position `end` (1-based) of a fresh process.
pub fn sample_backward_index(process: &mut MatrixProcess, end: u64, cap: u64) -> Result<u64> {
    if end <= process.position() {
        return Err(invalid("end must lie after the current position"));
    }
    let mut sampler = BackwardSampler::new(process, cap);
    sampler.advance(process, end - process.position());
    sampler.index_at_latest()
}

/// Empirical survival `P(X > x)` at each integer `x` from the sample
/// minimum upward while at least `min_count` samples exceed `x`.
pub fn survival_curve(samples: &[u64], min_count: usize) -> Vec<(u64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let Some(&lo) = sorted.first() else { return Vec::new() };
    let mut out = Vec::new();
    let mut x = lo;
    loop {
        let above = n - sorted.partition_point(|&v| v <= x);
        if above < min_count.max(1) {
            break;
        }
        out.push((x, above as f64 / n as f64));
        x += 1;
    }
    out
}

/// Linear fit of the log-survival curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    /// Slope of `ln P(X > x)` in `x`; `−ln` of the geometric ratio.
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
    pub points: usize,
    pub x_min: u64,
    pub x_max: u64,
}

/// Minimum number of exceedances kept at the right end of a tail fit; one
/// keeps the whole observed range.
pub const DEFAULT_TAIL_MIN_COUNT: usize = 1;

/// Fit over every `x` from the sample minimum to the last `x` with at
/// least `min_count` exceedances.
pub fn tail_fit(samples: &[u64], min_count: usize) -> Result<TailFit> {
    tail_fit_from(samples, 0, min_count)
}

/// As [`tail_fit`], restricted to `x ≥ x_from`.
pub fn tail_fit_from(samples: &[u64], x_from: u64, min_count: usize) -> Result<TailFit> {
    let curve: Vec<_> = survival_curve(samples, min_count).into_iter().filter(|&(x, _)| x >= x_from).collect();
    if curve.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: curve.len() });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = curve.iter().map(|&(x, s)| (x as f64, s.ln())).unzip();
    let f = fit_line(&x, &y);
    Ok(TailFit {
        slope: f.slope,
        intercept: f.intercept,
        correlation: f.correlation,
        points: f.points,
        x_min: curve[0].0,
        x_max: curve[curve.len() - 1].0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::ProcessSpec;

    fn pat(rows: &[&[u8]]) -> BoolPattern {
        BoolPattern::from_rows(&rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn pattern_examples() {
        let a = NonNegMatrix::from_rows(&[[0.5, 0.0], [0.2, 1.0]]).unwrap();
        assert_eq!(pattern_of(&a), pat(&[&[1, 0], &[1, 1]]));
        assert_eq!(pattern_of(&NonNegMatrix::new(2, vec![0.0; 4]).unwrap()).count_ones(), 0);
        assert!(pattern_of(&NonNegMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap()).is_full());
    }

    #[test]
    fn product_examples() {
        let fib = pat(&[&[1, 1], &[1, 0]]);
        assert_eq!(bool_product(&fib, &BoolPattern::identity(2)).unwrap(), fib);
        assert!(bool_product(&fib, &fib).unwrap().is_full());
        assert!(bool_product(&fib, &BoolPattern::identity(3)).is_err());
        let wide = BoolPattern::full(130);
        assert!(wide.is_full());
        assert!(bool_product(&BoolPattern::identity(130), &wide).unwrap().is_full());
    }

    #[test]
    fn family_examples() {
        let fib = pat(&[&[1, 1], &[1, 0]]);
        let r = is_family_primitive(std::slice::from_ref(&fib), DEFAULT_STATE_CAP).unwrap();
        assert!(r.family_primitive);
        assert_eq!(r.witness_word.as_deref(), Some(&[0, 0][..]));

        let swap = pat(&[&[0, 1], &[1, 0]]);
        let r = is_family_primitive(&[swap], DEFAULT_STATE_CAP).unwrap();
        assert!(!r.family_primitive);
        assert!(!r.capped);
        assert_eq!(r.states_explored, 2);
        assert!(r.witness_word.is_none());

        assert_eq!(is_family_primitive(&[], 10), Err(Error::EmptyFamily));
        assert!(is_family_primitive(&[pat(&[&[1, 1], &[0, 0]])], 10).is_err());
    }

    #[test]
    fn cap_is_reported() {
        // a 6-cycle permutation reaches 6 states and never becomes positive
        let mut cyc = BoolPattern::zeros(6);
        (0..6).for_each(|i| cyc.set(i, (i + 1) % 6, true));
        let r = is_family_primitive(&[cyc], 3).unwrap();
        assert!(r.capped && !r.family_primitive);
    }

    #[test]
    fn index_examples() {
        let pos = NonNegMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let fib = NonNegMatrix::from_rows(&[[1.0, 1.0], [1.0, 0.0]]).unwrap();
        let swap = NonNegMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let mut p = ProcessSpec::Constant(pos.clone()).build(0, 0).unwrap();
        assert_eq!(sample_forward_index(&mut p, 10).unwrap(), 1);
        let mut p = ProcessSpec::Constant(pos).build(0, 0).unwrap();
        assert_eq!(sample_backward_index(&mut p, 5, 10).unwrap(), 1);
        let mut p = ProcessSpec::Constant(fib.clone()).build(0, 0).unwrap();
        assert_eq!(sample_forward_index(&mut p, 10).unwrap(), 2);
        let mut p = ProcessSpec::Constant(fib).build(0, 0).unwrap();
        assert_eq!(sample_backward_index(&mut p, 5, 10).unwrap(), 2);
        let mut p = ProcessSpec::Constant(swap).build(0, 0).unwrap();
        assert_eq!(sample_forward_index(&mut p, 50), Err(Error::CapExceeded { cap: 50 }));
    }

    #[test]
    fn survival_of_geometric_samples() {
        // P(X > x) = 2^-x exactly for this multiset
        let mut s = Vec::new();
        for x in 1..=12u64 {
            s.extend(std::iter::repeat_n(x, 1usize << (12 - x)));
        }
        s.push(12);
        let fit = tail_fit(&s, 1).unwrap();
        assert!((fit.slope + 2f64.ln()).abs() < 1e-12, "{fit:?}");
        assert!(fit.correlation < -0.9999);
    }
}
