//! Stationary random matrix processes `(A_n)`.
//!
//! Every supported kind draws from a finite alphabet of matrices, so a
//! process emits symbols and hands out references into the alphabet. The
//! randomness is a ChaCha8 stream keyed by `(seed, stream)`: output is
//! identical across platforms, and distinct stream ids give independent
//! replicates from one base seed.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::matrix::NonNegMatrix;

/// Tolerance on probability vectors in process configurations.
pub const CONFIG_PROB_TOL: f64 = 1e-12;

/// Default share transferred along an edge (classic push-sum).
pub const DEFAULT_ALPHA: f64 = 0.5;

/// A directed graph without self-loops; edge `(i, j)` means `i` may send to `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    p: usize,
    edges: Vec<(usize, usize)>,
}

impl Digraph {
    pub fn new(p: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if p == 0 {
            return Err(invalid("graph needs at least one node"));
        }
        let mut seen = HashSet::new();
        for &(i, j) in &edges {
            if i >= p || j >= p {
                return Err(invalid(format!("edge ({i}, {j}) out of range for {p} nodes")));
            }
            if i == j {
                return Err(invalid(format!("self-loop at node {i}")));
            }
            if !seen.insert((i, j)) {
                return Err(invalid(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(Digraph { p, edges })
    }

    /// `0 → 1 → … → p−1 → 0`.
    pub fn ring(p: usize) -> Self {
        Self::circulant(p, &[1])
    }

    /// Edges `i → i + s (mod p)` for every step `s`.
    pub fn circulant(p: usize, steps: &[usize]) -> Self {
        let edges = steps
            .iter()
            .flat_map(|&s| (0..p).map(move |i| (i, (i + s) % p)))
            .filter(|(i, j)| i != j)
            .collect::<Vec<_>>();
        let mut seen = HashSet::new();
        let edges = edges.into_iter().filter(|e| seen.insert(*e)).collect();
        Digraph { p, edges }
    }

    pub fn complete(p: usize) -> Self {
        let edges = (0..p).flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        Digraph { p, edges }
    }

    pub fn nodes(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Forward and reverse reachability from node 0 both cover every node.
    pub fn is_strongly_connected(&self) -> bool {
        let mut fwd = vec![Vec::new(); self.p];
        let mut rev = vec![Vec::new(); self.p];
        for &(i, j) in &self.edges {
            fwd[i].push(j);
            rev[j].push(i);
        }
        reaches_all(&fwd) && reaches_all(&rev)
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|b| b)
}

/// `A` for one push-sum transaction along `edge = (i, j)`: the identity with
/// column `i` replaced by `(1−α) e_i + α e_j`, or by `(1−α) e_i` when the
/// packet is lost.
pub fn push_sum_matrix(p: usize, edge: (usize, usize), alpha: f64, loss: bool) -> Result<NonNegMatrix> {
    let (i, j) = edge;
    if i >= p || j >= p {
        return Err(invalid(format!("edge ({i}, {j}) out of range for {p} nodes")));
    }
    if i == j {
        return Err(invalid("push-sum edge must join distinct nodes"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let mut data = vec![0.0; p * p];
    for k in 0..p {
        data[k * p + k] = 1.0;
    }
    data[i * p + i] = 1.0 - alpha;
    if !loss {
        data[j * p + i] = alpha;
    }
    Ok(NonNegMatrix::from_trusted(p, data))
}

/// Per-column sums of `A`.
pub fn column_sums(a: &NonNegMatrix) -> Vec<f64> {
    a.column_sums()
}

/// Push-sum gossip with packet loss on a digraph.
#[derive(Debug, Clone, PartialEq)]
pub struct PushSumConfig {
    graph: Digraph,
    edge_prob: Vec<f64>,
    alpha: Vec<f64>,
    loss: Vec<f64>,
}

impl PushSumConfig {
    pub fn new(graph: Digraph, edge_prob: Vec<f64>, alpha: Vec<f64>, loss: Vec<f64>) -> Result<Self> {
        let m = graph.edges().len();
        if m == 0 {
            return Err(invalid("push-sum graph has no edges"));
        }
        for (name, v) in [("edge_prob", &edge_prob), ("alpha", &alpha), ("loss", &loss)] {
            if v.len() != m {
                return Err(invalid(format!("{name} has {} entries for {m} edges", v.len())));
            }
        }
        check_distribution("edge_prob", &edge_prob)?;
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(invalid(format!("alpha = {a} must lie in (0, 1)")));
        }
        if let Some(r) = loss.iter().find(|r| !(**r >= 0.0 && **r < 1.0)) {
            return Err(invalid(format!("loss probability {r} must lie in [0, 1)")));
        }
        Ok(PushSumConfig { graph, edge_prob, alpha, loss })
    }

    /// Uniform edge choice, one α and one loss probability for all edges.
    pub fn uniform(graph: Digraph, alpha: f64, loss: f64) -> Result<Self> {
        let m = graph.edges().len();
        let q = if m == 0 { vec![] } else { vec![1.0 / m as f64; m] };
        Self::new(graph, q, vec![alpha; m], vec![loss; m])
    }

    pub fn with_loss(&self, loss: Vec<f64>) -> Result<Self> {
        Self::new(self.graph.clone(), self.edge_prob.clone(), self.alpha.clone(), loss)
    }

    pub fn graph(&self) -> &Digraph {
        &self.graph
    }

    pub fn edge_prob(&self) -> &[f64] {
        &self.edge_prob
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn loss(&self) -> &[f64] {
        &self.loss
    }
}

fn check_distribution(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(invalid(format!("{name} is empty")));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid(format!("{name} has a negative or non-finite entry")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > CONFIG_PROB_TOL {
        return Err(invalid(format!("{name} sums to {s}, expected 1")));
    }
    Ok(())
}

/// The law of a matrix process, independent of any random stream.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessSpec {
    PushSum(PushSumConfig),
    IidFamily { matrices: Vec<NonNegMatrix>, probs: Vec<f64> },
    MarkovFamily { matrices: Vec<NonNegMatrix>, transition: Vec<Vec<f64>> },
    Constant(NonNegMatrix),
}

impl ProcessSpec {
    pub fn dim(&self) -> usize {
        match self {
            ProcessSpec::PushSum(c) => c.graph.nodes(),
            ProcessSpec::IidFamily { matrices, .. } | ProcessSpec::MarkovFamily { matrices, .. } => {
                matrices.first().map_or(0, NonNegMatrix::dim)
            }
            ProcessSpec::Constant(a) => a.dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProcessSpec::PushSum(_) => "push_sum",
            ProcessSpec::IidFamily { .. } => "iid_family",
            ProcessSpec::MarkovFamily { .. } => "markov_family",
            ProcessSpec::Constant(_) => "constant",
        }
    }

    /// Validates the parameters and precomputes the emission alphabet.
    pub fn compile(&self) -> Result<CompiledProcess> {
        let law = match self {
            ProcessSpec::PushSum(cfg) => {
                let p = cfg.graph.nodes();
                let mut alphabet = Vec::with_capacity(2 * cfg.graph.edges().len());
                for (e, &edge) in cfg.graph.edges().iter().enumerate() {
                    alphabet.push(push_sum_matrix(p, edge, cfg.alpha[e], false)?);
                    alphabet.push(push_sum_matrix(p, edge, cfg.alpha[e], true)?);
                }
                Law::PushSum { cumulative: cumulative(&cfg.edge_prob), loss: cfg.loss.clone(), alphabet }
            }
            ProcessSpec::IidFamily { matrices, probs } => {
                check_family(matrices)?;
                if probs.len() != matrices.len() {
                    return Err(invalid("iid_family needs one probability per matrix"));
                }
                check_distribution("probs", probs)?;
                Law::Iid { cumulative: cumulative(probs), alphabet: matrices.clone() }
            }
            ProcessSpec::MarkovFamily { matrices, transition } => {
                check_family(matrices)?;
                let k = matrices.len();
                if transition.len() != k {
                    return Err(invalid("markov_family transition matrix must be k x k"));
                }
                for row in transition {
                    if row.len() != k {
                        return Err(invalid("markov_family transition matrix must be k x k"));
                    }
                    check_distribution("transition row", row)?;
                }
                let edges = (0..k)
                    .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
                    .filter(|&(i, j)| transition[i][j] > 0.0)
                    .collect();
                if k > 1 && !Digraph::new(k, edges)?.is_strongly_connected() {
                    return Err(invalid("markov_family transition chain must be irreducible"));
                }
                let stationary = stationary_distribution(transition)?;
                Law::Markov {
                    initial: cumulative(&stationary),
                    transitions: transition.iter().map(|r| cumulative(r)).collect(),
                    stationary,
                    alphabet: matrices.clone(),
                }
            }
            ProcessSpec::Constant(a) => Law::Constant { alphabet: vec![a.clone()] },
        };
        Ok(CompiledProcess { dim: self.dim(), law: Arc::new(law) })
    }

    /// Shorthand for `compile()?.stream(seed, stream)`.
    pub fn build(&self, seed: u64, stream: u64) -> Result<MatrixProcess> {
        Ok(self.compile()?.stream(seed, stream))
    }
}

fn check_family(matrices: &[NonNegMatrix]) -> Result<()> {
    let first = matrices.first().ok_or(Error::EmptyFamily)?;
    if let Some(m) = matrices.iter().find(|m| m.dim() != first.dim()) {
        return Err(Error::DimensionMismatch { expected: first.dim(), got: m.dim() });
    }
    Ok(())
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Index of the first cumulative bucket exceeding `u`; zero-probability
/// buckets are never returned.
fn categorical(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().expect("nonempty distribution");
    let target = u * total;
    let idx = cumulative.partition_point(|&c| c <= target);
    idx.min(cumulative.len() - 1)
}

/// Solves `π P = π`, `Σ π = 1` by Gaussian elimination.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = transition.len();
    // rows 0..k-1 of (Pᵀ − I) with the last equation replaced by Σ π = 1
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = transition[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[k - 1] = vec![1.0; k + 1];
    for col in 0..k {
        let pivot = (col..k).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).expect("nonempty range");
        if a[pivot][col].abs() < 1e-14 {
            return Err(invalid("transition matrix has no unique stationary distribution"));
        }
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                if f != 0.0 {
                    for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                        *v -= f * p;
                    }
                }
            }
        }
    }
    let pi: Vec<f64> = (0..k).map(|i| (a[i][k] / a[i][i]).max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|v| v / s).collect())
}

#[derive(Debug)]
enum Law {
    PushSum { cumulative: Vec<f64>, loss: Vec<f64>, alphabet: Vec<NonNegMatrix> },
    Iid { cumulative: Vec<f64>, alphabet: Vec<NonNegMatrix> },
    Markov { initial: Vec<f64>, transitions: Vec<Vec<f64>>, stationary: Vec<f64>, alphabet: Vec<NonNegMatrix> },
    Constant { alphabet: Vec<NonNegMatrix> },
}

impl Law {
    fn alphabet(&self) -> &[NonNegMatrix] {
        match self {
            Law::PushSum { alphabet, .. }
            | Law::Iid { alphabet, .. }
            | Law::Markov { alphabet, .. }
            | Law::Constant { alphabet } => alphabet,
        }
    }
}

/// A validated process law with its precomputed alphabet; cheap to clone
/// and share across threads.
#[derive(Debug, Clone)]
pub struct CompiledProcess {
    dim: usize,
    law: Arc<Law>,
}

impl CompiledProcess {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alphabet(&self) -> &[NonNegMatrix] {
        self.law.alphabet()
    }

    /// Stationary law of the modulating chain (markov kind only).
    pub fn stationary(&self) -> Option<&[f64]> {
        match &*self.law {
            Law::Markov { stationary, .. } => Some(stationary),
            _ => None,
        }
    }

    /// Every matrix the process can emit, with zero-probability symbols
    /// dropped.
    pub fn support(&self) -> Vec<&NonNegMatrix> {
        match &*self.law {
            Law::PushSum { cumulative, loss, alphabet } => {
                let mut out = Vec::new();
                let mut prev = 0.0;
                for (e, &c) in cumulative.iter().enumerate() {
                    if c > prev {
                        if loss[e] < 1.0 {
                            out.push(&alphabet[2 * e]);
                        }
                        if loss[e] > 0.0 {
                            out.push(&alphabet[2 * e + 1]);
                        }
                    }
                    prev = c;
                }
                out
            }
            Law::Iid { cumulative, alphabet } => {
                let mut prev = 0.0;
                alphabet
                    .iter()
                    .zip(cumulative)
                    .filter_map(|(a, &c)| {
                        let keep = c > prev;
                        prev = c;
                        keep.then_some(a)
                    })
                    .collect()
            }
            Law::Markov { stationary, alphabet, .. } => {
                alphabet.iter().zip(stationary).filter(|(_, &s)| s > 0.0).map(|(a, _)| a).collect()
            }
            Law::Constant { alphabet } => alphabet.iter().collect(),
        }
    }

    pub fn stream(&self, seed: u64, stream: u64) -> MatrixProcess {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        MatrixProcess { compiled: self.clone(), rng, position: 0, state: None }
    }
}

/// A seeded realization of a [`CompiledProcess`].
#[derive(Debug, Clone)]
pub struct MatrixProcess {
    compiled: CompiledProcess,
    rng: ChaCha8Rng,
    position: u64,
    state: Option<usize>,
}

impl MatrixProcess {
    pub fn dim(&self) -> usize {
        self.compiled.dim
    }

    pub fn compiled(&self) -> &CompiledProcess {
        &self.compiled
    }

    /// Number of matrices emitted so far; the next emission is `A_{position+1}`.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn alphabet(&self) -> &[NonNegMatrix] {
        self.compiled.alphabet()
    }

    /// Draws the next alphabet symbol.
    ///
    /// Push-sum draws exactly two uniforms per step (edge, then loss) even
    /// when the loss probability is zero, so processes that differ only in
    /// their loss probabilities stay coupled: with the same seed, a loss
    /// under `r` implies a loss under any `r' ≥ r`.
    pub fn next_symbol(&mut self) -> usize {
        self.position += 1;
        match &*self.compiled.law {
            Law::PushSum { cumulative, loss, .. } => {
                let edge = categorical(cumulative, self.rng.random::<f64>());
                let lost = self.rng.random::<f64>() < loss[edge];
                2 * edge + usize::from(lost)
            }
            Law::Iid { cumulative, .. } => categorical(cumulative, self.rng.random::<f64>()),
            Law::Markov { initial, transitions, .. } => {
                let u = self.rng.random::<f64>();
                let next = match self.state {
                    None => categorical(initial, u),
                    Some(s) => categorical(&transitions[s], u),
                };
                self.state = Some(next);
                next
            }
            Law::Constant { .. } => 0,
        }
    }

    /// `A_{n}` for the next `n`.
    pub fn next_matrix(&mut self) -> &NonNegMatrix {
        let s = self.next_symbol();
        &self.compiled.alphabet()[s]
    }

    pub fn skip(&mut self, steps: u64) {
        for _ in 0..steps {
            self.next_symbol();
        }
    }

    /// Uniform draws from the process's own stream, for auxiliary quantities
    /// (initial frames, random vectors) that must stay reproducible.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Decodes a push-sum symbol into `(edge index, lost)`.
pub fn push_sum_symbol(symbol: usize) -> (usize, bool) {
    (symbol / 2, symbol % 2 == 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(a: &NonNegMatrix, c: usize) -> Vec<f64> {
        (0..a.dim()).map(|r| a.get(r, c)).collect()
    }

    #[test]
    fn push_sum_matrix_examples() {
        let a = push_sum_matrix(3, (0, 1), 0.5, false).unwrap();
        assert_eq!(cols(&a, 0), vec![0.5, 0.5, 0.0]);
        assert_eq!(cols(&a, 1), vec![0.0, 1.0, 0.0]);
        assert_eq!(cols(&a, 2), vec![0.0, 0.0, 1.0]);
        assert_eq!(column_sums(&a), vec![1.0; 3]);

        let l = push_sum_matrix(3, (0, 1), 0.5, true).unwrap();
        assert_eq!(cols(&l, 0), vec![0.5, 0.0, 0.0]);
        assert_eq!(column_sums(&l), vec![0.5, 1.0, 1.0]);
        assert!(l.is_row_allowable());
        assert_eq!(l.log_abs_det(), 0.5f64.ln());

        let b = push_sum_matrix(2, (1, 0), 0.25, false).unwrap();
        assert_eq!(b.rows(), vec![vec![1.0, 0.25], vec![0.0, 0.75]]);

        assert!(push_sum_matrix(3, (1, 1), 0.5, false).is_err());
        assert!(push_sum_matrix(3, (0, 1), 1.0, false).is_err());
        assert!(push_sum_matrix(3, (0, 1), 0.0, false).is_err());
        assert_eq!(column_sums(&NonNegMatrix::identity(3)), vec![1.0; 3]);
    }

    #[test]
    fn strong_connectivity() {
        assert!(Digraph::ring(4).is_strongly_connected());
        assert!(!Digraph::new(2, vec![(0, 1)]).unwrap().is_strongly_connected());
        assert!(Digraph::complete(3).is_strongly_connected());
        assert!(Digraph::new(1, vec![]).unwrap().is_strongly_connected());
        assert!(Digraph::new(3, vec![(0, 0)]).is_err());
        assert!(Digraph::new(3, vec![(0, 1), (0, 1)]).is_err());
        assert_eq!(Digraph::circulant(5, &[1, 2]).edges().len(), 10);
    }

    #[test]
    fn config_validation() {
        let g = Digraph::ring(3);
        assert!(PushSumConfig::new(g.clone(), vec![0.5, 0.3, 0.3], vec![0.5; 3], vec![0.0; 3]).is_err());
        assert!(PushSumConfig::new(g.clone(), vec![1.0 / 3.0; 3], vec![0.5; 3], vec![1.0; 3]).is_err());
        assert!(PushSumConfig::new(g.clone(), vec![1.0 / 3.0; 3], vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(PushSumConfig::uniform(g, 0.5, 0.2).is_ok());
    }

    #[test]
    fn constant_and_singleton_processes() {
        let a = NonNegMatrix::from_rows(&[[0.5, 0.25], [0.5, 0.75]]).unwrap();
        let mut p = ProcessSpec::Constant(a.clone()).build(1, 0).unwrap();
        for _ in 0..10 {
            assert_eq!(p.next_matrix(), &a);
        }
        let b = NonNegMatrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        let mut q = ProcessSpec::IidFamily { matrices: vec![b.clone()], probs: vec![1.0] }.build(3, 0).unwrap();
        for _ in 0..10 {
            assert_eq!(q.next_matrix(), &b);
        }
        assert_eq!(q.position(), 10);
    }

    #[test]
    fn lossless_push_sum_is_column_stochastic() {
        let spec = ProcessSpec::PushSum(PushSumConfig::uniform(Digraph::circulant(5, &[1, 2]), 0.5, 0.0).unwrap());
        let mut p = spec.build(9, 0).unwrap();
        for _ in 0..10_000 {
            let a = p.next_matrix();
            assert!(a.is_column_stochastic(1e-12));
            assert!(a.is_row_allowable());
        }
    }

    #[test]
    fn streams_differ_and_reproduce() {
        let spec = ProcessSpec::PushSum(PushSumConfig::uniform(Digraph::complete(4), 0.5, 0.3).unwrap());
        let c = spec.compile().unwrap();
        let draw = |seed, stream| {
            let mut p = c.stream(seed, stream);
            (0..1000).map(|_| p.next_symbol()).collect::<Vec<_>>()
        };
        assert_eq!(draw(5, 0), draw(5, 0));
        assert_ne!(draw(5, 0), draw(5, 1));
        assert_ne!(draw(5, 0), draw(6, 0));
    }

    #[test]
    fn stationary_distribution_solves_balance() {
        let t = vec![vec![0.9, 0.1, 0.0], vec![0.2, 0.5, 0.3], vec![0.5, 0.0, 0.5]];
        let pi = stationary_distribution(&t).unwrap();
        for j in 0..3 {
            let pj: f64 = (0..3).map(|i| pi[i] * t[i][j]).sum();
            assert!((pj - pi[j]).abs() < 1e-14);
        }
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reducible_markov_chain_rejected() {
        let a = NonNegMatrix::identity(2);
        let spec = ProcessSpec::MarkovFamily {
            matrices: vec![a.clone(), a],
            transition: vec![vec![1.0, 0.0], vec![0.5, 0.5]],
        };
        assert!(spec.compile().is_err());
    }

    #[test]
    fn categorical_skips_empty_buckets() {
        let c = cumulative(&[0.0, 0.5, 0.0, 0.5]);
        assert_eq!(categorical(&c, 0.0), 1);
        assert_eq!(categorical(&c, 0.49), 1);
        assert_eq!(categorical(&c, 0.5), 3);
        assert_eq!(categorical(&c, 0.999_999), 3);
    }
}
