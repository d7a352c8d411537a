//! Lyapunov spectrum and spectral-gap estimators for matrix cocycles.
//!
//! Four independent routes to the top of the spectrum:
//!
//! * [`estimate_spectrum_qr`]: an orthonormal `k`-frame is pushed through
//!   the product and re-orthonormalized every `reorth_period` steps; the
//!   logs of the diagonal of the triangular factors average to
//!   `λ_1, …, λ_k`.
//! * [`estimate_sum_top2_wedge`]: the growth rate of `|M_n x ∧ M_n w|`,
//!   carried through the second compound, estimates `λ_1 + λ_2` without any
//!   orthogonalization.
//! * [`estimate_gap_birkhoff`]: `−(1/m) E log τ(M_m)` is a lower bound for
//!   `λ_1 − λ_2` that becomes tight as `m` grows.
//! * [`check_det_identity`]: `E log|det A_1|` against `Σ λ_i`.
//!
//! A divergent exponent (`λ = −∞`) is reported as a large negative finite
//! value or through a reduced frame; it is not certified.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::birkhoff::BirkhoffProduct;
use crate::error::{invalid, Error, Result};
use crate::exterior::WedgeTracker;
use crate::generators::{CompiledProcess, MatrixProcess};
use crate::stats::{RunningMean, Summary};

/// Relative residual below which a frame column counts as collapsed.
pub const FRAME_COLLAPSE_TOL: f64 = 1e-13;

const FRAME_SEED: u64 = 0x5EED_F4A3_E000_0001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QrOptions {
    /// Number of exponents to estimate.
    pub k: usize,
    /// Steps that contribute to the average.
    pub n: u64,
    pub reorth_period: u64,
    pub replicates: usize,
    /// Steps discarded before averaging so the frame aligns with the
    /// Oseledets filtration; rounded up to a multiple of `reorth_period`.
    pub burn_in: u64,
}

impl QrOptions {
    pub fn new(k: usize) -> Self {
        QrOptions { k, n: 100_000, reorth_period: 1, replicates: 16, burn_in: 1_000 }
    }

    pub fn with_n(mut self, n: u64) -> Self {
        self.n = n;
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_reorth_period(mut self, period: u64) -> Self {
        self.reorth_period = period;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    /// Replicate means of `λ_1 ≥ … ≥ λ_k`, natural log per step.
    pub lambda: Vec<f64>,
    /// Standard error of each mean across replicates.
    pub stderr: Vec<f64>,
    /// `λ_1 − λ_2`, clamped at zero; `NaN` when `k < 2`.
    pub gap: f64,
    pub gap_stderr: f64,
    /// Unclamped replicate mean of `λ_1 − λ_2`.
    pub raw_gap: f64,
    pub n_steps: u64,
    pub replicates: usize,
    /// `per_replicate[r][i]` is `λ_{i+1}` from replicate `r`.
    pub per_replicate: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl SpectrumEstimate {
    pub fn sum(&self) -> Summary {
        let sums: Vec<f64> = self.per_replicate.iter().map(|l| l.iter().sum()).collect();
        Summary::of(&sums)
    }
}

/// One run of the re-orthonormalized frame method on a single stream.
/// Returns the exponents actually resolved (fewer than `k` on collapse).
pub fn lyapunov_replicate(process: &mut MatrixProcess, frame_stream: u64, opts: &QrOptions) -> Result<Vec<f64>> {
    let p = process.dim();
    validate_qr(opts, p)?;
    let period = opts.reorth_period;
    let burn_in = opts.burn_in.div_ceil(period) * period;
    let mut frame = random_frame(p, opts.k, frame_stream);
    let mut scratch = vec![0.0; p];
    let mut acc = vec![0.0; opts.k];
    let mut counted = 0u64;
    let total = burn_in + opts.n.div_ceil(period) * period;
    let mut t = 0u64;
    while t < total {
        let a = process.next_matrix();
        for col in frame.iter_mut() {
            a.apply_into(col, &mut scratch);
            col.copy_from_slice(&scratch);
        }
        t += 1;
        if t.is_multiple_of(period) {
            let diag = orthonormalize(&mut frame);
            if diag.len() < frame.len() {
                frame.truncate(diag.len());
                acc.truncate(diag.len());
                log::warn!("frame collapsed to rank {} at step {t}", diag.len());
                if frame.is_empty() {
                    return Err(invalid("product collapsed to zero"));
                }
            }
            if t > burn_in {
                for (s, d) in acc.iter_mut().zip(&diag) {
                    *s += d.ln();
                }
                counted += period;
            }
        }
    }
    Ok(acc.into_iter().map(|s| s / counted as f64).collect())
}

fn validate_qr(opts: &QrOptions, p: usize) -> Result<()> {
    if opts.k == 0 || opts.k > p {
        return Err(invalid(format!("k = {} must lie in 1..={p}", opts.k)));
    }
    if opts.reorth_period == 0 {
        return Err(invalid("reorth_period must be at least 1"));
    }
    if opts.n < 10 * opts.reorth_period {
        return Err(invalid(format!("n = {} is below 10 * reorth_period", opts.n)));
    }
    if opts.replicates == 0 {
        return Err(invalid("need at least one replicate"));
    }
    Ok(())
}

fn random_frame(p: usize, k: usize, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(FRAME_SEED);
    rng.set_stream(stream);
    let mut frame: Vec<Vec<f64>> = (0..k).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let kept = orthonormalize(&mut frame).len();
    assert_eq!(kept, k, "random initial frame is degenerate");
    frame
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. Returns the
/// diagonal of the triangular factor; stops at the first column whose
/// residual falls below [`FRAME_COLLAPSE_TOL`] relative to its input norm.
fn orthonormalize(frame: &mut [Vec<f64>]) -> Vec<f64> {
    let mut diag = Vec::with_capacity(frame.len());
    for c in 0..frame.len() {
        let (done, rest) = frame.split_at_mut(c);
        let col = &mut rest[0];
        let before = norm(col);
        if before == 0.0 || !before.is_finite() {
            break;
        }
        for _ in 0..2 {
            for q in done.iter() {
                let r: f64 = q.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                col.iter_mut().zip(q).for_each(|(v, qi)| *v -= r * qi);
            }
        }
        let after = norm(col);
        if after <= FRAME_COLLAPSE_TOL * before {
            break;
        }
        col.iter_mut().for_each(|v| *v /= after);
        diag.push(after);
    }
    diag
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Replicated frame estimator. Replicate `r` uses process stream `r`.
pub fn estimate_spectrum_qr(process: &CompiledProcess, seed: u64, opts: &QrOptions) -> Result<SpectrumEstimate> {
    validate_qr(opts, process.dim())?;
    let runs: Vec<Result<Vec<f64>>> = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|r| lyapunov_replicate(&mut process.stream(seed, r), r, opts))
        .collect();
    let per_replicate = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let k_eff = per_replicate.iter().map(Vec::len).min().unwrap_or(0);
    let mut warnings = Vec::new();
    if k_eff < opts.k {
        warnings.push(format!("frame collapsed: only {k_eff} of {} exponents resolved", opts.k));
    }
    let per_replicate: Vec<Vec<f64>> = per_replicate
        .into_iter()
        .map(|mut l| {
            l.truncate(k_eff);
            l
        })
        .collect();
    let column = |i: usize| per_replicate.iter().map(|l| l[i]).collect::<Vec<_>>();
    let summaries: Vec<Summary> = (0..k_eff).map(|i| Summary::of(&column(i))).collect();
    let (raw_gap, gap_stderr) = if k_eff >= 2 {
        let gaps: Vec<f64> = per_replicate.iter().map(|l| l[0] - l[1]).collect();
        let s = Summary::of(&gaps);
        (s.mean, s.stderr)
    } else {
        (f64::NAN, f64::NAN)
    };
    if raw_gap < 0.0 {
        log::warn!("negative raw spectral gap {raw_gap:e} clamped to zero");
        warnings.push(format!("negative raw gap {raw_gap:e} clamped to zero"));
    }
    Ok(SpectrumEstimate {
        lambda: summaries.iter().map(|s| s.mean).collect(),
        stderr: summaries.iter().map(|s| s.stderr).collect(),
        gap: if raw_gap.is_nan() { raw_gap } else { raw_gap.max(0.0) },
        gap_stderr,
        raw_gap,
        n_steps: opts.n,
        replicates: opts.replicates,
        per_replicate,
        warnings,
    })
}

/// `(1/n) ln |M_n x ∧ M_n w|`, carried through the compound matrices.
pub fn estimate_sum_top2_wedge(process: &mut MatrixProcess, x: &[f64], w: &[f64], n: u64) -> Result<f64> {
    let p = process.dim();
    for v in [x, w] {
        if v.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: v.len() });
        }
    }
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let mut tracker = WedgeTracker::new(x, w);
    if tracker.scaled().is_zero() {
        return Err(Error::CollinearTrajectory);
    }
    for _ in 0..n {
        tracker.apply(process.next_matrix());
        if tracker.scaled().is_zero() {
            return Err(Error::CollinearTrajectory);
        }
    }
    Ok(tracker.ln_magnitude() / n as f64)
}

/// Replicated wedge estimator; replicate `r` uses process stream `r`.
pub fn estimate_sum_top2_wedge_replicated(
    process: &CompiledProcess,
    seed: u64,
    x: &[f64],
    w: &[f64],
    n: u64,
    replicates: usize,
) -> Result<Summary> {
    let values = (0..replicates as u64)
        .into_par_iter()
        .map(|r| estimate_sum_top2_wedge(&mut process.stream(seed, r), x, w, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(Summary::of(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    QrSpectrum,
    WedgeMinusTop,
    BirkhoffAsymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEstimate {
    pub method: GapMethod,
    /// Reported gap, clamped at zero.
    pub value: f64,
    pub stderr: f64,
    /// Block length `m` (Birkhoff) or step count (other methods).
    pub horizon: u64,
    /// Trials whose product was not yet strictly positive (`τ = 1`).
    pub fraction_tau_one: f64,
    /// Set when no trial produced a strictly positive product.
    pub increase_m: bool,
    /// Per-trial `−(1/m) ln τ(M_m)` for trials with `τ < 1`.
    pub diagnostics: Vec<f64>,
}

/// Trials of the Birkhoff estimator use process streams starting here so
/// they never coincide with the replicate streams of the other estimators.
pub const BIRKHOFF_STREAM_BASE: u64 = 1 << 32;

/// `−(1/m) mean ln τ(M_m)` over independent length-`m` products, excluding
/// trials where `M_m` still has a zero entry.
pub fn estimate_gap_birkhoff(process: &CompiledProcess, seed: u64, m: u64, trials: usize) -> Result<GapEstimate> {
    if m == 0 || trials == 0 {
        return Err(invalid("m and trials must be positive"));
    }
    let p = process.dim();
    let results = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut proc = process.stream(seed, BIRKHOFF_STREAM_BASE + t);
            let mut prod = BirkhoffProduct::new(p);
            for _ in 0..m {
                prod.push(proc.next_matrix())?;
            }
            prod.ln_tau()
        })
        .collect::<Result<Vec<f64>>>()?;
    let contracted: Vec<f64> = results.iter().filter(|&&l| l < 0.0).map(|l| -l / m as f64).collect();
    let fraction_tau_one = 1.0 - contracted.len() as f64 / trials as f64;
    if contracted.is_empty() {
        return Ok(GapEstimate {
            method: GapMethod::BirkhoffAsymptotic,
            value: 0.0,
            stderr: f64::NAN,
            horizon: m,
            fraction_tau_one,
            increase_m: true,
            diagnostics: contracted,
        });
    }
    let s = Summary::of(&contracted);
    Ok(GapEstimate {
        method: GapMethod::BirkhoffAsymptotic,
        value: s.mean.max(0.0),
        stderr: s.stderr,
        horizon: m,
        fraction_tau_one,
        increase_m: false,
        diagnostics: contracted,
    })
}

/// Gap from the wedge route: `(λ_1 + λ_2)` from the wedge minus `λ_1` from
/// a one-vector frame, differenced per replicate.
pub fn estimate_gap_wedge(
    process: &CompiledProcess,
    seed: u64,
    x: &[f64],
    w: &[f64],
    opts: &QrOptions,
) -> Result<GapEstimate> {
    let top = QrOptions { k: 1, ..*opts };
    let gaps = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let l1 = lyapunov_replicate(&mut process.stream(seed, r), r, &top)?[0];
            let sum = estimate_sum_top2_wedge(&mut process.stream(seed, r), x, w, opts.n)?;
            Ok(2.0 * l1 - sum)
        })
        .collect::<Result<Vec<f64>>>()?;
    let s = Summary::of(&gaps);
    Ok(GapEstimate {
        method: GapMethod::WedgeMinusTop,
        value: s.mean.max(0.0),
        stderr: s.stderr,
        horizon: opts.n,
        fraction_tau_one: 0.0,
        increase_m: false,
        diagnostics: gaps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetIdentity {
    /// `(1/n) Σ ln|det A_k|` on stream 0; `-inf` if any emission is singular.
    pub lhs: f64,
    /// `Σ λ_i` from a full-frame estimate.
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub spectrum: SpectrumEstimate,
}

pub fn check_det_identity(process: &CompiledProcess, seed: u64, n: u64, opts: &QrOptions) -> Result<DetIdentity> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let mut proc = process.stream(seed, 0);
    let mut lhs = RunningMean::default();
    for _ in 0..n {
        let d = proc.next_matrix().log_abs_det();
        if d == f64::NEG_INFINITY {
            lhs = RunningMean::default();
            lhs.push(f64::NEG_INFINITY);
            break;
        }
        lhs.push(d);
    }
    let full = QrOptions { k: process.dim(), ..*opts };
    let spectrum = estimate_spectrum_qr(process, seed, &full)?;
    let sum = spectrum.sum();
    Ok(DetIdentity { lhs: lhs.mean(), rhs: sum.mean, rhs_stderr: sum.stderr, spectrum })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub n: u64,
    /// `ln(σ_2/σ_1)` of the product restricted to the tracked 2-frame.
    pub ln_ratio: f64,
}

impl ResidualPoint {
    pub fn ratio(&self) -> f64 {
        self.ln_ratio.exp()
    }
}

/// `σ_2/σ_1` of `M_n Q_0` for a fixed generic 2-frame `Q_0`, at each
/// checkpoint. The triangular factor is kept as `a·[[1, β], [0, γ]]` with
/// `ln a` and `ln γ` accumulated, so the ratio never underflows.
pub fn rank1_residual(process: &mut MatrixProcess, checkpoints: &[u64]) -> Result<Vec<ResidualPoint>> {
    let p = process.dim();
    if p < 2 {
        return Err(invalid("rank-one residual needs p >= 2"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("checkpoints must be strictly increasing"));
    }
    let mut frame = random_frame(p, 2, 0);
    let mut scratch = vec![0.0; p];
    let (mut ln_a, mut ln_c, mut beta) = (0.0f64, 0.0f64, 0.0f64);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    let mut t = 0u64;
    while let Some(&&target) = next.peek() {
        if t == target {
            let gamma_ln = ln_c - ln_a;
            let gamma = gamma_ln.exp();
            let tr = 1.0 + beta * beta + gamma * gamma;
            let disc = ((tr - 2.0 * gamma) * (tr + 2.0 * gamma)).max(0.0).sqrt();
            let s1 = 0.5 * (tr + disc);
            out.push(ResidualPoint { n: t, ln_ratio: gamma_ln - s1.ln() });
            next.next();
            continue;
        }
        let a = process.next_matrix();
        for col in frame.iter_mut() {
            a.apply_into(col, &mut scratch);
            col.copy_from_slice(&scratch);
        }
        let r11 = norm(&frame[0]);
        if r11 == 0.0 {
            return Err(invalid("product annihilated the frame"));
        }
        frame[0].iter_mut().for_each(|v| *v /= r11);
        let (q1, rest) = frame.split_at_mut(1);
        let q2 = &mut rest[0];
        let mut r12 = 0.0;
        for _ in 0..2 {
            let r: f64 = q1[0].iter().zip(q2.iter()).map(|(a, b)| a * b).sum();
            q2.iter_mut().zip(&q1[0]).for_each(|(v, q)| *v -= r * q);
            r12 += r;
        }
        let r22 = norm(q2);
        if r22 == 0.0 {
            // exact collapse: σ_2 = 0 from here on
            ln_c = f64::NEG_INFINITY;
        } else {
            q2.iter_mut().for_each(|v| *v /= r22);
        }
        // [[r11, r12], [0, r22]] · a[[1, β], [0, γ]]
        beta += (r12 / r11) * (ln_c - ln_a).exp();
        ln_a += r11.ln();
        if ln_c.is_finite() {
            ln_c += r22.ln();
        }
        t += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::ProcessSpec;
    use crate::matrix::NonNegMatrix;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn constant(rows: &[[f64; 2]]) -> CompiledProcess {
        ProcessSpec::Constant(NonNegMatrix::from_rows(rows).unwrap()).compile().unwrap()
    }

    #[test]
    fn qr_constant_two_by_two() {
        let c = constant(&[[0.5, 0.25], [0.5, 0.75]]);
        let est = estimate_spectrum_qr(&c, 1, &QrOptions::new(2).with_n(10_000).with_replicates(2)).unwrap();
        assert!(est.lambda[0].abs() < 1e-12, "{:?}", est.lambda);
        assert_relative_eq!(est.lambda[1], 0.25f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(est.gap, 4f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn qr_identity_is_flat() {
        let c = ProcessSpec::Constant(NonNegMatrix::identity(3)).compile().unwrap();
        let est = estimate_spectrum_qr(&c, 0, &QrOptions::new(3).with_n(1000).with_replicates(1)).unwrap();
        assert!(est.lambda.iter().all(|l| l.abs() < 1e-15));
        assert_eq!(est.gap, 0.0);
    }

    #[test]
    fn qr_rejects_bad_options() {
        let c = constant(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(estimate_spectrum_qr(&c, 0, &QrOptions::new(3)).is_err());
        assert!(estimate_spectrum_qr(&c, 0, &QrOptions::new(2).with_n(5)).is_err());
        assert!(estimate_spectrum_qr(&c, 0, &QrOptions::new(2).with_reorth_period(0)).is_err());
    }

    #[test]
    fn qr_singular_matrix_reduces_k() {
        let c = constant(&[[1.0, 1.0], [1.0, 1.0]]);
        let est = estimate_spectrum_qr(&c, 0, &QrOptions::new(2).with_n(100).with_replicates(1)).unwrap();
        assert_eq!(est.lambda.len(), 1);
        assert_relative_eq!(est.lambda[0], 2f64.ln(), epsilon = 1e-12);
        assert!(!est.warnings.is_empty());
    }

    #[test]
    fn qr_with_longer_reorth_period() {
        let c = constant(&[[0.5, 0.25], [0.5, 0.75]]);
        let opts = QrOptions::new(2).with_n(2_000).with_replicates(1).with_reorth_period(8);
        let est = estimate_spectrum_qr(&c, 0, &opts).unwrap();
        assert_relative_eq!(est.lambda[1], 0.25f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn wedge_examples() {
        let d = ProcessSpec::Constant(NonNegMatrix::diagonal(&[2.0, 3.0]).unwrap()).compile().unwrap();
        let v = estimate_sum_top2_wedge(&mut d.stream(0, 0), &[1.0, 0.0], &[0.0, 1.0], 5000).unwrap();
        assert_relative_eq!(v, 6f64.ln(), max_relative = 1e-13);
        let id = ProcessSpec::Constant(NonNegMatrix::identity(2)).compile().unwrap();
        let v = estimate_sum_top2_wedge(&mut id.stream(0, 0), &[1.0, 0.0], &[0.0, 1.0], 100).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(
            estimate_sum_top2_wedge(&mut id.stream(0, 0), &[1.0, 2.0], &[2.0, 4.0], 10),
            Err(Error::CollinearTrajectory)
        );
    }

    #[test]
    fn birkhoff_constant_examples() {
        let a = constant(&[[2.0, 1.0], [1.0, 2.0]]);
        let g = estimate_gap_birkhoff(&a, 0, 1, 4).unwrap();
        assert_relative_eq!(g.value, 3f64.ln(), epsilon = 1e-14);
        assert_eq!(g.fraction_tau_one, 0.0);

        let b = constant(&[[0.5, 0.25], [0.5, 0.75]]);
        let g = estimate_gap_birkhoff(&b, 0, 1, 1).unwrap();
        assert_relative_eq!(g.value, -(2.0 - 3f64.sqrt()).ln(), epsilon = 1e-14);
        assert!(g.value <= 4f64.ln());

        let z = constant(&[[0.5, 0.0], [0.5, 1.0]]);
        let g = estimate_gap_birkhoff(&z, 0, 1, 3).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.increase_m);
        assert_eq!(g.fraction_tau_one, 1.0);
    }

    #[test]
    fn birkhoff_long_constant_product_tends_to_gap() {
        // φ(A^m) ≈ C 4^-m; -(1/m) ln τ → ln 4
        let b = constant(&[[0.5, 0.25], [0.5, 0.75]]);
        let g = estimate_gap_birkhoff(&b, 0, 200, 1).unwrap();
        assert!((g.value - 4f64.ln()).abs() < 0.02, "{}", g.value);
    }

    #[test]
    fn det_identity_constant_cases() {
        let d = ProcessSpec::Constant(NonNegMatrix::diagonal(&[2.0, 3.0]).unwrap()).compile().unwrap();
        let opts = QrOptions::new(2).with_n(1000).with_replicates(2);
        let r = check_det_identity(&d, 0, 50, &opts).unwrap();
        assert_relative_eq!(r.lhs, 6f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(r.rhs, 2f64.ln() + 3f64.ln(), epsilon = 1e-12);

        let s = constant(&[[1.0, 1.0], [1.0, 1.0]]);
        let r = check_det_identity(&s, 0, 10, &opts).unwrap();
        assert_eq!(r.lhs, f64::NEG_INFINITY);
    }

    #[test]
    fn det_identity_push_sum_is_exact() {
        use crate::generators::{Digraph, PushSumConfig};
        let cfg = PushSumConfig::uniform(Digraph::complete(3), 0.5, 0.4).unwrap();
        let c = ProcessSpec::PushSum(cfg).compile().unwrap();
        let opts = QrOptions::new(3).with_n(1000).with_replicates(2);
        for n in [1, 7, 5000] {
            assert_eq!(check_det_identity(&c, 3, n, &opts).unwrap().lhs, -LN_2);
        }
    }

    #[test]
    fn rank1_residual_examples() {
        let b = constant(&[[0.5, 0.25], [0.5, 0.75]]);
        let pts = rank1_residual(&mut b.stream(0, 0), &[100, 200, 400]).unwrap();
        let slope = (pts[2].ln_ratio - pts[1].ln_ratio) / 200.0;
        assert_relative_eq!(slope, -4f64.ln(), epsilon = 1e-9);
        assert!((pts[2].ln_ratio / 400.0 + 4f64.ln()).abs() < 0.01);

        let id = ProcessSpec::Constant(NonNegMatrix::identity(3)).compile().unwrap();
        let pts = rank1_residual(&mut id.stream(0, 0), &[0, 1, 10, 1000]).unwrap();
        assert!(pts.iter().all(|p| p.ln_ratio.abs() < 1e-12 || p.n == 0), "{pts:?}");
        assert!(rank1_residual(&mut id.stream(0, 0), &[5, 5]).is_err());
    }
}
