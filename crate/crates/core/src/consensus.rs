//! Ratio-consensus trajectories `x_n = A_n x_{n−1}`, `w_n = A_n w_{n−1}`.
//!
//! The state keeps `x` and `w` under one shared log scale, so node ratios
//! are never perturbed by rescaling, and carries `x ∧ w` through the
//! compound matrices. Ratio differences `r_i − r_j = (x∧w)_{ij}/(w_i w_j)`
//! are therefore resolved to full relative precision long after the
//! ratios themselves agree to every printed digit, and the per-checkpoint
//! error columns are stored as natural logs.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exterior::{PairIndex, WedgeTracker};
use crate::generators::MatrixProcess;
use crate::logscale::ScaledVec;
use crate::matrix::NonNegMatrix;
use crate::stats::fit_line;
use crate::vector::NonNegVector;

/// Column sums within this distance of one count as column-stochastic.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Relative floating slack allowed when comparing ratios against the
/// envelope; once the envelope is a few ulps wide, rounding of individual
/// ratios dominates.
pub const ENVELOPE_SLACK: f64 = 1e-12;

/// Below this, `ln(log1p(e^u)) = u` to double precision.
const TINY_LN: f64 = -30.0;

#[derive(Debug, Clone)]
pub struct ConsensusState {
    n: u64,
    x: Vec<f64>,
    w: Vec<f64>,
    ln_scale: f64,
    wedge: WedgeTracker,
    ratios: Vec<Option<f64>>,
    envelope: Option<(f64, f64)>,
    scratch: Vec<f64>,
}

impl ConsensusState {
    pub fn new(x0: &[f64], w0: &NonNegVector) -> Result<Self> {
        let p = w0.dim();
        if x0.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: x0.len() });
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial values must be finite"));
        }
        let mut s = ConsensusState {
            n: 0,
            x: x0.to_vec(),
            w: w0.as_slice().to_vec(),
            ln_scale: 0.0,
            wedge: WedgeTracker::new(x0, w0.as_slice()),
            ratios: Vec::new(),
            envelope: None,
            scratch: vec![0.0; p],
        };
        s.rescale();
        s.refresh();
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Per-node `x^i/w^i`; `None` where the weight is zero.
    pub fn ratios(&self) -> &[Option<f64>] {
        &self.ratios
    }

    /// `(min, max)` of the ratios over nodes with positive weight.
    pub fn envelope(&self) -> (f64, f64) {
        self.envelope.expect("weights are never all zero")
    }

    /// Value vector divided by `e^{ln_scale}`.
    pub fn scaled_x(&self) -> &[f64] {
        &self.x
    }

    /// Weight vector divided by `e^{ln_scale}`.
    pub fn scaled_w(&self) -> &[f64] {
        &self.w
    }

    pub fn ln_scale(&self) -> f64 {
        self.ln_scale
    }

    pub fn wedge(&self) -> &ScaledVec {
        self.wedge.scaled()
    }

    /// Applies one matrix: `x ← A x`, `w ← A w`.
    pub fn step(&mut self, a: &NonNegMatrix) -> Result<()> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: a.dim() });
        }
        if !a.is_row_allowable() {
            return Err(invalid("consensus step requires a row-allowable matrix"));
        }
        a.apply_into(&self.x, &mut self.scratch);
        std::mem::swap(&mut self.x, &mut self.scratch);
        a.apply_into(&self.w, &mut self.scratch);
        std::mem::swap(&mut self.w, &mut self.scratch);
        self.wedge.apply(a);
        self.rescale();
        self.refresh();
        self.n += 1;
        Ok(())
    }

    fn rescale(&mut self) {
        let m = self.x.iter().chain(&self.w).fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 0.0 && m != 1.0 {
            let inv = 1.0 / m;
            self.x.iter_mut().chain(self.w.iter_mut()).for_each(|v| *v *= inv);
            self.ln_scale += m.ln();
        }
    }

    fn refresh(&mut self) {
        self.ratios = self.x.iter().zip(&self.w).map(|(x, w)| (*w > 0.0).then(|| x / w)).collect();
        self.envelope = self.ratios.iter().flatten().fold(None, |env, &r| match env {
            None => Some((r, r)),
            Some((lo, hi)) => Some((f64::min(lo, r), f64::max(hi, r))),
        });
    }

    /// `(qᵀx)/(qᵀw)`; lies inside the envelope for every `q ≥ 0`.
    pub fn weighted_ratio(&self, q: &[f64]) -> Result<f64> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: q.len() });
        }
        if q.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("weighting vector must be nonnegative"));
        }
        let qw: f64 = q.iter().zip(&self.w).map(|(a, b)| a * b).sum();
        if qw <= 0.0 {
            return Err(invalid("weighting vector has no overlap with the weights"));
        }
        let qx: f64 = q.iter().zip(&self.x).map(|(a, b)| a * b).sum();
        Ok(qx / qw)
    }

    /// `ln(max − min)` of the ratios, resolved through `x ∧ w`.
    pub fn ln_envelope_width(&self) -> f64 {
        let z = self.wedge.scaled();
        let idx = self.wedge.index();
        let shift = z.log_scale - 2.0 * self.ln_scale;
        let mut best = f64::NEG_INFINITY;
        for (pos, &(i, j)) in idx.pairs().iter().enumerate() {
            if self.w[i] > 0.0 && self.w[j] > 0.0 && z.values[pos] != 0.0 {
                best = best.max(z.values[pos].abs().ln() - self.w[i].ln() - self.w[j].ln());
            }
        }
        best + shift
    }

    /// `ln ‖x̄ − w̄‖_TV`, defined when `x ≥ 0` and `x ≠ 0`.
    pub fn ln_tv(&self) -> Option<f64> {
        if self.x.iter().any(|&v| v < 0.0) {
            return None;
        }
        let sx: f64 = self.x.iter().sum();
        if sx <= 0.0 {
            return None;
        }
        let sw: f64 = self.w.iter().sum();
        let z = self.wedge.scaled();
        let idx = self.wedge.index();
        let p = self.dim();
        // x_k Σw − w_k Σx = Σ_j (x∧w)_{kj}
        let total: f64 = (0..p).map(|k| (0..p).map(|j| idx.oriented(&z.values, k, j)).sum::<f64>().abs()).sum();
        if total == 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        Some((0.5 * total).ln() + z.log_scale - 2.0 * self.ln_scale - (sx * sw).ln())
    }

    /// `ln h(x_n, w_n)`, defined when both vectors are strictly positive.
    pub fn ln_hilbert(&self) -> Option<f64> {
        if self.x.iter().chain(&self.w).any(|&v| v <= 0.0) {
            return None;
        }
        let ln_width = self.ln_envelope_width();
        let (lo, _) = self.envelope();
        let ln_d = ln_width - lo.ln();
        Some(if ln_d < TINY_LN { ln_d } else { ln_d.exp().ln_1p().ln() })
    }

    /// `ln max_i |r_i − L|` for the limit `L = mean_u (uᵀx)/(uᵀw)`, each
    /// `u ≥ 0` being a left vector carried to the current time.
    fn ln_error_against(&self, us: &[Vec<f64>]) -> f64 {
        let z = self.wedge.scaled();
        let idx = self.wedge.index();
        let p = self.dim();
        let weights: Vec<f64> = us
            .iter()
            .map(|u| 1.0 / (us.len() as f64 * u.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>()))
            .collect();
        let shift = z.log_scale - 2.0 * self.ln_scale;
        let mut best = f64::NEG_INFINITY;
        for i in 0..p {
            if self.w[i] <= 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for (u, c) in us.iter().zip(&weights) {
                let s: f64 = (0..p).map(|k| u[k] * idx.oriented(&z.values, i, k)).sum();
                acc += c * s;
            }
            if acc != 0.0 {
                best = best.max(acc.abs().ln() - self.w[i].ln());
            }
        }
        best + shift
    }
}

/// When checkpoint rows are recorded.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointSchedule {
    /// `⌈ratio^k⌉` for `k = 0, 1, …`, deduplicated, plus the final step.
    Geometric {
        ratio: f64,
    },
    /// Every `every` steps, plus the final step.
    Linear {
        every: u64,
    },
    Explicit(Vec<u64>),
}

impl Default for CheckpointSchedule {
    fn default() -> Self {
        CheckpointSchedule::Geometric { ratio: 1.2 }
    }
}

impl CheckpointSchedule {
    pub fn points(&self, n: u64) -> Result<Vec<u64>> {
        let mut pts = match self {
            CheckpointSchedule::Geometric { ratio } => {
                if ratio.is_nan() || *ratio <= 1.0 {
                    return Err(invalid("geometric checkpoint ratio must exceed 1"));
                }
                let mut v = Vec::new();
                let mut x = 1.0f64;
                loop {
                    let c = x.ceil() as u64;
                    if c > n {
                        break;
                    }
                    v.push(c);
                    x *= ratio;
                }
                v
            }
            CheckpointSchedule::Linear { every } => {
                if *every == 0 {
                    return Err(invalid("linear checkpoint spacing must be positive"));
                }
                (1..=n / every).map(|k| k * every).collect()
            }
            CheckpointSchedule::Explicit(v) => v.iter().copied().filter(|&c| c >= 1 && c <= n).collect(),
        };
        if !matches!(self, CheckpointSchedule::Explicit(_)) && n > 0 {
            pts.push(n);
        }
        pts.sort_unstable();
        pts.dedup();
        Ok(pts)
    }
}

/// One checkpoint of a trajectory. Error-type columns are natural logs
/// (`-inf` for an exact zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub n: u64,
    pub ln_max_ratio_error: f64,
    pub ln_tv: Option<f64>,
    pub envelope_min: f64,
    pub envelope_max: f64,
    pub ln_envelope_width: f64,
    pub ln_hilbert: Option<f64>,
    pub limit_estimate: f64,
}

impl TrajectoryRow {
    pub fn max_ratio_error(&self) -> f64 {
        self.ln_max_ratio_error.exp()
    }

    pub fn tv(&self) -> Option<f64> {
        self.ln_tv.map(f64::exp)
    }

    pub fn hilbert(&self) -> Option<f64> {
        self.ln_hilbert.map(f64::exp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    /// Consensus limit: `1ᵀx₀/1ᵀw₀` when every emission was
    /// column-stochastic, otherwise the midpoint of the final envelope.
    pub limit: f64,
    pub column_stochastic: bool,
    pub steps: u64,
    /// `(min, max)` ratio envelope after the last step.
    pub final_envelope: (f64, f64),
}

impl Trajectory {
    pub fn max_ratio_error_series(&self) -> Vec<(u64, f64)> {
        self.rows.iter().map(|r| (r.n, r.ln_max_ratio_error)).collect()
    }

    /// `(n, ln tv)` rows; empty when `x₀` has negative entries.
    pub fn tv_series(&self) -> Vec<(u64, f64)> {
        self.rows.iter().filter_map(|r| r.ln_tv.map(|t| (r.n, t))).collect()
    }

    pub fn envelope_series(&self) -> Vec<(u64, f64, f64)> {
        envelope_series(self)
    }

    /// Checkpoints whose envelope fails to contain the limit, up to
    /// [`ENVELOPE_SLACK`].
    pub fn unbracketed_checkpoints(&self) -> Vec<u64> {
        self.rows
            .iter()
            .filter(|r| {
                let slack = ENVELOPE_SLACK * r.envelope_min.abs().max(r.envelope_max.abs());
                self.limit < r.envelope_min - slack || self.limit > r.envelope_max + slack
            })
            .map(|r| r.n)
            .collect()
    }

    /// Checkpoints where the envelope widened beyond [`ENVELOPE_SLACK`].
    pub fn envelope_violations(&self) -> Vec<u64> {
        self.rows
            .windows(2)
            .filter(|w| {
                w[1].envelope_min < w[0].envelope_min - ENVELOPE_SLACK * w[0].envelope_min.abs()
                    || w[1].envelope_max > w[0].envelope_max + ENVELOPE_SLACK * w[0].envelope_max.abs()
            })
            .map(|w| w[1].n)
            .collect()
    }
}

/// Per-checkpoint `(n, min ratio, max ratio)`.
pub fn envelope_series(traj: &Trajectory) -> Vec<(u64, f64, f64)> {
    traj.rows.iter().map(|r| (r.n, r.envelope_min, r.envelope_max)).collect()
}

/// `ln ‖x̄_n − w̄_n‖_TV` per checkpoint.
pub fn tv_series(traj: &Trajectory) -> Vec<(u64, f64)> {
    traj.tv_series()
}

struct Snapshot {
    n: u64,
    state: ConsensusState,
}

/// Runs `n` steps and records the checkpoint rows.
///
/// Emissions are kept as alphabet symbols; when the product is not
/// column-stochastic a backward pass transports the two final extremal
/// nodes' coordinate functionals to every checkpoint, which turns
/// `r_i(n) − L` into a wedge-weighted sum with no cancellation.
pub fn run(
    process: &mut MatrixProcess,
    x0: &[f64],
    w0: &NonNegVector,
    n: u64,
    schedule: &CheckpointSchedule,
) -> Result<Trajectory> {
    let mut state = ConsensusState::new(x0, w0)?;
    let checkpoints = schedule.points(n)?;
    let stochastic: Vec<bool> = process.alphabet().iter().map(|a| a.is_column_stochastic(STOCHASTIC_TOL)).collect();
    let mut symbols: Vec<u32> = Vec::with_capacity(n as usize);
    let mut column_stochastic = true;
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut next_cp = checkpoints.iter().peekable();
    for t in 1..=n {
        let s = process.next_symbol();
        column_stochastic &= stochastic[s];
        symbols.push(s as u32);
        state.step(&process.alphabet()[s])?;
        if next_cp.peek() == Some(&&t) {
            snapshots.push(Snapshot { n: t, state: state.clone() });
            next_cp.next();
        }
    }
    let final_envelope = state.envelope();
    let p = state.dim();
    let limit;
    let mut ln_errors = vec![f64::NEG_INFINITY; snapshots.len()];
    if column_stochastic {
        let sw: f64 = w0.as_slice().iter().sum();
        limit = x0.iter().sum::<f64>() / sw;
        let ones = vec![vec![1.0; p]];
        for (e, snap) in ln_errors.iter_mut().zip(&snapshots) {
            *e = snap.state.ln_error_against(&ones);
        }
    } else {
        limit = 0.5 * (final_envelope.0 + final_envelope.1);
        let (lo_node, hi_node) = extremal_nodes(&state);
        let mut us = vec![unit(p, lo_node), unit(p, hi_node)];
        let mut scratch = vec![0.0; p];
        let mut k = snapshots.len();
        for t in (1..=n).rev() {
            if k > 0 && snapshots[k - 1].n == t {
                ln_errors[k - 1] = snapshots[k - 1].state.ln_error_against(&us);
                k -= 1;
            }
            let a = &process.alphabet()[symbols[(t - 1) as usize] as usize];
            for u in us.iter_mut() {
                a.apply_transpose_into(u, &mut scratch);
                std::mem::swap(u, &mut scratch);
                let m = u.iter().fold(0.0f64, |m, v| m.max(*v));
                u.iter_mut().for_each(|v| *v /= m);
            }
        }
    }
    let rows = snapshots
        .iter()
        .zip(ln_errors)
        .map(|(snap, ln_err)| {
            let (lo, hi) = snap.state.envelope();
            TrajectoryRow {
                n: snap.n,
                ln_max_ratio_error: ln_err,
                ln_tv: snap.state.ln_tv(),
                envelope_min: lo,
                envelope_max: hi,
                ln_envelope_width: snap.state.ln_envelope_width(),
                ln_hilbert: snap.state.ln_hilbert(),
                limit_estimate: limit,
            }
        })
        .collect();
    Ok(Trajectory { rows, limit, column_stochastic, steps: n, final_envelope })
}

fn unit(p: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; p];
    v[i] = 1.0;
    v
}

fn extremal_nodes(state: &ConsensusState) -> (usize, usize) {
    let mut lo = None::<(usize, f64)>;
    let mut hi = None::<(usize, f64)>;
    for (i, r) in state.ratios().iter().enumerate() {
        if let Some(r) = *r {
            if lo.is_none_or(|(_, v)| r < v) {
                lo = Some((i, r));
            }
            if hi.is_none_or(|(_, v)| r > v) {
                hi = Some((i, r));
            }
        }
    }
    (lo.expect("positive weight").0, hi.expect("positive weight").0)
}

/// Slope of `ln value` against `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    pub correlation: f64,
    pub points: usize,
}

/// Minimum number of usable points for a rate fit.
pub const MIN_FIT_POINTS: usize = 10;

/// Default trailing fraction of checkpoints used by rate fits.
pub const DEFAULT_FIT_WINDOW: f64 = 0.5;

/// Least-squares slope of `ln value` against `n` over the trailing
/// `window` fraction of the series. Nonpositive values are dropped.
pub fn fit_rate(series: &[(u64, f64)], window: f64) -> Result<RateFit> {
    let logs: Vec<(u64, f64)> =
        series.iter().map(|&(n, v)| (n, if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })).collect();
    fit_log_rate(&logs, window)
}

/// As [`fit_rate`], for series already in natural-log form.
pub fn fit_log_rate(series: &[(u64, f64)], window: f64) -> Result<RateFit> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(invalid("fit window must lie in (0, 1]"));
    }
    let take = ((series.len() as f64 * window).ceil() as usize).min(series.len());
    let tail = &series[series.len() - take..];
    let (x, y): (Vec<f64>, Vec<f64>) = tail.iter().filter(|(_, l)| l.is_finite()).map(|&(n, l)| (n as f64, l)).unzip();
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { needed: MIN_FIT_POINTS, got: x.len() });
    }
    let f = fit_line(&x, &y);
    Ok(RateFit { rate: f.slope, intercept: f.intercept, correlation: f.correlation, points: f.points })
}

/// Index helper re-exported for callers that read the wedge directly.
pub fn pair_index(p: usize) -> PairIndex {
    PairIndex::new(p)
}
