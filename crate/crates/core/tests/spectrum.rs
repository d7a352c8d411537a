//! Spectrum estimators against closed-form oracles and cross-estimator
//! agreement.

use std::f64::consts::LN_2;

use ratcon::generators::{Digraph, ProcessSpec, PushSumConfig};
use ratcon::spectrum::{
    estimate_gap_birkhoff, estimate_spectrum_qr, estimate_sum_top2_wedge, estimate_sum_top2_wedge_replicated,
    rank1_residual,
};
use ratcon::stats::fit_line;
use ratcon::{birkhoff_tau, NonNegMatrix, QrOptions};

fn diag(d: &[f64]) -> NonNegMatrix {
    NonNegMatrix::diagonal(d).unwrap()
}

fn push_sum(graph: Digraph, loss: f64) -> ProcessSpec {
    ProcessSpec::PushSum(PushSumConfig::uniform(graph, 0.5, loss).unwrap())
}

/// For products of diagonal or upper-triangular matrices the exponents are
/// the sorted expectations of the log diagonal entries.
fn sorted_log_diagonal_means(mats: &[NonNegMatrix], probs: &[f64]) -> Vec<f64> {
    let p = mats[0].dim();
    let mut l: Vec<f64> = (0..p).map(|i| mats.iter().zip(probs).map(|(m, pr)| pr * m.get(i, i).ln()).sum()).collect();
    l.sort_by(|a, b| b.partial_cmp(a).unwrap());
    l
}

fn assert_spectrum_matches(mats: Vec<NonNegMatrix>, probs: Vec<f64>) {
    let oracle = sorted_log_diagonal_means(&mats, &probs);
    let p = oracle.len();
    let proc = ProcessSpec::IidFamily { matrices: mats, probs }.compile().unwrap();
    let est = estimate_spectrum_qr(&proc, 1, &QrOptions::new(p).with_n(50_000)).unwrap();
    for (i, want) in oracle.iter().enumerate() {
        let tol = 4.0 * est.stderr[i] + 1e-3;
        assert!((est.lambda[i] - want).abs() <= tol, "λ{}: {} vs {want} (tol {tol})", i + 1, est.lambda[i]);
    }
}

#[test]
fn qr_recovers_exponents_of_a_diagonal_family() {
    assert_spectrum_matches(vec![diag(&[2.0, 1.0, 0.5]), diag(&[1.0, 3.0, 1.0])], vec![0.5, 0.5]);
}

#[test]
fn qr_recovers_exponents_of_a_triangular_family() {
    let a = NonNegMatrix::from_rows(&[[2.0, 1.0, 0.5], [0.0, 0.5, 3.0], [0.0, 0.0, 1.5]]).unwrap();
    let b = NonNegMatrix::from_rows(&[[0.5, 2.0, 1.0], [0.0, 1.5, 0.2], [0.0, 0.0, 0.25]]).unwrap();
    assert_spectrum_matches(vec![a, b], vec![0.3, 0.7]);
}

#[test]
fn constant_matrix_exponents_are_log_eigenvalues() {
    // [[3,1],[1,3]] has eigenvalues 4 and 2
    let a = NonNegMatrix::from_rows(&[[3.0, 1.0], [1.0, 3.0]]).unwrap();
    let est = estimate_spectrum_qr(&ProcessSpec::Constant(a).compile().unwrap(), 0, &QrOptions::new(2).with_n(10_000))
        .unwrap();
    assert!((est.lambda[0] - 4f64.ln()).abs() < 1e-9);
    assert!((est.lambda[1] - 2f64.ln()).abs() < 1e-3);
}

#[test]
fn lossless_push_sum_has_zero_top_exponent() {
    let proc = push_sum(Digraph::circulant(6, &[1, 2]), 0.0).compile().unwrap();
    let est = estimate_spectrum_qr(&proc, 2, &QrOptions::new(2).with_n(50_000)).unwrap();
    // the starting frame contributes an O(1/n) transient
    assert!(est.lambda[0].abs() < 1e-4, "λ1 = {}", est.lambda[0]);
    assert!(est.gap > 3.0 * est.gap_stderr);
}

#[test]
fn two_node_push_sum_exponents_sum_to_minus_ln_two() {
    for loss in [0.0, 0.3, 0.6] {
        let proc = push_sum(Digraph::complete(2), loss).compile().unwrap();
        let est = estimate_spectrum_qr(&proc, 4, &QrOptions::new(2).with_n(20_000)).unwrap();
        let s = est.sum();
        assert!((s.mean + LN_2).abs() < 1e-9, "loss {loss}: Σλ = {}", s.mean);
    }
}

#[test]
fn wedge_agrees_with_qr_top_two_sum() {
    for (graph, loss) in [(Digraph::circulant(5, &[1, 2]), 0.2), (Digraph::complete(3), 0.5)] {
        let proc = push_sum(graph, loss).compile().unwrap();
        let p = proc.dim();
        let n = 50_000;
        let qr = estimate_spectrum_qr(&proc, 8, &QrOptions::new(2).with_n(n)).unwrap();
        let top2 = qr.sum();
        let x: Vec<f64> = (0..p).map(|i| 1.0 + i as f64).collect();
        let w = vec![1.0; p];
        let wedge = estimate_sum_top2_wedge_replicated(&proc, 9, &x, &w, n, 16).unwrap();
        let se = (top2.stderr.powi(2) + wedge.stderr.powi(2)).sqrt();
        assert!((top2.mean - wedge.mean).abs() <= 3.0 * se + 1e-3, "qr {} vs wedge {}", top2.mean, wedge.mean);
    }
}

#[test]
fn wedge_on_constant_diagonal_is_exact() {
    let mut proc = ProcessSpec::Constant(diag(&[2.0, 3.0])).build(0, 0).unwrap();
    let v = estimate_sum_top2_wedge(&mut proc, &[1.0, 0.0], &[0.0, 1.0], 1_000).unwrap();
    assert!((v - 6f64.ln()).abs() < 1e-12);
}

/// `τ` of a positive 2x2 matrix, `(√(ad) − √(bc))/(√(ad) + √(bc))` up to
/// orientation.
fn tau_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (s, t) = ((a * d).sqrt(), (b * c).sqrt());
    (s - t).abs() / (s + t)
}

#[test]
fn birkhoff_two_by_two_examples() {
    let a = NonNegMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
    let g = estimate_gap_birkhoff(&ProcessSpec::Constant(a).compile().unwrap(), 0, 1, 4).unwrap();
    assert!((g.value - 3f64.ln()).abs() < 1e-12);

    let b = NonNegMatrix::from_rows(&[[0.5, 0.25], [0.5, 0.75]]).unwrap();
    let oracle = -tau_2x2(0.5, 0.25, 0.5, 0.75).ln();
    assert!((oracle + (2.0 - 3f64.sqrt()).ln()).abs() < 1e-12);
    let g = estimate_gap_birkhoff(&ProcessSpec::Constant(b).compile().unwrap(), 0, 1, 4).unwrap();
    assert!((g.value - oracle).abs() < 1e-12);
    assert!(g.value <= 4f64.ln());
}

#[test]
fn birkhoff_tau_matches_two_by_two_closed_form() {
    let vals = [0.1, 0.7, 1.0, 2.5, 9.0];
    for &a in &vals {
        for &b in &vals {
            for &c in &vals {
                for &d in &vals {
                    let m = NonNegMatrix::from_rows(&[[a, b], [c, d]]).unwrap();
                    let t = birkhoff_tau(&m).unwrap();
                    assert!((t - tau_2x2(a, b, c, d)).abs() < 1e-12, "{a} {b} {c} {d}");
                }
            }
        }
    }
}

#[test]
fn birkhoff_below_positivity_index_asks_for_larger_m() {
    let proc = push_sum(Digraph::ring(4), 0.0).compile().unwrap();
    let g = estimate_gap_birkhoff(&proc, 0, 1, 32).unwrap();
    assert_eq!(g.value, 0.0);
    assert!(g.increase_m);
    assert_eq!(g.fraction_tau_one, 1.0);
}

#[test]
fn birkhoff_estimates_stay_below_the_qr_gap() {
    let proc = push_sum(Digraph::complete(3), 0.2).compile().unwrap();
    let qr = estimate_spectrum_qr(&proc, 0, &QrOptions::new(2).with_n(50_000)).unwrap();
    for m in [8, 32, 128] {
        let g = estimate_gap_birkhoff(&proc, 0, m, 128).unwrap();
        let se = (qr.gap_stderr.powi(2) + g.stderr.powi(2)).sqrt();
        assert!(g.value <= qr.gap + 3.0 * se, "m={m}: {} vs {}", g.value, qr.gap);
    }
}

#[test]
fn top_exponent_decreases_with_coupled_loss() {
    let graph = Digraph::circulant(5, &[1, 2]);
    let est = |r: f64| {
        let proc = push_sum(graph.clone(), r).compile().unwrap();
        estimate_spectrum_qr(&proc, 21, &QrOptions::new(1).with_n(30_000)).unwrap()
    };
    let levels = [0.0, 0.1, 0.3, 0.6];
    let results: Vec<_> = levels.iter().map(|&r| est(r)).collect();
    for w in results.windows(2) {
        let se = (w[0].stderr[0].powi(2) + w[1].stderr[0].powi(2)).sqrt();
        assert!(w[0].lambda[0] >= w[1].lambda[0] - 3.0 * se, "{} vs {}", w[0].lambda[0], w[1].lambda[0]);
    }
}

#[test]
fn two_node_gap_decreases_with_loss() {
    let gaps: Vec<_> = [0.0, 0.25, 0.5, 0.75]
        .iter()
        .map(|&r| {
            let proc = push_sum(Digraph::complete(2), r).compile().unwrap();
            estimate_spectrum_qr(&proc, 5, &QrOptions::new(2).with_n(30_000)).unwrap()
        })
        .collect();
    for w in gaps.windows(2) {
        let se = (w[0].gap_stderr.powi(2) + w[1].gap_stderr.powi(2)).sqrt();
        assert!(w[0].gap >= w[1].gap - 3.0 * se, "{} vs {}", w[0].gap, w[1].gap);
    }
}

fn residual_slope(spec: ProcessSpec, checkpoints: &[u64]) -> f64 {
    let mut proc = spec.build(13, 0).unwrap();
    let pts = rank1_residual(&mut proc, checkpoints).unwrap();
    let x: Vec<f64> = pts.iter().map(|p| p.n as f64).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.ln_ratio).collect();
    fit_line(&x, &y).slope
}

#[test]
fn rank_one_residual_decays_at_the_gap() {
    let a = NonNegMatrix::from_rows(&[[0.5, 0.25], [0.5, 0.75]]).unwrap();
    let slope = residual_slope(ProcessSpec::Constant(a), &[100, 200, 300, 400, 500]);
    assert!((slope + 4f64.ln()).abs() < 1e-9, "slope {slope}");

    let mut ident = ProcessSpec::Constant(NonNegMatrix::identity(3)).build(0, 0).unwrap();
    for p in rank1_residual(&mut ident, &[1, 10, 100]).unwrap() {
        assert!((p.ratio() - 1.0).abs() < 1e-12);
    }

    let spec = push_sum(Digraph::complete(2), 0.5);
    let qr = estimate_spectrum_qr(&spec.compile().unwrap(), 13, &QrOptions::new(2)).unwrap();
    let checkpoints: Vec<u64> = (1..=20).map(|k| k * 5_000).collect();
    let slope = residual_slope(spec, &checkpoints);
    assert!((slope + qr.gap).abs() <= 0.1 * qr.gap, "slope {slope} vs gap {}", qr.gap);
}
