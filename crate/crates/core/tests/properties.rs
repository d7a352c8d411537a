//! Randomized invariants of the contraction, pattern and consensus layers.

use proptest::prelude::*;

use ratcon::consensus::{run, CheckpointSchedule, ConsensusState};
use ratcon::generators::{Digraph, ProcessSpec, PushSumConfig};
use ratcon::primitivity::{bool_product, is_family_primitive, pattern_of, DEFAULT_STATE_CAP};
use ratcon::vector::{hilbert_distance, normalize_simplex, tv_distance};
use ratcon::{birkhoff_tau, NonNegMatrix, NonNegVector};

fn positive_vec(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..10.0, p)
}

fn positive_matrix(p: usize) -> impl Strategy<Value = NonNegMatrix> {
    prop::collection::vec(0.01f64..10.0, p * p).prop_map(move |d| NonNegMatrix::new(p, d).unwrap())
}

/// Random support with one guaranteed entry per row and column, placed on a
/// shifted diagonal so the matrix is allowable.
fn allowable_matrix(p: usize) -> impl Strategy<Value = NonNegMatrix> {
    (prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..10.0], p * p), 0..p, positive_vec(p)).prop_map(
        move |(mut d, shift, keep)| {
            for i in 0..p {
                d[i * p + (i + shift) % p] = keep[i];
            }
            NonNegMatrix::new(p, d).unwrap()
        },
    )
}

fn sized<T: std::fmt::Debug, S: Strategy<Value = T>>(
    f: impl Fn(usize) -> S + 'static,
) -> impl Strategy<Value = (usize, T)> {
    (2usize..=6).prop_flat_map(move |p| (Just(p), f(p)))
}

proptest! {
    #[test]
    fn hilbert_contraction((_, (a, x, y)) in sized(|p| (positive_matrix(p), positive_vec(p), positive_vec(p)))) {
        let lhs = hilbert_distance(&a.apply(&x).unwrap(), &a.apply(&y).unwrap()).unwrap();
        let rhs = birkhoff_tau(&a).unwrap() * hilbert_distance(&x, &y).unwrap();
        prop_assert!(lhs <= rhs + 1e-10, "{lhs} > {rhs}");
    }

    #[test]
    fn tau_is_sub_multiplicative((_, (a, b)) in sized(|p| (allowable_matrix(p), allowable_matrix(p)))) {
        let ab = birkhoff_tau(&a.mul(&b).unwrap()).unwrap();
        let bound = birkhoff_tau(&a).unwrap() * birkhoff_tau(&b).unwrap();
        prop_assert!(ab <= bound + 1e-12, "{ab} > {bound}");
    }

    #[test]
    fn tau_is_bounded_and_scale_invariant(
        (_, (a, r, c)) in sized(|p| (allowable_matrix(p), positive_vec(p), positive_vec(p)))
    ) {
        let t = birkhoff_tau(&a).unwrap();
        prop_assert!((0.0..=1.0).contains(&t));
        let scaled = birkhoff_tau(&a.scale(&r, &c).unwrap()).unwrap();
        prop_assert!((t - scaled).abs() <= 1e-12, "{t} vs {scaled}");
    }

    #[test]
    fn tv_hilbert_bound((_, (x, y)) in sized(|p| (positive_vec(p), positive_vec(p)))) {
        let (xi, eta) = (normalize_simplex(&x).unwrap(), normalize_simplex(&y).unwrap());
        let tv = tv_distance(&xi, &eta).unwrap();
        let h = hilbert_distance(&xi, &eta).unwrap();
        prop_assert!(tv <= 0.5 * h.exp_m1() + 1e-12, "tv {tv}, h {h}");
    }

    #[test]
    fn bellman_sandwich((p, (b, x)) in sized(|p| (positive_matrix(p), allowable_matrix(p)))) {
        let m = b.mul(&x).unwrap();
        for i in 0..p {
            for j in 0..p {
                let ratios = (0..p).map(|r| b.get(i, r) / b.get(j, r));
                let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
                for k in 0..p {
                    let q = m.get(i, k) / m.get(j, k);
                    prop_assert!(q >= lo * (1.0 - 1e-12) && q <= hi * (1.0 + 1e-12), "{lo} ≤ {q} ≤ {hi}");
                }
            }
        }
    }

    #[test]
    fn boolean_pattern_is_multiplicative((_, (a, b)) in sized(|p| (allowable_matrix(p), allowable_matrix(p)))) {
        let product = pattern_of(&a.mul(&b).unwrap());
        prop_assert_eq!(product, bool_product(&pattern_of(&a), &pattern_of(&b)).unwrap());
    }

    #[test]
    fn family_primitivity_ignores_magnitudes(
        (p, (fam, seeds)) in (2usize..=4).prop_flat_map(|p| {
            (Just(p), (prop::collection::vec(allowable_matrix(p), 1..=3), prop::collection::vec(0.01f64..100.0, 3 * 16)))
        })
    ) {
        let patterns: Vec<_> = fam.iter().map(pattern_of).collect();
        let rescaled: Vec<_> = fam
            .iter()
            .enumerate()
            .map(|(f, a)| {
                let data = a.as_slice().iter().enumerate().map(|(k, &v)| v * seeds[(f * 16 + k) % seeds.len()]).collect();
                pattern_of(&NonNegMatrix::new(p, data).unwrap())
            })
            .collect();
        let base = is_family_primitive(&patterns, DEFAULT_STATE_CAP).unwrap();
        let other = is_family_primitive(&rescaled, DEFAULT_STATE_CAP).unwrap();
        prop_assert_eq!(base.family_primitive, other.family_primitive);
    }
}

/// A lossy push-sum process on the complete graph with signed numerators.
fn consensus_case() -> impl Strategy<Value = (ProcessSpec, u64, Vec<f64>, Vec<f64>)> {
    (2usize..=5, 0.0f64..0.6, any::<u64>()).prop_flat_map(|(p, loss, seed)| {
        let spec = ProcessSpec::PushSum(PushSumConfig::uniform(Digraph::complete(p), 0.5, loss).unwrap());
        (Just(spec), Just(seed), prop::collection::vec(-1.0f64..1.0, p), positive_vec(p))
    })
}

const STEPS: usize = 2_000;

fn envelope_scale(state: &ConsensusState) -> f64 {
    let (lo, hi) = state.envelope();
    lo.abs().max(hi.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelope_is_monotone((spec, seed, x0, w0) in consensus_case()) {
        let mut proc = spec.build(seed, 0).unwrap();
        let mut state = ConsensusState::new(&x0, &NonNegVector::new(w0).unwrap()).unwrap();
        for _ in 0..STEPS {
            let (lo, hi) = state.envelope();
            state.step(proc.next_matrix()).unwrap();
            let (nlo, nhi) = state.envelope();
            prop_assert!(nlo >= lo - 1e-12 * lo.abs() && nhi <= hi + 1e-12 * hi.abs());
        }
    }

    #[test]
    fn weighted_ratios_lie_in_the_envelope(
        (spec, seed, x0, w0) in consensus_case(),
        qs in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 1000)
    ) {
        let mut proc = spec.build(seed, 0).unwrap();
        let p = proc.dim();
        let mut state = ConsensusState::new(&x0, &NonNegVector::new(w0).unwrap()).unwrap();
        for t in 0..STEPS {
            if t % 500 == 0 {
                let (lo, hi) = state.envelope();
                let slack = 1e-12 * envelope_scale(&state);
                for q in &qs {
                    let v = state.weighted_ratio(&q[..p]).unwrap();
                    prop_assert!(v >= lo - slack && v <= hi + slack, "{lo} ≤ {v} ≤ {hi}");
                }
            }
            state.step(proc.next_matrix()).unwrap();
        }
    }

    #[test]
    fn ratios_are_scale_equivariant((spec, seed, x0, w0) in consensus_case(), c in 0.1f64..10.0) {
        let w0 = NonNegVector::new(w0).unwrap();
        let scaled: Vec<f64> = x0.iter().map(|v| c * v).collect();
        let (mut pa, mut pb) = (spec.build(seed, 0).unwrap(), spec.build(seed, 0).unwrap());
        let mut a = ConsensusState::new(&x0, &w0).unwrap();
        let mut b = ConsensusState::new(&scaled, &w0).unwrap();
        for _ in 0..STEPS {
            a.step(pa.next_matrix()).unwrap();
            b.step(pb.next_matrix()).unwrap();
            let tol = 1e-12 * c * envelope_scale(&a);
            for (ra, rb) in a.ratios().iter().zip(b.ratios()) {
                let (ra, rb) = (ra.unwrap(), rb.unwrap());
                prop_assert!((rb - c * ra).abs() <= tol, "{rb} vs {}", c * ra);
            }
        }
    }

    #[test]
    fn lossless_runs_conserve_mass(
        p in 2usize..=5,
        seed in any::<u64>(),
        x0 in prop::collection::vec(0.01f64..1.0, 5),
        w0 in prop::collection::vec(0.01f64..1.0, 5)
    ) {
        let spec = ProcessSpec::PushSum(PushSumConfig::uniform(Digraph::complete(p), 0.5, 0.0).unwrap());
        let mut proc = spec.build(seed, 0).unwrap();
        let (x0, w0) = (&x0[..p], w0[..p].to_vec());
        let (sx, sw): (f64, f64) = (x0.iter().sum(), w0.iter().sum());
        let mut state = ConsensusState::new(x0, &NonNegVector::new(w0).unwrap()).unwrap();
        let ones = vec![1.0; p];
        for _ in 0..STEPS {
            state.step(proc.next_matrix()).unwrap();
            let scale = state.ln_scale().exp();
            let (tx, tw): (f64, f64) = (state.scaled_x().iter().sum(), state.scaled_w().iter().sum());
            prop_assert!((tx * scale - sx).abs() <= 1e-12 * sx);
            prop_assert!((tw * scale - sw).abs() <= 1e-12 * sw);
            let r = state.weighted_ratio(&ones).unwrap();
            prop_assert!((r - sx / sw).abs() <= 1e-12 * (sx / sw));
        }
    }

    #[test]
    fn limit_is_bracketed_by_every_checkpoint((spec, seed, x0, w0) in consensus_case()) {
        let mut proc = spec.build(seed, 0).unwrap();
        let traj = run(&mut proc, &x0, &NonNegVector::new(w0).unwrap(), STEPS as u64, &CheckpointSchedule::default())
            .unwrap();
        prop_assert_eq!(traj.unbracketed_checkpoints(), Vec::<u64>::new());
        prop_assert_eq!(traj.envelope_violations(), Vec::<u64>::new());
    }
}
