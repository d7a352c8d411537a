//! The `simulate`, `spectrum`, `gap` and `primitivity` subcommands, each
//! producing a [`ReportBundle`] from a configuration.

use serde_json::{json, Value};

use ratcon::consensus::{self, fit_log_rate};
use ratcon::primitivity::{
    is_family_primitive, pattern_of, replay_word, sample_backward_indices, sample_forward_indices, survival_curve,
    tail_fit, DEFAULT_TAIL_MIN_COUNT,
};
use ratcon::spectrum::{
    check_det_identity, estimate_gap_birkhoff, estimate_spectrum_qr, estimate_sum_top2_wedge_replicated,
};
use ratcon::stats::{ks_critical, ks_distance};

use crate::config::ExperimentConfig;
use crate::report::{cell, ln_cell, opt_cell, ReportBundle, Table};
use crate::HarnessError;

/// Stream used for the single trajectory of `simulate`.
pub const SIMULATE_STREAM: u64 = 0;
/// Streams for forward and backward index sampling.
pub const FORWARD_STREAM: u64 = 1 << 40;
pub const BACKWARD_STREAM: u64 = (1 << 40) + 1;

/// KS level used by the primitivity report.
pub const KS_ALPHA: f64 = 0.01;

fn bundle(cmd: &str, cfg: &ExperimentConfig) -> ReportBundle {
    let echo = serde_json::to_value(cfg).expect("config serializes");
    ReportBundle::new(cmd, cfg.seed, echo)
}

fn fit_json(fit: Result<consensus::RateFit, ratcon::Error>) -> Value {
    match fit {
        Ok(f) => json!({ "rate": f.rate, "intercept": f.intercept, "correlation": f.correlation, "points": f.points }),
        Err(e) => json!({ "declined": e.to_string() }),
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<ReportBundle, HarnessError> {
    let spec = cfg.process_spec()?;
    let p = spec.dim();
    let (x0, w0) = (cfg.x0(p)?, cfg.w0(p)?);
    let mut proc = spec.compile()?.stream(cfg.seed, SIMULATE_STREAM);
    let traj = consensus::run(&mut proc, &x0, &w0, cfg.horizon.n, &cfg.schedule()?)?;

    let mut table =
        Table::new(&["n", "max_ratio_error", "tv", "envelope_min", "envelope_max", "hilbert", "limit_estimate"]);
    for r in &traj.rows {
        table.push(vec![
            r.n.to_string(),
            ln_cell(r.ln_max_ratio_error),
            opt_cell(r.ln_tv.map(ln_cell)),
            cell(r.envelope_min),
            cell(r.envelope_max),
            opt_cell(r.ln_hilbert.map(ln_cell)),
            cell(r.limit_estimate),
        ]);
    }
    let window = cfg.horizon.fit_window;
    let err_fit = fit_log_rate(&traj.max_ratio_error_series(), window);
    let tv = traj.tv_series();
    let tv_fit = if tv.is_empty() { None } else { Some(fit_log_rate(&tv, window)) };
    let last = traj.rows.last();
    let mut b = bundle("simulate", cfg);
    b.add_table(format!("{}_trajectory.csv", cfg.output.prefix), &table);
    b.summary = json!({
        "command": "simulate",
        "process": spec.kind_name(),
        "dim": p,
        "steps": traj.steps,
        "column_stochastic": traj.column_stochastic,
        "limit": traj.limit,
        "final_envelope": [traj.final_envelope.0, traj.final_envelope.1],
        "final_max_ratio_error": last.map(|r| ln_cell(r.ln_max_ratio_error)),
        "max_ratio_error_rate": fit_json(err_fit),
        "tv_rate": tv_fit.map(fit_json),
        "checks": {
            "envelope_monotone": traj.envelope_violations().is_empty(),
            "limit_bracketed": traj.unbracketed_checkpoints().is_empty(),
        },
    });
    Ok(b)
}

pub fn spectrum(cfg: &ExperimentConfig) -> Result<ReportBundle, HarnessError> {
    let spec = cfg.process_spec()?;
    let compiled = spec.compile()?;
    let p = spec.dim();
    let opts = cfg.qr_options(p);
    let est = estimate_spectrum_qr(&compiled, cfg.seed, &opts)?;
    let det = check_det_identity(&compiled, cfg.seed, opts.n, &opts)?;
    let wedge = if p >= 2 {
        let (x0, w0) = (cfg.x0(p)?, cfg.w0(p)?);
        match estimate_sum_top2_wedge_replicated(&compiled, cfg.seed, &x0, w0.as_slice(), opts.n, opts.replicates) {
            Ok(s) => json!({ "mean": s.mean, "stderr": s.stderr }),
            Err(e) => json!({ "declined": e.to_string() }),
        }
    } else {
        Value::Null
    };

    let k = est.lambda.len();
    let mut lam = Table::new(&["i", "lambda", "stderr"]);
    for i in 0..k {
        lam.push(vec![(i + 1).to_string(), cell(est.lambda[i]), cell(est.stderr[i])]);
    }
    let header: Vec<String> =
        std::iter::once("replicate".to_string()).chain((1..=k).map(|i| format!("lambda_{i}"))).collect();
    let mut reps = Table::new(&header);
    for (r, l) in est.per_replicate.iter().enumerate() {
        reps.push(std::iter::once(r.to_string()).chain(l.iter().map(|&v| cell(v))).collect());
    }
    let mut b = bundle("spectrum", cfg);
    b.add_table(format!("{}_lambda.csv", cfg.output.prefix), &lam);
    b.add_table(format!("{}_replicates.csv", cfg.output.prefix), &reps);
    b.summary = json!({
        "command": "spectrum",
        "process": spec.kind_name(),
        "dim": p,
        "lambda": est.lambda,
        "stderr": est.stderr,
        "gap": est.gap,
        "gap_stderr": est.gap_stderr,
        "raw_gap": est.raw_gap,
        "n_steps": est.n_steps,
        "replicates": est.replicates,
        "warnings": est.warnings,
        "sum_top2_wedge": wedge,
        "det_identity": { "lhs": det.lhs, "rhs": det.rhs, "rhs_stderr": det.rhs_stderr },
    });
    Ok(b)
}

pub fn gap(cfg: &ExperimentConfig) -> Result<ReportBundle, HarnessError> {
    let spec = cfg.process_spec()?;
    let compiled = spec.compile()?;
    let p = spec.dim();
    let mut opts = cfg.qr_options(p);
    opts.k = opts.k.max(2).min(p);
    let mut table = Table::new(&["method", "m", "estimate", "stderr", "fraction_tau_one", "increase_m"]);
    let mut rows = Vec::new();
    let qr = if p >= 2 { Some(estimate_spectrum_qr(&compiled, cfg.seed, &opts)?) } else { None };
    if let Some(q) = &qr {
        table.push(vec!["qr".into(), String::new(), cell(q.gap), cell(q.gap_stderr), String::new(), String::new()]);
    }
    for &m in &cfg.estimators.birkhoff_m {
        let g = estimate_gap_birkhoff(&compiled, cfg.seed, m, cfg.estimators.trials)?;
        table.push(vec![
            "birkhoff".into(),
            m.to_string(),
            cell(g.value),
            cell(g.stderr),
            cell(g.fraction_tau_one),
            g.increase_m.to_string(),
        ]);
        rows.push(json!({
            "m": m, "estimate": g.value, "stderr": g.stderr,
            "fraction_tau_one": g.fraction_tau_one, "increase_m": g.increase_m,
        }));
    }
    let mut b = bundle("gap", cfg);
    b.add_table(format!("{}_gap.csv", cfg.output.prefix), &table);
    b.summary = json!({
        "command": "gap",
        "process": spec.kind_name(),
        "qr": qr.as_ref().map(|q| json!({ "gap": q.gap, "stderr": q.gap_stderr, "lambda": q.lambda })),
        "birkhoff": rows,
    });
    Ok(b)
}

pub fn primitivity(cfg: &ExperimentConfig) -> Result<ReportBundle, HarnessError> {
    let spec = cfg.process_spec()?;
    let compiled = spec.compile()?;
    let e = &cfg.estimators;
    let family: Vec<_> = compiled.support().into_iter().map(pattern_of).collect();
    let report = is_family_primitive(&family, e.state_cap)?;
    let replayed = match &report.witness_word {
        Some(w) => Some(replay_word(&family, w)?.is_full()),
        None => None,
    };
    let mut b = bundle("primitivity", cfg);
    let mut summary = json!({
        "command": "primitivity",
        "process": spec.kind_name(),
        "family_size": family.len(),
        "family_primitive": report.family_primitive,
        "witness_word": report.witness_word,
        "witness_replays": replayed,
        "states_explored": report.states_explored,
        "capped": report.capped,
    });
    if report.family_primitive {
        let n = e.primitivity_samples;
        let psi = sample_forward_indices(&mut compiled.stream(cfg.seed, FORWARD_STREAM), n, e.index_cap)?;
        let rho = sample_backward_indices(
            &mut compiled.stream(cfg.seed, BACKWARD_STREAM),
            n,
            e.backward_stride,
            e.index_cap,
        )?;
        let mut idx = Table::new(&["sample", "psi", "rho"]);
        for (k, (a, r)) in psi.iter().zip(&rho).enumerate() {
            idx.push(vec![k.to_string(), a.to_string(), r.to_string()]);
        }
        let to_f = |v: &[u64]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
        let ks = ks_distance(&to_f(&psi), &to_f(&rho));
        let crit = ks_critical(KS_ALPHA, psi.len(), rho.len());
        let (sp, sr) = (survival_curve(&psi, 1), survival_curve(&rho, 1));
        let mut surv = Table::new(&["x", "psi_survival", "rho_survival"]);
        let hi = sp.last().map_or(0, |s| s.0).max(sr.last().map_or(0, |s| s.0));
        let lo = sp.first().map_or(0, |s| s.0).min(sr.first().map_or(0, |s| s.0));
        let at = |c: &[(u64, f64)], x: u64| c.iter().find(|s| s.0 == x).map(|s| cell(s.1));
        for x in lo..=hi {
            surv.push(vec![x.to_string(), opt_cell(at(&sp, x)), opt_cell(at(&sr, x))]);
        }
        let tail = tail_fit(&psi, DEFAULT_TAIL_MIN_COUNT);
        b.add_table(format!("{}_indices.csv", cfg.output.prefix), &idx);
        b.add_table(format!("{}_survival.csv", cfg.output.prefix), &surv);
        summary["samples"] = json!(n);
        summary["ks_distance"] = json!(ks);
        summary["ks_critical"] = json!(crit);
        summary["ks_alpha"] = json!(KS_ALPHA);
        summary["psi_mean"] = json!(psi.iter().sum::<u64>() as f64 / n as f64);
        summary["rho_mean"] = json!(rho.iter().sum::<u64>() as f64 / n as f64);
        summary["psi_tail"] = match tail {
            Ok(t) => json!(t),
            Err(e) => json!({ "declined": e.to_string() }),
        };
    }
    b.summary = summary;
    Ok(b)
}
