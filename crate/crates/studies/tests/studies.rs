use rbmlab::{run_study, StudyConfig, StudyError, STUDIES};
use serde_json::json;

fn cfg(v: serde_json::Value) -> StudyConfig {
    StudyConfig::from_json(&v.to_string()).unwrap()
}

#[test]
fn unknown_study_is_reported() {
    let c = cfg(json!({"study": "nope", "model": "zero", "n_list": [4], "tau_list": [0.1], "p": 2,
        "t_final": 0.1, "m": 1, "n_substeps": 1, "seeds": [1]}));
    assert!(matches!(run_study(&c), Err(StudyError::UnknownStudy(_))));
    assert_eq!(STUDIES.len(), 8);
}

#[test]
fn strong_error_vanishes_without_interaction() {
    let c = cfg(json!({"study": "strong_rbm_error", "model": "ou-noninteracting", "n_list": [32],
        "tau_list": [0.1, 0.05, 0.025], "p": 2, "t_final": 0.5, "m": 1, "n_substeps": 2, "seeds": [1, 2]}));
    let r = run_study(&c).unwrap();
    assert!(r.passed());
    assert_eq!(r.check("zero_kernel_error_N32").unwrap().value, 0.0);
    assert!(r.fits.is_empty());
}

#[test]
fn strong_error_vanishes_for_a_single_batch() {
    let c = cfg(json!({"study": "strong_rbm_error", "model": "cubic-weak", "n_list": [8],
        "tau_list": [0.1, 0.05, 0.025], "p": 8, "t_final": 0.5, "m": 1, "n_substeps": 2, "seeds": [1]}));
    let r = run_study(&c).unwrap();
    let t = r.table("errors").unwrap();
    assert!(t.column("error").unwrap().iter().all(|&e| e == 0.0));
    assert!(r.check("single_batch_error_N8").unwrap().passed);
}

#[test]
fn strong_error_grows_with_tau() {
    let c = cfg(json!({"study": "strong_rbm_error", "model": "linear-strong", "n_list": [64],
        "tau_list": [0.04, 0.02, 0.01], "p": 2, "t_final": 0.5, "m": 1, "n_substeps": 4, "seeds": [1, 2, 3, 4]}));
    let r = run_study(&c).unwrap();
    let fit = &r.fits["error_vs_tau_N64"];
    assert!(fit.slope > 0.3 && fit.slope < 0.8, "{}", fit.slope);
    assert_eq!(fit.seed_slopes.len(), 4);
    assert!(fit.interval.is_some());
}

#[test]
fn low_sample_mean_field_comparison_hits_the_floor() {
    // Signal ~1e-3 against a floor of several 1e-3 at M = 2e4.
    let c = cfg(json!({"study": "ginf_vs_fp", "model": "linear-strong", "n_list": [1],
        "tau_list": [0.2, 0.1, 0.05], "p": 2, "t_final": 0.4, "m": 20000, "n_substeps": 4, "seeds": [1, 2],
        "options": {"n_cells": 256}}));
    match run_study(&c) {
        Err(StudyError::Floor { floor, signal, m, recommended_m }) => {
            assert_eq!(m, 20000);
            assert!(floor > signal / 2.0);
            assert!(recommended_m > m);
        }
        other => panic!("expected a floor error, got {other:?}"),
    }
}

#[test]
fn one_step_comparison_runs_with_a_single_seed() {
    let c = cfg(json!({"study": "ginf_one_step", "model": {"drift": [0.0, 0.0], "kernel": {"linear": 2.0}, "sigma": 1.0},
        "n_list": [1], "tau_list": [0.2, 0.1, 0.05], "p": 2, "t_final": 0.2, "m": 50000, "n_substeps": 5, "seeds": [1],
        "options": {"n_cells": 512}}));
    let r = run_study(&c).unwrap();
    assert!(r.notes.iter().any(|n| n.contains("single seed")));
    let w = r.table("distances").unwrap().column("w1").unwrap();
    assert_eq!(w.len(), 3);
    // Largest tau has the largest one-step error.
    assert!(w[0] > w[2]);
}

#[test]
fn chaos_rate_reproduces_the_exact_anchors() {
    let c = cfg(json!({"study": "chaos_rate", "model": "zero", "n_list": [16, 32, 64], "tau_list": [0.1], "p": 2,
        "t_final": 0.1, "m": 1, "n_substeps": 1, "seeds": [1, 2], "options": {"k": 2, "replicates": 20000}}));
    let r = run_study(&c).unwrap();
    assert!(r.check("exact_N4_p2_k2").unwrap().passed);
    assert!(r.check("exact_N6_p2_k2").unwrap().passed);
    assert!(r.check("mc_N4_p2_k2").unwrap().passed);
    let fit = &r.fits["epsilon_vs_n"];
    assert!(fit.slope < -0.7 && fit.slope > -1.3, "{}", fit.slope);
    // Deterministic in the config.
    let again = run_study(&c).unwrap();
    assert_eq!(r.values, again.values);
}

#[test]
fn contraction_follows_the_confinement_rate() {
    let c = cfg(json!({"study": "contraction", "model": "linear-strong", "n_list": [1], "tau_list": [0.2], "p": 2,
        "t_final": 2.0, "m": 5000, "n_substeps": 4, "seeds": [1, 2]}));
    let r = run_study(&c).unwrap();
    assert!(r.passed(), "{:?}", r.checks);
    assert_eq!(r.table("ratios").unwrap().rows.len(), 20);
    let weak = cfg(json!({"study": "contraction", "model": "cubic-weak", "n_list": [1], "tau_list": [0.2], "p": 2,
        "t_final": 2.0, "m": 100, "n_substeps": 4, "seeds": [1]}));
    assert!(matches!(run_study(&weak), Err(StudyError::Config(_))));
}

#[test]
fn batch_force_variance_matches_the_linear_formula() {
    let c = cfg(json!({"study": "batch_force_variance", "model": "linear-strong", "n_list": [1],
        "tau_list": [0.2, 0.1, 0.05], "p": 2, "t_final": 1.0, "m": 20000, "n_substeps": 5, "seeds": [4],
        "options": {"p_list": [2, 3, 5]}}));
    let r = run_study(&c).unwrap();
    assert!(r.passed(), "{:?}", r.checks);
    let t = r.table("variance").unwrap();
    let expected = t.column("expected").unwrap();
    // kappa^2 Var(Y) with kappa = 0.2 and Var(Y) close to 1.
    assert!((expected[0] - 0.04).abs() < 0.002);
}

#[test]
fn batch_force_vanishes_without_interaction() {
    let c = cfg(json!({"study": "batch_force_variance", "model": "ou-noninteracting", "n_list": [1],
        "tau_list": [0.2, 0.1, 0.05], "p": 3, "t_final": 1.0, "m": 2000, "n_substeps": 5, "seeds": [4]}));
    let r = run_study(&c).unwrap();
    assert!(r.passed(), "{:?}", r.checks);
    assert!(r.table("variance").unwrap().column("variance").unwrap().iter().all(|&v| v == 0.0));
    assert!(r.table("gap").unwrap().column("rms_gap").unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn invariant_study_checks_the_stationary_variance() {
    let c = cfg(json!({"study": "invariant_measures", "model": "linear-strong", "n_list": [1], "tau_list": [0.2],
        "p": 2, "t_final": 6.0, "m": 20000, "n_substeps": 5, "seeds": [1],
        "options": {"half_width": 5.0, "n_cells": 512, "snapshots": 2}}));
    let r = run_study(&c).unwrap();
    assert!(r.check("fp_variance_rel_error").unwrap().passed);
    assert!(r.check("ginf_variance_tau0.2").is_some());
    assert!(r.notes.iter().any(|n| n.contains("no slope")));
    assert_eq!(r.values["burn_steps_tau0.2"], 30.0);
}

#[test]
fn meanfield_study_reports_every_route() {
    let c = cfg(json!({"study": "meanfield_n", "model": "linear-strong", "n_list": [16, 32, 64], "tau_list": [0.1],
        "p": 2, "t_final": 0.5, "m": 2000, "n_substeps": 5, "seeds": [1, 2, 3, 4, 5, 6, 7, 8],
        "options": {"k": 2, "replicates": 5000, "n_cells": 256}}));
    let r = run_study(&c).unwrap();
    for key in ["w2_vs_n", "w2_vs_n_zero_kernel", "w2_particle_one_vs_n", "epsilon_vs_n"] {
        assert!(r.fits.contains_key(key), "{key}");
    }
    let fit = &r.fits["w2_vs_n"];
    assert!(fit.slope < 0.0, "{}", fit.slope);
    assert_eq!(r.table("clean").unwrap().rows.len(), 3);
}
