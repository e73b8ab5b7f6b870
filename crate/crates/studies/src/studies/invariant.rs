//! Invariant law of the mean-field operator against the stationary
//! Fokker-Planck solution. `t_final` is both the reference horizon and the
//! burn-in time of the operator; after burn-in, `options.snapshots` iterates
//! spaced by `ceil(1 / tau)` steps are pooled into one sample.

use rayon::prelude::*;
use rbmlab_core::wasserstein::{w_q_1d, w_q_1d_histogram};
use rbmlab_core::{
    gaussian_fixed_point, ginf_iterate, iterate_to_invariant, EmpiricalMeasure, MeanFieldConfig, MeanFieldEnsemble,
    NoiseStream, Regime,
};

use super::{fp_reference, initial_density, taus_descending};
use crate::config::StudyConfig;
use crate::error::{Result, StudyError};
use crate::fit::SlopeFit;
use crate::report::{Check, StudyReport, Table};

/// Variance and the standard error of the sample variance.
fn variance_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(a, b), v| {
        let d = (v - mean) * (v - mean);
        (a + d, b + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    (m2, ((m4 - m2 * m2) / n).sqrt())
}

struct Sample {
    pooled: Vec<f64>,
    last: Vec<f64>,
    burn_steps: usize,
    settle_steps: usize,
}

fn sample_invariant(cfg: &StudyConfig, tau: f64, seed: u64, snapshots: usize) -> Result<Sample> {
    let model = cfg.model.build()?;
    let noise = NoiseStream::new(seed);
    let mf_cfg = MeanFieldConfig::new(cfg.p, tau, cfg.n_substeps)?;
    let start = MeanFieldEnsemble::from_law(&cfg.initial, cfg.m, mf_cfg, &noise, 0)?;
    let burn_steps = (cfg.t_final / tau).ceil() as usize;
    let burned = ginf_iterate(&start, &model, &noise, burn_steps)?;
    let sd = burned.variance()[0].sqrt();
    let tol = 5.0 * sd / (cfg.m as f64).sqrt();
    let settled = iterate_to_invariant(&burned, &model, &noise, tol, 100 * burn_steps.max(10))?;
    let settle_steps = settled.increments.len();
    let spacing = (1.0 / tau).ceil() as usize;
    let mut cur = settled.ensemble;
    let mut pooled = Vec::with_capacity(snapshots * cfg.m);
    pooled.extend_from_slice(cur.samples());
    for _ in 1..snapshots {
        cur = ginf_iterate(&cur, &model, &noise, spacing)?;
        pooled.extend_from_slice(cur.samples());
    }
    Ok(Sample {
        pooled,
        last: cur.samples().to_vec(),
        burn_steps,
        settle_steps,
    })
}

pub fn study_invariant_measures(cfg: &StudyConfig) -> Result<StudyReport> {
    let model = cfg.model.build()?;
    if model.dim() != 1 {
        return Err(StudyError::Config("mean-field studies are one-dimensional".into()));
    }
    let mut report = StudyReport::new(cfg);
    if model.regime() != Regime::Strong {
        report.notes.push("model is not strongly confining; an invariant law is not guaranteed".into());
    }
    let taus = taus_descending(cfg);
    let snapshots = cfg.options.snapshots.unwrap_or(1).max(1);

    let rho0 = initial_density(cfg)?;
    let pi = fp_reference(&model, &rho0, cfg.t_final, &[])?.last().clone();
    let hist = pi.to_histogram();
    report.values.insert("fp_stationary_mean".into(), pi.mean());
    report.values.insert("fp_stationary_variance".into(), pi.variance());

    // Closed-form stationary variance sigma^2 / (a + kappa) of linear models.
    let linear = model.linear_coefficients().filter(|&(a, k)| a > 0.0 && a + k > 0.0);
    let oracle = linear.map(|(a, k)| model.sigma() * model.sigma() / (a + k));
    if let Some(v) = oracle {
        let rel = (pi.variance() - v).abs() / v;
        report.values.insert("stationary_variance_oracle".into(), v);
        report.checks.push(Check::at_most("fp_variance_rel_error", rel, 0.005));
    }

    let ns = cfg.seeds.len();
    let mut table = Table::new(
        "invariant",
        &["tau", "seed", "w1", "floor", "variance", "variance_se", "fixed_point_variance"],
    );
    let mut per_seed = vec![vec![0.0; taus.len()]; ns];
    let mut gaps = Vec::new();
    for (t, &tau) in taus.iter().enumerate() {
        let samples: Vec<Sample> = cfg
            .seeds
            .par_iter()
            .map(|&s| sample_invariant(cfg, tau, s, snapshots))
            .collect::<Result<_>>()?;
        let measures: Vec<EmpiricalMeasure<f64>> =
            samples.iter().map(|s| EmpiricalMeasure::uniform(1, s.pooled.clone())).collect();
        let floor = if ns >= 2 {
            let pairs: Vec<f64> = measures
                .windows(2)
                .map(|p| Ok(w_q_1d(&p[0], &p[1], 1.0)? / std::f64::consts::SQRT_2))
                .collect::<Result<_>>()?;
            pairs.iter().sum::<f64>() / pairs.len() as f64
        } else {
            f64::NAN
        };
        let fixed = if linear.is_some() {
            Some(gaussian_fixed_point(&model, cfg.p, tau)?.variance[0])
        } else {
            None
        };
        for (s, (m, sample)) in measures.iter().zip(&samples).enumerate() {
            let w = w_q_1d_histogram(m, &hist, 1.0)?;
            per_seed[s][t] = w;
            let (v, se) = variance_se(&sample.last);
            table.push([
                tau.to_string(),
                cfg.seeds[s].to_string(),
                w.to_string(),
                floor.to_string(),
                v.to_string(),
                se.to_string(),
                fixed.map_or("".into(), |f| f.to_string()),
            ]);
            if s == 0 {
                report.values.insert(format!("burn_steps_tau{tau}"), sample.burn_steps as f64);
                report.values.insert(format!("settle_steps_tau{tau}"), sample.settle_steps as f64);
                if let Some(f) = fixed {
                    report.checks.push(Check::new(
                        format!("ginf_variance_tau{tau}"),
                        (v - f).abs() / se,
                        "<= 3 standard errors",
                        (v - f).abs() <= 3.0 * se,
                    ));
                }
            }
        }
        let mean = per_seed.iter().map(|s| s[t]).sum::<f64>() / ns as f64;
        report.values.insert(format!("w1_tau{tau}"), mean);
        report.values.insert(format!("floor_tau{tau}"), floor);
        if let (Some(f), Some(v)) = (fixed, oracle) {
            gaps.push((f - v).abs());
        }
    }
    report.tables.push(table);

    if taus.len() >= 3 {
        let fit = SlopeFit::fit_seeds(&taus, &per_seed)?;
        let (lo, hi) = cfg.slope_window((0.6, 1.4));
        report.checks.push(Check::window("slope", fit.slope, lo, hi));
        report.fits.insert("w1_vs_tau".into(), fit);
        if gaps.len() == taus.len() && gaps.iter().all(|&g| g > 0.0) {
            let gap_fit = SlopeFit::fit(&taus, &gaps)?;
            report.checks.push(Check::window("fixed_point_variance_gap_slope", gap_fit.slope, lo, hi));
            report.fits.insert("fixed_point_variance_gap_vs_tau".into(), gap_fit);
        }
    } else {
        report.notes.push("fewer than three tau values, no slope fitted".into());
    }
    Ok(report)
}
