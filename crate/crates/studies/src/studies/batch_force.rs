//! Variance of the random batch force at fixed points, and the one-interval
//! gap between a particle driven by a frozen batch force and one driven by
//! the mean force under the same Brownian increments. Companions are drawn
//! with replacement from a pool sampled from the initial law.

use rayon::prelude::*;
use rbmlab_core::rbm::batch_force;
use rbmlab_core::{init_iid_replica, Channel, ModelSpec, NoiseStream};

use super::taus_descending;
use crate::config::StudyConfig;
use crate::error::{Result, StudyError};
use crate::fit::SlopeFit;
use crate::report::{Check, StudyReport, Table};

const POINTS: [f64; 3] = [-1.0, 0.0, 1.0];
/// Pool points averaged for the mean force of a nonlinear kernel.
const MEAN_FORCE_POOL: usize = 2000;

fn companions(noise: &NoiseStream, pool: &[f64], count: usize, words: [u64; 3]) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let u = noise.uniform(Channel::Companion, &[words[0], words[1], words[2], j as u64]);
            pool[((u * pool.len() as f64) as usize).min(pool.len() - 1)]
        })
        .collect()
}

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// Sample variance of the batch force at `x` over `draws` companion sets,
/// with the standard error of that estimate.
fn force_variance(model: &ModelSpec<f64>, noise: &NoiseStream, pool: &[f64], x: f64, p: usize, draws: usize, tag: u64) -> (f64, f64) {
    let f: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|r| batch_force(model, &[x], &companions(noise, pool, p - 1, [tag, p as u64, r as u64]))[0])
        .collect();
    let n = f.len() as f64;
    let m = f.iter().sum::<f64>() / n;
    let (m2, m4) = f.iter().fold((0.0, 0.0), |(a, b), v| {
        let d = (v - m) * (v - m);
        (a + d, b + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    (m2, ((m4 - m2 * m2) / n).sqrt())
}

pub fn study_batch_force_variance(cfg: &StudyConfig) -> Result<StudyReport> {
    let model = cfg.model.build()?;
    if model.dim() != 1 {
        return Err(StudyError::Config("batch force study is one-dimensional".into()));
    }
    let mut report = StudyReport::new(cfg);
    let seed = cfg.seeds[0];
    let noise = NoiseStream::new(seed);
    let pool = init_iid_replica(&cfg.initial, cfg.m, &noise, 0)?.into_positions();
    let p_list = cfg.options.p_list.clone().unwrap_or_else(|| vec![cfg.p]);
    if p_list.iter().any(|&p| p < 2) {
        return Err(StudyError::Config("batch sizes must be at least 2".into()));
    }
    let draws = cfg.m;
    let zero = model.kernel().is_zero();

    let mut table = Table::new("variance", &["x", "p", "variance", "stderr", "expected"]);
    for (xi, &x) in POINTS.iter().enumerate() {
        let k: Vec<f64> = pool.iter().map(|y| model.kernel().eval1(x - y)).collect();
        let single = population_variance(&k);
        let mut vars = Vec::new();
        for &p in &p_list {
            let (v, se) = force_variance(&model, &noise, &pool, x, p, draws, xi as u64);
            let expected = single / (p - 1) as f64;
            table.push([x, p as f64, v, se, expected]);
            let z = if se > 0.0 { (v - expected).abs() / se } else { (v - expected).abs() };
            report.checks.push(Check::new(
                format!("variance_x{x}_p{p}"),
                z,
                "<= 3 standard errors",
                z <= 3.0 || (se == 0.0 && v == expected),
            ));
            vars.push(v);
        }
        if xi == 0 && p_list.len() >= 3 {
            if zero {
                report.notes.push("zero kernel: the batch force vanishes, no p-scaling fit".into());
            } else {
                let pm1: Vec<f64> = p_list.iter().map(|&p| (p - 1) as f64).collect();
                let fit = SlopeFit::fit(&pm1, &vars)?;
                report.checks.push(Check::window("variance_vs_p_minus_1_slope", fit.slope, -1.25, -0.75));
                report.fits.insert("variance_vs_p_minus_1".into(), fit);
            }
        }
    }
    report.tables.push(table);

    // Frozen-force gap over one interval.
    let linear = model.linear_coefficients();
    let pool_mean = pool.iter().sum::<f64>() / pool.len() as f64;
    let sub = &pool[..pool.len().min(MEAN_FORCE_POOL)];
    let mean_force = |x: f64| -> f64 {
        match linear {
            Some((_, kappa)) => -kappa * (x - pool_mean),
            None => sub.iter().map(|y| model.kernel().eval1(x - y)).sum::<f64>() / sub.len() as f64,
        }
    };
    let sigma = model.sigma();
    let taus = taus_descending(cfg);
    let mut gap_table = Table::new("gap", &["tau", "rms_gap", "rms_gap_over_tau"]);
    let mut gaps = Vec::new();
    for (ti, &tau) in taus.iter().enumerate() {
        let dt = tau / cfg.n_substeps as f64;
        let amp = (2.0 * sigma * sigma * dt).sqrt();
        let sq: Vec<f64> = (0..draws)
            .into_par_iter()
            .map(|r| {
                let words = [100 + ti as u64, cfg.p as u64, r as u64];
                let x0 = pool[(noise.uniform(Channel::Aux, &words) * pool.len() as f64) as usize % pool.len()];
                let ys = companions(&noise, &pool, cfg.p - 1, words);
                let (mut a, mut b) = (x0, x0);
                for s in 0..cfg.n_substeps {
                    let xi = noise.gaussian(Channel::Brownian, &[words[0], words[2], s as u64]);
                    a += (model.drift().eval1(a) + batch_force(&model, &[a], &ys)[0]) * dt + amp * xi;
                    b += (model.drift().eval1(b) + mean_force(b)) * dt + amp * xi;
                }
                (a - b) * (a - b)
            })
            .collect();
        let rms = (sq.iter().sum::<f64>() / draws as f64).sqrt();
        gap_table.push([tau, rms, rms / tau]);
        gaps.push(rms);
    }
    report.tables.push(gap_table);
    if zero {
        let worst = gaps.iter().copied().fold(0.0, f64::max);
        report.checks.push(Check::at_most("zero_kernel_gap", worst, 0.0));
    } else if taus.len() >= 3 {
        let fit = SlopeFit::fit(&taus, &gaps)?;
        let (lo, hi) = cfg.slope_window((0.75, 1.25));
        report.checks.push(Check::window("gap_slope", fit.slope, lo, hi));
        report.fits.insert("rms_gap_vs_tau".into(), fit);
    } else {
        report.notes.push("fewer than three tau values, no gap slope fitted".into());
    }
    Ok(report)
}
