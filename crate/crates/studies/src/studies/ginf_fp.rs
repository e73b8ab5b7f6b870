//! Mean-field operator against the Fokker-Planck reference. Seeds sample the
//! law independently; the scatter between seeds measures the Monte Carlo floor.

use rayon::prelude::*;
use rbmlab_core::wasserstein::{w_q_1d, w_q_1d_histogram};
use rbmlab_core::{ginf_iterate, MeanFieldConfig, MeanFieldEnsemble, NoiseStream};

use super::{floor_analysis, fp_reference, initial_density, intervals, snapshot_at, taus_descending};
use crate::config::StudyConfig;
use crate::error::{Result, StudyError};
use crate::fit::{t_interval, SlopeFit};
use crate::report::{Check, StudyReport, Table};

/// Applies the operator `steps(tau)` times from the initial law and compares
/// with the reference at `steps * tau`.
fn run(cfg: &StudyConfig, steps: impl Fn(f64) -> usize, window: (f64, f64)) -> Result<StudyReport> {
    let model = cfg.model.build()?;
    if model.dim() != 1 {
        return Err(StudyError::Config("mean-field studies are one-dimensional".into()));
    }
    let mut report = StudyReport::new(cfg);
    let taus = taus_descending(cfg);
    let targets: Vec<f64> = taus.iter().map(|&t| steps(t) as f64 * t).collect();
    let t_max = targets.iter().copied().fold(0.0, f64::max);
    let rho0 = initial_density(cfg)?;
    let reference = fp_reference(&model, &rho0, t_max, &targets)?;
    let ns = cfg.seeds.len();
    let mut table = Table::new("distances", &["tau", "steps", "seed", "w1", "floor"]);
    let mut per_seed = vec![vec![0.0; taus.len()]; ns];
    let mut means = Vec::with_capacity(taus.len());
    let mut floors = Vec::with_capacity(taus.len());

    for (t, &tau) in taus.iter().enumerate() {
        let hist = snapshot_at(&reference, targets[t])?.to_histogram();
        let mf_cfg = MeanFieldConfig::new(cfg.p, tau, cfg.n_substeps)?;
        let n = steps(tau);
        let ensembles: Vec<MeanFieldEnsemble<f64>> = cfg
            .seeds
            .par_iter()
            .map(|&seed| {
                let noise = NoiseStream::new(seed);
                let start = MeanFieldEnsemble::from_law(&cfg.initial, cfg.m, mf_cfg, &noise, 0)?;
                Ok(ginf_iterate(&start, &model, &noise, n)?)
            })
            .collect::<Result<_>>()?;
        let measures: Vec<_> = ensembles.iter().map(|e| e.empirical_measure()).collect();
        drop(ensembles);
        let w: Vec<f64> = measures
            .par_iter()
            .map(|m| Ok(w_q_1d_histogram(m, &hist, 1.0)?))
            .collect::<Result<_>>()?;
        let floor = if ns >= 2 {
            let pairs: Vec<f64> = measures
                .windows(2)
                .map(|p| Ok(w_q_1d(&p[0], &p[1], 1.0)? / std::f64::consts::SQRT_2))
                .collect::<Result<_>>()?;
            pairs.iter().sum::<f64>() / pairs.len() as f64
        } else {
            f64::NAN
        };
        for s in 0..ns {
            per_seed[s][t] = w[s];
            table.push([tau.to_string(), n.to_string(), cfg.seeds[s].to_string(), w[s].to_string(), floor.to_string()]);
        }
        let mean = w.iter().sum::<f64>() / ns as f64;
        report.values.insert(format!("w1_tau{tau}"), mean);
        report.values.insert(format!("floor_tau{tau}"), floor);
        means.push(mean);
        floors.push(floor);
    }
    report.tables.push(table);

    if ns >= 2 {
        // The floor depends on M and the spread of the law, not on tau, so
        // the per-tau pair estimates are pooled.
        let floor = floors.iter().sum::<f64>() / floors.len() as f64;
        report.values.insert("floor".into(), floor);
        let mut recommended = cfg.m;
        let mut worst = (0.0, 0.0);
        for (&w, tau) in means.iter().zip(&taus) {
            let (signal, rec) = floor_analysis(w, floor, cfg.m);
            report.values.insert(format!("signal_tau{tau}"), signal);
            if floor > signal / 2.0 && rec > recommended {
                recommended = rec;
                worst = (signal, floor);
            }
        }
        if recommended > cfg.m {
            return Err(StudyError::Floor {
                signal: worst.0,
                floor: worst.1,
                m: cfg.m,
                recommended_m: recommended,
            });
        }
    } else {
        report.notes.push("single seed: Monte Carlo floor not measured".into());
    }

    if taus.len() >= 3 {
        let mut fit = SlopeFit::fit(&taus, &means)?;
        if ns >= 2 {
            fit.seed_slopes = per_seed
                .iter()
                .map(|s| SlopeFit::fit(&taus, s).map(|f| f.slope))
                .collect::<Result<_>>()?;
            fit.interval = t_interval(&fit.seed_slopes);
        }
        let (lo, hi) = cfg.slope_window(window);
        report.checks.push(Check::window("slope", fit.slope, lo, hi));
        report.fits.insert("w1_vs_tau".into(), fit);
    } else {
        report.notes.push("fewer than three tau values, no slope fitted".into());
    }
    let diag = reference.diagnostics();
    report.values.insert("fp_max_boundary_mass".into(), diag.max_boundary_mass);
    report.values.insert("fp_steps".into(), diag.steps as f64);
    Ok(report)
}

/// `W_1` after `floor(T / tau)` applications of the operator.
pub fn study_ginf_vs_fp(cfg: &StudyConfig) -> Result<StudyReport> {
    let t = cfg.t_final;
    run(cfg, |tau| intervals(t, tau), (0.7, 1.3))
}

/// `W_1` after a single application of the operator.
pub fn study_ginf_one_step(cfg: &StudyConfig) -> Result<StudyReport> {
    run(cfg, |_| 1, (1.6, 2.4))
}
