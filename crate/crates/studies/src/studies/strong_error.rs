//! Coupled random batch vs full system. Both runs share the seed, so the
//! Brownian keys agree and only the batch interaction differs.

use rayon::prelude::*;
use rbmlab_core::{init_iid_replica, run_full_system, run_rbm_from, NoiseStream, RbmConfig};

use super::taus_descending;
use crate::config::StudyConfig;
use crate::error::Result;
use crate::fit::{mean_se, t_interval, SlopeFit};
use crate::report::{Check, StudyReport, Table};

/// Squared distance averaged over particles, at every grid time.
fn coupled_gaps(cfg: &StudyConfig, n: usize, tau: f64, seed: u64) -> Result<Vec<f64>> {
    let model = cfg.model.build()?;
    let noise = NoiseStream::new(seed);
    let init = init_iid_replica(&cfg.initial, n, &noise, 0)?;
    let rc = RbmConfig::new(cfg.p, tau, cfg.t_final, cfg.n_substeps)?;
    let rbm = run_rbm_from(&model, init.clone(), &rc, &noise)?;
    let full = run_full_system(&model, init, &rc, &noise)?;
    Ok(rbm
        .trajectory
        .iter()
        .zip(&full)
        .map(|(a, b)| {
            let s: f64 = a.positions().iter().zip(b.positions()).map(|(x, y)| (x - y) * (x - y)).sum();
            s / n as f64
        })
        .collect())
}

fn sup_rms(gaps: &[f64]) -> f64 {
    gaps.iter().copied().fold(0.0, f64::max).sqrt()
}

pub fn study_strong_rbm_error(cfg: &StudyConfig) -> Result<StudyReport> {
    let mut report = StudyReport::new(cfg);
    let taus = taus_descending(cfg);
    let (lo, hi) = cfg.slope_window((0.45, f64::INFINITY));
    let zero_kernel = cfg.model.build()?.kernel().is_zero();
    let mut table = Table::new("errors", &["N", "tau", "seed", "error"]);

    for &n in &cfg.n_list {
        let cells: Vec<(usize, u64)> = (0..taus.len())
            .flat_map(|t| cfg.seeds.iter().map(move |&s| (t, s)))
            .collect();
        let gaps: Vec<Vec<f64>> = cells
            .par_iter()
            .map(|&(t, s)| coupled_gaps(cfg, n, taus[t], s))
            .collect::<Result<_>>()?;

        let ns = cfg.seeds.len();
        let mut per_seed = vec![vec![0.0; taus.len()]; ns];
        let mut pooled = Vec::with_capacity(taus.len());
        for (t, &tau) in taus.iter().enumerate() {
            let rows = &gaps[t * ns..(t + 1) * ns];
            for (s, g) in rows.iter().enumerate() {
                per_seed[s][t] = sup_rms(g);
                table.push([n.to_string(), tau.to_string(), cfg.seeds[s].to_string(), per_seed[s][t].to_string()]);
            }
            let steps = rows[0].len();
            let mean_sq: Vec<f64> = (0..steps).map(|k| rows.iter().map(|g| g[k]).sum::<f64>() / ns as f64).collect();
            pooled.push(sup_rms(&mean_sq));
        }
        for (t, &tau) in taus.iter().enumerate() {
            report.values.insert(format!("error_N{n}_tau{tau}"), pooled[t]);
        }

        if zero_kernel || cfg.p >= n {
            let worst = pooled.iter().copied().fold(0.0, f64::max);
            let (why, name) = if zero_kernel {
                ("zero kernel", format!("zero_kernel_error_N{n}"))
            } else {
                ("single batch", format!("single_batch_error_N{n}"))
            };
            report.notes.push(format!("N={n}: {why}, batch and full systems coincide (max error {worst:e})"));
            report.checks.push(Check::at_most(name, worst, 1e-12));
            continue;
        }

        if taus.len() >= 3 {
            let mut fit = SlopeFit::fit(&taus, &pooled)?;
            if ns >= 2 {
                fit.seed_slopes = per_seed
                    .iter()
                    .map(|s| SlopeFit::fit(&taus, s).map(|f| f.slope))
                    .collect::<Result<_>>()?;
                fit.interval = t_interval(&fit.seed_slopes);
            }
            report.checks.push(if hi.is_finite() {
                Check::window(format!("slope_N{n}"), fit.slope, lo, hi)
            } else {
                Check::at_least(format!("slope_N{n}"), fit.slope, lo)
            });
            report.fits.insert(format!("error_vs_tau_N{n}"), fit);
        } else {
            report.notes.push(format!("N={n}: fewer than three tau values, no slope fitted"));
        }

        // Halving tau may not raise the error by more than one combined standard error.
        let stats: Vec<(f64, f64)> = (0..taus.len())
            .map(|t| mean_se(&per_seed.iter().map(|s| s[t]).collect::<Vec<_>>()))
            .collect();
        let worst_excess = stats
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) - (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        if worst_excess.is_finite() {
            report.checks.push(Check::at_most(format!("monotone_N{n}"), worst_excess, 0.0));
        }
    }
    report.tables.push(table);
    Ok(report)
}
