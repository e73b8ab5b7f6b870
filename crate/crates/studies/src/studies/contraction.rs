//! Two ensembles, the second a translate of the first by `options.shift`
//! (default 2), advanced by the operator with the same stream so every sample
//! shares its companions' indices and Brownian keys with its partner. The
//! per-step `W_1` ratio is compared with `exp(-(r - 2L) tau)`.

use rbmlab_core::wasserstein::w_q_1d;
use rbmlab_core::{ginf_step, MeanFieldConfig, MeanFieldEnsemble, NoiseStream};

use super::{intervals, taus_descending};
use crate::config::StudyConfig;
use crate::error::{Result, StudyError};
use crate::report::{Check, StudyReport, Table};

/// Slack on the contraction factor.
const SLACK: f64 = 1.05;

pub fn study_contraction(cfg: &StudyConfig) -> Result<StudyReport> {
    let model = cfg.model.build()?;
    let margin = model
        .contraction_margin()
        .filter(|&m| m > 0.0)
        .ok_or_else(|| StudyError::Config("contraction needs a strongly confining model with r > 2L".into()))?;
    if model.dim() != 1 {
        return Err(StudyError::Config("mean-field studies are one-dimensional".into()));
    }
    let shift = cfg.options.shift.unwrap_or(2.0);
    let mut report = StudyReport::new(cfg);
    let mut table = Table::new("ratios", &["tau", "seed", "step", "w1", "ratio", "bound"]);
    for &tau in &taus_descending(cfg) {
        let bound = (-margin * tau).exp() * SLACK;
        let steps = intervals(cfg.t_final, tau);
        let mf_cfg = MeanFieldConfig::new(cfg.p, tau, cfg.n_substeps)?;
        let mut worst: f64 = 0.0;
        for &seed in &cfg.seeds {
            let noise = NoiseStream::new(seed);
            let mut a = MeanFieldEnsemble::from_law(&cfg.initial, cfg.m, mf_cfg, &noise, 0)?;
            let shifted = a.samples().iter().map(|x| x + shift).collect();
            let mut b = MeanFieldEnsemble::new(1, shifted, mf_cfg, 0)?;
            let mut w = w_q_1d(&a.empirical_measure(), &b.empirical_measure(), 1.0)?;
            for k in 0..steps {
                a = ginf_step(&a, &model, &noise)?;
                b = ginf_step(&b, &model, &noise)?;
                let next = w_q_1d(&a.empirical_measure(), &b.empirical_measure(), 1.0)?;
                let ratio = next / w;
                worst = worst.max(ratio);
                table.push([
                    tau.to_string(),
                    seed.to_string(),
                    (k + 1).to_string(),
                    next.to_string(),
                    ratio.to_string(),
                    bound.to_string(),
                ]);
                w = next;
            }
        }
        report.values.insert(format!("max_ratio_tau{tau}"), worst);
        report.checks.push(Check::at_most(format!("ratio_tau{tau}"), worst, bound));
    }
    report.values.insert("contraction_margin".into(), margin);
    report.tables.push(table);
    Ok(report)
}
