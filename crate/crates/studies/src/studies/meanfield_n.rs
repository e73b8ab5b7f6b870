//! Full system against the Fokker-Planck reference as `N` grows. Each seed is
//! an independent replica; the reported distance is the replica average of
//! `W_2` between the `N`-particle empirical measure and the reference. The
//! particle-1 law pooled over replicas, the zero-kernel control and the
//! clean-particle route are reported alongside.

use rayon::prelude::*;
use rbmlab_core::wasserstein::{w_q_1d_histogram, Histogram};
use rbmlab_core::{
    init_iid_replica, run_full_system, theorem34_experiment, EmpiricalMeasure, ModelSpec, NoiseStream,
    RbmConfig, Theorem34Config,
};

use super::{fp_reference, initial_density};
use crate::config::StudyConfig;
use crate::error::{Result, StudyError};
use crate::fit::SlopeFit;
use crate::report::{Check, StudyReport, Table};

struct Sweep {
    /// `per_seed[s][i]`: replica `s` at `N = n_list[i]`.
    per_seed: Vec<Vec<f64>>,
    /// Particle 1 pooled over replicas, per `N`.
    particle_one: Vec<f64>,
}

fn sweep(cfg: &StudyConfig, model: &ModelSpec<f64>, hist: &Histogram<f64>) -> Result<Sweep> {
    let tau = cfg.tau_list[0];
    let rc = RbmConfig::new(cfg.p, tau, cfg.t_final, cfg.n_substeps)?;
    let cells: Vec<(usize, u64)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let finals: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let noise = NoiseStream::new(seed);
            let init = init_iid_replica(&cfg.initial, n, &noise, 0)?;
            let traj = run_full_system(model, init, &rc, &noise)?;
            Ok(traj.last().expect("non-empty").positions().to_vec())
        })
        .collect::<Result<_>>()?;
    let ns = cfg.seeds.len();
    let mut per_seed = vec![vec![0.0; cfg.n_list.len()]; ns];
    let mut particle_one = Vec::with_capacity(cfg.n_list.len());
    for i in 0..cfg.n_list.len() {
        let rows = &finals[i * ns..(i + 1) * ns];
        for (s, x) in rows.iter().enumerate() {
            per_seed[s][i] = w_q_1d_histogram(&EmpiricalMeasure::uniform(1, x.clone()), hist, 2.0)?;
        }
        let ones: Vec<f64> = rows.iter().map(|x| x[0]).collect();
        particle_one.push(w_q_1d_histogram(&EmpiricalMeasure::uniform(1, ones), hist, 2.0)?);
    }
    Ok(Sweep { per_seed, particle_one })
}

pub fn study_meanfield_n(cfg: &StudyConfig) -> Result<StudyReport> {
    let model = cfg.model.build()?;
    if model.dim() != 1 {
        return Err(StudyError::Config("mean-field studies are one-dimensional".into()));
    }
    if cfg.n_list.len() < 3 {
        return Err(StudyError::Config("meanfield_n needs at least three values of N".into()));
    }
    let mut report = StudyReport::new(cfg);
    let (lo, hi) = cfg.slope_window((-0.75, -0.25));
    let ns: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
    let rho0 = initial_density(cfg)?;
    report.notes.push(format!(
        "full system with dt = {}, {} replicas per N",
        cfg.tau_list[0] / cfg.n_substeps as f64,
        cfg.seeds.len()
    ));

    let hist = fp_reference(&model, &rho0, cfg.t_final, &[])?.last().to_histogram();
    let main = sweep(cfg, &model, &hist)?;
    let mut table = Table::new("distances", &["N", "w2_mean", "w2_particle_one", "w2_zero_kernel"]);

    let control_model = model.without_interaction();
    let control_hist = fp_reference(&control_model, &rho0, cfg.t_final, &[])?.last().to_histogram();
    let control = sweep(cfg, &control_model, &control_hist)?;

    let fit = SlopeFit::fit_seeds(&ns, &main.per_seed)?;
    let control_fit = SlopeFit::fit_seeds(&ns, &control.per_seed)?;
    for (i, n) in cfg.n_list.iter().enumerate() {
        let mean = |sw: &Sweep| sw.per_seed.iter().map(|s| s[i]).sum::<f64>() / sw.per_seed.len() as f64;
        table.push([n.to_string(), mean(&main).to_string(), main.particle_one[i].to_string(), mean(&control).to_string()]);
        report.values.insert(format!("w2_particle_one_N{n}"), main.particle_one[i]);
    }
    report.checks.push(Check::window("slope", fit.slope, lo, hi));
    report.checks.push(Check::window("zero_kernel_slope", control_fit.slope, lo, hi));
    report.fits.insert("w2_vs_n".into(), fit);
    report.fits.insert("w2_vs_n_zero_kernel".into(), control_fit);
    if let Ok(f) = SlopeFit::fit(&ns, &main.particle_one) {
        report.fits.insert("w2_particle_one_vs_n".into(), f);
    }
    report.tables.push(table);

    // Clean-particle route at a fixed number of divisions.
    let k = cfg.options.k.unwrap_or(3);
    let replicates = cfg.options.replicates.unwrap_or(100_000);
    let seed = cfg.seeds[0];
    let mut chaos = Table::new("clean", &["N", "k", "epsilon", "stderr", "w1_batch_vs_ginf", "floor"]);
    let mut eps = Vec::new();
    for &n in &cfg.n_list {
        let t34 = theorem34_experiment(
            &model,
            &cfg.initial,
            &Theorem34Config {
                n,
                p: cfg.p,
                tau: cfg.tau_list[0],
                k,
                m: cfg.m,
                n_substeps: cfg.n_substeps,
                eps_replicates: replicates,
                seed,
            },
        )?;
        let r = &t34.epsilon;
        chaos.push([
            n.to_string(),
            k.to_string(),
            r.epsilon.to_string(),
            r.stderr.to_string(),
            t34.w1.to_string(),
            t34.floor.to_string(),
        ]);
        eps.push(r.epsilon);
    }
    report.tables.push(chaos);
    let eps_fit = SlopeFit::fit(&ns, &eps)?;
    report.checks.push(Check::window("epsilon_slope", eps_fit.slope, -1.25, -0.75));
    report.fits.insert("epsilon_vs_n".into(), eps_fit);
    Ok(report)
}
