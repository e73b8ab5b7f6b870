//! Convergence studies. Each takes a [`StudyConfig`] and returns a [`StudyReport`].

mod batch_force;
mod chaos_rate;
mod contraction;
mod ginf_fp;
mod invariant;
mod meanfield_n;
mod strong_error;

pub use batch_force::study_batch_force_variance;
pub use chaos_rate::study_chaos_rate;
pub use contraction::study_contraction;
pub use ginf_fp::{study_ginf_one_step, study_ginf_vs_fp};
pub use invariant::study_invariant_measures;
pub use meanfield_n::study_meanfield_n;
pub use strong_error::study_strong_rbm_error;

use rbmlab_core::{fp_solve, stable_dt, FpTrajectory, GridDensity, InitialLaw, ModelSpec};

use crate::config::StudyConfig;
use crate::error::{Result, StudyError};
use crate::report::StudyReport;

/// Names accepted by [`run_study`].
pub const STUDIES: [&str; 8] = [
    "strong_rbm_error",
    "ginf_vs_fp",
    "ginf_one_step",
    "meanfield_n",
    "invariant_measures",
    "batch_force_variance",
    "chaos_rate",
    "contraction",
];

/// Runs the study named in the config.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    match config.study.as_str() {
        "strong_rbm_error" => study_strong_rbm_error(config),
        "ginf_vs_fp" => study_ginf_vs_fp(config),
        "ginf_one_step" => study_ginf_one_step(config),
        "meanfield_n" => study_meanfield_n(config),
        "invariant_measures" => study_invariant_measures(config),
        "batch_force_variance" => study_batch_force_variance(config),
        "chaos_rate" => study_chaos_rate(config),
        "contraction" => study_contraction(config),
        other => Err(StudyError::UnknownStudy(other.into())),
    }
}

/// Whole intervals of length `tau` in `[0, t]`.
pub(crate) fn intervals(t: f64, tau: f64) -> usize {
    (t / tau + 1e-9).floor() as usize
}

fn gaussian_params(law: &InitialLaw<f64>) -> Option<(f64, f64)> {
    match law {
        InitialLaw::Gaussian { mean, variance } if mean.len() == 1 => Some((mean[0], variance[0])),
        InitialLaw::Point { at } if at.len() == 1 => Some((at[0], 0.0)),
        _ => None,
    }
}

/// Reference grid: the configured one, or `|mean| + max(8 sd, 6)` with 1024 cells.
pub(crate) fn grid_of(config: &StudyConfig) -> Result<(f64, usize)> {
    let (mean, var) = gaussian_params(&config.initial)
        .ok_or_else(|| StudyError::Config("reference solves need a 1D Gaussian or point initial law".into()))?;
    let default = mean.abs() + (8.0 * var.sqrt()).max(6.0);
    Ok((
        config.options.half_width.unwrap_or(default),
        config.options.n_cells.unwrap_or(1024),
    ))
}

/// Initial density of the configured law on the reference grid.
pub(crate) fn initial_density(config: &StudyConfig) -> Result<GridDensity<f64>> {
    let (a, n) = grid_of(config)?;
    let (mean, var) = gaussian_params(&config.initial).expect("checked by grid_of");
    Ok(if var > 0.0 {
        GridDensity::gaussian(a, n, mean, var)?
    } else {
        GridDensity::point_mass(a, n, mean)?
    })
}

/// Fokker-Planck reference with snapshots at `times`, stepping at half the
/// stability bound of the initial density.
pub(crate) fn fp_reference(
    model: &ModelSpec<f64>,
    rho0: &GridDensity<f64>,
    t_final: f64,
    times: &[f64],
) -> Result<FpTrajectory<f64>> {
    let dt = 0.5 * stable_dt(rho0, model)?;
    let dt = if dt.is_finite() { dt } else { t_final.max(1e-3) / 100.0 };
    Ok(fp_solve(rho0, model, t_final, dt, times)?)
}

/// Snapshot of `traj` taken at time `t`.
pub(crate) fn snapshot_at(traj: &FpTrajectory<f64>, t: f64) -> Result<&GridDensity<f64>> {
    traj.snapshots
        .iter()
        .find(|s| (s.time() - t).abs() <= 1e-9 * t.max(1.0))
        .ok_or_else(|| StudyError::Config(format!("no reference snapshot at t = {t}")))
}

/// Monte Carlo floor correction: the signal left after removing the floor in
/// quadrature, and the sample size needed for the floor to be half of it.
pub(crate) fn floor_analysis(measured: f64, floor: f64, m: usize) -> (f64, usize) {
    let signal = (measured * measured - floor * floor).max(0.0).sqrt().max(floor / 10.0);
    let recommended = (m as f64 * (2.0 * floor / signal).powi(2)).ceil() as usize;
    (signal, recommended.max(m))
}

/// Log-spaced sorted copy of the tau list, largest first.
pub(crate) fn taus_descending(config: &StudyConfig) -> Vec<f64> {
    let mut t = config.tau_list.clone();
    t.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    t
}
