//! Random batch simulation of interacting particle systems.
//!
//! The crate covers the full `N`-particle system and its random batch
//! approximation, the mean-field operator obtained by resampling batch
//! companions every interval, a finite-volume reference solver for the limiting
//! nonlinear Fokker-Planck equation, exact Wasserstein metrology, and the
//! combinatorics of clean particles.
//!
//! Numerical code is generic over [`Real`]; the `*64` aliases fix `f64`.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod ensemble;
pub mod error;
pub mod flocking;
pub mod fokker_planck;
pub mod integrator;
pub mod meanfield;
pub mod model;
pub mod noise;
pub mod rbm;
pub mod real;
pub mod wasserstein;

pub use chaos::{epsilon_exact, epsilon_mc, theorem34_experiment, CleanMethod, CleanReport, InfluenceState, Theorem34Config, Theorem34Report};
pub use ensemble::{init_iid, init_iid_replica, EmpiricalMeasure, Ensemble, InitialLaw};
pub use error::{Error, Result};
pub use flocking::{flocking_full_step, flocking_rbm_step, qinf_step, AlignmentKernel, KineticEnsemble, Normalization};
pub use fokker_planck::{fp_solve, fp_step, grid_to_measure, stable_dt, FpTrajectory, GridDensity};
pub use integrator::{em_step, full_system_step, StepPlan};
pub use meanfield::{gaussian_fixed_point, gaussian_oracle, ginf_iterate, ginf_step, iterate_to_invariant, mckean_vlasov_step, GaussianState, MeanFieldConfig, MeanFieldEnsemble};
pub use model::{preset, probe_regularity, Confinement, Drift, Kernel, ModelSpec, ModelTable, Preset, Regime};
pub use noise::{Channel, NoiseKey, NoiseStream};
pub use rbm::{random_partition, rbm_step, run_full_system, run_rbm, run_rbm_from, BatchSchedule, Partition, RbmConfig, RbmRun};
pub use real::Real;

/// Version of this crate, recorded in study reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Ensemble64 = Ensemble<f64>;
pub type EmpiricalMeasure64 = EmpiricalMeasure<f64>;
pub type InitialLaw64 = InitialLaw<f64>;
pub type ModelSpec64 = ModelSpec<f64>;
pub type GridDensity64 = GridDensity<f64>;
pub type MeanFieldEnsemble64 = MeanFieldEnsemble<f64>;
pub type KineticEnsemble64 = KineticEnsemble<f64>;
pub type Theorem34Config64 = Theorem34Config<f64>;
