//! Mean-field operator of the random batch method.
//!
//! One application evolves each tracked sample together with `p - 1`
//! companions drawn afresh from the current ensemble, for one interval `tau`,
//! and keeps the tracked sample only. Also holds the closed-form Gaussian
//! oracle for linear models and the McKean-Vlasov reference ensemble.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{init_iid_replica, EmpiricalMeasure, Ensemble, InitialLaw};
use crate::error::{Error, Result};
use crate::integrator::{em_step, evolve_group, group_drift};
use crate::model::{ModelSpec, Regime};
use crate::noise::{Channel, NoiseKey, NoiseStream};
use crate::real::Real;
use crate::wasserstein::w_q_1d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompanionSampling {
    WithReplacement,
    WithoutReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldConfig<T> {
    pub p: usize,
    pub tau: T,
    pub n_substeps: usize,
    pub companions: CompanionSampling,
}

impl<T: Real> MeanFieldConfig<T> {
    pub fn new(p: usize, tau: T, n_substeps: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::Config(format!("batch size must be at least 2, got {p}")));
        }
        if !(tau >= T::zero()) || !tau.is_finite() {
            return Err(Error::Config(format!("tau must be non-negative, got {tau}")));
        }
        if n_substeps == 0 {
            return Err(Error::Config("need at least one substep".into()));
        }
        Ok(Self {
            p,
            tau,
            n_substeps,
            companions: CompanionSampling::WithReplacement,
        })
    }

    pub fn without_replacement(mut self) -> Self {
        self.companions = CompanionSampling::WithoutReplacement;
        self
    }
}

/// `M` samples of the tracked particle after `k` applications of the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldEnsemble<T> {
    dim: usize,
    samples: Vec<T>,
    k: usize,
    time: T,
    stream: u64,
    config: MeanFieldConfig<T>,
}

impl<T: Real> MeanFieldEnsemble<T> {
    pub fn new(dim: usize, samples: Vec<T>, config: MeanFieldConfig<T>, stream: u64) -> Result<Self> {
        let e = Ensemble::new(dim, samples, T::zero(), stream)?;
        if e.len() < config.p {
            return Err(Error::Config(format!(
                "mean-field ensemble of {} samples cannot supply batches of {}",
                e.len(),
                config.p
            )));
        }
        Ok(Self {
            dim,
            samples: e.into_positions(),
            k: 0,
            time: T::zero(),
            stream,
            config,
        })
    }

    pub fn from_ensemble(e: &Ensemble<T>, config: MeanFieldConfig<T>) -> Result<Self> {
        Self::new(e.dim(), e.positions().to_vec(), config, e.stream())
    }

    /// `m` i.i.d. samples from `law`, keyed like replica `stream` of the particle system.
    pub fn from_law(law: &InitialLaw<T>, m: usize, config: MeanFieldConfig<T>, noise: &NoiseStream, stream: u64) -> Result<Self> {
        let e = init_iid_replica(law, m, noise, stream)?;
        Self::from_ensemble(&e, config)
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of operator applications so far.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn config(&self) -> &MeanFieldConfig<T> {
        &self.config
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn with_config(mut self, config: MeanFieldConfig<T>) -> Self {
        self.config = config;
        self
    }

    pub fn as_ensemble(&self) -> Ensemble<T> {
        Ensemble::from_parts_unchecked(self.dim, self.samples.clone(), self.time, self.stream)
    }

    pub fn empirical_measure(&self) -> EmpiricalMeasure<T> {
        EmpiricalMeasure::uniform(self.dim, self.samples.clone())
    }

    pub fn mean(&self) -> Vec<T> {
        self.as_ensemble().mean()
    }

    pub fn variance(&self) -> Vec<T> {
        self.as_ensemble().variance()
    }

    pub fn moment(&self, q: T) -> T {
        self.as_ensemble().moment(q)
    }
}

/// Draws `count` companion indices from `{0, .., m-1} \ {own}`.
pub(crate) fn draw_companions<R: Rng>(rng: &mut R, m: usize, own: usize, count: usize, mode: CompanionSampling) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut j = rng.gen_range(0..m - 1);
        if j >= own {
            j += 1;
        }
        if mode == CompanionSampling::WithoutReplacement && out.contains(&j) {
            continue;
        }
        out.push(j);
    }
    out
}

/// Companion indices of sample `i` at interval `k`, keyed so that coupled
/// ensembles sharing a stream draw the same companions.
pub(crate) fn companions_of(noise: &NoiseStream, stream: u64, i: usize, k: usize, m: usize, count: usize, mode: CompanionSampling) -> Vec<usize> {
    let mut rng = noise.rng(Channel::Companion, &[stream, i as u64, k as u64]);
    draw_companions(&mut rng, m, i, count, mode)
}

/// One application of the mean-field operator.
///
/// Sample `i` evolves with companions drawn from the ensemble as it was at
/// the start of the interval; its own increments use the keys
/// `(stream, i, k, substep)` of the particle system, the companions' use the
/// companion channel.
pub fn ginf_step<T: Real>(mf: &MeanFieldEnsemble<T>, model: &ModelSpec<T>, noise: &NoiseStream) -> Result<MeanFieldEnsemble<T>> {
    let cfg = mf.config;
    let m = mf.len();
    let d = mf.dim;
    if m < cfg.p {
        return Err(Error::Config(format!("{m} samples cannot supply batches of {}", cfg.p)));
    }
    if d != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            found: d,
        });
    }
    let p = cfg.p;
    let dt = cfg.tau / T::of_usize(cfg.n_substeps);
    let denom = T::of_usize(p - 1);
    let (stream, k) = (mf.stream, mf.k);
    let old = &mf.samples;
    let mut next = old.clone();
    if cfg.tau > T::zero() {
        next.par_chunks_mut(d).enumerate().try_for_each(|(i, out)| {
            let companions = companions_of(noise, stream, i, k, m, p - 1, cfg.companions);
            let mut local = Vec::with_capacity(p * d);
            local.extend_from_slice(&old[i * d..(i + 1) * d]);
            for &j in &companions {
                local.extend_from_slice(&old[j * d..(j + 1) * d]);
            }
            evolve_group(
                model,
                &mut local,
                denom,
                dt,
                cfg.n_substeps,
                noise,
                |slot, s| {
                    if slot == 0 {
                        (Channel::Brownian, NoiseKey::new(stream, i, k, s))
                    } else {
                        (Channel::CompanionBrownian, NoiseKey::new(stream, i, k, s * p + slot))
                    }
                },
                mf.time,
            )?;
            out.copy_from_slice(&local[..d]);
            Ok::<(), Error>(())
        })?;
    }
    Ok(MeanFieldEnsemble {
        samples: next,
        k: k + 1,
        time: mf.time + cfg.tau,
        ..mf.clone_header()
    })
}

impl<T: Real> MeanFieldEnsemble<T> {
    fn clone_header(&self) -> Self {
        Self {
            dim: self.dim,
            samples: Vec::new(),
            k: self.k,
            time: self.time,
            stream: self.stream,
            config: self.config,
        }
    }
}

/// Applies [`ginf_step`] `n` times.
pub fn ginf_iterate<T: Real>(mf: &MeanFieldEnsemble<T>, model: &ModelSpec<T>, noise: &NoiseStream, n: usize) -> Result<MeanFieldEnsemble<T>> {
    let mut cur = mf.clone();
    for _ in 0..n {
        cur = ginf_step(&cur, model, noise)?;
    }
    Ok(cur)
}

/// Mean and per-coordinate variance of a Gaussian law with independent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState<T> {
    pub mean: Vec<T>,
    pub variance: Vec<T>,
}

impl<T: Real> GaussianState<T> {
    pub fn new(mean: Vec<T>, variance: Vec<T>) -> Result<Self> {
        if mean.len() != variance.len() || mean.is_empty() {
            return Err(Error::Config("gaussian state needs matching mean and variance".into()));
        }
        if variance.iter().any(|v| !(*v >= T::zero())) {
            return Err(Error::Config("variance must be non-negative".into()));
        }
        Ok(Self { mean, variance })
    }

    pub fn scalar(mean: T, variance: T) -> Self {
        Self {
            mean: vec![mean],
            variance: vec![variance],
        }
    }
}

/// One interval of the operator on Gaussian laws, coordinatewise:
/// `mean -> gamma mean`, `var -> alpha var + beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianRecursion {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GaussianRecursion {
    /// Fixed point `(0, beta / (1 - alpha))` when the map contracts.
    pub fn fixed_point(&self) -> Option<(f64, f64)> {
        (self.alpha < 1.0 && self.gamma.abs() < 1.0).then(|| (0.0, self.beta / (1.0 - self.alpha)))
    }
}

type Matrix = Vec<f64>;

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Matrix {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for l in 0..n {
            let ail = a[i * n + l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += ail * b[l * n + j];
            }
        }
    }
    c
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
fn expm(a: &[f64], n: usize) -> Matrix {
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled: Matrix = a.iter().map(|x| x * scale).collect();
    let mut result = vec![0.0; n * n];
    let mut term = vec![0.0; n * n];
    for i in 0..n {
        result[i * n + i] = 1.0;
        term[i * n + i] = 1.0;
    }
    for m in 1..=20 {
        term = mat_mul(&term, &scaled, n);
        let inv = 1.0 / m as f64;
        for (r, t) in result.iter_mut().zip(term.iter_mut()) {
            *t *= inv;
            *r += *t;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result, n);
    }
    result
}

/// Exact one-interval recursion of the linear batch system
/// `dY_i = -a Y_i dt - kappa/(p-1) sum_{j != i} (Y_i - Y_j) dt + sqrt(2) sigma dW_i`
/// with companions refreshed i.i.d. from the tracked law every interval.
///
/// Built from the matrix exponential of the `p x p` drift matrix; the noise
/// covariance comes from Van Loan's block exponential.
pub fn gaussian_recursion<T: Real>(model: &ModelSpec<T>, p: usize, tau: T) -> Result<GaussianRecursion> {
    let (a, kappa) = model
        .linear_coefficients()
        .ok_or_else(|| Error::UnsupportedModel(format!("`{}` does not have linear drift and kernel", model.name())))?;
    if p < 2 {
        return Err(Error::Config(format!("batch size must be at least 2, got {p}")));
    }
    let (a, kappa, sigma, tau) = (a.as_f64(), kappa.as_f64(), model.sigma().as_f64(), tau.as_f64());
    let off = kappa / (p - 1) as f64;
    let mut drift = vec![off; p * p];
    for i in 0..p {
        drift[i * p + i] = -a - kappa;
    }
    // Van Loan: exp([[-A, Q], [0, A^T]] tau) = [[., Phi^-1 Qd], [0, Phi^T]].
    let n2 = 2 * p;
    let mut block = vec![0.0; n2 * n2];
    for i in 0..p {
        for j in 0..p {
            block[i * n2 + j] = -drift[i * p + j] * tau;
            block[(p + i) * n2 + p + j] = drift[j * p + i] * tau;
        }
        block[i * n2 + p + i] = 2.0 * sigma * sigma * tau;
    }
    let e = expm(&block, n2);
    let phi: Matrix = (0..p * p).map(|idx| e[(p + idx % p) * n2 + p + idx / p]).collect();
    let upper: Matrix = (0..p * p).map(|idx| e[(idx / p) * n2 + p + idx % p]).collect();
    let qd = mat_mul(&phi, &upper, p);
    let row0 = &phi[..p];
    Ok(GaussianRecursion {
        gamma: row0.iter().sum(),
        alpha: row0.iter().map(|x| x * x).sum(),
        beta: qd[0],
    })
}

/// Propagates a Gaussian law through `n_steps` applications of the operator
/// for a linear model.
pub fn gaussian_oracle<T: Real>(model: &ModelSpec<T>, p: usize, tau: T, state: &GaussianState<T>, n_steps: usize) -> Result<GaussianState<T>> {
    let r = gaussian_recursion(model, p, tau)?;
    let mut mean: Vec<f64> = state.mean.iter().map(|m| m.as_f64()).collect();
    let mut var: Vec<f64> = state.variance.iter().map(|v| v.as_f64()).collect();
    for _ in 0..n_steps {
        for (m, v) in mean.iter_mut().zip(var.iter_mut()) {
            *m *= r.gamma;
            *v = r.alpha * *v + r.beta;
        }
    }
    Ok(GaussianState {
        mean: mean.into_iter().map(T::of).collect(),
        variance: var.into_iter().map(T::of).collect(),
    })
}

/// Invariant Gaussian law of the operator for a linear model.
pub fn gaussian_fixed_point<T: Real>(model: &ModelSpec<T>, p: usize, tau: T) -> Result<GaussianState<T>> {
    let r = gaussian_recursion(model, p, tau)?;
    let (m, v) = r.fixed_point().ok_or(Error::Convergence {
        steps: 0,
        last: r.alpha,
    })?;
    let d = model.dim();
    Ok(GaussianState {
        mean: vec![T::of(m); d],
        variance: vec![T::of(v); d],
    })
}

/// Self-consistent particle approximation of the McKean-Vlasov SDE: the
/// interaction is averaged with weight `1/N` over all particles, the particle
/// itself included when `include_self`.
pub fn mckean_vlasov_step<T: Real>(
    e: &Ensemble<T>,
    model: &ModelSpec<T>,
    dt: T,
    noise: &NoiseStream,
    step: usize,
    substep: usize,
    include_self: bool,
) -> Result<Ensemble<T>> {
    if e.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            found: e.dim(),
        });
    }
    let d = e.dim();
    let xs = e.positions();
    let denom = T::of_usize(e.len());
    let replica = e.stream();
    let next = em_step(
        xs,
        d,
        |i, _x, out| {
            let mut scratch = vec![T::zero(); 2 * d];
            group_drift(model, xs, i, denom, include_self, &mut scratch, out)
        },
        model.sigma(),
        dt,
        noise,
        |i| NoiseKey::new(replica, i, step, substep),
        e.time(),
    )?;
    Ok(Ensemble::from_parts_unchecked(d, next, e.time() + dt, replica))
}

/// Terminal ensemble of [`iterate_to_invariant`] with its convergence trace.
#[derive(Debug, Clone)]
pub struct InvariantRun<T> {
    pub ensemble: MeanFieldEnsemble<T>,
    /// `W_1` between consecutive iterates.
    pub increments: Vec<f64>,
    /// Whether the model is strongly confining, the regime in which an
    /// invariant measure is guaranteed.
    pub strong_regime: bool,
}

/// Iterates the operator until `W_1` between consecutive ensembles stays
/// below `tol` for five consecutive steps.
pub fn iterate_to_invariant<T: Real>(
    mf: &MeanFieldEnsemble<T>,
    model: &ModelSpec<T>,
    noise: &NoiseStream,
    tol: T,
    max_steps: usize,
) -> Result<InvariantRun<T>> {
    if mf.dim != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: mf.dim,
        });
    }
    let mut cur = mf.clone();
    let mut increments = Vec::new();
    let mut below = 0;
    for _ in 0..max_steps {
        let next = ginf_step(&cur, model, noise)?;
        let w = w_q_1d(&cur.empirical_measure(), &next.empirical_measure(), T::one())?;
        increments.push(w.as_f64());
        below = if w < tol { below + 1 } else { 0 };
        cur = next;
        if below >= 5 {
            return Ok(InvariantRun {
                ensemble: cur,
                increments,
                strong_regime: model.regime() == Regime::Strong,
            });
        }
    }
    Err(Error::Convergence {
        steps: max_steps,
        last: increments.last().copied().unwrap_or(f64::NAN),
    })
}
