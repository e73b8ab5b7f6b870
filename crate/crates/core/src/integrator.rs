//! Euler-Maruyama stepping with keyed Gaussian increments.
//!
//! The update is `x' = x + drift dt + sqrt(2 sigma^2 dt) xi`, matching the
//! `sqrt(2) sigma dW` noise convention of the particle systems. Increments are
//! looked up by [`NoiseKey`], so any two systems stepped with the same keys are
//! synchronously coupled.

use rayon::prelude::*;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::noise::{Channel, NoiseKey, NoiseStream};
use crate::real::Real;

/// Any coordinate beyond this magnitude aborts the run.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Time step used inside one interval of length `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan<T> {
    pub dt: T,
    pub n_substeps: usize,
}

impl<T: Real> StepPlan<T> {
    pub fn new(dt: T, n_substeps: usize) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if n_substeps == 0 {
            return Err(Error::Config("need at least one substep".into()));
        }
        Ok(Self { dt, n_substeps })
    }

    /// Splits an interval of length `tau` into `n_substeps` equal steps.
    pub fn for_interval(tau: T, n_substeps: usize) -> Result<Self> {
        if n_substeps == 0 {
            return Err(Error::Config("need at least one substep".into()));
        }
        Self::new(tau / T::of_usize(n_substeps), n_substeps)
    }
}

/// Drift of member `i` of a group of particles stored contiguously in `xs`:
/// `b(x_i) + denom^-1 sum_{j} K(x_i - x_j)`, the sum running over the group in
/// storage order and skipping `j = i` unless `include_self`.
///
/// Every stepper routes through this function so that identical groups give
/// bit-identical drifts.
#[inline]
pub(crate) fn group_drift<T: Real>(
    model: &ModelSpec<T>,
    xs: &[T],
    i: usize,
    denom: T,
    include_self: bool,
    scratch: &mut [T],
    out: &mut [T],
) {
    let d = model.dim();
    if d == 1 {
        out[0] = group_drift_1d(model, xs, i, denom, include_self);
        return;
    }
    let xi = &xs[i * d..(i + 1) * d];
    model.drift().eval(xi, out);
    if model.kernel().is_zero() {
        return;
    }
    let (z, k) = scratch.split_at_mut(d);
    let mut acc = vec![T::zero(); d];
    for (j, xj) in xs.chunks_exact(d).enumerate() {
        if j == i && !include_self {
            continue;
        }
        for c in 0..d {
            z[c] = xi[c] - xj[c];
        }
        model.kernel().eval(z, &mut k[..d]);
        for c in 0..d {
            acc[c] += k[c];
        }
    }
    for c in 0..d {
        out[c] += acc[c] / denom;
    }
}

#[inline]
fn group_drift_1d<T: Real>(model: &ModelSpec<T>, xs: &[T], i: usize, denom: T, include_self: bool) -> T {
    let xi = xs[i];
    let b = model.drift().eval1(xi);
    let kernel = model.kernel();
    if kernel.is_zero() {
        return b;
    }
    let mut acc = T::zero();
    for (j, &xj) in xs.iter().enumerate() {
        if j == i && !include_self {
            continue;
        }
        acc += kernel.eval1(xi - xj);
    }
    b + acc / denom
}

/// Applies one Euler-Maruyama update to a single particle in place.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn em_update<T: Real>(
    x: &mut [T],
    drift: &[T],
    sigma: T,
    dt: T,
    noise: &NoiseStream,
    channel: Channel,
    key: NoiseKey,
    component_offset: usize,
    time: T,
) -> Result<()> {
    let blowup = || Error::NumericalBlowup {
        particle: key.particle as usize,
        time: time.as_f64(),
    };
    let amp = (T::of(2.0) * sigma * sigma * dt).sqrt();
    let limit = T::of(BLOWUP_THRESHOLD);
    for c in 0..x.len() {
        if !drift[c].is_finite() {
            return Err(blowup());
        }
        let mut next = x[c] + drift[c] * dt;
        if !amp.is_zero() {
            let xi: T = noise.normal(channel, key, component_offset + c);
            next += amp * xi;
        }
        if !(next.abs() <= limit) {
            return Err(blowup());
        }
        x[c] = next;
    }
    Ok(())
}

/// Evolves a small interacting group stored contiguously in `xs` through
/// `n_substeps` Euler-Maruyama steps of length `dt`.
///
/// `key_of(slot, substep)` names the increment of group member `slot`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn evolve_group<T, K>(
    model: &ModelSpec<T>,
    xs: &mut [T],
    denom: T,
    dt: T,
    n_substeps: usize,
    noise: &NoiseStream,
    key_of: K,
    t0: T,
) -> Result<()>
where
    T: Real,
    K: Fn(usize, usize) -> (Channel, NoiseKey),
{
    let d = model.dim();
    let m = xs.len() / d;
    let mut drift = vec![T::zero(); xs.len()];
    let mut scratch = vec![T::zero(); 2 * d];
    let mut t = t0;
    for s in 0..n_substeps {
        for i in 0..m {
            group_drift(model, xs, i, denom, false, &mut scratch, &mut drift[i * d..(i + 1) * d]);
        }
        for i in 0..m {
            let (channel, key) = key_of(i, s);
            em_update(&mut xs[i * d..(i + 1) * d], &drift[i * d..(i + 1) * d], model.sigma(), dt, noise, channel, key, 0, t)?;
        }
        t += dt;
    }
    Ok(())
}

/// One Euler-Maruyama step of an arbitrary drift.
///
/// `drift_eval(i, x_i, out)` fills the drift of particle `i`; `key_of(i)` names its
/// Gaussian increment.
#[allow(clippy::too_many_arguments)]
pub fn em_step<T, F, K>(
    positions: &[T],
    dim: usize,
    drift_eval: F,
    sigma: T,
    dt: T,
    noise: &NoiseStream,
    key_of: K,
    time: T,
) -> Result<Vec<T>>
where
    T: Real,
    F: Fn(usize, &[T], &mut [T]) + Sync,
    K: Fn(usize) -> NoiseKey + Sync,
{
    if !(dt > T::zero()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let mut next = positions.to_vec();
    next.par_chunks_mut(dim)
        .enumerate()
        .try_for_each_init(
            || vec![T::zero(); dim],
            |drift, (i, x)| {
                drift_eval(i, x, drift);
                em_update(x, drift, sigma, dt, noise, Channel::Brownian, key_of(i), 0, time)
            },
        )?;
    Ok(next)
}

/// One step of the full `N`-particle system with `1/(N-1)` interaction normalization.
///
/// Noise keys are `(e.stream(), i, step, substep)`.
pub fn full_system_step<T: Real>(
    e: &Ensemble<T>,
    model: &ModelSpec<T>,
    dt: T,
    noise: &NoiseStream,
    step: usize,
    substep: usize,
) -> Result<Ensemble<T>> {
    let n = e.len();
    if e.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            found: e.dim(),
        });
    }
    if n < 2 && !model.kernel().is_zero() {
        return Err(Error::Config("an interacting system needs at least two particles".into()));
    }
    let denom = T::of_usize(n.max(2) - 1);
    let xs = e.positions();
    let d = e.dim();
    let replica = e.stream();
    let next = em_step(
        xs,
        d,
        |i, _x, out| {
            let mut scratch = vec![T::zero(); 2 * d];
            group_drift(model, xs, i, denom, false, &mut scratch, out)
        },
        model.sigma(),
        dt,
        noise,
        |i| NoiseKey::new(replica, i, step, substep),
        e.time(),
    )?;
    Ok(Ensemble::from_parts_unchecked(d, next, e.time() + dt, replica))
}
