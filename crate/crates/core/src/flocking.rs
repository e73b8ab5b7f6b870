//! Second-order alignment dynamics `x' = v`, `v_i' = c sum_j H(x_i, x_j, v_i)(v_j - v_i)`,
//! their random batch version and the mean-field operator with resampled companions.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::BLOWUP_THRESHOLD;
use crate::meanfield::{companions_of, MeanFieldConfig};
use crate::noise::NoiseStream;
use crate::rbm::Partition;
use crate::real::Real;

/// Positions and velocities of `N` particles in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticEnsemble<T> {
    dim: usize,
    x: Vec<T>,
    v: Vec<T>,
    time: T,
    step: usize,
    stream: u64,
}

impl<T: Real> KineticEnsemble<T> {
    pub fn new(dim: usize, x: Vec<T>, v: Vec<T>) -> Result<Self> {
        if dim == 0 || x.is_empty() || !x.len().is_multiple_of(dim) || x.len() != v.len() {
            return Err(Error::Config(format!(
                "positions ({}) and velocities ({}) must be equal non-empty multiples of d = {dim}",
                x.len(),
                v.len()
            )));
        }
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::Config("non-finite entry".into()));
        }
        Ok(Self {
            dim,
            x,
            v,
            time: T::zero(),
            step: 0,
            stream: 0,
        })
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[T] {
        &self.x
    }

    pub fn velocities(&self) -> &[T] {
        &self.v
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// Number of steps taken.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn velocity(&self, i: usize) -> &[T] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean_velocity(&self) -> Vec<T> {
        let d = self.dim;
        let mut m = vec![T::zero(); d];
        for v in self.v.chunks(d) {
            for c in 0..d {
                m[c] += v[c];
            }
        }
        let n = T::of_usize(self.len());
        m.iter().map(|&s| s / n).collect()
    }

    /// Mean squared distance of the velocities to their mean.
    pub fn velocity_variance(&self) -> T {
        let m = self.mean_velocity();
        let total: T = self
            .v
            .chunks(self.dim)
            .map(|v| v.iter().zip(&m).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>())
            .sum();
        total / T::of_usize(self.len())
    }

    /// `max_i |v_i - mean v|`.
    pub fn velocity_spread(&self) -> T {
        let m = self.mean_velocity();
        self.v
            .chunks(self.dim)
            .map(|v| v.iter().zip(&m).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Interaction weight `H(x_i, x_j, v_i) >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AlignmentKernel<T> {
    /// `H = 1`.
    Constant,
    /// `H = (1 + |x_i - x_j|^2)^(-alpha)`.
    CuckerSmale { alpha: T },
}

impl<T: Real> AlignmentKernel<T> {
    #[inline]
    pub fn eval(&self, xi: &[T], xj: &[T], _vi: &[T]) -> T {
        match *self {
            Self::Constant => T::one(),
            Self::CuckerSmale { alpha } => {
                let r2: T = xi.iter().zip(xj).map(|(&a, &b)| (a - b) * (a - b)).sum();
                (T::one() + r2).powf(-alpha)
            }
        }
    }
}

/// Normalization of the full-system alignment sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `1/N`.
    OverN,
    /// `1/(N-1)`, the choice that a single batch of size `N` reproduces.
    OverNMinusOne,
}

/// Explicit Euler update of particle `i` interacting with `members` (which may include `i`).
#[allow(clippy::too_many_arguments)]
#[inline]
fn align_one<T: Real>(
    h: &AlignmentKernel<T>,
    d: usize,
    xs: &[T],
    vs: &[T],
    members: impl Iterator<Item = usize>,
    i: usize,
    scale: T,
    dt: T,
    out_x: &mut [T],
    out_v: &mut [T],
) {
    let xi = &xs[i * d..(i + 1) * d];
    let vi = &vs[i * d..(i + 1) * d];
    let mut acc = [T::zero(); 4];
    let mut acc_vec = if d > 4 { vec![T::zero(); d] } else { Vec::new() };
    let acc: &mut [T] = if d > 4 { &mut acc_vec } else { &mut acc[..d] };
    for j in members {
        if j == i {
            continue;
        }
        let w = h.eval(xi, &xs[j * d..(j + 1) * d], vi);
        for c in 0..d {
            acc[c] += w * (vs[j * d + c] - vi[c]);
        }
    }
    for c in 0..d {
        out_x[c] = xi[c] + dt * vi[c];
        out_v[c] = vi[c] + dt * (scale * acc[c]);
    }
}

fn guard<T: Real>(d: usize, x: &[T], v: &[T], time: T) -> Result<()> {
    let limit = T::of(BLOWUP_THRESHOLD);
    for (idx, c) in x.iter().chain(v).enumerate() {
        if !c.is_finite() || c.abs() > limit {
            return Err(Error::NumericalBlowup {
                particle: (idx % x.len()) / d,
                time: time.as_f64(),
            });
        }
    }
    Ok(())
}

fn advanced<T: Real>(e: &KineticEnsemble<T>, x: Vec<T>, v: Vec<T>, dt: T) -> Result<KineticEnsemble<T>> {
    let time = e.time + dt;
    guard(e.dim, &x, &v, time)?;
    Ok(KineticEnsemble {
        dim: e.dim,
        x,
        v,
        time,
        step: e.step + 1,
        stream: e.stream,
    })
}

/// One explicit Euler step of the full alignment system.
pub fn flocking_full_step<T: Real>(
    e: &KineticEnsemble<T>,
    h: &AlignmentKernel<T>,
    dt: T,
    norm: Normalization,
) -> Result<KineticEnsemble<T>> {
    let (n, d) = (e.len(), e.dim);
    let scale = match norm {
        Normalization::OverN => T::one() / T::of_usize(n),
        Normalization::OverNMinusOne if n > 1 => T::one() / T::of_usize(n - 1),
        Normalization::OverNMinusOne => T::zero(),
    };
    let mut x = vec![T::zero(); n * d];
    let mut v = vec![T::zero(); n * d];
    x.par_chunks_mut(d)
        .zip(v.par_chunks_mut(d))
        .enumerate()
        .for_each(|(i, (ox, ov))| align_one(h, d, &e.x, &e.v, 0..n, i, scale, dt, ox, ov));
    advanced(e, x, v, dt)
}

/// One explicit Euler step where particles align only within their batch,
/// with weight `1/(p-1)`.
pub fn flocking_rbm_step<T: Real>(
    e: &KineticEnsemble<T>,
    h: &AlignmentKernel<T>,
    partition: &Partition,
    dt: T,
) -> Result<KineticEnsemble<T>> {
    let (n, d) = (e.len(), e.dim);
    if partition.n() != n {
        return Err(Error::Config(format!("partition of {} particles for {n}", partition.n())));
    }
    let scale = T::one() / T::of_usize(partition.p() - 1);
    let updates: Vec<(usize, Vec<T>, Vec<T>)> = partition
        .batches()
        .par_iter()
        .flat_map_iter(|batch| {
            batch.iter().map(move |&i| {
                let mut ox = vec![T::zero(); d];
                let mut ov = vec![T::zero(); d];
                align_one(h, d, &e.x, &e.v, batch.iter().copied(), i, scale, dt, &mut ox, &mut ov);
                (i, ox, ov)
            })
        })
        .collect();
    let mut x = vec![T::zero(); n * d];
    let mut v = vec![T::zero(); n * d];
    for (i, ox, ov) in updates {
        x[i * d..(i + 1) * d].copy_from_slice(&ox);
        v[i * d..(i + 1) * d].copy_from_slice(&ov);
    }
    advanced(e, x, v, dt)
}

/// One application of the kinetic mean-field operator: each sample evolves
/// over `tau` in a batch with `p-1` companions resampled from the ensemble at
/// the start of the interval, using `n_substeps` Euler steps. No noise.
pub fn qinf_step<T: Real>(
    e: &KineticEnsemble<T>,
    h: &AlignmentKernel<T>,
    cfg: &MeanFieldConfig<T>,
    noise: &NoiseStream,
) -> Result<KineticEnsemble<T>> {
    let (m, d, p) = (e.len(), e.dim, cfg.p);
    if m < p {
        return Err(Error::Config(format!("{m} samples cannot supply batches of {p}")));
    }
    let dt = cfg.tau / T::of_usize(cfg.n_substeps);
    let scale = T::one() / T::of_usize(p - 1);
    let mut x = e.x.clone();
    let mut v = e.v.clone();
    x.par_chunks_mut(d).zip(v.par_chunks_mut(d)).enumerate().for_each(|(i, (ox, ov))| {
        let companions = companions_of(noise, e.stream, i, e.step, m, p - 1, cfg.companions);
        let mut lx = Vec::with_capacity(p * d);
        let mut lv = Vec::with_capacity(p * d);
        for &j in std::iter::once(&i).chain(&companions) {
            lx.extend_from_slice(&e.x[j * d..(j + 1) * d]);
            lv.extend_from_slice(&e.v[j * d..(j + 1) * d]);
        }
        let mut nx = lx.clone();
        let mut nv = lv.clone();
        for _ in 0..cfg.n_substeps {
            for s in 0..p {
                let (a, b) = (s * d, (s + 1) * d);
                align_one(h, d, &lx, &lv, 0..p, s, scale, dt, &mut nx[a..b], &mut nv[a..b]);
            }
            std::mem::swap(&mut lx, &mut nx);
            std::mem::swap(&mut lv, &mut nv);
        }
        ox.copy_from_slice(&lx[..d]);
        ov.copy_from_slice(&lv[..d]);
    });
    advanced(e, x, v, cfg.tau)
}

/// Per-component mean of `v_after - v_before` over samples and its standard error.
pub fn velocity_increment<T: Real>(before: &KineticEnsemble<T>, after: &KineticEnsemble<T>) -> Result<(Vec<f64>, Vec<f64>)> {
    if before.len() != after.len() || before.dim != after.dim {
        return Err(Error::Dimension {
            expected: before.v.len(),
            found: after.v.len(),
        });
    }
    let (n, d) = (before.len(), before.dim);
    let mut mean = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for (a, b) in after.v.chunks(d).zip(before.v.chunks(d)) {
        for c in 0..d {
            let inc = (a[c] - b[c]).as_f64();
            mean[c] += inc;
            sq[c] += inc * inc;
        }
    }
    let nf = n as f64;
    let se = (0..d)
        .map(|c| {
            let m = mean[c] / nf;
            let var = (sq[c] / nf - m * m).max(0.0) * nf / (nf - 1.0).max(1.0);
            (var / nf).sqrt()
        })
        .collect();
    Ok((mean.iter().map(|s| s / nf).collect(), se))
}

/// Writes snapshots as `step,time,particle_id,x_1..x_d,v_1..v_d`.
pub fn write_kinetic_csv<T: Real, W: Write>(snapshots: &[KineticEnsemble<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = snapshots.first().map_or(1, |s| s.dim);
    let mut header = vec!["step".to_string(), "time".into(), "particle_id".into()];
    header.extend((1..=d).map(|c| format!("x_{c}")));
    header.extend((1..=d).map(|c| format!("v_{c}")));
    w.write_record(&header)?;
    for s in snapshots {
        for i in 0..s.len() {
            let mut row = vec![s.step.to_string(), s.time.to_string(), i.to_string()];
            row.extend(s.x[i * d..(i + 1) * d].iter().map(|c| c.to_string()));
            row.extend(s.v[i * d..(i + 1) * d].iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
