//! Particle ensembles, empirical measures and initial laws.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::noise::{Channel, NoiseStream};
use crate::real::{norm, Real};

/// Positions of `N` particles in `R^d` at one time point.
///
/// `stream` is the replica id used when keying this ensemble's noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    dim: usize,
    positions: Vec<T>,
    time: T,
    stream: u64,
}

impl<T: Real> Ensemble<T> {
    pub fn new(dim: usize, positions: Vec<T>, time: T, stream: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("ensemble dimension must be positive".into()));
        }
        if positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(Error::Config(format!(
                "{} coordinates do not form a non-empty ensemble in dimension {dim}",
                positions.len()
            )));
        }
        if let Some(i) = positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::Config(format!("non-finite coordinate for particle {}", i / dim)));
        }
        Ok(Self {
            dim,
            positions,
            time,
            stream,
        })
    }

    /// One-dimensional ensemble at time zero.
    pub fn from_points(points: Vec<T>) -> Result<Self> {
        Self::new(1, points, T::zero(), 0)
    }

    pub(crate) fn from_parts_unchecked(dim: usize, positions: Vec<T>, time: T, stream: u64) -> Self {
        Self {
            dim,
            positions,
            time,
            stream,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<T> {
        self.positions
    }

    pub fn particle(&self, i: usize) -> &[T] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn with_time(mut self, time: T) -> Self {
        self.time = time;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    /// Relabels particles: particle `i` of the result is particle `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut positions = Vec::with_capacity(self.positions.len());
        for &j in perm {
            positions.extend_from_slice(self.particle(j));
        }
        Self { positions, ..*self }
    }

    /// Empirical `q`-th absolute moment `N^-1 sum_i |X_i|^q`.
    pub fn moment(&self, q: T) -> T {
        let n = T::of_usize(self.len());
        self.positions
            .chunks_exact(self.dim)
            .map(|x| norm(x).powf(q))
            .sum::<T>()
            / n
    }

    pub fn mean(&self) -> Vec<T> {
        let n = T::of_usize(self.len());
        let mut m = vec![T::zero(); self.dim];
        for x in self.positions.chunks_exact(self.dim) {
            for (mk, &xk) in m.iter_mut().zip(x) {
                *mk += xk;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Per-coordinate sample variance (normalized by `N`).
    pub fn variance(&self) -> Vec<T> {
        let m = self.mean();
        let n = T::of_usize(self.len());
        let mut v = vec![T::zero(); self.dim];
        for x in self.positions.chunks_exact(self.dim) {
            for k in 0..self.dim {
                let dx = x[k] - m[k];
                v[k] += dx * dx;
            }
        }
        v.iter_mut().for_each(|s| *s /= n);
        v
    }

    /// Empirical mean interaction force `N^-1 sum_j K(x - X_j)`.
    pub fn mean_force(&self, model: &ModelSpec<T>, x: &[T]) -> Vec<T> {
        let d = self.dim;
        let mut acc = vec![T::zero(); d];
        let mut z = vec![T::zero(); d];
        let mut k = vec![T::zero(); d];
        for y in self.positions.chunks_exact(d) {
            for c in 0..d {
                z[c] = x[c] - y[c];
            }
            model.kernel().eval(&z, &mut k);
            for c in 0..d {
                acc[c] += k[c];
            }
        }
        let n = T::of_usize(self.len());
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Uniform-weight empirical measure of the particle positions.
    pub fn empirical_measure(&self) -> EmpiricalMeasure<T> {
        EmpiricalMeasure::uniform(self.dim, self.positions.clone())
    }

    /// Writes `particle_id,x_1,...,x_d` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["particle_id".to_string()];
        header.extend((1..=self.dim).map(|c| format!("x_{c}")));
        w.write_record(&header)?;
        for (i, x) in self.positions.chunks_exact(self.dim).enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(x.iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV with a header row. A `particle_id` column is ignored; every other
    /// column is a coordinate.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let coord_cols: Vec<usize> = header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.trim() != "particle_id")
            .map(|(i, _)| i)
            .collect();
        if coord_cols.is_empty() {
            return Err(Error::Config("CSV has no coordinate columns".into()));
        }
        let mut positions = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for &c in &coord_cols {
                let field = rec.get(c).unwrap_or("").trim();
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Config(format!("not a number: `{field}`")))?;
                positions.push(T::of(v));
            }
        }
        Self::new(coord_cols.len(), positions, T::zero(), 0)
    }
}

/// Free-function form of [`Ensemble::moment`].
pub fn moment<T: Real>(e: &Ensemble<T>, q: T) -> T {
    e.moment(q)
}

/// Free-function form of [`Ensemble::mean_force`].
pub fn mean_force<T: Real>(e: &Ensemble<T>, model: &ModelSpec<T>, x: &[T]) -> Vec<T> {
    e.mean_force(model, x)
}

/// Weighted point cloud with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T> {
    dim: usize,
    points: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> EmpiricalMeasure<T> {
    pub fn uniform(dim: usize, points: Vec<T>) -> Self {
        assert!(dim > 0 && points.len().is_multiple_of(dim) && !points.is_empty());
        let n = points.len() / dim;
        let w = T::one() / T::of_usize(n);
        Self {
            dim,
            points,
            weights: vec![w; n],
        }
    }

    pub fn weighted(dim: usize, points: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 || points.len() != weights.len() * dim || weights.is_empty() {
            return Err(Error::Config("support and weights do not match".into()));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::Config("weights must be finite and nonnegative".into()));
        }
        let total: T = weights.iter().copied().sum();
        let tol = T::of(1e-12).max(T::epsilon() * T::of_usize(4 * weights.len()));
        if (total - T::one()).abs() > tol {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            dim,
            points,
            weights,
        })
    }

    /// Normalizes arbitrary nonnegative masses into a probability measure.
    pub fn from_masses(dim: usize, points: Vec<T>, masses: Vec<T>) -> Result<Self> {
        let total: T = masses.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::Config("total mass must be positive".into()));
        }
        let weights = masses.into_iter().map(|m| m / total).collect();
        Self::weighted(dim, points, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|&w| w == w0)
    }

    pub fn translated(&self, shift: &[T]) -> Self {
        let mut points = self.points.clone();
        for x in points.chunks_exact_mut(self.dim) {
            for (xk, &s) in x.iter_mut().zip(shift) {
                *xk += s;
            }
        }
        Self {
            points,
            ..self.clone()
        }
    }
}

/// Law of the i.i.d. initial positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw<T> {
    /// Independent coordinates with the given means and variances.
    Gaussian { mean: Vec<T>, variance: Vec<T> },
    Uniform { lower: Vec<T>, upper: Vec<T> },
    Point { at: Vec<T> },
    /// Weighted mixture; weights need not be normalized.
    Mixture { components: Vec<(T, InitialLaw<T>)> },
}

impl<T: Real> InitialLaw<T> {
    pub fn gaussian(mean: T, variance: T) -> Self {
        Self::Gaussian {
            mean: vec![mean],
            variance: vec![variance],
        }
    }

    pub fn uniform(lower: T, upper: T) -> Self {
        Self::Uniform {
            lower: vec![lower],
            upper: vec![upper],
        }
    }

    pub fn point(at: T) -> Self {
        Self::Point { at: vec![at] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mean, .. } => mean.len(),
            Self::Uniform { lower, .. } => lower.len(),
            Self::Point { at } => at.len(),
            Self::Mixture { components } => components.first().map_or(0, |(_, l)| l.dim()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self {
            Self::Gaussian { mean, variance } => {
                if mean.is_empty() || mean.len() != variance.len() {
                    return bad("gaussian mean/variance dimensions differ".into());
                }
                if variance.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
                    return bad("gaussian variance must be finite and >= 0".into());
                }
            }
            Self::Uniform { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return bad("uniform bounds dimensions differ".into());
                }
                if lower.iter().zip(upper).any(|(a, b)| !(a < b)) {
                    return bad("uniform law needs lower < upper".into());
                }
            }
            Self::Point { at } => {
                if at.is_empty() || at.iter().any(|x| !x.is_finite()) {
                    return bad("point law needs a finite location".into());
                }
            }
            Self::Mixture { components } => {
                if components.is_empty() {
                    return bad("empty mixture".into());
                }
                let d = components[0].1.dim();
                for (w, law) in components {
                    if !(*w > T::zero()) {
                        return bad("mixture weights must be positive".into());
                    }
                    if law.dim() != d {
                        return bad("mixture components disagree on dimension".into());
                    }
                    law.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Draws one sample for `(replica, particle)` into `out`.
    pub fn sample_into(&self, noise: &NoiseStream, replica: u64, particle: u64, out: &mut [T]) {
        self.sample_at_depth(noise, replica, particle, 0, out)
    }

    fn sample_at_depth(&self, noise: &NoiseStream, replica: u64, particle: u64, depth: u64, out: &mut [T]) {
        match self {
            Self::Gaussian { mean, variance } => {
                for c in 0..out.len() {
                    let z = noise.gaussian(Channel::Init, &[replica, particle, c as u64, depth]);
                    out[c] = mean[c] + variance[c].sqrt() * T::of(z);
                }
            }
            Self::Uniform { lower, upper } => {
                for c in 0..out.len() {
                    let u = noise.uniform(Channel::Init, &[replica, particle, c as u64, depth]);
                    out[c] = lower[c] + (upper[c] - lower[c]) * T::of(u);
                }
            }
            Self::Point { at } => out.copy_from_slice(at),
            Self::Mixture { components } => {
                let total: T = components.iter().map(|(w, _)| *w).sum();
                let u = T::of(noise.uniform(Channel::Init, &[replica, particle, u64::MAX, depth])) * total;
                let mut acc = T::zero();
                let mut chosen = &components[components.len() - 1].1;
                for (w, law) in components {
                    acc += *w;
                    if u < acc {
                        chosen = law;
                        break;
                    }
                }
                chosen.sample_at_depth(noise, replica, particle, depth + 1, out)
            }
        }
    }
}

/// Draws `n` i.i.d. particles from `law`; deterministic in `(seed, n, law)`.
pub fn init_iid<T: Real>(law: &InitialLaw<T>, n: usize, seed: u64) -> Result<Ensemble<T>> {
    init_iid_replica(law, n, &NoiseStream::new(seed), 0)
}

/// Like [`init_iid`] for one replica of a multi-replica experiment.
pub fn init_iid_replica<T: Real>(
    law: &InitialLaw<T>,
    n: usize,
    noise: &NoiseStream,
    replica: u64,
) -> Result<Ensemble<T>> {
    if n == 0 {
        return Err(Error::Config("ensemble needs at least one particle".into()));
    }
    law.validate()?;
    let d = law.dim();
    let mut positions = vec![T::zero(); n * d];
    positions
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(i, x)| law.sample_into(noise, replica, i as u64, x));
    Ensemble::new(d, positions, T::zero(), replica)
}
