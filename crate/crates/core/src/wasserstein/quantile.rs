use std::cmp::Ordering;

use crate::ensemble::EmpiricalMeasure;
use crate::error::{Error, Result};
use crate::real::Real;

use super::{check_q, pow_q};

fn require_1d<T: Real>(mu: &EmpiricalMeasure<T>) -> Result<()> {
    if mu.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: mu.dim(),
        });
    }
    Ok(())
}

fn sorted_atoms<T: Real>(mu: &EmpiricalMeasure<T>) -> Vec<(T, T)> {
    let mut atoms: Vec<(T, T)> = mu
        .points()
        .iter()
        .zip(mu.weights())
        .filter(|(_, &w)| w > T::zero())
        .map(|(&x, &w)| (x, w))
        .collect();
    atoms.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    atoms
}

fn sorted_points<T: Real>(xs: &[T]) -> Vec<T> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// `W_q` between two measures on the line via the monotone coupling,
/// `(int_0^1 |F_mu^-1(u) - F_nu^-1(u)|^q du)^(1/q)`, computed exactly by
/// walking the merged quantile levels.
pub fn w_q_1d<T: Real>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>, q: T) -> Result<T> {
    require_1d(mu)?;
    require_1d(nu)?;
    check_q(q)?;
    if mu.len() == nu.len() && mu.is_uniform() && nu.is_uniform() {
        let a = sorted_points(mu.points());
        let b = sorted_points(nu.points());
        let total: T = a.iter().zip(&b).map(|(&x, &y)| pow_q((x - y).abs(), q)).sum();
        return Ok((total / T::of_usize(a.len())).powf(q.recip()));
    }
    let a = sorted_atoms(mu);
    let b = sorted_atoms(nu);
    let (mut i, mut j) = (0, 0);
    let mut wa = a.first().map_or(T::zero(), |x| x.1);
    let mut wb = b.first().map_or(T::zero(), |x| x.1);
    let mut total = T::zero();
    while i < a.len() && j < b.len() {
        let c = pow_q((a[i].0 - b[j].0).abs(), q);
        if wa < wb {
            total += wa * c;
            wb -= wa;
            i += 1;
            wa = a.get(i).map_or(T::zero(), |x| x.1);
        } else {
            total += wb * c;
            wa -= wb;
            j += 1;
            wb = b.get(j).map_or(T::zero(), |x| x.1);
        }
    }
    Ok(total.max(T::zero()).powf(q.recip()))
}

/// Probability measure with constant density on each cell `[edges[c], edges[c+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    edges: Vec<T>,
    masses: Vec<T>,
}

impl<T: Real> Histogram<T> {
    /// Builds a histogram from increasing edges and non-negative cell masses,
    /// renormalizing the masses to one.
    pub fn new(edges: Vec<T>, masses: Vec<T>) -> Result<Self> {
        if edges.len() != masses.len() + 1 || masses.is_empty() {
            return Err(Error::Config("histogram needs one more edge than cells".into()));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("histogram edges must increase".into()));
        }
        if masses.iter().any(|m| !(*m >= T::zero()) || !m.is_finite()) {
            return Err(Error::Config("histogram masses must be finite and >= 0".into()));
        }
        let total: T = masses.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::Config("histogram has no mass".into()));
        }
        let masses = masses.into_iter().map(|m| m / total).collect();
        Ok(Self { edges, masses })
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }
}

/// Antiderivative of `|g|^q`.
#[inline]
fn antiderivative<T: Real>(g: T, q: T) -> T {
    g.signum() * g.abs().powf(q + T::one()) / (q + T::one())
}

/// `int_0^len |g(u)|^q du` for `g` linear from `g0` to `g1`.
#[inline]
fn linear_segment<T: Real>(g0: T, g1: T, len: T, q: T) -> T {
    let dg = g1 - g0;
    let scale = g0.abs() + g1.abs();
    if dg.abs() <= T::of(1e-6) * scale || scale.is_zero() {
        return len * pow_q(((g0 + g1) * T::of(0.5)).abs(), q);
    }
    if q == T::one() {
        // Exact for a linear function, avoiding the cancellation of the generic form.
        if g0.signum() == g1.signum() {
            return len * ((g0 + g1) * T::of(0.5)).abs();
        }
        return len * (g0 * g0 + g1 * g1) / (T::of(2.0) * dg.abs());
    }
    len * (antiderivative(g1, q) - antiderivative(g0, q)) / dg
}

/// Exact `W_q` between a discrete measure on the line and a [`Histogram`].
///
/// Within each cell the histogram's quantile function is linear, so the
/// quantile integral splits into segments with a closed-form integrand.
pub fn w_q_1d_histogram<T: Real>(mu: &EmpiricalMeasure<T>, h: &Histogram<T>, q: T) -> Result<T> {
    require_1d(mu)?;
    check_q(q)?;
    let atoms = sorted_atoms(mu);
    let cells: Vec<(T, T, T)> = h
        .masses
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > T::zero())
        .map(|(c, &m)| (h.edges[c], h.edges[c + 1], m))
        .collect();
    let (mut i, mut c) = (0, 0);
    let mut wa = atoms.first().map_or(T::zero(), |x| x.1);
    // Mass of the current cell already consumed, as a fraction of the cell.
    let mut used = T::zero();
    let mut total = T::zero();
    while i < atoms.len() && c < cells.len() {
        let (lo, hi, m) = cells[c];
        let left = m * (T::one() - used);
        let take = if wa < left { wa } else { left };
        let y0 = lo + (hi - lo) * used;
        let used_after = if wa < left { used + take / m } else { T::one() };
        let y1 = lo + (hi - lo) * used_after;
        let x = atoms[i].0;
        total += linear_segment(x - y0, x - y1, take, q);
        if wa < left {
            used = used_after;
            i += 1;
            wa = atoms.get(i).map_or(T::zero(), |x| x.1);
        } else {
            wa -= left;
            c += 1;
            used = T::zero();
        }
    }
    Ok(total.max(T::zero()).powf(q.recip()))
}
