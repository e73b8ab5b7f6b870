//! Exact Wasserstein distances.
//!
//! One-dimensional problems use the monotone (quantile) coupling, including
//! between samples and a piecewise-constant density. Small problems in any
//! dimension are solved exactly as an assignment or a transportation LP.

mod assignment;
mod bound;
mod quantile;
mod transport;

use serde::{Deserialize, Serialize};

use crate::ensemble::EmpiricalMeasure;
use crate::error::{Error, Result};
use crate::real::{distance, Real};

pub use assignment::assignment;
pub use bound::{tv_wq_bound, TvBound};
pub use quantile::{w_q_1d, w_q_1d_histogram, Histogram};
pub use transport::transport_plan;

/// Largest uniform instance solved as an assignment problem.
pub const MAX_ASSIGNMENT: usize = 512;
/// Largest weighted instance solved as a transportation LP.
pub const MAX_LP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quantile1d,
    AssignmentExact,
    LpExact,
    /// Quantile coupling between samples and a piecewise-constant density.
    QuantileHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub q: f64,
    pub value: f64,
    pub method: Method,
    pub sizes: [usize; 2],
}

#[inline]
pub(crate) fn pow_q<T: Real>(x: T, q: T) -> T {
    if q == T::one() {
        x
    } else if q == T::of(2.0) {
        x * x
    } else {
        x.powf(q)
    }
}

pub(crate) fn check_q<T: Real>(q: T) -> Result<()> {
    if !(q >= T::one()) || !q.is_finite() {
        return Err(Error::Config(format!("Wasserstein order must be >= 1, got {q}")));
    }
    Ok(())
}

fn check_dims<T: Real>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::Dimension {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    Ok(())
}

/// Pairwise cost matrix `|x_i - y_j|^q`, row-major.
pub(crate) fn cost_matrix<T: Real>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>, q: T) -> Vec<T> {
    let mut cost = Vec::with_capacity(mu.len() * nu.len());
    for i in 0..mu.len() {
        for j in 0..nu.len() {
            cost.push(pow_q(distance(mu.point(i), nu.point(j)), q));
        }
    }
    cost
}

/// Exact `W_q` for small instances in any dimension: an assignment problem
/// for equal-size uniform measures (`n <= 512`), a transportation LP for
/// weighted ones (`n, m <= 64`).
pub fn w_q_exact_smalld<T: Real>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>, q: T) -> Result<DistanceReport> {
    check_q(q)?;
    check_dims(mu, nu)?;
    let sizes = [mu.len(), nu.len()];
    let uniform = mu.len() == nu.len() && mu.is_uniform() && nu.is_uniform();
    let (total, method) = if uniform && mu.len() <= MAX_ASSIGNMENT {
        let n = mu.len();
        let (_, cost) = assignment(&cost_matrix(mu, nu, q), n);
        (cost / T::of_usize(n), Method::AssignmentExact)
    } else if mu.len() <= MAX_LP && nu.len() <= MAX_LP {
        let plan = transport_plan(mu.weights(), nu.weights(), &cost_matrix(mu, nu, q))?;
        (plan.cost, Method::LpExact)
    } else {
        return Err(Error::Size(format!(
            "exact transport between {} and {} points exceeds the supported sizes",
            mu.len(),
            nu.len()
        )));
    };
    Ok(DistanceReport {
        q: q.as_f64(),
        value: total.max(T::zero()).powf(q.recip()).as_f64(),
        method,
        sizes,
    })
}

/// `W_q` by the best available exact method: the quantile coupling in 1D,
/// otherwise [`w_q_exact_smalld`].
pub fn w_q<T: Real>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>, q: T) -> Result<DistanceReport> {
    check_dims(mu, nu)?;
    if mu.dim() == 1 {
        Ok(DistanceReport {
            q: q.as_f64(),
            value: w_q_1d(mu, nu, q)?.as_f64(),
            method: Method::Quantile1d,
            sizes: [mu.len(), nu.len()],
        })
    } else {
        w_q_exact_smalld(mu, nu, q)
    }
}
