use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, StudyError};

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
    /// Slopes of the individual seeds, when the fit was seed-replicated.
    pub seed_slopes: Vec<f64>,
    /// 95% t-interval for the slope from the seed slopes.
    pub interval: Option<[f64; 2]>,
}

fn ols(lx: &[f64], ly: &[f64]) -> (f64, f64) {
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn logs(v: &[f64], what: &str) -> Result<Vec<f64>> {
    v.iter()
        .map(|&a| {
            if a > 0.0 && a.is_finite() {
                Ok(a.ln())
            } else {
                Err(StudyError::Config(format!("log-log fit needs positive {what}, got {a}")))
            }
        })
        .collect()
}

impl SlopeFit {
    /// Fits `y ~ C x^slope`. Needs at least three points with distinct `x`.
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 3 {
            return Err(StudyError::Config(format!("slope fit needs >= 3 points, got {}", x.len())));
        }
        let lx = logs(x, "abscissae")?;
        let ly = logs(y, "values")?;
        if lx.iter().all(|&v| v == lx[0]) {
            return Err(StudyError::Config("slope fit needs distinct abscissae".into()));
        }
        let (slope, intercept) = ols(&lx, &ly);
        let residual = (lx
            .iter()
            .zip(&ly)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum::<f64>()
            / lx.len() as f64)
            .sqrt();
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            slope,
            intercept,
            residual,
            seed_slopes: Vec::new(),
            interval: None,
        })
    }

    /// Fits the seed-averaged values and attaches a 95% interval from the
    /// slopes fitted to each seed separately. `per_seed[s][i]` is seed `s` at `x[i]`.
    pub fn fit_seeds(x: &[f64], per_seed: &[Vec<f64>]) -> Result<Self> {
        if per_seed.is_empty() {
            return Err(StudyError::Config("no seeds to fit".into()));
        }
        let mean: Vec<f64> = (0..x.len())
            .map(|i| per_seed.iter().map(|s| s[i]).sum::<f64>() / per_seed.len() as f64)
            .collect();
        let mut fit = Self::fit(x, &mean)?;
        fit.seed_slopes = per_seed
            .iter()
            .map(|s| Self::fit(x, s).map(|f| f.slope))
            .collect::<Result<_>>()?;
        fit.interval = t_interval(&fit.seed_slopes);
        Ok(fit)
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.slope >= lo && self.slope <= hi
    }
}

/// Two-sided 95% Student-t interval for the mean of `v`; needs two values.
pub fn t_interval(v: &[f64]) -> Option<[f64; 2]> {
    let n = v.len();
    if n < 2 {
        return None;
    }
    let (mean, se) = mean_se(v);
    let q = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?.inverse_cdf(0.975);
    Some([mean - q * se, mean + q * se])
}

/// Mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
