//! Finite-volume solver for the one-dimensional nonlinear Fokker-Planck
//! equation `d_t rho = -d_x((b + K * rho) rho) + sigma^2 d_xx rho` on `[-A, A]`
//! with no-flux walls.
//!
//! Fluxes use Scharfetter-Gummel (exponentially fitted Chang-Cooper) weights,
//! which reduce to central differences for weak advection and to upwinding
//! when diffusion vanishes; the explicit step keeps densities non-negative
//! under the bound reported by [`stable_dt`].

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::ensemble::EmpiricalMeasure;
use crate::error::{Error, Result};
use crate::model::{Kernel, ModelSpec};
use crate::real::Real;
use crate::wasserstein::Histogram;

/// Cell averages of a density on `n` equal cells of `[-A, A]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity<T> {
    half_width: T,
    rho: Vec<T>,
    time: T,
}

impl<T: Real> GridDensity<T> {
    /// Wraps cell averages as given; they must be non-negative with unit mass.
    pub fn new(half_width: T, rho: Vec<T>, time: T) -> Result<Self> {
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::Config(format!("domain half-width must be positive, got {half_width}")));
        }
        if rho.is_empty() {
            return Err(Error::Config("grid needs at least one cell".into()));
        }
        if rho.iter().any(|r| !(*r >= T::zero()) || !r.is_finite()) {
            return Err(Error::Config("densities must be finite and non-negative".into()));
        }
        let g = Self { half_width, rho, time };
        let defect = (g.mass() - T::one()).abs();
        if defect > T::of(1e-8) {
            return Err(Error::Config(format!("density mass differs from one by {defect}")));
        }
        Ok(g)
    }

    /// Rescales non-negative cell values to unit mass.
    pub fn from_cell_values(half_width: T, values: Vec<T>) -> Result<Self> {
        if !(half_width > T::zero()) || values.is_empty() {
            return Err(Error::Config("grid needs a positive width and at least one cell".into()));
        }
        let dx = T::of(2.0) * half_width / T::of_usize(values.len());
        let mass: T = values.iter().copied().sum::<T>() * dx;
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::Config("cell values carry no finite mass".into()));
        }
        Self::new(half_width, values.into_iter().map(|v| v / mass).collect(), T::zero())
    }

    /// Exact cell averages of `N(mean, variance)` restricted to the domain and renormalized.
    pub fn gaussian(half_width: T, n_cells: usize, mean: T, variance: T) -> Result<Self> {
        if !(variance > T::zero()) {
            return Err(Error::Config("gaussian variance must be positive".into()));
        }
        let normal = Normal::new(mean.as_f64(), variance.as_f64().sqrt()).map_err(|e| Error::Config(e.to_string()))?;
        let a = half_width.as_f64();
        let dx = 2.0 * a / n_cells as f64;
        let values = (0..n_cells)
            .map(|j| {
                let lo = -a + j as f64 * dx;
                T::of((normal.cdf(lo + dx) - normal.cdf(lo)) / dx)
            })
            .collect();
        Self::from_cell_values(half_width, values)
    }

    pub fn uniform(half_width: T, n_cells: usize) -> Result<Self> {
        Self::from_cell_values(half_width, vec![T::one(); n_cells])
    }

    /// All mass in the cell containing `x`.
    pub fn point_mass(half_width: T, n_cells: usize, x: T) -> Result<Self> {
        let mut values = vec![T::zero(); n_cells];
        let dx = T::of(2.0) * half_width / T::of_usize(n_cells);
        let j = ((x + half_width) / dx).floor();
        if !(j >= T::zero()) || j >= T::of_usize(n_cells) {
            return Err(Error::Config(format!("point {x} lies outside the domain")));
        }
        values[j.to_usize().expect("cell index")] = T::one();
        Self::from_cell_values(half_width, values)
    }

    /// Cell averages of an arbitrary non-negative function by 4-point Gauss-Legendre quadrature.
    pub fn from_fn(half_width: T, n_cells: usize, f: impl Fn(T) -> T) -> Result<Self> {
        const NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
        const WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
        let dx = T::of(2.0) * half_width / T::of_usize(n_cells);
        let values = (0..n_cells)
            .map(|j| {
                let c = -half_width + (T::of_usize(j) + T::of(0.5)) * dx;
                NODES
                    .iter()
                    .zip(WEIGHTS)
                    .map(|(&s, w)| T::of(w * 0.5) * f(c + T::of(0.5 * s) * dx))
                    .sum()
            })
            .collect();
        Self::from_cell_values(half_width, values)
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn n_cells(&self) -> usize {
        self.rho.len()
    }

    pub fn dx(&self) -> T {
        T::of(2.0) * self.half_width / T::of_usize(self.rho.len())
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn rho(&self) -> &[T] {
        &self.rho
    }

    pub fn with_time(mut self, time: T) -> Self {
        self.time = time;
        self
    }

    pub fn center(&self, j: usize) -> T {
        -self.half_width + (T::of_usize(j) + T::of(0.5)) * self.dx()
    }

    pub fn centers(&self) -> Vec<T> {
        (0..self.n_cells()).map(|j| self.center(j)).collect()
    }

    pub fn edges(&self) -> Vec<T> {
        let dx = self.dx();
        (0..=self.n_cells()).map(|j| -self.half_width + T::of_usize(j) * dx).collect()
    }

    pub fn mass(&self) -> T {
        self.rho.iter().copied().sum::<T>() * self.dx()
    }

    /// Mean of the piecewise-constant density.
    pub fn mean(&self) -> T {
        let dx = self.dx();
        self.rho.iter().enumerate().map(|(j, &r)| r * dx * self.center(j)).sum::<T>() / self.mass()
    }

    /// Variance of the piecewise-constant density, including the in-cell `dx^2 / 12`.
    pub fn variance(&self) -> T {
        let dx = self.dx();
        let mean = self.mean();
        let second: T = self
            .rho
            .iter()
            .enumerate()
            .map(|(j, &r)| r * dx * ((self.center(j) - mean).powi(2) + dx * dx / T::of(12.0)))
            .sum();
        second / self.mass()
    }

    /// `q`-th absolute moment evaluated at cell centres.
    pub fn moment(&self, q: T) -> T {
        let dx = self.dx();
        self.rho.iter().enumerate().map(|(j, &r)| r * dx * self.center(j).abs().powf(q)).sum()
    }

    /// Mass in the outermost cell on each side.
    pub fn boundary_mass(&self) -> T {
        let n = self.n_cells();
        (self.rho[0] + if n > 1 { self.rho[n - 1] } else { T::zero() }) * self.dx()
    }

    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        if self.n_cells() != other.n_cells() || self.half_width != other.half_width {
            return Err(Error::Config("densities live on different grids".into()));
        }
        Ok(self.rho.iter().zip(&other.rho).map(|(a, b)| (*a - *b).abs()).sum::<T>() * self.dx())
    }

    /// The density as a histogram measure, for exact sample-to-density distances.
    pub fn to_histogram(&self) -> Histogram<T> {
        let dx = self.dx();
        Histogram::new(self.edges(), self.rho.iter().map(|&r| r * dx).collect()).expect("valid grid density")
    }

    /// Writes `x,rho` rows at cell centres.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "rho"])?;
        for (j, r) in self.rho.iter().enumerate() {
            w.write_record([format!("{:e}", self.center(j)), format!("{r:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cell centres weighted by cell mass.
pub fn grid_to_measure<T: Real>(rho: &GridDensity<T>) -> EmpiricalMeasure<T> {
    let dx = rho.dx();
    EmpiricalMeasure::from_masses(1, rho.centers(), rho.rho.iter().map(|&r| r * dx).collect())
        .expect("grid density has positive mass")
}

/// `B(w) = w / (e^w - 1)`.
#[inline]
fn bernoulli<T: Real>(w: T) -> T {
    if w.abs() < T::of(1e-10) {
        T::one() - w * T::of(0.5)
    } else {
        w / w.exp_m1()
    }
}

/// Spatial operator of the equation on a fixed grid: confinement at the cell
/// faces and the interaction kernel tabulated at face-to-centre offsets.
#[derive(Debug, Clone)]
pub struct FpOperator<T> {
    half_width: T,
    n: usize,
    diffusion: T,
    drift_faces: Vec<T>,
    interaction: Interaction<T>,
}

#[derive(Debug, Clone)]
enum Interaction<T> {
    None,
    /// `K(z) = -strength * z`: the convolution reduces to the first two moments.
    Linear(T),
    /// `K((m + 1/2) dx)` for `m = -(n-1), .., n-1`, stored at `m + n - 1`.
    Table(Vec<T>),
}

impl<T: Real> FpOperator<T> {
    pub fn new(model: &ModelSpec<T>, half_width: T, n_cells: usize) -> Result<Self> {
        if model.dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                found: model.dim(),
            });
        }
        let dx = T::of(2.0) * half_width / T::of_usize(n_cells);
        let drift_faces = (1..n_cells)
            .map(|f| model.drift().eval1(-half_width + T::of_usize(f) * dx))
            .collect();
        let interaction = match model.kernel() {
            k if k.is_zero() => Interaction::None,
            Kernel::Linear(strength) => Interaction::Linear(*strength),
            k => Interaction::Table(
                (0..2 * n_cells)
                    .map(|idx| {
                        let m = T::of(idx as f64 - (n_cells as f64 - 1.0));
                        k.eval1((m + T::of(0.5)) * dx)
                    })
                    .collect(),
            ),
        };
        Ok(Self {
            half_width,
            n: n_cells,
            diffusion: model.sigma() * model.sigma(),
            drift_faces,
            interaction,
        })
    }

    fn check_grid(&self, rho: &GridDensity<T>) -> Result<()> {
        if rho.n_cells() != self.n || rho.half_width != self.half_width {
            return Err(Error::Config("density grid does not match the operator grid".into()));
        }
        Ok(())
    }

    fn dx(&self) -> T {
        T::of(2.0) * self.half_width / T::of_usize(self.n)
    }

    /// Advection velocity `b + K * rho` at the `n - 1` interior faces.
    pub fn face_velocity(&self, rho: &GridDensity<T>) -> Vec<T> {
        let mut u = self.drift_faces.clone();
        let dx = self.dx();
        let n = self.n;
        match &self.interaction {
            Interaction::None => {}
            Interaction::Linear(strength) => {
                let m0: T = rho.rho.iter().copied().sum::<T>() * dx;
                let m1: T = rho.rho.iter().enumerate().map(|(l, &r)| rho.center(l) * r).sum::<T>() * dx;
                for (j, uj) in u.iter_mut().enumerate() {
                    let face = -self.half_width + T::of_usize(j + 1) * dx;
                    *uj -= *strength * (face * m0 - m1);
                }
            }
            Interaction::Table(table) => {
                for (j, uj) in u.iter_mut().enumerate() {
                    // Face j+1/2 sees cell l at offset (j - l + 1/2) dx.
                    let base = j + n - 1;
                    let conv: T = rho.rho.iter().enumerate().map(|(l, &r)| table[base - l] * r).sum();
                    *uj += conv * dx;
                }
            }
        }
        u
    }

    /// Largest explicit step keeping every cell's self-coefficient non-negative.
    fn bound_from_velocity(&self, u: &[T]) -> T {
        let dx = self.dx();
        let d = self.diffusion;
        let mut worst = T::zero();
        for j in 0..self.n {
            let right = if j + 1 < self.n { Some(u[j]) } else { None };
            let left = if j > 0 { Some(u[j - 1]) } else { None };
            let out = if d > T::zero() {
                let r = right.map_or(T::zero(), |v| bernoulli(-v * dx / d));
                let l = left.map_or(T::zero(), |v| bernoulli(v * dx / d));
                d / (dx * dx) * (r + l)
            } else {
                let r = right.map_or(T::zero(), |v| v.max(T::zero()));
                let l = left.map_or(T::zero(), |v| -v.min(T::zero()));
                (r + l) / dx
            };
            worst = worst.max(out);
        }
        if worst > T::zero() {
            worst.recip()
        } else {
            T::infinity()
        }
    }

    pub fn stable_dt(&self, rho: &GridDensity<T>) -> Result<T> {
        self.check_grid(rho)?;
        Ok(self.bound_from_velocity(&self.face_velocity(rho)))
    }

    pub fn step(&self, rho: &GridDensity<T>, dt: T) -> Result<GridDensity<T>> {
        self.check_grid(rho)?;
        let u = self.face_velocity(rho);
        let admissible = self.bound_from_velocity(&u);
        if !(dt > T::zero()) || dt > admissible * (T::one() + T::of(1e-12)) {
            return Err(Error::Stability {
                dt: dt.as_f64(),
                admissible: admissible.as_f64(),
            });
        }
        let dx = self.dx();
        let d = self.diffusion;
        let r = &rho.rho;
        let flux: Vec<T> = u
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if d > T::zero() {
                    let w = v * dx / d;
                    d / dx * (bernoulli(-w) * r[j] - bernoulli(w) * r[j + 1])
                } else {
                    v.max(T::zero()) * r[j] + v.min(T::zero()) * r[j + 1]
                }
            })
            .collect();
        let ratio = dt / dx;
        let next = (0..self.n)
            .map(|j| {
                let right = if j + 1 < self.n { flux[j] } else { T::zero() };
                let left = if j > 0 { flux[j - 1] } else { T::zero() };
                r[j] - ratio * (right - left)
            })
            .collect();
        Ok(GridDensity {
            half_width: rho.half_width,
            rho: next,
            time: rho.time + dt,
        })
    }
}

/// Largest stable explicit step for `rho` under `model`.
pub fn stable_dt<T: Real>(rho: &GridDensity<T>, model: &ModelSpec<T>) -> Result<T> {
    FpOperator::new(model, rho.half_width, rho.n_cells())?.stable_dt(rho)
}

/// One explicit finite-volume step.
pub fn fp_step<T: Real>(rho: &GridDensity<T>, model: &ModelSpec<T>, dt: T) -> Result<GridDensity<T>> {
    FpOperator::new(model, rho.half_width, rho.n_cells())?.step(rho, dt)
}

/// Snapshots of a solve with conservation diagnostics.
#[derive(Debug, Clone)]
pub struct FpTrajectory<T> {
    pub snapshots: Vec<GridDensity<T>>,
    /// Largest relative change of total mass in a single step.
    pub max_step_mass_defect: f64,
    /// Largest mass found in the two outermost cells.
    pub max_boundary_mass: f64,
    /// Smallest cell value encountered.
    pub min_density: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpDiagnostics {
    pub max_step_mass_defect: f64,
    pub max_boundary_mass: f64,
    pub min_density: f64,
    pub steps: usize,
}

impl<T: Real> FpTrajectory<T> {
    pub fn last(&self) -> &GridDensity<T> {
        self.snapshots.last().expect("trajectory holds the initial density")
    }

    pub fn diagnostics(&self) -> FpDiagnostics {
        FpDiagnostics {
            max_step_mass_defect: self.max_step_mass_defect,
            max_boundary_mass: self.max_boundary_mass,
            min_density: self.min_density,
            steps: self.steps,
        }
    }
}

/// Advances `rho0` to `t_final`, recording snapshots at the requested times
/// (and always at the start and the end). Each leg between snapshots takes
/// the fewest equal steps not exceeding `dt`.
pub fn fp_solve<T: Real>(
    rho0: &GridDensity<T>,
    model: &ModelSpec<T>,
    t_final: T,
    dt: T,
    snapshot_times: &[T],
) -> Result<FpTrajectory<T>> {
    if !(dt > T::zero()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    if !(t_final >= T::zero()) {
        return Err(Error::Config(format!("horizon must be non-negative, got {t_final}")));
    }
    let op = FpOperator::new(model, rho0.half_width, rho0.n_cells())?;
    let mut targets: Vec<T> = snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > T::zero() && t < t_final)
        .collect();
    targets.push(t_final);
    targets.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    targets.dedup();
    let start = rho0.clone().with_time(T::zero());
    let mut traj = FpTrajectory {
        max_step_mass_defect: 0.0,
        max_boundary_mass: start.boundary_mass().as_f64(),
        min_density: start.rho.iter().fold(f64::INFINITY, |m, r| m.min(r.as_f64())),
        snapshots: vec![start.clone()],
        steps: 0,
    };
    let mut cur = start;
    let mut t = T::zero();
    for &target in &targets {
        let span = target - t;
        if span <= T::zero() {
            continue;
        }
        let ratio = (span / dt).as_f64();
        let n = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        }
        .max(1);
        let h = span / T::of_usize(n);
        for _ in 0..n {
            let mass_before = cur.mass();
            let next = op.step(&cur, h)?;
            let mass_after = next.mass();
            traj.max_step_mass_defect = traj
                .max_step_mass_defect
                .max(((mass_after - mass_before) / mass_before).abs().as_f64());
            traj.max_boundary_mass = traj.max_boundary_mass.max(next.boundary_mass().as_f64());
            traj.min_density = traj.min_density.min(next.rho.iter().fold(f64::INFINITY, |m, r| m.min(r.as_f64())));
            cur = next;
            traj.steps += 1;
        }
        t = target;
        cur.time = target;
        traj.snapshots.push(cur.clone());
    }
    Ok(traj)
}
