//! Drift fields, interaction kernels and the named model presets.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{Channel, NoiseStream};
use crate::real::{dot, norm, Real};

/// Arbitrary vector field `x -> out`, both slices of the model dimension.
pub type VectorField<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// External field `b`.
#[derive(Clone)]
pub enum Drift<T> {
    Zero,
    /// Coordinate-wise polynomial, `b(x)_k = sum_m c[m] * x_k^m`.
    Polynomial(Vec<T>),
    Custom(VectorField<T>),
}

/// Interaction kernel `K`. The built-in families are odd and act coordinate-wise.
#[derive(Clone)]
pub enum Kernel<T> {
    Zero,
    /// `K(z) = -strength * z`
    Linear(T),
    /// `K(z)_k = -strength * sin(z_k)`
    Sine(T),
    /// `K(z)_k = -strength * tanh(z_k)`
    Tanh(T),
    Custom(VectorField<T>),
}

impl<T: Real> Drift<T> {
    #[inline]
    pub fn eval(&self, x: &[T], out: &mut [T]) {
        match self {
            Drift::Zero => out.fill(T::zero()),
            Drift::Polynomial(c) => {
                for (o, &xk) in out.iter_mut().zip(x) {
                    *o = horner(c, xk);
                }
            }
            Drift::Custom(f) => f(x, out),
        }
    }

    /// One-dimensional evaluation.
    #[inline]
    pub fn eval1(&self, x: T) -> T {
        match self {
            Drift::Zero => T::zero(),
            Drift::Polynomial(c) => horner(c, x),
            Drift::Custom(f) => {
                let mut o = [T::zero()];
                f(&[x], &mut o);
                o[0]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Drift::Zero => true,
            Drift::Polynomial(c) => c.iter().all(|v| v.is_zero()),
            Drift::Custom(_) => false,
        }
    }
}

#[inline]
fn horner<T: Real>(c: &[T], x: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &ck| acc * x + ck)
}

impl<T: Real> Kernel<T> {
    #[inline]
    pub fn eval(&self, z: &[T], out: &mut [T]) {
        match self {
            Kernel::Zero => out.fill(T::zero()),
            Kernel::Linear(k) => {
                for (o, &zk) in out.iter_mut().zip(z) {
                    *o = -*k * zk;
                }
            }
            Kernel::Sine(k) => {
                for (o, &zk) in out.iter_mut().zip(z) {
                    *o = -*k * zk.sin();
                }
            }
            Kernel::Tanh(k) => {
                for (o, &zk) in out.iter_mut().zip(z) {
                    *o = -*k * zk.tanh();
                }
            }
            Kernel::Custom(f) => f(z, out),
        }
    }

    #[inline]
    pub fn eval1(&self, z: T) -> T {
        match self {
            Kernel::Zero => T::zero(),
            Kernel::Linear(k) => -*k * z,
            Kernel::Sine(k) => -*k * z.sin(),
            Kernel::Tanh(k) => -*k * z.tanh(),
            Kernel::Custom(f) => {
                let mut o = [T::zero()];
                f(&[z], &mut o);
                o[0]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Kernel::Zero => true,
            Kernel::Linear(k) | Kernel::Sine(k) | Kernel::Tanh(k) => k.is_zero(),
            Kernel::Custom(_) => false,
        }
    }

    /// Whether `K(-z) = -K(z)` holds by construction.
    pub fn is_odd(&self) -> bool {
        !matches!(self, Kernel::Custom(_))
    }

    pub fn scaled(&self, c: T) -> Kernel<T> {
        match self {
            Kernel::Zero => Kernel::Zero,
            Kernel::Linear(k) => Kernel::Linear(*k * c),
            Kernel::Sine(k) => Kernel::Sine(*k * c),
            Kernel::Tanh(k) => Kernel::Tanh(*k * c),
            Kernel::Custom(f) => {
                let f = f.clone();
                Kernel::Custom(Arc::new(move |z: &[T], out: &mut [T]| {
                    f(z, out);
                    out.iter_mut().for_each(|o| *o *= c);
                }))
            }
        }
    }
}

/// Which drift condition the model satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// One-sided Lipschitz drift.
    Weak,
    /// Strongly confining drift with `r > 2L`.
    Strong,
}

/// Declared drift regularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confinement<T> {
    /// `(z1 - z2) . (b(z1) - b(z2)) <= beta |z1 - z2|^2`
    OneSided(T),
    /// `(z1 - z2) . (b(z1) - b(z2)) <= -r |z1 - z2|^2`
    Strong(T),
}

/// One interacting particle system: `dX = b(X) dt + mean_j K(X - X_j) dt + sqrt(2) sigma dW`.
#[derive(Clone)]
pub struct ModelSpec<T> {
    name: String,
    dim: usize,
    drift: Drift<T>,
    kernel: Kernel<T>,
    sigma: T,
    confinement: Confinement<T>,
    kernel_lipschitz: T,
}

impl<T: Real> fmt::Debug for ModelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("sigma", &self.sigma)
            .field("confinement", &self.confinement)
            .field("kernel_lipschitz", &self.kernel_lipschitz)
            .finish_non_exhaustive()
    }
}

impl<T: Real> ModelSpec<T> {
    pub fn new(
        dim: usize,
        drift: Drift<T>,
        kernel: Kernel<T>,
        sigma: T,
        confinement: Confinement<T>,
        kernel_lipschitz: T,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("model dimension must be positive".into()));
        }
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(Error::Config(format!("diffusion sigma must be >= 0, got {sigma}")));
        }
        if !(kernel_lipschitz >= T::zero()) {
            return Err(Error::Config(format!(
                "kernel Lipschitz constant must be >= 0, got {kernel_lipschitz}"
            )));
        }
        if let Confinement::Strong(r) = confinement {
            if !(r > T::zero()) {
                return Err(Error::Config(format!("confinement rate must be > 0, got {r}")));
            }
            if !(r > T::of(2.0) * kernel_lipschitz) {
                return Err(Error::Config(format!(
                    "strong regime needs r > 2L, got r = {r}, L = {kernel_lipschitz}"
                )));
            }
        }
        Ok(Self {
            name: "custom".into(),
            dim,
            drift,
            kernel,
            sigma,
            confinement,
            kernel_lipschitz,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same model with the interaction switched off.
    pub fn without_interaction(&self) -> Self {
        let mut m = self.clone();
        m.kernel = Kernel::Zero;
        m.kernel_lipschitz = T::zero();
        m.name = format!("{}-noninteracting", self.name);
        m
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn sigma(&self) -> T {
        self.sigma
    }
    pub fn drift(&self) -> &Drift<T> {
        &self.drift
    }
    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }
    pub fn confinement(&self) -> Confinement<T> {
        self.confinement
    }
    pub fn kernel_lipschitz(&self) -> T {
        self.kernel_lipschitz
    }

    pub fn regime(&self) -> Regime {
        match self.confinement {
            Confinement::OneSided(_) => Regime::Weak,
            Confinement::Strong(_) => Regime::Strong,
        }
    }

    /// Declared bound on the one-sided quotient: `beta`, or `-r` in the strong regime.
    pub fn one_sided_bound(&self) -> T {
        match self.confinement {
            Confinement::OneSided(b) => b,
            Confinement::Strong(r) => -r,
        }
    }

    /// `r - 2L` for strongly confining models.
    pub fn contraction_margin(&self) -> Option<T> {
        match self.confinement {
            Confinement::Strong(r) => Some(r - T::of(2.0) * self.kernel_lipschitz),
            Confinement::OneSided(_) => None,
        }
    }

    /// Rate in the stability estimate `W(G(mu1), G(mu2)) <= exp(rate * tau) W(mu1, mu2)`.
    pub fn stability_rate(&self) -> T {
        match self.confinement {
            Confinement::OneSided(b) => b + T::of(2.0) * self.kernel_lipschitz,
            Confinement::Strong(r) => -(r - T::of(2.0) * self.kernel_lipschitz),
        }
    }

    /// `(a, kappa)` when `b(x) = -a x` and `K(z) = -kappa z`.
    pub fn linear_coefficients(&self) -> Option<(T, T)> {
        let a = match &self.drift {
            Drift::Zero => T::zero(),
            Drift::Polynomial(c) => {
                let extra = c.iter().enumerate().any(|(m, v)| m != 1 && !v.is_zero());
                if extra {
                    return None;
                }
                -c.get(1).copied().unwrap_or_else(T::zero)
            }
            Drift::Custom(_) => return None,
        };
        let kappa = match &self.kernel {
            Kernel::Zero => T::zero(),
            Kernel::Linear(k) => *k,
            _ => return None,
        };
        Some((a, kappa))
    }
}

/// Closed-form stationary statistics a preset can offer as an oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryFacts<T> {
    pub mean: T,
    pub variance: T,
}

#[derive(Clone)]
pub struct Preset<T> {
    pub name: &'static str,
    pub model: ModelSpec<T>,
    pub analytic_facts: Option<StationaryFacts<T>>,
}

impl<T: Real> fmt::Debug for Preset<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Preset")
            .field("name", &self.name)
            .field("model", &self.model)
            .field("analytic_facts", &self.analytic_facts)
            .finish()
    }
}

pub const PRESET_NAMES: [&str; 4] = ["linear-strong", "ou-noninteracting", "cubic-weak", "zero"];

impl<T: Real> Preset<T> {
    pub fn get(name: &str) -> Result<Self> {
        let f = T::of;
        let (name, model, analytic_facts) = match name {
            "linear-strong" => {
                let m = ModelSpec::new(
                    1,
                    Drift::Polynomial(vec![f(0.0), f(-1.0)]),
                    Kernel::Linear(f(0.2)),
                    f(0.5),
                    Confinement::Strong(f(1.0)),
                    f(0.2),
                )?;
                // sigma^2 / (a + kappa)
                let facts = StationaryFacts {
                    mean: f(0.0),
                    variance: f(0.25 / 1.2),
                };
                ("linear-strong", m, Some(facts))
            }
            "ou-noninteracting" => {
                let m = ModelSpec::new(
                    1,
                    Drift::Polynomial(vec![f(0.0), f(-1.0)]),
                    Kernel::Zero,
                    f(1.0),
                    Confinement::Strong(f(1.0)),
                    f(0.0),
                )?;
                let facts = StationaryFacts {
                    mean: f(0.0),
                    variance: f(1.0),
                };
                ("ou-noninteracting", m, Some(facts))
            }
            "cubic-weak" => {
                let m = ModelSpec::new(
                    1,
                    Drift::Polynomial(vec![f(0.0), f(1.0), f(0.0), f(-1.0)]),
                    Kernel::Sine(f(0.2)),
                    f(0.5),
                    Confinement::OneSided(f(1.0)),
                    f(0.2),
                )?;
                ("cubic-weak", m, None)
            }
            "zero" => {
                let m = ModelSpec::new(
                    1,
                    Drift::Zero,
                    Kernel::Zero,
                    f(0.0),
                    Confinement::OneSided(f(0.0)),
                    f(0.0),
                )?;
                ("zero", m, None)
            }
            other => return Err(Error::Name(other.to_string())),
        };
        Ok(Self {
            name,
            model: model.with_name(name),
            analytic_facts,
        })
    }
}

/// Looks up a named preset model.
pub fn preset<T: Real>(name: &str) -> Result<ModelSpec<T>> {
    Preset::get(name).map(|p| p.model)
}

/// Largest observed regularity quotients over random probe pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport<T> {
    pub max_onesided_quotient: T,
    pub max_kernel_quotient: T,
}

impl<T: Real> RegularityReport<T> {
    /// True when the probes stay within the declared constants up to `rel_tol`.
    pub fn within_declared(&self, model: &ModelSpec<T>, rel_tol: T) -> bool {
        let beta = model.one_sided_bound();
        let l = model.kernel_lipschitz();
        self.max_onesided_quotient <= beta + rel_tol * beta.abs().max(T::one())
            && self.max_kernel_quotient <= l + rel_tol * l.max(T::one())
    }
}

/// Samples `n_probes` uniform pairs in `[-radius, radius]^d` and reports the maximal
/// one-sided drift quotient and kernel Lipschitz quotient.
pub fn probe_regularity<T: Real>(
    model: &ModelSpec<T>,
    n_probes: usize,
    radius: T,
    seed: u64,
) -> RegularityReport<T> {
    let d = model.dim();
    let noise = NoiseStream::new(seed);
    let mut z1 = vec![T::zero(); d];
    let mut z2 = vec![T::zero(); d];
    let mut dz = vec![T::zero(); d];
    let mut b1 = vec![T::zero(); d];
    let mut b2 = vec![T::zero(); d];
    let mut k1 = vec![T::zero(); d];
    let mut k2 = vec![T::zero(); d];
    let mut best = RegularityReport {
        max_onesided_quotient: T::neg_infinity(),
        max_kernel_quotient: T::zero(),
    };
    for probe in 0..n_probes as u64 {
        for c in 0..d {
            let u1 = noise.uniform(Channel::Aux, &[probe, 0, c as u64]);
            let u2 = noise.uniform(Channel::Aux, &[probe, 1, c as u64]);
            z1[c] = radius * T::of(2.0 * u1 - 1.0);
            z2[c] = radius * T::of(2.0 * u2 - 1.0);
            dz[c] = z1[c] - z2[c];
        }
        let gap = norm(&dz);
        if gap.is_zero() {
            continue;
        }
        model.drift().eval(&z1, &mut b1);
        model.drift().eval(&z2, &mut b2);
        model.kernel().eval(&z1, &mut k1);
        model.kernel().eval(&z2, &mut k2);
        let db: Vec<T> = b1.iter().zip(&b2).map(|(&x, &y)| x - y).collect();
        let dk: Vec<T> = k1.iter().zip(&k2).map(|(&x, &y)| x - y).collect();
        let onesided = dot(&dz, &db) / (gap * gap);
        let lip = norm(&dk) / gap;
        best.max_onesided_quotient = best.max_onesided_quotient.max(onesided);
        best.max_kernel_quotient = best.max_kernel_quotient.max(lip);
    }
    best
}

/// Serializable model description: polynomial drift coefficients plus a kernel family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTable {
    #[serde(default = "one")]
    pub dim: usize,
    /// Coefficients of the coordinate-wise drift polynomial, lowest degree first.
    pub drift: Vec<f64>,
    pub kernel: KernelTable,
    pub sigma: f64,
    pub confinement: Confinement<f64>,
    /// Defaults to the kernel strength, which is exact for all built-in families.
    #[serde(default)]
    pub kernel_lipschitz: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Zero,
    Linear,
    Sine,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub family: KernelFamily,
    #[serde(default)]
    pub strength: f64,
}

impl ModelTable {
    pub fn to_spec<T: Real>(&self) -> Result<ModelSpec<T>> {
        let s = T::of(self.kernel.strength);
        let kernel = match self.kernel.family {
            KernelFamily::Zero => Kernel::Zero,
            KernelFamily::Linear => Kernel::Linear(s),
            KernelFamily::Sine => Kernel::Sine(s),
            KernelFamily::Tanh => Kernel::Tanh(s),
        };
        let drift = if self.drift.iter().all(|c| *c == 0.0) {
            Drift::Zero
        } else {
            Drift::Polynomial(self.drift.iter().map(|&c| T::of(c)).collect())
        };
        let lip = self.kernel_lipschitz.unwrap_or(match self.kernel.family {
            KernelFamily::Zero => 0.0,
            _ => self.kernel.strength.abs(),
        });
        let confinement = match self.confinement {
            Confinement::OneSided(b) => Confinement::OneSided(T::of(b)),
            Confinement::Strong(r) => Confinement::Strong(T::of(r)),
        };
        ModelSpec::new(self.dim, drift, kernel, T::of(self.sigma), confinement, T::of(lip))
    }
}
