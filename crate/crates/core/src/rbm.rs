//! Random batch method: each interval the particles are divided at random into
//! batches of size `p` that interact only among themselves.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{init_iid_replica, Ensemble, InitialLaw};
use crate::error::{Error, Result};
use crate::integrator::{evolve_group, full_system_step};
use crate::model::ModelSpec;
use crate::noise::{Channel, NoiseKey, NoiseStream};
use crate::real::Real;

/// Division of `{0, .., n-1}` into batches of equal size `p`.
///
/// Stored canonically: every batch sorted, batches ordered by their minimum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
    p: usize,
    batches: Vec<Vec<usize>>,
}

fn check_sizes(n: usize, p: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::Config(format!("batch size must be at least 2, got {p}")));
    }
    if n == 0 || !n.is_multiple_of(p) {
        return Err(Error::Config(format!("batch size {p} does not divide N = {n}")));
    }
    Ok(())
}

impl Partition {
    /// Validates and canonicalizes an explicit list of batches.
    pub fn new(n: usize, p: usize, batches: Vec<Vec<usize>>) -> Result<Self> {
        check_sizes(n, p)?;
        let mut seen = vec![false; n];
        for b in &batches {
            if b.len() != p {
                return Err(Error::Config(format!("batch of size {} where p = {p}", b.len())));
            }
            for &i in b {
                if i >= n || seen[i] {
                    return Err(Error::Config(format!("index {i} missing, repeated or out of range")));
                }
                seen[i] = true;
            }
        }
        if batches.len() != n / p {
            return Err(Error::Config("batches do not cover every particle".into()));
        }
        Ok(Self::canonical(n, p, batches))
    }

    /// Chunks an ordering of the particles into consecutive batches.
    pub fn from_order(order: &[usize], p: usize) -> Result<Self> {
        Self::new(order.len(), p, order.chunks(p).map(<[usize]>::to_vec).collect())
    }

    /// The single batch holding every particle.
    pub fn single(n: usize) -> Result<Self> {
        Self::new(n, n, vec![(0..n).collect()])
    }

    fn canonical(n: usize, p: usize, mut batches: Vec<Vec<usize>>) -> Self {
        for b in &mut batches {
            b.sort_unstable();
        }
        batches.sort_unstable_by_key(|b| b[0]);
        Self { n, p, batches }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    /// Batch containing particle `i`.
    pub fn batch_of(&self, i: usize) -> &[usize] {
        self.batches
            .iter()
            .find(|b| b.contains(&i))
            .expect("every index belongs to a batch")
    }

    /// Maps each particle to the position of its batch in [`Self::batches`].
    pub fn membership(&self) -> Vec<usize> {
        let mut owner = vec![0; self.n];
        for (q, b) in self.batches.iter().enumerate() {
            for &i in b {
                owner[i] = q;
            }
        }
        owner
    }
}

/// Uniformly random division into batches of size `p`: Fisher-Yates shuffle, then chunk.
///
/// The shuffle is keyed by `(replica, step)` on the partition channel.
pub fn random_partition(n: usize, p: usize, noise: &NoiseStream, replica: u64, step: usize) -> Result<Partition> {
    check_sizes(n, p)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = noise.rng(Channel::Partition, &[replica, step as u64]);
    order.shuffle(&mut rng);
    Partition::from_order(&order, p)
}

/// Realized sequence of divisions used by one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSchedule {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub replica: u64,
    pub steps: Vec<Partition>,
}

/// Interval length, batch size, horizon and substeps of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbmConfig<T> {
    pub p: usize,
    pub tau: T,
    pub t_final: T,
    pub n_substeps: usize,
}

impl<T: Real> RbmConfig<T> {
    pub fn new(p: usize, tau: T, t_final: T, n_substeps: usize) -> Result<Self> {
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(Error::Config(format!("tau must be positive, got {tau}")));
        }
        if !(t_final >= T::zero()) {
            return Err(Error::Config(format!("horizon must be non-negative, got {t_final}")));
        }
        if n_substeps == 0 {
            return Err(Error::Config("need at least one substep".into()));
        }
        Ok(Self {
            p,
            tau,
            t_final,
            n_substeps,
        })
    }

    /// Number of complete intervals `floor(T / tau)`, tolerant to rounding in `T / tau`.
    pub fn n_intervals(&self) -> usize {
        let r = (self.t_final / self.tau).as_f64();
        (r + 1e-9).floor() as usize
    }

    pub fn dt(&self) -> T {
        self.tau / T::of_usize(self.n_substeps)
    }
}

/// One interval of the batch dynamics: every batch evolves on its own with
/// interaction normalized by `1/(p-1)`.
///
/// Each particle uses the noise keys `(e.stream(), i, step, substep)` that the
/// full system would use, so the two are synchronously coupled.
pub fn rbm_step<T: Real>(
    e: &Ensemble<T>,
    partition: &Partition,
    model: &ModelSpec<T>,
    tau: T,
    n_substeps: usize,
    noise: &NoiseStream,
    step: usize,
) -> Result<Ensemble<T>> {
    if partition.n() != e.len() {
        return Err(Error::Config(format!(
            "partition of {} particles applied to an ensemble of {}",
            partition.n(),
            e.len()
        )));
    }
    if e.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            found: e.dim(),
        });
    }
    if n_substeps == 0 {
        return Err(Error::Config("need at least one substep".into()));
    }
    let d = e.dim();
    let dt = tau / T::of_usize(n_substeps);
    let denom = T::of_usize(partition.p() - 1);
    let replica = e.stream();
    let evolved: Vec<Vec<T>> = partition
        .batches()
        .par_iter()
        .map(|batch| {
            let mut local = Vec::with_capacity(batch.len() * d);
            for &i in batch {
                local.extend_from_slice(e.particle(i));
            }
            evolve_group(
                model,
                &mut local,
                denom,
                dt,
                n_substeps,
                noise,
                |slot, s| (Channel::Brownian, NoiseKey::new(replica, batch[slot], step, s)),
                e.time(),
            )?;
            Ok(local)
        })
        .collect::<Result<_>>()?;
    let mut next = vec![T::zero(); e.positions().len()];
    for (batch, local) in partition.batches().iter().zip(&evolved) {
        for (slot, &i) in batch.iter().enumerate() {
            next[i * d..(i + 1) * d].copy_from_slice(&local[slot * d..(slot + 1) * d]);
        }
    }
    let mut t = e.time();
    for _ in 0..n_substeps {
        t += dt;
    }
    Ok(Ensemble::from_parts_unchecked(d, next, t, replica))
}

/// Trajectory of an RBM run on the grid `t_k = k tau` with its realized schedule.
#[derive(Debug, Clone)]
pub struct RbmRun<T> {
    pub trajectory: Vec<Ensemble<T>>,
    pub schedule: BatchSchedule,
    pub config: RbmConfig<T>,
}

impl<T: Real> RbmRun<T> {
    pub fn last(&self) -> &Ensemble<T> {
        self.trajectory.last().expect("trajectory holds the initial ensemble")
    }

    /// Writes `step,time,particle_id,x_1..x_d` rows for every recorded snapshot.
    pub fn write_trajectory_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_trajectory_csv(&self.trajectory, writer)
    }

    pub fn schedule_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.schedule)?)
    }
}

/// Writes a sequence of snapshots as one long CSV table.
pub fn write_trajectory_csv<T: Real, W: Write>(trajectory: &[Ensemble<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = trajectory.first().map_or(1, Ensemble::dim);
    let mut header = vec!["step".to_string(), "time".into(), "particle_id".into()];
    header.extend((1..=d).map(|c| format!("x_{c}")));
    w.write_record(&header)?;
    for (k, e) in trajectory.iter().enumerate() {
        for i in 0..e.len() {
            let mut row = vec![k.to_string(), format!("{:e}", e.time()), i.to_string()];
            row.extend(e.particle(i).iter().map(|x| format!("{x:e}")));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs the batch dynamics from a given ensemble. Partitions are keyed by
/// `(init.stream(), k)`.
pub fn run_rbm_from<T: Real>(
    model: &ModelSpec<T>,
    init: Ensemble<T>,
    config: &RbmConfig<T>,
    noise: &NoiseStream,
) -> Result<RbmRun<T>> {
    let n = init.len();
    check_sizes(n, config.p)?;
    let steps = config.n_intervals();
    let mut schedule = BatchSchedule {
        n,
        p: config.p,
        seed: noise.seed(),
        replica: init.stream(),
        steps: Vec::with_capacity(steps),
    };
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(init);
    for k in 0..steps {
        let current = trajectory.last().expect("non-empty");
        let partition = random_partition(n, config.p, noise, current.stream(), k)?;
        let next = rbm_step(current, &partition, model, config.tau, config.n_substeps, noise, k)?;
        let next = next.with_time(config.tau * T::of_usize(k + 1));
        schedule.steps.push(partition);
        trajectory.push(next);
    }
    Ok(RbmRun {
        trajectory,
        schedule,
        config: *config,
    })
}

/// Draws `n` i.i.d. particles from `law` and runs the batch dynamics; deterministic in `seed`.
pub fn run_rbm<T: Real>(
    model: &ModelSpec<T>,
    law: &InitialLaw<T>,
    n: usize,
    config: &RbmConfig<T>,
    seed: u64,
) -> Result<RbmRun<T>> {
    let noise = NoiseStream::new(seed);
    let init = init_iid_replica(law, n, &noise, 0)?;
    run_rbm_from(model, init, config, &noise)
}

/// Runs the full system on the same grid and with the same noise keys as
/// [`run_rbm_from`], for synchronous coupling.
pub fn run_full_system<T: Real>(
    model: &ModelSpec<T>,
    init: Ensemble<T>,
    config: &RbmConfig<T>,
    noise: &NoiseStream,
) -> Result<Vec<Ensemble<T>>> {
    let steps = config.n_intervals();
    let dt = config.dt();
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(init);
    for k in 0..steps {
        let mut e = trajectory.last().expect("non-empty").clone();
        for s in 0..config.n_substeps {
            e = full_system_step(&e, model, dt, noise, k, s)?;
        }
        trajectory.push(e.with_time(config.tau * T::of_usize(k + 1)));
    }
    Ok(trajectory)
}

/// Random batch force `(p-1)^-1 sum_j K(x - y_j)` felt at `x` from the
/// companions `ys` (flattened, `p - 1` points).
pub fn batch_force<T: Real>(model: &ModelSpec<T>, x: &[T], ys: &[T]) -> Vec<T> {
    let d = model.dim();
    let mut out = vec![T::zero(); d];
    let mut z = vec![T::zero(); d];
    let mut k = vec![T::zero(); d];
    let count = ys.len() / d;
    for y in ys.chunks_exact(d) {
        for c in 0..d {
            z[c] = x[c] - y[c];
        }
        model.kernel().eval(&z, &mut k);
        for c in 0..d {
            out[c] += k[c];
        }
    }
    if count > 0 {
        let denom = T::of_usize(count);
        for o in &mut out {
            *o /= denom;
        }
    }
    out
}
