//! Influence lists, clean particles and the probability `eps_k` that particle
//! 0 is not clean after `k` random divisions.
//!
//! `L_i^(k)` collects every particle that has affected `i` before interval `k`.
//! A particle is clean when all of its past batchmates were clean and had
//! disjoint lists at the time they met; equivalently `|L_i^(k)| = p^k`.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{init_iid_replica, InitialLaw};
use crate::error::{Error, Result};
use crate::meanfield::{ginf_iterate, MeanFieldConfig, MeanFieldEnsemble};
use crate::model::ModelSpec;
use crate::noise::{Channel, NoiseStream};
use crate::rbm::{run_rbm_from, BatchSchedule, Partition, RbmConfig};
use crate::real::Real;
use crate::wasserstein::w_q_1d;

/// Largest number of partition sequences [`epsilon_exact`] will enumerate.
pub const MAX_SEQUENCES: u64 = 10_000_000;
/// Largest ancestry cone `p^k` [`epsilon_mc`] will track.
pub const MAX_CONE: u64 = 1_000_000;

/// `p^k`, saturating at `u64::MAX`.
pub fn cone_size(p: usize, k: usize) -> u64 {
    let mut s: u64 = 1;
    for _ in 0..k {
        s = s.saturating_mul(p as u64);
    }
    s
}

fn check_sizes(n: usize, p: usize) -> Result<()> {
    if p < 2 || n == 0 || !n.is_multiple_of(p) {
        return Err(Error::Config(format!("need p >= 2 dividing N, got N = {n}, p = {p}")));
    }
    Ok(())
}

/// Influence lists and clean flags of every particle after `k` divisions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluenceState {
    n: usize,
    p: usize,
    k: usize,
    lists: Vec<Vec<usize>>,
    clean: Vec<bool>,
}

impl InfluenceState {
    /// `L_i^(0) = {i}`, everyone clean.
    pub fn new(n: usize, p: usize) -> Result<Self> {
        check_sizes(n, p)?;
        Ok(Self {
            n,
            p,
            k: 0,
            lists: (0..n).map(|i| vec![i]).collect(),
            clean: vec![true; n],
        })
    }

    /// Replays a realized schedule from the initial state.
    pub fn replay(schedule: &BatchSchedule) -> Result<Self> {
        schedule
            .steps
            .iter()
            .try_fold(Self::new(schedule.n, schedule.p)?, |s, part| s.advance(part))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Sorted list `L_i^(k)`.
    pub fn list(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }

    pub fn is_clean(&self, i: usize) -> bool {
        self.clean[i]
    }

    pub fn clean_flags(&self) -> &[bool] {
        &self.clean
    }

    /// Merges lists within each batch of `partition`.
    pub fn advance(&self, partition: &Partition) -> Result<Self> {
        if partition.n() != self.n || partition.p() != self.p {
            return Err(Error::Config(format!(
                "partition of ({}, {}) applied to state of ({}, {})",
                partition.n(),
                partition.p(),
                self.n,
                self.p
            )));
        }
        let mut lists = vec![Vec::new(); self.n];
        let mut clean = vec![false; self.n];
        for batch in partition.batches() {
            let total: usize = batch.iter().map(|&j| self.lists[j].len()).sum();
            let mut merged: Vec<usize> = Vec::with_capacity(total);
            for &j in batch {
                merged.extend_from_slice(&self.lists[j]);
            }
            merged.sort_unstable();
            merged.dedup();
            let ok = merged.len() == total && batch.iter().all(|&j| self.clean[j]);
            for &j in batch {
                lists[j] = merged.clone();
                clean[j] = ok;
            }
        }
        Ok(Self {
            n: self.n,
            p: self.p,
            k: self.k + 1,
            lists,
            clean,
        })
    }

    /// Checks `i in L_i`, `|L_i| <= p^k` and `|L_i| = p^k` exactly for clean `i`.
    pub fn check_invariants(&self) -> Result<()> {
        let cap = cone_size(self.p, self.k);
        for i in 0..self.n {
            let len = self.lists[i].len() as u64;
            let bad = self.lists[i].binary_search(&i).is_err() || len > cap || (len == cap) != self.clean[i];
            if bad {
                return Err(Error::Config(format!(
                    "influence invariant broken for particle {i} at k = {}: |L| = {len}, p^k = {cap}, clean = {}",
                    self.k, self.clean[i]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleanMethod {
    Exact,
    MonteCarlo,
}

/// Estimate of `eps_k = P(particle 0 not clean after k divisions)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub epsilon: f64,
    pub stderr: f64,
    pub method: CleanMethod,
    /// Sequences enumerated or replicates simulated.
    pub replicates: u64,
    /// Unclean count over total, reduced, for the exact method.
    pub exact: Option<[u64; 2]>,
}

impl CleanReport {
    pub fn exact_ratio(&self) -> Option<Ratio<u64>> {
        self.exact.map(|[a, b]| Ratio::new(a, b))
    }
}

/// Writes reports as `N,p,k,epsilon,stderr,method,replicates`.
pub fn write_clean_csv<W: Write>(reports: &[CleanReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["N", "p", "k", "epsilon", "stderr", "method", "replicates"])?;
    for r in reports {
        let method = match r.method {
            CleanMethod::Exact => "exact",
            CleanMethod::MonteCarlo => "monte_carlo",
        };
        w.write_record([
            r.n.to_string(),
            r.p.to_string(),
            r.k.to_string(),
            format!("{:e}", r.epsilon),
            format!("{:e}", r.stderr),
            method.to_string(),
            r.replicates.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Every canonical division of `0..n` into batches of size `p`.
pub fn all_partitions(n: usize, p: usize) -> Result<Vec<Partition>> {
    check_sizes(n, p)?;
    fn rec(free: &mut Vec<usize>, p: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let head = free.remove(0);
        let rest = free.clone();
        let mut pick = Vec::with_capacity(p - 1);
        choose(&rest, p - 1, 0, &mut pick, &mut |chosen| {
            let mut remaining: Vec<usize> = rest.iter().copied().filter(|x| !chosen.contains(x)).collect();
            let mut batch = vec![head];
            batch.extend_from_slice(chosen);
            cur.push(batch);
            rec(&mut remaining, p, cur, out);
            cur.pop();
        });
        free.insert(0, head);
    }
    fn choose(pool: &[usize], r: usize, from: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if pick.len() == r {
            f(pick);
            return;
        }
        for idx in from..pool.len() {
            if pool.len() - idx < r - pick.len() {
                break;
            }
            pick.push(pool[idx]);
            choose(pool, r, idx + 1, pick, f);
            pick.pop();
        }
    }
    let mut raw = Vec::new();
    rec(&mut (0..n).collect(), p, &mut Vec::new(), &mut raw);
    raw.into_iter().map(|b| Partition::new(n, p, b)).collect()
}

/// Exact `eps_k` by enumerating every sequence of `k` divisions.
///
/// Fails with [`Error::Size`] beyond [`MAX_SEQUENCES`] sequences.
pub fn epsilon_exact(n: usize, p: usize, k: usize) -> Result<CleanReport> {
    check_sizes(n, p)?;
    let parts = all_partitions(n, p)?;
    let c = parts.len() as u64;
    let total = (0..k).try_fold(1u64, |acc, _| acc.checked_mul(c).filter(|&t| t <= MAX_SEQUENCES));
    let Some(total) = total else {
        return Err(Error::Size(format!(
            "{c}^{k} partition sequences exceed the cap of {MAX_SEQUENCES}"
        )));
    };
    fn count(state: &InfluenceState, depth: usize, parts: &[Partition]) -> u64 {
        if !state.is_clean(0) {
            // Once unclean, every continuation stays unclean.
            return (parts.len() as u64).pow(depth as u32);
        }
        if depth == 0 {
            return 0;
        }
        parts
            .iter()
            .map(|part| count(&state.advance(part).expect("sizes match"), depth - 1, parts))
            .sum()
    }
    let unclean = count(&InfluenceState::new(n, p)?, k, &parts);
    let ratio = Ratio::new(unclean, total);
    Ok(CleanReport {
        n,
        p,
        k,
        epsilon: *ratio.numer() as f64 / *ratio.denom() as f64,
        stderr: 0.0,
        method: CleanMethod::Exact,
        replicates: total,
        exact: Some([*ratio.numer(), *ratio.denom()]),
    })
}

/// Pool of unassigned indices `0..n` supporting uniform removal in O(1)
/// memory per touched index.
struct SparsePool {
    len: usize,
    at: HashMap<usize, usize>,
    pos: HashMap<usize, usize>,
}

impl SparsePool {
    fn new(n: usize) -> Self {
        Self {
            len: n,
            at: HashMap::new(),
            pos: HashMap::new(),
        }
    }

    fn value(&self, slot: usize) -> usize {
        *self.at.get(&slot).unwrap_or(&slot)
    }

    fn slot(&self, x: usize) -> usize {
        *self.pos.get(&x).unwrap_or(&x)
    }

    fn remove_slot(&mut self, slot: usize) -> usize {
        let last = self.len - 1;
        let x = self.value(slot);
        let y = self.value(last);
        self.at.insert(slot, y);
        self.pos.insert(y, slot);
        self.len = last;
        x
    }

    fn remove(&mut self, x: usize) {
        let slot = self.slot(x);
        self.remove_slot(slot);
    }

    fn draw<R: Rng>(&mut self, rng: &mut R) -> usize {
        let slot = rng.gen_range(0..self.len);
        self.remove_slot(slot)
    }
}

/// Whether particle 0 is clean after `k` uniformly random divisions, sampled
/// backwards through its ancestry cone.
///
/// Going back from interval `k-1` to `0`, the batches meeting the current cone
/// are drawn from the uniform division restricted to the cone. Particle 0 is
/// clean iff the cone grows by a factor `p` every interval.
fn clean_by_cone<R: Rng>(n: usize, p: usize, k: usize, rng: &mut R) -> bool {
    let mut cone: Vec<usize> = vec![0];
    for _ in 0..k {
        let members: HashSet<usize> = cone.iter().copied().collect();
        let mut pool = SparsePool::new(n);
        let mut next = Vec::with_capacity(cone.len() * p);
        for &x in &cone {
            pool.remove(x);
            next.push(x);
            for _ in 1..p {
                let y = pool.draw(rng);
                if members.contains(&y) {
                    return false;
                }
                next.push(y);
            }
        }
        cone = next;
    }
    true
}

/// Monte Carlo `eps_k` over `replicates` independent division sequences.
pub fn epsilon_mc(n: usize, p: usize, k: usize, replicates: u64, seed: u64) -> Result<CleanReport> {
    check_sizes(n, p)?;
    if replicates == 0 {
        return Err(Error::Config("need at least one replicate".into()));
    }
    if cone_size(p, k) > MAX_CONE {
        return Err(Error::Size(format!("cone p^k = {p}^{k} exceeds {MAX_CONE}")));
    }
    let noise = NoiseStream::new(seed);
    let unclean: u64 = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = noise.rng(Channel::Partition, &[r, k as u64]);
            u64::from(!clean_by_cone(n, p, k, &mut rng))
        })
        .sum();
    let eps = unclean as f64 / replicates as f64;
    Ok(CleanReport {
        n,
        p,
        k,
        epsilon: eps,
        stderr: (eps * (1.0 - eps) / replicates as f64).sqrt(),
        method: CleanMethod::MonteCarlo,
        replicates,
        exact: None,
    })
}

/// Parameters of the batch-law versus mean-field-law comparison at step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem34Config<T> {
    pub n: usize,
    pub p: usize,
    pub tau: T,
    pub k: usize,
    /// Samples on each side; the batch side pools all particles of `ceil(m / n)` runs.
    pub m: usize,
    pub n_substeps: usize,
    pub eps_replicates: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem34Report {
    /// `W_1` between the batch-system samples and the mean-field samples.
    pub w1: f64,
    /// `W_1` between two independent mean-field ensembles of the same size.
    pub floor: f64,
    pub epsilon: CleanReport,
    /// `w1 / epsilon`, infinite when the estimate is zero.
    pub bound_ratio: f64,
    pub rbm_samples: usize,
    pub ginf_samples: usize,
}

fn derived_seed(seed: u64, lane: u64) -> u64 {
    seed ^ lane.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Compares `k` steps of the batch system (law of one particle, mixed over all
/// division sequences) with `k` steps of the mean-field operator. One-dimensional.
pub fn theorem34_experiment<T: Real>(
    model: &ModelSpec<T>,
    law: &InitialLaw<T>,
    cfg: &Theorem34Config<T>,
) -> Result<Theorem34Report> {
    if model.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: model.dim(),
        });
    }
    check_sizes(cfg.n, cfg.p)?;
    if cfg.m == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let rbm_noise = NoiseStream::new(derived_seed(cfg.seed, 1));
    let rbm_cfg = RbmConfig::new(cfg.p, cfg.tau, cfg.tau * T::of_usize(cfg.k), cfg.n_substeps)?;
    let runs = cfg.m.div_ceil(cfg.n);
    let per_run: Vec<Vec<T>> = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let init = init_iid_replica(law, cfg.n, &rbm_noise, r)?;
            Ok(run_rbm_from(model, init, &rbm_cfg, &rbm_noise)?.last().positions().to_vec())
        })
        .collect::<Result<_>>()?;
    let rbm_samples: Vec<T> = per_run.into_iter().flatten().collect();

    let mf_cfg = MeanFieldConfig::new(cfg.p, cfg.tau, cfg.n_substeps)?;
    let ginf = |lane: u64| -> Result<Vec<T>> {
        let noise = NoiseStream::new(derived_seed(cfg.seed, lane));
        let mf = MeanFieldEnsemble::from_law(law, rbm_samples.len(), mf_cfg, &noise, 0)?;
        Ok(ginf_iterate(&mf, model, &noise, cfg.k)?.samples().to_vec())
    };
    let a = ginf(2)?;
    let b = ginf(3)?;
    let measure = |xs: Vec<T>| crate::ensemble::EmpiricalMeasure::uniform(1, xs);
    let n_samples = rbm_samples.len();
    let w1 = w_q_1d(&measure(rbm_samples), &measure(a.clone()), T::one())?.as_f64();
    let floor = w_q_1d(&measure(a), &measure(b), T::one())?.as_f64();
    let epsilon = epsilon_mc(cfg.n, cfg.p, cfg.k, cfg.eps_replicates.max(1), derived_seed(cfg.seed, 4))?;
    let bound_ratio = if epsilon.epsilon > 0.0 {
        w1 / epsilon.epsilon
    } else {
        f64::INFINITY
    };
    Ok(Theorem34Report {
        w1,
        floor,
        epsilon,
        bound_ratio,
        rbm_samples: n_samples,
        ginf_samples: n_samples,
    })
}
