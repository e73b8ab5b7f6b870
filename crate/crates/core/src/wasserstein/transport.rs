use crate::error::{Error, Result};
use crate::real::Real;

/// Optimal coupling of a discrete transportation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    /// Mass moved from source `i` to target `j`, row-major `n x m`.
    pub flows: Vec<T>,
    pub cost: T,
}

#[derive(Clone, Copy, PartialEq)]
enum Node {
    Source,
    Row(usize),
    Col(usize),
    Sink,
}

/// Solves `min sum_ij c_ij f_ij` over couplings of `supply` and `demand` by
/// successive shortest augmenting paths with Dijkstra on reduced costs.
///
/// Both marginals must carry the same total mass.
pub fn transport_plan<T: Real>(supply: &[T], demand: &[T], cost: &[T]) -> Result<TransportPlan<T>> {
    let (n, m) = (supply.len(), demand.len());
    if cost.len() != n * m {
        return Err(Error::Config("cost matrix does not match the marginals".into()));
    }
    if cost.iter().any(|c| !(*c >= T::zero()) || !c.is_finite()) {
        return Err(Error::Config("transport costs must be finite and >= 0".into()));
    }
    let total_supply: T = supply.iter().copied().sum();
    let total_demand: T = demand.iter().copied().sum();
    let tol = T::epsilon() * T::of(64.0) * total_supply.max(T::one());
    if (total_supply - total_demand).abs() > tol * T::of_usize(n + m) {
        return Err(Error::Config("marginals carry different total mass".into()));
    }
    let mut flows = vec![T::zero(); n * m];
    let mut supply_left = supply.to_vec();
    let mut demand_left = demand.to_vec();
    // Node layout: 0 source, 1..=n rows, n+1..=n+m columns, n+m+1 sink.
    let v_count = n + m + 2;
    let node = |v: usize| match v {
        0 => Node::Source,
        v if v <= n => Node::Row(v - 1),
        v if v <= n + m => Node::Col(v - n - 1),
        _ => Node::Sink,
    };
    let sink = n + m + 1;
    let mut potential = vec![T::zero(); v_count];
    let mut dist = vec![T::infinity(); v_count];
    let mut prev = vec![usize::MAX; v_count];
    let mut done = vec![false; v_count];
    let mut remaining: T = supply_left.iter().copied().sum();
    let mut guard = 0usize;
    while remaining > tol {
        guard += 1;
        if guard > 16 * (n + m + 1) * (n + m + 1) {
            return Err(Error::Convergence {
                steps: guard,
                last: remaining.as_f64(),
            });
        }
        dist.iter_mut().for_each(|d| *d = T::infinity());
        done.iter_mut().for_each(|d| *d = false);
        dist[0] = T::zero();
        loop {
            let mut u = usize::MAX;
            for v in 0..v_count {
                if !done[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u]) {
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let relax = |v: usize, c: T, dist: &mut [T], prev: &mut [usize]| {
                let cand = dist[u] + (c + potential[u] - potential[v]).max(T::zero());
                if cand < dist[v] {
                    dist[v] = cand;
                    prev[v] = u;
                }
            };
            match node(u) {
                Node::Source => {
                    for (i, &s) in supply_left.iter().enumerate() {
                        if s > tol {
                            relax(1 + i, T::zero(), &mut dist, &mut prev);
                        }
                    }
                }
                Node::Row(i) => {
                    for j in 0..m {
                        relax(1 + n + j, cost[i * m + j], &mut dist, &mut prev);
                    }
                }
                Node::Col(j) => {
                    for i in 0..n {
                        if flows[i * m + j] > tol {
                            relax(1 + i, -cost[i * m + j], &mut dist, &mut prev);
                        }
                    }
                    if demand_left[j] > tol {
                        relax(sink, T::zero(), &mut dist, &mut prev);
                    }
                }
                Node::Sink => {}
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        for v in 0..v_count {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }
        let mut bottleneck = T::infinity();
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            let cap = match (node(u), node(v)) {
                (Node::Source, Node::Row(i)) => supply_left[i],
                (Node::Col(j), Node::Sink) => demand_left[j],
                (Node::Col(j), Node::Row(i)) => flows[i * m + j],
                _ => T::infinity(),
            };
            bottleneck = bottleneck.min(cap);
            v = u;
        }
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            match (node(u), node(v)) {
                (Node::Source, Node::Row(i)) => supply_left[i] -= bottleneck,
                (Node::Col(j), Node::Sink) => demand_left[j] -= bottleneck,
                (Node::Col(j), Node::Row(i)) => flows[i * m + j] -= bottleneck,
                (Node::Row(i), Node::Col(j)) => flows[i * m + j] += bottleneck,
                _ => unreachable!("residual path uses only graph edges"),
            }
            v = u;
        }
        remaining -= bottleneck;
    }
    let cost_total = flows.iter().zip(cost).map(|(&f, &c)| f * c).sum();
    Ok(TransportPlan {
        flows,
        cost: cost_total,
    })
}
