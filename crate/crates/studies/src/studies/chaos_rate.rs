//! Probability that particle 1 is not clean after `k` divisions, against `N`.
//! Exact enumeration anchors the Monte Carlo estimator at small `N`.

use rbmlab_core::{epsilon_exact, epsilon_mc};

use crate::config::StudyConfig;
use crate::error::Result;
use crate::fit::SlopeFit;
use crate::report::{Check, StudyReport, Table};

/// `(N, p, k, numerator, denominator)` with known exact values.
const ANCHORS: [(usize, usize, usize, u64, u64); 2] = [(4, 2, 2, 1, 3), (6, 2, 2, 1, 5)];

pub fn study_chaos_rate(cfg: &StudyConfig) -> Result<StudyReport> {
    let mut report = StudyReport::new(cfg);
    let k = cfg.options.k.unwrap_or(3);
    let replicates = cfg.options.replicates.unwrap_or(100_000);
    let seed = cfg.seeds[0];
    let mut table = Table::new("epsilon", &["N", "p", "k", "epsilon", "stderr", "method"]);

    for (i, &(n, p, kk, num, den)) in ANCHORS.iter().enumerate() {
        let exact = epsilon_exact(n, p, kk)?;
        let matches = exact.exact == Some([num, den]);
        report.checks.push(Check::new(
            format!("exact_N{n}_p{p}_k{kk}"),
            exact.epsilon,
            format!("= {num}/{den}"),
            matches && exact.epsilon == num as f64 / den as f64,
        ));
        let mc = epsilon_mc(n, p, kk, replicates, seed.wrapping_add(i as u64 + 1))?;
        let z = (mc.epsilon - exact.epsilon).abs() / mc.stderr;
        report.checks.push(Check::new(
            format!("mc_N{n}_p{p}_k{kk}"),
            z,
            "<= 3 standard errors",
            z <= 3.0,
        ));
        for r in [&exact, &mc] {
            table.push([n.to_string(), p.to_string(), kk.to_string(), r.epsilon.to_string(), r.stderr.to_string(), format!("{:?}", r.method)]);
        }
    }

    let ns: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
    let mut per_seed = vec![vec![0.0; ns.len()]; cfg.seeds.len()];
    for (s, &seed) in cfg.seeds.iter().enumerate() {
        for (i, &n) in cfg.n_list.iter().enumerate() {
            let r = epsilon_mc(n, cfg.p, k, replicates, seed)?;
            table.push([n.to_string(), cfg.p.to_string(), k.to_string(), r.epsilon.to_string(), r.stderr.to_string(), format!("{:?}", r.method)]);
            per_seed[s][i] = r.epsilon;
        }
    }
    for (i, n) in cfg.n_list.iter().enumerate() {
        let mean = per_seed.iter().map(|s| s[i]).sum::<f64>() / per_seed.len() as f64;
        report.values.insert(format!("epsilon_N{n}"), mean);
    }
    report.tables.push(table);
    if ns.len() >= 3 {
        let fit = SlopeFit::fit_seeds(&ns, &per_seed)?;
        let (lo, hi) = cfg.slope_window((-1.25, -0.75));
        report.checks.push(Check::window("slope", fit.slope, lo, hi));
        report.fits.insert("epsilon_vs_n".into(), fit);
    } else {
        report.notes.push("fewer than three values of N, no slope fitted".into());
    }
    Ok(report)
}
