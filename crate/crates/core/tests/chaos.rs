use rbmlab_core::chaos::{all_partitions, cone_size, write_clean_csv};
use rbmlab_core::*;

fn part(n: usize, batches: &[&[usize]]) -> Partition {
    Partition::new(n, batches[0].len(), batches.iter().map(|b| b.to_vec()).collect()).unwrap()
}

#[test]
fn first_division_leaves_everyone_clean() {
    let s = InfluenceState::new(8, 2).unwrap();
    assert_eq!(s.list(3), &[3]);
    let p = part(8, &[&[0, 5], &[1, 2], &[3, 7], &[4, 6]]);
    let s = s.advance(&p).unwrap();
    assert_eq!(s.k(), 1);
    assert!(s.clean_flags().iter().all(|&c| c));
    assert_eq!(s.list(0), &[0, 5]);
    assert_eq!(s.list(5), &[0, 5]);
    s.check_invariants().unwrap();
}

#[test]
fn lists_grow_as_in_the_two_step_picture() {
    let first = part(8, &[&[0, 1], &[2, 3], &[4, 5], &[6, 7]]);
    let second = part(8, &[&[0, 4], &[1, 6], &[2, 5], &[3, 7]]);
    let s = InfluenceState::new(8, 2).unwrap().advance(&first).unwrap();
    assert_eq!(s.list(0), &[0, 1]);
    let s = s.advance(&second).unwrap();
    assert_eq!(s.list(0), &[0, 1, 4, 5]);
    assert_eq!(s.list(1), &[0, 1, 6, 7]);
    assert!(s.is_clean(0) && s.is_clean(1));
    s.check_invariants().unwrap();
}

#[test]
fn meeting_a_list_member_again_makes_both_unclean() {
    let p = part(4, &[&[0, 1], &[2, 3]]);
    let s = InfluenceState::new(4, 2).unwrap().advance(&p).unwrap().advance(&p).unwrap();
    assert!(!s.is_clean(0) && !s.is_clean(1));
    assert_eq!(s.list(0).len(), 2);
    assert!((s.list(0).len() as u64) < cone_size(2, 2));
    s.check_invariants().unwrap();
    // Uncleanness is inherited by later batchmates.
    let q = part(4, &[&[0, 2], &[1, 3]]);
    let s = s.advance(&q).unwrap();
    assert!(s.clean_flags().iter().all(|&c| !c));
}

#[test]
fn partitions_are_enumerated_canonically() {
    assert_eq!(all_partitions(4, 2).unwrap().len(), 3);
    assert_eq!(all_partitions(6, 2).unwrap().len(), 15);
    assert_eq!(all_partitions(8, 2).unwrap().len(), 105);
    assert_eq!(all_partitions(6, 3).unwrap().len(), 10);
    let parts = all_partitions(6, 2).unwrap();
    let unique: std::collections::HashSet<_> = parts.iter().collect();
    assert_eq!(unique.len(), parts.len());
}

#[test]
fn exact_epsilon_examples() {
    for (n, p) in [(4, 2), (6, 2), (6, 3), (8, 2)] {
        for k in 0..=1 {
            let r = epsilon_exact(n, p, k).unwrap();
            assert_eq!(r.epsilon, 0.0);
            assert_eq!(r.stderr, 0.0);
        }
    }
    let r = epsilon_exact(4, 2, 2).unwrap();
    assert_eq!(r.exact, Some([1, 3]));
    assert_eq!(r.epsilon, 1.0 / 3.0);
    assert_eq!(r.replicates, 9);
    let r = epsilon_exact(6, 2, 2).unwrap();
    assert_eq!(r.exact, Some([1, 5]));
    assert_eq!(r.epsilon, 1.0 / 5.0);
    // Two steps of p = 3 need 9 distinct ancestors.
    assert_eq!(epsilon_exact(6, 3, 2).unwrap().epsilon, 1.0);
}

#[test]
fn exact_epsilon_is_monotone_in_k() {
    let eps: Vec<f64> = (0..=3).map(|k| epsilon_exact(8, 2, k).unwrap().epsilon).collect();
    assert!(eps.windows(2).all(|w| w[0] <= w[1]), "{eps:?}");
    assert!(eps[3] > eps[2]);
}

#[test]
fn enumeration_cap() {
    assert!(matches!(epsilon_exact(8, 2, 4), Err(Error::Size(_))));
    assert!(matches!(epsilon_mc(64, 2, 20, 10, 0), Err(Error::Size(_))));
    assert!(matches!(epsilon_exact(5, 2, 1), Err(Error::Config(_))));
}

#[test]
fn monte_carlo_matches_enumeration() {
    for (n, p, k) in [(4, 2, 2), (6, 2, 2), (8, 2, 2), (8, 2, 3), (6, 3, 2), (4, 2, 3)] {
        let exact = epsilon_exact(n, p, k).unwrap().epsilon;
        let mc = epsilon_mc(n, p, k, 100_000, 17).unwrap();
        let tol = 4.0 * mc.stderr.max(1e-12);
        assert!((mc.epsilon - exact).abs() <= tol, "N={n} p={p} k={k}: {} vs {exact}", mc.epsilon);
    }
    let mc = epsilon_mc(4, 2, 2, 100_000, 3).unwrap();
    assert!((mc.epsilon - 1.0 / 3.0).abs() <= 3.0 * mc.stderr);
}

#[test]
fn single_division_is_always_clean() {
    let r = epsilon_mc(64, 4, 1, 10_000, 5).unwrap();
    assert_eq!(r.epsilon, 0.0);
    assert_eq!(r.stderr, 0.0);
}

#[test]
fn monte_carlo_is_deterministic_in_the_seed() {
    let a = epsilon_mc(32, 2, 3, 5_000, 9).unwrap();
    let b = epsilon_mc(32, 2, 3, 5_000, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn epsilon_decays_like_one_over_n() {
    let ns = [32usize, 64, 128, 256];
    let eps: Vec<f64> = ns.iter().map(|&n| epsilon_mc(n, 2, 3, 100_000, 11).unwrap().epsilon).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((-1.25..=-0.75).contains(&slope), "{eps:?} slope {slope}");
}

#[test]
fn realized_schedules_respect_the_list_bound() {
    let noise = NoiseStream::new(2024);
    for (n, p) in [(16, 2), (12, 3), (16, 4)] {
        let mut s = InfluenceState::new(n, p).unwrap();
        for k in 0..10_000 {
            s = s.advance(&random_partition(n, p, &noise, 0, k).unwrap()).unwrap();
            s.check_invariants().unwrap();
        }
        assert!(s.clean_flags().iter().all(|&c| !c));
    }
}

#[test]
fn replay_matches_a_run_schedule() {
    let m = preset::<f64>("linear-strong").unwrap();
    let cfg = RbmConfig::new(2, 0.1, 0.5, 2).unwrap();
    let run = run_rbm(&m, &InitialLaw::gaussian(0.0, 1.0), 8, &cfg, 4).unwrap();
    let s = InfluenceState::replay(&run.schedule).unwrap();
    assert_eq!(s.k(), 5);
    s.check_invariants().unwrap();
}

#[test]
fn reports_serialize() {
    let reports = vec![epsilon_exact(4, 2, 2).unwrap(), epsilon_mc(4, 2, 2, 100, 1).unwrap()];
    let mut buf = Vec::new();
    write_clean_csv(&reports, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,p,k,epsilon,stderr,method,replicates"));
    assert!(lines.next().unwrap().starts_with("4,2,2,"));
    assert!(lines.next().unwrap().contains("monte_carlo"));
    assert_eq!(reports[0].exact_ratio().unwrap(), num_rational::Ratio::new(1, 3));
}

fn t34(model: &ModelSpec<f64>, k: usize) -> Theorem34Report {
    let cfg = Theorem34Config {
        n: 64,
        p: 2,
        tau: 0.2,
        k,
        m: 40_000,
        n_substeps: 4,
        eps_replicates: 10_000,
        seed: 8,
    };
    theorem34_experiment(model, &InitialLaw::gaussian(0.5, 1.0), &cfg).unwrap()
}

#[test]
fn one_step_laws_coincide() {
    let r = t34(&preset("linear-strong").unwrap(), 1);
    assert_eq!(r.epsilon.epsilon, 0.0);
    assert!(r.bound_ratio.is_infinite());
    assert!(r.w1 < 3.0 * r.floor, "{} vs floor {}", r.w1, r.floor);
}

#[test]
fn batching_is_irrelevant_without_interaction() {
    let r = t34(&preset("ou-noninteracting").unwrap(), 3);
    assert!(r.epsilon.epsilon > 0.0);
    assert!(r.w1 < 3.0 * r.floor, "{} vs floor {}", r.w1, r.floor);
    assert_eq!(r.rbm_samples, 40_000);
}
