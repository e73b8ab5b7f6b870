use rbmlab::fit::{mean_se, t_interval};
use rbmlab::SlopeFit;

#[test]
fn recovers_an_exact_power_law() {
    let x = [0.2, 0.1, 0.05, 0.025];
    let y: Vec<f64> = x.iter().map(|t: &f64| 3.0 * t.powf(1.5)).collect();
    let f = SlopeFit::fit(&x, &y).unwrap();
    assert!((f.slope - 1.5).abs() < 1e-12);
    assert!((f.intercept - 3.0f64.ln()).abs() < 1e-12);
    assert!(f.residual < 1e-12);
    assert!(f.within(1.4, 1.6) && !f.within(1.6, 2.0));
}

#[test]
fn needs_three_positive_points_with_distinct_abscissae() {
    assert!(SlopeFit::fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    assert!(SlopeFit::fit(&[1.0, 2.0, 4.0], &[1.0, 0.0, 2.0]).is_err());
    assert!(SlopeFit::fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(SlopeFit::fit(&[1.0, 2.0, 4.0], &[1.0, 2.0]).is_err());
}

#[test]
fn seed_replication_gives_an_interval_around_the_slope() {
    let x = [64.0, 128.0, 256.0, 512.0];
    let per_seed: Vec<Vec<f64>> = [0.9, 1.0, 1.1, 1.05]
        .iter()
        .enumerate()
        .map(|(s, c)| x.iter().map(|n: &f64| c * n.powf(-0.5 + 0.01 * s as f64)).collect())
        .collect();
    let f = SlopeFit::fit_seeds(&x, &per_seed).unwrap();
    let [lo, hi] = f.interval.unwrap();
    assert_eq!(f.seed_slopes.len(), 4);
    assert!(lo < f.slope && f.slope < hi, "{lo} {} {hi}", f.slope);
    assert!(lo > -0.55 && hi < -0.44);
}

#[test]
fn interval_statistics() {
    assert_eq!(t_interval(&[1.0]), None);
    let (m, se) = mean_se(&[1.0, 2.0, 3.0]);
    assert_eq!(m, 2.0);
    assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    // t quantile with 2 degrees of freedom is 4.3027.
    let [lo, hi] = t_interval(&[1.0, 2.0, 3.0]).unwrap();
    assert!((hi - 2.0 - 4.302652729911275 * se).abs() < 1e-9);
    assert!((2.0 - lo - (hi - 2.0)).abs() < 1e-12);
}
