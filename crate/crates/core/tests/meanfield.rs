use rbmlab_core::meanfield::*;
use rbmlab_core::wasserstein::w_q_1d;
use rbmlab_core::*;

fn linear(a: f64, kappa: f64, sigma: f64) -> ModelSpec<f64> {
    ModelSpec::new(
        1,
        Drift::Polynomial(vec![0.0, -a]),
        Kernel::Linear(kappa),
        sigma,
        Confinement::Strong(a),
        kappa.abs(),
    )
    .unwrap()
}

fn start(law: &InitialLaw<f64>, m: usize, cfg: MeanFieldConfig<f64>, seed: u64) -> MeanFieldEnsemble<f64> {
    MeanFieldEnsemble::from_law(law, m, cfg, &NoiseStream::new(seed), 0).unwrap()
}

fn var_se(v: f64, m: usize) -> f64 {
    v * (2.0 / m as f64).sqrt()
}

#[test]
fn too_few_samples_are_rejected() {
    let cfg = MeanFieldConfig::new(4, 0.1, 1).unwrap();
    assert!(matches!(
        MeanFieldEnsemble::new(1, vec![0.0, 1.0, 2.0], cfg, 0),
        Err(Error::Config(_))
    ));
    assert!(MeanFieldConfig::<f64>::new(1, 0.1, 1).is_err());
}

#[test]
fn zero_model_is_a_fixed_point() {
    let m = preset::<f64>("zero").unwrap();
    let cfg = MeanFieldConfig::new(3, 0.2, 2).unwrap();
    let mf = start(&InitialLaw::gaussian(0.0, 1.0), 50, cfg, 1);
    let next = ginf_step(&mf, &m, &NoiseStream::new(1)).unwrap();
    assert_eq!(next.samples(), mf.samples());
    assert_eq!(next.k(), 1);
}

#[test]
fn companions_do_not_matter_without_interaction() {
    let m = preset::<f64>("ou-noninteracting").unwrap();
    let noise = NoiseStream::new(3);
    let cfg = MeanFieldConfig::new(3, 0.1, 4).unwrap();
    let mf = start(&InitialLaw::gaussian(1.0, 0.5), 40, cfg, 3);
    let a = ginf_step(&mf, &m, &noise).unwrap();
    let b = ginf_step(&mf.clone().with_config(cfg.without_replacement()), &m, &noise).unwrap();
    assert_eq!(a.samples(), b.samples());
    let mut e = mf.as_ensemble();
    for s in 0..4 {
        e = full_system_step(&e, &m, 0.025, &noise, 0, s).unwrap();
    }
    assert_eq!(a.samples(), e.positions());
}

#[test]
fn oracle_reduces_to_the_ou_variance_map() {
    let m = linear(1.5, 0.0, 0.8);
    let tau = 0.3;
    let out = gaussian_oracle(&m, 2, tau, &GaussianState::scalar(2.0, 0.4), 1).unwrap();
    let decay = (-2.0 * 1.5 * tau).exp();
    let expected = 0.4 * decay + (0.64 / 1.5) * (1.0 - decay);
    assert!((out.variance[0] - expected).abs() < 1e-13);
    assert!((out.mean[0] - 2.0 * (-1.5 * tau).exp()).abs() < 1e-13);
}

#[test]
fn oracle_with_zero_interval_is_the_identity() {
    let m = preset::<f64>("linear-strong").unwrap();
    let s = GaussianState::scalar(0.7, 1.3);
    let out = gaussian_oracle(&m, 2, 0.0, &s, 10).unwrap();
    assert!((out.mean[0] - 0.7).abs() < 1e-15);
    assert!((out.variance[0] - 1.3).abs() < 1e-15);
}

#[test]
fn oracle_fixed_point_is_near_the_stationary_variance() {
    let m = preset::<f64>("linear-strong").unwrap();
    let fp = gaussian_fixed_point(&m, 2, 0.1).unwrap();
    assert!((fp.variance[0] - 0.25 / 1.2).abs() < 0.01);
    let iterated = gaussian_oracle(&m, 2, 0.1, &GaussianState::scalar(1.0, 1.0), 2000).unwrap();
    assert!((iterated.variance[0] - fp.variance[0]).abs() < 1e-12);
    // The gap to the continuum value closes linearly in tau.
    let gap = |tau: f64| (gaussian_fixed_point(&m, 2, tau).unwrap().variance[0] - 0.25 / 1.2).abs();
    let ratio = gap(0.1) / gap(0.05);
    assert!(ratio > 1.8 && ratio < 2.2, "{ratio}");
}

#[test]
fn oracle_rejects_nonlinear_models() {
    let m = preset::<f64>("cubic-weak").unwrap();
    assert!(matches!(
        gaussian_oracle(&m, 2, 0.1, &GaussianState::scalar(0.0, 1.0), 1),
        Err(Error::UnsupportedModel(_))
    ));
}

#[test]
fn one_step_variance_matches_the_oracle() {
    let model = preset::<f64>("linear-strong").unwrap();
    for (p, tau) in [(2usize, 0.5), (3, 0.3)] {
        let cfg = MeanFieldConfig::new(p, tau, 20).unwrap();
        let mf = start(&InitialLaw::gaussian(0.0, 1.0), 200_000, cfg, 21);
        let next = ginf_step(&mf, &model, &NoiseStream::new(21)).unwrap();
        let oracle = gaussian_oracle(&model, p, tau, &GaussianState::scalar(0.0, 1.0), 1).unwrap();
        let v = next.variance()[0];
        assert!((v / oracle.variance[0] - 1.0).abs() < 0.01, "p={p}: {v} vs {}", oracle.variance[0]);
    }
}

#[test]
fn mckean_vlasov_without_interaction_is_independent_ou() {
    let m = preset::<f64>("ou-noninteracting").unwrap();
    let noise = NoiseStream::new(2);
    let e = init_iid(&InitialLaw::gaussian(0.0, 1.0), 20, 2).unwrap();
    let a = mckean_vlasov_step(&e, &m, 0.01, &noise, 4, 1, false).unwrap();
    let b = full_system_step(&e, &m, 0.01, &noise, 4, 1).unwrap();
    assert_eq!(a.positions(), b.positions());
}

#[test]
fn mckean_vlasov_reaches_the_stationary_variance() {
    let m = preset::<f64>("linear-strong").unwrap();
    let noise = NoiseStream::new(8);
    let n = 2000;
    let mut e = init_iid_replica(&InitialLaw::gaussian(0.0, 0.25), n, &noise, 0).unwrap();
    for k in 0..300 {
        e = mckean_vlasov_step(&e, &m, 0.01, &noise, k, 0, true).unwrap();
    }
    let v = e.variance()[0];
    let target = 0.25 / 1.2;
    assert!((v - target).abs() < 4.5 * var_se(target, n), "{v}");
}

#[test]
fn coupled_mean_field_paths_approach_the_mckean_vlasov_paths() {
    let model = preset::<f64>("linear-strong").unwrap();
    let noise = NoiseStream::new(77);
    let n = 400;
    let init = init_iid_replica(&InitialLaw::gaussian(0.0, 1.0), n, &noise, 0).unwrap();
    let msd = |tau: f64| {
        let subs = 4;
        let steps = (1.0 / tau).round() as usize;
        let cfg = MeanFieldConfig::new(2, tau, subs).unwrap();
        let mut mf = MeanFieldEnsemble::from_ensemble(&init, cfg).unwrap();
        let mut e = init.clone();
        for k in 0..steps {
            mf = ginf_step(&mf, &model, &noise).unwrap();
            for s in 0..subs {
                e = mckean_vlasov_step(&e, &model, tau / subs as f64, &noise, k, s, true).unwrap();
            }
        }
        mf.samples().iter().zip(e.positions()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64
    };
    let (coarse, fine) = (msd(0.2), msd(0.05));
    assert!(fine < coarse / 2.0, "{coarse} -> {fine}");
}

#[test]
fn inert_model_converges_immediately() {
    let m = preset::<f64>("zero").unwrap();
    let cfg = MeanFieldConfig::new(2, 0.1, 1).unwrap();
    let mf = start(&InitialLaw::point(0.0), 10, cfg, 0);
    let run = iterate_to_invariant(&mf, &m, &NoiseStream::new(0), 1e-12, 100).unwrap();
    assert_eq!(run.increments, vec![0.0; 5]);
    assert!(!run.strong_regime);
}

#[test]
fn weak_regime_is_flagged() {
    let m = preset::<f64>("cubic-weak").unwrap();
    let cfg = MeanFieldConfig::new(2, 0.1, 2).unwrap();
    let mf = start(&InitialLaw::gaussian(0.0, 1.0), 2000, cfg, 5);
    match iterate_to_invariant(&mf, &m, &NoiseStream::new(5), 0.2, 200) {
        Ok(run) => assert!(!run.strong_regime),
        Err(e) => assert!(matches!(e, Error::Convergence { .. })),
    }
}

#[test]
fn nonconvergence_is_reported() {
    let m = preset::<f64>("linear-strong").unwrap();
    let cfg = MeanFieldConfig::new(2, 0.1, 1).unwrap();
    let mf = start(&InitialLaw::gaussian(0.0, 1.0), 100, cfg, 5);
    assert!(matches!(
        iterate_to_invariant(&mf, &m, &NoiseStream::new(5), 1e-9, 20),
        Err(Error::Convergence { steps: 20, .. })
    ));
}

#[test]
fn coupled_ensembles_contract() {
    for (name, tau) in [("linear-strong", 0.2), ("cubic-weak", 0.1)] {
        let model = preset::<f64>(name).unwrap();
        let noise = NoiseStream::new(9);
        let cfg = MeanFieldConfig::new(2, tau, 5).unwrap();
        let mut a = MeanFieldEnsemble::from_law(&InitialLaw::gaussian(0.0, 1.0), 10_000, cfg, &noise, 0).unwrap();
        let mut b = MeanFieldEnsemble::from_law(&InitialLaw::gaussian(2.0, 1.0), 10_000, cfg, &noise, 0).unwrap();
        let factor = (model.stability_rate() * tau).exp() * 1.05;
        for _ in 0..10 {
            let before = w_q_1d(&a.empirical_measure(), &b.empirical_measure(), 1.0).unwrap();
            a = ginf_step(&a, &model, &noise).unwrap();
            b = ginf_step(&b, &model, &noise).unwrap();
            let after = w_q_1d(&a.empirical_measure(), &b.empirical_measure(), 1.0).unwrap();
            assert!(after <= factor * before, "{name}: {after} > {factor} * {before}");
        }
    }
}

#[test]
fn moments_stay_bounded() {
    let model = preset::<f64>("linear-strong").unwrap();
    let noise = NoiseStream::new(31);
    let tau = 0.1;
    let cfg = MeanFieldConfig::new(2, tau, 1).unwrap();
    let fp = gaussian_fixed_point(&model, 2, tau).unwrap().variance[0];
    let mut mf = MeanFieldEnsemble::from_law(&InitialLaw::gaussian(0.0, 0.2), 2000, cfg, &noise, 0).unwrap();
    for _ in 0..1000 {
        mf = ginf_step(&mf, &model, &noise).unwrap();
        assert!(mf.moment(2.0) < 3.0 * fp);
        assert!(mf.moment(4.0) < 3.0 * 3.0 * fp * fp);
    }
}

#[test]
fn relabeling_preserves_the_law() {
    let model = preset::<f64>("cubic-weak").unwrap();
    let noise = NoiseStream::new(4);
    let cfg = MeanFieldConfig::new(3, 0.2, 4).unwrap();
    let m = 50_000;
    let mf = start(&InitialLaw::gaussian(0.5, 1.0), m, cfg, 4);
    let perm: Vec<usize> = (0..m).rev().collect();
    let relabeled = MeanFieldEnsemble::from_ensemble(&mf.as_ensemble().permuted(&perm), cfg).unwrap();
    let a = ginf_step(&mf, &model, &noise).unwrap();
    let b = ginf_step(&relabeled, &model, &noise).unwrap();
    let (ma, mb) = (a.mean()[0], b.mean()[0]);
    let (va, vb) = (a.variance()[0], b.variance()[0]);
    let se_mean = (2.0 * va / m as f64).sqrt();
    assert!((ma - mb).abs() < 4.0 * se_mean);
    assert!((va - vb).abs() < 4.0 * var_se(va, m) * 2f64.sqrt());
}
