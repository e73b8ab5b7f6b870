use rbmlab_core::*;
use rbmlab_core::model::preset;
use proptest::prelude::*;

#[test]
fn point_law() {
    let e = init_iid(&InitialLaw::point(0.0f64), 5, 3).unwrap();
    assert_eq!(e.len(), 5);
    assert!(e.positions().iter().all(|&x| x == 0.0));
    assert_eq!(e.moment(2.0), 0.0);
}

#[test]
fn gaussian_sample_mean_within_clt_band() {
    let n = 100_000;
    let e = init_iid(&InitialLaw::gaussian(0.0f64, 1.0), n, 1).unwrap();
    assert!(e.mean()[0].abs() < 4.0 / (n as f64).sqrt());
}

#[test]
fn init_is_deterministic() {
    let law = InitialLaw::Mixture {
        components: vec![(1.0, InitialLaw::gaussian(-1.0f64, 0.5)), (2.0, InitialLaw::uniform(0.0, 3.0))],
    };
    let a = init_iid(&law, 257, 11).unwrap();
    let b = init_iid(&law, 257, 11).unwrap();
    let bits = |e: &Ensemble<f64>| e.positions().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let c = init_iid(&law, 257, 12).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn invalid_laws() {
    assert!(init_iid(&InitialLaw::gaussian(0.0f64, -1.0), 3, 0).is_err());
    assert!(init_iid(&InitialLaw::uniform(1.0f64, 1.0), 3, 0).is_err());
    assert!(init_iid(&InitialLaw::point(0.0f64), 0, 0).is_err());
}

#[test]
fn moments_by_hand() {
    let e = Ensemble::from_points(vec![-1.0f64, 1.0]).unwrap();
    assert_eq!(e.moment(2.0), 1.0);
    let e = Ensemble::from_points(vec![0.0f64, 3.0]).unwrap();
    assert_eq!(e.moment(1.0), 1.5);
}

#[test]
fn mean_force_cases() {
    let zero = preset::<f64>("zero").unwrap();
    let e = Ensemble::from_points(vec![0.3, -1.2, 4.0]).unwrap();
    assert_eq!(e.mean_force(&zero, &[0.5]), vec![0.0]);

    let lin = preset::<f64>("linear-strong").unwrap();
    let m = e.mean()[0];
    let f = e.mean_force(&lin, &[0.5])[0];
    assert!((f - (-0.2 * (0.5 - m))).abs() < 1e-14);

    let cubic = preset::<f64>("cubic-weak").unwrap();
    let single = Ensemble::from_points(vec![0.7]).unwrap();
    assert_eq!(single.mean_force(&cubic, &[2.0])[0], cubic.kernel().eval1(2.0 - 0.7));
}

#[test]
fn csv_round_trip() {
    let e = Ensemble::new(2, vec![0.5f64, -1.25, 3.0, 1e-7], 0.0, 0).unwrap();
    let mut buf = Vec::new();
    e.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("particle_id,x_1,x_2"));
    let back = Ensemble::<f64>::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.positions(), e.positions());
}

#[test]
fn weighted_measure_validation() {
    assert!(EmpiricalMeasure::weighted(1, vec![0.0f64, 1.0], vec![0.5, 0.6]).is_err());
    assert!(EmpiricalMeasure::weighted(1, vec![0.0f64, 1.0], vec![0.25, 0.75]).is_ok());
}

proptest! {
    #[test]
    fn moment_is_permutation_invariant(xs in prop::collection::vec(-10.0f64..10.0, 1..40), q in 1.0f64..4.0, seed in 0u64..1000) {
        let e = Ensemble::from_points(xs.clone()).unwrap();
        let mut perm: Vec<usize> = (0..xs.len()).collect();
        let mut rng = NoiseStream::new(seed).rng(Channel::Aux, &[0]);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let p = e.permuted(&perm);
        let (a, b) = (e.moment(q), p.moment(q));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn mean_force_scales_with_kernel(xs in prop::collection::vec(-5.0f64..5.0, 1..20), x in -5.0f64..5.0, c in -3.0f64..3.0) {
        let base = preset::<f64>("linear-strong").unwrap();
        let scaled = rbmlab_core::model::ModelSpec::new(1, base.drift().clone(), base.kernel().scaled(c),
            base.sigma(), rbmlab_core::model::Confinement::OneSided(0.0), 0.2 * c.abs()).unwrap();
        let e = Ensemble::from_points(xs).unwrap();
        let f0 = e.mean_force(&base, &[x])[0];
        let f1 = e.mean_force(&scaled, &[x])[0];
        prop_assert!((f1 - c * f0).abs() <= 1e-12 * (1.0 + f0.abs()));
    }
}
