use rbmlab_core::*;
use rbmlab_core::model::{preset, Confinement, Drift, Kernel};

fn attract(kappa: f64) -> ModelSpec<f64> {
    ModelSpec::new(1, Drift::Zero, Kernel::Linear(kappa), 0.0, Confinement::OneSided(0.0), kappa).unwrap()
}

#[test]
fn zero_model_is_static() {
    let m = preset::<f64>("zero").unwrap();
    let e = Ensemble::from_points(vec![0.1, -2.0, 5.0]).unwrap();
    let next = full_system_step(&e, &m, 0.1, &NoiseStream::new(0), 0, 0).unwrap();
    assert_eq!(next.positions(), e.positions());
    assert!((next.time() - 0.1).abs() < 1e-15);
}

#[test]
fn deterministic_decay() {
    let drift = Drift::Polynomial(vec![0.0, -1.0]);
    let next = em_step(
        &[1.0f64],
        1,
        |_, x, out| out[0] = drift.eval1(x[0]),
        0.0,
        0.1,
        &NoiseStream::new(0),
        |i| NoiseKey::new(0, i, 0, 0),
        0.0,
    )
    .unwrap();
    assert!((next[0] - 0.9).abs() < 1e-15);
}

#[test]
fn pure_noise_step_replays() {
    let noise = NoiseStream::new(5);
    let key = NoiseKey::new(0, 0, 3, 1);
    let step = || {
        em_step(&[0.4f64], 1, |_, _, out| out[0] = 0.0, 1.0, 0.25, &noise, |_| key, 0.0).unwrap()[0]
    };
    let xi: f64 = noise.normal(Channel::Brownian, key, 0);
    let expected = 0.4 + 0.5f64.sqrt() * xi;
    assert_eq!(step().to_bits(), expected.to_bits());
    assert_eq!(step().to_bits(), step().to_bits());
}

#[test]
fn two_body_attraction() {
    let m = attract(1.0);
    let e = Ensemble::from_points(vec![0.0, 1.0]).unwrap();
    let next = full_system_step(&e, &m, 0.1, &NoiseStream::new(0), 0, 0).unwrap();
    assert!((next.positions()[0] - 0.1).abs() < 1e-15);
    assert!((next.positions()[1] - 0.9).abs() < 1e-15);
}

#[test]
fn single_interacting_particle_rejected() {
    let m = attract(1.0);
    let e = Ensemble::from_points(vec![0.0]).unwrap();
    assert!(matches!(
        full_system_step(&e, &m, 0.1, &NoiseStream::new(0), 0, 0),
        Err(Error::Config(_))
    ));
    let ou = preset::<f64>("ou-noninteracting").unwrap();
    assert!(full_system_step(&e, &ou, 0.1, &NoiseStream::new(0), 0, 0).is_ok());
}

#[test]
fn decoupled_system_equals_independent_updates() {
    let ou = preset::<f64>("ou-noninteracting").unwrap();
    let noise = NoiseStream::new(3);
    let e = Ensemble::new(1, vec![0.3, -0.7, 2.0], 0.0, 4).unwrap();
    let full = full_system_step(&e, &ou, 0.01, &noise, 7, 2).unwrap();
    for i in 0..3 {
        let single = Ensemble::new(1, vec![e.positions()[i]], 0.0, 4).unwrap();
        let x = em_step(
            single.positions(),
            1,
            |_, x, out| out[0] = -x[0],
            1.0,
            0.01,
            &noise,
            |_| NoiseKey::new(4, i, 7, 2),
            0.0,
        )
        .unwrap();
        assert_eq!(x[0].to_bits(), full.positions()[i].to_bits());
    }
}

#[test]
fn relabeling_commutes_with_stepping() {
    let m = preset::<f64>("cubic-weak").unwrap();
    let noise = NoiseStream::new(8);
    let e = Ensemble::new(1, vec![0.1, -0.4, 1.3, 0.9, -1.1], 0.0, 2).unwrap();
    let perm = [3usize, 0, 4, 1, 2];
    let step_then_perm = full_system_step(&e, &m, 0.01, &noise, 0, 0).unwrap().permuted(&perm);
    // Relabeled particles keep their own noise keys.
    let permuted = e.permuted(&perm);
    let xs = permuted.positions();
    let next = em_step(
        xs,
        1,
        |i, x, out| {
            let interaction: f64 = xs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &y)| m.kernel().eval1(x[0] - y))
                .sum();
            out[0] = m.drift().eval1(x[0]) + interaction / 4.0;
        },
        m.sigma(),
        0.01,
        &noise,
        |i| NoiseKey::new(2, perm[i], 0, 0),
        0.0,
    )
    .unwrap();
    for (a, b) in next.iter().zip(step_then_perm.positions()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn contraction_matches_ode_flow() {
    let m = preset::<f64>("linear-strong").unwrap().without_interaction();
    let m = ModelSpec::new(1, m.drift().clone(), Kernel::Zero, 0.0, Confinement::Strong(1.0), 0.0).unwrap();
    let dt = 0.01;
    let e = Ensemble::from_points(vec![2.0, -0.5]).unwrap();
    let next = full_system_step(&e, &m, dt, &NoiseStream::new(0), 0, 0).unwrap();
    for (x0, x1) in e.positions().iter().zip(next.positions()) {
        assert!((x1 - (1.0 - dt) * x0).abs() < 1e-15);
        assert!((x1 - x0 * (-dt).exp()).abs() <= x0.abs() * dt * dt);
    }
}

#[test]
fn blowup_is_reported() {
    let m = preset::<f64>("cubic-weak").unwrap();
    let mut e = Ensemble::from_points(vec![1e5, 0.0]).unwrap();
    let noise = NoiseStream::new(0);
    let mut err = None;
    for k in 0..10 {
        match full_system_step(&e, &m, 0.5, &noise, k, 0) {
            Ok(next) => e = next,
            Err(x) => {
                err = Some(x);
                break;
            }
        }
    }
    assert!(matches!(err, Some(Error::NumericalBlowup { particle: 0, .. })));
}

#[test]
fn works_in_two_dimensions() {
    let m = ModelSpec::<f64>::new(
        2,
        Drift::Polynomial(vec![0.0, -1.0]),
        Kernel::Linear(0.5),
        0.0,
        Confinement::Strong(1.0),
        0.25,
    )
    .unwrap();
    let e = Ensemble::new(2, vec![0.0, 0.0, 1.0, 2.0], 0.0, 0).unwrap();
    let next = full_system_step(&e, &m, 0.1, &NoiseStream::new(0), 0, 0).unwrap();
    // particle 0: drift = 0 - 0.5 (0 - (1,2)) = (0.5, 1.0)
    assert!((next.positions()[0] - 0.05).abs() < 1e-15);
    assert!((next.positions()[1] - 0.1).abs() < 1e-15);
    // particle 1: drift = -(1,2) - 0.5 ((1,2) - 0) = (-1.5, -3)
    assert!((next.positions()[2] - 0.85).abs() < 1e-15);
    assert!((next.positions()[3] - 1.7).abs() < 1e-15);
}
