use rbmlab_core::flocking::{velocity_increment, write_kinetic_csv};
use rbmlab_core::*;

fn random_state(n: usize, d: usize, seed: u64) -> KineticEnsemble<f64> {
    let noise = NoiseStream::new(seed);
    let x = (0..n * d).map(|i| 3.0 * noise.gaussian(Channel::Aux, &[0, i as u64])).collect();
    let v = (0..n * d).map(|i| 1.0 + noise.gaussian(Channel::Aux, &[1, i as u64])).collect();
    KineticEnsemble::new(d, x, v).unwrap()
}

fn rel_drift(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().map(|x| x.abs()).fold(1e-300, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn lone_particle_moves_in_a_straight_line() {
    let mut e = KineticEnsemble::<f64>::new(2, vec![0.0, 1.0], vec![0.5, -2.0]).unwrap();
    for _ in 0..10 {
        e = flocking_full_step(&e, &AlignmentKernel::Constant, 0.1, Normalization::OverN).unwrap();
    }
    assert_eq!(e.velocities(), &[0.5, -2.0]);
    assert!((e.positions()[0] - 0.5).abs() < 1e-14);
    assert!((e.positions()[1] + 1.0).abs() < 1e-14);
    assert_eq!(e.step(), 10);
}

#[test]
fn two_particle_hand_example() {
    let e = KineticEnsemble::new(1, vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
    let dt = 0.25;
    let next = flocking_full_step(&e, &AlignmentKernel::Constant, dt, Normalization::OverN).unwrap();
    // v1' = 0 + dt * (1/2)(2 - 0), v2' = 2 - dt * 1.
    assert_eq!(next.velocities(), &[0.25, 1.75]);
    assert_eq!(next.positions(), &[0.0, 1.5]);
    assert_eq!(next.mean_velocity(), e.mean_velocity());
}

#[test]
fn momentum_is_conserved_by_full_and_batch_steps() {
    let noise = NoiseStream::new(6);
    let h = AlignmentKernel::Constant;
    let start = random_state(60, 2, 1);
    let m0 = start.mean_velocity();
    let mut full = start.clone();
    let mut batch = start.clone();
    for k in 0..1000 {
        full = flocking_full_step(&full, &h, 0.05, Normalization::OverN).unwrap();
        let part = random_partition(60, 3, &noise, 0, k).unwrap();
        batch = flocking_rbm_step(&batch, &h, &part, 0.05).unwrap();
    }
    assert!(rel_drift(&m0, &full.mean_velocity()) <= 1e-12);
    assert!(rel_drift(&m0, &batch.mean_velocity()) <= 1e-12);
    // Both relax towards the conserved mean.
    assert!(full.velocity_spread() < 1e-6);
    assert!(batch.velocity_spread() < 1e-6);
}

#[test]
fn consensus_is_a_fixed_point_of_every_stepper() {
    let mut e = random_state(40, 2, 2);
    let common = vec![0.3, -1.7];
    let v: Vec<f64> = (0..40).flat_map(|_| common.clone()).collect();
    e = KineticEnsemble::new(2, e.positions().to_vec(), v.clone()).unwrap();
    let h = AlignmentKernel::CuckerSmale { alpha: 0.5 };
    let noise = NoiseStream::new(3);
    let cfg = MeanFieldConfig::new(4, 0.2, 3).unwrap();
    let (mut a, mut b, mut c) = (e.clone(), e.clone(), e.clone());
    for k in 0..50 {
        a = flocking_full_step(&a, &h, 0.1, Normalization::OverN).unwrap();
        b = flocking_rbm_step(&b, &h, &random_partition(40, 4, &noise, 0, k).unwrap(), 0.1).unwrap();
        c = qinf_step(&c, &h, &cfg, &noise).unwrap();
    }
    assert_eq!(a.velocities(), &v[..]);
    assert_eq!(b.velocities(), &v[..]);
    assert_eq!(c.velocities(), &v[..]);
}

#[test]
fn single_batch_equals_full_system() {
    let e = random_state(12, 3, 4);
    let h = AlignmentKernel::CuckerSmale { alpha: 0.25 };
    let one = Partition::single(12).unwrap();
    let (mut a, mut b) = (e.clone(), e);
    for _ in 0..20 {
        a = flocking_full_step(&a, &h, 0.05, Normalization::OverNMinusOne).unwrap();
        b = flocking_rbm_step(&b, &h, &one, 0.05).unwrap();
    }
    assert_eq!(a, b);
}

#[test]
fn velocity_spread_does_not_grow_for_unit_steps() {
    let h = AlignmentKernel::Constant;
    let noise = NoiseStream::new(5);
    for p in [2, 3, 4] {
        for dt in [0.1, 0.5, 1.0] {
            let mut e = random_state(24, 2, p as u64);
            for k in 0..100 {
                let part = random_partition(24, p, &noise, p as u64, k).unwrap();
                let next = flocking_rbm_step(&e, &h, &part, dt).unwrap();
                assert!(next.velocity_spread() <= e.velocity_spread() * (1.0 + 1e-12) + 1e-13, "p={p} dt={dt} k={k}");
                e = next;
            }
        }
    }
}

#[test]
fn spread_can_grow_above_unit_steps_for_larger_batches() {
    // Batch {0, 0, 9} overshoots for dt > 1 while the other batch sits at 12.
    let e = KineticEnsemble::new(1, vec![0.0; 6], vec![0.0, 0.0, 9.0, 12.0, 12.0, 12.0]).unwrap();
    let part = Partition::new(6, 3, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
    let next = flocking_rbm_step(&e, &AlignmentKernel::Constant, &part, 1.3).unwrap();
    assert!(next.velocity_spread() > e.velocity_spread());
}

#[test]
fn mean_field_operator_is_unbiased_for_velocity() {
    let h = AlignmentKernel::Constant;
    let noise = NoiseStream::new(10);
    let cfg = MeanFieldConfig::new(2, 0.05, 2).unwrap();
    let mut e = random_state(100_000, 1, 9);
    let m0 = e.mean_velocity()[0];
    let mut var = 0.0;
    for _ in 0..100 {
        let next = qinf_step(&e, &h, &cfg, &noise).unwrap();
        let (_, se) = velocity_increment(&e, &next).unwrap();
        var += se[0] * se[0];
        e = next;
    }
    let drift = e.mean_velocity()[0] - m0;
    assert!(drift.abs() < 3.0 * var.sqrt(), "drift {drift} se {}", var.sqrt());
}

#[test]
fn cucker_smale_dissipates_velocity_variance() {
    let h = AlignmentKernel::CuckerSmale { alpha: 0.25 };
    let noise = NoiseStream::new(12);
    let cfg = MeanFieldConfig::new(2, 0.1, 4).unwrap();
    let mut e = random_state(100_000, 1, 13);
    let mut last = e.velocity_variance();
    for _ in 0..50 {
        e = qinf_step(&e, &h, &cfg, &noise).unwrap();
        let v = e.velocity_variance();
        assert!(v < last, "{v} >= {last}");
        last = v;
    }
    assert!((e.time() - 5.0).abs() < 1e-9);
}

#[test]
fn kernel_is_nonnegative_and_bounded() {
    let h = AlignmentKernel::CuckerSmale { alpha: 0.7 };
    for r in [0.0, 0.5, 3.0, 1e3] {
        let w = h.eval(&[r], &[0.0], &[1.0]);
        assert!(w > 0.0 && w <= 1.0);
    }
    assert_eq!(h.eval(&[2.0], &[2.0], &[0.0]), 1.0);
}

#[test]
fn blowup_is_reported() {
    let e = KineticEnsemble::new(1, vec![0.0, 0.0], vec![0.0, 1e11]).unwrap();
    let r = flocking_full_step(&e, &AlignmentKernel::Constant, 100.0, Normalization::OverN);
    assert!(matches!(r, Err(Error::NumericalBlowup { .. })));
}

#[test]
fn snapshots_serialize() {
    let e = KineticEnsemble::new(2, vec![0.0, 1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0, 7.0]).unwrap();
    let mut buf = Vec::new();
    write_kinetic_csv(&[e], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,time,particle_id,x_1,x_2,v_1,v_2");
    assert_eq!(lines[2], "0,0,1,2,3,6,7");
}
