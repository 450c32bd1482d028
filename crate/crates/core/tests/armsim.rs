use neuroarm::armsim::{ArmModel, ArmState, Target};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_link() -> ArmModel {
    ArmModel::uniform_rods(vec![1.0, 1.0], vec![2.0, 1.5]).with_payload(1.0)
}

fn three_link() -> ArmModel {
    ArmModel::uniform_rods(vec![0.6, 0.5, 0.4], vec![1.2, 1.0, 0.6]).with_payload(0.5)
}

fn random_q(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}

#[test]
fn forward_kinematics_examples() {
    let model = ArmModel::uniform_rods(vec![1.0, 1.0], vec![1.0, 1.0]);
    let p = model.forward_kinematics(&[0.0, 0.0]).unwrap();
    assert!((p[0] - 2.0).abs() < 1e-12 && p[1].abs() < 1e-12);
    let p = model.forward_kinematics(&[std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
    assert!(p[0].abs() < 1e-12 && (p[1] - 2.0).abs() < 1e-12);
    let p = model.forward_kinematics(&[0.0, std::f64::consts::FRAC_PI_2]).unwrap();
    assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
}

#[test]
fn wrong_length_inputs_are_rejected() {
    let model = two_link();
    assert!(model.forward_kinematics(&[0.0]).is_err());
    assert!(model.dynamics_step(&ArmState::at_rest(vec![0.0, 0.0]), &[1.0]).is_err());
}

#[test]
fn inverse_kinematics_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (model, tol) in [(two_link(), 1e-6), (three_link(), 1e-4)] {
        let (r_in, r_out) = (0.3 * model.reach(), 0.9 * model.reach());
        for _ in 0..100 {
            let r = rng.random_range(r_in..r_out);
            let a = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let goal = [r * a.cos(), r * a.sin()];
            let q = model.inverse_kinematics(goal).unwrap();
            let p = model.forward_kinematics(&q).unwrap();
            assert!((p[0] - goal[0]).hypot(p[1] - goal[1]) < tol, "{goal:?} -> {p:?}");
        }
    }
}

#[test]
fn unreachable_points_are_refused() {
    let model = two_link();
    assert!(model.inverse_kinematics([3.0, 0.0]).is_err());
    assert!(Target::solve(&model, [0.0, 2.5], 1).is_err());
}

#[test]
fn mass_matrix_is_symmetric_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for model in [two_link(), three_link()] {
        for _ in 0..1000 {
            let q = random_q(&mut rng, model.n_joints());
            let m = model.mass_matrix(&q).unwrap();
            assert!((&m - m.transpose()).amax() <= 1e-12);
            let eig = m.clone().symmetric_eigen().eigenvalues;
            assert!(eig.iter().all(|e| *e > 0.0), "{eig}");
        }
    }
}

/// `Ṁ − 2C` is skew-symmetric, with `Ṁ` taken by central differences along
/// the joint velocity.
#[test]
fn mass_matrix_derivative_minus_twice_coriolis_is_skew() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-5;
    for model in [two_link(), three_link()] {
        let n = model.n_joints();
        for _ in 0..200 {
            let q = random_q(&mut rng, n);
            let dq: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let plus: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a - h * b).collect();
            let m_dot = (model.mass_matrix(&plus).unwrap() - model.mass_matrix(&minus).unwrap()) / (2.0 * h);
            let n_mat = m_dot - 2.0 * model.coriolis_matrix(&q, &dq).unwrap();
            let v = nalgebra::DVector::from_vec(v);
            let quad = v.dot(&(&n_mat * &v));
            assert!(quad.abs() < 1e-8, "vᵀNv = {quad}");
        }
    }
}

#[test]
fn gravity_torque_is_the_potential_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    for model in [two_link(), three_link()] {
        let n = model.n_joints();
        for _ in 0..100 {
            let q = random_q(&mut rng, n);
            let g = model.gravity_torque(&q).unwrap();
            let scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..n {
                let mut up = q.clone();
                let mut down = q.clone();
                up[i] += h;
                down[i] -= h;
                let fd = (model.potential_energy(&up).unwrap() - model.potential_energy(&down).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * scale, "joint {i}: {fd} vs {}", g[i]);
            }
        }
    }
}

#[test]
fn energy_is_conserved_without_gravity_friction_or_torque() {
    let mut model = two_link();
    model.gravity = 0.0;
    model.joint_viscous_friction = 0.0;
    let mut state = ArmState {
        q: vec![0.3, 0.8],
        dq: vec![1.0, -0.5],
    };
    let e0 = model.kinetic_energy(&state).unwrap();
    for _ in 0..10_000 {
        state = model.dynamics_step(&state, &[0.0, 0.0]).unwrap();
    }
    let e1 = model.kinetic_energy(&state).unwrap();
    assert!((e1 - e0).abs() <= 0.01 * e0, "{e0} -> {e1}");
}

#[test]
fn friction_dissipates_energy() {
    let mut model = two_link();
    model.gravity = 0.0;
    let mut state = ArmState {
        q: vec![0.3, 0.8],
        dq: vec![1.0, -0.5],
    };
    let e0 = model.kinetic_energy(&state).unwrap();
    for _ in 0..2000 {
        state = model.dynamics_step(&state, &[0.0, 0.0]).unwrap();
    }
    assert!(model.kinetic_energy(&state).unwrap() < e0);
}

#[test]
fn held_arm_stays_put_under_gravity_compensation() {
    let model = two_link();
    let q = vec![0.4, 0.9];
    let g = model.gravity_torque(&q).unwrap();
    let mut state = ArmState::at_rest(q.clone());
    for _ in 0..1000 {
        state = model.dynamics_step(&state, &g).unwrap();
    }
    for (a, b) in state.q.iter().zip(&q) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn reach_tolerance_boundary() {
    let model = two_link();
    let tol = 0.015;
    let target = Target::solve(&model, [1.2, 0.4], 1).unwrap();
    let state = ArmState::at_rest(target.q_target.clone());
    assert!(model.reached(&state, &target, tol));
    let radius = tol * model.reach();
    let mut outside = target.clone();
    outside.position[0] += 1.01 * radius;
    assert!(!model.reached(&state, &outside, tol));
    let mut inside = target.clone();
    inside.position[1] += 0.99 * radius;
    assert!(model.reached(&state, &inside, tol));
}

#[test]
fn torques_are_clamped_symmetrically() {
    let model = two_link();
    let mut tau = [250.0, -1e9];
    model.clamp_torques(&mut tau);
    assert_eq!(tau, [model.max_torque, -model.max_torque]);
}

#[test]
fn invalid_models_are_rejected() {
    assert!(ArmModel::uniform_rods(vec![], vec![]).validate().is_err());
    assert!(ArmModel::uniform_rods(vec![1.0, -1.0], vec![1.0, 1.0]).validate().is_err());
    assert!(ArmModel::uniform_rods(vec![1.0], vec![1.0, 2.0]).validate().is_err());
    assert!(two_link().with_payload(-1.0).validate().is_err());
}

proptest! {
    #[test]
    fn payload_raises_every_mass_matrix_diagonal(q in prop::array::uniform2(-3.0f64..3.0),
                                                 light in 0.0f64..5.0, extra in 0.01f64..5.0) {
        let a = two_link().with_payload(light).mass_matrix(&q).unwrap();
        let b = two_link().with_payload(light + extra).mass_matrix(&q).unwrap();
        for i in 0..2 {
            prop_assert!(b[(i, i)] >= a[(i, i)]);
        }
    }

    #[test]
    fn stepping_is_deterministic(q in prop::array::uniform2(-3.0f64..3.0), dq in prop::array::uniform2(-2.0f64..2.0),
                                 tau in prop::array::uniform2(-50.0f64..50.0)) {
        let model = two_link();
        let state = ArmState { q: q.to_vec(), dq: dq.to_vec() };
        prop_assert_eq!(model.dynamics_step(&state, &tau).unwrap(), model.dynamics_step(&state, &tau).unwrap());
    }
}
