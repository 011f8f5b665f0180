use nalgebra::DMatrix;
use pbc_core::controllers::{ControllerSpec, Prop2Controller, SaturationShape};
use pbc_core::models::InputAffineModel;
use pbc_core::numerics::{integrate_fixed, Matrix};
use pbc_core::scenarios::{build, find_builtin, coupling_device, pera, pera_affine, CouplingDeviceParams, PeraParams};
use pbc_core::simulation::SimulationTrace;
use pbc_core::verification::{
    check_assumption3, check_closed_loop_hessian, check_cyclo_passivity, check_equilibrium_gradient,
    check_shaped_hessian, check_theta_psd, dissipation_obstacle_flag, linearization_stability, lyapunov_monitor,
    suggest_kc, CheckResult, SampleSpec,
};
use pbc_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COUPLING_BOX: [f64; 5] = [0.1, 0.1, 0.1, 0.05, 0.05];

fn pera_target() -> Vec<f64> {
    vec![-1.81, std::f64::consts::FRAC_PI_2, 0.78]
}

fn to_nalgebra(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

fn min_eig(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}

fn assert_failure_has_witness(c: &CheckResult) {
    assert!(!c.pass, "{} unexpectedly passed", c.name);
    assert!(c.residual > c.tolerance);
    assert!(c.witness.is_some(), "{} failed without a witness", c.name);
}

/// `ẋ = Jx + εx` with `J` skew, `S = ½‖x‖²`, `ℓ = 0`.
fn skew_system(eps: f64) -> InputAffineModel {
    InputAffineModel::new(
        "skew",
        3,
        1,
        move |x| vec![x[1] + eps * x[0], -x[0] + 2.0 * x[2] + eps * x[1], -2.0 * x[1] + eps * x[2]],
        |_| Matrix::column(&[1.0, 0.0, 0.0]),
    )
    .with_storage(|x| 0.5 * x.iter().map(|v| v * v).sum::<f64>())
    .with_storage_gradient(|x| x.to_vec())
    .with_dissipation(|_| vec![0.0])
}

/// One input acting on `x₁`; `x₂` is neither actuated nor stored.
fn flat_direction_model() -> InputAffineModel {
    InputAffineModel::new("flat", 2, 1, |x| vec![-x[0], 0.0], |_| Matrix::column(&[1.0, 0.0]))
        .with_storage(|x| 0.5 * x[0] * x[0])
        .with_gamma(|x| vec![x[0]])
}

#[test]
fn coupling_device_is_cyclo_passive() {
    let dev = coupling_device(&CouplingDeviceParams::default()).unwrap();
    let samples = SampleSpec::around(&[0.0; 5], &COUPLING_BOX, 1000, 1).unwrap();
    let c = check_cyclo_passivity(&dev, &samples, 1e-8).unwrap();
    assert!(c.pass && c.residual < 1e-8, "{c:?}");
}

#[test]
fn lossless_system_has_zero_cyclo_residual() {
    let samples = SampleSpec::around(&[0.0; 3], &[1.0; 3], 200, 2).unwrap();
    let c = check_cyclo_passivity(&skew_system(0.0), &samples, 1e-12).unwrap();
    assert!(c.residual <= 1e-15, "{c:?}");
}

#[test]
fn perturbed_drift_breaks_cyclo_passivity() {
    let eps = 1e-3;
    let samples = SampleSpec::around(&[0.0; 3], &[1.0; 3], 200, 3).unwrap();
    let c = check_cyclo_passivity(&skew_system(eps), &samples, 1e-8).unwrap();
    let oracle = samples.points().iter().map(|x| eps * x.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
    assert!((c.residual - oracle).abs() <= 1e-15, "{} vs {oracle}", c.residual);
    assert_failure_has_witness(&c);
}

#[test]
fn cyclo_passivity_needs_dissipation() {
    let model = InputAffineModel::new("bare", 1, 1, |x| vec![-x[0]], |_| Matrix::identity(1)).with_storage(|x| x[0] * x[0]);
    let samples = SampleSpec::around(&[0.0], &[1.0], 10, 0).unwrap();
    assert!(matches!(check_cyclo_passivity(&model, &samples, 1e-8), Err(Error::Metadata(_))));
}

#[test]
fn equilibrium_gradient_examples() {
    let dev = coupling_device(&CouplingDeviceParams::default()).unwrap();
    let c = check_equilibrium_gradient(&dev, &[0.0, 0.025, 0.025, 0.0, 0.0], 1e-8).unwrap();
    assert!(c.pass && c.residual <= 1e-8, "{c:?}");

    let arm = pera_affine(&PeraParams::default()).unwrap();
    let x: Vec<f64> = pera_target().into_iter().chain([0.0; 3]).collect();
    let c = check_equilibrium_gradient(&arm, &x, 1e-8).unwrap();
    assert!(c.residual <= 1e-8, "{c:?}");

    assert!(matches!(
        check_equilibrium_gradient(&dev, &[0.0, 0.1, 0.2, 0.0, 0.0], 1e-8),
        Err(Error::NotAssignable { .. })
    ));
}

#[test]
fn mismatched_integral_output_leaves_gradient_residual() {
    // u* = 1 holds x* = 1, so κ = −1 and ∇S + ∇γ κ = 1 − 2.
    let model = InputAffineModel::new("scalar", 1, 1, |x| vec![-x[0]], |_| Matrix::identity(1))
        .with_storage(|x| 0.5 * x[0] * x[0])
        .with_gamma(|x| vec![2.0 * x[0]]);
    let c = check_equilibrium_gradient(&model, &[1.0], 1e-8).unwrap();
    assert!((c.residual - 1.0).abs() <= 1e-6, "{c:?}");
    assert_failure_has_witness(&c);
}

#[test]
fn arm_shaped_hessian_is_definite() {
    let params = PeraParams::default();
    let arm = pera_affine(&params).unwrap();
    let mech = pera(&params).unwrap();
    let q = pera_target();
    let x: Vec<f64> = q.iter().copied().chain([0.0; 3]).collect();
    let alpha = [17.0, 3.0, 3.3];
    let beta = [80.0, 100.0, 80.0];
    let shape = SaturationShape::new(alpha.to_vec(), beta.to_vec()).unwrap();
    let c = check_shaped_hessian(&arm, &x, &shape, 1e-8).unwrap();
    assert!(c.pass, "{c:?}");

    // blockdiag(∇²V + diag(αβ), M⁻¹) with ∇²V = diag(0, m g d cos q₂, 0).
    let mut oracle = DMatrix::<f64>::zeros(6, 6);
    oracle[(1, 1)] = params.gravity_peak() * q[1].cos();
    for i in 0..3 {
        oracle[(i, i)] += alpha[i] * beta[i];
    }
    let minv = to_nalgebra(&mech.inertia(&q)).try_inverse().unwrap();
    oracle.view_mut((3, 3), (3, 3)).copy_from(&minv);
    assert!(min_eig(&oracle) > 0.0);
}

#[test]
fn shaped_hessian_rejects_unshaped_flat_direction() {
    let shape = SaturationShape::new(vec![1e-12], vec![1.0]).unwrap();
    let c = check_shaped_hessian(&flat_direction_model(), &[0.0, 0.0], &shape, 1e-8).unwrap();
    assert_failure_has_witness(&c);
}

#[test]
fn shaped_hessian_of_quadratic_storage_matches_hand_matrix() {
    // S = ½xᵀPx, γ = Cx: H = P + Cᵀ diag(αβ) C.
    let p = [[2.0, 0.5], [0.5, 1.0]];
    let model = InputAffineModel::new(
        "quadratic",
        2,
        1,
        move |x| vec![-(p[0][0] * x[0] + p[0][1] * x[1]), -(p[1][0] * x[0] + p[1][1] * x[1])],
        |_| Matrix::column(&[1.0, 1.0]),
    )
    .with_storage(move |x| 0.5 * (p[0][0] * x[0] * x[0] + 2.0 * p[0][1] * x[0] * x[1] + p[1][1] * x[1] * x[1]))
    .with_gamma(|x| vec![x[0] - 3.0 * x[1]]);
    let shape = SaturationShape::new(vec![0.5], vec![2.0]).unwrap();
    let c = check_shaped_hessian(&model, &[0.0, 0.0], &shape, 1e-8).unwrap();
    let hand = DMatrix::from_row_slice(2, 2, &[2.0 + 1.0, 0.5 - 3.0, 0.5 - 3.0, 1.0 + 9.0]);
    let reported: f64 = c.detail.trim_start_matches("min eigenvalue ").parse().unwrap();
    assert!((reported - min_eig(&hand)).abs() <= 1e-5, "{reported} vs {}", min_eig(&hand));
    assert!(c.pass);
}

#[test]
fn coupling_device_satisfies_assumption3() {
    let dev = coupling_device(&CouplingDeviceParams::default()).unwrap();
    let samples = SampleSpec::around(&[0.0; 5], &COUPLING_BOX, 500, 4).unwrap();
    let c = check_assumption3(&dev, &samples, 1e-8).unwrap();
    assert!(c.pass, "{c:?}");
}

#[test]
fn undamped_arm_has_no_eta() {
    let arm = pera_affine(&PeraParams::default()).unwrap();
    let samples = SampleSpec::around(&[0.0; 6], &[1.0; 6], 10, 0).unwrap();
    assert!(matches!(check_assumption3(&arm, &samples, 1e-8), Err(Error::Metadata(_))));
}

#[test]
fn disjoint_gamma_and_eta_are_orthogonal() {
    let model = InputAffineModel::new("split", 2, 1, |x| vec![-x[0], -x[1]], |_| Matrix::column(&[1.0, 0.0]))
        .with_storage(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]))
        .with_dissipation(|x| vec![x[0], x[1]])
        .with_feedthrough(|_| Matrix::column(&[0.0, 0.0]))
        .with_gamma(|x| vec![x[0]])
        .with_eta(|x| vec![x[1]])
        .with_weights(|_| Matrix::from_diag(&[0.5]), |_| Matrix::from_diag(&[0.5]));
    let samples = SampleSpec::around(&[0.0; 2], &[1.0; 2], 100, 5).unwrap();
    let c = check_assumption3(&model, &samples, 1e-8).unwrap();
    assert!(c.detail.starts_with("orthogonality 0e0"), "{}", c.detail);
}

fn scalar(v: f64) -> Matrix {
    Matrix::from_diag(&[v])
}

#[test]
fn theta_examples() {
    let t = check_theta_psd(&scalar(1.0), &scalar(1.0), &scalar(0.0), &scalar(1.0), &scalar(1.0), false).unwrap();
    assert!(t.check.pass && t.agree);
    assert!((t.theta_min_eigenvalue - 0.5).abs() <= 1e-12);

    let t = check_theta_psd(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(0.1), &scalar(0.1), false).unwrap();
    assert!(!t.check.pass && !t.schur_pass && t.agree);
    assert_failure_has_witness(&t.check);
    let schur = DMatrix::from_row_slice(2, 2, &[1.0 - 25.0, 25.0, 25.0, 1.0 - 25.0]);
    assert!((t.schur_min_eigenvalue - min_eig(&schur)).abs() <= 1e-9);

    let t = check_theta_psd(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(10.0), &scalar(10.0), false).unwrap();
    assert!(t.check.pass && t.schur_pass);
}

#[test]
fn theta_shape_mismatch() {
    let r = check_theta_psd(&scalar(1.0), &Matrix::identity(2), &scalar(1.0), &scalar(1.0), &scalar(1.0), false);
    assert!(matches!(r, Err(Error::Shape(_))));
}

/// Θ assembled entry by entry from its block description.
fn theta_oracle(lam_l: &[f64], lam_c: &[f64], ups: &DMatrix<f64>, r: &[f64], k: &[f64]) -> DMatrix<f64> {
    let (s, m) = (lam_l.len(), lam_c.len());
    let mut t = DMatrix::zeros(s + 2 * m, s + 2 * m);
    for i in 0..s {
        t[(i, i)] = lam_l[i];
    }
    for i in 0..m {
        t[(s + i, s + i)] = lam_c[i];
        t[(s + m + i, s + m + i)] = k[i] / r[i];
        t[(s + m + i, s + i)] = -0.5 / r[i];
        t[(s + i, s + m + i)] = -0.5 / r[i];
        for j in 0..s {
            t[(s + m + i, j)] = 0.5 * ups[(i, j)] / r[i];
            t[(j, s + m + i)] = 0.5 * ups[(i, j)] / r[i];
        }
    }
    t
}

#[test]
fn theta_tests_agree_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut outcomes = [0usize; 2];
    for _ in 0..200 {
        let s = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=3);
        let lam_l: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..3.0)).collect();
        let lam_c: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..3.0)).collect();
        let ups = DMatrix::from_fn(m, s, |_, _| rng.gen_range(-2.0..2.0));
        let r: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.gen_range(-1.5..1.5))).collect();
        let k: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.gen_range(-1.5..1.5))).collect();
        let ups_m = Matrix::from_row_major(m, s, ups.transpose().as_slice().to_vec()).unwrap();
        let oracle = min_eig(&theta_oracle(&lam_l, &lam_c, &ups, &r, &k));
        for strict in [false, true] {
            let t = check_theta_psd(
                &Matrix::from_diag(&lam_l),
                &Matrix::from_diag(&lam_c),
                &ups_m,
                &Matrix::from_diag(&r),
                &Matrix::from_diag(&k),
                strict,
            )
            .unwrap();
            assert!(t.agree, "strict={strict}: {t:?}");
            assert!((t.theta_min_eigenvalue - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()));
            if !t.check.pass {
                assert!(t.check.witness.is_some());
            }
            outcomes[t.check.pass as usize] += 1;
        }
    }
    assert!(outcomes[0] > 0 && outcomes[1] > 0, "{outcomes:?}");
}

fn linear_prop2(kc: f64, alpha: f64, beta: f64) -> ControllerSpec {
    ControllerSpec::Prop2(
        Prop2Controller::new(
            SaturationShape::new(vec![alpha], vec![beta]).unwrap(),
            vec![0.0],
            vec![0.0],
            scalar(kc),
            scalar(1.0),
        )
        .unwrap(),
    )
}

#[test]
fn closed_loop_hessian_examples() {
    let model = InputAffineModel::new("linear", 2, 1, |x| vec![-x[0], -x[1]], |_| Matrix::column(&[1.0, 0.0]))
        .with_storage(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]))
        .with_gamma(|x| vec![x[0] + x[1]]);
    assert!(check_closed_loop_hessian(&model, &[0.0, 0.0], &linear_prop2(1e6, 1.0, 1.0)).unwrap().pass);

    let c = check_closed_loop_hessian(&flat_direction_model(), &[0.0, 0.0], &linear_prop2(1e-9, 1.0, 1.0)).unwrap();
    assert_failure_has_witness(&c);

    let rlc = build(&find_builtin("rlc-default").unwrap()).unwrap();
    let c = check_closed_loop_hessian(&rlc.bundle.model, &rlc.scenario.target, &rlc.controller).unwrap();
    assert!(c.pass, "{c:?}");
}

#[test]
fn closed_loop_hessian_needs_integral_family() {
    let arm = build(&find_builtin("pera-nominal").unwrap()).unwrap();
    let x = arm.scenario.target.clone();
    assert!(matches!(check_closed_loop_hessian(&arm.bundle.model, &x, &arm.controller), Err(Error::Config(_))));
}

#[test]
fn suggested_gain_passes_on_rlc() {
    let rlc = build(&find_builtin("rlc-default").unwrap()).unwrap();
    let kc = suggest_kc(&rlc.bundle.model, &rlc.scenario.target, &rlc.controller).unwrap();
    let ControllerSpec::Prop2(mut c) = rlc.controller.clone() else { panic!("rlc runs the dynamic-extension law") };
    c.kc = kc;
    assert!(check_closed_loop_hessian(&rlc.bundle.model, &rlc.scenario.target, &ControllerSpec::Prop2(c)).unwrap().pass);
}

#[test]
fn constant_trace_never_trips_the_monitor() {
    let layout = build(&find_builtin("rlc-default").unwrap()).unwrap().closed_loop.layout();
    let n = 50;
    let trace = SimulationTrace {
        layout,
        times: (0..n).map(|k| k as f64 * 0.01).collect(),
        states: vec![vec![0.1, 0.2, 0.3, 0.4]; n],
        inputs: vec![vec![1.0]; n],
        storage: vec![2.5; n],
    };
    let c = lyapunov_monitor(&trace, None, None);
    assert_eq!(c.residual, 0.0);
    assert!(c.pass);
}

#[test]
fn flipped_input_sign_trips_the_monitor() {
    let built = build(&find_builtin("rlc-default").unwrap()).unwrap();
    let cl = &built.closed_loop;
    let plant = &built.bundle.model;
    let layout = cl.layout();
    let z0 = cl.initial_state(&built.scenario.x0).unwrap();
    let mut flipped = |_: f64, z: &[f64]| {
        let mut dz = cl.derivative(z).unwrap();
        let x = &z[layout.plant_range()];
        let u = cl.control(z).unwrap();
        let gu = plant.input_matrix(x).mul_vec(&u);
        for (d, v) in dz[layout.plant_range()].iter_mut().zip(gu) {
            *d -= 2.0 * v;
        }
        dz
    };
    let raw = integrate_fixed(&mut flipped, &z0, 0.0, 0.05, 1e-5).unwrap();
    let trace = SimulationTrace {
        layout,
        storage: raw.states.iter().map(|z| cl.storage(z).unwrap()).collect(),
        inputs: raw.states.iter().map(|z| cl.control(z).unwrap().iter().map(|v| -v).collect()).collect(),
        times: raw.times,
        states: raw.states,
    };
    let c = lyapunov_monitor(&trace, None, None);
    assert_failure_has_witness(&c);
}

#[test]
fn stable_linear_flow_passes_linearization() {
    let (spectrum, c) = linearization_stability(&|z: &[f64]| z.iter().map(|v| -v).collect(), &[0.0; 4], 1e-6).unwrap();
    assert!(c.pass);
    for e in &spectrum.eigenvalues {
        assert!((e.re + 1.0).abs() <= 1e-6 && e.im.abs() <= 1e-9);
    }
}

#[test]
fn linearization_requires_equilibrium() {
    let r = linearization_stability(&|z: &[f64]| vec![z[0] + 1.0], &[0.0], 1e-6);
    assert!(matches!(r, Err(Error::Precondition { .. })));
}

/// Block Jacobian `[[0, M⁻¹, 0, 0], [−D_c, 0, −D_c, −D_ψ], [−R_cD_c, 0, −R_cK_c − R_cD_c, 0], [D_ψ, 0, 0, −R_ψ]]`.
fn arm_filter_jacobian(minv: &DMatrix<f64>, dc: &[f64], dpsi: &[f64], rc: &[f64], kc: &[f64], rpsi: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(12, 12);
    a.view_mut((0, 3), (3, 3)).copy_from(minv);
    for i in 0..3 {
        a[(3 + i, i)] = -dc[i];
        a[(3 + i, 6 + i)] = -dc[i];
        a[(3 + i, 9 + i)] = -dpsi[i];
        a[(6 + i, i)] = -rc[i] * dc[i];
        a[(6 + i, 6 + i)] = -rc[i] * kc[i] - rc[i] * dc[i];
        a[(9 + i, i)] = dpsi[i];
        a[(9 + i, 9 + i)] = -rpsi[i];
    }
    a
}

fn nearest_distance(a: &[num_complex::Complex64], b: &[nalgebra::Complex<f64>]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| ((x.re - y.re).powi(2) + (x.im - y.im).powi(2)).sqrt()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

#[test]
fn arm_filter_linearization_matches_block_jacobian() {
    let built = build(&find_builtin("pera-filtered").unwrap()).unwrap();
    let cl = &built.closed_loop;
    let zeta = built.equilibrium();
    assert_eq!(zeta.len(), 12);
    let (spectrum, c) = linearization_stability(&|z: &[f64]| cl.derivative(z).unwrap(), &zeta, 1e-6).unwrap();
    assert!(c.pass, "{c:?}");

    let minv = to_nalgebra(&pera(&PeraParams::default()).unwrap().inertia(&pera_target())).try_inverse().unwrap();
    let dc = [6.0 * 120.0, 1.4 * 120.0, 120.0];
    let dpsi = [77.0, 10.5, 16.8];
    let oracle = arm_filter_jacobian(&minv, &dc, &dpsi, &[0.1, 0.005, 0.05], &[1.0; 3], &[1.0, 1.0, 35.0]);
    let reference = oracle.complex_eigenvalues();
    assert!(reference.iter().all(|e| e.re < 0.0));
    let scale = reference.iter().map(|e| e.norm()).fold(1.0, f64::max);
    assert!(nearest_distance(&spectrum.eigenvalues, reference.as_slice()) <= 1e-4 * scale);
}

#[test]
fn arm_filter_without_position_feedback_is_not_stable() {
    let minv = to_nalgebra(&pera(&PeraParams::default()).unwrap().inertia(&pera_target())).try_inverse().unwrap();
    let oracle = arm_filter_jacobian(&minv, &[0.0; 3], &[77.0, 10.5, 16.8], &[0.1, 0.005, 0.05], &[1.0; 3], &[1.0, 1.0, 35.0]);
    let reference_max = oracle.complex_eigenvalues().iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    assert!(reference_max >= 0.0);

    let built = build(&find_builtin("pera-filtered").unwrap()).unwrap();
    let ControllerSpec::Filtered { filter, gravity_offset, q_star, .. } = built.controller.clone() else {
        panic!("pera-filtered runs the filtered law")
    };
    let plant = built.bundle.model.clone();
    let (rc, kc) = (vec![0.1, 0.005, 0.05], vec![1.0; 3]);
    let dynamics = move |z: &[f64]| {
        let (x, rest) = z.split_at(6);
        let (xc, psi) = rest.split_at(3);
        let term = filter.control_term(psi);
        let u: Vec<f64> = (0..3).map(|i| gravity_offset[i] + term[i]).collect();
        let q_err: Vec<f64> = (0..3).map(|i| x[i] - q_star[i]).collect();
        let mut dz = plant.vector_field(x, &u);
        dz.extend((0..3).map(|i| -rc[i] * kc[i] * xc[i]));
        dz.extend(filter.dynamics(psi, &q_err));
        dz
    };
    let (spectrum, c) = linearization_stability(&dynamics, &built.equilibrium(), 1e-6).unwrap();
    assert_failure_has_witness(&c);
    assert!((spectrum.max_real_part - reference_max).abs() <= 1e-4 * (1.0 + reference_max.abs()));
}

#[test]
fn dissipation_obstacle_examples() {
    let arm = pera_affine(&PeraParams::default()).unwrap();
    let x: Vec<f64> = pera_target().into_iter().chain([0.0; 3]).collect();
    assert!(!dissipation_obstacle_flag(&arm, &x).unwrap());
    let dev = coupling_device(&CouplingDeviceParams::default()).unwrap();
    assert!(!dissipation_obstacle_flag(&dev, &[0.0, 0.025, 0.025, 0.0, 0.0]).unwrap());
    let leaky = InputAffineModel::new("leaky", 1, 1, |x| vec![-x[0]], |_| Matrix::identity(1)).with_dissipation(|_| vec![0.3]);
    assert!(dissipation_obstacle_flag(&leaky, &[0.0]).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn equilibrium_residual_ignores_storage_offset(offset in -1e3f64..1e3, a in 0.5f64..3.0) {
        let make = |c: f64| {
            InputAffineModel::new("offset", 2, 1, move |x| vec![-a * x[0] + x[1] * x[1], -x[1]], |_| Matrix::column(&[1.0, 0.0]))
                .with_storage(move |x| 0.5 * x[0] * x[0] + x[1].powi(4) + c)
                .with_gamma(|x| vec![x[0]])
        };
        let base = check_equilibrium_gradient(&make(0.0), &[1.0, 0.0], 1e-8).unwrap();
        let shifted = check_equilibrium_gradient(&make(offset), &[1.0, 0.0], 1e-8).unwrap();
        prop_assert!((base.residual - shifted.residual).abs() <= 1e-6 * (1.0 + offset.abs()));
    }

    #[test]
    fn suggested_gain_always_passes(a in 0.1f64..5.0, b in 0.1f64..5.0, coupling in -3.0f64..3.0, alpha in 0.1f64..5.0, beta in 0.1f64..5.0) {
        // S = ½(a x₁² + b x₂²), γ = x₁ + coupling·x₂.
        let model = InputAffineModel::new("pair", 2, 1, move |x| vec![-a * x[0], -b * x[1]], |_| Matrix::column(&[1.0, 0.0]))
            .with_storage(move |x| 0.5 * (a * x[0] * x[0] + b * x[1] * x[1]))
            .with_gamma(move |x| vec![x[0] + coupling * x[1]]);
        let spec = linear_prop2(1.0, alpha, beta);
        let kc = suggest_kc(&model, &[0.0, 0.0], &spec).unwrap();
        let ControllerSpec::Prop2(mut c) = spec else { unreachable!() };
        c.kc = kc;
        prop_assert!(check_closed_loop_hessian(&model, &[0.0, 0.0], &ControllerSpec::Prop2(c)).unwrap().pass);
    }
}
