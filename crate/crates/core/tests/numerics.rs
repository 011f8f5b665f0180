use nalgebra::DMatrix;
use pbc_core::numerics::{
    default_pd_tol, eigenvalues, fd_gradient, fd_hessian, integrate_fixed, is_positive_definite, Matrix,
};
use pbc_core::scenarios::{pera, PeraParams};
use pbc_core::Error;
use proptest::prelude::*;

fn to_nalgebra(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

#[test]
fn gradient_of_weighted_square() {
    let f = |x: &[f64]| x[0] * x[0] + 2.0 * x[1] * x[1];
    let g = fd_gradient(&f, &[1.0, 1.0], 1e-6).unwrap();
    assert!((g[0] - 2.0).abs() <= 1e-6 && (g[1] - 4.0).abs() <= 1e-6, "{g:?}");
}

#[test]
fn gradient_of_constant_is_zero() {
    let g = fd_gradient(&|_: &[f64]| 3.5, &[0.3, -7.0, 1e3], 1e-6).unwrap();
    assert!(g.iter().all(|v| *v == 0.0));
}

#[test]
fn gradient_of_arm_potential_at_horizontal_elbow() {
    let arm = pera(&PeraParams::default()).unwrap();
    let g = fd_gradient(&|q: &[f64]| arm.potential(q), &[0.0, std::f64::consts::FRAC_PI_2, 0.0], 1e-6).unwrap();
    let peak = 1.0 * 9.81 * 0.16;
    assert!(g[0].abs() < 1e-9 && g[2].abs() < 1e-9);
    assert!((g[1] - peak).abs() < 1e-6, "{g:?}");
    assert!((g[1] - 1.5696).abs() < 1e-6);
}

#[test]
fn gradient_reports_the_offending_stencil_point() {
    let f = |x: &[f64]| if x[0] > 1.0 { f64::NAN } else { x[0] };
    match fd_gradient(&f, &[1.0], 1e-3) {
        Err(Error::Evaluation { point }) => assert!(point[0] > 1.0),
        other => panic!("expected an evaluation failure, got {other:?}"),
    }
}

#[test]
fn hessian_of_weighted_square() {
    let f = |x: &[f64]| x[0] * x[0] + 2.0 * x[1] * x[1];
    for x in [[0.0, 0.0], [1.5, -2.0], [10.0, 3.0]] {
        let h = fd_hessian(&f, &x, 1e-4).unwrap();
        let expected = [[2.0, 0.0], [0.0, 4.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[(i, j)] - expected[i][j]).abs() < 1e-4, "{x:?} {h:?}");
            }
        }
    }
}

#[test]
fn hessian_of_linear_function_vanishes() {
    let h = fd_hessian(&|x: &[f64]| 3.0 * x[0] - x[1] + 0.5 * x[2], &[0.2, 0.4, -1.0], 1e-4).unwrap();
    assert!(h.max_abs() < 1e-6);
    assert_eq!(h.asymmetry(), 0.0);
}

#[test]
fn definiteness_of_small_matrices() {
    let tol = 1e-12;
    assert!(is_positive_definite(&Matrix::identity(3), tol).unwrap());
    assert!(is_positive_definite(&Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]), tol).unwrap());
    assert!(!is_positive_definite(&Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]), tol).unwrap());
}

#[test]
fn definiteness_rejects_asymmetric_input() {
    let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]);
    assert!(matches!(is_positive_definite(&a, 1e-12), Err(Error::Shape(_))));
}

fn sorted_real(a: &Matrix) -> Vec<f64> {
    let mut v: Vec<f64> = eigenvalues(a).unwrap().eigenvalues.iter().map(|l| l.re).collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn spectrum_of_diagonal_matrix() {
    let s = eigenvalues(&Matrix::from_diag(&[1.0, 2.0, 3.0])).unwrap();
    assert_eq!(s.eigenvalues.len(), 3);
    let re = sorted_real(&Matrix::from_diag(&[1.0, 2.0, 3.0]));
    for (got, want) in re.iter().zip([1.0, 2.0, 3.0]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!(s.eigenvalues.iter().all(|l| l.im.abs() < 1e-12));
    assert!((s.max_real_part - 3.0).abs() < 1e-12);
}

#[test]
fn spectrum_of_rotation_generator() {
    let s = eigenvalues(&Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]])).unwrap();
    let mut im: Vec<f64> = s.eigenvalues.iter().map(|l| l.im).collect();
    im.sort_by(f64::total_cmp);
    assert!((im[0] + 1.0).abs() < 1e-12 && (im[1] - 1.0).abs() < 1e-12);
    assert!(s.eigenvalues.iter().all(|l| l.re.abs() < 1e-12));
}

#[test]
fn decay_reaches_inverse_e() {
    let tr = integrate_fixed(&mut |_, x| vec![-x[0]], &[1.0], 0.0, 1.0, 1e-3).unwrap();
    assert_eq!(*tr.times.last().unwrap(), 1.0);
    assert!((tr.states.last().unwrap()[0] - (-1.0f64).exp()).abs() < 1e-6);
    assert!((tr.states.last().unwrap()[0] - 0.367879).abs() < 1e-6);
}

#[test]
fn zero_field_is_constant() {
    let tr = integrate_fixed(&mut |_, _| vec![0.0; 3], &[1.0, -2.0, 0.5], 0.0, 2.0, 0.01).unwrap();
    assert!(tr.states.iter().all(|s| s == &[1.0, -2.0, 0.5]));
}

#[test]
fn harmonic_oscillator_returns_after_one_period() {
    let period = 2.0 * std::f64::consts::PI;
    let tr = integrate_fixed(&mut |_, x| vec![x[1], -x[0]], &[1.0, 0.0], 0.0, period, 1e-3).unwrap();
    let end = tr.states.last().unwrap();
    assert!((end[0] - 1.0).abs() < 1e-5 && end[1].abs() < 1e-5, "{end:?}");
    assert_eq!(*tr.times.last().unwrap(), period);
}

#[test]
fn final_step_is_shortened_to_hit_tf() {
    let tr = integrate_fixed(&mut |_, x| vec![-x[0]], &[1.0], 0.0, 0.25, 0.1).unwrap();
    assert_eq!(tr.times.len(), 4);
    assert_eq!(*tr.times.last().unwrap(), 0.25);
}

#[test]
fn blow_up_reports_its_time() {
    let err = integrate_fixed(&mut |_, x| vec![x[0] * x[0]], &[1.0], 0.0, 2.0, 1e-2).unwrap_err();
    match err {
        Error::Divergence { time } => assert!(time > 0.9 && time <= 2.0, "{time}"),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn rk4_observed_order_on_decay() {
    let exact = (-1.0f64).exp();
    let err = |dt: f64| {
        let tr = integrate_fixed(&mut |_, x| vec![-x[0]], &[1.0], 0.0, 1.0, dt).unwrap();
        (tr.states.last().unwrap()[0] - exact).abs()
    };
    let steps = [0.2, 0.1, 0.05, 0.025];
    let errors: Vec<f64> = steps.iter().map(|dt| err(*dt)).collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.8, "observed order {order} from {errors:?}");
    }
}

#[test]
fn integration_is_deterministic() {
    let run = || integrate_fixed(&mut |t, x| vec![x[1], -x[0].sin() + t.cos()], &[0.3, 0.0], 0.0, 3.0, 1e-3).unwrap();
    assert_eq!(run(), run());
}

fn symmetric(dim: usize, entries: &[f64]) -> Matrix {
    let mut a = Matrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in 0..=i {
            a[(i, j)] = entries[k];
            a[(j, i)] = entries[k];
            k += 1;
        }
    }
    a
}

fn square(dim: usize, entries: &[f64]) -> Matrix {
    Matrix::from_row_major(dim, dim, entries[..dim * dim].to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn quadratic_gradient_is_affine_map(
        dim in 1usize..6,
        entries in prop::collection::vec(-3.0f64..3.0, 21),
        b in prop::collection::vec(-3.0f64..3.0, 6),
        x in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let a = symmetric(dim, &entries);
        let b = &b[..dim];
        let x = &x[..dim];
        let f = |z: &[f64]| 0.5 * pbc_core::numerics::dot(z, &a.mul_vec(z)) + pbc_core::numerics::dot(b, z);
        let eps = 1e-6;
        let g = fd_gradient(&f, x, eps).unwrap();
        let exact: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(p, q)| p + q).collect();
        for (gi, ei) in g.iter().zip(&exact) {
            prop_assert!((gi - ei).abs() <= 10.0 * eps * ei.abs().max(1.0), "{g:?} vs {exact:?}");
        }
    }

    #[test]
    fn definiteness_agrees_with_eigenvalue_sign(
        dim in 1usize..=8,
        entries in prop::collection::vec(-1.0f64..1.0, 36),
        shift in -1.0f64..3.0,
    ) {
        let mut a = symmetric(dim, &entries);
        for i in 0..dim {
            a[(i, i)] += shift;
        }
        let min_eig = sorted_real(&a)[0];
        let oracle = to_nalgebra(&a).symmetric_eigen().eigenvalues.min();
        prop_assert!((min_eig - oracle).abs() <= 1e-9 * a.max_abs().max(1.0));
        let tol = default_pd_tol(&a);
        prop_assume!((min_eig.abs()) > 1e-6 * a.max_abs().max(1.0));
        prop_assert_eq!(is_positive_definite(&a, tol).unwrap(), min_eig > 0.0);
    }

    #[test]
    fn eigenvalues_sum_to_trace(dim in 1usize..=12, entries in prop::collection::vec(-5.0f64..5.0, 144)) {
        let a = square(dim, &entries);
        let s = eigenvalues(&a).unwrap();
        prop_assert_eq!(s.eigenvalues.len(), dim);
        let sum: f64 = s.eigenvalues.iter().map(|l| l.re).sum();
        let im: f64 = s.eigenvalues.iter().map(|l| l.im).sum();
        let scale = to_nalgebra(&a).norm().max(1.0);
        prop_assert!((sum - a.trace()).abs() <= 1e-8 * scale, "{} vs {}", sum, a.trace());
        prop_assert!(im.abs() <= 1e-8 * scale);
        let re_max = s.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(s.max_real_part, re_max);
    }

    #[test]
    fn eigenvalues_match_independent_solver(dim in 1usize..=10, entries in prop::collection::vec(-5.0f64..5.0, 100)) {
        let a = square(dim, &entries);
        let ours: Vec<(f64, f64)> = eigenvalues(&a).unwrap().eigenvalues.iter().map(|l| (l.re, l.im)).collect();
        let oracle: Vec<(f64, f64)> = to_nalgebra(&a).complex_eigenvalues().iter().map(|l| (l.re, l.im)).collect();
        let scale = to_nalgebra(&a).norm().max(1.0);
        for o in &oracle {
            let nearest = ours.iter().map(|p| ((p.0 - o.0).powi(2) + (p.1 - o.1).powi(2)).sqrt()).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= 1e-6 * scale, "oracle {o:?} unmatched in {ours:?}");
        }
    }
}
