use rand::Rng;

use super::{CheckResult, SampleSpec};
use crate::controllers::{ControllerSpec, Prop2Controller, SaturationShape};
use crate::models::{kappa, passive_output, InputAffineModel};
use crate::numerics::{self, eigenvalues, fd_jacobian, ldl_pivots, symmetric_eigen, Matrix, Spectrum};
use crate::simulation::SimulationTrace;
use crate::{Error, Result};

/// Half-width of the box from which inputs are drawn in input-dependent sampled checks.
pub const ASSUMPTION3_INPUT_RANGE: f64 = 10.0;

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn worst<I: IntoIterator<Item = (f64, Vec<f64>)>>(items: I) -> (f64, Option<Vec<f64>>) {
    let mut best = (f64::NEG_INFINITY, None);
    for (r, w) in items {
        if r > best.0 || r.is_nan() {
            best = (r, Some(w));
        }
    }
    if best.1.is_none() {
        best.0 = 0.0;
    }
    best
}

/// Definiteness record: residual `−min pivot`, tolerance `−tol`.
fn pd_check(name: &str, h: &Matrix, tol: f64) -> Result<CheckResult> {
    let h = h.symmetrize();
    let pivots = ldl_pivots(&h, tol)?;
    let min_pivot = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    let (vals, vecs) = symmetric_eigen(&h)?;
    let witness = if min_pivot >= tol { None } else { Some(vecs.col(0)) };
    Ok(CheckResult::new(name, -min_pivot, -tol, witness)
        .with_detail(format!("min eigenvalue {:e}", vals.first().copied().unwrap_or(0.0))))
}

fn random_input(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-ASSUMPTION3_INPUT_RANGE..=ASSUMPTION3_INPUT_RANGE)).collect()
}

fn check_box(model: &InputAffineModel, samples: &SampleSpec) -> Result<()> {
    if samples.dim() != model.n() {
        return Err(Error::Shape(format!("sample box has dimension {}, model has {}", samples.dim(), model.n())));
    }
    Ok(())
}

/// `max |∇S(x)ᵀf(x) + ‖ℓ(x)‖²|` over the sample box.
pub fn check_cyclo_passivity(model: &InputAffineModel, samples: &SampleSpec, tol: f64) -> Result<CheckResult> {
    check_box(model, samples)?;
    let mut rows = Vec::with_capacity(samples.count);
    for x in samples.points() {
        let grad = model.storage_gradient(&x)?;
        let ell = model.dissipation(&x)?;
        let r = (numerics::dot(&grad, &model.drift(&x)) + numerics::dot(&ell, &ell)).abs();
        rows.push((r, x));
    }
    let (residual, witness) = worst(rows);
    Ok(CheckResult::new("cyclo_passivity", residual, tol, witness))
}

/// `‖∇S(x*) + ∇γ(x*)κ‖` with `κ` the constant input holding `x*`.
pub fn check_equilibrium_gradient(model: &InputAffineModel, x_star: &[f64], tol: f64) -> Result<CheckResult> {
    let k = kappa(model, x_star)?;
    let grad = model.storage_gradient(x_star)?;
    let jk = model.gamma_jacobian(x_star)?.mul_vec(&k);
    let residual = numerics::norm(&grad.iter().zip(&jk).map(|(a, b)| a + b).collect::<Vec<_>>());
    Ok(CheckResult::new("equilibrium_gradient", residual, tol, Some(x_star.to_vec())))
}

/// `∇²S + ∇γ diag(αβ) ∇γᵀ + ∇²(γᵀκ)` at `x*` is positive definite (pivot tolerance `rel_tol · max(1, max|H|)`).
pub fn check_shaped_hessian(
    model: &InputAffineModel,
    x_star: &[f64],
    shape: &SaturationShape,
    rel_tol: f64,
) -> Result<CheckResult> {
    let k = kappa(model, x_star)?;
    if shape.len() != k.len() {
        return Err(Error::Shape(format!("shape has {} channels, model has {}", shape.len(), k.len())));
    }
    let mut h = model.storage_hessian(x_star)?;
    let jac = model.gamma_jacobian(x_star)?;
    let curv = Matrix::from_diag(&shape.curvature());
    h = &h + &(&(&jac * &curv) * &jac.transpose());
    h = &h + &model.gamma_kappa_hessian(x_star, &k)?;
    pd_check("shaped_hessian", &h, rel_tol * h.max_abs().max(1.0))
}

/// `γ̇ = y`: `max ‖∇γᵀ(f + gu) − y(x, u)‖∞` over samples and random inputs.
pub fn check_gamma_output(model: &InputAffineModel, samples: &SampleSpec, tol: f64) -> Result<CheckResult> {
    check_box(model, samples)?;
    let mut rng = samples.rng();
    let mut rows = Vec::with_capacity(samples.count);
    for _ in 0..samples.count {
        let x = samples.draw(&mut rng);
        let u = random_input(&mut rng, model.m());
        let xdot = model.vector_field(&x, &u);
        let gdot = model.gamma_jacobian(&x)?.tr_mul_vec(&xdot);
        let y = passive_output(model, &x, &u)?;
        rows.push((numerics::max_abs(&sub(&gdot, &y)), x));
    }
    let (residual, witness) = worst(rows);
    Ok(CheckResult::new("gamma_output", residual, tol, witness))
}

/// Orthogonality `∇γᵀ∇η = 0` and the dissipation bound `‖η̇‖²_Λℓ + ‖y‖²_Λc ≤ ‖ℓ + wu‖²`.
///
/// Inputs are drawn uniformly from `±ASSUMPTION3_INPUT_RANGE`; the reported residual is the larger of the two.
pub fn check_assumption3(model: &InputAffineModel, samples: &SampleSpec, tol: f64) -> Result<CheckResult> {
    check_box(model, samples)?;
    if !model.has_eta() {
        return Err(Error::Metadata(format!("model '{}' does not supply eta", model.name())));
    }
    let mut rng = samples.rng();
    let mut orth = Vec::with_capacity(samples.count);
    let mut bound = Vec::with_capacity(samples.count);
    for _ in 0..samples.count {
        let x = samples.draw(&mut rng);
        let u = random_input(&mut rng, model.m());
        let jg = model.gamma_jacobian(&x)?;
        let je = model.eta_jacobian(&x)?;
        orth.push(((&jg.transpose() * &je).max_abs(), x.clone()));

        let xdot = model.vector_field(&x, &u);
        let eta_dot = je.tr_mul_vec(&xdot);
        let y = passive_output(model, &x, &u)?;
        let mut lw = model.dissipation(&x)?;
        let wu = model.feedthrough(&x)?.mul_vec(&u);
        lw.iter_mut().zip(wu).for_each(|(a, b)| *a += b);
        let lam_l = model.lambda_ell(&x)?;
        let lam_c = model.lambda_c(&x)?;
        let excess = -numerics::dot(&lw, &lw)
            + numerics::dot(&eta_dot, &lam_l.mul_vec(&eta_dot))
            + numerics::dot(&y, &lam_c.mul_vec(&y));
        bound.push((excess.max(0.0), x));
    }
    let (r_orth, w_orth) = worst(orth);
    let (r_bound, w_bound) = worst(bound);
    let (residual, witness) = if r_orth >= r_bound { (r_orth, w_orth) } else { (r_bound, w_bound) };
    Ok(CheckResult::new("assumption3", residual, tol, witness)
        .with_detail(format!("orthogonality {r_orth:e}, dissipation bound {r_bound:e}")))
}

/// Direct and Schur-complement positivity tests of the virtual-state coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCheck {
    pub check: CheckResult,
    pub theta_min_eigenvalue: f64,
    pub schur_min_eigenvalue: f64,
    pub schur_pass: bool,
    pub agree: bool,
}

fn diagonal_entries(name: &str, a: &Matrix, m: usize) -> Result<Vec<f64>> {
    if a.rows() != m || a.cols() != m {
        return Err(Error::Shape(format!("{name} must be {m}x{m}, got {}x{}", a.rows(), a.cols())));
    }
    let d = a.diag();
    let off = (a - &Matrix::from_diag(&d)).max_abs();
    if off > 0.0 || d.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Shape(format!("{name} must be diagonal positive definite")));
    }
    Ok(d)
}

fn theta_shapes(lambda_ell: &Matrix, lambda_c: &Matrix, upsilon: &Matrix) -> Result<(usize, usize)> {
    let s = lambda_ell.rows();
    let m = lambda_c.rows();
    if !lambda_ell.is_square() || !lambda_c.is_square() || upsilon.rows() != m || upsilon.cols() != s {
        return Err(Error::Shape(format!(
            "incompatible blocks: Lambda_ell {}x{}, Lambda_c {}x{}, Upsilon {}x{}",
            lambda_ell.rows(),
            lambda_ell.cols(),
            lambda_c.rows(),
            lambda_c.cols(),
            upsilon.rows(),
            upsilon.cols()
        )));
    }
    Ok((s, m))
}

/// `Θ = [[Λℓ, 0, ½ΥᵀRℓ⁻¹], [0, Λc, −½Rℓ⁻¹], [½Rℓ⁻¹Υ, −½Rℓ⁻¹, KℓRℓ⁻¹]]`.
pub fn theta_matrix(
    lambda_ell: &Matrix,
    lambda_c: &Matrix,
    upsilon: &Matrix,
    r_ell: &Matrix,
    k_ell: &Matrix,
) -> Result<Matrix> {
    let (s, m) = theta_shapes(lambda_ell, lambda_c, upsilon)?;
    let r = diagonal_entries("R_ell", r_ell, m)?;
    let k = diagonal_entries("K_ell", k_ell, m)?;
    let rinv: Vec<f64> = r.iter().map(|v| 1.0 / v).collect();
    let half_rinv = Matrix::from_diag(&rinv.iter().map(|v| 0.5 * v).collect::<Vec<_>>());
    let coupling = &half_rinv * upsilon;
    let mut theta = Matrix::zeros(s + 2 * m, s + 2 * m);
    theta.set_block(0, 0, lambda_ell);
    theta.set_block(s, s, lambda_c);
    theta.set_block(s + m, 0, &coupling);
    theta.set_block(0, s + m, &coupling.transpose());
    theta.set_block(s + m, s, &half_rinv.scale(-1.0));
    theta.set_block(s, s + m, &half_rinv.scale(-1.0));
    theta.set_block(s + m, s + m, &Matrix::from_diag(&k.iter().zip(&rinv).map(|(a, b)| a * b).collect::<Vec<_>>()));
    Ok(theta)
}

/// `blockdiag(Λℓ, Λc) − ¼ [Υ, −I]ᵀ Kℓ⁻¹Rℓ⁻¹ [Υ, −I]`.
pub fn theta_schur_complement(
    lambda_ell: &Matrix,
    lambda_c: &Matrix,
    upsilon: &Matrix,
    r_ell: &Matrix,
    k_ell: &Matrix,
) -> Result<Matrix> {
    let (s, m) = theta_shapes(lambda_ell, lambda_c, upsilon)?;
    let r = diagonal_entries("R_ell", r_ell, m)?;
    let k = diagonal_entries("K_ell", k_ell, m)?;
    let mut b = Matrix::zeros(m, s + m);
    b.set_block(0, 0, upsilon);
    b.set_block(0, s, &Matrix::identity(m).scale(-1.0));
    let weight = Matrix::from_diag(&k.iter().zip(&r).map(|(a, b)| 0.25 / (a * b)).collect::<Vec<_>>());
    let mut base = Matrix::zeros(s + m, s + m);
    base.set_block(0, 0, lambda_ell);
    base.set_block(s, s, lambda_c);
    Ok(&base - &(&(&b.transpose() * &weight) * &b))
}

/// Positive semi-definiteness (or definiteness when `strict`) of `Θ`, cross-checked through its Schur complement.
pub fn check_theta_psd(
    lambda_ell: &Matrix,
    lambda_c: &Matrix,
    upsilon: &Matrix,
    r_ell: &Matrix,
    k_ell: &Matrix,
    strict: bool,
) -> Result<ThetaCheck> {
    let theta = theta_matrix(lambda_ell, lambda_c, upsilon, r_ell, k_ell)?;
    let schur = theta_schur_complement(lambda_ell, lambda_c, upsilon, r_ell, k_ell)?;
    let (tv, tvec) = symmetric_eigen(&theta)?;
    let (sv, _) = symmetric_eigen(&schur)?;
    let lt = tv[0];
    let ls = sv[0];
    let tau_t = 1e-12 * theta.max_abs().max(1.0);
    let tau_s = 1e-12 * schur.max_abs().max(1.0);
    let (tol, schur_pass) = if strict { (-tau_t, ls >= tau_s) } else { (tau_t, ls >= -tau_s) };
    let mut check = CheckResult::new(if strict { "theta_pd" } else { "theta_psd" }, -lt, tol, None);
    if !check.pass {
        check.witness = Some(tvec.col(0));
    }
    let agree = check.pass == schur_pass;
    check.detail = format!("min eig(Theta) {lt:e}, min eig(Schur) {ls:e}");
    Ok(ThetaCheck { check, theta_min_eigenvalue: lt, schur_min_eigenvalue: ls, schur_pass, agree })
}

fn integral_part(ctrl: &ControllerSpec) -> Result<&Prop2Controller> {
    match ctrl {
        ControllerSpec::Prop2(c) => Ok(c),
        ControllerSpec::Prop4(c) => Ok(&c.integral),
        _ => Err(Error::Config(format!("closed-loop Hessian is defined for prop2/prop4, got {}", ctrl.family()))),
    }
}

/// Hessian of the closed-loop storage at `(x*, 0, 0)` for the dynamic-extension families.
pub fn closed_loop_hessian(model: &InputAffineModel, x_star: &[f64], ctrl: &ControllerSpec) -> Result<Matrix> {
    let c = integral_part(ctrl)?;
    let n = model.n();
    let m = c.kappa.len();
    let jac = model.gamma_jacobian(x_star)?;
    let shaped = &model.storage_hessian(x_star)? + &model.gamma_kappa_hessian(x_star, &c.kappa)?;
    let dc = Matrix::from_diag(&c.shape_c.curvature());
    let mut lift = Matrix::zeros(m, n + m);
    lift.set_block(0, 0, &jac.transpose());
    lift.set_block(0, n, &Matrix::identity(m));
    let mut base = Matrix::zeros(n + m, n + m);
    base.set_block(0, 0, &shaped);
    base.set_block(n, n, &c.kc);
    let h = &base + &(&(&lift.transpose() * &dc) * &lift);
    let ControllerSpec::Prop4(p4) = ctrl else { return Ok(h) };
    let mut full = Matrix::zeros(n + 2 * m, n + 2 * m);
    full.set_block(0, 0, &h);
    let mut j = Matrix::zeros(m, n + 2 * m);
    j.set_block(0, 0, &(&p4.upsilon * &model.eta_jacobian(x_star)?.transpose()));
    j.set_block(0, n + m, &Matrix::from_diag(&p4.kl));
    let dl = Matrix::from_diag(&p4.shape_ell.curvature());
    Ok(&full + &(&(&j.transpose() * &dl) * &j))
}

/// Positive definiteness of [`closed_loop_hessian`] with pivot tolerance `1e-8 · max(1, max|H|)`.
pub fn check_closed_loop_hessian(model: &InputAffineModel, x_star: &[f64], ctrl: &ControllerSpec) -> Result<CheckResult> {
    let h = closed_loop_hessian(model, x_star, ctrl)?;
    pd_check("closed_loop_hessian", &h, 1e-8 * h.max_abs().max(1.0))
}

fn with_kc(ctrl: &ControllerSpec, scale: f64) -> ControllerSpec {
    let mut out = ctrl.clone();
    let c = match &mut out {
        ControllerSpec::Prop2(c) => c,
        ControllerSpec::Prop4(c) => &mut c.integral,
        _ => unreachable!("checked by integral_part"),
    };
    c.kc = Matrix::identity(c.kc.rows()).scale(scale);
    out
}

/// Smallest `K_c = s·I` found by doubling from `s = 1` and bisecting eight times that makes the Hessian definite.
pub fn suggest_kc(model: &InputAffineModel, x_star: &[f64], ctrl: &ControllerSpec) -> Result<Matrix> {
    let m = integral_part(ctrl)?.kappa.len();
    let pd = |s: f64| -> Result<bool> { Ok(check_closed_loop_hessian(model, x_star, &with_kc(ctrl, s))?.pass) };
    let mut bracket = None;
    for k in 0..=60 {
        let s = 2f64.powi(k);
        if pd(s)? {
            bracket = Some((if k == 0 { 0.0 } else { s / 2.0 }, s));
            break;
        }
    }
    let (mut lo, mut hi) =
        bracket.ok_or_else(|| Error::Numeric("no K_c up to 2^60 makes the closed-loop Hessian definite".into()))?;
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        if pd(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Matrix::identity(m).scale(hi))
}

/// Largest storage rate `(S_{k+1} − S_k)/Δt` along a trace.
///
/// Uses the recorded storage column unless an evaluator is given; the default tolerance is `1e-6·(1 + |S(t₀)|)`.
pub fn lyapunov_monitor(
    trace: &SimulationTrace,
    storage: Option<&dyn Fn(&[f64]) -> f64>,
    tol: Option<f64>,
) -> CheckResult {
    let values: Vec<f64> = match storage {
        Some(s) => trace.states.iter().map(|z| s(z)).collect(),
        None => trace.storage.clone(),
    };
    let tol = tol.unwrap_or_else(|| 1e-6 * (1.0 + values.first().map_or(0.0, |v| v.abs())));
    let mut residual = f64::NEG_INFINITY;
    let mut at = None;
    for k in 0..values.len().saturating_sub(1) {
        let rate = (values[k + 1] - values[k]) / (trace.times[k + 1] - trace.times[k]);
        if rate > residual || rate.is_nan() {
            residual = rate;
            at = Some(k + 1);
        }
    }
    match at {
        None => CheckResult::new("lyapunov_monitor", 0.0, tol, None),
        Some(k) => CheckResult::new("lyapunov_monitor", residual, tol, Some(trace.states[k].clone()))
            .with_detail(format!("largest storage rate at t = {}", trace.times[k])),
    }
}

/// Spectrum of the finite-difference Jacobian at an equilibrium; passes iff every real part is below `−1e-9`.
pub fn linearization_stability(
    dynamics: &dyn Fn(&[f64]) -> Vec<f64>,
    zeta_star: &[f64],
    eps: f64,
) -> Result<(Spectrum, CheckResult)> {
    let residual = numerics::norm(&dynamics(zeta_star));
    if !(residual <= 1e-6) {
        return Err(Error::Precondition { what: "linearization point is not an equilibrium".into(), residual });
    }
    let jac = fd_jacobian(dynamics, zeta_star, eps)?;
    let spectrum = eigenvalues(&jac)?;
    let check = CheckResult::new("linearization_stability", spectrum.max_real_part, -1e-9, Some(zeta_star.to_vec()))
        .with_detail(format!("max real part {:e}", spectrum.max_real_part));
    Ok((spectrum, check))
}

/// True when the natural dissipation does not vanish at the target.
pub fn dissipation_obstacle_flag(model: &InputAffineModel, x_star: &[f64]) -> Result<bool> {
    Ok(numerics::norm(&model.dissipation(x_star)?) > 1e-9)
}
