use serde::Deserialize;
use serde_json::Value;

use super::config::{ControllerConfig, ModelConfig, Scenario};
use super::models::{
    coupling_device, pera_affine, rlc_affine, rlc_circuit, CouplingDeviceParams, PeraParams, RlcParams, TorqueLimits,
    PERA_TORQUE_LIMITS,
};
use crate::controllers::{
    saturation_bounds, ControllerSpec, FilterAugmentation, FilterBase, FullyActuatedController, Prop1Controller,
    Prop2Controller, Prop4Controller, SaturationShape,
};
use crate::models::{bm_integrability_residual, kappa, BraytonMoserModel, InputAffineModel};
use crate::numerics::{self, default_eps, Matrix};
use crate::simulation::{assemble, simulate_with, ClosedLoop, Metrics, SimulationTrace};
use crate::verification::{
    check_assumption3, check_closed_loop_hessian, check_cyclo_passivity, check_equilibrium_gradient,
    check_gamma_output, check_theta_psd, dissipation_obstacle_flag, linearization_stability, CheckResult, SampleSpec,
    VerificationReport,
};
use crate::{Error, Result};

/// Plant built from a [`ModelConfig`] plus the model-specific extras the controllers and checks use.
#[derive(Clone)]
pub struct ModelBundle {
    pub model: InputAffineModel,
    pub circuit: Option<BraytonMoserModel>,
    pub gravity_bound: Option<Vec<f64>>,
    pub torque_limits: Option<TorqueLimits>,
}

fn params<T: for<'de> Deserialize<'de> + Default>(kind: &str, v: &Value) -> Result<T> {
    if v.is_null() {
        return Ok(T::default());
    }
    T::deserialize(v).map_err(|e| Error::Config(format!("invalid {kind} parameters: {e}")))
}

pub fn build_model(cfg: &ModelConfig) -> Result<ModelBundle> {
    match cfg.kind.as_str() {
        "coupling_device" => {
            let p: CouplingDeviceParams = params(&cfg.kind, &cfg.params)?;
            Ok(ModelBundle { model: coupling_device(&p)?, circuit: None, gravity_bound: None, torque_limits: None })
        }
        "rlc" => {
            let p: RlcParams = params(&cfg.kind, &cfg.params)?;
            Ok(ModelBundle {
                model: rlc_affine(&p)?,
                circuit: Some(rlc_circuit(&p)?),
                gravity_bound: None,
                torque_limits: None,
            })
        }
        "pera" => {
            let p: PeraParams = params(&cfg.kind, &cfg.params)?;
            Ok(ModelBundle {
                model: pera_affine(&p)?,
                circuit: None,
                gravity_bound: Some(p.gravity_bound()),
                torque_limits: Some(PERA_TORQUE_LIMITS),
            })
        }
        other => Err(Error::Config(format!("unknown model kind '{other}'"))),
    }
}

fn filter_of(cfg: &ControllerConfig, m: usize) -> Result<FilterAugmentation> {
    let shape = SaturationShape::new(cfg.alpha_psi(m)?, cfg.beta_psi(m)?)?;
    FilterAugmentation::new(shape, cfg.matrix("Rpsi", &cfg.rpsi)?.diagonal("Rpsi", m)?)
}

fn prop2_of(cfg: &ControllerConfig, model: &InputAffineModel, target: &[f64]) -> Result<Prop2Controller> {
    let m = model.m();
    Prop2Controller::new(
        SaturationShape::new(cfg.alpha_c(m)?, cfg.beta_c(m)?)?,
        kappa(model, target)?,
        model.gamma(target)?,
        cfg.matrix("Kc", &cfg.kc)?.to_matrix("Kc", m, m)?,
        cfg.matrix("Rc", &cfg.rc)?.to_matrix("Rc", m, m)?,
    )
}

fn prop4_of(cfg: &ControllerConfig, model: &InputAffineModel, target: &[f64]) -> Result<Prop4Controller> {
    let m = model.m();
    let eta_star = model.eta(target)?;
    Prop4Controller::new(
        prop2_of(cfg, model, target)?,
        SaturationShape::new(cfg.alpha_ell(m)?, cfg.beta_ell(m)?)?,
        cfg.matrix("Upsilon", &cfg.upsilon)?.to_matrix("Upsilon", m, eta_star.len())?,
        cfg.matrix("Kl", &cfg.kl)?.diagonal("Kl", m)?,
        cfg.matrix("Rl", &cfg.rl)?.diagonal("Rl", m)?,
        eta_star,
    )
}

fn fully_of(cfg: &ControllerConfig, bundle: &ModelBundle, target: &[f64]) -> Result<FullyActuatedController> {
    let model = &bundle.model;
    let info = model
        .mechanical()
        .ok_or_else(|| Error::Wiring(format!("'{}' is not a mechanical model", model.name())))?;
    let m = model.m();
    let grad_bound = match (&cfg.grad_bound, &bundle.gravity_bound) {
        (Some(b), _) => b.expand("grad_bound", m)?,
        (None, Some(b)) => b.clone(),
        (None, None) => return Err(Error::Config("fully actuated law needs 'grad_bound'".into())),
    };
    FullyActuatedController::new(
        SaturationShape::new(cfg.alpha_c(m)?, cfg.beta_c(m)?)?,
        info.positions(target).to_vec(),
        cfg.matrix("Kc", &cfg.kc)?.to_matrix("Kc", m, m)?,
        cfg.matrix("Rc", &cfg.rc)?.to_matrix("Rc", m, m)?,
        info.potential_grad.clone(),
        grad_bound,
    )
}

/// Controller described by `cfg`, targeting plant equilibrium `target`.
pub fn build_controller(cfg: &ControllerConfig, bundle: &ModelBundle, target: &[f64]) -> Result<ControllerSpec> {
    let model = &bundle.model;
    if target.len() != model.n() {
        return Err(Error::Config(format!("target has {} entries, model has {} states", target.len(), model.n())));
    }
    let m = model.m();
    match cfg.family.as_str() {
        "prop1" => {
            let shape = SaturationShape::new(
                cfg.pick_alpha(m)?,
                cfg.beta.as_ref().ok_or_else(|| Error::Config("prop1 needs 'beta'".into()))?.expand("beta", m)?,
            )?;
            let kp = cfg.kp.as_ref().ok_or_else(|| Error::Config("prop1 needs 'kp'".into()))?.expand("kp", m)?;
            Ok(ControllerSpec::Prop1(Prop1Controller::new(shape, kp, kappa(model, target)?, model.gamma(target)?)?))
        }
        "prop2" => Ok(ControllerSpec::Prop2(prop2_of(cfg, model, target)?)),
        "prop4" => Ok(ControllerSpec::Prop4(prop4_of(cfg, model, target)?)),
        "fully_actuated" => Ok(ControllerSpec::FullyActuated(fully_of(cfg, bundle, target)?)),
        "fully_actuated_filtered" => {
            ControllerSpec::filtered_fully_actuated(fully_of(cfg, bundle, target)?, filter_of(cfg, m)?)
        }
        "prop4_filtered" => {
            let info = model
                .mechanical()
                .ok_or_else(|| Error::Wiring(format!("'{}' is not a mechanical model", model.name())))?;
            let offset: Vec<f64> = kappa(model, target)?.into_iter().map(|k| -k).collect();
            ControllerSpec::filtered(
                FilterBase::Prop4(prop4_of(cfg, model, target)?),
                filter_of(cfg, m)?,
                offset,
                info.positions(target).to_vec(),
            )
        }
        other => Err(Error::Config(format!("unknown controller family '{other}'"))),
    }
}

impl ControllerConfig {
    fn pick_alpha(&self, m: usize) -> Result<Vec<f64>> {
        self.alpha.as_ref().ok_or_else(|| Error::Config("prop1 needs 'alpha'".into()))?.expand("alpha", m)
    }

    /// `α·β` of the shaping channel, without requiring positive entries.
    pub fn shaping_curvature(&self, m: usize) -> Result<Vec<f64>> {
        let (a, b) = if self.family == "prop1" {
            let b = self.beta.as_ref().ok_or_else(|| Error::Config("prop1 needs 'beta'".into()))?;
            (self.pick_alpha(m)?, b.expand("beta", m)?)
        } else {
            (self.alpha_c(m)?, self.beta_c(m)?)
        };
        Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
    }
}

/// A scenario resolved into plant, controller, closed loop and channel bookkeeping.
#[derive(Clone)]
pub struct BuiltScenario {
    pub scenario: Scenario,
    pub bundle: ModelBundle,
    pub controller: ControllerSpec,
    pub closed_loop: ClosedLoop,
    pub bounds: Vec<(f64, f64)>,
    /// Augmented-state indices of the tracked outputs.
    pub channels: Vec<usize>,
    /// Target value of each tracked channel.
    pub channel_targets: Vec<f64>,
}

impl BuiltScenario {
    /// Augmented equilibrium `(x*, 0, …)`.
    pub fn equilibrium(&self) -> Vec<f64> {
        let mut z = self.scenario.target.clone();
        z.resize(self.closed_loop.layout().total(), 0.0);
        z
    }
}

pub fn build(s: &Scenario) -> Result<BuiltScenario> {
    let bundle = build_model(&s.model)?;
    let controller = build_controller(&s.controller, &bundle, &s.target)?;
    let closed_loop = assemble(bundle.model.clone(), controller.clone(), s.disturbance.clone())?;
    let bounds = saturation_bounds(&controller);
    let names = closed_loop.layout().state_names();
    let mut channels = Vec::with_capacity(s.outputs.len());
    let mut channel_targets = Vec::with_capacity(s.outputs.len());
    for out in &s.outputs {
        let idx = names
            .iter()
            .position(|n| n == out)
            .ok_or_else(|| Error::Config(format!("unknown output channel '{out}'")))?;
        channels.push(idx);
        channel_targets.push(s.target.get(idx).copied().unwrap_or(0.0));
    }
    Ok(BuiltScenario { scenario: s.clone(), bundle, controller, closed_loop, bounds, channels, channel_targets })
}

/// Trace and metrics of one scenario run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: SimulationTrace,
    pub metrics: Metrics,
}

/// Simulates a built scenario; a saturation breach surfaces as an invariant error.
pub fn run_built(b: &BuiltScenario) -> Result<RunOutput> {
    let s = &b.scenario;
    let trace = simulate_with(&b.closed_loop, &s.x0, (s.t_span[0], s.t_span[1]), s.dt, s.substeps)?;
    let metrics = Metrics::compute(&trace, &b.channels, &b.channel_targets, &b.bounds, s.window())?;
    Ok(RunOutput { trace, metrics })
}

pub fn run(s: &Scenario) -> Result<RunOutput> {
    run_built(&build(s)?)
}

const TOL: f64 = 1e-8;

fn detectability_note(kind: &str) -> Option<&'static str> {
    match kind {
        "coupling_device" => Some(
            "detectability: a constant eta forces x5 = 0, then x2 = x3, x4 = 0, x1 = 0 and u = 0; \
             a constant virtual state gives z_ell = 0 and hence z_c = 0, x_c = 0 and gamma = gamma*, so x2 = x3 = x3*",
        ),
        "rlc" => Some(
            "detectability: zero storage rate forces constant x2, x3 and then x1; with a constant x_c this gives \
             K_c x_c = x3 - x3*, which only admits z_c = x_c = 0 and hence x = x*",
        ),
        "pera" => Some("detectability: the fully actuated law sees every position, so convergence is checked by simulation"),
        _ => None,
    }
}

fn shaped_hessian_check(model: &InputAffineModel, x_star: &[f64], curvature: &[f64]) -> Result<CheckResult> {
    let k = kappa(model, x_star)?;
    if curvature.len() != k.len() {
        return Err(Error::Shape("curvature does not match the input dimension".into()));
    }
    let jac = model.gamma_jacobian(x_star)?;
    let mut h = model.storage_hessian(x_star)?;
    h = &h + &(&(&jac * &Matrix::from_diag(curvature)) * &jac.transpose());
    h = &h + &model.gamma_kappa_hessian(x_star, &k)?;
    let h = h.symmetrize();
    let tol = TOL * h.max_abs().max(1.0);
    let pivots = numerics::ldl_pivots(&h, tol)?;
    let min_pivot = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    let (vals, vecs) = numerics::symmetric_eigen(&h)?;
    let witness = (min_pivot < tol).then(|| vecs.col(0));
    Ok(CheckResult::new("shaped_hessian", -min_pivot, -tol, witness)
        .with_detail(format!("min eigenvalue {:e}", vals[0])))
}

/// Every applicable structural and stability check for a scenario.
///
/// Failures to build the controller or evaluate a check are recorded as failed entries.
pub fn verify_scenario(s: &Scenario, seed: u64) -> Result<VerificationReport> {
    let bundle = build_model(&s.model)?;
    let model = &bundle.model;
    let x_star = s.target.clone();
    if x_star.len() != model.n() {
        return Err(Error::Config(format!("target has {} entries, model has {} states", x_star.len(), model.n())));
    }
    let mut report = VerificationReport::new(&s.name);
    let witness = Some(x_star.clone());
    let (half, count) = match &s.verify {
        Some(v) => (v.box_half.clone(), v.count),
        None => (vec![1.0; model.n()], 1000),
    };
    let samples = SampleSpec::around(&x_star, &half, count, seed)?;

    report.record("cyclo_passivity", check_cyclo_passivity(model, &samples, TOL), witness.clone());
    report.record("equilibrium_gradient", check_equilibrium_gradient(model, &x_star, TOL), witness.clone());
    let shaped = s.controller.shaping_curvature(model.m()).and_then(|c| shaped_hessian_check(model, &x_star, &c));
    report.record("shaped_hessian", shaped, witness.clone());
    report.record("gamma_output", check_gamma_output(model, &samples, TOL), witness.clone());
    if model.has_eta() {
        report.record("assumption3", check_assumption3(model, &samples, TOL), witness.clone());
    } else {
        report.note("assumption3: the model exposes no damped unactuated coordinate, so the check does not apply");
    }
    if let Some(bm) = &bundle.circuit {
        let integrability = samples
            .points()
            .into_iter()
            .map(|x| bm_integrability_residual(bm, &x).map(|r| (r, x)))
            .collect::<Result<Vec<_>>>()
            .map(|rows| {
                let (r, w) = rows.into_iter().fold((0.0, None), |acc, (r, x)| if r > acc.0 { (r, Some(x)) } else { acc });
                CheckResult::new("integrability", r, 1e-6, w.or_else(|| Some(x_star.clone())))
            });
        report.record("integrability", integrability, witness.clone());
    }
    if let Ok(true) = dissipation_obstacle_flag(model, &x_star) {
        report.note("dissipation obstacle at the target: shaping uses gamma instead of the passive output");
    }
    if let Some(note) = detectability_note(&s.model.kind) {
        report.note(note);
    }

    let controller = match build_controller(&s.controller, &bundle, &x_star) {
        Ok(c) => c,
        Err(e) => {
            report.push(CheckResult::from_error("controller", &e, witness));
            return Ok(report);
        }
    };
    if matches!(controller, ControllerSpec::Prop2(_) | ControllerSpec::Prop4(_)) {
        report.record("closed_loop_hessian", check_closed_loop_hessian(model, &x_star, &controller), witness.clone());
    }
    if let ControllerSpec::Prop4(c) = &controller {
        let theta = (|| {
            let t = check_theta_psd(
                &model.lambda_ell(&x_star)?,
                &model.lambda_c(&x_star)?,
                &c.upsilon,
                &Matrix::from_diag(&c.rl),
                &Matrix::from_diag(&c.kl),
                false,
            )?;
            if !t.agree {
                return Err(Error::Numeric("Theta eigenvalue and Schur tests disagree".into()));
            }
            Ok(t.check)
        })();
        report.record("theta_psd", theta, witness.clone());
    }
    let bounds = saturation_bounds(&controller);
    if let ControllerSpec::FullyActuated(c) | ControllerSpec::Filtered { base: FilterBase::FullyActuated(c), .. } =
        &controller
    {
        let dof = c.q_star.len();
        let qs: Vec<Vec<f64>> = samples.points().into_iter().map(|x| x[..dof].to_vec()).collect();
        let excess = c.gradient_bound_excess(&qs);
        report.push(CheckResult::new("gravity_bound", excess.max(0.0), 0.0, Some(x_star.clone())));
    }
    if let Some(limits) = bundle.torque_limits {
        let peak: Vec<f64> = bounds.iter().map(|(lo, hi)| lo.abs().max(hi.abs())).collect();
        let worst = limits.margin(&[peak[0], peak[1], peak[2]]).min(limits.margin(&[peak[0], peak[1], -peak[2]]));
        report.push(
            CheckResult::new("torque_limits", (-worst).max(0.0), 0.0, Some(peak.clone()))
                .with_detail(format!("smallest margin {worst:e} over the saturation box")),
        );
    }
    if matches!(controller, ControllerSpec::Filtered { .. }) {
        let lp = assemble(model.clone(), controller.clone(), None)?;
        let mut zeta = x_star.clone();
        zeta.resize(lp.layout().total(), 0.0);
        let field = |z: &[f64]| lp.derivative(z).unwrap_or_else(|_| vec![f64::NAN; z.len()]);
        match linearization_stability(&field, &zeta, default_eps(&zeta)) {
            Ok((spectrum, check)) => {
                report.spectrum = Some(spectrum);
                report.push(check);
            }
            Err(e) => report.push(CheckResult::from_error("linearization_stability", &e, Some(zeta))),
        }
    }
    Ok(report)
}
