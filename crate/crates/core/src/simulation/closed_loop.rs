use std::cell::RefCell;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::SimulationTrace;
use crate::controllers::{ControllerSpec, FilterBase, Prop4Controller};
use crate::models::{passive_output, InputAffineModel};
use crate::numerics::{self, rk4_step, time_grid};
use crate::{Error, Result};

/// Block sizes of the augmented state `(x, x_c, x_ℓ, ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub plant: usize,
    pub xc: usize,
    pub xl: usize,
    pub psi: usize,
    pub inputs: usize,
}

impl Layout {
    pub fn total(&self) -> usize {
        self.plant + self.xc + self.xl + self.psi
    }

    pub fn plant_range(&self) -> Range<usize> {
        0..self.plant
    }

    pub fn xc_range(&self) -> Range<usize> {
        self.plant..self.plant + self.xc
    }

    pub fn xl_range(&self) -> Range<usize> {
        let s = self.plant + self.xc;
        s..s + self.xl
    }

    pub fn psi_range(&self) -> Range<usize> {
        let s = self.plant + self.xc + self.xl;
        s..s + self.psi
    }

    /// Column names `x1.., xc1.., xl1.., psi1..` of the augmented state.
    pub fn state_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.plant).map(|i| format!("x{i}")).collect();
        names.extend((1..=self.xc).map(|i| format!("xc{i}")));
        names.extend((1..=self.xl).map(|i| format!("xl{i}")));
        names.extend((1..=self.psi).map(|i| format!("psi{i}")));
        names
    }
}

/// What a measurement-based controller is allowed to see.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Measurement {
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
    pub q: Vec<f64>,
}

/// Plant, controller and wiring forming the augmented vector field.
#[derive(Clone, Debug)]
pub struct ClosedLoop {
    plant: InputAffineModel,
    controller: ControllerSpec,
    disturbance: Option<Vec<f64>>,
    layout: Layout,
    needs_gamma: bool,
    needs_eta: bool,
    needs_q: bool,
}

/// Wires a controller to a plant, checking dimensions and available measurements.
pub fn assemble(
    plant: InputAffineModel,
    controller: ControllerSpec,
    disturbance: Option<Vec<f64>>,
) -> Result<ClosedLoop> {
    let m = plant.m();
    if controller.inputs() != m {
        return Err(Error::Shape(format!(
            "controller drives {} inputs but plant '{}' has {m}",
            controller.inputs(),
            plant.name()
        )));
    }
    if let Some(d) = &disturbance {
        if d.len() != m {
            return Err(Error::Shape(format!("disturbance has {} entries, expected {m}", d.len())));
        }
    }
    let (xc, xl, psi) = match &controller {
        ControllerSpec::Prop1(_) => (0, 0, 0),
        ControllerSpec::Prop2(_) | ControllerSpec::FullyActuated(_) => (m, 0, 0),
        ControllerSpec::Prop4(_) => (m, m, 0),
        ControllerSpec::Filtered { base: FilterBase::FullyActuated(_), .. } => (m, 0, m),
        ControllerSpec::Filtered { base: FilterBase::Prop4(_), .. } => (m, m, m),
    };
    let (needs_gamma, needs_eta, needs_q) = match &controller {
        ControllerSpec::Prop1(_) | ControllerSpec::Prop2(_) => (true, false, false),
        ControllerSpec::Prop4(_) => (true, true, false),
        ControllerSpec::FullyActuated(_) => (false, false, true),
        ControllerSpec::Filtered { base: FilterBase::FullyActuated(_), .. } => (false, false, true),
        ControllerSpec::Filtered { base: FilterBase::Prop4(_), .. } => (true, true, true),
    };
    if needs_gamma && !plant.has_gamma() {
        return Err(Error::Wiring(format!("'{}' does not expose gamma", plant.name())));
    }
    if needs_eta && !plant.has_eta() {
        return Err(Error::Wiring(format!("'{}' does not expose eta", plant.name())));
    }
    if matches!(controller, ControllerSpec::Prop1(_)) && !plant.has_storage() {
        return Err(Error::Wiring(format!("'{}' has no passive output to feed back", plant.name())));
    }
    if needs_q {
        let info = plant
            .mechanical()
            .ok_or_else(|| Error::Wiring(format!("'{}' has no position coordinates", plant.name())))?;
        let square = info.actuation.rows() == info.actuation.cols();
        let identity = square && (&info.actuation - &numerics::Matrix::identity(info.dof)).max_abs() == 0.0;
        let fully = matches!(
            controller,
            ControllerSpec::FullyActuated(_) | ControllerSpec::Filtered { base: FilterBase::FullyActuated(_), .. }
        );
        if fully && !identity {
            return Err(Error::Config("the fully actuated law needs G = I".into()));
        }
    }
    if let ControllerSpec::Prop4(c) | ControllerSpec::Filtered { base: FilterBase::Prop4(c), .. } = &controller {
        if c.eta_star.len() != plant.eta(&vec![0.0; plant.n()])?.len() {
            return Err(Error::Shape("eta_star does not match the plant's eta".into()));
        }
    }
    let layout = Layout { plant: plant.n(), xc, xl, psi, inputs: m };
    Ok(ClosedLoop { plant, controller, disturbance, layout, needs_gamma, needs_eta, needs_q })
}

impl ClosedLoop {
    pub fn plant(&self) -> &InputAffineModel {
        &self.plant
    }

    pub fn controller(&self) -> &ControllerSpec {
        &self.controller
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn disturbance(&self) -> Option<&[f64]> {
        self.disturbance.as_deref()
    }

    /// Augmented initial state from a plant state, using the controllers' default internal states.
    pub fn initial_state(&self, x0: &[f64]) -> Result<Vec<f64>> {
        let l = self.layout;
        if x0.len() == l.total() {
            return Ok(x0.to_vec());
        }
        if x0.len() != l.plant {
            return Err(Error::Shape(format!(
                "initial state has {} entries, expected {} or {}",
                x0.len(),
                l.plant,
                l.total()
            )));
        }
        let mut z = x0.to_vec();
        match &self.controller {
            ControllerSpec::Prop1(_) => {}
            ControllerSpec::Prop2(c) => z.extend(&c.xc0),
            ControllerSpec::Prop4(c) => {
                z.extend(&c.integral.xc0);
                z.extend(&c.xl0);
            }
            ControllerSpec::FullyActuated(c) => z.extend(&c.xc0),
            ControllerSpec::Filtered { base, filter, .. } => {
                match base {
                    FilterBase::FullyActuated(c) => z.extend(&c.xc0),
                    FilterBase::Prop4(c) => {
                        z.extend(&c.integral.xc0);
                        z.extend(&c.xl0);
                    }
                }
                z.extend(&filter.psi0);
            }
        }
        Ok(z)
    }

    /// Measurements available to the controller at plant state `x`.
    pub fn measure(&self, x: &[f64]) -> Result<Measurement> {
        let mut meas = Measurement::default();
        if self.needs_gamma {
            meas.gamma = self.plant.gamma(x)?;
        }
        if self.needs_eta {
            meas.eta = self.plant.eta(x)?;
        }
        if self.needs_q {
            let info = self.plant.mechanical().expect("checked at assembly");
            meas.q = info.positions(x).to_vec();
        }
        Ok(meas)
    }

    /// Control computed from measurements and controller states only.
    ///
    /// Not available for the passive-output feedback family, which needs `y`.
    pub fn control_from_measurement(&self, meas: &Measurement, z: &[f64]) -> Result<Vec<f64>> {
        let l = self.layout;
        let xc = &z[l.xc_range()];
        let xl = &z[l.xl_range()];
        let psi = &z[l.psi_range()];
        Ok(match &self.controller {
            ControllerSpec::Prop1(_) => {
                return Err(Error::Wiring("passive-output feedback needs the plant state".into()));
            }
            ControllerSpec::Prop2(c) => c.control(&meas.gamma, xc),
            ControllerSpec::Prop4(c) => c.control(&meas.gamma, &meas.eta, xc, xl),
            ControllerSpec::FullyActuated(c) => c.control(&meas.q, xc),
            ControllerSpec::Filtered { base, filter, gravity_offset, .. } => {
                let fb = match base {
                    FilterBase::FullyActuated(c) => c.feedback(&meas.q, xc),
                    FilterBase::Prop4(c) => prop4_feedback(c, meas, xc, xl),
                };
                let upsi = filter.control_term(psi);
                (0..l.inputs).map(|i| gravity_offset[i] + fb[i] + upsi[i]).collect()
            }
        })
    }

    /// Control input at augmented state `z`.
    pub fn control(&self, z: &[f64]) -> Result<Vec<f64>> {
        let x = &z[self.layout.plant_range()];
        if let ControllerSpec::Prop1(c) = &self.controller {
            return self.prop1_control(c, x);
        }
        let meas = self.measure(x)?;
        self.control_from_measurement(&meas, z)
    }

    fn prop1_control(&self, c: &crate::controllers::Prop1Controller, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.layout.inputs;
        let gamma = self.plant.gamma(x)?;
        let y0 = passive_output(&self.plant, x, &vec![0.0; m])?;
        let mut feed = numerics::Matrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            let yj = passive_output(&self.plant, x, &e)?;
            for i in 0..m {
                feed[(i, j)] = yj[i] - y0[i];
            }
            e[j] = 0.0;
        }
        let mut u = c.control(&gamma, &y0);
        if feed.max_abs() == 0.0 {
            return Ok(u);
        }
        for _ in 0..200 {
            let fu = feed.mul_vec(&u);
            let y: Vec<f64> = y0.iter().zip(fu).map(|(a, b)| a + b).collect();
            let next = c.control(&gamma, &y);
            let step = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            u = next;
            if step <= 1e-14 * (1.0 + numerics::max_abs(&u)) {
                return Ok(u);
            }
        }
        Err(Error::Numeric("feedthrough loop of the passive-output law did not converge".into()))
    }

    /// Augmented vector field.
    pub fn derivative(&self, z: &[f64]) -> Result<Vec<f64>> {
        let l = self.layout;
        let x = &z[l.plant_range()];
        let mut u = self.control(z)?;
        if let Some(d) = &self.disturbance {
            u.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
        let mut out = self.plant.vector_field(x, &u);
        out.reserve(l.total() - l.plant);
        let xc = &z[l.xc_range()];
        let xl = &z[l.xl_range()];
        let psi = &z[l.psi_range()];
        match &self.controller {
            ControllerSpec::Prop1(_) => {}
            ControllerSpec::Prop2(c) => out.extend(c.dynamics(&self.plant.gamma(x)?, xc)),
            ControllerSpec::Prop4(c) => {
                let (dc, dl) = c.dynamics(&self.plant.gamma(x)?, &self.plant.eta(x)?, xc, xl);
                out.extend(dc);
                out.extend(dl);
            }
            ControllerSpec::FullyActuated(c) => {
                let q = &x[..c.q_star.len()];
                out.extend(c.dynamics(q, xc));
            }
            ControllerSpec::Filtered { base, filter, q_star, .. } => {
                let info = self.plant.mechanical().expect("checked at assembly");
                let q = info.positions(x);
                match base {
                    FilterBase::FullyActuated(c) => out.extend(c.dynamics(q, xc)),
                    FilterBase::Prop4(c) => {
                        let (dc, dl) = c.dynamics(&self.plant.gamma(x)?, &self.plant.eta(x)?, xc, xl);
                        out.extend(dc);
                        out.extend(dl);
                    }
                }
                let dq: Vec<f64> = q.iter().zip(q_star).map(|(a, b)| a - b).collect();
                let q_err = info.actuation.tr_mul_vec(&dq);
                out.extend(filter.dynamics(psi, &q_err));
            }
        }
        Ok(out)
    }

    /// Closed-loop Lyapunov candidate of the active family.
    ///
    /// Filtered loops report the candidate of their base law.
    pub fn storage(&self, z: &[f64]) -> Result<f64> {
        let l = self.layout;
        let x = &z[l.plant_range()];
        let xc = &z[l.xc_range()];
        let xl = &z[l.xl_range()];
        let prop2_like = |c: &crate::controllers::Prop2Controller| -> Result<f64> {
            let gamma = self.plant.gamma(x)?;
            let s = self.plant.storage(x)?;
            let kx = c.kc.mul_vec(xc);
            Ok(s + c.shape_c.potential(&c.z(&gamma, xc)) + numerics::dot(&c.kappa, &gamma) + 0.5 * numerics::dot(xc, &kx))
        };
        let prop4_like = |c: &Prop4Controller| -> Result<f64> {
            Ok(prop2_like(&c.integral)? + c.shape_ell.potential(&c.z_ell(&self.plant.eta(x)?, xl)))
        };
        let mech_like = |c: &crate::controllers::FullyActuatedController| -> Result<f64> {
            let info = self.plant.mechanical().expect("checked at assembly");
            let q = info.positions(x);
            let kinetic = self.plant.storage(x)? - (info.potential)(q);
            let kx = c.kc.mul_vec(xc);
            Ok(c.shape_c.potential(&c.z(q, xc)) + kinetic + 0.5 * numerics::dot(xc, &kx))
        };
        match &self.controller {
            ControllerSpec::Prop1(c) => {
                let gamma = self.plant.gamma(x)?;
                let dz: Vec<f64> = gamma.iter().zip(&c.gamma_star).map(|(a, b)| a - b).collect();
                Ok(self.plant.storage(x)? + c.shape.potential(&dz) + numerics::dot(&c.kappa, &gamma))
            }
            ControllerSpec::Prop2(c) => prop2_like(c),
            ControllerSpec::Prop4(c) => prop4_like(c),
            ControllerSpec::FullyActuated(c) => mech_like(c),
            ControllerSpec::Filtered { base: FilterBase::FullyActuated(c), .. } => mech_like(c),
            ControllerSpec::Filtered { base: FilterBase::Prop4(c), .. } => prop4_like(c),
        }
    }
}

fn prop4_feedback(c: &Prop4Controller, meas: &Measurement, xc: &[f64], xl: &[f64]) -> Vec<f64> {
    let a = c.integral.shape_c.gradient(&c.integral.z(&meas.gamma, xc));
    let b = c.shape_ell.gradient(&c.z_ell(&meas.eta, xl));
    a.iter().zip(b).map(|(p, q)| -p - q).collect()
}

/// [`simulate_with`] without output decimation.
pub fn simulate(lp: &ClosedLoop, x0: &[f64], t_span: (f64, f64), dt: f64) -> Result<SimulationTrace> {
    simulate_with(lp, x0, t_span, dt, 1)
}

/// RK4 on the augmented state, recording every `dt` and stepping internally with `dt / substeps`.
pub fn simulate_with(
    lp: &ClosedLoop,
    x0: &[f64],
    t_span: (f64, f64),
    dt: f64,
    substeps: usize,
) -> Result<SimulationTrace> {
    if substeps == 0 {
        return Err(Error::Config("substeps must be at least 1".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial state must be finite".into()));
    }
    let z0 = lp.initial_state(x0)?;
    let times = time_grid(t_span.0, t_span.1, dt)?;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let mut field = |_t: f64, z: &[f64]| match lp.derivative(z) {
        Ok(d) => d,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            vec![f64::NAN; z.len()]
        }
    };
    let mut trace = SimulationTrace::with_capacity(lp.layout(), times.len());
    let mut z = z0;
    trace.push(times[0], z.clone(), lp.control(&z)?, lp.storage(&z)?);
    for w in times.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for k in 0..substeps {
            z = rk4_step(&mut field, w[0] + k as f64 * h, &z, h);
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { time: w[0] + (k + 1) as f64 * h });
            }
        }
        let u = lp.control(&z)?;
        let s = lp.storage(&z)?;
        trace.push(w[1], z.clone(), u, s);
    }
    Ok(trace)
}
