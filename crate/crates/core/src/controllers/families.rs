use std::fmt;

use super::SaturationShape;
use crate::models::VectorMap;
use crate::numerics::{self, Matrix};
use crate::{Error, Result};

fn check_len(label: &str, v: &[f64], m: usize) -> Result<()> {
    if v.len() == m {
        Ok(())
    } else {
        Err(Error::Shape(format!("{label} has {} entries, expected {m}", v.len())))
    }
}

fn check_pd(label: &str, a: &Matrix, m: usize) -> Result<()> {
    if a.rows() != m || a.cols() != m {
        return Err(Error::Shape(format!("{label} must be {m}x{m}")));
    }
    if !numerics::is_positive_definite(a, numerics::default_pd_tol(a))? {
        return Err(Error::Config(format!("{label} must be positive definite")));
    }
    Ok(())
}

fn check_positive(label: &str, v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        Some(bad) => Err(Error::Config(format!("{label} entries must be positive, got {bad}"))),
        None => Ok(()),
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `u = −φ'(γ − γ*) − κ − k_p tanh(y)`.
#[derive(Debug, Clone)]
pub struct Prop1Controller {
    pub shape: SaturationShape,
    pub kp: Vec<f64>,
    pub kappa: Vec<f64>,
    pub gamma_star: Vec<f64>,
}

impl Prop1Controller {
    pub fn new(shape: SaturationShape, kp: Vec<f64>, kappa: Vec<f64>, gamma_star: Vec<f64>) -> Result<Self> {
        let m = shape.len();
        check_len("k_p", &kp, m)?;
        check_len("kappa", &kappa, m)?;
        check_len("gamma_star", &gamma_star, m)?;
        check_positive("k_p", &kp)?;
        Ok(Self { shape, kp, kappa, gamma_star })
    }

    pub fn control(&self, gamma: &[f64], y: &[f64]) -> Vec<f64> {
        let sat = self.shape.gradient(&diff(gamma, &self.gamma_star));
        (0..self.kappa.len()).map(|i| -sat[i] - self.kappa[i] - self.kp[i] * y[i].tanh()).collect()
    }
}

/// Dynamic extension: `z_c = γ − γ* + x_c`, `u = −κ − φ_c'(z_c)`, `ẋ_c = −R_c(φ_c'(z_c) + K_c x_c)`.
#[derive(Debug, Clone)]
pub struct Prop2Controller {
    pub shape_c: SaturationShape,
    pub kappa: Vec<f64>,
    pub gamma_star: Vec<f64>,
    pub kc: Matrix,
    pub rc: Matrix,
    pub xc0: Vec<f64>,
}

impl Prop2Controller {
    pub fn new(
        shape_c: SaturationShape,
        kappa: Vec<f64>,
        gamma_star: Vec<f64>,
        kc: Matrix,
        rc: Matrix,
    ) -> Result<Self> {
        let m = shape_c.len();
        check_len("kappa", &kappa, m)?;
        check_len("gamma_star", &gamma_star, m)?;
        check_pd("K_c", &kc, m)?;
        check_pd("R_c", &rc, m)?;
        Ok(Self { shape_c, kappa, gamma_star, kc, rc, xc0: vec![0.0; m] })
    }

    pub fn z(&self, gamma: &[f64], xc: &[f64]) -> Vec<f64> {
        gamma.iter().zip(&self.gamma_star).zip(xc).map(|((g, gs), x)| g - gs + x).collect()
    }

    pub fn control(&self, gamma: &[f64], xc: &[f64]) -> Vec<f64> {
        let sat = self.shape_c.gradient(&self.z(gamma, xc));
        self.kappa.iter().zip(sat).map(|(k, s)| -k - s).collect()
    }

    pub fn dynamics(&self, gamma: &[f64], xc: &[f64]) -> Vec<f64> {
        let mut inner = self.shape_c.gradient(&self.z(gamma, xc));
        inner.iter_mut().zip(self.kc.mul_vec(xc)).for_each(|(a, b)| *a += b);
        self.rc.mul_vec(&inner).into_iter().map(|v| -v).collect()
    }
}

/// Prop. 2 law plus the virtual state `x_ℓ` exploiting damping of `η`.
#[derive(Debug, Clone)]
pub struct Prop4Controller {
    pub integral: Prop2Controller,
    pub shape_ell: SaturationShape,
    /// `Υ`, `m × s`.
    pub upsilon: Matrix,
    /// Diagonal of `K_ℓ`.
    pub kl: Vec<f64>,
    /// Diagonal of `R_ℓ`.
    pub rl: Vec<f64>,
    pub eta_star: Vec<f64>,
    pub xl0: Vec<f64>,
}

impl Prop4Controller {
    pub fn new(
        integral: Prop2Controller,
        shape_ell: SaturationShape,
        upsilon: Matrix,
        kl: Vec<f64>,
        rl: Vec<f64>,
        eta_star: Vec<f64>,
    ) -> Result<Self> {
        let m = integral.kappa.len();
        if shape_ell.len() != m {
            return Err(Error::Shape(format!("shape_ell has {} channels, expected {m}", shape_ell.len())));
        }
        check_len("K_ell", &kl, m)?;
        check_len("R_ell", &rl, m)?;
        check_positive("K_ell", &kl)?;
        check_positive("R_ell", &rl)?;
        if upsilon.rows() != m || upsilon.cols() != eta_star.len() {
            return Err(Error::Shape(format!(
                "Upsilon must be {m}x{}, got {}x{}",
                eta_star.len(),
                upsilon.rows(),
                upsilon.cols()
            )));
        }
        let sigma = numerics::singular_values(&upsilon);
        let tol = 1e-10 * sigma.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        let rank = sigma.iter().filter(|s| **s > tol).count();
        if rank < m.min(eta_star.len()) {
            return Err(Error::Config(format!("Upsilon has rank {rank}, needs {}", m.min(eta_star.len()))));
        }
        Ok(Self { integral, shape_ell, upsilon, kl, rl, eta_star, xl0: vec![0.0; m] })
    }

    pub fn z_ell(&self, eta: &[f64], xl: &[f64]) -> Vec<f64> {
        let mut z = self.upsilon.mul_vec(&diff(eta, &self.eta_star));
        z.iter_mut().zip(self.kl.iter().zip(xl)).for_each(|(a, (k, x))| *a += k * x);
        z
    }

    /// Per-channel `α_ℓ + α_c`.
    pub fn amplitude(&self) -> Vec<f64> {
        self.shape_ell.alpha.iter().zip(&self.integral.shape_c.alpha).map(|(a, b)| a + b).collect()
    }

    pub fn control(&self, gamma: &[f64], eta: &[f64], xc: &[f64], xl: &[f64]) -> Vec<f64> {
        let base = self.integral.control(gamma, xc);
        let sat = self.shape_ell.gradient(&self.z_ell(eta, xl));
        base.into_iter().zip(sat).map(|(u, s)| u - s).collect()
    }

    pub fn dynamics(&self, gamma: &[f64], eta: &[f64], xc: &[f64], xl: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let xc_dot = self.integral.dynamics(gamma, xc);
        let sat = self.shape_ell.gradient(&self.z_ell(eta, xl));
        let xl_dot = sat.iter().zip(&self.rl).map(|(s, r)| -r * s).collect();
        (xc_dot, xl_dot)
    }
}

/// Gravity-compensating law `u = ∇V(q) − φ_c'(q − q* + x_c)` for `G = I`.
#[derive(Clone)]
pub struct FullyActuatedController {
    pub shape_c: SaturationShape,
    pub q_star: Vec<f64>,
    pub kc: Matrix,
    pub rc: Matrix,
    pub xc0: Vec<f64>,
    grad_v: VectorMap,
    /// Componentwise bound on `|∇V|` over the operating region.
    pub grad_bound: Vec<f64>,
}

impl fmt::Debug for FullyActuatedController {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FullyActuatedController")
            .field("shape_c", &self.shape_c)
            .field("q_star", &self.q_star)
            .field("grad_bound", &self.grad_bound)
            .finish()
    }
}

impl FullyActuatedController {
    pub fn new(
        shape_c: SaturationShape,
        q_star: Vec<f64>,
        kc: Matrix,
        rc: Matrix,
        grad_v: VectorMap,
        grad_bound: Vec<f64>,
    ) -> Result<Self> {
        let n = shape_c.len();
        check_len("q_star", &q_star, n)?;
        check_len("gradient bound", &grad_bound, n)?;
        check_pd("K_c", &kc, n)?;
        check_pd("R_c", &rc, n)?;
        Ok(Self { shape_c, q_star, kc, rc, xc0: vec![0.0; n], grad_v, grad_bound })
    }

    pub fn gravity(&self, q: &[f64]) -> Vec<f64> {
        (self.grad_v)(q)
    }

    pub fn gravity_at_target(&self) -> Vec<f64> {
        self.gravity(&self.q_star)
    }

    pub fn z(&self, q: &[f64], xc: &[f64]) -> Vec<f64> {
        q.iter().zip(&self.q_star).zip(xc).map(|((a, b), x)| a - b + x).collect()
    }

    /// Saturated part `−φ_c'(z_c)` without gravity compensation.
    pub fn feedback(&self, q: &[f64], xc: &[f64]) -> Vec<f64> {
        self.shape_c.gradient(&self.z(q, xc)).into_iter().map(|s| -s).collect()
    }

    pub fn control(&self, q: &[f64], xc: &[f64]) -> Vec<f64> {
        let fb = self.feedback(q, xc);
        self.gravity(q).into_iter().zip(fb).map(|(g, s)| g + s).collect()
    }

    pub fn dynamics(&self, q: &[f64], xc: &[f64]) -> Vec<f64> {
        let mut inner = self.shape_c.gradient(&self.z(q, xc));
        inner.iter_mut().zip(self.kc.mul_vec(xc)).for_each(|(a, b)| *a += b);
        self.rc.mul_vec(&inner).into_iter().map(|v| -v).collect()
    }

    /// Largest componentwise excess of `|∇V(q)|` over the declared bound on `samples`.
    pub fn gradient_bound_excess(&self, samples: &[Vec<f64>]) -> f64 {
        samples
            .iter()
            .flat_map(|q| self.gravity(q).into_iter().zip(&self.grad_bound).map(|(g, b)| g.abs() - b))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Saturated integral action `ψ̇ = −R_ψψ + diag(α_ψβ_ψ sech(β_ψψ)) q̃`, `u_ψ = −α_ψ tanh(β_ψψ)`.
#[derive(Debug, Clone)]
pub struct FilterAugmentation {
    pub shape_psi: SaturationShape,
    /// Diagonal of `R_ψ`.
    pub rpsi: Vec<f64>,
    pub psi0: Vec<f64>,
}

impl FilterAugmentation {
    pub fn new(shape_psi: SaturationShape, rpsi: Vec<f64>) -> Result<Self> {
        let m = shape_psi.len();
        check_len("R_psi", &rpsi, m)?;
        check_positive("R_psi", &rpsi)?;
        Ok(Self { shape_psi, rpsi, psi0: vec![0.0; m] })
    }

    pub fn inputs(&self) -> usize {
        self.shape_psi.len()
    }

    /// `f_ψ(ψ) + Ψ(ψ) q_err`.
    pub fn dynamics(&self, psi: &[f64], q_err: &[f64]) -> Vec<f64> {
        let s = &self.shape_psi;
        (0..psi.len())
            .map(|i| {
                let gain = s.alpha[i] * s.beta[i] / (s.beta[i] * psi[i]).cosh();
                -self.rpsi[i] * psi[i] + gain * q_err[i]
            })
            .collect()
    }

    /// `u_ψ(ψ) = −α_ψ tanh(β_ψψ)`.
    pub fn control_term(&self, psi: &[f64]) -> Vec<f64> {
        self.shape_psi.gradient(psi).into_iter().map(|v| -v).collect()
    }
}

/// Base law underneath a [`FilterAugmentation`].
#[derive(Debug, Clone)]
pub enum FilterBase {
    FullyActuated(FullyActuatedController),
    Prop4(Prop4Controller),
}

impl FilterBase {
    pub fn inputs(&self) -> usize {
        match self {
            Self::FullyActuated(c) => c.q_star.len(),
            Self::Prop4(c) => c.integral.kappa.len(),
        }
    }
}
