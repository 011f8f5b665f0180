//! Plant descriptions and the reductions between them.
//!
//! Every plant ends up as an [`InputAffineModel`] `ẋ = f(x) + g(x)u` carrying
//! optional passivity metadata. Mechanical systems are ordered `(q, p)` and
//! circuits `(i_L, v_C)`.

mod brayton_moser;
mod mechanical;

use std::fmt;
use std::sync::Arc;

pub use brayton_moser::{bm_integrability_residual, bm_ptilde, bm_qtilde, bm_to_affine, BraytonMoserModel};
pub use mechanical::{mech_to_affine, MechanicalModel};

use crate::numerics::{self, default_eps, default_hessian_eps, fd_gradient, fd_hessian, fd_jacobian, Matrix};
use crate::{Error, Result};

pub type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixMap = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
pub type OutputMap = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Mechanical structure kept on an affine model that came from [`mech_to_affine`].
#[derive(Clone)]
pub struct MechanicalInfo {
    pub dof: usize,
    /// Actuation selector `G`, `dof × m`.
    pub actuation: Matrix,
    pub potential: ScalarMap,
    pub potential_grad: VectorMap,
}

impl MechanicalInfo {
    pub fn positions<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.dof]
    }
}

/// Input-affine plant `ẋ = f(x) + g(x)u` with optional passivity metadata.
#[derive(Clone)]
pub struct InputAffineModel {
    name: String,
    n: usize,
    m: usize,
    drift: VectorMap,
    input: MatrixMap,
    storage: Option<ScalarMap>,
    storage_grad: Option<VectorMap>,
    dissipation: Option<VectorMap>,
    feedthrough: Option<MatrixMap>,
    skew: Option<MatrixMap>,
    gamma: Option<VectorMap>,
    gamma_jac: Option<MatrixMap>,
    eta: Option<VectorMap>,
    eta_jac: Option<MatrixMap>,
    lambda_ell: Option<MatrixMap>,
    lambda_c: Option<MatrixMap>,
    output: Option<OutputMap>,
    mechanical: Option<MechanicalInfo>,
}

impl fmt::Debug for InputAffineModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InputAffineModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("storage", &self.storage.is_some())
            .field("gamma", &self.gamma.is_some())
            .field("eta", &self.eta.is_some())
            .finish()
    }
}

impl InputAffineModel {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        m: usize,
        drift: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        input: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            n,
            m,
            drift: Arc::new(drift),
            input: Arc::new(input),
            storage: None,
            storage_grad: None,
            dissipation: None,
            feedthrough: None,
            skew: None,
            gamma: None,
            gamma_jac: None,
            eta: None,
            eta_jac: None,
            lambda_ell: None,
            lambda_c: None,
            output: None,
            mechanical: None,
        }
    }

    pub fn with_storage(mut self, s: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.storage = Some(Arc::new(s));
        self
    }

    pub fn with_storage_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.storage_grad = Some(Arc::new(g));
        self
    }

    /// Dissipation vector `ℓ(x)`.
    pub fn with_dissipation(mut self, ell: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.dissipation = Some(Arc::new(ell));
        self
    }

    /// Feedthrough dissipation matrix `w(x)`, `r × m`.
    pub fn with_feedthrough(mut self, w: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.feedthrough = Some(Arc::new(w));
        self
    }

    pub fn with_skew(mut self, d: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.skew = Some(Arc::new(d));
        self
    }

    pub fn with_gamma(mut self, gamma: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gamma = Some(Arc::new(gamma));
        self
    }

    /// Analytic `∇γ(x)`, `n × m`.
    pub fn with_gamma_jacobian(mut self, j: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.gamma_jac = Some(Arc::new(j));
        self
    }

    pub fn with_eta(mut self, eta: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.eta = Some(Arc::new(eta));
        self
    }

    /// Analytic `∇η(x)`, `n × s`.
    pub fn with_eta_jacobian(mut self, j: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.eta_jac = Some(Arc::new(j));
        self
    }

    pub fn with_weights(
        mut self,
        lambda_ell: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
        lambda_c: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.lambda_ell = Some(Arc::new(lambda_ell));
        self.lambda_c = Some(Arc::new(lambda_c));
        self
    }

    /// Replaces the default passive output formula by a closed-form `y(x, u)`.
    pub fn with_output(mut self, y: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.output = Some(Arc::new(y));
        self
    }

    pub fn with_mechanical(mut self, info: MechanicalInfo) -> Self {
        self.mechanical = Some(info);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mechanical(&self) -> Option<&MechanicalInfo> {
        self.mechanical.as_ref()
    }

    pub fn has_storage(&self) -> bool {
        self.storage.is_some()
    }

    pub fn has_gamma(&self) -> bool {
        self.gamma.is_some()
    }

    pub fn has_eta(&self) -> bool {
        self.eta.is_some()
    }

    pub fn has_dissipation(&self) -> bool {
        self.dissipation.is_some()
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    pub fn input_matrix(&self, x: &[f64]) -> Matrix {
        (self.input)(x)
    }

    /// `f(x) + g(x)u`.
    pub fn vector_field(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut dx = self.drift(x);
        let gu = self.input_matrix(x).mul_vec(u);
        dx.iter_mut().zip(gu).for_each(|(a, b)| *a += b);
        dx
    }

    pub fn storage(&self, x: &[f64]) -> Result<f64> {
        let s = self.storage.as_ref().ok_or_else(|| self.missing("storage S"))?;
        Ok(s(x))
    }

    pub fn storage_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(g) = &self.storage_grad {
            return Ok(g(x));
        }
        let s = self.storage.as_ref().ok_or_else(|| self.missing("storage S"))?;
        fd_gradient(&|z: &[f64]| s(z), x, default_eps(x))
    }

    /// Hessian of `S`, from the registered gradient when available.
    pub fn storage_hessian(&self, x: &[f64]) -> Result<Matrix> {
        if let Some(g) = &self.storage_grad {
            return Ok(fd_jacobian(&|z: &[f64]| g(z), x, default_eps(x))?.symmetrize());
        }
        let s = self.storage.as_ref().ok_or_else(|| self.missing("storage S"))?;
        fd_hessian(&|z: &[f64]| s(z), x, default_hessian_eps(x))
    }

    pub fn dissipation(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ell = self.dissipation.as_ref().ok_or_else(|| self.missing("dissipation ell"))?;
        Ok(ell(x))
    }

    /// `w(x)`; zero of shape `r × m` when not supplied.
    pub fn feedthrough(&self, x: &[f64]) -> Result<Matrix> {
        match &self.feedthrough {
            Some(w) => Ok(w(x)),
            None => Ok(Matrix::zeros(self.dissipation(x)?.len(), self.m)),
        }
    }

    pub fn skew(&self, x: &[f64]) -> Matrix {
        self.skew.as_ref().map_or_else(|| Matrix::zeros(self.m, self.m), |d| d(x))
    }

    pub fn has_feedthrough(&self) -> bool {
        self.feedthrough.is_some() || self.skew.is_some()
    }

    pub fn gamma(&self, x: &[f64]) -> Result<Vec<f64>> {
        let gamma = self.gamma.as_ref().ok_or_else(|| self.missing("gamma"))?;
        Ok(gamma(x))
    }

    /// `∇γ(x)`, `n × m`.
    pub fn gamma_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        if let Some(j) = &self.gamma_jac {
            return Ok(j(x));
        }
        let gamma = self.gamma.as_ref().ok_or_else(|| self.missing("gamma"))?;
        Ok(fd_jacobian(&|z: &[f64]| gamma(z), x, default_eps(x))?.transpose())
    }

    /// Hessian of `γ(x)ᵀκ` for a fixed `κ`.
    pub fn gamma_kappa_hessian(&self, x: &[f64], kappa: &[f64]) -> Result<Matrix> {
        if let Some(j) = &self.gamma_jac {
            let map = |z: &[f64]| j(z).mul_vec(kappa);
            return Ok(fd_jacobian(&map, x, default_eps(x))?.symmetrize());
        }
        let gamma = self.gamma.as_ref().ok_or_else(|| self.missing("gamma"))?;
        let scalar = |z: &[f64]| numerics::dot(&gamma(z), kappa);
        fd_hessian(&scalar, x, default_hessian_eps(x))
    }

    pub fn eta(&self, x: &[f64]) -> Result<Vec<f64>> {
        let eta = self.eta.as_ref().ok_or_else(|| self.missing("eta"))?;
        Ok(eta(x))
    }

    /// `∇η(x)`, `n × s`.
    pub fn eta_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        if let Some(j) = &self.eta_jac {
            return Ok(j(x));
        }
        let eta = self.eta.as_ref().ok_or_else(|| self.missing("eta"))?;
        Ok(fd_jacobian(&|z: &[f64]| eta(z), x, default_eps(x))?.transpose())
    }

    pub fn lambda_ell(&self, x: &[f64]) -> Result<Matrix> {
        let l = self.lambda_ell.as_ref().ok_or_else(|| self.missing("Lambda_ell"))?;
        Ok(l(x))
    }

    pub fn lambda_c(&self, x: &[f64]) -> Result<Matrix> {
        let l = self.lambda_c.as_ref().ok_or_else(|| self.missing("Lambda_c"))?;
        Ok(l(x))
    }

    /// Smallest singular value of `g(x)`; errors when it is not above `1e-10`.
    pub fn check_input_rank(&self, x: &[f64]) -> Result<f64> {
        let g = self.input_matrix(x);
        let sigma_min = numerics::singular_values(&g).last().copied().unwrap_or(0.0);
        if g.cols() != self.m || sigma_min <= 1e-10 {
            return Err(Error::Rank { sigma_min });
        }
        Ok(sigma_min)
    }

    /// Asymmetry `max|D + Dᵀ|` of the skew term at `x`.
    pub fn skew_defect(&self, x: &[f64]) -> f64 {
        let d = self.skew(x);
        (&d + &d.transpose()).max_abs()
    }

    fn missing(&self, what: &str) -> Error {
        Error::Metadata(format!("model '{}' does not supply {what}", self.name))
    }
}

/// `‖(I − g(gᵀg)⁻¹gᵀ) f(x*)‖`, zero exactly on the assignable-equilibrium set.
pub fn equilibrium_residual(model: &InputAffineModel, x_star: &[f64]) -> Result<f64> {
    model.check_input_rank(x_star)?;
    let f = model.drift(x_star);
    let g = model.input_matrix(x_star);
    let coeffs = least_squares(&g, &f)?;
    let proj = g.mul_vec(&coeffs);
    Ok(numerics::norm(&f.iter().zip(&proj).map(|(a, b)| a - b).collect::<Vec<_>>()))
}

/// Constant input `κ = (gᵀg)⁻¹gᵀf` at an assignable equilibrium.
pub fn kappa(model: &InputAffineModel, x_star: &[f64]) -> Result<Vec<f64>> {
    let residual = equilibrium_residual(model, x_star)?;
    if residual > 1e-8 {
        return Err(Error::NotAssignable { residual });
    }
    least_squares(&model.input_matrix(x_star), &model.drift(x_star))
}

fn least_squares(g: &Matrix, f: &[f64]) -> Result<Vec<f64>> {
    let gtg = &g.transpose() * g;
    gtg.solve(&g.tr_mul_vec(f))
}

/// Passive output `y = gᵀ∇S + 2wᵀℓ + (wᵀw + D)u`, or the registered closed form.
pub fn passive_output(model: &InputAffineModel, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    if let Some(y) = &model.output {
        return Ok(y(x, u));
    }
    let grad = model.storage_gradient(x)?;
    let mut y = model.input_matrix(x).tr_mul_vec(&grad);
    if model.feedthrough.is_some() {
        let w = model.feedthrough(x)?;
        let ell = model.dissipation(x)?;
        let wl = w.tr_mul_vec(&ell);
        let wtw = &w.transpose() * &w;
        let wu = wtw.mul_vec(u);
        for i in 0..y.len() {
            y[i] += 2.0 * wl[i] + wu[i];
        }
    }
    if model.skew.is_some() {
        let du = model.skew(x).mul_vec(u);
        y.iter_mut().zip(du).for_each(|(a, b)| *a += b);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrator_chain() -> InputAffineModel {
        InputAffineModel::new(
            "chain",
            2,
            1,
            |x| vec![x[1] - x[0], 0.0],
            |_| Matrix::from_rows(&[vec![0.0], vec![1.0]]),
        )
        .with_storage(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]))
    }

    #[test]
    fn equilibrium_residual_uses_orthogonal_projection() {
        let m = integrator_chain();
        assert_eq!(equilibrium_residual(&m, &[1.0, 1.0]).unwrap(), 0.0);
        assert!((equilibrium_residual(&m, &[0.0, 2.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(kappa(&m, &[0.0, 2.0]), Err(Error::NotAssignable { .. })));
        assert_eq!(kappa(&m, &[1.0, 1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn rank_deficient_input_is_rejected() {
        let m = InputAffineModel::new("flat", 2, 1, |_| vec![0.0, 0.0], |_| Matrix::zeros(2, 1));
        assert!(matches!(equilibrium_residual(&m, &[0.0, 0.0]), Err(Error::Rank { .. })));
    }

    #[test]
    fn output_without_feedthrough_ignores_input() {
        let m = integrator_chain();
        let y0 = passive_output(&m, &[0.3, -0.7], &[0.0]).unwrap();
        let y1 = passive_output(&m, &[0.3, -0.7], &[5.0]).unwrap();
        assert_eq!(y0, y1);
        assert!((y0[0] + 0.7).abs() < 1e-9);
    }

    #[test]
    fn output_requires_storage() {
        let m = InputAffineModel::new("bare", 1, 1, |_| vec![0.0], |_| Matrix::identity(1));
        assert!(matches!(passive_output(&m, &[0.0], &[0.0]), Err(Error::Metadata(_))));
    }
}
