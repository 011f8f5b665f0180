use std::sync::Arc;

use super::{InputAffineModel, MatrixMap, VectorMap};
use crate::numerics::{self, default_eps, fd_jacobian, Matrix};
use crate::{Error, Result};

/// Topologically complete RLC network in Brayton–Moser form `Qẋ = ∇P + g̃u`.
///
/// The state is `(i_L, v_C)` and the mixed potential is
/// `P = i_LᵀΓv_C + P_R(i_L) − P_G(v_C)`.
#[derive(Clone)]
pub struct BraytonMoserModel {
    pub name: String,
    /// Inductances, `ς × ς`.
    pub inductance: Matrix,
    /// Capacitances, `ϖ × ϖ`.
    pub capacitance: Matrix,
    /// Interconnection `Γ`, `ς × ϖ`.
    pub interconnection: Matrix,
    resistor_voltage: VectorMap,
    resistor_jacobian: Option<MatrixMap>,
    conductor_current: VectorMap,
    conductor_jacobian: Option<MatrixMap>,
    /// Source routing into inductor branches, `ς × m_ς`.
    pub source_l: Matrix,
    /// Source routing into capacitor nodes, `ϖ × m_ϖ`.
    pub source_c: Matrix,
}

impl BraytonMoserModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        inductance: Matrix,
        capacitance: Matrix,
        interconnection: Matrix,
        resistor_voltage: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        conductor_current: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        source_l: Matrix,
        source_c: Matrix,
    ) -> Result<Self> {
        let (ls, cs) = (inductance.rows(), capacitance.rows());
        let shapes_ok = inductance.is_square()
            && capacitance.is_square()
            && interconnection.rows() == ls
            && interconnection.cols() == cs
            && source_l.rows() == ls
            && source_c.rows() == cs;
        if !shapes_ok {
            return Err(Error::Shape("inconsistent Brayton–Moser block sizes".into()));
        }
        if interconnection.as_slice().iter().any(|v| ![-1.0, 0.0, 1.0].contains(v)) {
            return Err(Error::Config("interconnection entries must be -1, 0 or 1".into()));
        }
        for (label, mat) in [("inductance", &inductance), ("capacitance", &capacitance)] {
            if mat.rows() > 0 && !numerics::is_positive_definite(mat, 1e-14 * mat.max_abs())? {
                return Err(Error::Config(format!("{label} matrix must be positive definite")));
            }
        }
        Ok(Self {
            name: name.into(),
            inductance,
            capacitance,
            interconnection,
            resistor_voltage: Arc::new(resistor_voltage),
            resistor_jacobian: None,
            conductor_current: Arc::new(conductor_current),
            conductor_jacobian: None,
            source_l,
            source_c,
        })
    }

    pub fn with_resistor_jacobian(mut self, j: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.resistor_jacobian = Some(Arc::new(j));
        self
    }

    pub fn with_conductor_jacobian(mut self, j: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.conductor_jacobian = Some(Arc::new(j));
        self
    }

    pub fn inductors(&self) -> usize {
        self.inductance.rows()
    }

    pub fn capacitors(&self) -> usize {
        self.capacitance.rows()
    }

    pub fn n(&self) -> usize {
        self.inductors() + self.capacitors()
    }

    pub fn m(&self) -> usize {
        self.source_l.cols() + self.source_c.cols()
    }

    pub fn resistor_voltage(&self, i: &[f64]) -> Vec<f64> {
        (self.resistor_voltage)(i)
    }

    pub fn conductor_current(&self, v: &[f64]) -> Vec<f64> {
        (self.conductor_current)(v)
    }

    fn resistor_jac(&self, i: &[f64]) -> Result<Matrix> {
        match &self.resistor_jacobian {
            Some(j) => Ok(j(i)),
            None if i.is_empty() => Ok(Matrix::zeros(0, 0)),
            None => fd_jacobian(&|z: &[f64]| (self.resistor_voltage)(z), i, default_eps(i)),
        }
    }

    fn conductor_jac(&self, v: &[f64]) -> Result<Matrix> {
        match &self.conductor_jacobian {
            Some(j) => Ok(j(v)),
            None if v.is_empty() => Ok(Matrix::zeros(0, 0)),
            None => fd_jacobian(&|z: &[f64]| (self.conductor_current)(z), v, default_eps(v)),
        }
    }

    /// `Q = blockdiag(−L, C)`.
    pub fn q_matrix(&self) -> Matrix {
        let mut q = Matrix::zeros(self.n(), self.n());
        q.set_block(0, 0, &self.inductance.scale(-1.0));
        q.set_block(self.inductors(), self.inductors(), &self.capacitance);
        q
    }

    /// `Ξ = blockdiag(L⁻¹, C⁻¹)`.
    pub fn xi_matrix(&self) -> Result<Matrix> {
        let mut xi = Matrix::zeros(self.n(), self.n());
        if self.inductors() > 0 {
            xi.set_block(0, 0, &self.inductance.inverse()?);
        }
        if self.capacitors() > 0 {
            xi.set_block(self.inductors(), self.inductors(), &self.capacitance.inverse()?);
        }
        Ok(xi)
    }

    /// `g̃ = blockdiag(g̃_L, g̃_C)`.
    pub fn source_matrix(&self) -> Matrix {
        let mut g = Matrix::zeros(self.n(), self.m());
        g.set_block(0, 0, &self.source_l);
        g.set_block(self.inductors(), self.source_l.cols(), &self.source_c);
        g
    }

    /// `∇P(x) = (Γv_C + v_R(i_L), Γᵀi_L − i_G(v_C))`.
    pub fn potential_gradient(&self, x: &[f64]) -> Vec<f64> {
        let (i, v) = x.split_at(self.inductors());
        let mut top = self.interconnection.mul_vec(v);
        top.iter_mut().zip(self.resistor_voltage(i)).for_each(|(a, b)| *a += b);
        let mut bottom = self.interconnection.tr_mul_vec(i);
        bottom.iter_mut().zip(self.conductor_current(v)).for_each(|(a, b)| *a -= b);
        top.into_iter().chain(bottom).collect()
    }

    /// `∇²P(x) = [[∇v_R, Γ], [Γᵀ, −∇i_G]]`.
    pub fn potential_hessian(&self, x: &[f64]) -> Result<Matrix> {
        let ls = self.inductors();
        let (i, v) = x.split_at(ls);
        let mut h = Matrix::zeros(self.n(), self.n());
        h.set_block(0, 0, &self.resistor_jac(i)?);
        h.set_block(0, ls, &self.interconnection);
        h.set_block(ls, 0, &self.interconnection.transpose());
        h.set_block(ls, ls, &self.conductor_jac(v)?.scale(-1.0));
        Ok(h)
    }

    /// Errors unless the smallest singular value of `∇²P(x)` exceeds `1e-10`.
    pub fn check_hessian_rank(&self, x: &[f64]) -> Result<()> {
        let h = self.potential_hessian(x)?;
        let sigma_min = numerics::singular_values(&h).last().copied().unwrap_or(0.0);
        if sigma_min <= 1e-10 {
            return Err(Error::DegenerateNetwork(format!(
                "mixed-potential Hessian of '{}' is singular (sigma_min {sigma_min:e})",
                self.name
            )));
        }
        Ok(())
    }

    /// Block form `[[−∇v_R, Γ], [−Γᵀ, −∇i_G]]` of `Q̃`.
    pub fn qtilde_blocks(&self, x: &[f64]) -> Result<Matrix> {
        let ls = self.inductors();
        let (i, v) = x.split_at(ls);
        let mut q = Matrix::zeros(self.n(), self.n());
        q.set_block(0, 0, &self.resistor_jac(i)?.scale(-1.0));
        q.set_block(0, ls, &self.interconnection);
        q.set_block(ls, 0, &self.interconnection.transpose().scale(-1.0));
        q.set_block(ls, ls, &self.conductor_jac(v)?.scale(-1.0));
        Ok(q)
    }

    /// Monotonicity samples `i_Lᵀv_R(i_L) ≥ 0` and `v_Cᵀi_G(v_C) ≥ 0`; returns the worst value.
    pub fn monotonicity_margin(&self, samples: &[Vec<f64>]) -> f64 {
        samples
            .iter()
            .map(|x| {
                let (i, v) = x.split_at(self.inductors());
                let a = numerics::dot(i, &self.resistor_voltage(i));
                let b = numerics::dot(v, &self.conductor_current(v));
                a.min(b)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `Q̃ = ∇²P·Ξ·Q`.
pub fn bm_qtilde(bm: &BraytonMoserModel, x: &[f64]) -> Result<Matrix> {
    let h = bm.potential_hessian(x)?;
    Ok(&(&h * &bm.xi_matrix()?) * &bm.q_matrix())
}

/// `P̃ = ½∇PᵀΞ∇P`.
pub fn bm_ptilde(bm: &BraytonMoserModel, x: &[f64]) -> Result<f64> {
    let grad = bm.potential_gradient(x);
    Ok(0.5 * numerics::dot(&grad, &bm.xi_matrix()?.mul_vec(&grad)))
}

/// Largest asymmetry of the Jacobians of `x ↦ Q̃(x)g_k` over the input columns.
pub fn bm_integrability_residual(bm: &BraytonMoserModel, x: &[f64]) -> Result<f64> {
    let g = bm.q_matrix().inverse()?;
    let g = &g * &bm.source_matrix();
    let mut worst = 0.0_f64;
    for k in 0..g.cols() {
        let col = g.col(k);
        let map = |z: &[f64]| bm_qtilde(bm, z).map(|q| q.mul_vec(&col)).unwrap_or_else(|_| vec![f64::NAN; z.len()]);
        let jac = fd_jacobian(&map, x, default_eps(x))?;
        worst = worst.max((&jac - &jac.transpose()).max_abs());
    }
    Ok(worst)
}

/// Affine form `f = Q⁻¹∇P`, `g = Q⁻¹g̃`, `S = P̃`, `y = −gᵀQ̃ᵀẋ`.
///
/// The dissipation vector factors `−sym(Q̃)` so that `∇P̃ᵀf = −‖ℓ‖²`.
pub fn bm_to_affine(bm: &BraytonMoserModel) -> Result<InputAffineModel> {
    let n = bm.n();
    bm.check_hessian_rank(&vec![0.0; n])?;
    let q_inv = bm.q_matrix().inverse()?;
    let xi = bm.xi_matrix()?;
    let g = &q_inv * &bm.source_matrix();
    let m = g.cols();

    let (bm_f, q_inv_f) = (bm.clone(), q_inv.clone());
    let drift = move |x: &[f64]| q_inv_f.mul_vec(&bm_f.potential_gradient(x));
    let g_in = g.clone();
    let (bm_s, bm_gs, xi_gs) = (bm.clone(), bm.clone(), xi.clone());
    let (bm_l, q_inv_l) = (bm.clone(), q_inv.clone());
    let (bm_y, q_inv_y, g_y) = (bm.clone(), q_inv, g.clone());

    Ok(InputAffineModel::new(bm.name.clone(), n, m, drift, move |_| g_in.clone())
        .with_storage(move |x| bm_ptilde(&bm_s, x).unwrap_or(f64::NAN))
        .with_storage_gradient(move |x| match bm_gs.potential_hessian(x) {
            Ok(h) => h.mul_vec(&xi_gs.mul_vec(&bm_gs.potential_gradient(x))),
            Err(_) => vec![f64::NAN; x.len()],
        })
        .with_dissipation(move |x| {
            let f = q_inv_l.mul_vec(&bm_l.potential_gradient(x));
            match bm_qtilde(&bm_l, x).and_then(|q| numerics::symmetric_eigen(&q.symmetrize().scale(-1.0))) {
                Ok((vals, vecs)) => {
                    let proj = vecs.tr_mul_vec(&f);
                    vals.iter().zip(proj).map(|(l, p)| l.max(0.0).sqrt() * p).collect()
                }
                Err(_) => vec![f64::NAN; x.len()],
            }
        })
        .with_output(move |x, u| {
            let mut dx = q_inv_y.mul_vec(&bm_y.potential_gradient(x));
            dx.iter_mut().zip(g_y.mul_vec(u)).for_each(|(a, b)| *a += b);
            match bm_qtilde(&bm_y, x) {
                Ok(q) => {
                    let qdx = q.tr_mul_vec(&dx);
                    g_y.tr_mul_vec(&qdx).into_iter().map(|v| -v).collect()
                }
                Err(_) => vec![f64::NAN; m],
            }
        }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_resistive_network_block_form() {
        let r = 3.0;
        let bm = BraytonMoserModel::new(
            "resistive",
            Matrix::identity(1),
            Matrix::identity(1),
            Matrix::zeros(1, 1),
            move |i| vec![r * i[0]],
            |_| vec![0.0],
            Matrix::identity(1),
            Matrix::zeros(1, 0),
        )
        .unwrap();
        let q = bm_qtilde(&bm, &[0.4, -0.2]).unwrap();
        let expect = Matrix::from_diag(&[-r, 0.0]);
        assert!((&q - &expect).max_abs() < 1e-8);
        assert!(matches!(bm.check_hessian_rank(&[0.0, 0.0]), Err(Error::DegenerateNetwork(_))));
    }

    #[test]
    fn rejects_non_incidence_interconnection() {
        let bad = BraytonMoserModel::new(
            "bad",
            Matrix::identity(1),
            Matrix::identity(1),
            Matrix::from_rows(&[vec![2.0]]),
            |i| i.to_vec(),
            |v| v.to_vec(),
            Matrix::identity(1),
            Matrix::zeros(1, 0),
        );
        assert!(matches!(bad, Err(Error::Config(_))));
    }
}
