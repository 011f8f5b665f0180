use std::sync::Arc;

use super::{InputAffineModel, MatrixMap, MechanicalInfo, ScalarMap, VectorMap};
use crate::numerics::{default_eps, fd_gradient, Matrix};
use crate::{Error, Result};

type PartialsMap = Arc<dyn Fn(&[f64]) -> Vec<Matrix> + Send + Sync>;

/// Port-Hamiltonian mechanical system with `H(q, p) = ½pᵀM(q)⁻¹p + V(q)`.
#[derive(Clone)]
pub struct MechanicalModel {
    pub name: String,
    pub dof: usize,
    inertia: MatrixMap,
    inertia_partials: Option<PartialsMap>,
    potential: ScalarMap,
    potential_grad: Option<VectorMap>,
    damping: Option<VectorMap>,
    /// Actuation selector `G`, `dof × m`.
    pub actuation: Matrix,
}

impl MechanicalModel {
    pub fn new(
        name: impl Into<String>,
        dof: usize,
        inertia: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
        potential: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        actuation: Matrix,
    ) -> Self {
        Self {
            name: name.into(),
            dof,
            inertia: Arc::new(inertia),
            inertia_partials: None,
            potential: Arc::new(potential),
            potential_grad: None,
            damping: None,
            actuation,
        }
    }

    /// Analytic `∂M/∂q_i`, one matrix per coordinate.
    pub fn with_inertia_partials(mut self, d: impl Fn(&[f64]) -> Vec<Matrix> + Send + Sync + 'static) -> Self {
        self.inertia_partials = Some(Arc::new(d));
        self
    }

    pub fn with_potential_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.potential_grad = Some(Arc::new(g));
        self
    }

    /// Diagonal of the damping matrix as a function of `(q, p)`.
    pub fn with_damping(mut self, d: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.damping = Some(Arc::new(d));
        self
    }

    pub fn inertia(&self, q: &[f64]) -> Matrix {
        (self.inertia)(q)
    }

    pub fn potential(&self, q: &[f64]) -> f64 {
        (self.potential)(q)
    }

    pub fn potential_gradient(&self, q: &[f64]) -> Vec<f64> {
        match &self.potential_grad {
            Some(g) => g(q),
            None => {
                let v = self.potential.clone();
                fd_gradient(&|z: &[f64]| v(z), q, default_eps(q)).unwrap_or_else(|_| vec![f64::NAN; q.len()])
            }
        }
    }

    pub fn damping(&self, x: &[f64]) -> Vec<f64> {
        self.damping.as_ref().map_or_else(|| vec![0.0; self.dof], |d| d(x))
    }

    pub fn hamiltonian(&self, x: &[f64]) -> f64 {
        let (q, p) = x.split_at(self.dof);
        let v = self.inertia(q).solve(p).unwrap_or_else(|_| vec![f64::NAN; self.dof]);
        0.5 * crate::numerics::dot(p, &v) + self.potential(q)
    }

    /// Rows of `G` that carry an actuator.
    pub fn actuated_rows(&self) -> Vec<usize> {
        (0..self.dof).filter(|&i| self.actuation.row(i).iter().any(|v| *v != 0.0)).collect()
    }

    /// Checks the structural invariants at a sample configuration.
    pub fn validate(&self, q: &[f64]) -> Result<()> {
        if self.actuation.rows() != self.dof {
            return Err(Error::Shape(format!(
                "actuation has {} rows, expected {}",
                self.actuation.rows(),
                self.dof
            )));
        }
        let m = self.inertia(q);
        if !crate::numerics::is_positive_definite(&m, 1e-12 * m.max_abs().max(1.0))? {
            return Err(Error::Assumption(format!("inertia matrix of '{}' is not positive definite", self.name)));
        }
        let x: Vec<f64> = q.iter().copied().chain(std::iter::repeat(0.0).take(self.dof)).collect();
        if self.damping(&x).iter().any(|d| *d < 0.0) {
            return Err(Error::Assumption("negative damping entry".into()));
        }
        Ok(())
    }

    fn damping_pattern(&self) -> Vec<bool> {
        let n = self.dof;
        let rest = vec![0.0; 2 * n];
        let moving: Vec<f64> = (0..2 * n).map(|i| if i < n { 0.0 } else { 1.0 }).collect();
        let a = self.damping(&rest);
        let b = self.damping(&moving);
        (0..n).map(|i| a[i] != 0.0 || b[i] != 0.0).collect()
    }
}

/// Velocity `M⁻¹p` and `∇_q H` at `x = (q, p)`.
fn velocity_and_force(mech: &MechanicalModel, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = mech.dof;
    let (q, p) = x.split_at(n);
    let inertia = mech.inertia(q);
    let v = inertia.solve(p).unwrap_or_else(|_| vec![f64::NAN; n]);
    let mut dq = mech.potential_gradient(q);
    match &mech.inertia_partials {
        Some(partials) => {
            for (i, dm) in partials(q).iter().enumerate() {
                dq[i] -= 0.5 * crate::numerics::dot(&v, &dm.mul_vec(&v));
            }
        }
        None => {
            let inertia_fn = mech.inertia.clone();
            let kinetic = |z: &[f64]| {
                let w = inertia_fn(z).solve(p).unwrap_or_else(|_| vec![f64::NAN; n]);
                0.5 * crate::numerics::dot(p, &w)
            };
            let grad = fd_gradient(&kinetic, q, default_eps(q)).unwrap_or_else(|_| vec![f64::NAN; n]);
            dq.iter_mut().zip(grad).for_each(|(a, b)| *a += b);
        }
    }
    (v, dq)
}

/// Affine form with `x = (q, p)`, `S = H`, `γ = Gᵀq` and output `GᵀM⁻¹p`.
///
/// When some unactuated coordinate carries damping, `η` collects those
/// positions with `Λ_ℓ` their damping and `Λ_c` the actuated damping.
pub fn mech_to_affine(mech: &MechanicalModel) -> Result<InputAffineModel> {
    let n = mech.dof;
    let g_act = mech.actuation.clone();
    let m = g_act.cols();
    if g_act.rows() != n {
        return Err(Error::Shape(format!("actuation has {} rows, expected {n}", g_act.rows())));
    }
    let actuated = mech.actuated_rows();
    let pattern = mech.damping_pattern();
    let damped_free: Vec<usize> = (0..n).filter(|i| !actuated.contains(i) && pattern[*i]).collect();

    let mech_f = mech.clone();
    let drift = move |x: &[f64]| {
        let (v, dq) = velocity_and_force(&mech_f, x);
        let d = mech_f.damping(x);
        let mut out = v.clone();
        out.extend((0..n).map(|i| -dq[i] - d[i] * v[i]));
        out
    };
    let g_in = g_act.clone();
    let input = move |_: &[f64]| {
        let mut g = Matrix::zeros(2 * n, m);
        g.set_block(n, 0, &g_in);
        g
    };
    let mech_s = mech.clone();
    let mech_grad = mech.clone();
    let mech_ell = mech.clone();
    let g_gamma = g_act.clone();
    let g_jac = g_act.clone();
    let mech_pg = mech.clone();
    let mech_pot = mech.clone();

    let mut model = InputAffineModel::new(mech.name.clone(), 2 * n, m, drift, input)
        .with_storage(move |x| mech_s.hamiltonian(x))
        .with_storage_gradient(move |x| {
            let (v, dq) = velocity_and_force(&mech_grad, x);
            dq.into_iter().chain(v).collect()
        })
        .with_dissipation(move |x| {
            let (v, _) = velocity_and_force(&mech_ell, x);
            let d = mech_ell.damping(x);
            v.iter().zip(d).map(|(vi, di)| di.max(0.0).sqrt() * vi).collect()
        })
        .with_gamma(move |x| g_gamma.tr_mul_vec(&x[..n]))
        .with_gamma_jacobian(move |_| {
            let mut j = Matrix::zeros(2 * n, m);
            j.set_block(0, 0, &g_jac);
            j
        })
        .with_mechanical(MechanicalInfo {
            dof: n,
            actuation: g_act.clone(),
            potential: Arc::new(move |q| mech_pot.potential(q)),
            potential_grad: Arc::new(move |q| mech_pg.potential_gradient(q)),
        });

    if !damped_free.is_empty() {
        if actuated.iter().any(|i| !pattern[*i]) {
            return Err(Error::Assumption(format!(
                "'{}' has undamped actuated coordinates, so the actuated damping block is singular",
                mech.name
            )));
        }
        let s = damped_free.len();
        let idx = damped_free.clone();
        let idx_j = damped_free.clone();
        let idx_l = damped_free.clone();
        let act = actuated.clone();
        let mech_l = mech.clone();
        let mech_c = mech.clone();
        model = model
            .with_eta(move |x| idx.iter().map(|&i| x[i]).collect())
            .with_eta_jacobian(move |_| {
                let mut j = Matrix::zeros(2 * n, s);
                for (c, &i) in idx_j.iter().enumerate() {
                    j[(i, c)] = 1.0;
                }
                j
            })
            .with_weights(
                move |x| {
                    let d = mech_l.damping(x);
                    Matrix::from_diag(&idx_l.iter().map(|&i| d[i]).collect::<Vec<_>>())
                },
                move |x| {
                    let d = mech_c.damping(x);
                    Matrix::from_diag(&act.iter().map(|&i| d[i]).collect::<Vec<_>>())
                },
            );
    }
    Ok(model)
}
