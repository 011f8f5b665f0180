//! Dense linear algebra, finite differences, eigenvalues and fixed-step integration.

mod diff;
mod eigen;
mod matrix;
mod ode;

pub use diff::{default_eps, default_hessian_eps, fd_gradient, fd_hessian, fd_jacobian};
pub use eigen::{
    default_pd_tol, eigenpairs, eigenvalues, is_positive_definite, ldl_pivots, min_symmetric_eigenvalue,
    singular_values, symmetric_eigen, Spectrum,
};
pub use matrix::{dot, max_abs, norm, Lu, Matrix};
pub use ode::{integrate_fixed, rk4_step, time_grid, RawTrace};
