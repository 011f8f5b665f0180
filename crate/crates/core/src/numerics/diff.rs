use super::Matrix;
use crate::{Error, Result};

/// Default central-difference step, `1e-6 * max(1, |x|)`.
pub fn default_eps(x: &[f64]) -> f64 {
    1e-6 * super::norm(x).max(1.0)
}

/// Default step for second differences, `1e-4 * max(1, |x|)`.
pub fn default_hessian_eps(x: &[f64]) -> f64 {
    1e-4 * super::norm(x).max(1.0)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("finite-difference step must be positive, got {eps}")))
    }
}

fn eval_scalar(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation { point: x.to_vec() })
    }
}

fn eval_vector(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Result<Vec<f64>> {
    let v = f(x);
    if v.iter().all(|e| e.is_finite()) {
        Ok(v)
    } else {
        Err(Error::Evaluation { point: x.to_vec() })
    }
}

/// Central-difference gradient.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_eps(eps)?;
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let up = eval_scalar(f, &probe)?;
        probe[i] = x[i] - eps;
        let down = eval_scalar(f, &probe)?;
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}

/// Symmetrized matrix of second central differences.
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Result<Matrix> {
    check_eps(eps)?;
    let n = x.len();
    let mut h = Matrix::zeros(n, n);
    let mut probe = x.to_vec();
    let centre = eval_scalar(f, x)?;
    for i in 0..n {
        probe[i] = x[i] + eps;
        let up = eval_scalar(f, &probe)?;
        probe[i] = x[i] - eps;
        let down = eval_scalar(f, &probe)?;
        probe[i] = x[i];
        h[(i, i)] = (up - 2.0 * centre + down) / (eps * eps);
        for j in (i + 1)..n {
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                probe[i] = x[i] + si * eps;
                probe[j] = x[j] + sj * eps;
                let v = eval_scalar(f, &probe);
                probe[i] = x[i];
                probe[j] = x[j];
                v
            };
            let pp = corner(1.0, 1.0)?;
            let pm = corner(1.0, -1.0)?;
            let mp = corner(-1.0, 1.0)?;
            let mm = corner(-1.0, -1.0)?;
            let v = (pp - pm - mp + mm) / (4.0 * eps * eps);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h.symmetrize())
}

/// Central-difference Jacobian of a vector map; row `i` holds the partials of output `i`.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], eps: f64) -> Result<Matrix> {
    check_eps(eps)?;
    let n = x.len();
    let m = eval_vector(f, x)?.len();
    let mut jac = Matrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + eps;
        let up = eval_vector(f, &probe)?;
        probe[j] = x[j] - eps;
        let down = eval_vector(f, &probe)?;
        probe[j] = x[j];
        if up.len() != m || down.len() != m {
            return Err(Error::Shape("vector map changed output length".into()));
        }
        for i in 0..m {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * eps);
        }
    }
    Ok(jac)
}
