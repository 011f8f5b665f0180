use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::{Error, Result};

/// Eigenvalues of a square matrix together with the spectral abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
}

impl Spectrum {
    fn new(eigenvalues: Vec<Complex64>) -> Self {
        let max_real_part = eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        Self { eigenvalues, max_real_part }
    }
}

/// Default pivot tolerance for [`is_positive_definite`], `1e-10 * max|A|`.
pub fn default_pd_tol(a: &Matrix) -> f64 {
    1e-10 * a.max_abs()
}

/// Pivots of the unpivoted `LDLᵀ` factorization, stopping after the first pivot `<= tol`.
pub fn ldl_pivots(a: &Matrix, tol: f64) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Shape(format!("definiteness test on a {}x{} matrix", a.rows(), a.cols())));
    }
    let asym = a.asymmetry();
    if asym > tol.max(0.0) {
        return Err(Error::Shape(format!("matrix is not symmetric (asymmetry {asym:e})")));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    let mut d = Vec::with_capacity(n);
    for k in 0..n {
        let mut pivot = a[(k, k)];
        for j in 0..k {
            pivot -= l[(k, j)] * l[(k, j)] * d[j];
        }
        d.push(pivot);
        if pivot <= tol || !pivot.is_finite() {
            return Ok(d);
        }
        l[(k, k)] = 1.0;
        for i in (k + 1)..n {
            let mut v = a[(i, k)];
            for j in 0..k {
                v -= l[(i, j)] * l[(k, j)] * d[j];
            }
            l[(i, k)] = v / pivot;
        }
    }
    Ok(d)
}

/// True iff every `LDLᵀ` pivot exceeds `tol`.
pub fn is_positive_definite(a: &Matrix, tol: f64) -> Result<bool> {
    let pivots = ldl_pivots(a, tol)?;
    Ok(pivots.len() == a.rows() && pivots.iter().all(|p| *p > tol))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching unit eigenvectors as columns.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !a.is_square() {
        return Err(Error::Shape("symmetric eigen-decomposition needs a square matrix".into()));
    }
    let n = a.rows();
    let mut s = a.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = s.max_abs();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += s[(p, q)] * s[(p, q)];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| s[(i, i)].total_cmp(&s[(j, j)]));
            let values = order.iter().map(|&i| s[(i, i)]).collect();
            let mut vecs = Matrix::zeros(n, n);
            for (c, &i) in order.iter().enumerate() {
                for r in 0..n {
                    vecs[(r, c)] = v[(r, i)];
                }
            }
            return Ok((values, vecs));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = s[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (s[(q, q)] - s[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let skp = s[(k, p)];
                    let skq = s[(k, q)];
                    s[(k, p)] = c * skp - sn * skq;
                    s[(k, q)] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[(p, k)];
                    let sqk = s[(q, k)];
                    s[(p, k)] = c * spk - sn * sqk;
                    s[(q, k)] = sn * spk + c * sqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Numeric("Jacobi rotations did not converge".into()))
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_symmetric_eigenvalue(a: &Matrix) -> Result<f64> {
    Ok(symmetric_eigen(a)?.0.first().copied().unwrap_or(f64::INFINITY))
}

/// Singular values in descending order (one-sided Jacobi).
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let mut u = if a.rows() >= a.cols() { a.clone() } else { a.transpose() };
    let (m, n) = (u.rows(), u.cols());
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    alpha += u[(i, p)] * u[(i, p)];
                    beta += u[(i, q)] * u[(i, q)];
                    gamma += u[(i, p)] * u[(i, q)];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..n).map(|j| super::norm(&u.col(j))).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    sigma
}

fn balance(h: &mut Matrix) {
    let n = h.rows();
    let radix = 2.0_f64;
    let sqrdx = radix * radix;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += h[(j, i)].abs();
                    r += h[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut g = r / radix;
            let mut f = 1.0;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let ginv = 1.0 / f;
                for j in 0..n {
                    h[(i, j)] *= ginv;
                }
                for j in 0..n {
                    h[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

fn hessenberg(h: &mut Matrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let f: f64 = (m..=high).rev().map(|i| ort[i] * h[(i, j)]).sum::<f64>() / hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let f: f64 = (m..=high).rev().map(|j| ort[j] * h[(i, j)]).sum::<f64>() / hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        h[(m, m - 1)] = scale * g;
        for i in (m + 1)..n {
            h[(i, m - 1)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
fn hessenberg_qr(h: &mut Matrix) -> Result<Vec<Complex64>> {
    let nn = h.rows();
    let mut wr = vec![0.0; nn];
    let mut wi = vec![0.0; nn];
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64);
    let (mut w, mut x, mut y);
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }
    let mut n = nn as isize - 1;
    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let cap = 60 * nn.max(1);
    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }
        if l == nu {
            h[(nu, nu)] += exshift;
            wr[nu] = h[(nu, nu)];
            wi[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;
            x = h[(nu, nu)];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                wr[nu - 1] = x + z;
                wr[nu] = wr[nu - 1];
                if z != 0.0 {
                    wr[nu] = x - w / z;
                }
                wi[nu - 1] = 0.0;
                wi[nu] = 0.0;
                x = h[(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in (nu - 1)..nn {
                    z = h[(nu - 1, j)];
                    h[(nu - 1, j)] = q * z + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[(i, nu - 1)];
                    h[(i, nu - 1)] = q * z + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * z;
                }
            } else {
                wr[nu - 1] = x + p;
                wr[nu] = x + p;
                wi[nu - 1] = z;
                wi[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[(nu, nu)];
            y = h[(nu - 1, nu - 1)];
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total_iter += 1;
            if total_iter > cap {
                return Err(Error::Numeric(format!("QR iteration did not converge after {cap} steps")));
            }
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                let notlast = k + 1 != nu;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}

/// Full complex spectrum by balancing, Hessenberg reduction and shifted QR.
pub fn eigenvalues(a: &Matrix) -> Result<Spectrum> {
    if !a.is_square() {
        return Err(Error::Shape(format!("eigenvalues of a {}x{} matrix", a.rows(), a.cols())));
    }
    if a.rows() > 64 {
        return Err(Error::Shape(format!("dimension {} exceeds the dense limit of 64", a.rows())));
    }
    if !a.is_finite() {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    if a.rows() == 0 {
        return Ok(Spectrum::new(Vec::new()));
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    Ok(Spectrum::new(hessenberg_qr(&mut h)?))
}

fn complex_solve(a: &mut [Vec<Complex64>], b: &mut [Complex64]) {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm())).unwrap_or(k);
        a.swap(p, k);
        b.swap(p, k);
        if a[k][k].norm() == 0.0 {
            a[k][k] = Complex64::new(f64::EPSILON, 0.0);
        }
        for i in (k + 1)..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let akj = a[k][j];
                a[i][j] -= f * akj;
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= a[i][j] * b[j];
        }
        b[i] = s / a[i][i];
    }
}

/// Eigenvalues with unit eigenvectors recovered by inverse iteration.
pub fn eigenpairs(a: &Matrix) -> Result<(Spectrum, Vec<Vec<Complex64>>)> {
    let spectrum = eigenvalues(a)?;
    let n = a.rows();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut vectors = Vec::with_capacity(n);
    for (idx, lambda) in spectrum.eigenvalues.iter().enumerate() {
        let shift = *lambda + Complex64::new(1e-10 * scale, 0.0);
        let mut v: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 + ((i * 7 + idx * 3) % 5) as f64 * 0.1, 0.0))
            .collect();
        for _ in 0..3 {
            let mut m: Vec<Vec<Complex64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let d = if i == j { shift } else { Complex64::new(0.0, 0.0) };
                            Complex64::new(a[(i, j)], 0.0) - d
                        })
                        .collect()
                })
                .collect();
            complex_solve(&mut m, &mut v);
            let nrm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if !(nrm.is_finite() && nrm > 0.0) {
                return Err(Error::Numeric("inverse iteration broke down".into()));
            }
            v.iter_mut().for_each(|c| *c /= nrm);
        }
        vectors.push(v);
    }
    Ok((spectrum, vectors))
}
