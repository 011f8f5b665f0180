use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Overflow-safe `ln(cosh t)`.
pub fn ln_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Amplitudes `α` and slopes `β` of the potential `Σ (α_i/β_i) ln cosh(β_i z_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationShape {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl SaturationShape {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::Shape(format!("{} amplitudes but {} slopes", alpha.len(), beta.len())));
        }
        if let Some(bad) = alpha.iter().chain(&beta).find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Config(format!("saturation parameters must be positive, got {bad}")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `Σ (α_i/β_i) ln cosh(β_i z_i)`.
    pub fn potential(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.len());
        z.iter()
            .zip(self.alpha.iter().zip(&self.beta))
            .map(|(zi, (a, b))| a / b * ln_cosh(b * zi))
            .sum()
    }

    /// `α_i tanh(β_i z_i)`.
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.len());
        z.iter().zip(self.alpha.iter().zip(&self.beta)).map(|(zi, (a, b))| a * (b * zi).tanh()).collect()
    }

    /// Products `α_iβ_i`, the Hessian of the potential at the origin.
    pub fn curvature(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a * b).collect()
    }

    /// Diagonal of the Hessian, `α_iβ_i sech²(β_i z_i)`.
    pub fn hessian_diag(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.alpha.iter().zip(&self.beta))
            .map(|(zi, (a, b))| {
                let s = 1.0 / (b * zi).cosh();
                a * b * s * s
            })
            .collect()
    }
}
