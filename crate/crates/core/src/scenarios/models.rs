use serde::{Deserialize, Serialize};

use crate::models::{bm_to_affine, mech_to_affine, BraytonMoserModel, InputAffineModel, MechanicalModel};
use crate::numerics::Matrix;
use crate::{Error, Result};

fn require_positive(model: &str, fields: &[(&str, f64)]) -> Result<()> {
    for (name, v) in fields {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("{model} parameter {name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Electromechanical coupling device: RC input stage driving two spring-coupled masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingDeviceParams {
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub m1: f64,
    pub m2: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub k: f64,
}

impl Default for CouplingDeviceParams {
    fn default() -> Self {
        Self { r1: 100.0, r2: 100.0, c: 2.2e-4, m1: 0.01, m2: 0.015, a0: 0.005, a1: 6e-4, a2: 8e-5, a3: 40.0, k: 0.3 }
    }
}

impl CouplingDeviceParams {
    pub fn validate(&self) -> Result<()> {
        require_positive(
            "coupling_device",
            &[
                ("R1", self.r1),
                ("R2", self.r2),
                ("C", self.c),
                ("m1", self.m1),
                ("m2", self.m2),
                ("a0", self.a0),
                ("a1", self.a1),
                ("a2", self.a2),
                ("a3", self.a3),
                ("k", self.k),
            ],
        )
    }
}

/// Five-state coupling device with `γ`, `η = x₃`, `ℓ`, `w` and the dissipation weights populated.
///
/// `Λ_c = R₁` is the sharp bound on the output weight; `Λ_ℓ = a₁` keeps only the viscous friction.
pub fn coupling_device(p: &CouplingDeviceParams) -> Result<InputAffineModel> {
    p.validate()?;
    let p = *p;
    let req = p.r1 * p.r2 / (p.r1 + p.r2);
    let first_row = move |x: &[f64]| -(1.0 / p.r1 + 1.0 / p.r2) * x[0] / p.c + x[3] / (p.a0 * p.m1 * p.r2);
    let drift = move |x: &[f64]| {
        let spring = p.k * (x[1] - x[2]);
        vec![
            first_row(x),
            x[3] / p.m1,
            x[4] / p.m2,
            -spring + (x[0] / p.c - x[3] / (p.a0 * p.m1)) / (p.a0 * p.r2),
            spring - p.a1 / p.m2 * x[4] - p.a2 * (p.a3 * x[4]).tanh(),
        ]
    };
    let input = move |_: &[f64]| Matrix::column(&[1.0 / p.r1, 0.0, 0.0, 0.0, 0.0]);
    let c1 = p.r2 / (p.r1 + p.r2);
    let c2 = 1.0 / (p.a0 * (p.r1 + p.r2));
    Ok(InputAffineModel::new("coupling_device", 5, 1, drift, input)
        .with_storage(move |x| {
            let d = x[1] - x[2];
            0.5 * x[0] * x[0] / p.c + 0.5 * p.k * d * d + 0.5 * x[3] * x[3] / p.m1 + 0.5 * x[4] * x[4] / p.m2
        })
        .with_storage_gradient(move |x| {
            let d = p.k * (x[1] - x[2]);
            vec![x[0] / p.c, d, -d, x[3] / p.m1, x[4] / p.m2]
        })
        .with_dissipation(move |x| {
            let v5 = x[4] / p.m2;
            vec![
                req.sqrt() * first_row(x),
                x[3] / (p.m1 * p.a0 * (p.r1 + p.r2).sqrt()),
                p.a1.sqrt() * v5,
                (p.a2 * v5 * (p.a3 * x[4]).tanh()).max(0.0).sqrt(),
            ]
        })
        .with_feedthrough(move |_| Matrix::column(&[req.sqrt() / p.r1, 0.0, 0.0, 0.0]))
        .with_gamma(move |x| vec![c1 * x[0] + c2 * x[1]])
        .with_gamma_jacobian(move |_| Matrix::column(&[c1, c2, 0.0, 0.0, 0.0]))
        .with_eta(|x| vec![x[2]])
        .with_eta_jacobian(|_| Matrix::column(&[0.0, 0.0, 1.0, 0.0, 0.0]))
        .with_weights(move |_| Matrix::from_diag(&[p.a1]), move |_| Matrix::from_diag(&[p.r1])))
}

/// Nonlinear RLC circuit with an exponential load across the capacitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlcParams {
    pub r: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for RlcParams {
    fn default() -> Self {
        Self { r: 100.0, l1: 0.01, l2: 0.02, c: 2e-4, a: 1e-7, b: 0.25 }
    }
}

impl RlcParams {
    pub fn validate(&self) -> Result<()> {
        require_positive(
            "rlc",
            &[("r", self.r), ("L1", self.l1), ("L2", self.l2), ("C", self.c), ("a", self.a), ("b", self.b)],
        )
    }

    /// Load current `a(e^{v/b} − 1)` at capacitor voltage `v`.
    pub fn load_current(&self, v: f64) -> f64 {
        self.a * (v / self.b).exp_m1()
    }

    /// Capacitor voltage at which the load draws `current`.
    pub fn voltage_for_current(&self, current: f64) -> f64 {
        self.b * (current / self.a).ln_1p()
    }

    /// Assignable equilibrium with capacitor voltage `x3`.
    pub fn equilibrium(&self, x3: f64) -> Vec<f64> {
        vec![x3 / self.r + self.load_current(x3), x3 / self.r, x3]
    }
}

/// Brayton–Moser form: inductor currents `x₁, x₂`, capacitor voltage `x₃`, source in series with `L₁`.
pub fn rlc_circuit(p: &RlcParams) -> Result<BraytonMoserModel> {
    p.validate()?;
    let p = *p;
    Ok(BraytonMoserModel::new(
        "rlc",
        Matrix::from_diag(&[p.l1, p.l2]),
        Matrix::from_diag(&[p.c]),
        Matrix::from_rows(&[vec![1.0], vec![-1.0]]),
        move |i| vec![0.0, p.r * i[1]],
        move |v| vec![p.load_current(v[0])],
        Matrix::from_rows(&[vec![-1.0], vec![0.0]]),
        Matrix::zeros(1, 0),
    )?
    .with_resistor_jacobian(move |_| Matrix::from_diag(&[0.0, p.r]))
    .with_conductor_jacobian(move |v| Matrix::from_diag(&[p.a / p.b * (v[0] / p.b).exp()])))
}

/// Input-affine reduction of [`rlc_circuit`] with `γ = x₃/L₁`.
pub fn rlc_affine(p: &RlcParams) -> Result<InputAffineModel> {
    let l1 = p.l1;
    Ok(bm_to_affine(&rlc_circuit(p)?)?
        .with_gamma(move |x| vec![x[2] / l1])
        .with_gamma_jacobian(move |_| Matrix::column(&[0.0, 0.0, 1.0 / l1])))
}

/// Three-joint arm: shoulder roll, elbow pitch, elbow roll.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeraParams {
    pub g_r: f64,
    pub d_c2: f64,
    pub m3: f64,
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "I3")]
    pub i3: f64,
}

impl Default for PeraParams {
    fn default() -> Self {
        Self { g_r: 9.81, d_c2: 0.16, m3: 1.0, i1: 0.0054, i2: 0.0768, i3: 0.00211 }
    }
}

impl PeraParams {
    pub fn validate(&self) -> Result<()> {
        require_positive(
            "pera",
            &[("g_r", self.g_r), ("d_c2", self.d_c2), ("m3", self.m3), ("I1", self.i1), ("I2", self.i2), ("I3", self.i3)],
        )
    }

    /// Peak gravity torque `m₃ g_r d_c2`, reached on the elbow pitch.
    pub fn gravity_peak(&self) -> f64 {
        self.m3 * self.g_r * self.d_c2
    }

    /// Componentwise bound on `|∇V(q)|`.
    pub fn gravity_bound(&self) -> Vec<f64> {
        vec![0.0, self.gravity_peak(), 0.0]
    }
}

/// Motor protection limits of the arm: direct drive on joint 1, differential drive on joints 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueLimits {
    pub shoulder: f64,
    pub differential: f64,
}

pub const PERA_TORQUE_LIMITS: TorqueLimits = TorqueLimits { shoulder: 17.1007, differential: 7.901 };

impl TorqueLimits {
    /// Smallest slack `limit − |combination|` over `|u₁|`, `|u₂ + u₃|`, `|u₂ − u₃|`; negative when violated.
    pub fn margin(&self, u: &[f64]) -> f64 {
        (self.shoulder - u[0].abs())
            .min(self.differential - (u[1] + u[2]).abs())
            .min(self.differential - (u[1] - u[2]).abs())
    }
}

/// Undamped, fully actuated arm with `G = I₃`.
pub fn pera(p: &PeraParams) -> Result<MechanicalModel> {
    p.validate()?;
    let p = *p;
    let md2 = p.m3 * p.d_c2 * p.d_c2;
    let inertia = move |q: &[f64]| {
        let (s, c) = q[1].sin_cos();
        Matrix::from_rows(&[
            vec![p.i1 + p.i2 + p.i3 + md2 * s * s, 0.0, p.i3 * c],
            vec![0.0, p.i2 + p.i3 + md2, 0.0],
            vec![p.i3 * c, 0.0, p.i3],
        ])
    };
    let partials = move |q: &[f64]| {
        let (s, c) = q[1].sin_cos();
        let mut d2 = Matrix::zeros(3, 3);
        d2[(0, 0)] = 2.0 * md2 * s * c;
        d2[(0, 2)] = -p.i3 * s;
        d2[(2, 0)] = -p.i3 * s;
        vec![Matrix::zeros(3, 3), d2, Matrix::zeros(3, 3)]
    };
    let peak = p.gravity_peak();
    Ok(MechanicalModel::new("pera", 3, inertia, move |q| peak * (1.0 - q[1].cos()), Matrix::identity(3))
        .with_inertia_partials(partials)
        .with_potential_gradient(move |q| vec![0.0, peak * q[1].sin(), 0.0]))
}

/// Port-Hamiltonian state-space form of [`pera`], states `(q, p)`.
pub fn pera_affine(p: &PeraParams) -> Result<InputAffineModel> {
    mech_to_affine(&pera(p)?)
}
