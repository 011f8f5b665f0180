use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::models::{CouplingDeviceParams, PeraParams, RlcParams};
use crate::numerics::Matrix;
use crate::{Error, Result};

/// Per-channel vector given as one scalar for every channel or as an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorParam {
    Scalar(f64),
    List(Vec<f64>),
}

impl VectorParam {
    pub fn expand(&self, key: &str, len: usize) -> Result<Vec<f64>> {
        match self {
            Self::Scalar(v) => Ok(vec![*v; len]),
            Self::List(v) if v.len() == len => Ok(v.clone()),
            Self::List(v) => Err(Error::Config(format!("{key} has {} entries, expected {len}", v.len()))),
        }
    }
}

impl From<f64> for VectorParam {
    fn from(v: f64) -> Self {
        Self::Scalar(v)
    }
}

impl From<Vec<f64>> for VectorParam {
    fn from(v: Vec<f64>) -> Self {
        Self::List(v)
    }
}

/// Matrix given as a scalar multiple of identity, a diagonal, or full row-major rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixParam {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl MatrixParam {
    pub fn to_matrix(&self, key: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let k = rows.min(cols);
        match self {
            Self::Scalar(v) => {
                let mut m = Matrix::zeros(rows, cols);
                (0..k).for_each(|i| m[(i, i)] = *v);
                Ok(m)
            }
            Self::Diagonal(d) if d.len() == k => {
                let mut m = Matrix::zeros(rows, cols);
                (0..k).for_each(|i| m[(i, i)] = d[i]);
                Ok(m)
            }
            Self::Diagonal(d) => Err(Error::Config(format!("{key} diagonal has {} entries, expected {k}", d.len()))),
            Self::Full(r) => {
                if r.len() != rows || r.iter().any(|row| row.len() != cols) {
                    return Err(Error::Config(format!("{key} must be {rows}x{cols}")));
                }
                Ok(Matrix::from_rows(r))
            }
        }
    }

    /// Diagonal entries; errors for full matrices with off-diagonal terms.
    pub fn diagonal(&self, key: &str, len: usize) -> Result<Vec<f64>> {
        let m = self.to_matrix(key, len, len)?;
        let d = m.diag();
        if (&m - &Matrix::from_diag(&d)).max_abs() > 0.0 {
            return Err(Error::Config(format!("{key} must be diagonal")));
        }
        Ok(d)
    }
}

impl From<f64> for MatrixParam {
    fn from(v: f64) -> Self {
        Self::Scalar(v)
    }
}

impl From<Vec<f64>> for MatrixParam {
    fn from(v: Vec<f64>) -> Self {
        Self::Diagonal(v)
    }
}

/// Controller family and gains; unset saturation keys fall back to `alpha` / `beta`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub family: String,
    #[serde(default)]
    pub alpha: Option<VectorParam>,
    #[serde(default)]
    pub beta: Option<VectorParam>,
    #[serde(default)]
    pub alpha_c: Option<VectorParam>,
    #[serde(default)]
    pub beta_c: Option<VectorParam>,
    #[serde(default)]
    pub alpha_ell: Option<VectorParam>,
    #[serde(default)]
    pub beta_ell: Option<VectorParam>,
    #[serde(default)]
    pub alpha_psi: Option<VectorParam>,
    #[serde(default)]
    pub beta_psi: Option<VectorParam>,
    #[serde(default, rename = "Kc")]
    pub kc: Option<MatrixParam>,
    #[serde(default, rename = "Rc")]
    pub rc: Option<MatrixParam>,
    #[serde(default, rename = "Kl")]
    pub kl: Option<MatrixParam>,
    #[serde(default, rename = "Rl")]
    pub rl: Option<MatrixParam>,
    #[serde(default, rename = "Rpsi")]
    pub rpsi: Option<MatrixParam>,
    #[serde(default, rename = "Upsilon")]
    pub upsilon: Option<MatrixParam>,
    #[serde(default)]
    pub kp: Option<VectorParam>,
    /// Componentwise bound on the compensated gravity torque.
    #[serde(default)]
    pub grad_bound: Option<VectorParam>,
}

impl ControllerConfig {
    fn pick<'a>(&'a self, key: &str, primary: &'a Option<VectorParam>, fallback: &'a Option<VectorParam>) -> Result<&'a VectorParam> {
        primary
            .as_ref()
            .or(fallback.as_ref())
            .ok_or_else(|| Error::Config(format!("controller '{}' needs '{key}'", self.family)))
    }

    pub fn alpha_c(&self, m: usize) -> Result<Vec<f64>> {
        self.pick("alpha_c", &self.alpha_c, &self.alpha)?.expand("alpha_c", m)
    }

    pub fn beta_c(&self, m: usize) -> Result<Vec<f64>> {
        self.pick("beta_c", &self.beta_c, &self.beta)?.expand("beta_c", m)
    }

    pub fn alpha_ell(&self, m: usize) -> Result<Vec<f64>> {
        self.pick("alpha_ell", &self.alpha_ell, &self.alpha)?.expand("alpha_ell", m)
    }

    pub fn beta_ell(&self, m: usize) -> Result<Vec<f64>> {
        self.pick("beta_ell", &self.beta_ell, &self.beta)?.expand("beta_ell", m)
    }

    pub fn alpha_psi(&self, m: usize) -> Result<Vec<f64>> {
        self.pick("alpha_psi", &self.alpha_psi, &None)?.expand("alpha_psi", m)
    }

    pub fn beta_psi(&self, m: usize) -> Result<Vec<f64>> {
        self.pick("beta_psi", &self.beta_psi, &None)?.expand("beta_psi", m)
    }

    pub fn matrix<'a>(&self, key: &str, value: &'a Option<MatrixParam>) -> Result<&'a MatrixParam> {
        value.as_ref().ok_or_else(|| Error::Config(format!("controller '{}' needs '{key}'", self.family)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Controller key, or several joined by `+` to set them together.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Half-widths of the sampling box centred at the target.
    pub box_half: Vec<f64>,
    pub count: usize,
}

fn one() -> usize {
    1
}

/// Fully parameterized closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub model: ModelConfig,
    pub controller: ControllerConfig,
    /// Plant equilibrium `x*`.
    pub target: Vec<f64>,
    /// Plant or augmented initial state.
    pub x0: Vec<f64>,
    pub t_span: [f64; 2],
    /// Recording interval.
    pub dt: f64,
    /// RK4 steps per recording interval.
    #[serde(default = "one")]
    pub substeps: usize,
    #[serde(default)]
    pub disturbance: Option<Vec<f64>>,
    /// Augmented-state channel names tracked by the metrics.
    #[serde(default)]
    pub outputs: Vec<String>,
    /// Length of the final averaging window; a tenth of the horizon when unset.
    #[serde(default)]
    pub window: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid scenario: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn window(&self) -> f64 {
        self.window.unwrap_or(0.1 * (self.t_span[1] - self.t_span[0]))
    }

    /// Sets `key` to `value`.
    ///
    /// Dotted keys are JSON paths; bare keys are looked up at the top level, then in
    /// `controller`, then in `model.params`. The key must already exist in the schema.
    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        let mut doc = serde_json::to_value(&*self)?;
        let path: Vec<String> = if key.contains('.') {
            key.split('.').map(str::to_string).collect()
        } else {
            let candidates = [vec![key], vec!["controller", key], vec!["model", "params", key]];
            candidates
                .into_iter()
                .find(|p| lookup(&doc, p).is_some())
                .ok_or_else(|| Error::Config(format!("unknown parameter '{key}'")))?
                .into_iter()
                .map(str::to_string)
                .collect()
        };
        let refs: Vec<&str> = path.iter().map(String::as_str).collect();
        let slot = lookup_mut(&mut doc, &refs).ok_or_else(|| Error::Config(format!("unknown parameter '{key}'")))?;
        *slot = value;
        *self = serde_json::from_value(doc).map_err(|e| Error::Config(format!("invalid value for '{key}': {e}")))?;
        Ok(())
    }

    /// Applies `key=value` where the value is parsed as JSON, falling back to a plain string.
    pub fn set_str(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
        self.set(key.trim(), value)
    }

    /// Copy with every `+`-joined key of `param` set to `value` and the name suffixed by the value.
    pub fn with_sweep_value(&self, param: &str, value: f64) -> Result<Self> {
        let mut s = self.clone();
        for key in param.split('+') {
            s.set(key.trim(), json!(value))?;
        }
        s.name = format!("{}-{}-{value}", self.name, param.replace('+', "_"));
        s.sweep = None;
        Ok(s)
    }
}

fn lookup<'a>(doc: &'a Value, path: &[&str]) -> Option<&'a Value> {
    path.iter().try_fold(doc, |v, k| v.as_object()?.get(*k))
}

fn lookup_mut<'a>(doc: &'a mut Value, path: &[&str]) -> Option<&'a mut Value> {
    path.iter().try_fold(doc, |v, k| v.as_object_mut()?.get_mut(*k))
}

const COUPLING_SPAN: [f64; 2] = [0.0, 20.0];
const PERA_TARGET_Q: [f64; 3] = [-1.81, FRAC_PI_2, 0.78];

/// Desired capacitor voltage of the RLC scenarios, giving a 20 mA load.
pub const RLC_TARGET_VOLTAGE: f64 = 3.0515;

fn coupling_base(name: &str, description: &str, controller: ControllerConfig) -> Scenario {
    Scenario {
        name: name.into(),
        description: description.into(),
        model: ModelConfig {
            kind: "coupling_device".into(),
            params: serde_json::to_value(CouplingDeviceParams::default()).expect("plain struct"),
        },
        controller,
        target: vec![0.0, 0.025, 0.025, 0.0, 0.0],
        x0: vec![0.0; 5],
        t_span: COUPLING_SPAN,
        dt: 1e-4,
        substeps: 20,
        disturbance: None,
        outputs: vec!["x2".into(), "x3".into()],
        window: Some(1.0),
        sweep: None,
        verify: Some(VerifyConfig { box_half: vec![0.1, 0.1, 0.1, 0.05, 0.05], count: 1000 }),
    }
}

fn coupling_gains(family: &str) -> ControllerConfig {
    ControllerConfig {
        family: family.into(),
        beta_c: Some(450.0.into()),
        kc: Some(1e6.into()),
        rc: Some(0.3.into()),
        ..Default::default()
    }
}

fn coupling_prop4(alpha_c: Option<f64>, alpha_ell: Option<f64>, alpha: Option<f64>) -> ControllerConfig {
    ControllerConfig {
        alpha: alpha.map(Into::into),
        alpha_c: alpha_c.map(Into::into),
        alpha_ell: alpha_ell.map(Into::into),
        beta_ell: Some(2e6.into()),
        kl: Some(5.5e-4.into()),
        rl: Some(33.0.into()),
        upsilon: Some(1.0.into()),
        ..coupling_gains("prop4")
    }
}

fn rlc_base(name: &str, description: &str, beta_c: f64) -> Scenario {
    let p = RlcParams::default();
    Scenario {
        name: name.into(),
        description: description.into(),
        model: ModelConfig { kind: "rlc".into(), params: serde_json::to_value(p).expect("plain struct") },
        controller: ControllerConfig {
            family: "prop2".into(),
            alpha_c: Some(0.0485.into()),
            beta_c: Some(beta_c.into()),
            kc: Some(10.0.into()),
            rc: Some(10.0.into()),
            ..Default::default()
        },
        target: p.equilibrium(RLC_TARGET_VOLTAGE),
        x0: vec![0.0; 3],
        t_span: [0.0, 0.5],
        dt: 1e-5,
        substeps: 1,
        disturbance: None,
        outputs: vec!["x1".into(), "x2".into(), "x3".into()],
        window: Some(0.05),
        sweep: None,
        verify: Some(VerifyConfig { box_half: vec![0.05, 0.05, 0.5], count: 1000 }),
    }
}

fn pera_base(name: &str, description: &str, controller: ControllerConfig, q0: [f64; 3]) -> Scenario {
    Scenario {
        name: name.into(),
        description: description.into(),
        model: ModelConfig { kind: "pera".into(), params: serde_json::to_value(PeraParams::default()).expect("plain struct") },
        controller,
        target: PERA_TARGET_Q.iter().copied().chain([0.0; 3]).collect(),
        x0: q0.iter().copied().chain([0.0; 3]).collect(),
        t_span: [0.0, 15.0],
        dt: 1e-3,
        substeps: 10,
        disturbance: None,
        outputs: vec!["x1".into(), "x2".into(), "x3".into()],
        window: Some(1.0),
        sweep: None,
        verify: Some(VerifyConfig { box_half: vec![2.0, 2.0, 2.0, 0.5, 0.5, 0.5], count: 1000 }),
    }
}

fn pera_filtered_gains(filtered: bool) -> ControllerConfig {
    ControllerConfig {
        family: if filtered { "fully_actuated_filtered" } else { "fully_actuated" }.into(),
        alpha_c: Some(vec![6.0, 1.4, 1.0].into()),
        beta_c: Some(120.0.into()),
        alpha_psi: filtered.then(|| vec![11.0, 1.5, 2.4].into()),
        beta_psi: filtered.then(|| 7.0.into()),
        kc: Some(1.0.into()),
        rc: Some(vec![0.1, 0.005, 0.05].into()),
        rpsi: filtered.then(|| vec![1.0, 1.0, 35.0].into()),
        ..Default::default()
    }
}

/// Constant input bias standing in for motor asymmetry and static friction.
pub const PERA_BIAS: [f64; 3] = [0.3, 0.1, 0.1];

/// Built-in scenarios, in listing order.
pub fn builtin_scenarios() -> Vec<Scenario> {
    const PERA_Q0_NOMINAL: [f64; 3] = [-2.257, -0.206, 0.044];
    const PERA_Q0_FILTERED: [f64; 3] = [-2.23, -0.212, 0.086];

    let i = coupling_base(
        "coupling-device-i",
        "coupling device without the virtual state (alpha_c = 5, alpha_ell = 0), run with the dynamic-extension law",
        ControllerConfig { alpha_c: Some(5.0.into()), ..coupling_gains("prop2") },
    );

    let ii = coupling_base(
        "coupling-device-ii",
        "coupling device with damping injected through the virtual state (alpha_c = alpha_ell = 2.5)",
        coupling_prop4(Some(2.5), Some(2.5), None),
    );
    let mut sweep = coupling_base(
        "coupling-device-sweep",
        "coupling device with alpha_c = alpha_ell = alpha swept over saturation levels",
        coupling_prop4(None, None, Some(2.5)),
    );
    sweep.sweep = Some(SweepConfig { param: "alpha".into(), values: vec![2.5, 3.75, 5.0] });

    let rlc = rlc_base("rlc-default", "nonlinear RLC circuit regulated to a 20 mA load current", 10.0);
    let mut rlc_sweep = rlc_base(
        "rlc-beta-sweep",
        "nonlinear RLC circuit over beta_c; the default values 1, 10, 100 are a local choice",
        10.0,
    );
    rlc_sweep.sweep = Some(SweepConfig { param: "beta_c".into(), values: vec![1.0, 10.0, 100.0] });

    let nominal = pera_base(
        "pera-nominal",
        "robot arm with the gravity-compensating saturated law",
        ControllerConfig {
            family: "fully_actuated".into(),
            alpha_c: Some(vec![17.0, 3.0, 3.3].into()),
            beta_c: Some(vec![80.0, 100.0, 80.0].into()),
            kc: Some(1.0.into()),
            rc: Some(vec![0.1, 0.005, 0.05].into()),
            ..Default::default()
        },
        PERA_Q0_NOMINAL,
    );
    let filtered = pera_base(
        "pera-filtered",
        "robot arm with the steady-state-error filter",
        pera_filtered_gains(true),
        PERA_Q0_FILTERED,
    );
    let mut filtered_bias = pera_base(
        "pera-filtered-bias",
        "robot arm with the filter under a constant input bias",
        pera_filtered_gains(true),
        PERA_Q0_FILTERED,
    );
    filtered_bias.disturbance = Some(PERA_BIAS.to_vec());
    filtered_bias.t_span = [0.0, 30.0];
    filtered_bias.window = Some(5.0);
    let mut unfiltered_bias = pera_base(
        "pera-unfiltered-bias",
        "robot arm under a constant input bias without the filter",
        pera_filtered_gains(false),
        PERA_Q0_FILTERED,
    );
    unfiltered_bias.disturbance = Some(PERA_BIAS.to_vec());
    unfiltered_bias.t_span = [0.0, 30.0];
    unfiltered_bias.window = Some(5.0);

    vec![i, ii, sweep, rlc, rlc_sweep, nominal, filtered, filtered_bias, unfiltered_bias]
}

/// Built-in scenario by name; parentheses are ignored so `coupling-device-(ii)` also resolves.
pub fn find_builtin(name: &str) -> Option<Scenario> {
    let key: String = name.chars().filter(|c| *c != '(' && *c != ')').collect();
    builtin_scenarios().into_iter().find(|s| s.name == key)
}

/// Resolves a built-in name or a path to a scenario JSON file.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    if let Some(s) = find_builtin(name_or_path) {
        return Ok(s);
    }
    let path = Path::new(name_or_path);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return Scenario::from_json(&text);
    }
    Err(Error::Config(format!("unknown scenario '{name_or_path}'")))
}
