use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::Spectrum;
use crate::{Error, Result};

/// Outcome of one numerical check; `pass` always equals `residual <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
    pub tolerance: f64,
    /// Point where the residual is attained.
    pub witness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64, witness: Option<Vec<f64>>) -> Self {
        Self { name: name.into(), pass: residual <= tolerance, residual, tolerance, witness, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// Failed record for a check that could not be evaluated.
    pub fn from_error(name: impl Into<String>, err: &Error, witness: Option<Vec<f64>>) -> Self {
        Self {
            name: name.into(),
            pass: false,
            residual: f64::INFINITY,
            tolerance: 0.0,
            witness,
            detail: err.to_string(),
        }
    }
}

/// Axis-aligned sampling box with a fixed seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub count: usize,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, count: usize, seed: u64) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Shape(format!("box bounds have lengths {} and {}", lo.len(), hi.len())));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Config("sampling box needs finite lo <= hi".into()));
        }
        Ok(Self { lo, hi, count, seed })
    }

    /// Box `center ± half`.
    pub fn around(center: &[f64], half: &[f64], count: usize, seed: u64) -> Result<Self> {
        if center.len() != half.len() {
            return Err(Error::Shape("center and half-width lengths differ".into()));
        }
        let lo = center.iter().zip(half).map(|(c, h)| c - h.abs()).collect();
        let hi = center.iter().zip(half).map(|(c, h)| c + h.abs()).collect();
        Self::new(lo, hi, count, seed)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Uniform points in the box.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut rng = self.rng();
        (0..self.count).map(|_| self.draw(&mut rng)).collect()
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| if a == b { a } else { rng.gen_range(a..=b) })
            .collect()
    }
}

/// Collection of checks for one scenario, serialized as the verification document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub all_pass: bool,
    pub checks: Vec<CheckResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Spectrum>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self { scenario: scenario.into(), all_pass: true, checks: Vec::new(), spectrum: None, notes: Vec::new() }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.all_pass &= check.pass;
        self.checks.push(check);
    }

    /// Records the outcome of a fallible check, turning errors into failed entries.
    pub fn record(&mut self, name: &str, outcome: Result<CheckResult>, witness: Option<Vec<f64>>) {
        match outcome {
            Ok(c) => self.push(c),
            Err(e) => self.push(CheckResult::from_error(name, &e, witness)),
        }
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
