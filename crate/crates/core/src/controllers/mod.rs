//! Saturated passivity-based controller families.
//!
//! Controllers are parameter blocks exposing pure `control` and `dynamics`
//! evaluators; their internal states are owned and integrated by the
//! simulation loop.

mod families;
mod saturation;

pub use families::{
    FilterAugmentation, FilterBase, FullyActuatedController, Prop1Controller, Prop2Controller, Prop4Controller,
};
pub use saturation::{ln_cosh, SaturationShape};

use crate::{Error, Result};

/// One of the five controller families.
#[derive(Clone, Debug)]
pub enum ControllerSpec {
    Prop1(Prop1Controller),
    Prop2(Prop2Controller),
    Prop4(Prop4Controller),
    FullyActuated(FullyActuatedController),
    Filtered {
        base: FilterBase,
        filter: FilterAugmentation,
        /// `Gᵀ(∇V)*`, replacing `−κ` in the control law.
        gravity_offset: Vec<f64>,
        q_star: Vec<f64>,
    },
}

impl ControllerSpec {
    /// Filter on top of the fully actuated law, with the gravity term frozen at `q*`.
    pub fn filtered_fully_actuated(base: FullyActuatedController, filter: FilterAugmentation) -> Result<Self> {
        let gravity_offset = base.gravity_at_target();
        let q_star = base.q_star.clone();
        Self::filtered(FilterBase::FullyActuated(base), filter, gravity_offset, q_star)
    }

    pub fn filtered(
        base: FilterBase,
        filter: FilterAugmentation,
        gravity_offset: Vec<f64>,
        q_star: Vec<f64>,
    ) -> Result<Self> {
        let m = base.inputs();
        if gravity_offset.len() != m {
            return Err(Error::Config(format!(
                "gravity offset has {} entries but the controller drives {m} inputs",
                gravity_offset.len()
            )));
        }
        if filter.inputs() != m {
            return Err(Error::Config(format!("filter has {} channels, expected {m}", filter.inputs())));
        }
        Ok(Self::Filtered { base, filter, gravity_offset, q_star })
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Prop1(_) => "prop1",
            Self::Prop2(_) => "prop2",
            Self::Prop4(_) => "prop4",
            Self::FullyActuated(_) => "fully_actuated",
            Self::Filtered { base: FilterBase::FullyActuated(_), .. } => "fully_actuated_filtered",
            Self::Filtered { base: FilterBase::Prop4(_), .. } => "prop4_filtered",
        }
    }

    pub fn inputs(&self) -> usize {
        match self {
            Self::Prop1(c) => c.kappa.len(),
            Self::Prop2(c) => c.kappa.len(),
            Self::Prop4(c) => c.integral.kappa.len(),
            Self::FullyActuated(c) => c.q_star.len(),
            Self::Filtered { base, .. } => base.inputs(),
        }
    }
}

/// Closed-form interval containing every output channel.
pub fn saturation_bounds(ctrl: &ControllerSpec) -> Vec<(f64, f64)> {
    let around = |centre: &[f64], width: Vec<f64>| -> Vec<(f64, f64)> {
        centre.iter().zip(width).map(|(c, w)| (c - w, c + w)).collect()
    };
    let neg = |v: &[f64]| v.iter().map(|k| -k).collect::<Vec<_>>();
    match ctrl {
        ControllerSpec::Prop1(c) => {
            around(&neg(&c.kappa), c.shape.alpha.iter().zip(&c.kp).map(|(a, k)| k + a).collect())
        }
        ControllerSpec::Prop2(c) => around(&neg(&c.kappa), c.shape_c.alpha.clone()),
        ControllerSpec::Prop4(c) => around(&neg(&c.integral.kappa), c.amplitude()),
        ControllerSpec::FullyActuated(c) => {
            around(&vec![0.0; c.q_star.len()], c.grad_bound.iter().zip(&c.shape_c.alpha).map(|(b, a)| b + a).collect())
        }
        ControllerSpec::Filtered { base, filter, gravity_offset, .. } => {
            let amp = match base {
                FilterBase::FullyActuated(c) => c.shape_c.alpha.clone(),
                FilterBase::Prop4(c) => c.amplitude(),
            };
            around(gravity_offset, amp.iter().zip(&filter.shape_psi.alpha).map(|(a, b)| a + b).collect())
        }
    }
}
