//! Built-in plants, scenario schema and scenario execution.

mod build;
mod config;
mod models;

pub use build::{
    build, build_controller, build_model, run, run_built, verify_scenario, BuiltScenario, ModelBundle, RunOutput,
};
pub use config::{
    builtin_scenarios, find_builtin, load_scenario, ControllerConfig, MatrixParam, ModelConfig, Scenario,
    SweepConfig, VectorParam, VerifyConfig, PERA_BIAS, RLC_TARGET_VOLTAGE,
};
pub use models::{
    coupling_device, pera, pera_affine, rlc_affine, rlc_circuit, CouplingDeviceParams, PeraParams, RlcParams,
    TorqueLimits, PERA_TORQUE_LIMITS,
};
