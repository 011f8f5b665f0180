//! Sampled and pointwise checks of the structural assumptions and stability conditions.

mod checks;
mod report;

pub use checks::{
    check_assumption3, check_closed_loop_hessian, check_cyclo_passivity, check_equilibrium_gradient,
    check_gamma_output, check_shaped_hessian, check_theta_psd, closed_loop_hessian, dissipation_obstacle_flag,
    linearization_stability, lyapunov_monitor, suggest_kc, theta_matrix, theta_schur_complement, ThetaCheck,
    ASSUMPTION3_INPUT_RANGE,
};
pub use report::{CheckResult, SampleSpec, VerificationReport};
