//! Closed-loop assembly, time stepping and trace metrics.

mod closed_loop;
mod metrics;
mod trace;

pub use closed_loop::{assemble, simulate, simulate_with, ClosedLoop, Layout, Measurement};
pub use metrics::{
    max_abs_input, metric_oscillations, metric_saturation_intervals, metric_settling_time,
    metric_steady_state_error, oscillation_count, Metrics,
};
pub use trace::{read_trace_csv, write_trace_csv, SimulationTrace};
