use crate::{Error, Result};

/// Times and states produced by [`integrate_fixed`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// One classical RK4 step of size `h`.
pub fn rk4_step(f: &mut dyn FnMut(f64, &[f64]) -> Vec<f64>, t: f64, x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let k1 = f(t, x);
    let mut tmp: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
    let k2 = f(t + 0.5 * h, &tmp);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    let k3 = f(t + 0.5 * h, &tmp);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    let k4 = f(t + h, &tmp);
    (0..n).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// Uniform grid from `t0` to `tf` with spacing `dt`; the last interval is shortened when needed.
pub fn time_grid(t0: f64, tf: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    if !(tf > t0) {
        return Err(Error::Config(format!("final time {tf} must exceed initial time {t0}")));
    }
    let span = tf - t0;
    let mut steps = (span / dt).floor() as usize;
    if t0 + steps as f64 * dt < tf - 1e-9 * dt {
        steps += 1;
    }
    let mut grid: Vec<f64> = (0..steps).map(|k| t0 + k as f64 * dt).collect();
    grid.push(tf);
    Ok(grid)
}

/// Fixed-step RK4 from `t0` to exactly `tf`.
pub fn integrate_fixed(
    dynamics: &mut dyn FnMut(f64, &[f64]) -> Vec<f64>,
    x0: &[f64],
    t0: f64,
    tf: f64,
    dt: f64,
) -> Result<RawTrace> {
    let times = time_grid(t0, tf, dt)?;
    let mut states = Vec::with_capacity(times.len());
    states.push(x0.to_vec());
    for w in times.windows(2) {
        let next = rk4_step(dynamics, w[0], states.last().expect("nonempty"), w[1] - w[0]);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: w[1] });
        }
        states.push(next);
    }
    Ok(RawTrace { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let tr = integrate_fixed(&mut |_, x| vec![-x[0]], &[1.0], 0.0, 1.0, 1e-3).unwrap();
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        assert!((tr.states.last().unwrap()[0] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn constant_field_gives_constant_trace() {
        let tr = integrate_fixed(&mut |_, _| vec![0.0, 0.0], &[2.0, -1.0], 0.0, 0.5, 0.1).unwrap();
        assert!(tr.states.iter().all(|s| s == &vec![2.0, -1.0]));
    }

    #[test]
    fn harmonic_oscillator_returns_after_one_period() {
        let period = 2.0 * std::f64::consts::PI;
        let tr = integrate_fixed(&mut |_, x| vec![x[1], -x[0]], &[1.0, 0.0], 0.0, period, 1e-3).unwrap();
        let end = tr.states.last().unwrap();
        assert!((end[0] - 1.0).abs() < 1e-5 && end[1].abs() < 1e-5);
    }

    #[test]
    fn last_step_is_shortened() {
        let grid = time_grid(0.0, 1.0, 0.3).unwrap();
        assert_eq!(grid.len(), 5);
        assert_eq!(*grid.last().unwrap(), 1.0);
        assert!((grid[3] - 0.9).abs() < 1e-15);
        assert_eq!(time_grid(0.0, 1.0, 0.25).unwrap().len(), 5);
    }

    #[test]
    fn blow_up_reports_divergence_time() {
        let err = integrate_fixed(&mut |_, x| vec![x[0] * x[0]], &[1.0], 0.0, 2.0, 0.01).unwrap_err();
        match err {
            Error::Divergence { time } => assert!(time > 0.9 && time <= 2.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
