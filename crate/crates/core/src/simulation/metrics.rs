use serde::{Deserialize, Serialize};

use super::SimulationTrace;
use crate::{Error, Result};

/// Summary numbers of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Names of the tracked state channels.
    pub channels: Vec<String>,
    pub steady_state_error: Vec<f64>,
    pub settling_time: Option<f64>,
    pub saturation_intervals: Vec<Vec<[f64; 2]>>,
    pub oscillation_count: Vec<usize>,
    pub max_abs_input: Vec<f64>,
    pub final_state: Vec<f64>,
    pub final_input: Vec<f64>,
}

impl Metrics {
    /// Computes every metric; `channels` index the augmented state, `target` gives one value per channel.
    pub fn compute(
        trace: &SimulationTrace,
        channels: &[usize],
        target: &[f64],
        bounds: &[(f64, f64)],
        window: f64,
    ) -> Result<Self> {
        let names = trace.layout.state_names();
        Ok(Self {
            channels: channels.iter().map(|&i| names[i].clone()).collect(),
            steady_state_error: metric_steady_state_error(trace, channels, target, window),
            settling_time: metric_settling_time(trace, channels, target, 0.02),
            saturation_intervals: metric_saturation_intervals(trace, bounds)?
                .into_iter()
                .map(|v| v.into_iter().map(|(a, b)| [a, b]).collect())
                .collect(),
            oscillation_count: channels.iter().map(|&i| metric_oscillations(trace, i)).collect(),
            max_abs_input: max_abs_input(trace),
            final_state: trace.final_state().to_vec(),
            final_input: trace.final_input().to_vec(),
        })
    }
}

/// Mean absolute deviation from `target` over the final `window` seconds.
pub fn metric_steady_state_error(trace: &SimulationTrace, channels: &[usize], target: &[f64], window: f64) -> Vec<f64> {
    let Some(&tf) = trace.times.last() else { return vec![0.0; channels.len()] };
    let start = trace.index_at(tf - window).min(trace.len() - 1);
    let count = (trace.len() - start) as f64;
    channels
        .iter()
        .zip(target)
        .map(|(&i, &x_star)| trace.states[start..].iter().map(|s| (s[i] - x_star).abs()).sum::<f64>() / count)
        .collect()
}

/// Earliest time after which every channel stays within `band` of its initial distance to target.
pub fn metric_settling_time(trace: &SimulationTrace, channels: &[usize], target: &[f64], band: f64) -> Option<f64> {
    let first = trace.states.first()?;
    let tol: Vec<f64> =
        channels.iter().zip(target).map(|(&i, t)| band * (first[i] - t).abs().max(1e-12)).collect();
    let inside = |s: &Vec<f64>| channels.iter().zip(target).zip(&tol).all(|((&i, t), e)| (s[i] - t).abs() <= *e);
    let last_out = trace.states.iter().rposition(|s| !inside(s));
    match last_out {
        None => Some(trace.times[0]),
        Some(k) if k + 1 < trace.len() => Some(trace.times[k + 1]),
        Some(_) => None,
    }
}

/// Maximal runs where an input sits within `1e-6·(hi − lo)` of a bound.
///
/// Any sample outside the bounds is an invariant violation.
pub fn metric_saturation_intervals(trace: &SimulationTrace, bounds: &[(f64, f64)]) -> Result<Vec<Vec<(f64, f64)>>> {
    if bounds.len() != trace.layout.inputs {
        return Err(Error::Shape(format!("{} bounds for {} inputs", bounds.len(), trace.layout.inputs)));
    }
    let mut out = Vec::with_capacity(bounds.len());
    for (ch, &(lo, hi)) in bounds.iter().enumerate() {
        let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        let touch = 1e-6 * (hi - lo);
        let mut intervals = Vec::new();
        let mut open: Option<(f64, f64)> = None;
        for (k, u) in trace.inputs.iter().enumerate() {
            let v = u[ch];
            let t = trace.times[k];
            if !(v >= lo - slack && v <= hi + slack) {
                return Err(Error::Invariant(format!(
                    "input {} = {v} leaves [{lo}, {hi}] at t = {t}",
                    ch + 1
                )));
            }
            if (v - hi).abs() <= touch || (v - lo).abs() <= touch {
                open = Some(open.map_or((t, t), |(a, _)| (a, t)));
            } else if let Some(iv) = open.take() {
                intervals.push(iv);
            }
        }
        intervals.extend(open);
        out.push(intervals);
    }
    Ok(out)
}

fn median5(w: &[f64]) -> f64 {
    let mut v = w.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Strict sign changes of the discrete derivative after median-of-5 smoothing.
pub fn oscillation_count(series: &[f64]) -> usize {
    if series.len() < 3 {
        return 0;
    }
    let n = series.len();
    let smooth: Vec<f64> = (0..n)
        .map(|k| if k < 2 || k + 2 >= n { series[k] } else { median5(&series[k - 2..=k + 2]) })
        .collect();
    let mut last = 0.0_f64;
    let mut changes = 0;
    for w in smooth.windows(2) {
        let d = w[1] - w[0];
        if d == 0.0 {
            continue;
        }
        if last != 0.0 && d.signum() != last {
            changes += 1;
        }
        last = d.signum();
    }
    changes
}

/// [`oscillation_count`] of augmented-state coordinate `channel`.
pub fn metric_oscillations(trace: &SimulationTrace, channel: usize) -> usize {
    oscillation_count(&trace.state_series(channel))
}

pub fn max_abs_input(trace: &SimulationTrace) -> Vec<f64> {
    (0..trace.layout.inputs)
        .map(|i| trace.inputs.iter().fold(0.0_f64, |m, u| m.max(u[i].abs())))
        .collect()
}
