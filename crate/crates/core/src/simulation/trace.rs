use std::io::{Read, Write};

use super::Layout;
use crate::{Error, Result};

/// Time-indexed augmented states, inputs and closed-loop storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub layout: Layout,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub storage: Vec<f64>,
}

impl SimulationTrace {
    pub fn with_capacity(layout: Layout, n: usize) -> Self {
        Self {
            layout,
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            inputs: Vec::with_capacity(n),
            storage: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, state: Vec<f64>, input: Vec<f64>, storage: f64) {
        self.times.push(t);
        self.states.push(state);
        self.inputs.push(input);
        self.storage.push(storage);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time series of augmented-state coordinate `i`.
    pub fn state_series(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    pub fn input_series(&self, i: usize) -> Vec<f64> {
        self.inputs.iter().map(|u| u[i]).collect()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    pub fn final_input(&self) -> &[f64] {
        self.inputs.last().map_or(&[], Vec::as_slice)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(self.layout.state_names());
        h.extend((1..=self.layout.inputs).map(|i| format!("u{i}")));
        h.push("storage".into());
        h
    }

    /// Index of the first sample with `t >= t_from`.
    pub fn index_at(&self, t_from: f64) -> usize {
        self.times.partition_point(|t| *t < t_from)
    }
}

/// Writes `t, x.., xc.., xl.., psi.., u.., storage` with shortest round-trip number formatting.
pub fn write_trace_csv<W: Write>(trace: &SimulationTrace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(trace.header())?;
    let mut row: Vec<String> = Vec::new();
    for k in 0..trace.len() {
        row.clear();
        row.push(format!("{:?}", trace.times[k]));
        row.extend(trace.states[k].iter().map(|v| format!("{v:?}")));
        row.extend(trace.inputs[k].iter().map(|v| format!("{v:?}")));
        row.push(format!("{:?}", trace.storage[k]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn count_prefixed(header: &[String], at: &mut usize, prefix: &str) -> Result<usize> {
    let mut count = 0;
    while *at < header.len() {
        let name = &header[*at];
        let Some(rest) = name.strip_prefix(prefix) else { break };
        match rest.parse::<usize>() {
            Ok(i) if i == count + 1 => {
                count += 1;
                *at += 1;
            }
            _ => break,
        }
    }
    Ok(count)
}

/// Parses a trace written by [`write_trace_csv`], validating header names and row widths.
pub fn read_trace_csv<R: Read>(input: R) -> Result<SimulationTrace> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let bad = |msg: &str| Error::Io(format!("malformed trace header: {msg}"));
    if header.first().map(String::as_str) != Some("t") {
        return Err(bad("first column must be 't'"));
    }
    if header.last().map(String::as_str) != Some("storage") {
        return Err(bad("last column must be 'storage'"));
    }
    let mut at = 1;
    let plant = count_prefixed(&header, &mut at, "x")?;
    let xc = count_prefixed(&header, &mut at, "xc")?;
    let xl = count_prefixed(&header, &mut at, "xl")?;
    let psi = count_prefixed(&header, &mut at, "psi")?;
    let inputs = count_prefixed(&header, &mut at, "u")?;
    if at != header.len() - 1 || plant == 0 {
        return Err(bad(&format!("unexpected column '{}'", header.get(at).map_or("", String::as_str))));
    }
    let layout = Layout { plant, xc, xl, psi, inputs };
    let width = header.len();
    let mut trace = SimulationTrace::with_capacity(layout, 0);
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Io(format!("row {} has {} fields, expected {width}", line + 1, rec.len())));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Io(format!("row {}: {e}", line + 1))))
            .collect::<Result<_>>()?;
        let n = layout.total();
        trace.push(vals[0], vals[1..1 + n].to_vec(), vals[1 + n..1 + n + inputs].to_vec(), vals[width - 1]);
    }
    if trace.times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Io("times are not strictly increasing".into()));
    }
    Ok(trace)
}
