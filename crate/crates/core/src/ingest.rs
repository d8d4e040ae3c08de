//! Resampling and clearing-instant alignment of rotor traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::GeneratorTrace;
use crate::GenId;

/// Assessment sample rate (samples/s).
pub const ASSESSMENT_RATE_HZ: u32 = 120;
/// Minimum post-clearing coverage every trace must provide (s).
pub const MIN_COVERAGE: f64 = 0.5;

/// Tolerance, in grid samples, for treating a timestamp as on-grid.
const GRID_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMeta {
    pub fault_time: f64,
    pub clear_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl EventMeta {
    pub fn validate(&self) -> Result<()> {
        if !self.fault_time.is_finite() || !self.clear_time.is_finite() {
            return Err(Error::Event("times must be finite".into()));
        }
        if !(self.clear_time > self.fault_time) {
            return Err(Error::Event(format!(
                "clearing time {} must follow fault time {}",
                self.clear_time, self.fault_time
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let meta: EventMeta = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("event metadata serializes")
    }
}

/// Per-generator series on a common grid of `rate_hz` samples/s. Sample `i`
/// sits at `(start_index + i) / rate_hz` seconds; index 0 is the first grid
/// point at or after the clearing instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedDataset {
    pub rate_hz: u32,
    pub start_index: i64,
    pub gen_ids: Vec<GenId>,
    pub angles: Vec<Vec<f64>>,
    pub speeds: Vec<Vec<f64>>,
}

impl AlignedDataset {
    pub fn dt(&self) -> f64 {
        1.0 / f64::from(self.rate_hz)
    }

    pub fn len(&self) -> usize {
        self.angles.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        (self.start_index + i as i64) as f64 / f64::from(self.rate_hz)
    }

    pub fn position(&self, id: GenId) -> Result<usize> {
        self.gen_ids.iter().position(|&g| g == id).ok_or(Error::UnknownGenerator(id))
    }

    /// Speeds at the clearing instant (index 0).
    pub fn clearing_speeds(&self) -> Vec<(GenId, f64)> {
        self.gen_ids.iter().copied().zip(self.speeds.iter().map(|s| s[0])).collect()
    }

    pub fn to_traces(&self) -> Vec<GeneratorTrace> {
        let times: Vec<f64> = (0..self.len()).map(|i| self.time(i)).collect();
        self.gen_ids
            .iter()
            .enumerate()
            .map(|(k, &gen_id)| GeneratorTrace {
                gen_id,
                dt: self.dt(),
                times: times.clone(),
                angles: self.angles[k].clone(),
                speeds: self.speeds[k].clone(),
            })
            .collect()
    }
}

/// Linear interpolation of both channels at grid indices `first..=last`.
fn sample_grid(trace: &GeneratorTrace, rate: f64, first: i64, last: i64) -> (Vec<f64>, Vec<f64>) {
    let n = (last - first + 1).max(0) as usize;
    let mut angles = Vec::with_capacity(n);
    let mut speeds = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in first..=last {
        let t = k as f64 / rate;
        while seg + 2 < trace.times.len() && trace.times[seg + 1] <= t {
            seg += 1;
        }
        let (t0, t1) = (trace.times[seg], trace.times[seg + 1]);
        let snap = GRID_TOL / rate;
        if (t - t0).abs() <= snap {
            angles.push(trace.angles[seg]);
            speeds.push(trace.speeds[seg]);
        } else if (t - t1).abs() <= snap {
            angles.push(trace.angles[seg + 1]);
            speeds.push(trace.speeds[seg + 1]);
        } else {
            let s = (t - t0) / (t1 - t0);
            angles.push(trace.angles[seg] + (trace.angles[seg + 1] - trace.angles[seg]) * s);
            speeds.push(trace.speeds[seg] + (trace.speeds[seg + 1] - trace.speeds[seg]) * s);
        }
    }
    (angles, speeds)
}

fn grid_span(trace: &GeneratorTrace, rate: f64) -> (i64, i64) {
    let first = (trace.t0() * rate - GRID_TOL).ceil() as i64;
    let last = (trace.t_end() * rate + GRID_TOL).floor() as i64;
    (first, last)
}

/// Linearly interpolates a trace onto the absolute grid `k / rate` within its
/// time span.
pub fn resample(trace: &GeneratorTrace, rate: f64) -> Result<GeneratorTrace> {
    trace.validate()?;
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Param(format!("sample rate {rate} must be positive")));
    }
    let (first, last) = grid_span(trace, rate);
    if last < first {
        return Err(Error::Range { start: trace.t0(), end: trace.t_end() });
    }
    let (angles, speeds) = sample_grid(trace, rate, first, last);
    Ok(GeneratorTrace {
        gen_id: trace.gen_id,
        dt: 1.0 / rate,
        times: (first..=last).map(|k| k as f64 / rate).collect(),
        angles,
        speeds,
    })
}

/// Aligns traces at [`ASSESSMENT_RATE_HZ`].
pub fn align(traces: &[GeneratorTrace], meta: &EventMeta) -> Result<AlignedDataset> {
    align_at_rate(traces, meta, ASSESSMENT_RATE_HZ)
}

/// Resamples every trace to `rate_hz` and truncates to the common span that
/// starts at the first grid point at or after the clearing instant.
pub fn align_at_rate(traces: &[GeneratorTrace], meta: &EventMeta, rate_hz: u32) -> Result<AlignedDataset> {
    meta.validate()?;
    if rate_hz == 0 {
        return Err(Error::Param("sample rate must be positive".into()));
    }
    if traces.is_empty() {
        return Err(Error::Trace("no traces to align".into()));
    }
    let rate = f64::from(rate_hz);
    let start = (meta.clear_time * rate - GRID_TOL).ceil() as i64;
    let needed_end = meta.clear_time + MIN_COVERAGE;
    let mut offenders = Vec::new();
    let mut end = i64::MAX;
    for tr in traces {
        tr.validate()?;
        let (first, last) = grid_span(tr, rate);
        if first > start || tr.t_end() < needed_end - GRID_TOL / rate {
            offenders.push(tr.gen_id);
        } else {
            end = end.min(last);
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Coverage(offenders));
    }
    let mut order: Vec<&GeneratorTrace> = traces.iter().collect();
    order.sort_by_key(|t| t.gen_id);
    if order.windows(2).any(|w| w[0].gen_id == w[1].gen_id) {
        return Err(Error::Trace("duplicate generator id".into()));
    }
    let (angles, speeds) = order.iter().map(|tr| sample_grid(tr, rate, start, end)).unzip();
    Ok(AlignedDataset {
        rate_hz,
        start_index: start,
        gen_ids: order.iter().map(|t| t.gen_id).collect(),
        angles,
        speeds,
    })
}
