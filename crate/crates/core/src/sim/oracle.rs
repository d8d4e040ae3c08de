//! Long-horizon time-domain stability verdict used as ground truth.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dynamics::SimulationOutput;
use crate::error::{Error, Result};
use crate::trace::GeneratorTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OracleVerdict {
    Stable,
    Unstable,
}

/// Relative angle magnitude that counts as a pole slip at any instant.
pub const SLIP_ANGLE: f64 = 4.0 * PI;
/// Relative angle magnitude that counts as lost synchronism at the window end
/// when still growing over the last [`TREND_SPAN`] seconds.
pub const END_ANGLE: f64 = PI;
pub const TREND_SPAN: f64 = 1.0;

/// Judges a simulation over `window` seconds after its clearing instant.
pub fn stability_oracle(sim: &SimulationOutput, window: f64) -> Result<OracleVerdict> {
    if sim.diverged {
        return Ok(OracleVerdict::Unstable);
    }
    oracle_from_traces(&sim.traces, sim.fault.clear_time, window)
}

/// Same rule applied to bare traces sharing one time base.
pub fn oracle_from_traces(traces: &[GeneratorTrace], t_clear: f64, window: f64) -> Result<OracleVerdict> {
    if traces.len() < 2 {
        return Err(Error::Param("stability oracle needs at least two traces".into()));
    }
    let times = &traces[0].times;
    if traces.iter().any(|t| t.times.len() != times.len()) {
        return Err(Error::Param("oracle traces must share one time base".into()));
    }
    let t_end = t_clear + window;
    let tol = 1e-9 * traces[0].dt.max(1e-12);
    let last = times.iter().rposition(|&t| t <= t_end + tol);
    let covered = times.last().is_some_and(|&t| t >= t_end - traces[0].dt * 0.5);
    let Some(last) = last.filter(|_| covered) else {
        return Err(Error::Coverage(traces.iter().map(|t| t.gen_id).collect()));
    };
    let first = times.iter().position(|&t| t >= t_clear - tol).unwrap_or(0);
    let back = times.iter().rposition(|&t| t <= times[last] - TREND_SPAN + tol).unwrap_or(first);

    for a in 0..traces.len() {
        for b in (a + 1)..traces.len() {
            let rel = |k: usize| (traces[a].angles[k] - traces[b].angles[k]).abs();
            if (first..=last).any(|k| rel(k) > SLIP_ANGLE) {
                return Ok(OracleVerdict::Unstable);
            }
            if rel(last) > END_ANGLE && rel(last) > rel(back) {
                return Ok(OracleVerdict::Unstable);
            }
        }
    }
    Ok(OracleVerdict::Stable)
}
