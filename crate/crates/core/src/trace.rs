//! Rotor trace container and the CSV trace format
//! (`t,gen_id,delta_rad,omega_rad_per_s`, one row per sample and generator).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::GenId;

pub const CSV_HEADER: &str = "t,gen_id,delta_rad,omega_rad_per_s";

type Columns = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Sampled rotor angle (rad) and speed deviation (rad/s) of one generator.
///
/// `times` holds the actual timestamps; `dt` is the nominal sample period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTrace {
    pub gen_id: GenId,
    pub dt: f64,
    pub times: Vec<f64>,
    pub angles: Vec<f64>,
    pub speeds: Vec<f64>,
}

impl GeneratorTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n < 2 || self.angles.len() != n || self.speeds.len() != n {
            return Err(Error::Trace(format!(
                "generator {}: need at least two samples with equal-length channels",
                self.gen_id
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Trace(format!("generator {}: sample period must be positive", self.gen_id)));
        }
        if self.times.iter().chain(&self.angles).chain(&self.speeds).any(|x| !x.is_finite()) {
            return Err(Error::Trace(format!("generator {}: non-finite sample", self.gen_id)));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Trace(format!("generator {}: timestamps not increasing", self.gen_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOptions {
    /// When the file holds absolute speeds, the nominal speed to subtract (rad/s).
    pub nominal_speed: Option<f64>,
}

/// Renders traces as CSV. Rows are ordered by sample index, then generator id.
pub fn write_traces(traces: &[GeneratorTrace]) -> String {
    let mut order: Vec<&GeneratorTrace> = traces.iter().collect();
    order.sort_by_key(|t| t.gen_id);
    let longest = order.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut out = String::with_capacity(48 * longest * order.len() + 40);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for k in 0..longest {
        for tr in order.iter().filter(|t| k < t.len()) {
            let _ = writeln!(out, "{},{},{},{}", tr.times[k], tr.gen_id, tr.angles[k], tr.speeds[k]);
        }
    }
    out
}

/// Parses the CSV trace format. Rows of different generators may be
/// interleaved; within one generator timestamps must strictly increase.
pub fn parse_traces(text: &str, opts: &ParseOptions) -> Result<Vec<GeneratorTrace>> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    if header != CSV_HEADER {
        return Err(Error::Parse { line: 1, msg: format!("expected header `{CSV_HEADER}`") });
    }
    // per generator: times, angles, speeds
    let mut groups: BTreeMap<GenId, Columns> = BTreeMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse { line, msg: format!("expected 4 fields, found {}", fields.len()) });
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = fields[i]
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("invalid {name} `{}`", fields[i]) })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse { line, msg: format!("non-finite {name}") })
            }
        };
        let t = num(0, "time")?;
        let gen_id: GenId = fields[1]
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("invalid gen_id `{}`", fields[1]) })?;
        let angle = num(2, "angle")?;
        let mut speed = num(3, "speed")?;
        if let Some(nominal) = opts.nominal_speed {
            speed -= nominal;
        }
        let entry = groups.entry(gen_id).or_default();
        if let Some(&prev) = entry.0.last() {
            if t == prev {
                return Err(Error::DuplicateSample { line, gen_id, t });
            }
            if t < prev {
                return Err(Error::Ordering { line, gen_id, t });
            }
        }
        entry.0.push(t);
        entry.1.push(angle);
        entry.2.push(speed);
    }
    if groups.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no samples".into() });
    }
    groups
        .into_iter()
        .map(|(gen_id, (times, angles, speeds))| {
            let dt = nominal_period(&times).ok_or_else(|| {
                Error::Trace(format!("generator {gen_id}: need at least two samples"))
            })?;
            if let Some(gap) = times.windows(2).map(|w| w[1] - w[0]).find(|&d| d > 2.0 * dt * (1.0 + 1e-9)) {
                return Err(Error::Gap { gen_id, gap });
            }
            let tr = GeneratorTrace { gen_id, dt, times, angles, speeds };
            tr.validate()?;
            Ok(tr)
        })
        .collect()
}

/// Median sample spacing.
fn nominal_period(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        return None;
    }
    let mut diffs: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.sort_by(f64::total_cmp);
    Some(diffs[diffs.len() / 2])
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BY_THREE: &str = "t,gen_id,delta_rad,omega_rad_per_s
0,1,0.1,0
0,2,0.2,0
0.5,1,0.11,0.01
0.5,2,0.19,-0.01
1,1,0.12,0.02
1,2,0.18,-0.02
";

    #[test]
    fn two_generators_three_samples() {
        let traces = parse_traces(TWO_BY_THREE, &ParseOptions::default()).unwrap();
        assert_eq!(traces.len(), 2);
        assert!(traces.iter().all(|t| t.len() == 3));
        assert_eq!(traces[1].angles, vec![0.2, 0.19, 0.18]);
        assert_eq!(traces[0].dt, 0.5);
    }

    #[test]
    fn duplicate_row_names_line() {
        let text = format!("{TWO_BY_THREE}1,2,0.18,-0.02\n");
        let err = parse_traces(&text, &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateSample { line: 8, gen_id: 2, .. }), "{err}");
        assert!(err.to_string().starts_with("line 8"));
    }

    #[test]
    fn backwards_time_is_ordering_error() {
        let text = format!("{TWO_BY_THREE}0.7,1,0.1,0\n");
        assert!(matches!(
            parse_traces(&text, &ParseOptions::default()),
            Err(Error::Ordering { line: 8, gen_id: 1, .. })
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "t,gen_id,delta_rad,omega_rad_per_s\n0,1,0.1,0\n0.1,1,abc,0\n";
        assert!(matches!(parse_traces(text, &ParseOptions::default()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn large_gap_is_rejected() {
        let text = "t,gen_id,delta_rad,omega_rad_per_s\n0,1,0,0\n0.1,1,0,0\n0.2,1,0,0\n0.6,1,0,0\n";
        assert!(matches!(parse_traces(text, &ParseOptions::default()), Err(Error::Gap { gen_id: 1, .. })));
    }

    #[test]
    fn nominal_speed_is_subtracted() {
        let text = "t,gen_id,delta_rad,omega_rad_per_s\n0,1,0,377\n0.1,1,0,378\n";
        let opts = ParseOptions { nominal_speed: Some(377.0) };
        let tr = parse_traces(text, &opts).unwrap();
        assert_eq!(tr[0].speeds, vec![0.0, 1.0]);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let traces = parse_traces(TWO_BY_THREE, &ParseOptions::default()).unwrap();
        assert_eq!(write_traces(&traces), TWO_BY_THREE);
    }
}
