//! Severely disturbed generator pair (SDGP) identification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AlignedDataset;
use crate::GenId;

/// Ratio `|w_least| / w*` above which the pairing is flagged as suspicious.
pub const LEAST_RATIO_WARNING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdgpConfig {
    pub sigma: f64,
}

impl Default for SdgpConfig {
    fn default() -> Self {
        Self { sigma: 0.7 }
    }
}

impl SdgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma > 0.0 && self.sigma <= 1.0 {
            Ok(())
        } else {
            Err(Error::Param(format!("sigma {} must lie in (0, 1]", self.sigma)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenPair {
    pub severe: GenId,
    pub least: GenId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdgpSelection {
    pub pairs: Vec<GenPair>,
    /// `|w_least| / w*`; large values mean the whole system swings together.
    pub least_ratio: f64,
}

/// Picks the severely disturbed generators (`|w_g| / w* > sigma`) and pairs
/// each with the least disturbed one (smallest `|w|`, lowest id on ties).
pub fn identify_sdgp(speeds: &[(GenId, f64)], cfg: &SdgpConfig) -> Result<SdgpSelection> {
    cfg.validate()?;
    if speeds.len() < 2 {
        return Err(Error::Param("SDGP identification needs at least two generators".into()));
    }
    let mut sorted = speeds.to_vec();
    sorted.sort_by_key(|&(id, _)| id);
    let peak = sorted.iter().map(|&(_, w)| w.abs()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::NoDisturbance);
    }
    let (least, least_speed) = sorted
        .iter()
        .copied()
        .reduce(|best, cur| if cur.1.abs() < best.1.abs() { cur } else { best })
        .expect("non-empty");
    let pairs: Vec<GenPair> = sorted
        .iter()
        .filter(|&&(id, w)| id != least && w.abs() / peak > cfg.sigma)
        .map(|&(severe, _)| GenPair { severe, least })
        .collect();
    if pairs.is_empty() {
        return Err(Error::DegenerateEvent);
    }
    let least_ratio = least_speed.abs() / peak;
    if least_ratio > LEAST_RATIO_WARNING {
        log::warn!("least disturbed generator {least} carries {least_ratio:.2} of the peak speed");
    }
    Ok(SdgpSelection { pairs, least_ratio })
}

/// Sign-oriented relative series of one pair, starting at the clearing instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdgpTrace {
    pub pair: GenPair,
    pub sign_flipped: bool,
    pub rel_angle: Vec<f64>,
    pub rel_speed: Vec<f64>,
    pub v0: f64,
    pub dt: f64,
}

/// Severe minus least, negated when needed so that the initial relative
/// speed is non-negative.
pub fn build_pair_trace(data: &AlignedDataset, pair: GenPair) -> Result<SdgpTrace> {
    let s = data.position(pair.severe)?;
    let l = data.position(pair.least)?;
    let mut rel_angle: Vec<f64> = data.angles[s].iter().zip(&data.angles[l]).map(|(a, b)| a - b).collect();
    let mut rel_speed: Vec<f64> = data.speeds[s].iter().zip(&data.speeds[l]).map(|(a, b)| a - b).collect();
    let sign_flipped = rel_speed.first().is_some_and(|&v| v < 0.0);
    if sign_flipped {
        rel_angle.iter_mut().for_each(|x| *x = -*x);
        rel_speed.iter_mut().for_each(|x| *x = -*x);
    }
    let v0 = rel_speed.first().copied().unwrap_or(0.0);
    Ok(SdgpTrace { pair, sign_flipped, rel_angle, rel_speed, v0, dt: data.dt() })
}
