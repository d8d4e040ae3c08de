//! Online swing-pattern classification of the relative rotor speed, and the
//! resulting Theiler window `w` and estimation start step `m_n`.
//!
//! Sample 0 is the clearing instant. Patterns:
//!
//! * I   - speed keeps rising without deceleration; `w = 1`.
//! * II  - speed dips, then climbs back to `v0`; `w` = index of that return.
//! * III - speed falls to `-v0`; `w` = index of the first `-v0`.
//! * IV  - speed falls to a minimum above `-v0` and oscillates; `w` = that minimum.
//! * V   - decelerated growth, a peak, then `-v0`; `w` as in III.
//! * VI  - decelerated growth, a peak, then a minimum above `-v0`; `w` as in IV.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremum::{ExtremumDetector, ExtremumKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwingPattern {
    I,
    II,
    III,
    IV,
    V,
    VI,
    #[serde(rename = "UNDETERMINED")]
    Undetermined,
}

impl SwingPattern {
    pub const ALL: [SwingPattern; 6] =
        [SwingPattern::I, SwingPattern::II, SwingPattern::III, SwingPattern::IV, SwingPattern::V, SwingPattern::VI];

    /// Patterns whose distance is monotone from the clearing instant.
    pub fn starts_immediately(self) -> bool {
        matches!(self, SwingPattern::I | SwingPattern::II)
    }
}

impl fmt::Display for SwingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SwingPattern::I => "I",
            SwingPattern::II => "II",
            SwingPattern::III => "III",
            SwingPattern::IV => "IV",
            SwingPattern::V => "V",
            SwingPattern::VI => "VI",
            SwingPattern::Undetermined => "UNDETERMINED",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Confirmation window for the initial trend (samples).
    pub n_c: usize,
    /// Half width of the extremum confirmation neighborhood (samples).
    pub n_p: usize,
    /// Crossing tolerance as a fraction of `v0`.
    pub eps_v_frac: f64,
    /// Absolute floor of the crossing tolerance (rad/s).
    pub eps_v_floor: f64,
    /// Deceleration threshold as a fraction of `v0` accumulated over `n_c` samples.
    pub eps_a_frac: f64,
    /// Longest post-clearing span the classifier waits for (s).
    pub t_max: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { n_c: 12, n_p: 6, eps_v_frac: 0.02, eps_v_floor: 1e-6, eps_a_frac: 0.02, t_max: 10.0 }
    }
}

impl ClassifierConfig {
    pub fn eps_v(&self, v0: f64) -> f64 {
        (self.eps_v_frac * v0).max(self.eps_v_floor)
    }

    /// Threshold on the 5-point smoothed second difference, in rad/s per sample^2.
    pub fn eps_a(&self, v0: f64) -> f64 {
        self.eps_a_frac * v0 / (self.n_c * self.n_c) as f64
    }

    pub fn max_samples(&self, dt: f64) -> usize {
        (self.t_max / dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_c < 4 || self.n_p == 0 {
            return Err(Error::Param("n_c must be at least 4 and n_p positive".into()));
        }
        if !(self.t_max > 0.0) || !(self.eps_v_frac >= 0.0) || !(self.eps_a_frac >= 0.0) {
            return Err(Error::Param("t_max and tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of swing classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub pattern: SwingPattern,
    pub w: usize,
    pub decided_at: usize,
}

/// Savitzky-Golay 5-point second derivative at center `c` (per sample^2).
fn second_difference(v: &[f64], c: usize) -> f64 {
    (2.0 * v[c - 2] - v[c - 1] - 2.0 * v[c] - v[c + 1] + 2.0 * v[c + 2]) / 7.0
}

/// Slope at index 0 of a quadratic least-squares fit to `v`.
fn initial_slope(v: &[f64]) -> f64 {
    let mut a = [[0.0f64; 4]; 3];
    for (k, &y) in v.iter().enumerate() {
        let x = k as f64;
        let basis = [1.0, x, x * x];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += basis[r] * basis[c];
            }
            a[r][3] += basis[r] * y;
        }
    }
    for k in 0..3 {
        let piv = (k..3).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        for r in 0..3 {
            if r != k {
                let f = a[r][k] / a[k][k];
                let pivot_row = a[k];
                for (x, p) in a[r][k..].iter_mut().zip(&pivot_row[k..]) {
                    *x -= f * p;
                }
            }
        }
    }
    a[1][3] / a[1][1]
}

/// A post-peak dip that keeps the relative speed positive never turns the
/// rotor back: the angle keeps slipping, so it is not an oscillation.
fn after_peak_minimum(v: &[f64], index: usize) -> SwingPattern {
    if v[index] > 0.0 {
        SwingPattern::I
    } else {
        SwingPattern::VI
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Direction {
    Down,
    Up,
}

/// Tracks the first approach to a threshold within tolerance `eps`. The
/// crossing index is the first sample beyond the threshold itself, or, if
/// the signal turns back inside the tolerance band, its closest approach.
#[derive(Debug, Clone)]
struct BandCrossing {
    target: f64,
    eps: f64,
    dir: Direction,
    best: Option<(usize, f64)>,
}

impl BandCrossing {
    fn new(target: f64, eps: f64, dir: Direction) -> Self {
        Self { target, eps, dir, best: None }
    }

    fn beyond(&self, x: f64, margin: f64) -> bool {
        match self.dir {
            Direction::Down => x <= self.target + margin,
            Direction::Up => x >= self.target - margin,
        }
    }

    fn in_band(&self) -> bool {
        self.best.is_some()
    }

    /// Returns the crossing index once decided.
    fn push(&mut self, i: usize, x: f64, turned: bool) -> Option<usize> {
        if self.beyond(x, 0.0) {
            return Some(i);
        }
        if self.beyond(x, self.eps) {
            let closer = match (self.best, self.dir) {
                (None, _) => true,
                (Some((_, b)), Direction::Down) => x < b,
                (Some((_, b)), Direction::Up) => x > b,
            };
            if closer {
                self.best = Some((i, x));
            }
            if turned {
                return self.best.map(|b| b.0);
            }
            return None;
        }
        // left the band without reaching the threshold
        self.best.map(|b| b.0)
    }
}

#[derive(Debug, Clone)]
enum Phase {
    Collecting,
    Decreasing(Decreasing),
    Increasing(Increasing),
    Done,
}

#[derive(Debug, Clone)]
struct Decreasing {
    to_neg: BandCrossing,
    to_pos: BandCrossing,
    armed_pos: bool,
    minima: ExtremumDetector,
    maxima: Option<ExtremumDetector>,
    candidate_min: Option<usize>,
}

#[derive(Debug, Clone)]
struct Increasing {
    peak: ExtremumDetector,
    after_peak: Option<(BandCrossing, ExtremumDetector)>,
    accel_run: usize,
}

/// Online swing-pattern automaton; feed relative speed samples from the
/// clearing instant onwards. Emits a [`Classification`] exactly once.
#[derive(Debug, Clone)]
pub struct SwingClassifier {
    cfg: ClassifierConfig,
    dt: f64,
    v: Vec<f64>,
    v0: f64,
    phase: Phase,
    result: Option<Classification>,
}

impl SwingClassifier {
    pub fn new(cfg: ClassifierConfig, dt: f64) -> Self {
        Self { cfg, dt, v: Vec::new(), v0: 0.0, phase: Phase::Collecting, result: None }
    }

    pub fn result(&self) -> Option<Classification> {
        self.result
    }

    pub fn samples(&self) -> &[f64] {
        &self.v
    }

    /// Feeds one sample. Errors when `v0` is too small to classify or when
    /// no decision is reached within `t_max`.
    pub fn push(&mut self, v: f64) -> Result<Option<Classification>> {
        if matches!(self.phase, Phase::Done) {
            return Ok(None);
        }
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        let i = self.v.len();
        self.v.push(v);
        if i == 0 {
            self.v0 = v;
            if v < 0.0 {
                return Err(Error::Param("relative speed must be oriented so that v0 >= 0".into()));
            }
            if v < self.cfg.eps_v_floor {
                self.phase = Phase::Done;
                return Err(Error::NearZeroSpeed { v0: v });
            }
        }
        let decided = match &self.phase {
            Phase::Collecting if i == self.cfg.n_c => self.choose_branch(),
            Phase::Collecting => None,
            _ => self.step(i),
        };
        if let Some(c) = decided {
            self.phase = Phase::Done;
            self.result = Some(c);
            return Ok(Some(c));
        }
        if i + 1 >= self.cfg.max_samples(self.dt) {
            self.phase = Phase::Done;
            return Err(Error::Timeout(self.cfg.t_max));
        }
        Ok(None)
    }

    fn choose_branch(&mut self) -> Option<Classification> {
        let n_c = self.cfg.n_c;
        let v0 = self.v0;
        let eps_v = self.cfg.eps_v(v0);
        let window = &self.v[..=n_c];
        if initial_slope(window) < 0.0 && window[n_c] < window[0] {
            self.phase = Phase::Decreasing(Decreasing {
                to_neg: BandCrossing::new(-v0, eps_v, Direction::Down),
                to_pos: BandCrossing::new(v0, eps_v, Direction::Up),
                armed_pos: false,
                minima: ExtremumDetector::new(ExtremumKind::Min, self.cfg.n_p),
                maxima: None,
                candidate_min: None,
            });
        } else {
            let eps_a = self.cfg.eps_a(v0);
            let decelerating = (2..=n_c - 2).any(|c| second_difference(window, c) < -eps_a);
            if !decelerating && window[n_c] > window[0] {
                return Some(Classification { pattern: SwingPattern::I, w: 1, decided_at: n_c });
            }
            self.phase = Phase::Increasing(Increasing {
                peak: ExtremumDetector::new(ExtremumKind::Max, self.cfg.n_p),
                after_peak: None,
                accel_run: 0,
            });
        }
        (0..=n_c).find_map(|k| self.step(k))
    }

    fn step(&mut self, i: usize) -> Option<Classification> {
        let x = self.v[i];
        let v0 = self.v0;
        let eps_v = self.cfg.eps_v(v0);
        let n_p = self.cfg.n_p;
        let n_c = self.cfg.n_c;
        let eps_a = self.cfg.eps_a(v0);
        let decided_at = self.v.len() - 1;
        let emit = |pattern, w| Some(Classification { pattern, w, decided_at });
        match &mut self.phase {
            Phase::Decreasing(s) => {
                let min = s.minima.push(x);
                let max = s.maxima.as_mut().and_then(|m| m.push(x));
                if let Some(w) = s.to_neg.push(i, x, min.is_some() && s.to_neg.in_band()) {
                    return emit(SwingPattern::III, w);
                }
                if !s.armed_pos && x < v0 - eps_v {
                    s.armed_pos = true;
                }
                if s.armed_pos {
                    if let Some(w) = s.to_pos.push(i, x, max.is_some() && s.to_pos.in_band()) {
                        return emit(SwingPattern::II, w);
                    }
                }
                if let (Some(m), None) = (min, s.candidate_min) {
                    s.candidate_min = Some(m.index);
                    let mut det = ExtremumDetector::starting_at(ExtremumKind::Max, n_p, m.index + 1);
                    let mut hit = None;
                    for &y in &self.v[..i] {
                        hit = hit.or(det.push(y));
                    }
                    hit = hit.or(det.push(x));
                    s.maxima = Some(det);
                    if let Some(peak) = hit {
                        if self.v[peak.index] < v0 - eps_v {
                            return emit(SwingPattern::IV, m.index);
                        }
                    }
                } else if let (Some(peak), Some(j)) = (max, s.candidate_min) {
                    if self.v[peak.index] < v0 - eps_v {
                        return emit(SwingPattern::IV, j);
                    }
                }
                None
            }
            Phase::Increasing(s) => {
                match &mut s.after_peak {
                    None => {
                        if let Some(p) = s.peak.push(x) {
                            let mut band = BandCrossing::new(-v0, eps_v, Direction::Down);
                            let mut minima = ExtremumDetector::starting_at(ExtremumKind::Min, n_p, p.index);
                            for k in 0..=i {
                                let y = self.v[k];
                                let m = minima.push(y);
                                if k > p.index {
                                    if let Some(w) = band.push(k, y, m.is_some() && band.in_band()) {
                                        return emit(SwingPattern::V, w);
                                    }
                                    if let Some(m) = m {
                                        let pattern = after_peak_minimum(&self.v, m.index);
                                        return emit(pattern, if pattern == SwingPattern::I { 1 } else { m.index });
                                    }
                                }
                            }
                            s.after_peak = Some((band, minima));
                            return None;
                        }
                        // renewed acceleration before any peak: no decelerating area
                        if i >= 4 && i > n_c {
                            let c = i - 2;
                            if second_difference(&self.v, c) >= eps_a && self.v[c] > self.v[c - 1] {
                                s.accel_run += 1;
                            } else {
                                s.accel_run = 0;
                            }
                            if s.accel_run >= n_c {
                                return emit(SwingPattern::I, 1);
                            }
                        }
                        None
                    }
                    Some((band, minima)) => {
                        let m = minima.push(x);
                        if let Some(w) = band.push(i, x, m.is_some() && band.in_band()) {
                            return emit(SwingPattern::V, w);
                        }
                        if let Some(m) = m {
                            let pattern = after_peak_minimum(&self.v, m.index);
                            return emit(pattern, if pattern == SwingPattern::I { 1 } else { m.index });
                        }
                        None
                    }
                }
            }
            Phase::Collecting | Phase::Done => None,
        }
    }
}

/// Classifies a complete relative speed series.
pub fn classify_series(v: &[f64], cfg: &ClassifierConfig, dt: f64) -> Result<Classification> {
    let mut c = SwingClassifier::new(cfg.clone(), dt);
    for &x in v {
        if let Some(r) = c.push(x)? {
            return Ok(r);
        }
    }
    Err(Error::Timeout(v.len() as f64 * dt))
}

/// `d_j = |theta_{j+w} - theta_j|` for `j = 0 .. len - w - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSeries {
    pub d: Vec<f64>,
    pub w: usize,
    pub valid_from: usize,
}

pub fn distance_series(rel_angle: &[f64], w: usize) -> Result<DistanceSeries> {
    if w == 0 || rel_angle.len() <= w {
        return Err(Error::Param(format!(
            "distance series needs 0 < w < series length ({} samples, w = {w})",
            rel_angle.len()
        )));
    }
    let d = rel_angle.windows(w + 1).map(|s| (s[w] - s[0]).abs()).collect();
    Ok(DistanceSeries { d, w, valid_from: 0 })
}

/// Parameters handed to the MLE estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub w: usize,
    pub m_n: usize,
    pub dt: f64,
    pub pattern: SwingPattern,
    /// Sample index at which the swing classification was finalized.
    pub decided_at: usize,
}

impl EstimatorParams {
    pub fn new(w: usize, m_n: usize, dt: f64, pattern: SwingPattern, decided_at: usize) -> Result<Self> {
        if w < 1 || m_n < w || !(dt > 0.0) {
            return Err(Error::Param(format!("invalid estimator parameters w = {w}, m_n = {m_n}")));
        }
        if pattern.starts_immediately() && m_n != w {
            return Err(Error::Param(format!("pattern {pattern} requires m_n = w")));
        }
        Ok(Self { w, m_n, dt, pattern, decided_at })
    }

    /// Offset `j*` of the first fitted distance.
    pub fn first_distance(&self) -> usize {
        self.m_n - self.w
    }
}

/// Online search for `m_n`: `w` for Patterns I-II, `w + j*` otherwise, with
/// `j*` the first confirmed local maximum of the distance series.
#[derive(Debug, Clone)]
pub struct MleStartFinder {
    w: usize,
    detector: Option<ExtremumDetector>,
    max_len: usize,
    t_max: f64,
    seen: usize,
}

impl MleStartFinder {
    pub fn new(pattern: SwingPattern, w: usize, cfg: &ClassifierConfig, dt: f64) -> Result<Self> {
        if pattern == SwingPattern::Undetermined {
            return Err(Error::Param("pattern must be determined".into()));
        }
        let detector =
            (!pattern.starts_immediately()).then(|| ExtremumDetector::new(ExtremumKind::Max, cfg.n_p));
        Ok(Self { w, detector, max_len: cfg.max_samples(dt), t_max: cfg.t_max, seen: 0 })
    }

    /// Available without any distance samples for Patterns I-II.
    pub fn immediate(&self) -> Option<usize> {
        self.detector.is_none().then_some(self.w)
    }

    /// Feeds `d_j` in order. `Ok(Some(m_n))` once found.
    pub fn push(&mut self, d: f64) -> Result<Option<usize>> {
        let Some(det) = self.detector.as_mut() else {
            return Ok(Some(self.w));
        };
        self.seen += 1;
        if let Some(e) = det.push(d) {
            return Ok(Some(self.w + e.index));
        }
        if self.seen + self.w >= self.max_len {
            return Err(Error::Timeout(self.t_max));
        }
        Ok(None)
    }
}

/// Batch form of [`MleStartFinder`].
pub fn find_mle_start(
    pattern: SwingPattern,
    w: usize,
    d: &DistanceSeries,
    cfg: &ClassifierConfig,
    dt: f64,
) -> Result<usize> {
    let mut finder = MleStartFinder::new(pattern, w, cfg, dt)?;
    if let Some(m) = finder.immediate() {
        return Ok(m);
    }
    for &x in &d.d {
        if let Some(m) = finder.push(x)? {
            return Ok(m);
        }
    }
    Err(Error::Timeout(d.d.len() as f64 * dt))
}
