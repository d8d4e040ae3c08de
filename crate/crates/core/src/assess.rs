//! Stability criteria on MLE curves, system aggregation, and the end-to-end
//! online assessment pipeline.
//!
//! Per pair: an MLE that rises over its first `n_t` estimates means
//! first-swing instability. Otherwise the curve falls, reaches a trough and
//! turns; the sign of its first peak after that decides between multi-swing
//! instability (positive) and stability (non-positive). The system is stable
//! only when every assessed pair is.

use serde::{Deserialize, Serialize};

use crate::classify::{
    ClassifierConfig, Classification, DistanceSeries, EstimatorParams, MleStartFinder, SwingClassifier,
    SwingPattern,
};
use crate::error::{Error, Result};
use crate::extremum::{ExtremumDetector, ExtremumKind};
use crate::ingest::{align, AlignedDataset, EventMeta};
use crate::mle::{MleEstimator, MleSeries};
use crate::sim::SimulationOutput;
use crate::sdgp::{build_pair_trace, identify_sdgp, GenPair, SdgpConfig, SdgpTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PairStatus {
    Pending,
    UnstableFirstSwing,
    UnstableMultiSwing,
    Stable,
    UndeterminedTimeout,
    Skipped,
}

impl PairStatus {
    pub const ALL: [PairStatus; 6] = [
        PairStatus::Pending,
        PairStatus::UnstableFirstSwing,
        PairStatus::UnstableMultiSwing,
        PairStatus::Stable,
        PairStatus::UndeterminedTimeout,
        PairStatus::Skipped,
    ];

    pub fn is_unstable(self) -> bool {
        matches!(self, PairStatus::UnstableFirstSwing | PairStatus::UnstableMultiSwing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SystemStatus {
    Pending,
    Stable,
    Unstable,
    Undetermined,
}

impl SystemStatus {
    /// Process exit code: 0 stable, 2 unstable, 3 otherwise.
    pub fn exit_code(self) -> i32 {
        match self {
            SystemStatus::Stable => 0,
            SystemStatus::Unstable => 2,
            SystemStatus::Pending | SystemStatus::Undetermined => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub pair: GenPair,
    pub status: PairStatus,
    /// Seconds after clearing at which the status left `Pending`.
    pub decision_time: Option<f64>,
    pub peak_lambda: Option<f64>,
}

impl PairVerdict {
    pub fn pending(pair: GenPair) -> Self {
        Self { pair, status: PairStatus::Pending, decision_time: None, peak_lambda: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemVerdict {
    pub status: SystemStatus,
    pub pairs: Vec<PairVerdict>,
    pub decision_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaConfig {
    /// MLE samples in the initial-trend test.
    pub n_t: usize,
    /// Half width of the peak confirmation neighborhood.
    pub n_p: usize,
    /// Latest decision time after clearing (s).
    pub t_max: f64,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self { n_t: 24, n_p: 6, t_max: 10.0 }
    }
}

/// Least-squares slope of `ys` against the sample index.
fn index_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Applies the per-pair criteria to an MLE stream.
#[derive(Debug, Clone)]
pub struct PairAssessor {
    cfg: CriteriaConfig,
    lambdas: Vec<f64>,
    trough: ExtremumDetector,
    trough_at: Option<usize>,
    peak: Option<ExtremumDetector>,
    peak_at: Option<usize>,
    verdict: PairVerdict,
}

impl PairAssessor {
    pub fn new(pair: GenPair, cfg: CriteriaConfig) -> Self {
        let n_p = cfg.n_p;
        Self {
            cfg,
            lambdas: Vec::new(),
            trough: ExtremumDetector::new(ExtremumKind::Min, n_p),
            trough_at: None,
            peak: None,
            peak_at: None,
            verdict: PairVerdict::pending(pair),
        }
    }

    pub fn verdict(&self) -> &PairVerdict {
        &self.verdict
    }

    /// Feeds the next MLE estimate at `t` seconds after clearing.
    pub fn push(&mut self, lambda: f64, t: f64) -> PairVerdict {
        if self.verdict.status != PairStatus::Pending {
            return self.verdict.clone();
        }
        self.lambdas.push(lambda);
        self.track_extrema(lambda);
        let n = self.lambdas.len();
        if n == self.cfg.n_t {
            let head = &self.lambdas[..n];
            if index_slope(head) > 0.0 && head[n - 1] > head[0] {
                return self.decide(PairStatus::UnstableFirstSwing, t, None);
            }
        }
        if n >= self.cfg.n_t {
            if let Some(p) = self.peak_at {
                let peak = self.lambdas[p];
                let status = if peak > 0.0 { PairStatus::UnstableMultiSwing } else { PairStatus::Stable };
                return self.decide(status, t, Some(peak));
            }
        }
        if t >= self.cfg.t_max {
            return self.decide(PairStatus::UndeterminedTimeout, t, None);
        }
        self.verdict.clone()
    }

    fn track_extrema(&mut self, lambda: f64) {
        if self.trough_at.is_none() {
            if let Some(e) = self.trough.push(lambda) {
                self.trough_at = Some(e.index);
                let mut det = ExtremumDetector::starting_at(ExtremumKind::Max, self.cfg.n_p, e.index + 1);
                self.peak_at = self.lambdas.iter().find_map(|&x| det.push(x)).map(|p| p.index);
                self.peak = Some(det);
            }
        } else if self.peak_at.is_none() {
            if let Some(p) = self.peak.as_mut().and_then(|d| d.push(lambda)) {
                self.peak_at = Some(p.index);
            }
        }
    }

    fn decide(&mut self, status: PairStatus, t: f64, peak: Option<f64>) -> PairVerdict {
        self.verdict.status = status;
        self.verdict.decision_time = Some(t);
        self.verdict.peak_lambda = peak;
        self.verdict.clone()
    }
}

/// Combines pair verdicts: unstable as soon as any pair is unstable, stable
/// once every assessed pair is stable.
pub fn aggregate(verdicts: &[PairVerdict]) -> Result<SystemVerdict> {
    let assessed: Vec<&PairVerdict> = verdicts.iter().filter(|v| v.status != PairStatus::Skipped).collect();
    if assessed.is_empty() {
        return Err(Error::NoAssessablePair);
    }
    let earliest_unstable = assessed
        .iter()
        .filter(|v| v.status.is_unstable())
        .filter_map(|v| v.decision_time)
        .min_by(f64::total_cmp);
    let (status, decision_time) = if let Some(t) = earliest_unstable {
        (SystemStatus::Unstable, Some(t))
    } else if assessed.iter().any(|v| v.status == PairStatus::Pending) {
        (SystemStatus::Pending, None)
    } else {
        let last = assessed.iter().filter_map(|v| v.decision_time).max_by(f64::total_cmp);
        if assessed.iter().all(|v| v.status == PairStatus::Stable) {
            (SystemStatus::Stable, last)
        } else {
            (SystemStatus::Undetermined, last)
        }
    };
    Ok(SystemVerdict { status, pairs: verdicts.to_vec(), decision_time })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssessConfig {
    pub sdgp: SdgpConfig,
    pub classifier: ClassifierConfig,
    pub criteria: CriteriaConfig,
    /// Keep per-pair relative angle, distance and MLE series in the report.
    pub keep_series: bool,
}

impl AssessConfig {
    /// Sets the waiting limit of both classification and criteria.
    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.classifier.t_max = t_max;
        self.criteria.t_max = t_max;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub status: SystemStatus,
    pub decision_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub severe: u32,
    pub least: u32,
    pub pattern: Option<SwingPattern>,
    pub w: Option<usize>,
    pub m_n: Option<usize>,
    pub status: PairStatus,
    pub decision_time_s: Option<f64>,
    pub peak_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Series kept for plotting when [`AssessConfig::keep_series`] is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSeries {
    pub pair: GenPair,
    pub rel_angle: Vec<f64>,
    pub distance: Option<DistanceSeries>,
    pub mle: MleSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub system: SystemReport,
    pub pairs: Vec<PairReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub series: Vec<PairSeries>,
}

impl AssessmentReport {
    pub fn exit_code(&self) -> i32 {
        self.system.status.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One pair's online pipeline: classify, locate the estimation start, run
/// RLS, apply the criteria.
struct PairPipeline {
    trace: SdgpTrace,
    classifier: SwingClassifier,
    classification: Option<Classification>,
    start: Option<MleStartFinder>,
    distances_fed: usize,
    params: Option<EstimatorParams>,
    estimator: Option<MleEstimator>,
    fitted: usize,
    assessor: PairAssessor,
    mle: MleSeries,
    error: Option<String>,
    finished: bool,
    dt: f64,
}

impl PairPipeline {
    fn new(trace: SdgpTrace, cfg: &AssessConfig) -> Self {
        let dt = trace.dt;
        Self {
            classifier: SwingClassifier::new(cfg.classifier.clone(), dt),
            assessor: PairAssessor::new(trace.pair, cfg.criteria),
            trace,
            classification: None,
            start: None,
            distances_fed: 0,
            params: None,
            estimator: None,
            fitted: 0,
            mle: MleSeries::default(),
            error: None,
            finished: false,
            dt,
        }
    }

    fn stop(&mut self, status: PairStatus, n: usize, err: Error) {
        self.error = Some(err.to_string());
        self.finished = true;
        if status != PairStatus::Pending {
            let v = &mut self.assessor.verdict;
            v.status = status;
            v.decision_time = (status != PairStatus::Skipped).then_some(n as f64 * self.dt);
        }
    }

    /// Processes everything that becomes available with sample `n`.
    fn advance(&mut self, n: usize, cfg: &AssessConfig) {
        if self.finished {
            return;
        }
        if self.classification.is_none() {
            match self.classifier.push(self.trace.rel_speed[n]) {
                Ok(Some(c)) => {
                    self.classification = Some(c);
                    match MleStartFinder::new(c.pattern, c.w, &cfg.classifier, self.dt) {
                        Ok(f) => self.start = Some(f),
                        Err(e) => return self.stop(PairStatus::UndeterminedTimeout, n, e),
                    }
                }
                Ok(None) => return,
                Err(e @ Error::NearZeroSpeed { .. }) => {
                    log::warn!("pair {:?} skipped: {e}", self.trace.pair);
                    return self.stop(PairStatus::Skipped, n, e);
                }
                Err(e) => return self.stop(PairStatus::UndeterminedTimeout, n, e),
            }
        }
        let c = self.classification.expect("classified");
        if self.params.is_none() {
            let finder = self.start.as_mut().expect("start finder");
            let mut m_n = finder.immediate();
            while m_n.is_none() && self.distances_fed + c.w <= n {
                let j = self.distances_fed;
                let d = (self.trace.rel_angle[j + c.w] - self.trace.rel_angle[j]).abs();
                self.distances_fed += 1;
                match finder.push(d) {
                    Ok(found) => m_n = found,
                    Err(e) => return self.stop(PairStatus::UndeterminedTimeout, n, e),
                }
            }
            let Some(m_n) = m_n else { return };
            match EstimatorParams::new(c.w, m_n, self.dt, c.pattern, c.decided_at) {
                Ok(p) => {
                    self.params = Some(p);
                    self.estimator = Some(MleEstimator::new(p));
                }
                Err(e) => return self.stop(PairStatus::UndeterminedTimeout, n, e),
            }
        }
        let p = self.params.expect("params");
        let est = self.estimator.as_mut().expect("estimator");
        while p.m_n + self.fitted <= n {
            let j = p.first_distance() + self.fitted;
            let d = (self.trace.rel_angle[j + p.w] - self.trace.rel_angle[j]).abs();
            self.fitted += 1;
            match est.push(d) {
                Ok(Some((t, lambda))) => {
                    self.mle.times.push(t);
                    self.mle.lambdas.push(lambda);
                    let v = self.assessor.push(lambda, t);
                    if v.status != PairStatus::Pending {
                        self.finished = true;
                        return;
                    }
                }
                Ok(None) => {}
                Err(e) => return self.stop(PairStatus::UndeterminedTimeout, n, e),
            }
        }
    }

    fn report(&self) -> PairReport {
        let v = self.assessor.verdict();
        PairReport {
            severe: v.pair.severe,
            least: v.pair.least,
            pattern: self.classification.map(|c| c.pattern),
            w: self.classification.map(|c| c.w),
            m_n: self.params.map(|p| p.m_n),
            status: v.status,
            decision_time_s: v.decision_time,
            peak_lambda: v.peak_lambda,
            error: self.error.clone(),
        }
    }
}

/// Runs SDGP selection, classification, MLE estimation and the criteria over
/// an aligned dataset, sample by sample as an online monitor would.
pub fn run_assessment(dataset: &AlignedDataset, meta: &EventMeta, config: &AssessConfig) -> Result<AssessmentReport> {
    meta.validate()?;
    config.classifier.validate()?;
    if dataset.len() < 2 {
        return Err(Error::Trace("aligned dataset is too short".into()));
    }
    let selection = identify_sdgp(&dataset.clearing_speeds(), &config.sdgp)?;
    let mut warnings = Vec::new();
    if selection.least_ratio > crate::sdgp::LEAST_RATIO_WARNING {
        warnings.push(format!(
            "least disturbed generator carries {:.2} of the peak clearing-instant speed",
            selection.least_ratio
        ));
    }
    let mut pipelines = selection
        .pairs
        .iter()
        .map(|&pair| Ok(PairPipeline::new(build_pair_trace(dataset, pair)?, config)))
        .collect::<Result<Vec<_>>>()?;

    for n in 0..dataset.len() {
        for p in pipelines.iter_mut() {
            p.advance(n, config);
        }
        if pipelines.iter().all(|p| p.finished) {
            break;
        }
    }

    for p in &pipelines {
        if let Some(e) = &p.error {
            warnings.push(format!("pair {}-{}: {e}", p.trace.pair.severe, p.trace.pair.least));
        }
    }
    let verdicts: Vec<PairVerdict> = pipelines.iter().map(|p| p.assessor.verdict().clone()).collect();
    let (system, error) = match aggregate(&verdicts) {
        Ok(v) => (SystemReport { status: v.status, decision_time_s: v.decision_time }, None),
        Err(e @ Error::NoAssessablePair) => {
            (SystemReport { status: SystemStatus::Undetermined, decision_time_s: None }, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let series = if config.keep_series {
        pipelines
            .iter()
            .map(|p| PairSeries {
                pair: p.trace.pair,
                rel_angle: p.trace.rel_angle.clone(),
                distance: p.classification.and_then(|c| crate::classify::distance_series(&p.trace.rel_angle, c.w).ok()),
                mle: p.mle.clone(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(AssessmentReport { system, pairs: pipelines.iter().map(PairPipeline::report).collect(), warnings, error, series })
}

/// Aligns simulator output at its clearing instant and assesses it.
pub fn assess_simulation(sim: &SimulationOutput, config: &AssessConfig) -> Result<AssessmentReport> {
    let meta = EventMeta {
        fault_time: sim.fault.fault_time,
        clear_time: sim.fault.clear_time,
        label: sim.fault.label.clone(),
    };
    let data = align(&sim.traces, &meta)?;
    run_assessment(&data, &meta, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: GenPair = GenPair { severe: 1, least: 2 };

    fn run(lambdas: &[f64]) -> PairVerdict {
        let mut a = PairAssessor::new(PAIR, CriteriaConfig::default());
        let mut last = a.verdict().clone();
        for (i, &l) in lambdas.iter().enumerate() {
            last = a.push(l, (i + 1) as f64 / 120.0);
            if last.status != PairStatus::Pending {
                break;
            }
        }
        last
    }

    /// Piecewise-linear sequence through `(index, value)` knots.
    fn knots(points: &[(usize, f64)]) -> Vec<f64> {
        let mut out = Vec::new();
        for w in points.windows(2) {
            let ((i0, v0), (i1, v1)) = (w[0], w[1]);
            for i in i0..i1 {
                out.push(v0 + (v1 - v0) * (i - i0) as f64 / (i1 - i0) as f64);
            }
        }
        out.push(points.last().unwrap().1);
        out
    }

    #[test]
    fn rising_mle_is_first_swing_unstable() {
        let l: Vec<f64> = (0..100).map(|i| 0.5 + 0.05 * i as f64).collect();
        let v = run(&l);
        assert_eq!(v.status, PairStatus::UnstableFirstSwing);
        assert!((v.decision_time.unwrap() - 24.0 / 120.0).abs() < 1e-12);
    }

    #[test]
    fn positive_first_peak_is_multi_swing_unstable() {
        let v = run(&knots(&[(0, 0.3), (30, -0.2), (60, 0.15), (100, -0.1)]));
        assert_eq!(v.status, PairStatus::UnstableMultiSwing);
        assert_eq!(v.peak_lambda, Some(0.15));
    }

    #[test]
    fn negative_first_peak_is_stable() {
        let v = run(&knots(&[(0, 0.3), (30, -0.2), (60, -0.05), (100, -0.3)]));
        assert_eq!(v.status, PairStatus::Stable);
        assert_eq!(v.peak_lambda, Some(-0.05));
    }

    #[test]
    fn monotone_decrease_times_out() {
        let l: Vec<f64> = (0..1300).map(|i| -0.001 * i as f64).collect();
        assert_eq!(run(&l).status, PairStatus::UndeterminedTimeout);
    }

    #[test]
    fn verdict_is_frozen() {
        let mut a = PairAssessor::new(PAIR, CriteriaConfig::default());
        let l: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let first = l.iter().enumerate().map(|(i, &x)| a.push(x, i as f64)).last().unwrap();
        let after = a.push(-100.0, 99.0);
        assert_eq!(first, after);
    }

    fn verdict(status: PairStatus, t: f64) -> PairVerdict {
        PairVerdict {
            pair: PAIR,
            status,
            decision_time: (status != PairStatus::Pending).then_some(t),
            peak_lambda: None,
        }
    }

    #[test]
    fn aggregation_examples() {
        let s = |v: &[PairVerdict]| aggregate(v).unwrap().status;
        assert_eq!(s(&[verdict(PairStatus::Stable, 1.0), verdict(PairStatus::Stable, 2.0)]), SystemStatus::Stable);
        assert_eq!(
            s(&[verdict(PairStatus::Stable, 1.0), verdict(PairStatus::UnstableMultiSwing, 2.0)]),
            SystemStatus::Unstable
        );
        let early = aggregate(&[verdict(PairStatus::Pending, 0.0), verdict(PairStatus::UnstableFirstSwing, 0.3)]).unwrap();
        assert_eq!(early.status, SystemStatus::Unstable);
        assert_eq!(early.decision_time, Some(0.3));
    }

    #[test]
    fn all_skipped_is_an_error() {
        let err = aggregate(&[verdict(PairStatus::Skipped, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::NoAssessablePair));
    }
}
