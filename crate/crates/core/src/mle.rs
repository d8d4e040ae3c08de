//! Maximal Lyapunov exponent as the slope of the logarithmic distance
//! curve, fitted online with recursive least squares.

use serde::{Deserialize, Serialize};

use crate::classify::{distance_series, EstimatorParams};
use crate::error::{Error, Result};
use crate::sdgp::SdgpTrace;

/// Distances below this floor (rad) are clamped before taking the log.
pub const DISTANCE_FLOOR: f64 = 1e-12;

pub fn log_distance(d: f64) -> f64 {
    d.max(DISTANCE_FLOOR).ln()
}

/// Least-squares line `L = lambda * t + C` absorbed one observation at a time.
///
/// Regressor times are taken relative to the first observation, which keeps
/// `P` well conditioned when the series starts far from `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlsState {
    pub lambda_hat: f64,
    /// Intercept at `t = 0`.
    pub c_hat: f64,
    /// `(X^T X)^{-1}` for the regressor rows `(t - t_ref, 1)`.
    pub p: [[f64; 2]; 2],
    /// Observations absorbed beyond the first.
    pub k: usize,
    /// Sum of squared prediction errors of the absorbed updates.
    pub residual_stat: f64,
    pub last_t: f64,
    pub t_ref: f64,
    /// Intercept at `t = t_ref`.
    pub c_ref: f64,
}

/// Exact line through two points, with `P` the inverse normal matrix.
pub fn rls_init(l0: f64, l1: f64, t0: f64, t1: f64) -> Result<RlsState> {
    if ![l0, l1, t0, t1].iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if t1 == t0 {
        return Err(Error::SingularInit(t0));
    }
    if t1 < t0 {
        return Err(Error::Param(format!("initial times must increase ({t0} then {t1})")));
    }
    let h = t1 - t0;
    let lambda_hat = (l1 - l0) / h;
    // inverse of [[h^2, h], [h, 2]] for the rows (0, 1) and (h, 1)
    let p = [[2.0 / (h * h), -1.0 / h], [-1.0 / h, 1.0]];
    Ok(RlsState {
        lambda_hat,
        c_hat: l0 - lambda_hat * t0,
        p,
        k: 1,
        residual_stat: 0.0,
        last_t: t1,
        t_ref: t0,
        c_ref: l0,
    })
}

/// Gain, estimate and covariance updates for one new observation.
pub fn rls_update(state: &RlsState, l_new: f64, t_new: f64) -> Result<RlsState> {
    if !l_new.is_finite() || !t_new.is_finite() {
        return Err(Error::NonFinite);
    }
    if t_new <= state.last_t {
        return Err(Error::Param(format!("time {t_new} does not follow {}", state.last_t)));
    }
    let p = &state.p;
    let x = t_new - state.t_ref;
    let px = [p[0][0] * x + p[0][1], p[1][0] * x + p[1][1]];
    let denom = 1.0 + x * px[0] + px[1];
    let gain = [px[0] / denom, px[1] / denom];
    let innovation = l_new - (state.lambda_hat * x + state.c_ref);
    // P - G x^T P written as P - (P x)(P x)^T / denom keeps P symmetric
    let mut next = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            next[r][c] = p[r][c] - px[r] * px[c] / denom;
        }
    }
    let lambda_hat = state.lambda_hat + gain[0] * innovation;
    let c_ref = state.c_ref + gain[1] * innovation;
    Ok(RlsState {
        lambda_hat,
        c_hat: c_ref - lambda_hat * state.t_ref,
        p: next,
        k: state.k + 1,
        residual_stat: state.residual_stat + innovation * innovation,
        last_t: t_new,
        t_ref: state.t_ref,
        c_ref,
    })
}

/// MLE estimates over time (seconds after clearing).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MleSeries {
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl MleSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,lambda\n");
        for (t, l) in self.times.iter().zip(&self.lambdas) {
            out.push_str(&format!("{t},{l}\n"));
        }
        out
    }
}

/// Online estimator fed with the distances `d_{(m_n - w) + i}`, i = 0, 1, ...,
/// fitted against the times `(m_n + i) * dt`.
#[derive(Debug, Clone)]
pub struct MleEstimator {
    params: EstimatorParams,
    first: Option<f64>,
    state: Option<RlsState>,
    absorbed: usize,
}

impl MleEstimator {
    pub fn new(params: EstimatorParams) -> Self {
        Self { params, first: None, state: None, absorbed: 0 }
    }

    pub fn params(&self) -> &EstimatorParams {
        &self.params
    }

    /// Absolute time (s after clearing) of fitted point `i`.
    pub fn time_of(&self, i: usize) -> f64 {
        (self.params.m_n + i) as f64 * self.params.dt
    }

    /// Current `(lambda, C)`.
    pub fn estimate(&self) -> Option<(f64, f64)> {
        self.state.as_ref().map(|s| (s.lambda_hat, s.c_hat))
    }

    pub fn state(&self) -> Option<&RlsState> {
        self.state.as_ref()
    }

    /// Absorbs the next distance; returns `(t, lambda)` from the second point on.
    pub fn push(&mut self, d: f64) -> Result<Option<(f64, f64)>> {
        let l = log_distance(d);
        let i = self.absorbed;
        let t = self.time_of(i);
        match (&self.state, self.first) {
            (None, None) => {
                if !l.is_finite() {
                    return Err(Error::NonFinite);
                }
                self.first = Some(l);
                self.absorbed += 1;
                return Ok(None);
            }
            (None, Some(l0)) => self.state = Some(rls_init(l0, l, self.time_of(0), t)?),
            (Some(s), _) => self.state = Some(rls_update(s, l, t)?),
        }
        self.absorbed += 1;
        let lambda = self.state.as_ref().map(|s| s.lambda_hat).expect("initialized");
        Ok(Some((t, lambda)))
    }
}

/// Batch run of [`MleEstimator`] over a whole pair trace.
pub fn estimate_stream(trace: &SdgpTrace, params: &EstimatorParams) -> Result<MleSeries> {
    let d = distance_series(&trace.rel_angle, params.w)?;
    let start = params.first_distance();
    if d.d.len() < start + 2 {
        return Err(Error::Param("trace too short for the first two fitted points".into()));
    }
    let mut est = MleEstimator::new(*params);
    let mut out = MleSeries::default();
    for &x in &d.d[start..] {
        if let Some((t, l)) = est.push(x)? {
            out.times.push(t);
            out.lambdas.push(l);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_distance_values() {
        assert_eq!(log_distance(1.0), 0.0);
        assert!((log_distance(0.0) - (-27.631021115928547)).abs() < 1e-12);
        assert!((log_distance(2f64.exp()) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_init() {
        let s = rls_init(3.0, 5.0, 1.0, 2.0).unwrap();
        assert_eq!((s.lambda_hat, s.c_hat, s.k), (2.0, 1.0, 1));
        let s = rls_init(7.0, 7.0, 0.3, 4.1).unwrap();
        assert_eq!((s.lambda_hat, s.c_hat), (0.0, 7.0));
    }

    #[test]
    fn equal_times_are_singular() {
        assert!(matches!(rls_init(1.0, 2.0, 0.5, 0.5), Err(Error::SingularInit(_))));
    }

    #[test]
    fn exact_line_is_a_fixed_point() {
        let line = |t: f64| 2.0 * t + 3.0;
        let mut s = rls_init(line(0.0), line(0.1), 0.0, 0.1).unwrap();
        for k in 2..200 {
            let t = k as f64 * 0.1;
            s = rls_update(&s, line(t), t).unwrap();
            assert!((s.lambda_hat - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn point_on_fitted_line_changes_nothing() {
        let mut s = rls_init(0.0, 1.0, 0.0, 1.0).unwrap();
        s = rls_update(&s, 5.0, 2.0).unwrap();
        let t = 3.0;
        let next = rls_update(&s, s.lambda_hat * t + s.c_hat, t).unwrap();
        assert!((next.lambda_hat - s.lambda_hat).abs() < 1e-12);
        assert!((next.c_hat - s.c_hat).abs() < 1e-12);
    }

    #[test]
    fn non_finite_update_is_rejected() {
        let s = rls_init(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(rls_update(&s, f64::NAN, 2.0), Err(Error::NonFinite)));
        assert!(rls_update(&s, 1.0, 1.0).is_err());
    }
}
