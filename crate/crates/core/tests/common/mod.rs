#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use rotor_mle::sim::CaseFile;
use rotor_mle::*;

pub const DT: f64 = 1.0 / 120.0;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.toml"))
}

pub fn fixture(name: &str) -> CaseFile {
    CaseFile::load(&fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Post-clearing span simulated for battery cases (s).
pub const OBSERVATION: f64 = 10.0;

pub fn simulate_for_assessment(model: &NetworkModel, fault: &FaultSpec) -> SimulationOutput {
    let opts = SimOptions { horizon: fault.clear_time + OBSERVATION + 0.5, ..Default::default() };
    simulate(model, fault, &opts).expect("simulation")
}

#[derive(Debug, Clone)]
pub struct BatteryCase {
    pub label: String,
    pub model: NetworkModel,
    pub fault: FaultSpec,
}

fn with_damping(mut model: NetworkModel, ratio: f64) -> NetworkModel {
    for g in model.generators.iter_mut() {
        g.d = ratio * g.m;
    }
    model
}

/// Clearing-time sweeps across the critical clearing time of the 2-, 3- and
/// 4-machine fixtures, a damped SMIB sweep, and negatively damped variants
/// (no stabilizing damping) that lose synchronism over several swings.
pub fn battery() -> Vec<BatteryCase> {
    let mut cases = Vec::new();
    let mut push = |name: &str, model: &NetworkModel, base: &FaultSpec, tag: &str, durations: &[f64]| {
        for &dur in durations {
            let mut fault = base.clone();
            fault.clear_time = base.fault_time + dur;
            cases.push(BatteryCase { label: format!("{name}{tag} dur={dur:.3}"), model: model.clone(), fault });
        }
    };
    let sweep: Vec<f64> = (1..=9).map(|k| 0.05 * k as f64).collect();
    for name in ["two_machine", "three_machine", "four_machine"] {
        let case = fixture(name);
        let fault = case.fault.clone().expect("fixture fault");
        push(name, &case.network, &fault, "", &sweep);
        let undamped = with_damping(case.network.clone(), -1.0);
        push(name, &undamped, &fault, " D=-M", &[0.05, 0.10, 0.15, 0.20]);
    }
    let smib = fixture("smib");
    let fault = smib.fault.clone().expect("fixture fault");
    push("smib", &with_damping(smib.network.clone(), 2.0), &fault, " D=2M", &[0.05, 0.10, 0.15, 0.20, 0.25, 0.30]);
    cases
}

#[derive(Debug, Clone)]
pub struct BatteryOutcome {
    pub label: String,
    pub oracle: OracleVerdict,
    pub report: AssessmentReport,
}

impl BatteryOutcome {
    pub fn agrees(&self) -> bool {
        matches!(
            (self.oracle, self.report.system.status),
            (OracleVerdict::Stable, SystemStatus::Stable) | (OracleVerdict::Unstable, SystemStatus::Unstable)
        )
    }

    pub fn undetermined(&self) -> bool {
        matches!(self.report.system.status, SystemStatus::Undetermined | SystemStatus::Pending)
    }
}

pub fn run_case(case: &BatteryCase) -> BatteryOutcome {
    let sim = simulate_for_assessment(&case.model, &case.fault);
    let oracle = stability_oracle(&sim, OBSERVATION).expect("oracle");
    let report = assess_simulation(&sim, &AssessConfig::default()).expect("assessment");
    BatteryOutcome { label: case.label.clone(), oracle, report }
}

// ---------------------------------------------------------------------------
// Relative-speed templates with known swing pattern.

#[derive(Debug, Clone)]
pub struct Template {
    pub label: String,
    pub pattern: SwingPattern,
    pub v: Vec<f64>,
}

fn sampled(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..n).map(|k| f(k as f64 * DT)).collect()
}

/// Ten parameterizations of each of the six swing morphologies.
pub fn template_families() -> Vec<Template> {
    let mut out = Vec::new();
    for k in 0..10 {
        let v0 = 0.5 + 0.35 * k as f64;
        let s = k as f64 / 9.0;

        // I: convex, ever faster growth
        let rate = 1.0 + 2.0 * s;
        out.push(Template {
            label: format!("I rate={rate:.2}"),
            pattern: SwingPattern::I,
            v: sampled(600, |t| v0 * (rate * t).exp()),
        });

        // II: dips, then climbs back through v0 at t = tr
        let tr = 0.2537 + 0.3 * s;
        let depth = 0.3 + 0.4 * s;
        out.push(Template {
            label: format!("II tr={tr:.3}"),
            pattern: SwingPattern::II,
            v: sampled(600, |t| v0 * (1.0 - depth * 4.0 * t / tr * (1.0 - t / tr) + 2.0 * (t / tr - 1.0).max(0.0).powi(2))),
        });

        // III: decreasing start, amplitude above v0, so -v0 is crossed
        let f = 0.7 + 0.9 * s;
        let beta = 0.6 + 0.6 * s;
        out.push(Template {
            label: format!("III f={f:.2} beta={beta:.2}"),
            pattern: SwingPattern::III,
            v: sampled(900, |t| v0 * (-0.1 * t).exp() * ((2.0 * PI * f * t).cos() - beta * (2.0 * PI * f * t).sin())),
        });

        // IV: damped oscillation whose first minimum stays above -v0
        let zeta = 1.5 + 2.0 * s;
        let f4 = 0.8 + 0.8 * s;
        out.push(Template {
            label: format!("IV f={f4:.2} zeta={zeta:.2}"),
            pattern: SwingPattern::IV,
            v: sampled(900, |t| v0 * (-zeta * f4 * t).exp() * (2.0 * PI * f4 * t).cos()),
        });

        // V: decelerated growth, then through -v0
        let phi = 0.35 + 0.5 * s;
        let f5 = 0.7 + 0.8 * s;
        out.push(Template {
            label: format!("V f={f5:.2} phi={phi:.2}"),
            pattern: SwingPattern::V,
            v: sampled(900, |t| v0 / phi.cos() * (2.0 * PI * f5 * t - phi).cos()),
        });

        // VI: decelerated growth, damped so -v0 is never reached
        // below the initial growth rate 2 pi f tan(phi), so v still rises first
        let decay = (0.3 + 0.2 * s) * 2.0 * PI * f5 * phi.tan();
        out.push(Template {
            label: format!("VI f={f5:.2} phi={phi:.2} decay={decay:.2}"),
            pattern: SwingPattern::VI,
            v: sampled(900, |t| v0 / phi.cos() * (-decay * t).exp() * (2.0 * PI * f5 * t - phi).cos()),
        });
    }
    out
}

/// Theiler window by exhaustive scan of the sampled series, written
/// independently of the online classifier.
pub fn scan_window(pattern: SwingPattern, v: &[f64]) -> usize {
    let v0 = v[0];
    let first_local_min_after = |from: usize| -> usize {
        (from.max(1)..v.len() - 1).find(|&k| v[k] <= v[k - 1] && v[k] < v[k + 1]).expect("local minimum")
    };
    let first_local_max = || -> usize {
        (1..v.len() - 1).find(|&k| v[k] >= v[k - 1] && v[k] > v[k + 1]).expect("local maximum")
    };
    match pattern {
        SwingPattern::I => 1,
        SwingPattern::II => {
            let dip = first_local_min_after(1);
            (dip..v.len()).find(|&k| v[k] >= v0).expect("return to v0")
        }
        SwingPattern::III => (1..v.len()).find(|&k| v[k] <= -v0).expect("reach -v0"),
        SwingPattern::IV => first_local_min_after(1),
        SwingPattern::V => {
            let peak = first_local_max();
            (peak..v.len()).find(|&k| v[k] <= -v0).expect("reach -v0")
        }
        SwingPattern::VI => first_local_min_after(first_local_max()),
        SwingPattern::Undetermined => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// MLE shape sequences, three per criterion.

pub struct Shape {
    pub label: &'static str,
    pub lambdas: Vec<f64>,
    pub expected: PairStatus,
}

fn piecewise(knots: &[(usize, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    for w in knots.windows(2) {
        let ((i0, v0), (i1, v1)) = (w[0], w[1]);
        for i in i0..i1 {
            // cosine easing keeps extrema smooth
            let u = (i - i0) as f64 / (i1 - i0) as f64;
            out.push(v0 + (v1 - v0) * (1.0 - (PI * u).cos()) / 2.0);
        }
    }
    out.push(knots.last().unwrap().1);
    out
}

pub fn mle_shapes() -> Vec<Shape> {
    vec![
        Shape {
            label: "rising line",
            lambdas: (0..200).map(|i| 0.2 + 0.01 * i as f64).collect(),
            expected: PairStatus::UnstableFirstSwing,
        },
        Shape {
            label: "saturating rise",
            lambdas: (0..200).map(|i| 3.0 * (1.0 - (-(i as f64) / 40.0).exp())).collect(),
            expected: PairStatus::UnstableFirstSwing,
        },
        Shape {
            label: "rise from negative",
            lambdas: (0..200).map(|i| -1.0 + 0.02 * i as f64).collect(),
            expected: PairStatus::UnstableFirstSwing,
        },
        Shape {
            label: "dip then positive peak",
            lambdas: piecewise(&[(0, 0.5), (40, -2.0), (90, 0.6), (160, -0.5)]),
            expected: PairStatus::UnstableMultiSwing,
        },
        Shape {
            label: "deep dip then small positive peak",
            lambdas: piecewise(&[(0, -0.2), (30, -8.0), (80, 0.05), (150, -1.0)]),
            expected: PairStatus::UnstableMultiSwing,
        },
        Shape {
            label: "dip then positive peak, second dip",
            lambdas: piecewise(&[(0, 1.0), (50, -1.0), (100, 1.5), (150, -0.5), (200, 2.0)]),
            expected: PairStatus::UnstableMultiSwing,
        },
        Shape {
            label: "dip then negative peak",
            lambdas: piecewise(&[(0, 0.5), (40, -3.0), (90, -0.4), (160, -1.5)]),
            expected: PairStatus::Stable,
        },
        Shape {
            label: "deep dip then barely negative peak",
            lambdas: piecewise(&[(0, -0.1), (30, -10.0), (80, -0.02), (150, -2.0)]),
            expected: PairStatus::Stable,
        },
        Shape {
            label: "shallow dip then negative peak",
            lambdas: piecewise(&[(0, -0.3), (60, -1.2), (110, -0.8), (200, -1.1)]),
            expected: PairStatus::Stable,
        },
    ]
}

pub fn assess_shape(shape: &Shape) -> PairVerdict {
    let mut a = PairAssessor::new(GenPair { severe: 1, least: 2 }, CriteriaConfig::default());
    let mut last = a.verdict().clone();
    for (i, &l) in shape.lambdas.iter().enumerate() {
        last = a.push(l, (i + 1) as f64 * DT);
        if last.status != PairStatus::Pending {
            break;
        }
    }
    last
}

// ---------------------------------------------------------------------------
// Criterion IV reference, written as a plain enumeration of cases.

pub fn system_truth(statuses: &[PairStatus]) -> Option<SystemStatus> {
    let assessed: Vec<PairStatus> = statuses.iter().copied().filter(|s| *s != PairStatus::Skipped).collect();
    if assessed.is_empty() {
        return None;
    }
    let unstable = assessed.iter().filter(|s| matches!(s, PairStatus::UnstableFirstSwing | PairStatus::UnstableMultiSwing)).count();
    let stable = assessed.iter().filter(|s| **s == PairStatus::Stable).count();
    let pending = assessed.iter().filter(|s| **s == PairStatus::Pending).count();
    Some(if unstable > 0 {
        SystemStatus::Unstable
    } else if pending > 0 {
        SystemStatus::Pending
    } else if stable == assessed.len() {
        SystemStatus::Stable
    } else {
        SystemStatus::Undetermined
    })
}

/// Every status vector of length 1 to 3.
pub fn status_vectors() -> Vec<Vec<PairStatus>> {
    let mut out: Vec<Vec<PairStatus>> = Vec::new();
    let mut layer: Vec<Vec<PairStatus>> = vec![Vec::new()];
    for _ in 0..3 {
        layer = layer
            .iter()
            .flat_map(|v| {
                PairStatus::ALL.iter().map(move |&s| {
                    let mut v = v.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

pub fn verdicts_for(statuses: &[PairStatus]) -> Vec<PairVerdict> {
    statuses
        .iter()
        .enumerate()
        .map(|(i, &status)| PairVerdict {
            pair: GenPair { severe: i as u32 + 1, least: 9 },
            status,
            decision_time: (status != PairStatus::Pending && status != PairStatus::Skipped).then_some(0.5 + i as f64),
            peak_lambda: None,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Least squares reference for the MLE fit.

/// Slope and intercept of the straight-line fit of `ys` against `ts`,
/// solved on the design matrix with nalgebra's SVD.
pub fn batch_fit(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let x = nalgebra::DMatrix::from_fn(ts.len(), 2, |r, c| if c == 0 { ts[r] } else { 1.0 });
    let y = nalgebra::DVector::from_column_slice(ys);
    let sol = x.svd(true, true).solve(&y, 0.0).expect("full-rank design");
    (sol[0], sol[1])
}

/// Rotor trace with exactly exponential angle growth.
pub fn exponential_trace(lambda: f64, theta0: f64, seconds: f64, noise: Option<(f64, u64)>) -> SdgpTrace {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let n = (seconds / DT).round() as usize + 1;
    let mut rel_angle: Vec<f64> = (0..n).map(|k| theta0 * (lambda * k as f64 * DT).exp()).collect();
    if let Some((std, seed)) = noise {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std).unwrap();
        rel_angle.iter_mut().for_each(|x| *x += normal.sample(&mut rng));
    }
    let rel_speed = (0..n).map(|k| theta0 * lambda * (lambda * k as f64 * DT).exp()).collect();
    SdgpTrace {
        pair: GenPair { severe: 1, least: 2 },
        sign_flipped: false,
        rel_angle,
        rel_speed,
        v0: theta0 * lambda,
        dt: DT,
    }
}

/// Equal-area critical clearing duration of a single machine whose
/// transfer drops to zero during the fault.
pub fn equal_area_clearing(pm: f64, pmax_pre: f64, pmax_post: f64, m: f64) -> f64 {
    let d0 = (pm / pmax_pre).asin();
    let dmax = PI - (pm / pmax_post).asin();
    let dc = ((pm * (dmax - d0) + pmax_post * dmax.cos()) / pmax_post).acos();
    (2.0 * m * (dc - d0) / pm).sqrt()
}

/// Equal-area critical clearing duration of the SMIB fixture: the fault
/// removes all transfer, the pre-fault path is two parallel 0.4 p.u. lines
/// and the post-fault path one of them.
pub fn smib_equal_area_clearing() -> f64 {
    let case = fixture("smib");
    let g = &case.network.generators[0];
    equal_area_clearing(g.pm.unwrap(), g.e / (g.xd_prime + 0.2), g.e / (g.xd_prime + 0.4), g.m)
}

/// Last stable and first unstable SMIB clearing duration on the output grid.
pub fn smib_bracket() -> (f64, f64) {
    let case = fixture("smib");
    let base = case.fault.clone().unwrap();
    let mut last_stable = None;
    for k in 1..60 {
        let dur = k as f64 * DT;
        let mut fault = base.clone();
        fault.clear_time = base.fault_time + dur;
        let sim = simulate_for_assessment(&case.network, &fault);
        match stability_oracle(&sim, OBSERVATION).unwrap() {
            OracleVerdict::Stable => last_stable = Some(dur),
            OracleVerdict::Unstable => return (last_stable.expect("stable at short clearing"), dur),
        }
    }
    panic!("no unstable clearing time found");
}

fn smib_energy(m: f64, pm: f64, pmax: f64, delta: f64, w: f64) -> f64 {
    0.5 * m * w * w - pm * delta - pmax * delta.cos()
}

/// Largest relative deviation of the post-fault SMIB energy function over
/// 10 s of undamped swinging.
pub fn smib_energy_drift() -> f64 {
    let case = fixture("smib");
    let g = &case.network.generators[0];
    let pmax_post = g.e / (g.xd_prime + 0.4);
    let fault = case.fault.clone().unwrap();
    let sim = simulate(&case.network, &fault, &SimOptions { horizon: fault.clear_time + 10.0, ..Default::default() }).unwrap();
    let t = &sim.traces[0];
    let start = t.times.iter().position(|&x| x >= fault.clear_time - 1e-9).unwrap();
    let energy = |k: usize| smib_energy(g.m, g.pm.unwrap(), pmax_post, t.angles[k], t.speeds[k]);
    let e0 = energy(start);
    (start..t.len()).map(|k| (energy(k) - e0).abs()).fold(0.0, f64::max) / e0.abs()
}
