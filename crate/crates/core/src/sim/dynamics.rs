//! Classical swing-equation integration with fixed-step RK4.

use num_complex::Complex64;

use super::network::{FaultSpec, NetworkModel, Topology};
use super::reduce::{reduce_network, CMatrix, ReducedSystem};
use crate::error::{Error, Result};
use crate::trace::GeneratorTrace;

/// Rotor state: angles (rad) and speed deviations (rad/s) of the dynamic machines.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineState {
    pub angles: Vec<f64>,
    pub speeds: Vec<f64>,
}

/// Swing equations `M dw/dt = Pm - Pe - D w` over one reduced network.
#[derive(Debug, Clone)]
pub struct SwingSystem {
    pub reduced: ReducedSystem,
    pub inertia: Vec<f64>,
    pub damping: Vec<f64>,
    pub mechanical: Vec<f64>,
    /// EMF magnitudes of every source, the infinite bus last when present.
    pub emf: Vec<f64>,
}

impl SwingSystem {
    pub fn new(model: &NetworkModel, reduced: ReducedSystem, mechanical: Vec<f64>) -> Self {
        let mut emf: Vec<f64> = model.generators.iter().map(|g| g.e).collect();
        if let Some(inf) = &model.infinite_bus {
            emf.push(inf.voltage);
        }
        Self {
            reduced,
            inertia: model.generators.iter().map(|g| g.m).collect(),
            damping: model.generators.iter().map(|g| g.d).collect(),
            mechanical,
            emf,
        }
    }

    pub fn machines(&self) -> usize {
        self.inertia.len()
    }

    fn source_angles(&self, angles: &[f64]) -> Vec<f64> {
        let mut all = angles.to_vec();
        all.resize(self.emf.len(), 0.0);
        all
    }

    pub fn electrical_power(&self, angles: &[f64]) -> Vec<f64> {
        let all = self.source_angles(angles);
        let mut pe = vec![0.0; self.emf.len()];
        self.reduced.electrical_power(&self.emf, &all, &mut pe);
        pe.truncate(self.machines());
        pe
    }

    fn derivative(&self, state: &MachineState) -> MachineState {
        let pe = self.electrical_power(&state.angles);
        let accel = (0..self.machines())
            .map(|i| {
                (self.mechanical[i] - pe[i] - self.damping[i] * state.speeds[i]) / self.inertia[i]
            })
            .collect();
        MachineState { angles: state.speeds.clone(), speeds: accel }
    }

    pub fn rk4_step(&self, state: &MachineState, h: f64) -> MachineState {
        let axpy = |s: &MachineState, k: &MachineState, a: f64| MachineState {
            angles: s.angles.iter().zip(&k.angles).map(|(x, d)| x + a * d).collect(),
            speeds: s.speeds.iter().zip(&k.speeds).map(|(x, d)| x + a * d).collect(),
        };
        let k1 = self.derivative(state);
        let k2 = self.derivative(&axpy(state, &k1, h / 2.0));
        let k3 = self.derivative(&axpy(state, &k2, h / 2.0));
        let k4 = self.derivative(&axpy(state, &k3, h));
        let comb = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..x.len()).map(|i| x[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])).collect()
        };
        MachineState {
            angles: comb(&state.angles, &k1.angles, &k2.angles, &k3.angles, &k4.angles),
            speeds: comb(&state.speeds, &k1.speeds, &k2.speeds, &k3.speeds, &k4.speeds),
        }
    }
}

/// Pre-fault operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub angles: Vec<f64>,
    /// Mechanical power of every machine, the reference machine's filled in.
    pub mechanical: Vec<f64>,
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

/// Solves `Pe(delta) = Pm` on the pre-fault network. Without an infinite bus
/// the first generator is the angle reference (`delta = 0`) and absorbs the
/// power balance.
pub fn solve_equilibrium(model: &NetworkModel, pre: &ReducedSystem) -> Result<Equilibrium> {
    let n = model.generators.len();
    let has_inf = model.infinite_bus.is_some();
    let first_free = usize::from(!has_inf);
    let mut mechanical: Vec<f64> = model.generators.iter().map(|g| g.pm.unwrap_or(0.0)).collect();
    let sys = SwingSystem::new(model, pre.clone(), mechanical.clone());
    let free: Vec<usize> = (first_free..n).collect();
    let mut angles = vec![0.0; n];
    let mut mismatch = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let pe = sys.electrical_power(&angles);
        let resid: Vec<f64> = free.iter().map(|&i| mechanical[i] - pe[i]).collect();
        mismatch = resid.iter().fold(0.0, |m, r| m.max(r.abs()));
        if mismatch < NEWTON_TOL {
            break;
        }
        let all = sys.source_angles(&angles);
        let k = free.len();
        let mut jac = CMatrix::zeros(k, k);
        let mut rhs = CMatrix::zeros(k, 1);
        for (a, &i) in free.iter().enumerate() {
            let mut diag = 0.0;
            for j in 0..sys.emf.len() {
                if j == i {
                    continue;
                }
                let d = all[i] - all[j];
                let (s, c) = d.sin_cos();
                let ee = sys.emf[i] * sys.emf[j];
                let dpdj = ee * (pre.g(i, j) * s - pre.b(i, j) * c);
                diag -= dpdj;
                if let Some(b) = free.iter().position(|&f| f == j) {
                    jac.set(a, b, Complex64::new(dpdj, 0.0));
                }
            }
            jac.set(a, a, Complex64::new(diag, 0.0));
            rhs.set(a, 0, Complex64::new(resid[a], 0.0));
        }
        let step = jac.solve(&rhs).map_err(|_| Error::Equilibrium { iterations: 0, mismatch })?;
        let max_step = (0..k).map(|a| step.get(a, 0).re.abs()).fold(0.0, f64::max);
        let scale = if max_step > 0.5 { 0.5 / max_step } else { 1.0 };
        for (a, &i) in free.iter().enumerate() {
            angles[i] += scale * step.get(a, 0).re;
        }
        if angles.iter().any(|x| !x.is_finite()) {
            break;
        }
    }
    if !(mismatch < NEWTON_TOL) {
        return Err(Error::Equilibrium { iterations: NEWTON_MAX_ITER, mismatch });
    }
    if !has_inf {
        mechanical[0] = sys.electrical_power(&angles)[0];
    }
    Ok(Equilibrium { angles, mechanical })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Output sample period (s).
    pub dt: f64,
    /// Simulated time span starting at t = 0 (s).
    pub horizon: f64,
    /// RK4 steps per output sample.
    pub substeps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { dt: 1.0 / 120.0, horizon: 10.0, substeps: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub traces: Vec<GeneratorTrace>,
    /// Set when the state became non-finite; traces end at the last finite sample.
    pub diverged: bool,
    pub fault: FaultSpec,
    pub equilibrium: Equilibrium,
}

/// Simulates pre-fault, fault-on and post-fault periods starting from the
/// pre-fault equilibrium. Switching instants are snapped to the nearest
/// integration step.
pub fn simulate(model: &NetworkModel, fault: &FaultSpec, opts: &SimOptions) -> Result<SimulationOutput> {
    model.validate()?;
    fault.validate(model)?;
    if !(opts.dt > 0.0) || opts.substeps == 0 {
        return Err(Error::Param("sample period and substeps must be positive".into()));
    }
    if !(opts.horizon > fault.clear_time) {
        return Err(Error::Param(format!(
            "horizon {} must exceed the clearing time {}",
            opts.horizon, fault.clear_time
        )));
    }
    let pre = reduce_network(model, Topology::PreFault)?;
    let during = reduce_network(model, Topology::FaultOn { bus: fault.bus })?;
    let post = reduce_network(model, Topology::PostFault { removed: &fault.remove_branches })?;
    let eq = solve_equilibrium(model, &pre)?;
    let systems = [
        SwingSystem::new(model, pre, eq.mechanical.clone()),
        SwingSystem::new(model, during, eq.mechanical.clone()),
        SwingSystem::new(model, post, eq.mechanical.clone()),
    ];

    let h = opts.dt / opts.substeps as f64;
    let k_fault = (fault.fault_time / h).round() as usize;
    let k_clear = (fault.clear_time / h).round() as usize;
    let samples = (opts.horizon / opts.dt + 1e-9).floor() as usize + 1;

    let n = model.generators.len();
    let mut state = MachineState { angles: eq.angles.clone(), speeds: vec![0.0; n] };
    let mut times = Vec::with_capacity(samples);
    let mut angles: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); n];
    let mut speeds: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); n];
    let mut record = |k: usize, s: &MachineState| {
        times.push(k as f64 * opts.dt);
        for i in 0..n {
            angles[i].push(s.angles[i]);
            speeds[i].push(s.speeds[i]);
        }
    };
    record(0, &state);
    let mut diverged = false;
    let mut step = 0usize;
    'outer: for k in 1..samples {
        for _ in 0..opts.substeps {
            let sys = if step < k_fault {
                &systems[0]
            } else if step < k_clear {
                &systems[1]
            } else {
                &systems[2]
            };
            state = sys.rk4_step(&state, h);
            step += 1;
        }
        if state.angles.iter().chain(&state.speeds).any(|x| !x.is_finite()) {
            diverged = true;
            break 'outer;
        }
        record(k, &state);
    }

    let mut traces: Vec<GeneratorTrace> = model
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| GeneratorTrace {
            gen_id: g.id,
            dt: opts.dt,
            times: times.clone(),
            angles: std::mem::take(&mut angles[i]),
            speeds: std::mem::take(&mut speeds[i]),
        })
        .collect();
    if let Some(inf) = &model.infinite_bus {
        traces.push(GeneratorTrace {
            gen_id: inf.id,
            dt: opts.dt,
            times: times.clone(),
            angles: vec![0.0; times.len()],
            speeds: vec![0.0; times.len()],
        });
    }
    Ok(SimulationOutput { traces, diverged, fault: fault.clone(), equilibrium: eq })
}
