//! Kron reduction of the bus admittance matrix onto the generator internal
//! nodes (and the infinite bus, when present).

use num_complex::Complex64;

use super::network::{NetworkModel, Topology};
use crate::error::{Error, Result};

/// Shunt admittance representing a bolted three-phase fault.
pub const FAULT_SHUNT: f64 = 1e6;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] += v;
    }

    fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        let mut out = CMatrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                out.set(i, j, self.get(r, c));
            }
        }
        out
    }

    /// Solves `self * X = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &CMatrix) -> Result<CMatrix> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = a.data.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (piv, piv_norm) = (k..n)
                .map(|r| (r, a.get(r, k).norm()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("non-empty pivot column");
            if piv_norm <= 1e-13 * scale {
                return Err(Error::Topology("singular bus admittance submatrix".into()));
            }
            if piv != k {
                for c in 0..n {
                    a.data.swap(k * n + c, piv * n + c);
                }
                for c in 0..m {
                    b.data.swap(k * m + c, piv * m + c);
                }
            }
            let pivot = a.get(k, k);
            for r in (k + 1)..n {
                let f = a.get(r, k) / pivot;
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in k..n {
                    let v = a.get(k, c);
                    a.add(r, c, -f * v);
                }
                for c in 0..m {
                    let v = b.get(k, c);
                    b.add(r, c, -f * v);
                }
            }
        }
        for k in (0..n).rev() {
            let pivot = a.get(k, k);
            for c in 0..m {
                let mut acc = b.get(k, c);
                for j in (k + 1)..n {
                    acc -= a.get(k, j) * b.get(j, c);
                }
                b.set(k, c, acc / pivot);
            }
        }
        Ok(b)
    }
}

/// Reduced admittance matrix among the voltage sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub y: CMatrix,
}

impl ReducedSystem {
    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.y.get(i, j).re
    }

    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.y.get(i, j).im
    }

    pub fn dim(&self) -> usize {
        self.y.rows()
    }

    /// `Pe_i = sum_j E_i E_j (G_ij cos d_ij + B_ij sin d_ij)` for every source.
    pub fn electrical_power(&self, emf: &[f64], angles: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut p = 0.0;
            for j in 0..n {
                let d = angles[i] - angles[j];
                let (s, c) = d.sin_cos();
                p += emf[j] * (self.g(i, j) * c + self.b(i, j) * s);
            }
            out[i] = emf[i] * p;
        }
    }
}

/// Full nodal admittance matrix over `[generator internal nodes..., buses...]`.
pub fn augmented_admittance(model: &NetworkModel, topology: Topology<'_>) -> CMatrix {
    let ng = model.generators.len();
    let index = model.bus_index();
    let n = ng + model.buses.len();
    let mut y = CMatrix::zeros(n, n);
    let bus = |id: u32| ng + index[&id];
    for br in model.active_branches(topology) {
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let ysh = Complex64::new(0.0, br.b / 2.0);
        let (f, t) = (bus(br.from), bus(br.to));
        y.add(f, f, ys + ysh);
        y.add(t, t, ys + ysh);
        y.add(f, t, -ys);
        y.add(t, f, -ys);
    }
    for load in &model.loads {
        let k = bus(load.bus);
        y.add(k, k, Complex64::new(load.g, load.b));
    }
    for (i, g) in model.generators.iter().enumerate() {
        let yd = Complex64::new(0.0, -1.0 / g.xd_prime);
        let k = bus(g.bus);
        y.add(i, i, yd);
        y.add(k, k, yd);
        y.add(i, k, -yd);
        y.add(k, i, -yd);
    }
    if let Topology::FaultOn { bus: fb } = topology {
        let k = bus(fb);
        y.add(k, k, Complex64::new(FAULT_SHUNT, 0.0));
    }
    y
}

/// Kron-reduces the network onto the sources in [`NetworkModel::source_ids`] order.
pub fn reduce_network(model: &NetworkModel, topology: Topology<'_>) -> Result<ReducedSystem> {
    model.check_connected(topology)?;
    let ng = model.generators.len();
    let y = augmented_admittance(model, topology);
    let mut keep: Vec<usize> = (0..ng).collect();
    if let Some(inf) = &model.infinite_bus {
        keep.push(ng + model.bus_index()[&inf.bus]);
    }
    let elim: Vec<usize> = (0..y.rows()).filter(|i| !keep.contains(i)).collect();
    let y_kk = y.submatrix(&keep, &keep);
    if elim.is_empty() {
        return Ok(ReducedSystem { y: y_kk });
    }
    let y_ke = y.submatrix(&keep, &elim);
    let y_ee = y.submatrix(&elim, &elim);
    let y_ek = y.submatrix(&elim, &keep);
    let x = y_ee.solve(&y_ek)?;
    let mut red = y_kk;
    for i in 0..keep.len() {
        for j in 0..keep.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..elim.len() {
                acc += y_ke.get(i, k) * x.get(k, j);
            }
            red.add(i, j, -acc);
        }
    }
    for v in &red.data {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Topology("reduction produced non-finite admittances".into()));
        }
    }
    Ok(ReducedSystem { y: red })
}
