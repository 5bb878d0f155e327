//! Discrete minimization of the modular energy over grid functions with
//! prescribed boundary values, by projected gradient descent with
//! backtracking.
//!
//! The energy uses per-cell forward differences with the integrand frozen at
//! cell centers; this keeps the discrete functional convex and its gradient
//! exact to assemble.

use crate::error::{Error, Result};
use crate::orlicz::OrliczModel;
use crate::Point;

/// Uniform node grid on the closed cube, `n` nodes per axis.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub d: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn from_fn<F: FnMut(&[f64]) -> f64>(d: usize, n: usize, mut f: F) -> Self {
        let total = n.pow(d as u32);
        let mut values = Vec::with_capacity(total);
        for idx in 0..total {
            let x = Self::point_of(d, n, idx);
            values.push(f(&x[..d]));
        }
        Self { d, n, values }
    }

    pub fn h(&self) -> f64 {
        2.0 / (self.n as f64 - 1.0)
    }

    fn point_of(d: usize, n: usize, idx: usize) -> Point {
        let h = 2.0 / (n as f64 - 1.0);
        let mut x: Point = [0.0; crate::MAX_DIM];
        let mut rem = idx;
        for slot in x.iter_mut().take(d) {
            *slot = -1.0 + h * (rem % n) as f64;
            rem /= n;
        }
        x
    }

    pub fn point(&self, idx: usize) -> Point {
        Self::point_of(self.d, self.n, idx)
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let mut rem = idx;
        for _ in 0..self.d {
            let i = rem % self.n;
            if i == 0 || i == self.n - 1 {
                return true;
            }
            rem /= self.n;
        }
        false
    }
}

/// Power-sum representation of `phi(x, .)` frozen at one cell center:
/// `phi(t) = c1 t^{e1} + c2 t^{e2}`.
#[derive(Debug, Clone, Copy)]
struct CellPhi {
    c1: f64,
    e1: f64,
    c2: f64,
    e2: f64,
}

impl CellPhi {
    fn eval(&self, t: f64) -> f64 {
        let mut v = self.c1 * t.powf(self.e1);
        if self.c2 != 0.0 {
            v += self.c2 * t.powf(self.e2);
        }
        v
    }

    fn deriv(&self, t: f64) -> f64 {
        let mut v = self.c1 * self.e1 * t.powf(self.e1 - 1.0);
        if self.c2 != 0.0 {
            v += self.c2 * self.e2 * t.powf(self.e2 - 1.0);
        }
        v
    }
}

fn cell_phi(model: &OrliczModel, x: &[f64]) -> CellPhi {
    use crate::orlicz::ModelKind;
    match model.kind {
        ModelKind::Power { p } => CellPhi { c1: 1.0 / p, e1: p, c2: 0.0, e2: 0.0 },
        ModelKind::VarExpJump { .. } | ModelKind::VarExpCont { .. } => {
            let p = model.exponent(x);
            CellPhi { c1: 1.0 / p, e1: p, c2: 0.0, e2: 0.0 }
        }
        ModelKind::DoublePhase { p, q, .. } => CellPhi {
            c1: 1.0 / p,
            e1: p,
            c2: model.double_phase_weight(x) / q,
            e2: q,
        },
        ModelKind::Weighted { p, .. } => {
            CellPhi { c1: model.omega(x).powf(p) / p, e1: p, c2: 0.0, e2: 0.0 }
        }
    }
}

struct CellGeometry {
    d: usize,
    n: usize,
    h: f64,
    cells: Vec<(usize, CellPhi)>, // corner node index + frozen integrand
    strides: [usize; crate::MAX_DIM],
}

impl CellGeometry {
    fn new(model: &OrliczModel, grid: &GridFunction) -> Self {
        let (d, n, h) = (grid.d, grid.n, grid.h());
        let mut strides = [0usize; crate::MAX_DIM];
        for (j, s) in strides.iter_mut().enumerate().take(d) {
            *s = n.pow(j as u32);
        }
        let cells_per_axis = n - 1;
        let total = cells_per_axis.pow(d as u32);
        let mut cells = Vec::with_capacity(total);
        for c in 0..total {
            let mut rem = c;
            let mut corner = 0usize;
            let mut center: Point = [0.0; crate::MAX_DIM];
            for j in 0..d {
                let i = rem % cells_per_axis;
                rem /= cells_per_axis;
                corner += i * strides[j];
                center[j] = -1.0 + h * i as f64 + 0.5 * h;
            }
            cells.push((corner, cell_phi(model, &center[..d])));
        }
        Self { d, n: grid.n, h, cells, strides }
    }

    fn energy(&self, w: &[f64]) -> f64 {
        let vol = self.h.powi(self.d as i32);
        let mut sum = 0.0;
        for &(corner, phi) in &self.cells {
            let mut g2 = 0.0;
            for j in 0..self.d {
                let g = (w[corner + self.strides[j]] - w[corner]) / self.h;
                g2 += g * g;
            }
            sum += phi.eval(g2.sqrt()) * vol;
        }
        sum
    }

    /// Accumulate the energy gradient into `grad` (cleared first).
    fn gradient(&self, w: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let vol = self.h.powi(self.d as i32);
        for &(corner, phi) in &self.cells {
            let mut g: Point = [0.0; crate::MAX_DIM];
            let mut g2 = 0.0;
            for j in 0..self.d {
                g[j] = (w[corner + self.strides[j]] - w[corner]) / self.h;
                g2 += g[j] * g[j];
            }
            if g2 == 0.0 {
                continue;
            }
            let mag = g2.sqrt();
            let scale = phi.deriv(mag) / mag * vol / self.h;
            for j in 0..self.d {
                let contrib = scale * g[j];
                grad[corner + self.strides[j]] += contrib;
                grad[corner] -= contrib;
            }
        }
        let _ = self.n;
    }
}

/// Discrete modular energy of a grid function.
pub fn discrete_energy(model: &OrliczModel, w: &GridFunction) -> f64 {
    CellGeometry::new(model, w).energy(&w.values)
}

/// Solver knobs for [`minimize_w`].
#[derive(Debug, Clone)]
pub struct SolverPolicy {
    pub max_iters: usize,
    /// Relative energy-decrease threshold over `stall_window` iterations.
    pub rel_tol: f64,
    pub stall_window: usize,
}

impl Default for SolverPolicy {
    fn default() -> Self {
        Self { max_iters: 20_000, rel_tol: 1e-10, stall_window: 10 }
    }
}

/// Result of a minimization run.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub w: GridFunction,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy_log: Vec<f64>,
    pub final_grad_norm: f64,
}

/// Minimize the discrete energy over grid functions matching
/// `boundary_data` on the boundary nodes, starting from `init`.
///
/// Projected gradient descent with Armijo backtracking; boundary nodes stay
/// fixed, so the energy never exceeds the energy of the initial iterate.
pub fn minimize_w<B, I>(
    model: &OrliczModel,
    d: usize,
    n: usize,
    boundary_data: B,
    init: I,
    policy: &SolverPolicy,
) -> Result<MinimizeResult>
where
    B: Fn(&[f64]) -> f64,
    I: Fn(&[f64]) -> f64,
{
    if n < 3 {
        return Err(Error::Domain("need at least 3 nodes per axis".into()));
    }
    let mut grid = GridFunction::from_fn(d, n, init);
    let total = grid.values.len();
    let boundary: Vec<bool> = (0..total).map(|i| grid.is_boundary(i)).collect();
    for i in 0..total {
        if boundary[i] {
            let x = grid.point(i);
            grid.values[i] = boundary_data(&x[..d]);
        }
    }
    let geom = CellGeometry::new(model, &grid);
    let mut energy = geom.energy(&grid.values);
    let mut log = vec![energy];
    let mut grad = vec![0.0; total];
    let mut trial = grid.values.clone();
    let mut step = 0.0f64;
    let mut converged = false;
    let mut iters = 0;
    let mut grad_norm = 0.0;
    for it in 0..policy.max_iters {
        iters = it + 1;
        geom.gradient(&grid.values, &mut grad);
        let mut g2 = 0.0;
        for i in 0..total {
            if boundary[i] {
                grad[i] = 0.0;
            } else {
                g2 += grad[i] * grad[i];
            }
        }
        grad_norm = g2.sqrt();
        if g2 == 0.0 {
            converged = true;
            break;
        }
        // Armijo backtracking from a warm-started step; the first guess is
        // the natural scale E / |grad E|^2
        if step == 0.0 {
            step = (energy.abs() + 1e-300) / (g2 + 1e-300);
        }
        step *= 2.0;
        let mut accepted = false;
        for _ in 0..400 {
            for i in 0..total {
                trial[i] = grid.values[i] - step * grad[i];
            }
            let e_trial = geom.energy(&trial);
            if e_trial <= energy - 1e-4 * step * g2 {
                grid.values.copy_from_slice(&trial);
                energy = e_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true; // step underflow: stationary to machine precision
            break;
        }
        log.push(energy);
        if log.len() > policy.stall_window {
            let past = log[log.len() - 1 - policy.stall_window];
            if past - energy < policy.rel_tol * (energy.abs() + 1e-300) {
                converged = true;
                break;
            }
        }
    }
    Ok(MinimizeResult {
        w: grid,
        energy,
        iterations: iters,
        converged,
        energy_log: log,
        final_grad_norm: grad_norm,
    })
}
