//! Adaptive, singularity-aware quadrature over `Omega = (-1,1)^d` and over
//! the faces of its boundary.
//!
//! Cells subdivide dyadically and anisotropically: each decision compares the
//! parent rule with the two-child rule along every axis and splits the axis
//! of largest disagreement, so line- and plane-concentrated integrands refine
//! only where resolution is needed. A cell meeting the shrinking tube around
//! the contact set is refined regardless; cells inside the exclusion tube of
//! radius `delta` contribute nothing to the value and their possible mass is
//! bounded through a caller-supplied majorant.

use crate::cantor::FractalConfig;
use crate::error::{Error, Result};
use crate::Point;

use crate::util::GAUSS3;

/// Integration policy. `tol` is the relative two-level acceptance threshold,
/// `delta` the exclusion radius around the contact set, `budget` the cell
/// budget; `min_depth`/`max_depth` bound the per-axis subdivision.
#[derive(Debug, Clone)]
pub struct QuadPolicy {
    pub min_depth: u32,
    pub max_depth: u32,
    pub tol: f64,
    pub abs_tol: f64,
    /// Extra acceptance allowance for cells cut by codimension-one
    /// discontinuities (the nearest-point direction of the Cantor distance
    /// jumps across gap midlines). Scales with the square root of the cell's
    /// volume share, so the induced total error stays of this order while
    /// refinement along such lines stops at a finite depth.
    pub edge_tol: f64,
    pub delta: f64,
    pub budget: usize,
    pub tail: Option<TailMajorant>,
}

impl Default for QuadPolicy {
    fn default() -> Self {
        Self {
            min_depth: 4,
            max_depth: 24,
            tol: 1e-6,
            abs_tol: 1e-12,
            edge_tol: 1e-4,
            delta: 1e-6,
            budget: 4_000_000,
            tail: None,
        }
    }
}

impl QuadPolicy {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_depth(mut self, depth: u32) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_tail(mut self, tail: TailMajorant) -> Self {
        self.tail = Some(tail);
        self
    }
}

/// Majorant `|f(x)| <= constant * d(x, S)^exponent` valid near the contact
/// set; used to bound the mass of the excluded tube.
#[derive(Debug, Clone, Copy)]
pub struct TailMajorant {
    pub exponent: f64,
    pub constant: f64,
}

/// Quadrature outcome.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub cells: usize,
    /// Bound on the contribution of the excluded tube (zero without a
    /// majorant).
    pub excluded_mass_bound: f64,
    /// Set when the cell budget stopped refinement early.
    pub partial: bool,
}

#[derive(Clone, Copy)]
struct Cell {
    center: Point,
    half: Point,
    level: [u32; crate::MAX_DIM],
}

struct Walker<'a> {
    dim: usize,
    contact: Option<&'a dyn Fn(&[f64]) -> f64>,
    contact_dim: f64,
    pol: &'a QuadPolicy,
    /// Coarse estimate of `int |f|`; per-cell acceptance hands every cell its
    /// volume share of the global error allowance, so zero crossings of `f`
    /// do not trigger runaway refinement.
    scale: f64,
    value: f64,
    err: f64,
    cells: usize,
    excluded_vol: f64,
    partial: bool,
}

impl<'a> Walker<'a> {
    fn gauss<F: Fn(&[f64]) -> f64>(&mut self, f: &F, cell: &Cell) -> f64 {
        self.cells += 1;
        let n = GAUSS3.len().pow(self.dim as u32);
        let mut sum = 0.0;
        let mut x: Point = [0.0; crate::MAX_DIM];
        for k in 0..n {
            let mut rem = k;
            let mut wgt = 1.0;
            for j in 0..self.dim {
                let (node, w) = GAUSS3[rem % GAUSS3.len()];
                rem /= GAUSS3.len();
                x[j] = cell.center[j] + node * cell.half[j];
                wgt *= w;
            }
            let v = f(&x[..self.dim]);
            if v.is_finite() {
                sum += wgt * v;
            }
        }
        let mut vol = 1.0;
        for j in 0..self.dim {
            vol *= cell.half[j];
        }
        sum * vol
    }

    fn split(cell: &Cell, axis: usize) -> [Cell; 2] {
        let mut lo = *cell;
        lo.half[axis] *= 0.5;
        lo.level[axis] += 1;
        let mut hi = lo;
        lo.center[axis] -= lo.half[axis];
        hi.center[axis] += hi.half[axis];
        [lo, hi]
    }

    fn walk<F: Fn(&[f64]) -> f64>(&mut self, f: &F, cell: Cell) {
        let d = self.dim;
        let mut vol = 1.0;
        let mut diag2 = 0.0;
        for j in 0..d {
            vol *= 2.0 * cell.half[j];
            diag2 += cell.half[j] * cell.half[j];
        }
        let diag = diag2.sqrt();
        let mut near_tube = false;
        if let Some(cf) = self.contact {
            let dist = cf(&cell.center[..d]);
            if dist + diag < self.pol.delta {
                self.excluded_vol += vol;
                return;
            }
            let finest = cell.level.iter().take(d).max().copied().unwrap_or(0);
            // a few cell widths of forced refinement keep the thin cones
            // around the contact set from aliasing past the sample points
            near_tube = dist < 4.0 * (diag + 0.5f64.powi(finest as i32));
        }
        let parent = self.gauss(f, &cell);
        let coarsest = cell.level.iter().take(d).min().copied().unwrap_or(0);
        let over_budget = self.cells >= self.pol.budget;
        if coarsest >= self.pol.max_depth || over_budget {
            if over_budget {
                self.partial = true;
            }
            self.value += parent;
            return;
        }
        // per-axis two-child estimates
        let mut sum_axis = [0.0f64; crate::MAX_DIM];
        let mut best_axis = usize::MAX;
        let mut best_diff = -1.0f64;
        for j in 0..d {
            if cell.level[j] >= self.pol.max_depth {
                sum_axis[j] = f64::NAN;
                continue;
            }
            let [a, b] = Self::split(&cell, j);
            let s = self.gauss(f, &a) + self.gauss(f, &b);
            sum_axis[j] = s;
            let diff = (s - parent).abs();
            if diff > best_diff {
                best_diff = diff;
                best_axis = j;
            }
        }
        if best_axis == usize::MAX {
            self.value += parent;
            return;
        }
        let refined = sum_axis[best_axis];
        // force shallow axes first so band-shaped supports cannot alias
        for j in 0..d {
            if cell.level[j] < self.pol.min_depth {
                let [a, b] = Self::split(&cell, j);
                self.walk(f, a);
                self.walk(f, b);
                return;
            }
        }
        let all_zero = parent == 0.0
            && (0..d).all(|j| sum_axis[j].is_nan() || sum_axis[j] == 0.0);
        let must_refine = near_tube && !all_zero;
        let vol_share = vol / 2f64.powi(d as i32);
        let edge_allowance =
            if d >= 2 { self.pol.edge_tol * self.scale * vol_share.sqrt() } else { 0.0 };
        let tol_cell = self.pol.tol * (refined.abs() + self.scale * vol_share)
            + edge_allowance
            + self.pol.abs_tol * vol_share;
        if !must_refine && best_diff <= tol_cell {
            self.value += refined;
            self.err += best_diff;
            return;
        }
        // refine along the axis of largest disagreement; tube cells split
        // their longest axis to stay isotropic around the contact set
        let axis = if must_refine {
            let mut longest = 0;
            for j in 1..d {
                if cell.level[j] < cell.level[longest] {
                    longest = j;
                }
            }
            if cell.level[longest] >= self.pol.max_depth {
                self.value += refined;
                self.err += best_diff.max(0.0);
                return;
            }
            longest
        } else {
            best_axis
        };
        let [a, b] = Self::split(&cell, axis);
        self.walk(f, a);
        self.walk(f, b);
    }

    fn tail_bound(&self) -> f64 {
        let Some(tail) = self.pol.tail else { return 0.0 };
        if self.excluded_vol == 0.0 {
            return 0.0;
        }
        let codim = self.dim as f64 - self.contact_dim;
        let p = tail.exponent + codim;
        if p <= 0.0 {
            return f64::INFINITY; // the majorant is not integrable
        }
        // tube volume scales like kappa * delta^codim; integrating the
        // majorant shell by shell gives kappa * codim / p * delta^p, doubled
        // as the safety factor on the sampled constant
        let kappa = self.excluded_vol / self.pol.delta.powf(codim);
        2.0 * tail.constant * kappa * codim / p * self.pol.delta.powf(p)
    }

    fn into_result(self) -> QuadResult {
        let excluded = self.tail_bound();
        QuadResult {
            value: self.value,
            error_estimate: self.err,
            cells: self.cells,
            excluded_mass_bound: excluded,
            partial: self.partial,
        }
    }
}

fn root_cell() -> Cell {
    Cell {
        center: [0.0; crate::MAX_DIM],
        half: [1.0; crate::MAX_DIM],
        level: [0; crate::MAX_DIM],
    }
}

/// Coarse `int |f|` over a uniform `2^min_depth` grid, seeding the global
/// error scale.
fn prescan<F: Fn(&[f64]) -> f64>(w: &mut Walker, f: &F) -> f64 {
    let d = w.dim;
    let n = 1usize << w.pol.min_depth.min(6);
    let h = 1.0 / n as f64;
    let mut total = 0.0;
    let mut cell = Cell {
        center: [0.0; crate::MAX_DIM],
        half: [h; crate::MAX_DIM],
        level: [w.pol.min_depth.min(6); crate::MAX_DIM],
    };
    let count = n.pow(d as u32);
    for idx in 0..count {
        let mut rem = idx;
        for j in 0..d {
            cell.center[j] = -1.0 + h * (2 * (rem % n) + 1) as f64;
            rem /= n;
        }
        total += w.gauss(f, &cell).abs();
    }
    total
}

/// Integrate `f` over `Omega = (-1,1)^d`, refining toward the contact set of
/// `config` and excluding the `delta`-tube around it.
pub fn integrate_volume<F>(f: F, config: &FractalConfig, pol: &QuadPolicy) -> Result<QuadResult>
where
    F: Fn(&[f64]) -> f64,
{
    let contact = |x: &[f64]| config.contact_distance(x);
    let mut w = Walker {
        dim: config.d,
        contact: Some(&contact),
        contact_dim: config.contact_dim(),
        pol,
        scale: 0.0,
        value: 0.0,
        err: 0.0,
        cells: 0,
        excluded_vol: 0.0,
        partial: false,
    };
    w.scale = prescan(&mut w, &f);
    w.walk(&f, root_cell());
    Ok(w.into_result())
}

/// Integrate over `[-1,1]^dim` with plain anisotropic adaptivity and no
/// contact-set handling.
pub fn integrate_box<F>(f: F, dim: usize, pol: &QuadPolicy) -> Result<QuadResult>
where
    F: Fn(&[f64]) -> f64,
{
    let mut w = Walker {
        dim,
        contact: None,
        contact_dim: 0.0,
        pol,
        scale: 0.0,
        value: 0.0,
        err: 0.0,
        cells: 0,
        excluded_vol: 0.0,
        partial: false,
    };
    w.scale = prescan(&mut w, &f);
    w.walk(&f, root_cell());
    Ok(w.into_result())
}

/// Integrate `g` over the face `{x_axis = sign}` of the cube; `g` receives
/// the full `d`-dimensional point.
pub fn integrate_surface<F>(
    g: F,
    d: usize,
    axis: usize,
    sign: f64,
    pol: &QuadPolicy,
) -> Result<QuadResult>
where
    F: Fn(&[f64]) -> f64,
{
    if axis >= d {
        return Err(Error::Domain(format!("face axis {axis} out of range for d = {d}")));
    }
    let face = move |y: &[f64]| {
        let mut x: Point = [0.0; crate::MAX_DIM];
        let mut k = 0;
        for (j, slot) in x.iter_mut().enumerate().take(d) {
            if j == axis {
                *slot = sign;
            } else {
                *slot = y[k];
                k += 1;
            }
        }
        g(&x[..d])
    };
    integrate_box(face, d - 1, pol)
}

/// Sum of `(b . nu) u` over all `2d` faces of the cube.
pub fn boundary_pairing(fields: &crate::fields::Fields, pol: &QuadPolicy) -> Result<QuadResult> {
    let d = fields.d();
    let mut total = 0.0;
    let mut err = 0.0;
    let mut cells = 0;
    let mut partial = false;
    for axis in 0..d {
        for sign in [-1.0, 1.0] {
            let q = integrate_surface(
                |x| {
                    let s = fields.sample(x);
                    sign * s.b[axis] * s.u
                },
                d,
                axis,
                sign,
                pol,
            )?;
            total += q.value;
            err += q.error_estimate;
            cells += q.cells;
            partial |= q.partial;
        }
    }
    Ok(QuadResult {
        value: total,
        error_estimate: err,
        cells,
        excluded_mass_bound: 0.0,
        partial,
    })
}
