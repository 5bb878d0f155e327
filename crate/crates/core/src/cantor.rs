//! Generalized Cantor sets, the self-similar Cantor measure and quadrature
//! against it, plus the per-regime configuration tying the contact set to a
//! target integrability exponent.

use crate::error::{Error, Result};
use crate::util::norm_d;
use crate::Point;
use serde::{Deserialize, Serialize};

/// Default subdivision depth for one product factor.
pub const DEFAULT_DEPTH_1D: u32 = 18;
/// Default subdivision depth for two product factors.
pub const DEFAULT_DEPTH_2D: u32 = 9;
/// Cell budget for measure quadrature, `2^18`.
pub const DEFAULT_CELL_BUDGET: usize = 1 << 18;
/// Width below which the distance recursion stops and reports the nearest
/// block endpoint.
const DISTANCE_WIDTH_TOL: f64 = 1e-14;

/// The three geometries, named by how the target exponent sits relative to
/// the ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Matching,
    Sub,
    Super,
}

/// Contraction ratio, number of product factors and the resulting fractal
/// dimension of `C_lambda^m`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CantorParams {
    pub lambda: f64,
    pub m: usize,
    /// `m log 2 / log(1/lambda)`.
    pub dim: f64,
}

impl CantorParams {
    pub fn new(lambda: f64, m: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 0.5) {
            return Err(Error::Domain(format!(
                "contraction ratio must satisfy 0 < lambda < 1/2, got {lambda}"
            )));
        }
        if m == 0 {
            return Err(Error::Domain("need at least one product factor".into()));
        }
        let dim = m as f64 * std::f64::consts::LN_2 / (1.0 / lambda).ln();
        Ok(Self { lambda, m, dim })
    }

    /// Solve `dim = m log2 / log(1/lambda)` for `lambda`.
    pub fn from_dimension(dim: f64, m: usize) -> Result<Self> {
        if !(dim > 0.0 && dim < m as f64) {
            return Err(Error::Domain(format!(
                "fractal dimension must lie in (0, {m}), got {dim}"
            )));
        }
        let lambda = 2f64.powf(-(m as f64) / dim);
        Self::new(lambda, m)
    }
}

/// Solve the regime's defining equation for the Cantor parameters.
///
/// Matching returns `None` (the contact set is the origin, dimension 0).
pub fn dimension_params(regime: Regime, d: usize, p0: f64) -> Result<Option<CantorParams>> {
    match regime {
        Regime::Matching => {
            if (p0 - d as f64).abs() > 1e-12 {
                return Err(Error::Domain(format!(
                    "matching regime requires p0 = d, got p0 = {p0}, d = {d}"
                )));
            }
            Ok(None)
        }
        Regime::Sub => {
            if !(p0 > 1.0 && p0 < d as f64) {
                return Err(Error::Domain(format!(
                    "sub-dimensional regime requires 1 < p0 < d, got p0 = {p0}, d = {d}"
                )));
            }
            let dim = d as f64 - p0;
            Ok(Some(CantorParams::from_dimension(dim, d - 1)?))
        }
        Regime::Super => {
            if p0 <= d as f64 {
                return Err(Error::Domain(format!(
                    "super-dimensional regime requires p0 > d, got p0 = {p0}, d = {d}"
                )));
            }
            // p0 = (d - dim) / (1 - dim)  =>  dim = (p0 - d) / (p0 - 1)
            let dim = (p0 - d as f64) / (p0 - 1.0);
            Ok(Some(CantorParams::from_dimension(dim, 1)?))
        }
    }
}

/// Geometry of one experiment: regime, ambient dimension, target exponent and
/// the Cantor parameters of the contact set. The domain is always `(-1,1)^d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FractalConfig {
    pub regime: Regime,
    pub d: usize,
    pub p0: f64,
    pub cantor: Option<CantorParams>,
}

impl FractalConfig {
    pub fn new(regime: Regime, d: usize, p0: f64) -> Result<Self> {
        if !(2..=crate::MAX_DIM).contains(&d) {
            return Err(Error::Domain(format!(
                "ambient dimension must be 2 or 3 at runtime, got {d}"
            )));
        }
        if !(p0 > 1.0 && p0.is_finite()) {
            return Err(Error::Domain(format!("target exponent must exceed 1, got {p0}")));
        }
        let cantor = dimension_params(regime, d, p0)?;
        Ok(Self { regime, d, p0, cantor })
    }

    /// Fractal dimension of the contact set.
    pub fn contact_dim(&self) -> f64 {
        self.cantor.map_or(0.0, |c| c.dim)
    }

    /// Euclidean distance from `x` to the contact set.
    pub fn contact_distance(&self, x: &[f64]) -> f64 {
        let d = self.d;
        match self.regime {
            Regime::Matching => norm_d(x, d),
            Regime::Sub => {
                let set = CantorSet::new(self.cantor.unwrap().lambda);
                let db = set.distance_product(&x[..d - 1]);
                (db * db + x[d - 1] * x[d - 1]).sqrt()
            }
            Regime::Super => {
                let set = CantorSet::new(self.cantor.unwrap().lambda);
                let dc = set.distance(x[d - 1]);
                let rb = norm_d(x, d - 1);
                (rb * rb + dc * dc).sqrt()
            }
        }
    }
}

/// The `(1-2λ)`-middle Cantor set on `[-1/2, 1/2]`.
#[derive(Debug, Clone, Copy)]
pub struct CantorSet {
    pub lambda: f64,
}

impl CantorSet {
    pub fn new(lambda: f64) -> Self {
        debug_assert!(lambda > 0.0 && lambda < 0.5);
        Self { lambda }
    }

    pub fn dimension(&self) -> f64 {
        std::f64::consts::LN_2 / (1.0 / self.lambda).ln()
    }

    /// Distance from `x` to the set together with a nearest point.
    ///
    /// Recursive descent through the two affine children, pruning a block when
    /// its interval cannot beat the current best; block endpoints belong to
    /// the set at every level, so the reported point is exact to the width
    /// tolerance.
    pub fn nearest(&self, x: f64) -> (f64, f64) {
        let mut best_d = f64::INFINITY;
        let mut best_p = 0.0;
        for e in [-0.5f64, 0.5] {
            let dd = (x - e).abs();
            if dd < best_d {
                best_d = dd;
                best_p = e;
            }
        }
        self.descend(x, 0.0, 0.5, &mut best_d, &mut best_p);
        (best_d, best_p)
    }

    fn descend(&self, x: f64, c: f64, w: f64, best_d: &mut f64, best_p: &mut f64) {
        let lower = ((x - c).abs() - w).max(0.0);
        if lower >= *best_d {
            return;
        }
        for e in [c - w, c + w] {
            let dd = (x - e).abs();
            if dd < *best_d {
                *best_d = dd;
                *best_p = e;
            }
        }
        if 2.0 * w < DISTANCE_WIDTH_TOL {
            return;
        }
        let shift = w * (1.0 - self.lambda);
        let cw = w * self.lambda;
        // nearer child first so the other is usually pruned
        let (c1, c2) = if x <= c { (c - shift, c + shift) } else { (c + shift, c - shift) };
        self.descend(x, c1, cw, best_d, best_p);
        self.descend(x, c2, cw, best_d, best_p);
    }

    pub fn distance(&self, x: f64) -> f64 {
        self.nearest(x).0
    }

    /// Distance to the product set `C_lambda^m`; componentwise nearest points
    /// are valid for products.
    pub fn distance_product(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.distance(xi).powi(2)).sum::<f64>().sqrt()
    }

    /// Nearest point of the product set.
    pub fn nearest_product(&self, x: &[f64]) -> (f64, Point) {
        let mut p: Point = [0.0; crate::MAX_DIM];
        let mut s = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let (di, pi) = self.nearest(xi);
            p[i] = pi;
            s += di * di;
        }
        (s.sqrt(), p)
    }

    /// Level-`k` block centers in increasing order.
    pub fn level_centers(&self, k: u32) -> Vec<f64> {
        let mut centers = vec![0.0f64];
        let mut w = 0.5f64;
        for _ in 0..k {
            let shift = w * (1.0 - self.lambda);
            let mut next = Vec::with_capacity(centers.len() * 2);
            for c in &centers {
                next.push(c - shift);
                next.push(c + shift);
            }
            next.sort_by(|a, b| a.partial_cmp(b).unwrap());
            centers = next;
            w *= self.lambda;
        }
        centers
    }
}

/// Outcome of a Cantor-measure quadrature.
#[derive(Debug, Clone, Copy)]
pub struct CantorQuad {
    pub value: f64,
    pub error_estimate: f64,
    pub cells: usize,
}

/// Integrate `f` against the self-similar measure on `C_lambda^m` by the
/// equal-weight average over the `2^{mk}` level-`k` block centers.
///
/// The error estimate is a sampled modulus of continuity of `f` at the block
/// radius `lambda^k sqrt(m) / 2`.
pub fn cantor_integrate<F>(
    f: F,
    lambda: f64,
    m: usize,
    depth: u32,
    budget: usize,
) -> Result<CantorQuad>
where
    F: Fn(&[f64]) -> f64,
{
    if depth == 0 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    let cells_f = 2f64.powi((m as u32 * depth) as i32);
    if cells_f > budget as f64 {
        return Err(Error::Resource(format!(
            "2^(m*k) = {cells_f} level-{depth} cells exceed the budget {budget}"
        )));
    }
    let set = CantorSet::new(lambda);
    let centers = set.level_centers(depth);
    let n1 = centers.len();
    let cells = n1.pow(m as u32);
    let weight = 1.0 / cells as f64;
    let mut sum = 0.0;
    let mut x: Point = [0.0; crate::MAX_DIM];
    let mut idx = vec![0usize; m];
    // sampled oscillation across one block
    let h = lambda.powi(depth as i32) * (m as f64).sqrt() * 0.5;
    let mut osc: f64 = 0.0;
    let osc_stride = (cells / 256).max(1);
    for c in 0..cells {
        let mut rem = c;
        for (j, slot) in idx.iter_mut().enumerate() {
            *slot = rem % n1;
            rem /= n1;
            x[j] = centers[*slot];
        }
        let v = f(&x[..m]);
        sum += v;
        if c % osc_stride == 0 {
            let mut xp = x;
            xp[0] += h;
            osc = osc.max((f(&xp[..m]) - v).abs());
        }
    }
    Ok(CantorQuad { value: sum * weight, error_estimate: osc, cells })
}

/// Maximum number of components [`CantorAdaptive::integrate`] can carry.
pub const MAX_CONV_COMPONENTS: usize = 8;

/// Adaptive vector-valued quadrature against the Cantor measure.
///
/// A block is refined while the one-level refinement of the cell-center rule
/// still moves the answer by more than the tolerance; far from the integrand's
/// active scale a shallow depth suffices. All components share one traversal.
pub struct CantorAdaptive {
    pub lambda: f64,
    pub m: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    /// Blocks wider than this are always refined; callers set it to the
    /// integrand's feature scale so narrow windows cannot slip between
    /// block centers.
    pub min_width: f64,
}

type ConvVec = [f64; MAX_CONV_COMPONENTS];

/// Width below which blocks straddling a declared integrand edge stop being
/// force-refined; the unresolved measure of such a block is about
/// `width^dim(C)`.
const EDGE_WIDTH_TOL: f64 = 1e-12;

impl CantorAdaptive {
    /// Integrate `k` components at once; `f` fills `out[..k]` at a point of
    /// `[-1/2, 1/2]^m`.
    pub fn integrate<F>(&self, k: usize, f: &F) -> ConvVec
    where
        F: Fn(&[f64], &mut [f64]),
    {
        self.integrate_with_edges(k, f, &[&[], &[]])
    }

    /// Like [`CantorAdaptive::integrate`], with declared breakpoints of the
    /// integrand along each axis. Blocks containing a breakpoint are refined
    /// unconditionally, so support windows cannot hide between block centers.
    pub fn integrate_with_edges<F>(&self, k: usize, f: &F, edges: &[&[f64]]) -> ConvVec
    where
        F: Fn(&[f64], &mut [f64]),
    {
        assert!(k <= MAX_CONV_COMPONENTS && self.m <= 2);
        let mut c: Point = [0.0; crate::MAX_DIM];
        self.node(k, f, &mut c, 0.5, 0, edges)
    }

    fn node<F>(
        &self,
        k: usize,
        f: &F,
        c: &mut Point,
        w: f64,
        depth: u32,
        edges: &[&[f64]],
    ) -> ConvVec
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let mut parent: ConvVec = [0.0; MAX_CONV_COMPONENTS];
        f(&c[..self.m], &mut parent[..k]);
        let shift = w * (1.0 - self.lambda);
        let nchild = 1usize << self.m;
        let inv = 1.0 / nchild as f64;
        let mut mean: ConvVec = [0.0; MAX_CONV_COMPONENTS];
        let mut buf: ConvVec = [0.0; MAX_CONV_COMPONENTS];
        let saved = *c;
        for ci in 0..nchild {
            for j in 0..self.m {
                c[j] = saved[j] + if ci >> j & 1 == 0 { -shift } else { shift };
            }
            f(&c[..self.m], &mut buf[..k]);
            for i in 0..k {
                mean[i] += buf[i] * inv;
            }
        }
        let mut disagree = 0.0f64;
        for i in 0..k {
            let scale = mean[i].abs().max(self.abs_tol / self.rel_tol);
            disagree = disagree.max((mean[i] - parent[i]).abs() / scale);
        }
        let width = 2.0 * w;
        let mut on_edge = false;
        if width > EDGE_WIDTH_TOL {
            'outer: for (j, ex) in edges.iter().enumerate().take(self.m) {
                for &e in ex.iter() {
                    if (e - saved[j]).abs() <= w {
                        on_edge = true;
                        break 'outer;
                    }
                }
            }
        }
        let converged =
            !on_edge && disagree <= self.rel_tol && width * self.lambda <= self.min_width;
        let result = if depth + 1 >= self.max_depth || converged {
            mean
        } else {
            let mut acc: ConvVec = [0.0; MAX_CONV_COMPONENTS];
            for ci in 0..nchild {
                for j in 0..self.m {
                    c[j] = saved[j] + if ci >> j & 1 == 0 { -shift } else { shift };
                }
                let v = self.node(k, f, c, w * self.lambda, depth + 1, edges);
                for i in 0..k {
                    acc[i] += v[i] * inv;
                }
            }
            acc
        };
        *c = saved;
        result
    }
}
