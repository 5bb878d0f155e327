//! The building-block fields, the smooth transition functions, the three
//! fractal regimes' `(u, A, b)` and their localized variants.

use crate::cantor::{CantorAdaptive, CantorSet, FractalConfig, Regime};
use crate::error::{Error, Result};
use crate::util::{norm_d, unit_sphere_area};
use crate::{Matrix, Point};

/// Amplitude of `u`; the top and bottom cones carry the values `±1/2`, which
/// is what makes the boundary pairing integral equal one.
pub const U_AMPLITUDE: f64 = 0.5;

/// Default exclusion radius around the contact set.
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 1e-6;

// --- scalar ramp -----------------------------------------------------------

// The ramp is a C^3 smoothed trapezoid: its slope profile rises along a
// quintic on the first third, holds the cap 3/2 on the middle third and
// descends symmetrically. Keeping three continuous derivatives makes the
// finite-difference divergence checks uniformly second order; the cap 3/2
// over a unit transition reproduces the declared bound 6 for theta'.

fn quintic(u: f64) -> f64 {
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// Antiderivative of the quintic, `int_0^u`.
fn quintic_int(u: f64) -> f64 {
    u * u * u * u * (2.5 + u * (-3.0 + u))
}

/// Monotone C^3 ramp: 0 for `s <= 0`, 1 for `s >= 1`, `sup |ramp'| = 3/2`.
pub fn ramp(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else if s < 1.0 / 3.0 {
        0.5 * quintic_int(3.0 * s)
    } else if s <= 2.0 / 3.0 {
        0.25 + 1.5 * (s - 1.0 / 3.0)
    } else {
        1.0 - 0.5 * quintic_int(3.0 * (1.0 - s))
    }
}

/// Derivative of [`ramp`].
pub fn ramp_deriv(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else if s < 1.0 / 3.0 {
        1.5 * quintic(3.0 * s)
    } else if s <= 2.0 / 3.0 {
        1.5
    } else {
        1.5 * quintic(3.0 * (1.0 - s))
    }
}

/// Descending plateau: 1 for `t <= lo`, 0 for `t >= hi`.
pub fn band(t: f64, lo: f64, hi: f64) -> f64 {
    1.0 - ramp((t - lo) / (hi - lo))
}

/// Derivative of [`band`] with respect to `t` (nonpositive).
pub fn band_deriv(t: f64, lo: f64, hi: f64) -> f64 {
    -ramp_deriv((t - lo) / (hi - lo)) / (hi - lo)
}

/// Cone profile: 0 on `(0, 1/4]`, 1 on `[1/2, oo)`, `sup |theta'| <= 6`.
pub fn theta(t: f64) -> f64 {
    ramp((t - 0.25) * 4.0)
}

/// Derivative of [`theta`].
pub fn theta_prime(t: f64) -> f64 {
    4.0 * ramp_deriv((t - 0.25) * 4.0)
}

/// Declared bound for the transition-ramp slope.
pub const RAMP_SLOPE_BOUND: f64 = 1.5;

/// Transition window for the u-side cutoff of the fractal regimes.
pub const RHO_TAU: (f64, f64) = (2.0, 4.0);
/// Transition window for the models' side indicator.
pub const SIDE_TAU: (f64, f64) = (0.5, 2.0);

// --- cutoff -----------------------------------------------------------------

fn eta_axis(t: f64) -> f64 {
    band(t.abs(), 4.0 / 6.0, 5.0 / 6.0)
}

fn eta_axis_deriv(t: f64) -> f64 {
    t.signum() * band_deriv(t.abs(), 4.0 / 6.0, 5.0 / 6.0)
}

/// Tensor-product cutoff: 1 on `[-4/6, 4/6]^d`, 0 outside `(-5/6, 5/6)^d`,
/// with `|grad eta| <= 9 sqrt(d)`.
pub fn cutoff_eta(x: &[f64], d: usize) -> (f64, Point) {
    let mut vals = [1.0f64; crate::MAX_DIM];
    let mut prod = 1.0;
    for i in 0..d {
        vals[i] = eta_axis(x[i]);
        prod *= vals[i];
    }
    let mut grad: Point = [0.0; crate::MAX_DIM];
    if prod != 0.0 || vals.iter().take(d).filter(|v| **v == 0.0).count() <= 1 {
        for i in 0..d {
            let mut g = eta_axis_deriv(x[i]);
            for (j, v) in vals.iter().enumerate().take(d) {
                if j != i {
                    g *= v;
                }
            }
            grad[i] = g;
        }
    }
    (prod, grad)
}

// --- samples ----------------------------------------------------------------

/// Values of the fields at one point.
#[derive(Debug, Clone, Copy)]
pub struct FieldSample {
    pub u: f64,
    pub grad_u: Point,
    /// Skew-symmetric potential of `b`.
    pub a_mat: Matrix,
    pub b: Point,
    /// Set when the point lies within the exclusion radius of the contact set.
    pub near_singular: bool,
}

impl FieldSample {
    fn zero() -> Self {
        Self {
            u: 0.0,
            grad_u: [0.0; crate::MAX_DIM],
            a_mat: [[0.0; crate::MAX_DIM]; crate::MAX_DIM],
            b: [0.0; crate::MAX_DIM],
            near_singular: false,
        }
    }
}

/// One localized half of the fields: either the compactly supported interior
/// part (`eta`-weighted) or the boundary-carrying remainder.
#[derive(Debug, Clone, Copy)]
pub struct PartSample {
    pub u: f64,
    pub grad_u: Point,
    pub a_mat: Matrix,
    pub b: Point,
}

/// Both localized halves plus the cutoff data used to form them.
#[derive(Debug, Clone, Copy)]
pub struct LocalizedSample {
    pub eta: f64,
    pub grad_eta: Point,
    /// `eta`-weighted part; support inside `[-5/6, 5/6]^d`.
    pub inner: PartSample,
    /// `(1 - eta)`-weighted part; vanishes on `[-4/6, 4/6]^d`.
    pub outer: PartSample,
    pub near_singular: bool,
}

// --- building block ---------------------------------------------------------

struct BlockParts {
    u: f64,
    grad_u: Point,
    /// `g` such that `A[i][d-1] = -x_i g`, `A[d-1][i] = x_i g`.
    g: f64,
    b: Point,
}

/// Core formulas shared by the matching regime and both convolutions.
/// `xbar` has length `d - 1`, `xd` is the distinguished coordinate.
fn block_parts(xbar: &[f64], xd: f64, d: usize, sigma: f64) -> BlockParts {
    let rho = norm_d(xbar, d - 1);
    let tau = xd.abs();
    let sd = if xd >= 0.0 { 1.0 } else { -1.0 };
    let mut out = BlockParts {
        u: 0.0,
        grad_u: [0.0; crate::MAX_DIM],
        g: 0.0,
        b: [0.0; crate::MAX_DIM],
    };

    // u-side cone, ratio |x_d| / |xbar|
    if rho == 0.0 {
        if tau > 0.0 {
            out.u = U_AMPLITUDE * sd;
        }
    } else {
        let q = tau / rho;
        out.u = U_AMPLITUDE * sd * theta(q);
        let tp = theta_prime(q);
        if tp != 0.0 {
            let c = U_AMPLITUDE * sd * tp;
            for i in 0..d - 1 {
                out.grad_u[i] = c * (-tau * xbar[i] / (rho * rho * rho));
            }
            out.grad_u[d - 1] = U_AMPLITUDE * tp / rho;
        }
    }

    // A/b-side cone, ratio |xbar| / |x_d|
    if rho > 0.0 {
        let (th, tp) = if tau == 0.0 {
            (1.0, 0.0)
        } else {
            let r = rho / tau;
            (theta(r), theta_prime(r))
        };
        let pow1 = rho.powi(1 - d as i32);
        out.g = th * pow1 / sigma;
        if tp != 0.0 {
            let pow2 = rho.powi(2 - d as i32);
            for i in 0..d - 1 {
                out.b[i] = xbar[i] * tp * sd * pow2 / (sigma * tau * tau);
            }
            out.b[d - 1] = tp * pow2 / (sigma * tau);
        }
    }
    out
}

fn assemble_a(xbar: &[f64], g_per_axis: &[f64], d: usize) -> Matrix {
    let mut a = [[0.0; crate::MAX_DIM]; crate::MAX_DIM];
    for i in 0..d - 1 {
        let v = xbar[i] * g_per_axis[i];
        a[i][d - 1] = -v;
        a[d - 1][i] = v;
    }
    a
}

/// The revised checkerboard building block `(u_d, A_d, b_d)` on `R^d`.
pub fn building_block(x: &[f64], d: usize) -> Result<FieldSample> {
    if norm_d(x, d) == 0.0 {
        return Err(Error::SingularPoint("building block is singular at the origin".into()));
    }
    let sigma = unit_sphere_area(d - 1);
    let parts = block_parts(&x[..d - 1], x[d - 1], d, sigma);
    let g_axes = [parts.g; crate::MAX_DIM];
    Ok(FieldSample {
        u: parts.u,
        grad_u: parts.grad_u,
        a_mat: assemble_a(&x[..d - 1], &g_axes[..d - 1], d),
        b: parts.b,
        near_singular: false,
    })
}

// --- regime fields -----------------------------------------------------------

/// Evaluator for the fields of one [`FractalConfig`].
///
/// All methods are pure; the struct is freely shareable between threads.
#[derive(Debug, Clone)]
pub struct Fields {
    pub config: FractalConfig,
    pub exclusion_radius: f64,
    /// Relative tolerance of the Cantor-measure convolutions.
    pub conv_rel_tol: f64,
    pub conv_max_depth: u32,
    sigma: f64,
    set: Option<CantorSet>,
}

impl Fields {
    pub fn new(config: FractalConfig) -> Self {
        let sigma = unit_sphere_area(config.d - 1);
        let set = config.cantor.map(|c| CantorSet::new(c.lambda));
        Self {
            config,
            exclusion_radius: DEFAULT_EXCLUSION_RADIUS,
            conv_rel_tol: 1e-8,
            conv_max_depth: 30,
            sigma,
            set,
        }
    }

    /// Tighten the convolution tolerance (used by finite-difference checks).
    pub fn with_conv_tol(mut self, rel_tol: f64, max_depth: u32) -> Self {
        self.conv_rel_tol = rel_tol;
        self.conv_max_depth = max_depth;
        self
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    /// Ratio that is `>= 2` on the support of `grad u` and `<= 1/2` on the
    /// support of `b`; the models mount their side indicators on it.
    pub fn grad_side_ratio(&self, x: &[f64]) -> f64 {
        let d = self.config.d;
        let (num, den) = match self.config.regime {
            Regime::Matching => (norm_d(x, d - 1), x[d - 1].abs()),
            Regime::Sub => (self.set.unwrap().distance_product(&x[..d - 1]), x[d - 1].abs()),
            Regime::Super => (norm_d(x, d - 1), self.set.unwrap().distance(x[d - 1])),
        };
        if den == 0.0 {
            if num == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            num / den
        }
    }

    /// Smoothed indicator of the `grad u` side: exactly 1 where `grad u` can
    /// be nonzero, exactly 0 where `b` can be, transition in between.
    pub fn grad_side_indicator(&self, x: &[f64]) -> f64 {
        let r = self.grad_side_ratio(x);
        if r.is_infinite() {
            1.0
        } else {
            1.0 - band(r, SIDE_TAU.0, SIDE_TAU.1)
        }
    }

    /// The coordinate whose powers build the models' weights: `|x_d|` in the
    /// matching/sub geometries, `|xbar|` in the super geometry.
    pub fn weight_coord(&self, x: &[f64]) -> f64 {
        let d = self.config.d;
        match self.config.regime {
            Regime::Matching | Regime::Sub => x[d - 1].abs(),
            Regime::Super => norm_d(x, d - 1),
        }
    }

    /// Smooth approximation of the contact-set indicator at scales
    /// `(tau1, tau2)`: value and gradient.
    ///
    /// The ratio is `d(xbar, C)/|x_d|` in the sub orientation and
    /// `d(x_d, C)/|xbar|` in the super orientation.
    pub fn rho(&self, x: &[f64], tau1: f64, tau2: f64) -> Result<(f64, Point)> {
        let d = self.config.d;
        let set = self.set.as_ref().ok_or_else(|| {
            Error::Domain("the matching regime has no Cantor transition".into())
        })?;
        if self.config.contact_distance(x) == 0.0 {
            return Err(Error::SingularPoint("transition undefined on the contact set".into()));
        }
        let mut grad: Point = [0.0; crate::MAX_DIM];
        match self.config.regime {
            Regime::Sub => {
                let (dist, nearest) = set.nearest_product(&x[..d - 1]);
                let hat = x[d - 1].abs();
                if hat == 0.0 {
                    return Ok((0.0, grad));
                }
                let ratio = dist / hat;
                let val = band(ratio, tau1, tau2);
                let bp = band_deriv(ratio, tau1, tau2);
                if bp != 0.0 && dist > 0.0 {
                    for i in 0..d - 1 {
                        grad[i] = bp * (x[i] - nearest[i]) / (dist * hat);
                    }
                    grad[d - 1] = bp * (-dist * x[d - 1].signum() / (hat * hat));
                }
                Ok((val, grad))
            }
            Regime::Super => {
                let (dist, nearest) = set.nearest(x[d - 1]);
                let hat = norm_d(x, d - 1);
                if hat == 0.0 {
                    return Ok((0.0, grad));
                }
                let ratio = dist / hat;
                let val = band(ratio, tau1, tau2);
                let bp = band_deriv(ratio, tau1, tau2);
                if bp != 0.0 {
                    let dir = (x[d - 1] - nearest).signum();
                    grad[d - 1] = bp * dir / hat;
                    for i in 0..d - 1 {
                        grad[i] = bp * (-dist * x[i] / (hat * hat * hat));
                    }
                }
                Ok((val, grad))
            }
            Regime::Matching => unreachable!(),
        }
    }

    /// Evaluate `(u, grad u, A, b)` at `x`.
    ///
    /// Points within the exclusion radius of the contact set only set the
    /// `near_singular` flag; on the contact set itself the fields are
    /// reported as zero.
    pub fn sample(&self, x: &[f64]) -> FieldSample {
        let d = self.config.d;
        let near = self.config.contact_distance(x) < self.exclusion_radius;
        let mut s = match self.config.regime {
            Regime::Matching => self.sample_matching(x, d),
            Regime::Sub => self.sample_sub(x, d),
            Regime::Super => self.sample_super(x, d),
        };
        s.near_singular = near;
        s
    }

    /// Only `(u, grad u)`; skips the measure convolutions that build `A` and
    /// `b` in the regimes where those are the expensive side.
    pub fn u_grad(&self, x: &[f64]) -> (f64, Point) {
        let d = self.config.d;
        let s = match self.config.regime {
            Regime::Matching => self.sample_matching(x, d),
            Regime::Sub => self.sub_u_side(x, d),
            Regime::Super => self.super_u_side(x, d),
        };
        (s.u, s.grad_u)
    }

    /// The localized values and gradients `(eta u, grad(eta u), (1-eta) u,
    /// grad((1-eta) u))` without the `A`/`b` side.
    pub fn localized_u_grad(&self, x: &[f64]) -> (f64, Point, f64, Point) {
        let d = self.config.d;
        let (u, gu) = self.u_grad(x);
        let (eta, ge) = cutoff_eta(x, d);
        let mut gi: Point = [0.0; crate::MAX_DIM];
        let mut go: Point = [0.0; crate::MAX_DIM];
        for i in 0..d {
            gi[i] = eta * gu[i] + u * ge[i];
            go[i] = (1.0 - eta) * gu[i] - u * ge[i];
        }
        (eta * u, gi, (1.0 - eta) * u, go)
    }

    /// Only `(A, b)`; skips the `u`-side convolution of the super regime.
    pub fn ab(&self, x: &[f64]) -> (Matrix, Point) {
        let d = self.config.d;
        let s = match self.config.regime {
            Regime::Matching => self.sample_matching(x, d),
            Regime::Sub => self.sub_ab_side(x, d),
            Regime::Super => self.super_ab_side(x, d),
        };
        (s.a_mat, s.b)
    }

    fn sample_matching(&self, x: &[f64], d: usize) -> FieldSample {
        if norm_d(x, d) == 0.0 {
            return FieldSample::zero();
        }
        building_block(x, d).unwrap_or_else(|_| FieldSample::zero())
    }

    fn sample_sub(&self, x: &[f64], d: usize) -> FieldSample {
        let mut out = self.sub_u_side(x, d);
        let ab = self.sub_ab_side(x, d);
        out.a_mat = ab.a_mat;
        out.b = ab.b;
        out
    }

    fn sub_u_side(&self, x: &[f64], d: usize) -> FieldSample {
        let set = self.set.unwrap();
        let m = d - 1;
        let mut out = FieldSample::zero();
        // u = amp * sgn(x_d) * band(d(xbar,C)/|x_d|, 2, 4), analytic gradient
        let (dist, nearest) = set.nearest_product(&x[..m]);
        let xd = x[d - 1];
        let tau = xd.abs();
        if tau > 0.0 {
            let ratio = dist / tau;
            let val = band(ratio, RHO_TAU.0, RHO_TAU.1);
            let sd = xd.signum();
            out.u = U_AMPLITUDE * sd * val;
            let bp = band_deriv(ratio, RHO_TAU.0, RHO_TAU.1);
            if bp != 0.0 && dist > 0.0 {
                for i in 0..m {
                    out.grad_u[i] = U_AMPLITUDE * sd * bp * (x[i] - nearest[i]) / (dist * tau);
                }
                out.grad_u[d - 1] = -U_AMPLITUDE * bp * dist / (tau * tau);
            }
        }
        out
    }

    fn sub_ab_side(&self, x: &[f64], d: usize) -> FieldSample {
        let set = self.set.unwrap();
        let m = d - 1;
        let mut out = FieldSample::zero();
        let xd = x[d - 1];
        let tau = xd.abs();
        // A and b by convolution with the Cantor measure in the xbar slots;
        // the block descent must at least resolve the bump width ~ |x_d|/4
        let adapt = CantorAdaptive {
            lambda: set.lambda,
            m,
            rel_tol: self.conv_rel_tol,
            abs_tol: 1e-300,
            max_depth: self.conv_max_depth,
            min_width: (tau / 8.0).max(1e-9),
        };
        let sigma = self.sigma;
        let k = m + d;
        // support edges of the shifted integrand along each measure axis
        let q = tau * 0.25;
        let e0 = [x[0] - 2.0 * q, x[0] - q, x[0] + q, x[0] + 2.0 * q];
        let e1 = if m > 1 { [x[1] - 2.0 * q, x[1] - q, x[1] + q, x[1] + 2.0 * q] } else { e0 };
        let edges: [&[f64]; 2] = [&e0, if m > 1 { &e1 } else { &[] }];
        let conv = adapt.integrate_with_edges(
            k,
            &|y: &[f64], out: &mut [f64]| {
                let mut z: Point = [0.0; crate::MAX_DIM];
                for i in 0..m {
                    z[i] = x[i] - y[i];
                }
                let parts = block_parts(&z[..m], xd, d, sigma);
                for i in 0..m {
                    out[i] = z[i] * parts.g;
                }
                out[m..m + d].copy_from_slice(&parts.b[..d]);
            },
            &edges,
        );
        for i in 0..m {
            out.a_mat[i][d - 1] = -conv[i];
            out.a_mat[d - 1][i] = conv[i];
        }
        out.b[..d].copy_from_slice(&conv[m..m + d]);
        out
    }

    fn sample_super(&self, x: &[f64], d: usize) -> FieldSample {
        let mut out = self.super_u_side(x, d);
        let ab = self.super_ab_side(x, d);
        out.a_mat = ab.a_mat;
        out.b = ab.b;
        out
    }

    fn super_u_side(&self, x: &[f64], d: usize) -> FieldSample {
        let set = self.set.unwrap();
        let mut out = FieldSample::zero();
        let xd = x[d - 1];
        let rho = norm_d(x, d - 1);
        // u and grad u by convolution along the distinguished axis; the
        // theta transition lives at scale |xbar|/4
        let adapt = CantorAdaptive {
            lambda: set.lambda,
            m: 1,
            rel_tol: self.conv_rel_tol,
            abs_tol: 1e-300,
            max_depth: self.conv_max_depth,
            min_width: (rho / 8.0).max(1e-9),
        };
        let sigma = self.sigma;
        let k = 1 + d;
        // theta-band edges and the sign flip of the shifted integrand
        let q = rho * 0.25;
        let e0 = [xd - 2.0 * q, xd - q, xd, xd + q, xd + 2.0 * q];
        let edges: [&[f64]; 2] = [&e0, &[]];
        let conv = adapt.integrate_with_edges(
            k,
            &|y: &[f64], out: &mut [f64]| {
                let parts = block_parts(&x[..d - 1], xd - y[0], d, sigma);
                out[0] = parts.u;
                out[1..1 + d].copy_from_slice(&parts.grad_u[..d]);
            },
            &edges,
        );
        out.u = conv[0];
        out.grad_u[..d].copy_from_slice(&conv[1..1 + d]);
        out
    }

    fn super_ab_side(&self, x: &[f64], d: usize) -> FieldSample {
        let set = self.set.unwrap();
        let mut out = FieldSample::zero();
        let xd = x[d - 1];
        let rho = norm_d(x, d - 1);
        // A = vortex * rho_u with analytic divergence
        if rho > 0.0 {
            let (dist, nearest) = set.nearest(xd);
            let ratio = dist / rho;
            if ratio < RHO_TAU.1 {
                let val = band(ratio, RHO_TAU.0, RHO_TAU.1);
                let bp = band_deriv(ratio, RHO_TAU.0, RHO_TAU.1);
                let v = rho.powi(1 - d as i32) / self.sigma;
                for i in 0..d - 1 {
                    let a = x[i] * v * val;
                    out.a_mat[i][d - 1] = -a;
                    out.a_mat[d - 1][i] = a;
                }
                if bp != 0.0 {
                    let dir = (xd - nearest).signum();
                    for i in 0..d - 1 {
                        out.b[i] = -x[i] * v * bp * dir / rho;
                    }
                    out.b[d - 1] = -v * bp * dist / rho;
                }
            }
        }
        out
    }

    /// Localized halves `eta * (u, A, b)` and `(1 - eta) * (u, A, b)`, with
    /// the divergences corrected by the product rule.
    pub fn localized(&self, x: &[f64]) -> LocalizedSample {
        let d = self.config.d;
        let s = self.sample(x);
        let (eta, grad_eta) = cutoff_eta(x, d);
        let mut inner = PartSample {
            u: eta * s.u,
            grad_u: [0.0; crate::MAX_DIM],
            a_mat: [[0.0; crate::MAX_DIM]; crate::MAX_DIM],
            b: [0.0; crate::MAX_DIM],
        };
        let mut outer = PartSample {
            u: (1.0 - eta) * s.u,
            grad_u: [0.0; crate::MAX_DIM],
            a_mat: [[0.0; crate::MAX_DIM]; crate::MAX_DIM],
            b: [0.0; crate::MAX_DIM],
        };
        for i in 0..d {
            inner.grad_u[i] = eta * s.grad_u[i] + s.u * grad_eta[i];
            outer.grad_u[i] = (1.0 - eta) * s.grad_u[i] - s.u * grad_eta[i];
            let mut a_grad_eta = 0.0;
            for j in 0..d {
                inner.a_mat[i][j] = eta * s.a_mat[i][j];
                outer.a_mat[i][j] = (1.0 - eta) * s.a_mat[i][j];
                a_grad_eta += s.a_mat[i][j] * grad_eta[j];
            }
            inner.b[i] = eta * s.b[i] + a_grad_eta;
            outer.b[i] = (1.0 - eta) * s.b[i] - a_grad_eta;
        }
        LocalizedSample { eta, grad_eta, inner, outer, near_singular: s.near_singular }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::Regime;
    use crate::util::SplitMix64;

    fn fd4(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn ramp_shape_and_slope_bound() {
        assert_eq!(ramp(-0.1), 0.0);
        assert_eq!(ramp(1.1), 1.0);
        assert!((ramp(0.5) - 0.5).abs() < 1e-14);
        let mut prev = 0.0;
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            let v = ramp(s);
            assert!(v >= prev - 1e-15, "monotone");
            prev = v;
            assert!(ramp_deriv(s) <= RAMP_SLOPE_BOUND + 1e-12);
            let fd = fd4(ramp, s, 1e-5);
            assert!((fd - ramp_deriv(s)).abs() < 1e-8, "s={s}");
        }
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta(0.2), 0.0);
        assert_eq!(theta(0.6), 1.0);
        let mut max_slope = 0.0f64;
        for i in 0..=4000 {
            let t = i as f64 / 4000.0;
            max_slope = max_slope.max(theta_prime(t).abs());
        }
        assert!(max_slope <= 6.0 + 1e-12);
        assert!(max_slope > 5.9, "the declared bound is attained");
    }

    #[test]
    fn eta_examples() {
        let (v, g) = cutoff_eta(&[0.0, 0.0], 2);
        assert_eq!(v, 1.0);
        assert_eq!(g[0], 0.0);
        let (v, _) = cutoff_eta(&[0.9, 0.0], 2);
        assert_eq!(v, 0.0);
        let mut rng = SplitMix64::new(5);
        for _ in 0..10_000 {
            let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            for d in [2usize, 3] {
                let (v, g) = cutoff_eta(&x, d);
                assert!((0.0..=1.0).contains(&v));
                let gn = crate::util::norm_d(&g, d);
                assert!(gn <= 9.0 * (d as f64).sqrt() + 1e-9);
            }
        }
    }

    #[test]
    fn eta_gradient_matches_finite_differences() {
        let pts = [[0.7, 0.1], [0.72, -0.78], [-0.81, 0.69], [0.5, 0.82]];
        for p in pts {
            for axis in 0..2 {
                let fd = fd4(
                    |t| {
                        let mut y = p;
                        y[axis] = t;
                        cutoff_eta(&y, 2).0
                    },
                    p[axis],
                    1e-6,
                );
                let (_, g) = cutoff_eta(&p, 2);
                assert!((fd - g[axis]).abs() < 1e-7, "{p:?} axis {axis}");
            }
        }
    }

    #[test]
    fn building_block_u_values() {
        // upper cone: ratio 9 is far above the transition, u takes the full
        // amplitude 1/2
        let s = building_block(&[0.1, 0.9], 2).unwrap();
        assert_eq!(s.u, U_AMPLITUDE);
        // side region: ratio 1/9 is below 1/4
        let s = building_block(&[0.9, 0.1], 2).unwrap();
        assert_eq!(s.u, 0.0);
        assert!(building_block(&[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn building_block_skew_and_disjoint() {
        let mut rng = SplitMix64::new(1);
        for d in [2usize, 3] {
            for _ in 0..2000 {
                let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
                if crate::util::norm_d(&x, d) < 1e-3 {
                    continue;
                }
                let s = building_block(&x, d).unwrap();
                for i in 0..d {
                    for j in 0..d {
                        assert_eq!(s.a_mat[i][j], -s.a_mat[j][i]);
                    }
                }
                let gu = crate::util::norm_d(&s.grad_u, d);
                let bb = crate::util::norm_d(&s.b, d);
                assert!(gu * bb == 0.0, "supports must be disjoint at {x:?}");
                assert!(s.u.abs() <= U_AMPLITUDE + 1e-15);
            }
        }
    }

    #[test]
    fn building_block_divergence_oracle() {
        // analytic b against 4th-order finite differences of the rows of A
        let mut rng = SplitMix64::new(2);
        let h = 1e-5;
        for d in [2usize, 3] {
            let mut checked = 0;
            let mut max_rel = 0.0f64;
            while checked < 100 {
                let x = [rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)];
                if crate::util::norm_d(&x, d) < 0.35 {
                    continue;
                }
                let s = building_block(&x, d).unwrap();
                let bnorm = crate::util::norm_d(&s.b, d);
                if bnorm < 1.0 {
                    continue; // relative comparison needs the band interior
                }
                checked += 1;
                for i in 0..d {
                    let mut div = 0.0;
                    for j in 0..d {
                        div += fd4(
                            |t| {
                                let mut y = x;
                                y[j] = t;
                                building_block(&y, d).unwrap().a_mat[i][j]
                            },
                            x[j],
                            h,
                        );
                    }
                    max_rel = max_rel.max((div - s.b[i]).abs() / bnorm);
                }
            }
            assert!(max_rel < 1e-6, "d={d}: max relative error {max_rel}");
        }
    }

    #[test]
    fn building_block_boundary_normalization() {
        // int_{R^{d-1}} b(xbar, 1) . e_d dxbar = 1 for d = 2 and 3
        for d in [2usize, 3] {
            let val = match d {
                2 => {
                    let n = 20_000;
                    let mut s = 0.0;
                    for i in 0..n {
                        let t = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                        s += building_block(&[t, 1.0], 2).unwrap().b[1];
                    }
                    s * 2.0 / n as f64
                }
                3 => {
                    let n = 1200;
                    let mut s = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let x0 = -0.6 + 1.2 * (i as f64 + 0.5) / n as f64;
                            let x1 = -0.6 + 1.2 * (j as f64 + 0.5) / n as f64;
                            s += building_block(&[x0, x1, 1.0], 3).unwrap().b[2];
                        }
                    }
                    s * (1.2 / n as f64).powi(2)
                }
                _ => unreachable!(),
            };
            assert!((val - 1.0).abs() < 1e-6, "d={d}: {val}");
        }
    }

    fn sub_fields() -> Fields {
        Fields::new(FractalConfig::new(Regime::Sub, 2, 1.5).unwrap())
    }

    fn super_fields() -> Fields {
        Fields::new(FractalConfig::new(Regime::Super, 2, 3.0).unwrap())
    }

    #[test]
    fn sub_u_plateau_and_amplitude() {
        let f = sub_fields();
        // near the Cantor set and x_d > 0, ratio <= 2 forces the plateau
        let s = f.sample(&[0.5, 0.3]);
        assert_eq!(s.u, U_AMPLITUDE);
        let s = f.sample(&[0.5, -0.3]);
        assert_eq!(s.u, -U_AMPLITUDE);
        // far from the set at shallow height the cutoff vanishes
        let s = f.sample(&[0.0, 0.01]);
        assert_eq!(s.u, 0.0);
    }

    #[test]
    fn sub_grad_u_matches_finite_differences() {
        let f = sub_fields();
        let pts = [[0.55, 0.2], [0.3, -0.15], [0.52, 0.11], [-0.1, 0.04]];
        for p in pts {
            let s = f.sample(&p);
            for axis in 0..2 {
                let fd = fd4(
                    |t| {
                        let mut y = p;
                        y[axis] = t;
                        f.sample(&y).u
                    },
                    p[axis],
                    1e-6,
                );
                assert!(
                    (fd - s.grad_u[axis]).abs() < 1e-6 * (1.0 + s.grad_u[axis].abs()),
                    "{p:?} axis {axis}: fd {fd} vs {}",
                    s.grad_u[axis]
                );
            }
        }
    }

    #[test]
    fn sub_divergence_oracle() {
        let f = sub_fields().with_conv_tol(1e-12, 40);
        let h = 1e-5;
        let mut rng = SplitMix64::new(4);
        let mut checked = 0;
        let mut max_rel = 0.0f64;
        while checked < 20 {
            let x = [rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)];
            if f.config.contact_distance(&x) < 0.15 {
                continue;
            }
            let s = f.sample(&x);
            let bnorm = crate::util::norm_d(&s.b, 2);
            if bnorm < 0.5 {
                continue;
            }
            checked += 1;
            for i in 0..2 {
                let mut div = 0.0;
                for j in 0..2 {
                    div += fd4(
                        |t| {
                            let mut y = x;
                            y[j] = t;
                            f.sample(&y).a_mat[i][j]
                        },
                        x[j],
                        h,
                    );
                }
                max_rel = max_rel.max((div - s.b[i]).abs() / bnorm);
            }
        }
        assert!(max_rel < 1e-5, "max relative error {max_rel}");
    }

    #[test]
    fn super_u_bounded_and_grad_matches_fd() {
        let f = super_fields();
        let mut rng = SplitMix64::new(9);
        for _ in 0..300 {
            let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            let s = f.sample(&x);
            assert!(s.u.abs() <= U_AMPLITUDE + 1e-12);
        }
        let pts = [[0.3, 0.4], [0.2, -0.45], [0.15, 0.52]];
        let ftight = super_fields().with_conv_tol(1e-12, 40);
        for p in pts {
            let s = ftight.sample(&p);
            for axis in 0..2 {
                let fd = fd4(
                    |t| {
                        let mut y = p;
                        y[axis] = t;
                        ftight.sample(&y).u
                    },
                    p[axis],
                    1e-6,
                );
                assert!(
                    (fd - s.grad_u[axis]).abs() < 1e-5 * (1.0 + s.grad_u[axis].abs()),
                    "{p:?} axis {axis}: fd {fd} vs {}",
                    s.grad_u[axis]
                );
            }
        }
    }

    #[test]
    fn super_divergence_oracle() {
        let f = super_fields();
        let h = 1e-5;
        let mut rng = SplitMix64::new(6);
        let mut checked = 0;
        let mut max_rel = 0.0f64;
        while checked < 40 {
            let x = [rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)];
            if f.config.contact_distance(&x) < 0.25 {
                continue;
            }
            let s = f.sample(&x);
            let bnorm = crate::util::norm_d(&s.b, 2);
            if bnorm < 0.5 {
                continue;
            }
            checked += 1;
            for i in 0..2 {
                let mut div = 0.0;
                for j in 0..2 {
                    div += fd4(
                        |t| {
                            let mut y = x;
                            y[j] = t;
                            f.sample(&y).a_mat[i][j]
                        },
                        x[j],
                        h,
                    );
                }
                max_rel = max_rel.max((div - s.b[i]).abs() / bnorm);
            }
        }
        assert!(max_rel < 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn disjoint_supports_per_regime() {
        let mut rng = SplitMix64::new(12);
        for f in [
            Fields::new(FractalConfig::new(Regime::Matching, 2, 2.0).unwrap()),
            sub_fields(),
            super_fields(),
        ] {
            for _ in 0..2000 {
                let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
                let s = f.sample(&x);
                let gu = crate::util::norm_d(&s.grad_u, 2);
                let bb = crate::util::norm_d(&s.b, 2);
                assert!(
                    gu * bb < 1e-14,
                    "{:?} at {x:?}: |grad u| |b| = {}",
                    f.config.regime,
                    gu * bb
                );
            }
        }
    }

    #[test]
    fn localized_parts_recombine() {
        let mut rng = SplitMix64::new(13);
        let f = sub_fields();
        for _ in 0..200 {
            let x = [rng.uniform(-0.99, 0.99), rng.uniform(-0.99, 0.99)];
            let s = f.sample(&x);
            let loc = f.localized(&x);
            for i in 0..2 {
                let back = loc.inner.b[i] + loc.outer.b[i];
                assert!((back - s.b[i]).abs() <= 1e-12 * (1.0 + s.b[i].abs()));
                let gu = loc.inner.grad_u[i] + loc.outer.grad_u[i];
                assert!((gu - s.grad_u[i]).abs() <= 1e-12 * (1.0 + s.grad_u[i].abs()));
            }
            assert!((loc.inner.u + loc.outer.u - s.u).abs() < 1e-14);
        }
    }

    #[test]
    fn localized_supports() {
        let f = Fields::new(FractalConfig::new(Regime::Matching, 2, 2.0).unwrap());
        // inner part vanishes outside [-5/6, 5/6]^d
        let loc = f.localized(&[0.95, 0.2]);
        assert_eq!(loc.inner.u, 0.0);
        assert_eq!(crate::util::norm_d(&loc.inner.b, 2), 0.0);
        // outer part vanishes inside [-4/6, 4/6]^d
        let loc = f.localized(&[0.3, 0.5]);
        assert_eq!(loc.outer.u, 0.0);
        assert_eq!(crate::util::norm_d(&loc.outer.b, 2), 0.0);
        assert_eq!(crate::util::norm_d(&loc.outer.grad_u, 2), 0.0);
    }

    #[test]
    fn rho_sandwich_examples() {
        let f = sub_fields();
        // d(xbar, C) = 0.1 at height 1: ratio far below tau1
        let x = [0.5 + 0.1, 1.0];
        let (v, _) = f.rho(&x, 2.0, 4.0).unwrap();
        assert_eq!(v, 1.0);
        // far from the set relative to the height
        let x = [0.0, 0.03];
        let (v, _) = f.rho(&x, 2.0, 4.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn rho_gradient_bound_on_band() {
        // |grad rho| * |x_d| stays below the declared ramp constant on the
        // transition band
        let f = sub_fields();
        let mut rng = SplitMix64::new(21);
        let c_rho = RAMP_SLOPE_BOUND / (RHO_TAU.1 - RHO_TAU.0) * (1.0 + RHO_TAU.1.powi(2)).sqrt()
            + RAMP_SLOPE_BOUND;
        for _ in 0..10_000 {
            let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            if f.config.contact_distance(&x) < 1e-6 || x[1].abs() < 1e-6 {
                continue;
            }
            let (_, g) = f.rho(&x, 2.0, 4.0).unwrap();
            let gn = crate::util::norm_d(&g, 2);
            assert!(gn * x[1].abs() <= c_rho + 1e-9, "at {x:?}: {}", gn * x[1].abs());
        }
    }

    #[test]
    fn grad_side_indicator_separates_supports() {
        let mut rng = SplitMix64::new(33);
        for f in [
            Fields::new(FractalConfig::new(Regime::Matching, 2, 2.0).unwrap()),
            sub_fields(),
            super_fields(),
        ] {
            for _ in 0..3000 {
                let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
                let s = f.sample(&x);
                let chi = f.grad_side_indicator(&x);
                if crate::util::norm_d(&s.grad_u, 2) > 0.0 {
                    assert_eq!(chi, 1.0, "grad side at {x:?} ({:?})", f.config.regime);
                }
                if crate::util::norm_d(&s.b, 2) > 0.0 {
                    assert_eq!(chi, 0.0, "b side at {x:?} ({:?})", f.config.regime);
                }
            }
        }
    }
}
