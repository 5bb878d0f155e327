//! The separating functionals, the proposition checks, the Lavrentiev gap
//! scan and the convex-duality certificate.

use crate::cantor::{FractalConfig, Regime};
use crate::error::{Error, Result};
use crate::fields::{band, band_deriv, Fields};
use crate::integrate::{integrate_volume, QuadPolicy, QuadResult};
use crate::orlicz::{ModelKind, OrliczModel};
use crate::util::{dot_d, SplitMix64};
use crate::Point;
use serde::Serialize;

/// Which separating functional: the full field `b`, the compactly supported
/// inner part `b°`, or the boundary-carrying outer part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparatingKind {
    Full,
    Inner,
    Outer,
}

/// `int b_variant . grad w dx` for a caller-supplied gradient field.
pub fn separating_functional<G>(
    kind: SeparatingKind,
    grad_w: G,
    fields: &Fields,
    pol: &QuadPolicy,
) -> Result<QuadResult>
where
    G: Fn(&[f64]) -> Point,
{
    let d = fields.d();
    integrate_volume(
        |x| {
            let g = grad_w(x);
            let b = match kind {
                SeparatingKind::Full => fields.sample(x).b,
                SeparatingKind::Inner => fields.localized(x).inner.b,
                SeparatingKind::Outer => fields.localized(x).outer.b,
            };
            dot_d(&b, &g, d)
        },
        &fields.config,
        pol,
    )
}

/// The nine pairings of `{S, S_outer, S_inner}` against `{u, u_outer,
/// u_inner}` together with the predicted values.
#[derive(Debug, Clone, Serialize)]
pub struct TableCheck {
    /// Row order `S, S_outer, S_inner`; column order `u, u_outer, u_inner`.
    pub values: [[f64; 3]; 3],
    pub expected: [[f64; 3]; 3],
    pub quad_errors: [[f64; 3]; 3],
    pub max_abs_err: f64,
}

/// Expected pairing table.
pub const SU_TABLE: [[f64; 3]; 3] = [
    [0.0, 1.0, -1.0],
    [1.0, 1.0, 0.0],
    [-1.0, 0.0, -1.0],
];

/// Evaluate all nine pairings by quadrature.
pub fn check_su_table(fields: &Fields, pol: &QuadPolicy) -> Result<TableCheck> {
    let d = fields.d();
    let mut values = [[0.0; 3]; 3];
    let mut errors = [[0.0; 3]; 3];
    for row in 0..3 {
        for col in 0..3 {
            let q = integrate_volume(
                |x| {
                    let loc = fields.localized(x);
                    let b = match row {
                        0 => {
                            let mut t = loc.inner.b;
                            for i in 0..d {
                                t[i] += loc.outer.b[i];
                            }
                            t
                        }
                        1 => loc.outer.b,
                        _ => loc.inner.b,
                    };
                    let g = match col {
                        0 => {
                            let mut t = loc.inner.grad_u;
                            for i in 0..d {
                                t[i] += loc.outer.grad_u[i];
                            }
                            t
                        }
                        1 => loc.outer.grad_u,
                        _ => loc.inner.grad_u,
                    };
                    dot_d(&b, &g, d)
                },
                &fields.config,
                pol,
            )?;
            values[row][col] = q.value;
            errors[row][col] = q.error_estimate;
        }
    }
    let mut max_abs_err = 0.0f64;
    for r in 0..3 {
        for c in 0..3 {
            max_abs_err = max_abs_err.max((values[r][c] - SU_TABLE[r][c]).abs());
        }
    }
    Ok(TableCheck { values, expected: SU_TABLE, quad_errors: errors, max_abs_err })
}

// --- fixed smooth test suites -------------------------------------------------

/// A named test function with analytic gradient.
pub struct TestFn {
    pub name: String,
    pub value: std::sync::Arc<dyn Fn(&[f64]) -> f64 + Sync + Send>,
    pub grad: std::sync::Arc<dyn Fn(&[f64]) -> Point + Sync + Send>,
}

fn tf(
    name: &str,
    value: impl Fn(&[f64]) -> f64 + Sync + Send + 'static,
    grad: impl Fn(&[f64]) -> Point + Sync + Send + 'static,
) -> TestFn {
    TestFn {
        name: name.into(),
        value: std::sync::Arc::new(value),
        grad: std::sync::Arc::new(grad),
    }
}

/// The fixed suite of smooth global test functions (tensor trigonometric
/// polynomials and monomials up to degree 3).
pub fn smooth_suite(d: usize) -> Vec<TestFn> {
    use std::f64::consts::PI;
    let z = |x: &[f64]| if x.len() > 2 { x[2] } else { 0.0 };
    let zc = move |x: &[f64]| if x.len() > 2 { (PI * z(x)).cos() } else { 1.0 };
    let zs = move |x: &[f64]| if x.len() > 2 { -PI * (PI * z(x)).sin() } else { 0.0 };
    let mut out = vec![
        tf(
            "sin(pi x1) cos(pi x2)",
            move |x| (PI * x[0]).sin() * (PI * x[1]).cos() * zc(x),
            move |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[0] = PI * (PI * x[0]).cos() * (PI * x[1]).cos() * zc(x);
                g[1] = -PI * (PI * x[0]).sin() * (PI * x[1]).sin() * zc(x);
                if x.len() > 2 {
                    g[2] = (PI * x[0]).sin() * (PI * x[1]).cos() * zs(x);
                }
                g
            },
        ),
        tf(
            "sin(pi x1) sin(pi x2)",
            |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
            |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[0] = PI * (PI * x[0]).cos() * (PI * x[1]).sin();
                g[1] = PI * (PI * x[0]).sin() * (PI * x[1]).cos();
                g
            },
        ),
        tf(
            "cos(2 pi x1) cos(pi x2)",
            |x| (2.0 * PI * x[0]).cos() * (PI * x[1]).cos(),
            |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[0] = -2.0 * PI * (2.0 * PI * x[0]).sin() * (PI * x[1]).cos();
                g[1] = -PI * (2.0 * PI * x[0]).cos() * (PI * x[1]).sin();
                g
            },
        ),
        tf(
            "sin(2 pi x2)",
            |x| (2.0 * PI * x[1]).sin(),
            |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[1] = 2.0 * PI * (2.0 * PI * x[1]).cos();
                g
            },
        ),
        tf("x1", |x| x[0], |_| {
            let mut g: Point = [0.0; crate::MAX_DIM];
            g[0] = 1.0;
            g
        }),
        tf(
            "x1 x2",
            |x| x[0] * x[1],
            |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[0] = x[1];
                g[1] = x[0];
                g
            },
        ),
        tf(
            "x1^2 x2",
            |x| x[0] * x[0] * x[1],
            |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[0] = 2.0 * x[0] * x[1];
                g[1] = x[0] * x[0];
                g
            },
        ),
        tf(
            "x2^3",
            |x| x[1] * x[1] * x[1],
            |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[1] = 3.0 * x[1] * x[1];
                g
            },
        ),
        tf(
            "x1 + x2^2/2",
            |x| x[0] + 0.5 * x[1] * x[1],
            |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[0] = 1.0;
                g[1] = x[1];
                g
            },
        ),
        tf(
            "cos(pi x1)",
            |x| (PI * x[0]).cos(),
            |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[0] = -PI * (PI * x[0]).sin();
                g
            },
        ),
    ];
    if d == 3 {
        out.push(tf(
            "x3^3",
            |x| x[2] * x[2] * x[2],
            |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[2] = 3.0 * x[2] * x[2];
                g
            },
        ));
        out.push(tf(
            "x1 x2 x3",
            |x| x[0] * x[1] * x[2],
            |x| {
                let mut g: Point = [0.0; crate::MAX_DIM];
                g[0] = x[1] * x[2];
                g[1] = x[0] * x[2];
                g[2] = x[0] * x[1];
                g
            },
        ));
    }
    out
}

const BUMP_LO: f64 = 0.6;
const BUMP_HI: f64 = 0.9;

fn bump(x: &[f64], d: usize) -> f64 {
    let mut v = 1.0;
    for &xi in x.iter().take(d) {
        v *= band(xi.abs(), BUMP_LO, BUMP_HI);
    }
    v
}

fn bump_grad(x: &[f64], d: usize) -> Point {
    let mut vals = [1.0; crate::MAX_DIM];
    for i in 0..d {
        vals[i] = band(x[i].abs(), BUMP_LO, BUMP_HI);
    }
    let mut g: Point = [0.0; crate::MAX_DIM];
    for i in 0..d {
        let mut gi = x[i].signum() * band_deriv(x[i].abs(), BUMP_LO, BUMP_HI);
        for (j, v) in vals.iter().enumerate().take(d) {
            if j != i {
                gi *= v;
            }
        }
        g[i] = gi;
    }
    g
}

/// The smooth suite multiplied by a compactly supported bump (support inside
/// `(-0.9, 0.9)^d`).
pub fn compact_suite(d: usize) -> Vec<TestFn> {
    smooth_suite(d)
        .into_iter()
        .map(|t| {
            let name = format!("bump * {}", t.name);
            let val = t.value.clone();
            let val2 = t.value.clone();
            let grd = t.grad.clone();
            TestFn {
                name,
                value: std::sync::Arc::new(move |x: &[f64]| (val)(x) * bump(x, d.min(x.len()))),
                grad: std::sync::Arc::new(move |x: &[f64]| {
                    let d_here = d.min(x.len());
                    let v = (val2)(x);
                    let g = (grd)(x);
                    let b = bump(x, d_here);
                    let bg = bump_grad(x, d_here);
                    let mut out: Point = [0.0; crate::MAX_DIM];
                    for i in 0..d_here {
                        out[i] = g[i] * b + v * bg[i];
                    }
                    out
                }),
            }
        })
        .collect()
}

/// Weak and pointwise divergence-freeness diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct DivFreeReport {
    /// Max `|S_inner(w)|` over the smooth suite.
    pub max_inner_pairing: f64,
    /// Max `|S(w)|` over the compactly supported suite.
    pub max_full_pairing: f64,
    pub per_function: Vec<(String, f64)>,
    /// Max `|div b|` by fourth-order finite differences at random points.
    pub pointwise_max: f64,
    pub pointwise_samples: usize,
}

/// Check that `b_inner` annihilates gradients of smooth functions, `b` those
/// of compactly supported ones, and that the analytic divergence vanishes
/// pointwise away from the contact set.
pub fn divergence_free_check(
    fields: &Fields,
    pol: &QuadPolicy,
    seed: u64,
    pointwise_samples: usize,
    min_contact_dist: f64,
) -> Result<DivFreeReport> {
    let d = fields.d();
    let mut per = Vec::new();
    let mut max_inner = 0.0f64;
    for t in smooth_suite(d) {
        let q = separating_functional(SeparatingKind::Inner, |x| (t.grad)(x), fields, pol)?;
        max_inner = max_inner.max(q.value.abs());
        per.push((format!("inner vs {}", t.name), q.value));
    }
    let mut max_full = 0.0f64;
    for t in compact_suite(d) {
        let q = separating_functional(SeparatingKind::Full, |x| (t.grad)(x), fields, pol)?;
        max_full = max_full.max(q.value.abs());
        per.push((t.name.clone(), q.value));
    }
    let pw = pointwise_divergence(fields, seed, pointwise_samples, min_contact_dist);
    Ok(DivFreeReport {
        max_inner_pairing: max_inner,
        max_full_pairing: max_full,
        per_function: per,
        pointwise_max: pw,
        pointwise_samples,
    })
}

/// Max of `|div b|` over random points with `d(x, S) >= min_dist`, by
/// fourth-order centered differences with step `1e-5`.
pub fn pointwise_divergence(
    fields: &Fields,
    seed: u64,
    samples: usize,
    min_dist: f64,
) -> f64 {
    let d = fields.d();
    let h = 1e-5;
    let mut rng = SplitMix64::new(seed);
    let mut max_div = 0.0f64;
    let mut done = 0;
    while done < samples {
        let mut x: Point = [0.0; crate::MAX_DIM];
        for slot in x.iter_mut().take(d) {
            *slot = rng.uniform(-0.95, 0.95);
        }
        if fields.config.contact_distance(&x[..d]) < min_dist {
            continue;
        }
        done += 1;
        let mut div = 0.0;
        for axis in 0..d {
            let b_at = |t: f64| {
                let mut y = x;
                y[axis] = t;
                fields.sample(&y[..d]).b[axis]
            };
            let c = x[axis];
            div += (b_at(c - 2.0 * h) - 8.0 * b_at(c - h) + 8.0 * b_at(c + h)
                - b_at(c + 2.0 * h))
                / (12.0 * h);
        }
        max_div = max_div.max(div.abs());
    }
    max_div
}

// --- singular modular coefficients ---------------------------------------------

/// One power term of a modular: `coef * t^exponent`, with `tail` the
/// extrapolated mass hiding below the truncation scale.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerTerm {
    pub exponent: f64,
    pub coef: f64,
    pub tail: f64,
}

impl PowerTerm {
    pub fn total(&self) -> f64 {
        self.coef + self.tail
    }
}

/// Local scaling rate of the truncated mass of a gradient modular: the mass
/// within distance `s` of the contact set scales like `s^sigma`.
pub fn sigma_grad_modular(config: &FractalConfig, pm: f64) -> f64 {
    match config.regime {
        Regime::Matching | Regime::Sub => config.p0 - pm,
        Regime::Super => (1.0 - config.contact_dim()) * (config.p0 - pm),
    }
}

/// Same rate for a modular of `|b|` at conjugate-side power `pc`.
pub fn sigma_b_modular(config: &FractalConfig, pc: f64) -> f64 {
    let d = config.d as f64;
    let dim = config.contact_dim();
    match config.regime {
        Regime::Matching | Regime::Sub => (d - dim) + (dim + 1.0 - d) * pc,
        Regime::Super => (d - dim) + (1.0 - d) * pc,
    }
}

/// Integrate a singular modular with a two-scale truncation pair and
/// extrapolate the unresolved tail from the known scaling rate `sigma`.
pub fn singular_coefficient<F>(
    f: F,
    config: &FractalConfig,
    sigma: f64,
    pol: &QuadPolicy,
) -> Result<PowerTerm>
where
    F: Fn(&[f64]) -> f64,
{
    let d1 = 1e-3;
    let d2 = 1e-5;
    let q1 = integrate_volume(&f, config, &pol.clone().with_delta(d1))?;
    let q2 = integrate_volume(&f, config, &pol.clone().with_delta(d2))?;
    let mut tail = 0.0;
    if sigma > 0.0 && q2.value > q1.value {
        let s1 = d1.powf(sigma);
        let s2 = d2.powf(sigma);
        if s1 > s2 {
            tail = (q2.value - q1.value) * s2 / (s1 - s2);
        }
    }
    Ok(PowerTerm { exponent: 0.0, coef: q2.value, tail })
}

/// Power decomposition of `t -> F(t v)` where `v` is `grad u` (or `grad
/// u_inner` when `localized`). Returns `None` for models without a power
/// split (continuous exponent).
pub fn grad_modular_terms(
    model: &OrliczModel,
    fields: &Fields,
    localized: bool,
    pol: &QuadPolicy,
) -> Result<Option<Vec<PowerTerm>>> {
    let d = fields.d();
    let cfg = &fields.config;
    let grad_at = |x: &[f64]| -> f64 {
        let g = if localized {
            fields.localized_u_grad(x).1
        } else {
            fields.u_grad(x).1
        };
        crate::util::norm_d(&g, d)
    };
    let terms = match model.kind {
        ModelKind::Power { p } => {
            let sigma = sigma_grad_modular(cfg, p);
            let mut t =
                singular_coefficient(|x| grad_at(x).powf(p) / p, cfg, sigma, pol)?;
            t.exponent = p;
            vec![t]
        }
        ModelKind::Weighted { p, beta, .. } => {
            let sigma = sigma_grad_modular(cfg, p) + beta * p;
            let mut t = singular_coefficient(
                |x| (model.omega(x) * grad_at(x)).powf(p) / p,
                cfg,
                sigma,
                pol,
            )?;
            t.exponent = p;
            vec![t]
        }
        ModelKind::VarExpJump { p_minus, p_plus } => {
            let mut out = Vec::new();
            for pm in [p_minus, p_plus] {
                let sigma = sigma_grad_modular(cfg, pm);
                let mut t = singular_coefficient(
                    |x| {
                        if model.exponent(x) == pm {
                            grad_at(x).powf(pm) / pm
                        } else {
                            0.0
                        }
                    },
                    cfg,
                    sigma,
                    pol,
                )?;
                t.exponent = pm;
                out.push(t);
            }
            out
        }
        ModelKind::DoublePhase { p, q, .. } => {
            let sigma = sigma_grad_modular(cfg, p);
            let mut tp = singular_coefficient(|x| grad_at(x).powf(p) / p, cfg, sigma, pol)?;
            tp.exponent = p;
            // the weight vanishes on the support of grad u, so the q-part is
            // frame-supported and carries no singular tail
            let mut tq = singular_coefficient(
                |x| model.double_phase_weight(x) * grad_at(x).powf(q) / q,
                cfg,
                1.0,
                pol,
            )?;
            tq.exponent = q;
            vec![tp, tq]
        }
        ModelKind::VarExpCont { .. } => return Ok(None),
    };
    Ok(Some(terms))
}

/// Power decomposition of `s -> F*(s b)`; for the double phase the
/// closed-form bound on the conjugate is used, which keeps the certificate
/// valid.
pub fn bstar_modular_terms(
    model: &OrliczModel,
    fields: &Fields,
    pol: &QuadPolicy,
) -> Result<Option<Vec<PowerTerm>>> {
    let d = fields.d();
    let cfg = &fields.config;
    let b_at = |x: &[f64]| -> f64 { crate::util::norm_d(&fields.ab(x).1, d) };
    let conj = |p: f64| p / (p - 1.0);
    let terms = match model.kind {
        ModelKind::Power { p } => {
            let pc = conj(p);
            let sigma = sigma_b_modular(cfg, pc);
            let mut t = singular_coefficient(|x| b_at(x).powf(pc) / pc, cfg, sigma, pol)?;
            t.exponent = pc;
            vec![t]
        }
        ModelKind::Weighted { p, alpha, .. } => {
            let pc = conj(p);
            let sigma = sigma_b_modular(cfg, pc) - alpha * pc;
            let mut t = singular_coefficient(
                |x| {
                    let b = b_at(x);
                    if b == 0.0 {
                        0.0
                    } else {
                        (b / model.omega(x)).powf(pc) / pc
                    }
                },
                cfg,
                sigma,
                pol,
            )?;
            t.exponent = pc;
            vec![t]
        }
        ModelKind::VarExpJump { p_minus, p_plus } => {
            let mut out = Vec::new();
            for pm in [p_minus, p_plus] {
                let pc = conj(pm);
                let sigma = sigma_b_modular(cfg, pc);
                let mut t = singular_coefficient(
                    |x| {
                        if model.exponent(x) == pm {
                            b_at(x).powf(pc) / pc
                        } else {
                            0.0
                        }
                    },
                    cfg,
                    sigma,
                    pol,
                )?;
                t.exponent = pc;
                out.push(t);
            }
            out
        }
        ModelKind::DoublePhase { q, alpha, .. } => {
            let qc = conj(q);
            let sigma = sigma_b_modular(cfg, qc) - alpha / (q - 1.0);
            let mut t = singular_coefficient(
                |x| {
                    let b = b_at(x);
                    if b == 0.0 {
                        0.0
                    } else {
                        // psi(x, |b|) on the support of b, where a > 0
                        model.psi_bound(x, b).unwrap_or(0.0)
                    }
                },
                cfg,
                sigma,
                pol,
            )?;
            t.exponent = qc;
            vec![t]
        }
        ModelKind::VarExpCont { .. } => return Ok(None),
    };
    Ok(Some(terms))
}

// --- Lavrentiev gap scan --------------------------------------------------------

/// Threshold below which the scan declares a gap witness.
pub const GAP_THRESHOLD: f64 = -0.01;

/// Outcome of the gap scan `G(t u_inner) = F(t u_inner) + t S_inner(u_inner)`.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub t_grid: Vec<f64>,
    pub g_values: Vec<f64>,
    /// First grid point with `G < -0.01`.
    pub t_star: Option<f64>,
    /// Measured `S_inner(u_inner)`.
    pub s_circ: f64,
    /// Deepest scanned value of `G` and where it occurs.
    pub dip: f64,
    pub dip_t: f64,
    /// `F(t u_inner) / t` at the smallest grid point (must head to zero).
    pub f_over_t_smallest: f64,
    pub terms: Vec<PowerTerm>,
}

/// Default geometric scan grid `2^-20 .. 2^0`.
pub fn default_gap_grid() -> Vec<f64> {
    (-20..=0).map(|j| 2f64.powi(j)).collect()
}

/// Scan `G(t u_inner)` over `t_grid`.
pub fn gap_scan(
    model: &OrliczModel,
    fields: &Fields,
    t_grid: &[f64],
    pol: &QuadPolicy,
) -> Result<GapReport> {
    let d = fields.d();
    let s_circ = integrate_volume(
        |x| {
            let loc = fields.localized(x);
            dot_d(&loc.inner.b, &loc.inner.grad_u, d)
        },
        &fields.config,
        pol,
    )?
    .value;
    let terms = grad_modular_terms(model, fields, true, pol)?;
    let f_of = |t: f64| -> Result<f64> {
        match &terms {
            Some(ts) => Ok(ts.iter().map(|pt| pt.total() * t.powf(pt.exponent)).sum()),
            None => {
                // continuous exponent: modular per scan point
                let q = integrate_volume(
                    |x| {
                        let gi = fields.localized_u_grad(x).1;
                        model.phi(x, t * crate::util::norm_d(&gi, d))
                    },
                    &fields.config,
                    pol,
                )?;
                Ok(q.value)
            }
        }
    };
    let mut g_values = Vec::with_capacity(t_grid.len());
    let mut t_star = None;
    let mut dip = f64::INFINITY;
    let mut dip_t = t_grid.first().copied().unwrap_or(1.0);
    for &t in t_grid {
        let g = f_of(t)? + t * s_circ;
        if g < GAP_THRESHOLD && t_star.is_none() {
            t_star = Some(t);
        }
        if g < dip {
            dip = g;
            dip_t = t;
        }
        g_values.push(g);
    }
    let t0 = t_grid.first().copied().unwrap_or(1.0);
    let f_over_t_smallest = f_of(t0)? / t0;
    Ok(GapReport {
        t_grid: t_grid.to_vec(),
        g_values,
        t_star,
        s_circ,
        dip,
        dip_t,
        f_over_t_smallest,
        terms: terms.unwrap_or_default(),
    })
}

// --- duality certificate ----------------------------------------------------------

/// A certified pair `(t, s)` with `F(tu) + F*(sb) < ts`; a positive margin
/// separates the two notions of harmonic minimizer.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Certificate {
    pub t: f64,
    pub s: f64,
    pub f_tu: f64,
    pub fstar_sb: f64,
    pub margin: f64,
}

impl Certificate {
    /// Margin recomputed from the stored values; exact arithmetic identity.
    pub fn margin_recomputed(&self) -> f64 {
        self.t * self.s - self.f_tu - self.fstar_sb
    }

    pub fn relative_margin(&self) -> f64 {
        self.margin / (self.t * self.s)
    }
}

/// Search outcome along the coupling curve.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateScan {
    pub best: Option<Certificate>,
    pub curve: Vec<Certificate>,
    pub success: bool,
    /// Constants of the weighted-model construction when applicable:
    /// `(c1, c2, eps)`.
    pub weighted_constants: Option<(f64, f64, f64)>,
}

impl CertificateScan {
    /// Earliest curve point whose margin clears `rel` times `ts`.
    pub fn first_with_relative_margin(&self, rel: f64) -> Option<Certificate> {
        self.curve.iter().find(|c| c.margin >= rel * c.t * c.s).copied()
    }
}

/// Measured constants for the weighted model: `F(tu) = c1 (eps t)^p` and
/// `F*(sb) = c2 s^{p'}`, with `eps` chosen so the coupled point lands at
/// margin `ts/2`.
pub fn weighted_epsilon(
    config: &FractalConfig,
    fields: &Fields,
    p: f64,
    alpha: f64,
    beta: f64,
    pol: &QuadPolicy,
) -> Result<(f64, f64, f64)> {
    let d = fields.d();
    let pc = p / (p - 1.0);
    let sigma1 = sigma_grad_modular(config, p) + beta * p;
    let c1 = singular_coefficient(
        |x| {
            let g = crate::util::norm_d(&fields.u_grad(x).1, d);
            if g == 0.0 {
                0.0
            } else {
                (fields.weight_coord(x).powf(beta) * g).powf(p) / p
            }
        },
        config,
        sigma1,
        pol,
    )?;
    let sigma2 = sigma_b_modular(config, pc) - alpha * pc;
    let c2 = singular_coefficient(
        |x| {
            let b = crate::util::norm_d(&fields.ab(x).1, d);
            if b == 0.0 {
                0.0
            } else {
                (b / fields.weight_coord(x).powf(alpha)).powf(pc) / pc
            }
        },
        config,
        sigma2,
        pol,
    )?;
    let c1v = c1.total();
    let c2v = c2.total();
    let eps_cap = (config.d as f64).powf((alpha - beta) / 2.0);
    let eps = (1.0 / (2.0 * (c1v + c2v))).min(eps_cap);
    if !(eps > 0.0) {
        return Err(Error::Divergent(format!(
            "weighted construction failed: c1 = {c1v}, c2 = {c2v}"
        )));
    }
    Ok((c1v, c2v, eps))
}

/// Search the coupling curve `s = t^{p0 - 1}` (plus the constructed point of
/// the weighted model) for a positive duality margin.
pub fn duality_certificate(
    model: &OrliczModel,
    fields: &Fields,
    pol: &QuadPolicy,
) -> Result<CertificateScan> {
    let cfg = &fields.config;
    let p0 = cfg.p0;
    let f_terms = grad_modular_terms(model, fields, false, pol)?;
    let g_terms = bstar_modular_terms(model, fields, pol)?;
    let d = fields.d();

    let eval = |t: f64, s: f64| -> Result<(f64, f64)> {
        let f_tu = match &f_terms {
            Some(ts) => ts.iter().map(|pt| pt.total() * t.powf(pt.exponent)).sum(),
            None => {
                integrate_volume(
                    |x| {
                        let g = crate::util::norm_d(&fields.u_grad(x).1, d);
                        model.phi(x, t * g)
                    },
                    cfg,
                    pol,
                )?
                .value
            }
        };
        let fstar_sb = match &g_terms {
            Some(ts) => ts.iter().map(|pt| pt.total() * s.powf(pt.exponent)).sum(),
            None => {
                integrate_volume(
                    |x| {
                        let b = crate::util::norm_d(&fields.ab(x).1, d);
                        model.phi_star(x, s * b)
                    },
                    cfg,
                    pol,
                )?
                .value
            }
        };
        Ok((f_tu, fstar_sb))
    };

    // overflow-safe geometric grid along the coupling curve
    let mut e_max: f64 = p0;
    if let Some(ts) = &f_terms {
        for pt in ts {
            e_max = e_max.max(pt.exponent);
        }
    }
    if let Some(ts) = &g_terms {
        for pt in ts {
            e_max = e_max.max(pt.exponent * (p0 - 1.0));
        }
    }
    let j_max = if f_terms.is_some() { (960.0 / e_max).floor() as i32 } else { 40 };

    let mut curve = Vec::new();
    let mut best: Option<Certificate> = None;
    let mut consider = |t: f64, s: f64, f_tu: f64, fstar_sb: f64, curve: &mut Vec<Certificate>| {
        let margin = t * s - f_tu - fstar_sb;
        let cand = Certificate { t, s, f_tu, fstar_sb, margin };
        curve.push(cand);
        let better = match &best {
            Some(b) => cand.relative_margin() > b.relative_margin(),
            None => true,
        };
        if better {
            best = Some(cand);
        }
    };
    for j in 0..=j_max {
        let t = 2f64.powi(j);
        let s = t.powf(p0 - 1.0);
        let (f_tu, fstar_sb) = eval(t, s)?;
        if !(f_tu.is_finite() && fstar_sb.is_finite()) {
            break;
        }
        consider(t, s, f_tu, fstar_sb, &mut curve);
    }
    let mut weighted_constants = None;
    if let ModelKind::Weighted { p, alpha, beta, eps, .. } = model.kind {
        let (c1, c2, _) = weighted_epsilon(cfg, fields, p, alpha, beta, pol)?;
        weighted_constants = Some((c1, c2, eps));
        let t = 1.0;
        let s = eps.powf(p - 1.0);
        let (f_tu, fstar_sb) = eval(t, s)?;
        consider(t, s, f_tu, fstar_sb, &mut curve);
    }
    let success = best.as_ref().map(|c| c.margin > 0.0).unwrap_or(false);
    Ok(CertificateScan { best, curve, success, weighted_constants })
}

/// One record of the verification report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub check_id: String,
    pub claim: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(id: &str, claim: &str, measured: f64, tolerance: f64, pass: bool) -> Self {
        Self {
            check_id: id.into(),
            claim: claim.into(),
            measured,
            tolerance,
            pass,
        }
    }
}
