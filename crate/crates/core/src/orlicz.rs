//! Generalized Orlicz integrands for the three energy models, their convex
//! conjugates, modular norms, weak-Lebesgue estimators and the Muckenhoupt
//! checker.

use crate::cantor::{FractalConfig, Regime};
use crate::error::{Error, Result};
use crate::fields::Fields;
use crate::util::GAUSS8;
use crate::Point;

/// Uniform-continuity modulus of the continuous exponent,
/// `sigma(t) = (log(e + 1/t))^{-kappa}`.
pub fn sigma_modulus(t: f64, kappa: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (std::f64::consts::E + 1.0 / t).ln().powf(-kappa)
}

/// Which integrand the model carries.
#[derive(Debug, Clone, Copy)]
pub enum ModelKind {
    /// `phi(t) = t^p / p`, geometry-free; the sanity model.
    Power { p: f64 },
    /// Variable exponent jumping between `p_minus` and `p_plus` across the
    /// two cones.
    VarExpJump { p_minus: f64, p_plus: f64 },
    /// Uniformly continuous variable exponent `p0 -+ sigma(.)`.
    VarExpCont { kappa: f64 },
    /// `phi(x,t) = t^p/p + a(x) t^q/q`.
    DoublePhase { p: f64, q: f64, alpha: f64 },
    /// `phi(x,t) = (omega(x) t)^p / p`.
    Weighted { p: f64, alpha: f64, beta: f64, eps: f64, gamma: f64 },
}

/// A generalized Orlicz integrand bound to one fractal geometry.
#[derive(Debug, Clone)]
pub struct OrliczModel {
    pub kind: ModelKind,
    geom: Fields,
}

fn conj_exp(p: f64) -> f64 {
    p / (p - 1.0)
}

impl OrliczModel {
    pub fn config(&self) -> &FractalConfig {
        &self.geom.config
    }

    /// `phi(x, t)`.
    pub fn phi(&self, x: &[f64], t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match self.kind {
            ModelKind::Power { p } => t.powf(p) / p,
            ModelKind::VarExpJump { .. } | ModelKind::VarExpCont { .. } => {
                let p = self.exponent(x);
                t.powf(p) / p
            }
            ModelKind::DoublePhase { p, q, .. } => {
                let a = self.double_phase_weight(x);
                t.powf(p) / p + a * t.powf(q) / q
            }
            ModelKind::Weighted { p, .. } => (self.omega(x) * t).powf(p) / p,
        }
    }

    /// `d phi / d t`.
    pub fn phi_deriv(&self, x: &[f64], t: f64) -> f64 {
        match self.kind {
            ModelKind::Power { p } => t.powf(p - 1.0),
            ModelKind::VarExpJump { .. } | ModelKind::VarExpCont { .. } => {
                t.powf(self.exponent(x) - 1.0)
            }
            ModelKind::DoublePhase { p, q, .. } => {
                t.powf(p - 1.0) + self.double_phase_weight(x) * t.powf(q - 1.0)
            }
            ModelKind::Weighted { p, .. } => {
                let w = self.omega(x);
                w * (w * t).powf(p - 1.0)
            }
        }
    }

    /// Convex conjugate `phi*(x, s)`: closed form for the single-power kinds,
    /// a safeguarded Newton solve of the first-order condition for the double
    /// phase.
    pub fn phi_star(&self, x: &[f64], s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        if s == 0.0 {
            return 0.0;
        }
        match self.kind {
            ModelKind::Power { p } => {
                let pc = conj_exp(p);
                s.powf(pc) / pc
            }
            ModelKind::VarExpJump { .. } | ModelKind::VarExpCont { .. } => {
                let pc = conj_exp(self.exponent(x));
                s.powf(pc) / pc
            }
            ModelKind::DoublePhase { p, q, .. } => {
                let a = self.double_phase_weight(x);
                if a == 0.0 {
                    let pc = conj_exp(p);
                    s.powf(pc) / pc
                } else {
                    let t = solve_power_sum(p, q, a, s);
                    s * t - (t.powf(p) / p + a * t.powf(q) / q)
                }
            }
            ModelKind::Weighted { p, .. } => {
                let w = self.omega(x);
                if w == 0.0 {
                    return f64::INFINITY;
                }
                let pc = conj_exp(p);
                (s / w).powf(pc) / pc
            }
        }
    }

    /// Closed-form upper bound for the double-phase conjugate on `{a > 0}`.
    pub fn psi_bound(&self, x: &[f64], s: f64) -> Option<f64> {
        match self.kind {
            ModelKind::DoublePhase { q, .. } => {
                let a = self.double_phase_weight(x);
                if a > 0.0 {
                    let qc = conj_exp(q);
                    Some(a.powf(-1.0 / (q - 1.0)) * s.powf(qc) / qc)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    /// The variable exponent at `x`.
    pub fn exponent(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Power { p } | ModelKind::Weighted { p, .. } => p,
            ModelKind::DoublePhase { p, .. } => p,
            ModelKind::VarExpJump { p_minus, p_plus } => {
                let r = self.geom.grad_side_ratio(x);
                if r >= 1.0 {
                    p_minus
                } else {
                    p_plus
                }
            }
            ModelKind::VarExpCont { kappa } => {
                let p0 = self.geom.config.p0;
                let s = sigma_modulus(self.geom.weight_coord(x), kappa);
                let chi = self.geom.grad_side_indicator(x);
                (p0 - s) * chi + (p0 + s) * (1.0 - chi)
            }
        }
    }

    /// Double-phase weight `a(x)`; zero for the other kinds.
    pub fn double_phase_weight(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::DoublePhase { alpha, .. } => {
                let chi = self.geom.grad_side_indicator(x);
                self.geom.weight_coord(x).powf(alpha) * (1.0 - chi)
            }
            _ => 0.0,
        }
    }

    /// Weighted-model weight `omega(x)`; one for the other kinds.
    pub fn omega(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Weighted { alpha, beta, eps, .. } => {
                let w = self.geom.weight_coord(x);
                let chi = self.geom.grad_side_indicator(x);
                eps * w.powf(beta) * chi + w.powf(alpha) * (1.0 - chi)
            }
            _ => 1.0,
        }
    }

    /// Muckenhoupt envelopes `(omega_minus, omega_plus)` of the weighted
    /// model at `x`.
    pub fn omega_envelopes(&self, x: &[f64]) -> Option<(f64, f64)> {
        match self.kind {
            ModelKind::Weighted { alpha, beta, eps, .. } => {
                let w = self.geom.weight_coord(x);
                Some((eps * w.powf(beta), w.powf(alpha)))
            }
            _ => None,
        }
    }

    /// Smallest and largest power growth of `phi(x, .)` over the domain.
    pub fn growth_exponents(&self) -> (f64, f64) {
        match self.kind {
            ModelKind::Power { p } | ModelKind::Weighted { p, .. } => (p, p),
            ModelKind::VarExpJump { p_minus, p_plus } => (p_minus, p_plus),
            ModelKind::VarExpCont { kappa } => {
                let p0 = self.geom.config.p0;
                let smax = sigma_modulus((self.geom.config.d as f64).sqrt(), kappa);
                (p0 - smax, p0 + smax)
            }
            ModelKind::DoublePhase { p, q, .. } => (p, q),
        }
    }

    /// Doubling constant: `phi(x, 2t) <= 2^{q_max} phi(x, t)`.
    pub fn delta2_constant(&self) -> f64 {
        2f64.powf(self.growth_exponents().1)
    }

    /// Scaling pair `(c, s)` with `phi(x, g t) <= c g^s phi(x, t)` for
    /// `g <= 1`.
    pub fn nabla2_scaling(&self) -> (f64, f64) {
        (1.0, self.growth_exponents().0)
    }
}

/// Solve `t^{p-1} + a t^{q-1} = s` for `t >= 0` (strictly monotone).
fn solve_power_sum(p: f64, q: f64, a: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let mut hi = s.powf(1.0 / (p - 1.0)).max((s / a).powf(1.0 / (q - 1.0)));
    let g = |t: f64| t.powf(p - 1.0) + a * t.powf(q - 1.0);
    while g(hi) < s {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Numeric Legendre transform `sup_t (s t - f(t))` of a convex `f`, by
/// bracket expansion and golden-section refinement of the concave objective.
pub fn conjugate_numeric<F: Fn(f64) -> f64>(f: F, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let obj = |t: f64| s * t - f(t);
    // expand until the objective starts decreasing
    let mut t_hi = 1.0;
    let mut last = obj(t_hi);
    loop {
        let nxt = obj(t_hi * 2.0);
        if nxt < last || !nxt.is_finite() {
            break;
        }
        t_hi *= 2.0;
        last = nxt;
    }
    let mut lo = 0.0;
    let mut hi = t_hi * 2.0;
    let phi_ratio = 0.618_033_988_749_894_9;
    let mut x1 = hi - phi_ratio * (hi - lo);
    let mut x2 = lo + phi_ratio * (hi - lo);
    let mut f1 = obj(x1);
    let mut f2 = obj(x2);
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi_ratio * (hi - lo);
            f2 = obj(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi_ratio * (hi - lo);
            f1 = obj(x1);
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    f1.max(f2).max(0.0)
}

// --- constructors ------------------------------------------------------------

/// Variable-exponent model with a jump across the cones.
pub fn variable_exponent_model(
    config: &FractalConfig,
    p_minus: f64,
    p_plus: f64,
) -> Result<OrliczModel> {
    if !(1.0 < p_minus && p_minus < config.p0) {
        return Err(Error::Domain(format!(
            "need 1 < p_minus < p0, got p_minus = {p_minus}, p0 = {}",
            config.p0
        )));
    }
    if p_plus <= config.p0 {
        return Err(Error::Domain(format!(
            "need p_plus > p0, got p_plus = {p_plus}, p0 = {}",
            config.p0
        )));
    }
    Ok(OrliczModel {
        kind: ModelKind::VarExpJump { p_minus, p_plus },
        geom: Fields::new(config.clone()),
    })
}

/// Uniformly continuous variable-exponent model with modulus parameter
/// `kappa`.
pub fn variable_exponent_model_continuous(
    config: &FractalConfig,
    kappa: f64,
) -> Result<OrliczModel> {
    if !(0.0 < kappa && kappa < 1.0) {
        return Err(Error::Domain(format!("need 0 < kappa < 1, got {kappa}")));
    }
    let smax = sigma_modulus((config.d as f64).sqrt(), kappa);
    if config.p0 - smax <= 1.0 {
        return Err(Error::Domain(format!(
            "need p0 - sigma_max > 1, got p0 = {}, sigma_max = {smax}",
            config.p0
        )));
    }
    Ok(OrliczModel {
        kind: ModelKind::VarExpCont { kappa },
        geom: Fields::new(config.clone()),
    })
}

/// Admissible saddle exponent for the double-phase parameters: the largest
/// `p0` keeps `q > p0 + alpha max(1, (p0-1)/(d-1))`; the returned value sits
/// `min(0.1, slack/2)` above `p`.
pub fn double_phase_p0(d: usize, p: f64, q: f64, alpha: f64) -> Result<f64> {
    if p <= 1.0 {
        return Err(Error::Domain(format!("need p > 1, got {p}")));
    }
    if alpha <= 0.0 {
        return Err(Error::Domain(format!("need alpha > 0, got {alpha}")));
    }
    if q <= p + alpha * (1f64).max((p - 1.0) / (d as f64 - 1.0)) {
        return Err(Error::Domain(format!(
            "need q > p + alpha max(1, (p-1)/(d-1)): q = {q}, bound = {}",
            p + alpha * (1f64).max((p - 1.0) / (d as f64 - 1.0))
        )));
    }
    // bound(p0) = p0 + alpha max(1, (p0-1)/(d-1)) is increasing; invert at q
    let dm1 = d as f64 - 1.0;
    let p0_max = if q - alpha <= d as f64 {
        q - alpha
    } else {
        (dm1 * q + alpha) / (dm1 + alpha)
    };
    let slack = p0_max - p;
    Ok(p + (0.1f64).min(slack / 2.0))
}

/// Regime matching a saddle exponent.
pub fn regime_for_p0(d: usize, p0: f64) -> Regime {
    if (p0 - d as f64).abs() < 1e-12 {
        Regime::Matching
    } else if p0 < d as f64 {
        Regime::Sub
    } else {
        Regime::Super
    }
}

/// Double-phase model `t^p/p + a(x) t^q/q` with Hoelder weight exponent
/// `alpha`.
pub fn double_phase_model(
    config: &FractalConfig,
    p: f64,
    q: f64,
    alpha: f64,
) -> Result<OrliczModel> {
    if !(p > 1.0 && q > p) {
        return Err(Error::Domain(format!("need 1 < p < q, got p = {p}, q = {q}")));
    }
    let d = config.d as f64;
    let p0 = config.p0;
    if p0 <= p {
        return Err(Error::Domain(format!("need p < p0, got p = {p}, p0 = {p0}")));
    }
    let bound = p0 + alpha * (1f64).max((p0 - 1.0) / (d - 1.0));
    if q <= bound {
        return Err(Error::Domain(format!(
            "need q > p0 + alpha max(1, (p0-1)/(d-1)): q = {q}, bound = {bound}"
        )));
    }
    Ok(OrliczModel {
        kind: ModelKind::DoublePhase { p, q, alpha },
        geom: Fields::new(config.clone()),
    })
}

/// Window `(gamma_low, gamma_high)` for the weighted model's exponents and
/// the pivot `gamma` determined by `(regime, p0, p)`.
pub fn weighted_gamma(config: &FractalConfig, p: f64) -> (f64, f64, f64) {
    let d = config.d as f64;
    let p0 = config.p0;
    let pc = conj_exp(p);
    match config.regime {
        Regime::Matching | Regime::Sub => (-1.0 / p, 1.0 - p0 / p, 1.0 / pc),
        Regime::Super => {
            let gamma = (d - 1.0) / p * (p - p0) / (p0 - 1.0);
            (-(d - 1.0) / p, gamma, (d - 1.0) / pc)
        }
    }
}

/// Weighted p-energy model with envelope exponents `alpha < gamma < beta`
/// inside the regime's Muckenhoupt window and mixing amplitude `eps`.
pub fn weighted_model(
    config: &FractalConfig,
    p: f64,
    alpha: f64,
    beta: f64,
    eps: f64,
) -> Result<OrliczModel> {
    if p <= 1.0 {
        return Err(Error::Domain(format!("need p > 1, got {p}")));
    }
    let (lo, gamma, hi) = weighted_gamma(config, p);
    if !(lo < alpha && alpha < gamma) {
        return Err(Error::Domain(format!(
            "need {lo} < alpha < gamma = {gamma}, got alpha = {alpha}"
        )));
    }
    if !(gamma < beta && beta < hi) {
        return Err(Error::Domain(format!(
            "need gamma = {gamma} < beta < {hi}, got beta = {beta}"
        )));
    }
    let eps_max = (config.d as f64).powf((alpha - beta) / 2.0);
    if !(eps > 0.0 && eps <= eps_max) {
        return Err(Error::Domain(format!(
            "need 0 < eps <= d^((alpha-beta)/2) = {eps_max} so the envelopes sandwich, got {eps}"
        )));
    }
    Ok(OrliczModel {
        kind: ModelKind::Weighted { p, alpha, beta, eps, gamma },
        geom: Fields::new(config.clone()),
    })
}

/// Plain power model on a geometry (sanity baseline).
pub fn power_model(config: &FractalConfig, p: f64) -> Result<OrliczModel> {
    if p <= 1.0 {
        return Err(Error::Domain(format!("need p > 1, got {p}")));
    }
    Ok(OrliczModel { kind: ModelKind::Power { p }, geom: Fields::new(config.clone()) })
}

// --- gridded fields, norms and estimators ------------------------------------

/// Samples of a scalar field at the cell centers of a uniform grid on
/// `(-1,1)^d`.
pub struct GridField {
    pub d: usize,
    pub n: usize,
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    pub cell_vol: f64,
}

impl GridField {
    pub fn from_sampler<F: Fn(&[f64]) -> f64>(f: F, d: usize, n: usize) -> Self {
        let h = 2.0 / n as f64;
        let total = n.pow(d as u32);
        let mut points = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut x: Point = [0.0; crate::MAX_DIM];
            for slot in x.iter_mut().take(d) {
                *slot = -1.0 + h * (rem % n) as f64 + 0.5 * h;
                rem /= n;
            }
            points.push(x);
            values.push(f(&x[..d]));
        }
        Self { d, n, points, values, cell_vol: h.powi(d as i32) }
    }
}

/// Modular `int phi(x, |f| / gamma)` on the grid.
pub fn grid_modular(model: &OrliczModel, field: &GridField, gamma: f64) -> f64 {
    let d = field.d;
    field
        .points
        .iter()
        .zip(&field.values)
        .map(|(x, &v)| model.phi(&x[..d], v.abs() / gamma))
        .sum::<f64>()
        * field.cell_vol
}

/// Luxemburg norm: the infimum of `gamma` with modular `<= 1`, found by
/// bisection to a relative `gamma` tolerance of `1e-10`.
pub fn luxemburg_norm(model: &OrliczModel, field: &GridField) -> Result<f64> {
    let mut hi = 1.0f64;
    let mut grow = 0;
    while grid_modular(model, field, hi) > 1.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 2000 {
            return Err(Error::Divergent("modular exceeds 1 at every tested scale".into()));
        }
    }
    let mut lo = hi;
    while grid_modular(model, field, lo) <= 1.0 && lo > 1e-300 {
        lo *= 0.5;
    }
    if lo <= 1e-300 {
        return Ok(0.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if grid_modular(model, field, mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Weak Lebesgue estimator `sup_gamma gamma |{|f| > gamma}|^{1/p}` over a
/// geometric level grid. Level sets thinner than a few grid rows are skipped:
/// their cell-counted measures carry O(1) relative noise and would hand the
/// sup to sampling artifacts.
pub fn weak_lp_estimate(field: &GridField, p: f64) -> f64 {
    let floor = 3 * field.n.pow(field.d as u32 - 1);
    let mut best = 0.0f64;
    let mut gamma = 1e-3;
    while gamma <= 1e9 {
        let count = field.values.iter().filter(|v| v.abs() > gamma).count();
        if count >= floor {
            let meas = count as f64 * field.cell_vol;
            best = best.max(gamma * meas.powf(1.0 / p));
        }
        gamma *= std::f64::consts::SQRT_2;
    }
    best
}

/// Strong modular `int |f|^p` on the grid.
pub fn strong_modular(field: &GridField, p: f64) -> f64 {
    field.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * field.cell_vol
}

/// Estimated Muckenhoupt constant: the sup over all dyadic subcubes of
/// `(-1,1)^d` down to `max_level` of `avg(a) * avg(a^{-1/(p-1)})^{p-1}`.
pub fn muckenhoupt_check<F>(weight: &F, p: f64, d: usize, max_level: u32) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    muckenhoupt_levels(weight, p, d, max_level).into_iter().fold(0.0, f64::max)
}

/// The Muckenhoupt sup as a function of the resolution level, for stability
/// diagnostics: entry `l` is the sup over all dyadic cubes of levels
/// `0..=l`, with every cube average computed compositely from tensor-Gauss
/// integrals on its level-`l` descendants. Refining the resolution makes the
/// averages of a non-integrable reciprocal grow without bound, while weights
/// inside the admissible window stabilize.
pub fn muckenhoupt_levels<F>(weight: &F, p: f64, d: usize, max_level: u32) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    (0..=max_level).map(|l| muckenhoupt_at_resolution(weight, p, d, l)).collect()
}

fn muckenhoupt_at_resolution<F>(weight: &F, p: f64, d: usize, level: u32) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let n = 1usize << level;
    let h = 2.0 / n as f64;
    let total = n.pow(d as u32);
    // per-bottom-cube integrals of a and a^{-1/(p-1)}
    let mut ia = vec![0.0f64; total];
    let mut ir = vec![0.0f64; total];
    for idx in 0..total {
        let mut rem = idx;
        let mut c: Point = [0.0; crate::MAX_DIM];
        for slot in c.iter_mut().take(d) {
            *slot = -1.0 + h * (rem % n) as f64 + 0.5 * h;
            rem /= n;
        }
        let (a, r) = cube_integrals(weight, &c, 0.5 * h, d, p);
        ia[idx] = a;
        ir[idx] = r;
    }
    let vol_bottom = h.powi(d as i32);
    let mut sup = 0.0f64;
    let mut size = n; // cubes of the current aggregation level, per axis
    loop {
        let cubes = size.pow(d as u32);
        let vol = vol_bottom * (total / cubes) as f64;
        for idx in 0..cubes {
            let prod = (ia[idx] / vol) * (ir[idx] / vol).powf(p - 1.0);
            if prod.is_finite() {
                sup = sup.max(prod);
            } else {
                return f64::INFINITY;
            }
        }
        if size == 1 {
            break;
        }
        // merge 2^d children into their parents
        let half_size = size / 2;
        let mut na = vec![0.0f64; half_size.pow(d as u32)];
        let mut nr = vec![0.0f64; half_size.pow(d as u32)];
        for idx in 0..cubes {
            let mut rem = idx;
            let mut pidx = 0usize;
            let mut stride = 1usize;
            for _ in 0..d {
                let i = rem % size;
                rem /= size;
                pidx += (i / 2) * stride;
                stride *= half_size;
            }
            na[pidx] += ia[idx];
            nr[pidx] += ir[idx];
        }
        ia = na;
        ir = nr;
        size = half_size;
    }
    sup
}

fn cube_integrals<F>(weight: &F, c: &Point, half: f64, d: usize, p: f64) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut int_a = 0.0;
    let mut int_rec = 0.0;
    let total = GAUSS8.len().pow(d as u32);
    let mut x: Point = [0.0; crate::MAX_DIM];
    for idx in 0..total {
        let mut rem = idx;
        let mut w_all = 1.0;
        for (j, slot) in x.iter_mut().enumerate().take(d) {
            let (node, w) = GAUSS8[rem % GAUSS8.len()];
            rem /= GAUSS8.len();
            *slot = c[j] + node * half;
            w_all *= w * half;
        }
        let a = weight(&x[..d]);
        int_a += w_all * a;
        int_rec += w_all * a.powf(-1.0 / (p - 1.0));
    }
    (int_a, int_rec)
}

/// Maximum pointwise violation of Young's inequality at the tangency point:
/// for `s = phi'(x, t)` the pair attains equality.
pub fn young_equality_gap(model: &OrliczModel, x: &[f64], t: f64) -> f64 {
    let s = model.phi_deriv(x, t);
    let lhs = s * t;
    let rhs = model.phi(x, t) + model.phi_star(x, s);
    (lhs - rhs).abs() / (1.0 + lhs.abs())
}
