//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured quantity and its tolerance.

use fracgap::cantor::{cantor_integrate, CantorSet, FractalConfig, Regime};
use fracgap::fields::Fields;
use fracgap::integrate::{boundary_pairing, QuadPolicy};
use fracgap::minimize::{discrete_energy, minimize_w, GridFunction, SolverPolicy};
use fracgap::orlicz::{
    self, double_phase_model, double_phase_p0, muckenhoupt_levels, power_model, regime_for_p0,
    strong_modular, variable_exponent_model, weak_lp_estimate, weighted_model, GridField,
    OrliczModel,
};
use fracgap::util::{ls_slope, norm_d, SplitMix64};
use fracgap::verify::{
    check_su_table, divergence_free_check, duality_certificate, gap_scan, weighted_epsilon,
    Certificate, GAP_THRESHOLD,
};

fn line(criterion: &str, pass: bool, detail: &str) {
    println!("ACCEPTANCE {criterion}: {} - {detail}", if pass { "PASS" } else { "FAIL" });
}

fn regimes_2d() -> Vec<(&'static str, FractalConfig)> {
    vec![
        ("matching", FractalConfig::new(Regime::Matching, 2, 2.0).unwrap()),
        ("sub p0=1.5", FractalConfig::new(Regime::Sub, 2, 1.5).unwrap()),
        ("super p0=3", FractalConfig::new(Regime::Super, 2, 3.0).unwrap()),
    ]
}

/// The five certified models of the gap and certificate criteria.
fn gap_models() -> Vec<(&'static str, FractalConfig, OrliczModel)> {
    let mut out = Vec::new();
    let cfg = FractalConfig::new(Regime::Matching, 2, 2.0).unwrap();
    out.push((
        "variable exponent matching 1.9/2.1",
        cfg.clone(),
        variable_exponent_model(&cfg, 1.9, 2.1).unwrap(),
    ));
    let cfg = FractalConfig::new(Regime::Sub, 2, 1.5).unwrap();
    out.push((
        "variable exponent sub 1.4/1.6",
        cfg.clone(),
        variable_exponent_model(&cfg, 1.4, 1.6).unwrap(),
    ));
    let cfg = FractalConfig::new(Regime::Super, 2, 3.0).unwrap();
    out.push((
        "variable exponent super 2.9/3.1",
        cfg.clone(),
        variable_exponent_model(&cfg, 2.9, 3.1).unwrap(),
    ));
    let p0 = double_phase_p0(2, 1.8, 3.2, 0.5).unwrap();
    let cfg = FractalConfig::new(regime_for_p0(2, p0), 2, p0).unwrap();
    out.push((
        "double phase p=1.8 q=3.2 alpha=0.5",
        cfg.clone(),
        double_phase_model(&cfg, 1.8, 3.2, 0.5).unwrap(),
    ));
    let cfg = FractalConfig::new(Regime::Matching, 2, 2.0).unwrap();
    let fields = Fields::new(cfg.clone());
    let (_, _, eps) =
        weighted_epsilon(&cfg, &fields, 2.0, -0.25, 0.25, &QuadPolicy::default()).unwrap();
    out.push((
        "weighted p=2 constructed eps",
        cfg.clone(),
        weighted_model(&cfg, 2.0, -0.25, 0.25, eps).unwrap(),
    ));
    out
}

#[test]
fn acceptance_01_boundary_pairing() {
    let pol = QuadPolicy::default();
    let mut all = true;
    let mut configs = regimes_2d();
    configs.push(("matching d=3", FractalConfig::new(Regime::Matching, 3, 3.0).unwrap()));
    for (name, cfg) in configs {
        let fields = Fields::new(cfg);
        let q = boundary_pairing(&fields, &pol).unwrap();
        let pass = (q.value - 1.0).abs() <= 1e-3 && !q.partial;
        all &= pass;
        line(
            "1 boundary pairing",
            pass,
            &format!("{name}: integral = {:.6}, |err| tol 1e-3", q.value),
        );
    }
    assert!(all);
}

#[test]
fn acceptance_02_separating_table() {
    let pol = QuadPolicy::default();
    let mut all = true;
    for (name, cfg) in regimes_2d() {
        let fields = Fields::new(cfg);
        let t = check_su_table(&fields, &pol).unwrap();
        let pass = t.max_abs_err <= 1e-3;
        all &= pass;
        line(
            "2 separating table",
            pass,
            &format!("{name}: max entry error {:.2e}, tol 1e-3", t.max_abs_err),
        );
    }
    assert!(all);
}

#[test]
fn acceptance_03_divergence_free() {
    let pol = QuadPolicy::default();
    let mut all = true;
    for (name, cfg) in regimes_2d() {
        // the pointwise stencil rides on the convolution, so it gets the
        // tight tolerance variant of the fields
        let fields = Fields::new(cfg).with_conv_tol(1e-11, 40);
        let rep = divergence_free_check(&fields, &pol, 0, 10_000, 0.05).unwrap();
        let pass = rep.max_inner_pairing <= 2e-3
            && rep.max_full_pairing <= 2e-3
            && rep.pointwise_max <= 1e-4;
        all &= pass;
        line(
            "3 divergence free",
            pass,
            &format!(
                "{name}: weak inner {:.2e} / full {:.2e} (tol 2e-3), pointwise {:.2e} (tol 1e-4)",
                rep.max_inner_pairing, rep.max_full_pairing, rep.pointwise_max
            ),
        );
    }
    assert!(all);
}

#[test]
fn acceptance_04_disjoint_supports() {
    let mut all = true;
    for (name, cfg) in regimes_2d() {
        let fields = Fields::new(cfg);
        let mut rng = SplitMix64::new(4);
        let mut max_prod = 0.0f64;
        for _ in 0..100_000 {
            let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            let (_, gu) = fields.u_grad(&x);
            let (_, b) = fields.ab(&x);
            max_prod = max_prod.max(norm_d(&gu, 2) * norm_d(&b, 2));
        }
        let pass = max_prod < 1e-14;
        all &= pass;
        line(
            "4 disjoint supports",
            pass,
            &format!("{name}: max |grad u| |b| = {max_prod:.2e}, tol 1e-14"),
        );
    }
    assert!(all);
}

#[test]
fn acceptance_05_sharp_integrability() {
    let mut all = true;
    for (name, cfg) in regimes_2d() {
        let fields = Fields::new(cfg.clone());
        let p0 = cfg.p0;
        let pc = p0 / (p0 - 1.0);
        let levels = [64usize, 128, 256, 512];
        let mut weak_g = Vec::new();
        let mut strong_g = Vec::new();
        let mut weak_b = Vec::new();
        let mut strong_b = Vec::new();
        for &n in &levels {
            let grad = GridField::from_sampler(|x| norm_d(&fields.u_grad(x).1, 2), 2, n);
            let bf = GridField::from_sampler(|x| norm_d(&fields.ab(x).1, 2), 2, n);
            weak_g.push(weak_lp_estimate(&grad, p0));
            strong_g.push(strong_modular(&grad, p0));
            weak_b.push(weak_lp_estimate(&bf, pc));
            strong_b.push(strong_modular(&bf, pc));
        }
        let stable =
            |w: &[f64]| (w[3] - w[2]).abs() / w[2] < 0.02 && (w[2] - w[1]).abs() / w[1] < 0.05;
        let grows = |s: &[f64]| s[1] >= 1.05 * s[0] && s[2] >= 1.05 * s[1] && s[3] >= 1.05 * s[2];
        let pass = stable(&weak_g) && grows(&strong_g) && stable(&weak_b) && grows(&strong_b);
        all &= pass;
        line(
            "5 sharp integrability",
            pass,
            &format!(
                "{name}: weak grad {:?} (stabilize <2%), strong grad {:?} (grow >=5%/level); weak b {:?}, strong b {:?}",
                weak_g, strong_g, weak_b, strong_b
            ),
        );
    }
    assert!(all);
}

#[test]
fn acceptance_06_lavrentiev_gap() {
    let pol = QuadPolicy::default();
    let grid: Vec<f64> = (-40..=0).map(|j| 2f64.powf(j as f64 * 0.5)).collect();
    let mut all = true;
    for (name, cfg, model) in gap_models() {
        let fields = Fields::new(cfg);
        let rep = gap_scan(&model, &fields, &grid, &pol).unwrap();
        let pass = rep.t_star.is_some();
        all &= pass;
        line(
            "6 lavrentiev gap",
            pass,
            &format!(
                "{name}: deepest G = {:.5} at t = {:.5} (threshold {GAP_THRESHOLD}), S_inner(u_inner) = {:.5}",
                rep.dip, rep.dip_t, rep.s_circ
            ),
        );
    }
    assert!(all, "every model must reach G < {GAP_THRESHOLD} somewhere on the scan grid");
}

#[test]
fn acceptance_07_duality_certificate() {
    let pol = QuadPolicy::default();
    let mut all = true;
    for (name, cfg, model) in gap_models() {
        let fields = Fields::new(cfg);
        let scan = duality_certificate(&model, &fields, &pol).unwrap();
        let best = scan.best.expect("certificate scan returned no candidate");
        let pass = scan.success && best.relative_margin() >= 0.05;
        // the weighted model must also succeed at its constructed point
        let constructed_ok = match model.kind {
            orlicz::ModelKind::Weighted { p, eps, .. } => scan
                .curve
                .iter()
                .any(|c| c.t == 1.0 && (c.s - eps.powf(p - 1.0)).abs() < 1e-12 && c.margin > 0.0),
            _ => true,
        };
        all &= pass && constructed_ok;
        line(
            "7 duality certificate",
            pass && constructed_ok,
            &format!(
                "{name}: best margin/ts = {:.4} at t = 2^{:.0} (need >= 0.05){}",
                best.relative_margin(),
                best.t.log2(),
                if constructed_ok { "" } else { "; constructed point failed" }
            ),
        );
    }
    assert!(all);
}

#[test]
fn acceptance_08_minimizer_separation() {
    // quadratic sanity: linear boundary data reproduces itself
    let cfg = FractalConfig::new(Regime::Matching, 2, 2.0).unwrap();
    let quad = power_model(&cfg, 2.0).unwrap();
    let solver = SolverPolicy { max_iters: 60_000, rel_tol: 1e-16, stall_window: 40 };
    let r = minimize_w(&quad, 2, 33, |x| x[0], |_| 0.0, &solver).unwrap();
    let mut sup = 0.0f64;
    for i in 0..r.w.values.len() {
        let x = r.w.point(i);
        sup = sup.max((r.w.values[i] - x[0]).abs());
    }
    let sanity = sup < 1e-6;
    line(
        "8 minimizer separation",
        sanity,
        &format!("quadratic sanity: sup |w - x1| = {sup:.2e}, tol 1e-6"),
    );
    assert!(sanity);

    let pol = QuadPolicy::default();
    let solver = SolverPolicy { max_iters: 4_000, rel_tol: 1e-10, stall_window: 10 };
    let mut all = true;
    for (name, cfg, model) in gap_models() {
        let fields = Fields::new(cfg.clone());
        let scan = duality_certificate(&model, &fields, &pol).unwrap();
        // a comfortably certified point keeps the discretization error of the
        // modular well inside the margin
        let cert: Certificate = scan
            .first_with_relative_margin(0.5)
            .or(scan.best)
            .expect("certificate required for the minimizer comparison");
        let t = cert.t;
        let fb = fields.clone();
        let fi = fields.clone();
        let r = minimize_w(
            &model,
            2,
            65,
            move |x| t * fb.localized_u_grad(x).2,
            move |x| t * fi.u_grad(x).0,
            &solver,
        )
        .unwrap();
        let interp = discrete_energy(
            &model,
            &GridFunction::from_fn(2, 65, |x| t * fields.u_grad(x).0),
        );
        let upper = cert.t * cert.s - cert.fstar_sb;
        let pass_energy = r.energy <= interp + 1e-8 * (1.0 + interp.abs());
        let pass_duality = r.energy < upper;
        all &= pass_energy && pass_duality;
        line(
            "8 minimizer separation",
            pass_energy && pass_duality,
            &format!(
                "{name}: F(w_h) = {:.4e} <= F(t u interpolant) = {:.4e} and < ts - F*(sb) = {:.4e} (t = 2^{:.0})",
                r.energy,
                interp,
                upper,
                t.log2()
            ),
        );
    }
    assert!(all);
}

#[test]
fn acceptance_09_cantor_oracles() {
    // second moment against the self-similarity recursion
    let lambda = 1.0 / 3.0;
    let expected = (1.0 - lambda) / (4.0 * (1.0 + lambda));
    let q = cantor_integrate(|y| y[0] * y[0], lambda, 1, 18, 1 << 20).unwrap();
    let moment_ok = (q.value - expected).abs() < 1e-10;
    line(
        "9 cantor oracles",
        moment_ok,
        &format!("second moment {:.12} vs {:.12}, tol 1e-10", q.value, expected),
    );
    assert!(moment_ok);

    // distance against the level-20 endpoint enumeration
    let set = CantorSet::new(lambda);
    let mut blocks = vec![(0.0f64, 0.5f64)];
    for _ in 0..20 {
        let mut next = Vec::with_capacity(blocks.len() * 2);
        for &(c, w) in &blocks {
            let s = w * (1.0 - lambda);
            next.push((c - s, w * lambda));
            next.push((c + s, w * lambda));
        }
        blocks = next;
    }
    let mut pts: Vec<f64> = blocks.iter().flat_map(|&(c, w)| [c - w, c + w]).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let bound = lambda.powi(20) / 2.0;
    let mut rng = SplitMix64::new(9);
    let mut max_err = 0.0f64;
    for _ in 0..10_000 {
        let x = rng.uniform(-1.0, 1.0);
        let i = pts.partition_point(|&p| p < x);
        let mut brute = f64::INFINITY;
        if i < pts.len() {
            brute = brute.min((pts[i] - x).abs());
        }
        if i > 0 {
            brute = brute.min((pts[i - 1] - x).abs());
        }
        max_err = max_err.max((set.distance(x) - brute).abs());
    }
    let dist_ok = max_err <= bound + 1e-9;
    line(
        "9 cantor oracles",
        dist_ok,
        &format!("distance vs level-20 brute force: max dev {max_err:.2e} (block bound {bound:.2e} + 1e-9)"),
    );
    assert!(dist_ok);

    // neighborhood measure log-log slope ~ m - D
    let dim = set.dimension();
    let mut logs_r = Vec::new();
    let mut logs_m = Vec::new();
    for j in 2..=8 {
        let r = lambda.powi(j) / 4.0;
        let centers = set.level_centers(j as u32);
        let w = lambda.powi(j) / 2.0;
        let mut total = 0.0;
        let mut cur = (centers[0] - w - r, centers[0] + w + r);
        for &c in &centers[1..] {
            let (l, rr) = (c - w - r, c + w + r);
            if l <= cur.1 {
                cur.1 = cur.1.max(rr);
            } else {
                total += cur.1 - cur.0;
                cur = (l, rr);
            }
        }
        total += cur.1 - cur.0;
        logs_r.push(r.ln());
        logs_m.push(total.ln());
    }
    let slope = ls_slope(&logs_r, &logs_m);
    let slope_ok = (slope - (1.0 - dim)).abs() < 0.05;
    line(
        "9 cantor oracles",
        slope_ok,
        &format!("neighborhood slope {slope:.4} vs m - D = {:.4}, tol 0.05", 1.0 - dim),
    );
    assert!(slope_ok);
}

#[test]
fn acceptance_10_divergence_oracle() {
    let h = 1e-5;
    let mut all = true;
    for (name, cfg) in regimes_2d() {
        let fields = Fields::new(cfg).with_conv_tol(1e-12, 40);
        let mut rng = SplitMix64::new(10);
        let mut checked = 0;
        let mut max_rel = 0.0f64;
        while checked < 100 {
            let x = [rng.uniform(-0.95, 0.95), rng.uniform(-0.95, 0.95)];
            if fields.config.contact_distance(&x) < 0.1 {
                continue;
            }
            let (_, b) = fields.ab(&x);
            let bnorm = norm_d(&b, 2);
            if bnorm < 0.5 {
                continue; // relative error needs the band interior
            }
            checked += 1;
            for i in 0..2 {
                let mut div = 0.0;
                for j in 0..2 {
                    let a_ij = |v: f64| {
                        let mut y = x;
                        y[j] = v;
                        fields.ab(&y).0[i][j]
                    };
                    div += (a_ij(x[j] - 2.0 * h) - 8.0 * a_ij(x[j] - h) + 8.0 * a_ij(x[j] + h)
                        - a_ij(x[j] + 2.0 * h))
                        / (12.0 * h);
                }
                max_rel = max_rel.max((div - b[i]).abs() / bnorm);
            }
        }
        let pass = max_rel < 1e-5;
        all &= pass;
        line(
            "10 divergence oracle",
            pass,
            &format!("{name}: analytic b vs finite-difference div A, max rel err {max_rel:.2e}, tol 1e-5"),
        );
    }
    assert!(all);
}

#[test]
fn acceptance_11_muckenhoupt() {
    // envelopes of the weighted model: stable finite estimates across levels
    let (alpha, beta, p) = (-0.25f64, 0.25f64, 2.0f64);
    let eps = 0.05;
    let env_minus = move |x: &[f64]| (eps * x[1].abs().powf(beta)).powf(p);
    let env_plus = move |x: &[f64]| x[1].abs().powf(alpha * p);
    let mut all = true;
    for (name, w) in [
        ("omega_minus^p", &env_minus as &dyn Fn(&[f64]) -> f64),
        ("omega_plus^p", &env_plus as &dyn Fn(&[f64]) -> f64),
    ] {
        let levels = muckenhoupt_levels(&|x: &[f64]| w(x), p, 2, 7);
        let tail = &levels[3..];
        let hi = tail.iter().fold(0.0f64, |a, &b| a.max(b));
        let lo = tail.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let pass = hi.is_finite() && hi / lo < 1.25;
        all &= pass;
        line(
            "11 muckenhoupt",
            pass,
            &format!("{name}: sup estimates levels 3..7 in [{lo:.4}, {hi:.4}] (stable, finite)"),
        );
    }
    // out-of-window witness grows without bound
    let witness = |x: &[f64]| x[1].abs().powf(-p);
    let levels = muckenhoupt_levels(&witness, p, 2, 7);
    let g1 = levels[5] / levels[3];
    let g2 = levels[7] / levels[5];
    let pass = g1 > 1.5 && g2 > 1.5;
    all &= pass;
    line(
        "11 muckenhoupt",
        pass,
        &format!("witness |x_d|^-p: estimates grow x{g1:.2} then x{g2:.2} across levels 3->5->7"),
    );
    assert!(all);
}
