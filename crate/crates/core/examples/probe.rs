use fracgap::cantor::{FractalConfig, Regime};
use fracgap::fields::Fields;
use fracgap::integrate::QuadPolicy;
use fracgap::orlicz::*;
use fracgap::verify::*;

fn main() {
    let pol = QuadPolicy::default();
    let grid: Vec<f64> = (-40..=0).map(|j| 2f64.powf(j as f64 * 0.5)).collect();

    let run = |name: &str, cfg: &FractalConfig, m: &OrliczModel| {
        let fields = Fields::new(cfg.clone());
        let t0 = std::time::Instant::now();
        let rep = gap_scan(m, &fields, &grid, &pol).unwrap();
        println!(
            "{name}: dip={:.5} at t={:.5} s_circ={:.5} t_star={:?} [{:?}]",
            rep.dip, rep.dip_t, rep.s_circ, rep.t_star, t0.elapsed()
        );
        for t in &rep.terms {
            println!("    exp {:.3}: coef {:.5} tail {:.5}", t.exponent, t.coef, t.tail);
        }
        let t0 = std::time::Instant::now();
        let cert = duality_certificate(m, &fields, &pol).unwrap();
        let b = cert.best.unwrap();
        println!(
            "    certificate: t=2^{:.0} margin/ts={:.4} [{:?}]",
            b.t.log2(),
            b.relative_margin(),
            t0.elapsed()
        );
    };

    let cfg = FractalConfig::new(Regime::Matching, 2, 2.0).unwrap();
    run("varexp matching", &cfg, &variable_exponent_model(&cfg, 1.9, 2.1).unwrap());
    let cfg = FractalConfig::new(Regime::Sub, 2, 1.5).unwrap();
    run("varexp sub     ", &cfg, &variable_exponent_model(&cfg, 1.4, 1.6).unwrap());
    let cfg = FractalConfig::new(Regime::Super, 2, 3.0).unwrap();
    run("varexp super   ", &cfg, &variable_exponent_model(&cfg, 2.9, 3.1).unwrap());
    let p0 = double_phase_p0(2, 1.8, 3.2, 0.5).unwrap();
    let cfg = FractalConfig::new(regime_for_p0(2, p0), 2, p0).unwrap();
    run("double phase   ", &cfg, &double_phase_model(&cfg, 1.8, 3.2, 0.5).unwrap());
    let cfg = FractalConfig::new(Regime::Matching, 2, 2.0).unwrap();
    let fields = Fields::new(cfg.clone());
    let (c1, c2, eps) = weighted_epsilon(&cfg, &fields, 2.0, -0.25, 0.25, &pol).unwrap();
    println!("weighted constants: c1={c1:.4} c2={c2:.4} eps={eps:.5}");
    run("weighted       ", &cfg, &weighted_model(&cfg, 2.0, -0.25, 0.25, eps).unwrap());
}
