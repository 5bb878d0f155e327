//! Command-line front end: builds the configured fields and energy model,
//! runs the verification suites and emits JSON reports plus CSV data dumps.

mod config;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use fracgap::cantor::FractalConfig;
use fracgap::fields::Fields;
use fracgap::integrate::{boundary_pairing, QuadPolicy};
use fracgap::minimize::{discrete_energy, minimize_w, GridFunction};
use fracgap::orlicz::{GridField, OrliczModel};
use fracgap::util::{norm_d, SplitMix64};
use fracgap::verify::{
    check_su_table, divergence_free_check, duality_certificate, gap_scan, CheckRecord,
    GAP_THRESHOLD,
};
use serde_json::{json, Value};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fracgap", about = "Fractal separating fields and Lavrentiev-gap diagnostics")]
struct Cli {
    /// Path to the experiment config (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for reports and CSV dumps; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the quadrature depth cap.
    #[arg(long, global = true)]
    max_depth: Option<u32>,

    /// Override the exclusion radius around the contact set.
    #[arg(long, global = true)]
    delta: Option<f64>,

    /// Override the quadrature cell budget.
    #[arg(long, global = true)]
    budget: Option<usize>,

    /// Override the sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the fields on a uniform grid as CSV.
    SampleField {
        /// Nodes per axis.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Run the full proposition suite and emit a pass/fail report.
    Verify {
        /// Random points for the pointwise divergence and support checks.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Scan the gap functional over the configured grid.
    Gap,
    /// Search the duality coupling curve for a certificate.
    Certify,
    /// Minimize the discrete energy with boundary data t * u_outer.
    Minimize {
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Nodes per axis; defaults to the solver config.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Weak/strong norm diagnostics across grid refinement levels.
    Norms,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

struct Ctx {
    fractal: FractalConfig,
    fields: Fields,
    model: OrliczModel,
    resolved: ExperimentConfig,
    pol: QuadPolicy,
    out: Option<PathBuf>,
}

impl Ctx {
    fn write_text(&self, name: &str, text: &str) -> std::io::Result<()> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join(name), text)
            }
            None => {
                let mut so = std::io::stdout().lock();
                writeln!(so, "{text}")
            }
        }
    }

    fn write_report(&self, name: &str, command: &str, payload: Value, pass: bool) -> std::io::Result<()> {
        let report = json!({
            "schema": 1,
            "command": command,
            "config": serde_json::to_value(&self.resolved).unwrap(),
            "report": payload,
            "pass": pass,
        });
        self.write_text(name, &serde_json::to_string_pretty(&report).unwrap())
    }
}

fn run(cli: Cli) -> fracgap::Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| fracgap::Error::Domain(format!("read config: {e}")))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = cli.max_depth {
        cfg.quad.max_depth = v;
    }
    if let Some(v) = cli.delta {
        cfg.quad.delta = v;
    }
    if let Some(v) = cli.budget {
        cfg.quad.budget = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    let (fractal, model, resolved) = cfg.resolve()?;
    let ctx = Ctx {
        fields: Fields::new(fractal.clone()),
        pol: cfg.quad.policy(),
        fractal,
        model,
        resolved,
        out: cli.out.clone(),
    };
    let io_err = |e: std::io::Error| fracgap::Error::Domain(format!("write output: {e}"));
    match cli.command {
        Command::SampleField { grid } => {
            let csv = sample_field_csv(&ctx, grid);
            ctx.write_text("field.csv", &csv).map_err(io_err)?;
            Ok(true)
        }
        Command::Verify { samples } => {
            let (records, pass) = verify_records(&ctx, samples)?;
            let payload = json!({ "records": records });
            ctx.write_report("verify_report.json", "verify", payload, pass).map_err(io_err)?;
            if !pass {
                for r in records_failing(&ctx, samples)? {
                    eprintln!("FAIL {}: measured {} vs tolerance {}", r.check_id, r.measured, r.tolerance);
                }
            }
            Ok(pass)
        }
        Command::Gap => {
            let grid = cfg.gap_grid();
            let rep = gap_scan(&ctx.model, &ctx.fields, &grid, &ctx.pol)?;
            let pass = rep.t_star.is_some();
            let mut csv = String::from("t,G\n");
            for (t, g) in rep.t_grid.iter().zip(&rep.g_values) {
                csv.push_str(&format!("{t},{g}\n"));
            }
            ctx.write_text("gap_curve.csv", &csv).map_err(io_err)?;
            ctx.write_report(
                "gap_report.json",
                "gap",
                serde_json::to_value(&rep).unwrap(),
                pass,
            )
            .map_err(io_err)?;
            if !pass {
                eprintln!(
                    "FAIL gap: no grid point reached G < {GAP_THRESHOLD}; deepest {} at t = {}, F(t u_inner)/t at the smallest t: {}",
                    rep.dip, rep.dip_t, rep.f_over_t_smallest
                );
            }
            Ok(pass)
        }
        Command::Certify => {
            let scan = duality_certificate(&ctx.model, &ctx.fields, &ctx.pol)?;
            let pass = scan.success;
            let mut csv = String::from("t,s,f_tu,fstar_sb,margin\n");
            for c in &scan.curve {
                csv.push_str(&format!("{},{},{},{},{}\n", c.t, c.s, c.f_tu, c.fstar_sb, c.margin));
            }
            ctx.write_text("certificate_curve.csv", &csv).map_err(io_err)?;
            ctx.write_report(
                "certificate.json",
                "certify",
                serde_json::to_value(&scan).unwrap(),
                pass,
            )
            .map_err(io_err)?;
            if !pass {
                eprintln!("FAIL certify: no positive margin on the coupling curve");
            }
            Ok(pass)
        }
        Command::Minimize { t, n } => {
            let n = n.unwrap_or(cfg.solver.n);
            let fields = ctx.fields.clone();
            let boundary = {
                let f = fields.clone();
                move |x: &[f64]| t * f.localized(x).outer.u
            };
            let init = {
                let f = fields.clone();
                move |x: &[f64]| t * f.sample(x).u
            };
            let r = minimize_w(&ctx.model, ctx.fractal.d, n, boundary, init, &cfg.solver.policy())?;
            let interp_energy = discrete_energy(
                &ctx.model,
                &GridFunction::from_fn(ctx.fractal.d, n, |x| t * fields.sample(x).u),
            );
            let mut csv = String::new();
            for j in 0..ctx.fractal.d {
                csv.push_str(&format!("x{},", j + 1));
            }
            csv.push_str("value\n");
            for idx in 0..r.w.values.len() {
                let x = r.w.point(idx);
                for j in 0..ctx.fractal.d {
                    csv.push_str(&format!("{},", x[j]));
                }
                csv.push_str(&format!("{}\n", r.w.values[idx]));
            }
            ctx.write_text("minimizer.csv", &csv).map_err(io_err)?;
            let mut log_csv = String::from("iteration,energy\n");
            for (i, e) in r.energy_log.iter().enumerate() {
                log_csv.push_str(&format!("{i},{e}\n"));
            }
            ctx.write_text("minimizer_iterates.csv", &log_csv).map_err(io_err)?;
            let pass = r.energy <= interp_energy + 1e-8 * (1.0 + interp_energy.abs());
            let payload = json!({
                "t": t,
                "n": n,
                "energy": r.energy,
                "interpolant_energy": interp_energy,
                "iterations": r.iterations,
                "converged": r.converged,
                "final_grad_norm": r.final_grad_norm,
            });
            ctx.write_report("minimize_summary.json", "minimize", payload, pass).map_err(io_err)?;
            Ok(pass)
        }
        Command::Norms => {
            let (payload, csv, pass) = norms_report(&ctx);
            ctx.write_text("norms.csv", &csv).map_err(io_err)?;
            ctx.write_report("norms_report.json", "norms", payload, pass).map_err(io_err)?;
            Ok(pass)
        }
    }
}

fn sample_field_csv(ctx: &Ctx, grid: usize) -> String {
    let d = ctx.fractal.d;
    let mut csv = String::new();
    for j in 0..d {
        csv.push_str(&format!("x{},", j + 1));
    }
    csv.push_str("u,");
    for j in 0..d {
        csv.push_str(&format!("grad_u_{},", j + 1));
    }
    for j in 0..d {
        csv.push_str(&format!("b_{},", j + 1));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            csv.push_str(&format!("a_{}{},", i + 1, j + 1));
        }
    }
    csv.push_str("u_inner,");
    for j in 0..d {
        csv.push_str(&format!("b_inner_{},", j + 1));
    }
    csv.push_str("near_singular\n");
    let h = 2.0 / (grid as f64 - 1.0);
    let total = grid.pow(d as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = [0.0f64; 3];
        for slot in x.iter_mut().take(d) {
            *slot = -1.0 + h * (rem % grid) as f64;
            rem /= grid;
        }
        let loc = ctx.fields.localized(&x[..d]);
        let s = ctx.fields.sample(&x[..d]);
        for v in x.iter().take(d) {
            csv.push_str(&format!("{v},"));
        }
        csv.push_str(&format!("{},", s.u));
        for j in 0..d {
            csv.push_str(&format!("{},", s.grad_u[j]));
        }
        for j in 0..d {
            csv.push_str(&format!("{},", s.b[j]));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                csv.push_str(&format!("{},", s.a_mat[i][j]));
            }
        }
        csv.push_str(&format!("{},", loc.inner.u));
        for j in 0..d {
            csv.push_str(&format!("{},", loc.inner.b[j]));
        }
        csv.push_str(&format!("{}\n", u8::from(s.near_singular)));
    }
    csv
}

fn verify_records(ctx: &Ctx, samples: usize) -> fracgap::Result<(Vec<CheckRecord>, bool)> {
    let recs = records_failing(ctx, samples)?;
    let pass = recs.iter().all(|r| r.pass);
    Ok((recs, pass))
}

fn records_failing(ctx: &Ctx, samples: usize) -> fracgap::Result<Vec<CheckRecord>> {
    let d = ctx.fractal.d;
    let mut records = Vec::new();

    let pair = boundary_pairing(&ctx.fields, &ctx.pol)?;
    records.push(CheckRecord::new(
        "boundary_pairing",
        "the boundary pairing of b and u equals one",
        pair.value,
        1e-3,
        (pair.value - 1.0).abs() <= 1e-3,
    ));

    let table = check_su_table(&ctx.fields, &ctx.pol)?;
    let row_names = ["S", "S_outer", "S_inner"];
    let col_names = ["u", "u_outer", "u_inner"];
    for r in 0..3 {
        for c in 0..3 {
            let id = format!("table_{}({})", row_names[r], col_names[c]);
            records.push(CheckRecord::new(
                &id,
                "separating-functional table entry",
                table.values[r][c],
                1e-3,
                (table.values[r][c] - table.expected[r][c]).abs() <= 1e-3,
            ));
        }
    }

    let div = divergence_free_check(&ctx.fields, &ctx.pol, ctx.resolved.seed, samples, 0.05)?;
    records.push(CheckRecord::new(
        "divfree_inner_weak",
        "b_inner annihilates gradients of the smooth suite",
        div.max_inner_pairing,
        2e-3,
        div.max_inner_pairing <= 2e-3,
    ));
    records.push(CheckRecord::new(
        "divfree_full_weak",
        "b annihilates gradients of the compactly supported suite",
        div.max_full_pairing,
        2e-3,
        div.max_full_pairing <= 2e-3,
    ));
    records.push(CheckRecord::new(
        "divfree_pointwise",
        "finite-difference divergence of b vanishes away from the contact set",
        div.pointwise_max,
        1e-4,
        div.pointwise_max <= 1e-4,
    ));

    let mut rng = SplitMix64::new(ctx.resolved.seed ^ 0x5eed);
    let mut max_prod = 0.0f64;
    let mut max_skew = 0.0f64;
    let mut max_u = 0.0f64;
    for _ in 0..samples {
        let mut x = [0.0f64; 3];
        for slot in x.iter_mut().take(d) {
            *slot = rng.uniform(-1.0, 1.0);
        }
        let s = ctx.fields.sample(&x[..d]);
        max_prod = max_prod.max(norm_d(&s.grad_u, d) * norm_d(&s.b, d));
        max_u = max_u.max(s.u.abs());
        for i in 0..d {
            for j in 0..d {
                max_skew = max_skew.max((s.a_mat[i][j] + s.a_mat[j][i]).abs());
            }
        }
    }
    records.push(CheckRecord::new(
        "disjoint_supports",
        "grad u and b never overlap",
        max_prod,
        1e-14,
        max_prod < 1e-14,
    ));
    records.push(CheckRecord::new(
        "skew_symmetry",
        "the potential A is exactly skew-symmetric",
        max_skew,
        0.0,
        max_skew == 0.0,
    ));
    records.push(CheckRecord::new(
        "u_bounded",
        "u stays within its amplitude",
        max_u,
        fracgap::fields::U_AMPLITUDE,
        max_u <= fracgap::fields::U_AMPLITUDE + 1e-15,
    ));
    Ok(records)
}

fn norms_report(ctx: &Ctx) -> (Value, String, bool) {
    let d = ctx.fractal.d;
    let p0 = ctx.fractal.p0;
    let pc = p0 / (p0 - 1.0);
    let levels: [usize; 4] = [64, 128, 256, 512];
    let mut rows = Vec::new();
    let mut csv = String::from("n,weak_grad,strong_grad,weak_b,strong_b\n");
    for &n in &levels {
        let grad = GridField::from_sampler(
            |x| norm_d(&ctx.fields.sample(x).grad_u, d),
            d,
            n,
        );
        let bfield = GridField::from_sampler(|x| norm_d(&ctx.fields.sample(x).b, d), d, n);
        let wg = fracgap::orlicz::weak_lp_estimate(&grad, p0);
        let sg = fracgap::orlicz::strong_modular(&grad, p0);
        let wb = fracgap::orlicz::weak_lp_estimate(&bfield, pc);
        let sb = fracgap::orlicz::strong_modular(&bfield, pc);
        csv.push_str(&format!("{n},{wg},{sg},{wb},{sb}\n"));
        rows.push(json!({"n": n, "weak_grad": wg, "strong_grad": sg, "weak_b": wb, "strong_b": sb}));
    }
    let wg_last: Vec<f64> = rows
        .iter()
        .map(|r| r["weak_grad"].as_f64().unwrap())
        .collect();
    let sg: Vec<f64> = rows
        .iter()
        .map(|r| r["strong_grad"].as_f64().unwrap())
        .collect();
    let weak_stable = (wg_last[3] - wg_last[2]).abs() / wg_last[2] < 0.02;
    let strong_grows =
        sg[1] >= 1.05 * sg[0] && sg[2] >= 1.05 * sg[1] && sg[3] >= 1.05 * sg[2];
    let pass = weak_stable && strong_grows;
    (
        json!({
            "levels": rows,
            "weak_grad_stable": weak_stable,
            "strong_grad_grows": strong_grows,
        }),
        csv,
        pass,
    )
}
