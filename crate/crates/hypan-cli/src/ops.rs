//! The build / verify / table commands.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use serde_json::json;

use hypan::catalog::{self, example, factorization_probes, oracle, probe_lattice};
use hypan::duplex::Hyperbolic;
use hypan::error::{Error, Result};
use hypan::genseq::{
    build_phi, formal_power, generating_sequence, kg_solution_family, FormalPowerOptions,
    GeneratingSequence, RhoProfile,
};
use hypan::hfield::RealField;
use hypan::kleingordon::{
    apply_p, apply_q, eta_as_potential, kg_residual, main_b_field, u_from_v, v_from_u, KGProblem,
};
use hypan::pseudoanalytic::{is_successor, vekua_residual};
use hypan::QuadratureSettings;

use super::ProblemArgs;

/// A resolved problem: where it came from, the problem itself, its profile,
/// and the recommended center/base.
struct Resolved {
    label: String,
    is_catalog: bool,
    problem: KGProblem,
    profile: Option<RhoProfile>,
    center: Hyperbolic,
    base: Hyperbolic,
    quad: QuadratureSettings,
}

fn resolve(args: &ProblemArgs) -> Result<Resolved> {
    let mut quad = QuadratureSettings::default();
    if let Some(tol) = args.quad_tol {
        if tol <= 0.0 || tol.is_nan() {
            return Err(Error::Parse(format!(
                "--quad-tol must be positive, got {tol}"
            )));
        }
        quad.tol = tol;
    }
    match (&args.example, &args.problem) {
        (Some(name), None) => {
            let ex = example(name)?;
            Ok(Resolved {
                label: ex.name.to_string(),
                is_catalog: true,
                problem: ex.problem,
                profile: ex.profile,
                center: ex.center,
                base: ex.base,
                quad,
            })
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
            let (problem, profile) = catalog::problem_from_json(&text)?;
            let base = problem.domain.base;
            Ok(Resolved {
                label: path.display().to_string(),
                is_catalog: false,
                problem,
                profile,
                center: base,
                base,
                quad,
            })
        }
        _ => Err(Error::Parse(
            "exactly one of --example or --problem is required".into(),
        )),
    }
}

fn parse_xy(s: &str) -> Result<Hyperbolic> {
    let (x, t) = s
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("expected \"x,t\", got {s:?}")))?;
    let x: f64 = x
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad x in {s:?}")))?;
    let t: f64 = t
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad t in {s:?}")))?;
    Ok(Hyperbolic::new(x, t))
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (nx, nt) = s
        .split_once('x')
        .ok_or_else(|| Error::Parse(format!("expected \"NXxNT\", got {s:?}")))?;
    let nx: usize = nx
        .parse()
        .map_err(|_| Error::Parse(format!("bad grid {s:?}")))?;
    let nt: usize = nt
        .parse()
        .map_err(|_| Error::Parse(format!("bad grid {s:?}")))?;
    if nx < 2 || nt < 2 {
        return Err(Error::Parse(format!("grid {s:?} too small")));
    }
    Ok((nx, nt))
}

fn domain_probes(problem: &KGProblem) -> Vec<Hyperbolic> {
    probe_lattice()
        .into_iter()
        .filter(|p| problem.domain.contains(*p))
        .collect()
}

fn sequence(res: &Resolved) -> Result<GeneratingSequence> {
    let profile = res.profile.as_ref().ok_or_else(|| {
        Error::Parse("this problem has no rho-profile; formal powers need one".into())
    })?;
    generating_sequence(&res.problem, profile, &domain_probes(&res.problem))
}

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

pub fn build(
    args: &ProblemArgs,
    n_max: u32,
    center: Option<String>,
    base: Option<String>,
    grid_spec: &str,
    out: &Path,
) -> Result<ExitCode> {
    let started = Instant::now();
    let res = resolve(args)?;
    let center = match center {
        Some(s) => parse_xy(&s)?,
        None => res.center,
    };
    let base = match base {
        Some(s) => parse_xy(&s)?,
        None => res.base,
    };
    let (nx, nt) = parse_grid(grid_spec)?;
    let grid: Vec<Hyperbolic> = catalog::grid(nx, nt)
        .into_iter()
        .filter(|p| res.problem.domain.contains(*p))
        .collect();
    if grid.is_empty() {
        return Err(Error::Parse(
            "the evaluation grid does not intersect the problem domain".into(),
        ));
    }
    let seq = sequence(&res)?;
    let opts = FormalPowerOptions {
        settings: res.quad.clone(),
        fstar_sign: 1.0,
    };
    fs::create_dir_all(out)
        .map_err(|e| Error::Parse(format!("cannot create {}: {e}", out.display())))?;

    let residual_probes: Vec<Hyperbolic> = domain_probes(&res.problem)
        .into_iter()
        .step_by(4)
        .take(3)
        .collect();
    let pair0 = seq.pair(0)?;
    let mut power_meta = Vec::new();
    for n in 0..=n_max {
        for (a, a_label) in [(Hyperbolic::ONE, "1"), (Hyperbolic::J, "j")] {
            let power = formal_power(&seq, 0, n, a, center, base, &opts)?;
            let file = format!("powers_{n}_{a_label}.csv");
            let mut csv = String::from("x,t,re,im,n,a_label\n");
            for &p in &grid {
                let v = power.eval(p)?;
                csv.push_str(&format!(
                    "{},{},{},{},{n},{a_label}\n",
                    p.re, p.im, v.re, v.im
                ));
            }
            fs::write(out.join(&file), csv)
                .map_err(|e| Error::Parse(format!("cannot write {file}: {e}")))?;
            let mut max_res = 0.0f64;
            for &p in &residual_probes {
                max_res = max_res.max(vekua_residual(&power.field, &pair0, p)?);
            }
            power_meta.push(json!({
                "n": n,
                "a": a_label,
                "file": file,
                "max_vekua_residual": max_res,
            }));
        }
    }

    let metadata = json!({
        "source": res.label,
        "catalog_example": res.is_catalog,
        "center": [center.re, center.im],
        "base": [base.re, base.im],
        "n_max": n_max,
        "grid": { "nx": nx, "nt": nt, "points": grid.len() },
        "quadrature": {
            "nodes": res.quad.nodes,
            "panels": res.quad.panels,
            "refine": res.quad.refine,
            "tol": res.quad.tol,
        },
        "fstar_sign": 1.0,
        "powers": power_meta,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    fs::write(
        out.join("metadata.json"),
        serde_json::to_string_pretty(&metadata).expect("metadata serialization") + "\n",
    )
    .map_err(|e| Error::Parse(format!("cannot write metadata.json: {e}")))?;

    println!(
        "built {} powers over {} grid points into {}",
        2 * (n_max + 1),
        grid.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct Report {
    rows: Vec<(f64, f64, String, f64)>,
    failures: usize,
}

impl Report {
    fn new() -> Self {
        Self {
            rows: Vec::new(),
            failures: 0,
        }
    }

    fn record(&mut self, p: Hyperbolic, kind: &str, magnitude: f64, tol: f64) {
        self.rows.push((p.re, p.im, kind.to_string(), magnitude));
        if magnitude.abs() > tol || magnitude.is_nan() {
            self.failures += 1;
        }
    }

    fn merge(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.failures += other.failures;
    }
}

fn suite_factorization(res: &Resolved) -> Result<Report> {
    let mut rep = Report::new();
    let probes = domain_probes(&res.problem);
    for (name, phi) in factorization_probes(&res.problem.domain) {
        let w = apply_p(&phi, &res.problem);
        for &p in &probes {
            let lhs = apply_q(&w, &res.problem, p)? * 4.0;
            let rhs = kg_residual(&phi, &res.problem.potential, p)?;
            let dev = (lhs - Hyperbolic::new(rhs, 0.0)).max_abs();
            rep.record(p, &format!("factorization_{name}"), dev, 1e-7);
        }
    }
    Ok(rep)
}

fn suite_transfer(res: &Resolved) -> Result<Report> {
    let mut rep = Report::new();
    let probes = domain_probes(&res.problem);
    let prob = &res.problem;
    let f = &prob.f.f;
    if res.label == "xt-eta" {
        // closed form v = ±(x²+t²)/(2xt) + c/f, best sign reported
        let one = RealField::constant(prob.domain.clone(), 1.0);
        let v = v_from_u(&one, prob, &res.quad, &probes)?;
        let p0 = probes[0];
        let mut best: Option<(f64, f64)> = None;
        for sign in [1.0f64, -1.0] {
            let c = (v.value(p0) - sign * catalog::xt_eta_v_closed(p0)) * f.value(p0);
            let mut worst = 0.0f64;
            for &p in &probes {
                let expect = sign * catalog::xt_eta_v_closed(p) + c / f.value(p);
                worst = worst.max((v.value(p) - expect).abs());
            }
            if best.is_none_or(|(_, b)| worst < b) {
                best = Some((sign, worst));
            }
        }
        let (sign, worst) = best.unwrap();
        rep.record(
            p0,
            &format!("transfer_v_closed_form_sign{sign:+.0}"),
            worst,
            1e-8,
        );
        let u_rt = u_from_v(&v, prob, &res.quad, &probes)?;
        let c = (u_rt.value(p0) - 1.0) / f.value(p0);
        for &p in &probes {
            let dev = (u_rt.value(p) - 1.0 - c * f.value(p)).abs();
            rep.record(p, "transfer_round_trip", dev, 1e-7);
        }
    } else {
        // u = f is always a solution; its companion v vanishes (c = 0)
        let v = v_from_u(f, prob, &res.quad, &probes)?;
        for &p in &probes {
            rep.record(p, "transfer_v_of_f", v.value(p).abs(), 1e-9);
        }
        let u_rt = u_from_v(&v, prob, &res.quad, &probes)?;
        let p0 = probes[0];
        let c = (u_rt.value(p0) - f.value(p0)) / f.value(p0);
        for &p in &probes {
            let dev = (u_rt.value(p) - (1.0 + c) * f.value(p)).abs();
            rep.record(p, "transfer_round_trip", dev, 1e-7);
        }
    }
    Ok(rep)
}

fn suite_eta(res: &Resolved) -> Result<Report> {
    let mut rep = Report::new();
    let probes = domain_probes(&res.problem);
    let b = main_b_field(&res.problem);
    let eta = eta_as_potential(&res.problem);
    for &p in &probes {
        let bv = b.value(p);
        let bz = b.dz(p)?;
        let bbar = (bv * bv.conj()).re;
        rep.record(p, "b_z_imaginary_part", bz.im.abs(), 1e-8);
        rep.record(
            p,
            "nu_identity",
            (4.0 * (bbar + bz.re) - res.problem.potential.value(p)).abs(),
            1e-8,
        );
        rep.record(
            p,
            "eta_identity",
            (4.0 * (bbar - bz.re) - eta.value(p)).abs(),
            1e-8,
        );
        if res.label == "wave" {
            // constant f: eta must vanish identically with nu = 0
            rep.record(p, "eta_vanishes", eta.value(p).abs(), 1e-12);
        }
    }
    Ok(rep)
}

fn suite_vekua(res: &Resolved) -> Result<Report> {
    let mut rep = Report::new();
    let seq = sequence(res)?;
    let opts = FormalPowerOptions {
        settings: res.quad.clone(),
        fstar_sign: 1.0,
    };
    let probes: Vec<Hyperbolic> = domain_probes(&res.problem).into_iter().step_by(2).collect();
    let pair0 = seq.pair(0)?;
    for n in 0..=2u32 {
        for (a, a_label) in [(Hyperbolic::ONE, "1"), (Hyperbolic::J, "j")] {
            let power = formal_power(&seq, 0, n, a, res.center, res.base, &opts)?;
            for &p in &probes {
                let r = vekua_residual(&power.field, &pair0, p)?;
                rep.record(p, &format!("vekua_z{n}_{a_label}"), r, 1e-6);
            }
        }
    }
    Ok(rep)
}

fn suite_successor(res: &Resolved) -> Result<Report> {
    let mut rep = Report::new();
    let seq = sequence(res)?;
    let probes = domain_probes(&res.problem);
    let anchor = probes[0];
    for m in -2i32..=2 {
        let r = is_successor(&seq.pair(m + 1)?, &seq.pair(m)?, &probes, 1e-8)?;
        rep.record(anchor, &format!("successor_a_dev_m{m}"), r.max_a_dev, 1e-8);
        rep.record(anchor, &format!("successor_b_dev_m{m}"), r.max_b_dev, 1e-8);
    }
    Ok(rep)
}

fn suite_phi(res: &Resolved) -> Result<Report> {
    let mut rep = Report::new();
    let profile = res.profile.as_ref().ok_or_else(|| {
        Error::Parse("this problem has no rho-profile; the phi suite needs one".into())
    })?;
    let probes = domain_probes(&res.problem);
    let phi = build_phi(profile, &res.problem.domain, &probes)?;
    for &p in &probes {
        rep.record(p, "phi_holomorphy", phi.d_holomorphy_residual(p)?, 1e-9);
        if let Some((closed, _)) = &profile.phi_closed {
            rep.record(
                p,
                "phi_closed_form",
                (phi.value(p) - closed(p)).max_abs(),
                1e-12,
            );
        }
    }
    Ok(rep)
}

fn suite_kg(res: &Resolved) -> Result<Report> {
    let mut rep = Report::new();
    let seq = sequence(res)?;
    let opts = FormalPowerOptions {
        settings: res.quad.clone(),
        fstar_sign: 1.0,
    };
    let family = kg_solution_family(&seq, 2, res.center, res.base, &opts)?;
    let probes: Vec<Hyperbolic> = domain_probes(&res.problem).into_iter().step_by(3).collect();
    for member in &family {
        for &p in &probes {
            let r = kg_residual(&member.re, &res.problem.potential, p)?;
            rep.record(
                p,
                &format!("kg_re_z{}_{}", member.n, member.a_label),
                r.abs(),
                1e-5,
            );
        }
    }
    Ok(rep)
}

pub fn verify(args: &ProblemArgs, suite: &str, out: &Path) -> Result<ExitCode> {
    let res = resolve(args)?;
    let suites: Vec<&str> = match suite {
        "all" => vec![
            "factorization",
            "transfer",
            "eta",
            "vekua",
            "successor",
            "phi",
            "kg",
        ],
        s => vec![s],
    };
    let mut report = Report::new();
    for s in &suites {
        let part = match *s {
            "factorization" => suite_factorization(&res)?,
            "transfer" => suite_transfer(&res)?,
            "eta" => suite_eta(&res)?,
            "vekua" => suite_vekua(&res)?,
            "successor" => suite_successor(&res)?,
            "phi" => suite_phi(&res)?,
            "kg" => suite_kg(&res)?,
            other => {
                return Err(Error::Parse(format!(
                    "unknown suite {other:?}; expected factorization | transfer | eta | vekua | successor | phi | kg | all"
                )))
            }
        };
        report.merge(part);
    }

    fs::create_dir_all(out)
        .map_err(|e| Error::Parse(format!("cannot create {}: {e}", out.display())))?;
    let mut csv = String::from("probe_x,probe_t,residual_kind,magnitude\n");
    for (x, t, kind, mag) in &report.rows {
        csv.push_str(&format!("{x},{t},{kind},{mag}\n"));
    }
    let file = out.join(format!("report_{suite}.csv"));
    fs::write(&file, csv).map_err(|e| Error::Parse(format!("cannot write report: {e}")))?;

    let max_mag = report.rows.iter().map(|r| r.3.abs()).fold(0.0f64, f64::max);
    println!(
        "suite {suite} on {}: {} checks, {} failures, max residual {max_mag:.3e}; report: {}",
        res.label,
        report.rows.len(),
        report.failures,
        file.display()
    );
    if report.failures > 0 {
        Ok(ExitCode::from(4))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

// ---------------------------------------------------------------------------
// table
// ---------------------------------------------------------------------------

pub fn table(name: &str, n: u32, a_label: &str, out: &Path) -> Result<ExitCode> {
    example(name)?; // validates the name (config error when unknown)
    let meta_path = out.join("metadata.json");
    let meta: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(&meta_path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", meta_path.display())))?,
    )
    .map_err(|e| Error::Parse(format!("bad metadata.json: {e}")))?;
    let get_pt = |key: &str| -> Result<Hyperbolic> {
        let arr = meta[key]
            .as_array()
            .ok_or_else(|| Error::Parse(format!("metadata.json lacks {key}")))?;
        Ok(Hyperbolic::new(
            arr[0].as_f64().unwrap_or(f64::NAN),
            arr[1].as_f64().unwrap_or(f64::NAN),
        ))
    };
    let center = get_pt("center")?;
    let base = get_pt("base")?;

    let oracle = oracle(name, n, a_label, center, base).ok_or(Error::MissingOracle {
        n,
        a_label: a_label.to_string(),
    })?;

    let powers_path = out.join(format!("powers_{n}_{a_label}.csv"));
    let body = fs::read_to_string(&powers_path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", powers_path.display())))?;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for line in body.lines().skip(1) {
        let mut cols = line.split(',');
        let x: f64 = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad row: {line}")))?;
        let t: f64 = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad row: {line}")))?;
        let re: f64 = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad row: {line}")))?;
        rows.push((x, t, re));
    }

    let scale = rows
        .iter()
        .map(|r| oracle(Hyperbolic::new(r.0, r.1)).re.abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut csv = String::from("x,t,numeric_re,oracle_re,abs_err,rel_err\n");
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for (x, t, numeric_re) in rows {
        let oracle_re = oracle(Hyperbolic::new(x, t)).re;
        let abs_err = (numeric_re - oracle_re).abs();
        // near-zero oracle entries fall back to a scale-relative denominator
        let rel_err = abs_err / oracle_re.abs().max(1e-12 * scale);
        max_abs = max_abs.max(abs_err);
        max_rel = max_rel.max(rel_err);
        csv.push_str(&format!(
            "{x},{t},{numeric_re},{oracle_re},{abs_err},{rel_err}\n"
        ));
    }
    let file = out.join(format!("table_{n}_{a_label}.csv"));
    fs::write(&file, csv).map_err(|e| Error::Parse(format!("cannot write table: {e}")))?;
    println!(
        "table {name} n={n} a={a_label}: max abs err {max_abs:.3e}, max rel err {max_rel:.3e}; {}",
        file.display()
    );
    Ok(ExitCode::SUCCESS)
}
