//! One experiment per invocation: build, solve, evaluate, write artifacts.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use plap_core::frequency::{
    caccioppoli_ratio, condition_probes, convexity_probe, doubling_scan, energy_identity_report, frequency_profile,
    grad_estimate_check, i_prime_bound_check, i_prime_finite_difference, i_prime_formula, poincare_probe,
    radius_grid, vanishing_radius, window_terms, FrequencyProfile, Quadrature,
};
use plap_core::linearize::{ellipticity_bounds, residual_affine_linearization, residual_two_solution, C2Field};
use plap_core::mesh::{build_mesh_jittered, DomainKind};
use plap_core::solver::{picard_solve, BoundaryData, SolveReport};
use plap_core::{ExactSolution, Point, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind};
use crate::error::CliError;
use crate::plot::emit_plot;

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json(cfg: &ExperimentConfig, name: &str, body: impl Serialize) -> Result<Value, CliError> {
    let mut v = serde_json::to_value(body).map_err(|e| CliError::Io(e.to_string()))?;
    if let Value::Object(map) = &mut v {
        map.insert("config_hash".into(), Value::String(cfg.hash()));
        map.insert("kind".into(), Value::String(cfg.kind.name().into()));
    }
    let text = serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))?;
    write(&cfg.out.join(name), &(text + "\n"))?;
    Ok(v)
}

/// Runs the configured experiment and returns the main report.
pub fn run(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("{}: {e}", cfg.out.display())))?;
    write(&cfg.out.join("config.txt"), &cfg.canonical())?;
    if cfg.kind == Kind::Linearize {
        return linearize(cfg);
    }
    let (u, report) = solve(cfg)?;
    let solve_json = write_json(cfg, "solve_report.json", &report)?;
    match cfg.kind {
        Kind::Solve => Ok(solve_json),
        Kind::Frequency => frequency(cfg, &u),
        Kind::Doubling => doubling(cfg, &u),
        Kind::Verify => verify(cfg, &u, &report),
        Kind::Probes => probes(cfg, &u),
        Kind::Linearize => unreachable!(),
    }
}

fn solve(cfg: &ExperimentConfig) -> Result<(ScalarField, SolveReport), CliError> {
    let mesh = Arc::new(build_mesh_jittered(cfg.domain, cfg.h, cfg.seed)?);
    write(&cfg.out.join("mesh.txt"), &mesh.to_text())?;
    let boundary = cfg.boundary()?;
    let (u, report) = picard_solve(&mesh, &boundary, cfg.p, &cfg.schedule, &cfg.solver)?;
    write(&cfg.out.join("field.csv"), &u.to_csv())?;
    if !report.converged {
        write_json(cfg, "solve_report.json", &report)?;
        return Err(CliError::NotConverged(format!(
            "weak residual {:.3e} after {} iterations",
            report.residual, report.iterations
        )));
    }
    Ok((u, report))
}

fn quadrature(cfg: &ExperimentConfig) -> Quadrature {
    Quadrature::new(cfg.ball_center, cfg.n_theta)
}

fn radii(cfg: &ExperimentConfig) -> Vec<f64> {
    radius_grid(cfg.r_b, cfg.r_big, cfg.grid)
}

fn profile(cfg: &ExperimentConfig, u: &ScalarField) -> Result<FrequencyProfile, CliError> {
    let prof = frequency_profile(u, &quadrature(cfg), cfg.p, cfg.r_b, &radii(cfg))?;
    write(&cfg.out.join("profile.csv"), &prof.to_csv())?;
    if !cfg.plot.is_empty() {
        emit_plot(&prof, &cfg.plot, &cfg.out.join("profile.svg"))?;
    }
    Ok(prof)
}

fn frequency(cfg: &ExperimentConfig, u: &ScalarField) -> Result<Value, CliError> {
    let prof = profile(cfg, u)?;
    let undefined: Vec<f64> = prof.radii.iter().zip(&prof.f).filter(|(_, f)| f.is_none()).map(|(r, _)| *r).collect();
    write_json(
        cfg,
        "frequency_report.json",
        json!({
            "p": prof.p,
            "center": prof.center,
            "r_b": prof.r_b,
            "R_b": cfg.r_big,
            "M": prof.m,
            "radii": prof.len(),
            "undefined_radii": undefined,
        }),
    )
}

fn doubling(cfg: &ExperimentConfig, u: &ScalarField) -> Result<Value, CliError> {
    let prof = profile(cfg, u)?;
    let rep = doubling_scan(&prof)?;
    // re-evaluate both window conditions on every pair of the reported window
    let window: Vec<f64> = prof.radii.iter().cloned().filter(|r| *r <= rep.r0).collect();
    let mut worst = (0.0_f64, 0.0_f64);
    for (j, &r) in window.iter().enumerate() {
        for &s in &window[j..] {
            let (a, b) = window_terms(rep.p, rep.eps0, r, s);
            worst = (worst.0.max(a), worst.1.max(b));
        }
    }
    let v = write_json(cfg, "doubling_report.json", &rep)?;
    if !rep.pass {
        return Err(CliError::Invariant(format!("doubling ratio {:.4} exceeds 4", rep.max_ratio)));
    }
    if worst.0 > 0.25 || worst.1 > 0.25 {
        return Err(CliError::Invariant(format!("window conditions reach {worst:?} on (r_b, r0]")));
    }
    Ok(v)
}

#[derive(Serialize)]
struct RadiusChecks {
    r: f64,
    identity_left: f64,
    identity_right: f64,
    identity_residual: f64,
    i_prime: f64,
    i_prime_fd: Option<f64>,
    i_prime_bound_rhs: f64,
    i_prime_bound_holds: bool,
    grad_lhs: f64,
    grad_rhs: f64,
    grad_holds: bool,
}

fn verify(cfg: &ExperimentConfig, u: &ScalarField, report: &SolveReport) -> Result<Value, CliError> {
    let q = quadrature(cfg);
    let grid = radii(cfg);
    let step = grid[1] - grid[0];
    let ident = energy_identity_report(u, &q, cfg.p, &grid)?;
    let mut rows = Vec::new();
    for (k, row) in ident.rows.iter().enumerate() {
        let r = row.r;
        let bound = i_prime_bound_check(u, &q, cfg.p, r)?;
        let grad = grad_estimate_check(u, &q, cfg.p, r)?;
        let fd = if k + 1 < grid.len() && r - step > 0.0 {
            Some(i_prime_finite_difference(u, &q, cfg.p, r, step)?)
        } else {
            None
        };
        rows.push(RadiusChecks {
            r,
            identity_left: row.left,
            identity_right: row.right,
            identity_residual: row.residual,
            i_prime: i_prime_formula(u, &q, cfg.p, r)?,
            i_prime_fd: fd,
            i_prime_bound_rhs: bound.rhs,
            i_prime_bound_holds: bound.holds,
            grad_lhs: grad.lhs,
            grad_rhs: grad.rhs,
            grad_holds: grad.holds,
        });
    }

    let mesh = u.mesh();
    let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in mesh.boundary_vertices() {
        bmin = bmin.min(u.values()[v]);
        bmax = bmax.max(u.values()[v]);
    }
    let (umin, umax) = u.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let slack = 1e-8 * (1.0 + bmin.abs().max(bmax.abs()));
    let max_principle = umin >= bmin - slack && umax <= bmax + slack;

    let nodal_error = match cfg.boundary()? {
        BoundaryData::Exact(sol) if sol.admits(cfg.p) => {
            let mut e = 0.0_f64;
            for (x, v) in mesh.vertices().iter().zip(u.values()) {
                e = e.max((sol.eval(*x)? - v).abs());
            }
            Some(e)
        }
        _ => None,
    };

    let bound_ok = rows.iter().all(|r| r.i_prime_bound_holds);
    let grad_ok = rows.iter().all(|r| r.grad_holds);
    let v = write_json(
        cfg,
        "verify_report.json",
        json!({
            "p": cfg.p,
            "weak_residual": report.residual,
            "max_energy_increase": report.max_energy_increase(),
            "maximum_principle": max_principle,
            "max_nodal_error": nodal_error,
            "identity_worst": ident.worst,
            "i_prime_bound_holds": bound_ok,
            "grad_estimate_holds": grad_ok,
            "radii": rows,
        }),
    )?;
    let mut failed = Vec::new();
    if !bound_ok {
        failed.push("I' bound");
    }
    if !grad_ok {
        failed.push("gradient estimate");
    }
    if !max_principle {
        failed.push("maximum principle");
    }
    if failed.is_empty() {
        Ok(v)
    } else {
        Err(CliError::Invariant(failed.join(", ")))
    }
}

#[derive(Serialize)]
struct ProbeRow {
    r: f64,
    a1: Option<f64>,
    a2: Option<f64>,
    gamma_hat: Option<f64>,
    c_hat: Option<f64>,
    caccioppoli: Option<f64>,
}

fn probes(cfg: &ExperimentConfig, u: &ScalarField) -> Result<Value, CliError> {
    let q = quadrature(cfg);
    let grid = radii(cfg);
    let scale = 1.0 + u.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-10 * scale;
    let mut rows = Vec::new();
    for &r in &grid {
        let cond = condition_probes(u, &q, cfg.p, r).ok();
        let poin = poincare_probe(u, &q, cfg.p, r, zero_tol).ok();
        let cacc = if r < cfg.r_big { caccioppoli_ratio(u, &q, cfg.p, r, cfg.r_big).ok() } else { None };
        rows.push(ProbeRow {
            r,
            a1: cond.map(|c| c.a1),
            a2: cond.map(|c| c.a2),
            gamma_hat: poin.map(|p| p.gamma_hat),
            c_hat: poin.map(|p| p.c_hat),
            caccioppoli: cacc,
        });
    }
    let vanishing = vanishing_radius(u, &q, &grid, zero_tol)?;
    let convexity = if cfg.p == 2.0 { Some(convexity_probe(u, &q, &grid)?) } else { None };
    let convex_ok = convexity.as_ref().is_none_or(|c| c.all_hold());
    let v = write_json(
        cfg,
        "probes_report.json",
        json!({
            "p": cfg.p,
            "vanishing_radius": vanishing,
            "convexity_holds": convexity.as_ref().map(|c| c.all_hold()),
            "convexity": convexity,
            "radii": rows,
        }),
    )?;
    if convex_ok {
        Ok(v)
    } else {
        Err(CliError::Invariant("convexity probe failed for a harmonic field".into()))
    }
}

/// Uniform samples in the configured domain, kept away from singular points.
fn sample_points(cfg: &ExperimentConfig, field: &ExactSolution) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.domain;
    let mut out = Vec::with_capacity(cfg.samples);
    while out.len() < cfg.samples {
        let x = [
            d.center[0] + d.r_outer * rng.random_range(-1.0..1.0),
            d.center[1] + d.r_outer * rng.random_range(-1.0..1.0),
        ];
        let rho = (x[0] - d.center[0]).hypot(x[1] - d.center[1]);
        if rho > d.r_outer || (d.kind == DomainKind::Annulus && rho < d.r_inner) {
            continue;
        }
        if let ExactSolution::RadialFundamental { center, .. } = field {
            if (x[0] - center[0]).hypot(x[1] - center[1]) < 1e-2 * d.r_outer {
                continue;
            }
        }
        out.push(x);
    }
    out
}

fn linearize(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let u = ExactSolution::from_id(&cfg.field, cfg.p)?;
    if !u.admits(cfg.p) {
        return Err(CliError::Config(format!("{} does not solve the p-Laplace equation for p = {}", u.id(), cfg.p)));
    }
    let (lambda_min, lambda_max) = ellipticity_bounds(cfg.alpha, cfg.p)?;
    let l = ExactSolution::affine(cfg.alpha, 0.0);
    let pts = sample_points(cfg, &u);
    let rep = residual_affine_linearization(&u, &l, cfg.p, &pts)?;
    let two = residual_two_solution(&u, &l, cfg.p, &pts)?;
    let mut scale = 1.0_f64;
    for x in &pts {
        let g = C2Field::gradient(&u, *x)?;
        let h = C2Field::hessian(&u, *x)?;
        let hn = h.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        let gg = g[0] * g[0] + g[1] * g[1] + cfg.alpha[0] * cfg.alpha[0] + cfg.alpha[1] * cfg.alpha[1];
        scale = scale.max(gg * hn * (1.0 + (cfg.p - 2.0).abs()));
    }
    let tol = 1e-9 * scale;
    let v = write_json(
        cfg,
        "linearize_report.json",
        json!({
            "p": cfg.p,
            "field": u.id(),
            "alpha": cfg.alpha,
            "lambda_min": lambda_min,
            "lambda_max": lambda_max,
            "max_residual": rep.max_residual,
            "flagged_points": rep.flagged_points,
            "evaluated": rep.evaluated,
            "two_solution_residual": two.max_residual,
            "tolerance": tol,
        }),
    )?;
    if rep.max_residual > tol || two.max_residual > tol {
        return Err(CliError::Invariant(format!(
            "linearized residual {:.3e} / two-solution residual {:.3e} above {tol:.3e}",
            rep.max_residual, two.max_residual
        )));
    }
    Ok(v)
}

/// Catalog members with their admissible exponents.
pub fn catalog() -> Value {
    json!([
        {"id": "affine:l1,l2[,l0]", "field": "l . x + l0", "admits": "every p > 1"},
        {"id": "harmpoly:k", "field": "Re((x + iy)^k), k >= 1", "admits": "p = 2"},
        {"id": "radial[:q[,cx,cy]]", "field": "|x - c|^((q - 2)/(q - 1)), log|x - c| for q = 2", "admits": "p = q (default q = p)"},
        {"id": "const:c", "field": "c", "admits": "every p > 1"},
        {"id": "csv:PATH", "field": "boundary values from a `vertex,value` file", "admits": "boundary data only"},
    ])
}
