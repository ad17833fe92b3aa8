//! Discrete p-harmonic functions by regularized energy minimization.
//!
//! For `eps > 0` the energy `E_eps(u) = sum_T |T| (|grad u_T|^2 + eps)^{p/2}`
//! is smooth and uniformly convex on P1 fields with fixed boundary values.
//! Each Kačanov step freezes the weights `w_T = (|grad u_T|^2 + eps)^{p/2-1}`,
//! solves the weighted Laplace problem for a correction, and then moves along
//! that correction to the minimizer of `E_eps` on the line. The correction is
//! always a descent direction, so `E_eps` never increases. `eps` is reduced
//! geometrically until the unregularized weak residual meets the tolerance.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::dot;
use crate::mesh::{ScalarField, TriMesh};
use crate::sparse::{pcg, CsrMatrix};
use crate::ExactSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularizationSchedule {
    pub eps0: f64,
    pub factor: f64,
    pub eps_min: f64,
}

impl Default for RegularizationSchedule {
    fn default() -> Self {
        Self { eps0: 1e-1, factor: 1e-1, eps_min: 1e-8 }
    }
}

impl RegularizationSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eps0 > 0.0
            && self.eps0 < 1.0
            && self.factor > 0.0
            && self.factor < 1.0
            && self.eps_min > 0.0
            && self.eps_min <= self.eps0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "schedule needs 0 < eps_min <= eps0 < 1 and 0 < factor < 1, got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Relative energy decrease that ends an intermediate stage.
    pub picard_tol: f64,
    pub residual_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub linear_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { picard_tol: 1e-10, residual_tol: 1e-8, max_outer: 20, max_inner: 200, linear_tol: 1e-12 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.picard_tol, self.residual_tol, self.linear_tol];
        if tols.iter().all(|t| *t > 0.0 && t.is_finite()) && self.max_outer >= 1 && self.max_inner >= 1 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid solver config {self:?}")))
        }
    }
}

/// Dirichlet data: a catalog solution, or explicit values on boundary vertices.
#[derive(Debug, Clone)]
pub enum BoundaryData {
    Exact(ExactSolution),
    Values(BTreeMap<usize, f64>),
}

impl BoundaryData {
    /// Parses `vertex,value` rows (with that header) keyed by vertex index.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some("vertex,value") => {}
            other => return Err(Error::Parse(format!("expected `vertex,value` header, found {other:?}"))),
        }
        let mut map = BTreeMap::new();
        for line in lines {
            let (v, x) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("malformed row `{line}`")))?;
            let v: usize = v.trim().parse().map_err(|_| Error::Parse(format!("bad vertex in `{line}`")))?;
            let x: f64 = x.trim().parse().map_err(|_| Error::Parse(format!("bad value in `{line}`")))?;
            map.insert(v, x);
        }
        Ok(Self::Values(map))
    }

    /// Nodal trace on the boundary vertices of `mesh`.
    pub fn trace(&self, mesh: &TriMesh) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        for v in mesh.boundary_vertices() {
            let x = match self {
                Self::Exact(sol) => sol.eval(mesh.vertices()[v])?,
                Self::Values(map) => *map.get(&v).ok_or_else(|| {
                    Error::InvalidParameter(format!("no boundary value for vertex {v}"))
                })?,
            };
            if !x.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite boundary value at vertex {v}")));
            }
            out.push((v, x));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub eps: f64,
    /// `E_eps` before the first step and after every step.
    pub energies: Vec<f64>,
    pub iterations: usize,
    /// Regularized weak residual at the end of the stage.
    pub residual: f64,
    pub step_lengths: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub p: f64,
    pub eps_stages: Vec<StageReport>,
    /// Final p-Dirichlet energy `sum_T |T| |grad u_T|^p`.
    pub energy: f64,
    /// Final unregularized weak residual ([`weak_residual_norm`]).
    pub residual: f64,
    pub iterations: usize,
    pub linear_iterations: usize,
    pub converged: bool,
    pub diagnostics: Vec<String>,
}

impl SolveReport {
    /// Largest relative energy increase between consecutive iterates of any stage.
    pub fn max_energy_increase(&self) -> f64 {
        self.eps_stages
            .iter()
            .flat_map(|s| s.energies.windows(2).map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE)))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[inline]
fn weight(g: [f64; 2], p: f64, eps: f64) -> f64 {
    (dot(g, g) + eps).powf(0.5 * p - 1.0)
}

/// `sum_T |T| (|grad psi_T|^2 + eps)^{p/2}`.
pub fn regularized_energy(field: &ScalarField, p: f64, eps: f64) -> f64 {
    let mesh = field.mesh();
    mesh.geometry()
        .iter()
        .enumerate()
        .map(|(t, geo)| {
            let g = field.gradient_unchecked(t);
            geo.area * (dot(g, g) + eps).powf(0.5 * p)
        })
        .sum()
}

/// `sum_T |T| |grad psi_T|^p`.
pub fn dirichlet_energy(field: &ScalarField, p: f64) -> f64 {
    regularized_energy(field, p, 0.0)
}

/// Interior-node numbering and the stiffness sparsity pattern on it.
#[derive(Debug, Clone)]
struct Layout {
    dof_of_vertex: Vec<Option<usize>>,
    dofs: Vec<usize>,
    pattern: CsrMatrix,
}

impl Layout {
    fn new(mesh: &TriMesh) -> Self {
        let mut dof_of_vertex = vec![None; mesh.n_vertices()];
        let mut dofs = Vec::new();
        for (v, f) in mesh.flags().iter().enumerate() {
            if !f.is_boundary() {
                dof_of_vertex[v] = Some(dofs.len());
                dofs.push(v);
            }
        }
        let mut rows = vec![Vec::new(); dofs.len()];
        for tri in mesh.triangles() {
            for &a in tri {
                if let Some(i) = dof_of_vertex[a] {
                    rows[i].extend(tri.iter().filter_map(|&b| dof_of_vertex[b]));
                }
            }
        }
        Self { dof_of_vertex, dofs, pattern: CsrMatrix::with_pattern(rows) }
    }
}

fn element_weights(field: &ScalarField, p: f64, eps: f64) -> Result<Vec<f64>> {
    (0..field.mesh().n_triangles())
        .map(|t| {
            let w = weight(field.gradient_unchecked(t), p, eps);
            if w.is_finite() {
                Ok(w)
            } else {
                Err(Error::NonFiniteWeight { element: t, value: w })
            }
        })
        .collect()
}

fn fill_matrix(layout: &mut Layout, mesh: &TriMesh, weights: &[f64]) {
    let a = &mut layout.pattern;
    a.clear();
    for ((tri, geo), w) in mesh.triangles().iter().zip(mesh.geometry()).zip(weights) {
        for (ka, &va) in tri.iter().enumerate() {
            let Some(i) = layout.dof_of_vertex[va] else { continue };
            for (kb, &vb) in tri.iter().enumerate() {
                if let Some(j) = layout.dof_of_vertex[vb] {
                    a.add(i, j, w * geo.area * dot(geo.grad_basis[ka], geo.grad_basis[kb]));
                }
            }
        }
    }
}

/// Nodal flux integrals `sum_T |T| flux_T . grad phi_i` on interior nodes, and
/// the normalization `max_i sum_T |T| |flux_T| |grad phi_i|`.
fn flux_residual(field: &ScalarField, layout: &Layout, flux: impl Fn([f64; 2]) -> [f64; 2]) -> (Vec<f64>, f64) {
    let mesh = field.mesh();
    let n = layout.dofs.len();
    let mut r = vec![0.0; n];
    let mut s = vec![0.0; n];
    for (t, (tri, geo)) in mesh.triangles().iter().zip(mesh.geometry()).enumerate() {
        let f = flux(field.gradient_unchecked(t));
        let fnorm = f[0].hypot(f[1]);
        for (k, &v) in tri.iter().enumerate() {
            if let Some(i) = layout.dof_of_vertex[v] {
                let gb = geo.grad_basis[k];
                r[i] += geo.area * dot(f, gb);
                s[i] += geo.area * fnorm * gb[0].hypot(gb[1]);
            }
        }
    }
    (r, s.into_iter().fold(0.0, f64::max))
}

fn normalized(r: &[f64], scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    r.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale
}

/// Degenerate flux convention: `|g|^{p-2} g` is taken as 0 where `g = 0`.
#[inline]
fn p_flux(g: [f64; 2], p: f64) -> [f64; 2] {
    let n2 = dot(g, g);
    if n2 == 0.0 {
        return [0.0, 0.0];
    }
    let w = n2.powf(0.5 * p - 1.0);
    [w * g[0], w * g[1]]
}

/// Discrete residual of `int |grad u|^{p-2} grad u . grad eta = 0` tested with
/// every interior hat function, as a max-norm relative to the largest nodal
/// sum of absolute flux contributions.
pub fn weak_residual_norm(field: &ScalarField, p: f64) -> f64 {
    let layout = Layout::new(field.mesh());
    let (r, scale) = flux_residual(field, &layout, |g| p_flux(g, p));
    normalized(&r, scale)
}

/// Same as [`weak_residual_norm`] for the regularized flux `(|g|^2 + eps)^{p/2-1} g`.
pub fn regularized_residual_norm(field: &ScalarField, p: f64, eps: f64) -> f64 {
    let layout = Layout::new(field.mesh());
    let (r, scale) = flux_residual(field, &layout, |g| {
        let w = weight(g, p, eps);
        [w * g[0], w * g[1]]
    });
    normalized(&r, scale)
}

/// Frozen-coefficient system on the interior nodes with Dirichlet values
/// eliminated into `rhs`.
#[derive(Debug, Clone)]
pub struct WeightedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Mesh vertex of each unknown.
    pub dofs: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Assembles `sum_T w_T |T| grad phi_i . grad phi_j` with
/// `w_T = (|grad u_T|^2 + eps)^{p/2-1}` frozen at `field`.
pub fn assemble_weighted_stiffness(field: &ScalarField, p: f64, eps: f64) -> Result<WeightedSystem> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be non-negative, got {eps}")));
    }
    let mesh = field.mesh();
    let mut layout = Layout::new(mesh);
    let weights = element_weights(field, p, eps)?;
    fill_matrix(&mut layout, mesh, &weights);
    let mut rhs = vec![0.0; layout.dofs.len()];
    let u = field.values();
    for ((tri, geo), w) in mesh.triangles().iter().zip(mesh.geometry()).zip(&weights) {
        for (ka, &va) in tri.iter().enumerate() {
            let Some(i) = layout.dof_of_vertex[va] else { continue };
            for (kb, &vb) in tri.iter().enumerate() {
                if layout.dof_of_vertex[vb].is_none() {
                    rhs[i] -= w * geo.area * dot(geo.grad_basis[ka], geo.grad_basis[kb]) * u[vb];
                }
            }
        }
    }
    Ok(WeightedSystem { matrix: layout.pattern, rhs, dofs: layout.dofs, weights })
}

fn initial_field(mesh: &Arc<TriMesh>, boundary: &BoundaryData) -> Result<(ScalarField, Vec<(usize, f64)>)> {
    let trace = boundary.trace(mesh)?;
    let mut u = ScalarField::zeros(mesh.clone());
    for &(v, x) in &trace {
        u.values_mut()[v] = x;
    }
    Ok((u, trace))
}

struct Workspace {
    layout: Layout,
    linear_tol: f64,
    linear_iterations: usize,
}

impl Workspace {
    /// Kačanov correction: solves `A(w) d = -grad E / p` on interior nodes.
    fn correction(&mut self, u: &ScalarField, weights: &[f64], residual: &[f64]) -> Result<Vec<f64>> {
        fill_matrix(&mut self.layout, u.mesh(), weights);
        let b: Vec<f64> = residual.iter().map(|r| -r).collect();
        let mut d = vec![0.0; b.len()];
        let max_iter = 20 * b.len().max(10);
        let out = pcg(&self.layout.pattern, &b, &mut d, self.linear_tol, max_iter)?;
        self.linear_iterations += out.iterations;
        Ok(d)
    }
}

/// Solves the Laplace problem with one unit-weight correction from the
/// boundary-lifted zero field.
pub fn laplace_solve(mesh: &Arc<TriMesh>, boundary: &BoundaryData, cfg: &SolverConfig) -> Result<ScalarField> {
    let (mut u, _) = initial_field(mesh, boundary)?;
    let mut ws = Workspace { layout: Layout::new(mesh), linear_tol: cfg.linear_tol, linear_iterations: 0 };
    let weights = vec![1.0; mesh.n_triangles()];
    let (r, _) = flux_residual(&u, &ws.layout, |g| g);
    let d = ws.correction(&u, &weights, &r)?;
    apply(&mut u, &ws.layout, &d, 1.0);
    Ok(u)
}

fn apply(u: &mut ScalarField, layout: &Layout, d: &[f64], step: f64) {
    let vals = u.values_mut();
    for (i, &v) in layout.dofs.iter().enumerate() {
        vals[v] += step * d[i];
    }
}

/// Restriction of `E_eps` to the line `u + s d`, with first and second derivatives.
struct LineEnergy {
    terms: Vec<(f64, [f64; 2], [f64; 2])>,
    p: f64,
    eps: f64,
}

impl LineEnergy {
    fn new(u: &ScalarField, layout: &Layout, d: &[f64], p: f64, eps: f64) -> Self {
        let mesh = u.mesh();
        let terms = mesh
            .triangles()
            .iter()
            .zip(mesh.geometry())
            .enumerate()
            .map(|(t, (tri, geo))| {
                let mut dg = [0.0; 2];
                for (k, &v) in tri.iter().enumerate() {
                    if let Some(i) = layout.dof_of_vertex[v] {
                        dg[0] += d[i] * geo.grad_basis[k][0];
                        dg[1] += d[i] * geo.grad_basis[k][1];
                    }
                }
                (geo.area, u.gradient_unchecked(t), dg)
            })
            .collect();
        Self { terms, p, eps }
    }

    fn derivatives(&self, s: f64) -> (f64, f64) {
        let (p, eps) = (self.p, self.eps);
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for &(area, g, dg) in &self.terms {
            let gs = [g[0] + s * dg[0], g[1] + s * dg[1]];
            let q = dot(gs, gs) + eps;
            let gd = dot(gs, dg);
            let w = q.powf(0.5 * p - 1.0);
            d1 += area * p * w * gd;
            d2 += area * p * (w * dot(dg, dg) + (p - 2.0) * w / q * gd * gd);
        }
        (d1, d2)
    }

    /// Minimizer of the convex line energy; 0 when `d` is not a descent direction.
    fn minimize(&self) -> f64 {
        let (d0, _) = self.derivatives(0.0);
        if !(d0 < 0.0) {
            return 0.0;
        }
        let (d_one, _) = self.derivatives(1.0);
        if d_one.abs() <= 1e-3 * d0.abs() {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        if d_one < 0.0 {
            lo = 1.0;
            hi = 2.0;
            while self.derivatives(hi).0 < 0.0 && hi < 1e6 {
                lo = hi;
                hi *= 2.0;
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..100 {
            let (f1, f2) = self.derivatives(s);
            if f1.abs() <= 1e-12 * d0.abs() {
                break;
            }
            if f1 < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let newton = s - f1 / f2;
            s = if f2 > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        s
    }
}

/// Minimizes the regularized p-Dirichlet energy with boundary data fixed,
/// continuing `eps` from `schedule.eps0` down to `schedule.eps_min` and beyond
/// (by the same factor, within `cfg.max_outer` stages) until the
/// unregularized weak residual drops below `cfg.residual_tol`.
///
/// Non-convergence is reported through `SolveReport::converged`, never by a
/// silently truncated field.
pub fn picard_solve(
    mesh: &Arc<TriMesh>,
    boundary: &BoundaryData,
    p: f64,
    schedule: &RegularizationSchedule,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")));
    }
    schedule.validate()?;
    cfg.validate()?;

    let (mut u, _) = initial_field(mesh, boundary)?;
    let mut ws = Workspace { layout: Layout::new(mesh), linear_tol: cfg.linear_tol, linear_iterations: 0 };
    let mut diagnostics = Vec::new();

    if p != 2.0 {
        // harmonic extension as the starting iterate
        let (r, _) = flux_residual(&u, &ws.layout, |g| g);
        let d = ws.correction(&u, &vec![1.0; mesh.n_triangles()], &r)?;
        apply(&mut u, &ws.layout, &d, 1.0);
    }

    let mut stages = Vec::new();
    let mut eps = schedule.eps0;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    loop {
        let final_stage = p == 2.0 || eps <= schedule.eps_min * (1.0 + 1e-12);
        let target = if final_stage { cfg.residual_tol } else { cfg.residual_tol.sqrt().max(cfg.residual_tol) };
        let stage = run_stage(&mut u, &mut ws, p, eps, target, final_stage, cfg, &mut diagnostics)?;
        iterations += stage.iterations;
        stages.push(stage);
        if final_stage {
            residual = weak_residual_norm(&u, p);
            if residual <= cfg.residual_tol {
                break;
            }
            if p == 2.0 {
                diagnostics.push("linear solve did not reach residual_tol".into());
                break;
            }
        }
        if stages.len() >= cfg.max_outer {
            diagnostics.push(format!(
                "continuation budget exhausted after {} stages at eps = {eps:.3e}",
                stages.len()
            ));
            break;
        }
        eps = if final_stage { eps * schedule.factor } else { (eps * schedule.factor).max(schedule.eps_min) };
    }

    let report = SolveReport {
        p,
        energy: dirichlet_energy(&u, p),
        residual,
        iterations,
        linear_iterations: ws.linear_iterations,
        converged: residual <= cfg.residual_tol,
        eps_stages: stages,
        diagnostics,
    };
    Ok((u, report))
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    u: &mut ScalarField,
    ws: &mut Workspace,
    p: f64,
    eps: f64,
    target: f64,
    final_stage: bool,
    cfg: &SolverConfig,
    diagnostics: &mut Vec<String>,
) -> Result<StageReport> {
    let mut energies = vec![regularized_energy(u, p, eps)];
    let mut steps = Vec::new();
    let mut residual;
    let mut it = 0;
    loop {
        let weights = element_weights(u, p, eps)?;
        let (r, scale) = flux_residual(u, &ws.layout, |g| {
            let w = weight(g, p, eps);
            [w * g[0], w * g[1]]
        });
        residual = normalized(&r, scale);
        if residual <= target {
            break;
        }
        if it == cfg.max_inner {
            diagnostics.push(format!("eps = {eps:.3e}: inner budget exhausted at residual {residual:.3e}"));
            break;
        }
        let d = ws.correction(u, &weights, &r)?;
        let step = LineEnergy::new(u, &ws.layout, &d, p, eps).minimize();
        it += 1;
        if step == 0.0 {
            diagnostics.push(format!("eps = {eps:.3e}: correction is not a descent direction"));
            break;
        }
        apply(u, &ws.layout, &d, step);
        steps.push(step);
        let e = regularized_energy(u, p, eps);
        let prev = *energies.last().unwrap();
        energies.push(e);
        if !final_stage && (prev - e) <= cfg.picard_tol * prev.abs() {
            break;
        }
    }
    Ok(StageReport { eps, energies, iterations: it, residual, step_lengths: steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};
    use std::f64::consts::PI;

    fn disc(h: f64) -> Arc<TriMesh> {
        Arc::new(build_mesh(Domain::disc([0.0, 0.0], 1.0).unwrap(), h).unwrap())
    }

    #[test]
    fn energy_examples() {
        let m = disc(0.02);
        let z = ScalarField::zeros(m.clone());
        assert_eq!(regularized_energy(&z, 3.0, 0.0), 0.0);
        let area = m.total_area();
        assert!((regularized_energy(&z, 3.0, 1.0) - area).abs() < 1e-12);
        assert!((area - PI).abs() < 0.005 * PI);
        let x = ScalarField::from_fn(m.clone(), |x| x[0]).unwrap();
        assert!((regularized_energy(&x, 3.0, 0.0) - PI).abs() < 0.005 * PI);
    }

    #[test]
    fn energy_is_monotone_in_eps() {
        let m = disc(0.1);
        let f = ScalarField::from_fn(m, |x| (2.0 * x[0]).sin() + x[1] * x[1]).unwrap();
        for p in [1.3, 2.0, 4.5] {
            let mut prev = dirichlet_energy(&f, p);
            for eps in [1e-6, 1e-3, 0.1, 1.0] {
                let e = regularized_energy(&f, p, eps);
                assert!(e >= prev, "p={p} eps={eps}");
                prev = e;
            }
        }
    }

    #[test]
    fn stiffness_weights_examples() {
        let m = disc(0.2);
        let f = ScalarField::from_fn(m.clone(), |x| x[0] * x[1] + x[0]).unwrap();
        let lap = assemble_weighted_stiffness(&f, 2.0, 0.37).unwrap();
        assert!(lap.weights.iter().all(|&w| w == 1.0));
        assert!(lap.matrix.is_symmetric(1e-14));

        let z = ScalarField::zeros(m.clone());
        let s = assemble_weighted_stiffness(&z, 4.0, 0.01).unwrap();
        assert!(s.weights.iter().all(|&w| (w - 0.01).abs() < 1e-15));
        let lz = assemble_weighted_stiffness(&z, 2.0, 0.0).unwrap();
        for (a, b) in s.matrix.values().iter().zip(lz.matrix.values()) {
            assert!((a - 0.01 * b).abs() <= 1e-15 * b.abs().max(1.0));
        }

        let x = ScalarField::from_fn(m, |x| x[0]).unwrap();
        let w = assemble_weighted_stiffness(&x, 3.0, 0.0).unwrap();
        assert!(w.weights.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn degenerate_weight_is_rejected() {
        let m = disc(0.25);
        let z = ScalarField::zeros(m);
        assert!(matches!(
            assemble_weighted_stiffness(&z, 1.5, 0.0),
            Err(Error::NonFiniteWeight { element: 0, .. })
        ));
        assert!(assemble_weighted_stiffness(&z, 1.5, -1.0).is_err());
    }

    #[test]
    fn weak_residual_examples() {
        let m = disc(0.1);
        assert_eq!(weak_residual_norm(&ScalarField::zeros(m.clone()), 1.5), 0.0);
        let a = ScalarField::from_fn(m.clone(), |x| 2.0 * x[0] - 0.5 * x[1] + 3.0).unwrap();
        for p in [1.2, 2.0, 3.0, 7.0] {
            assert!(weak_residual_norm(&a, p) <= 1e-12, "p={p}");
        }
        let q = ScalarField::from_fn(m, |x| x[0] * x[0]).unwrap();
        assert!(weak_residual_norm(&q, 2.0) > 1e-3);
    }

    #[test]
    fn zero_boundary_data_gives_zero() {
        let m = disc(0.1);
        let bd = BoundaryData::Exact(ExactSolution::constant(0.0));
        for p in [1.5, 2.0, 3.0] {
            let (u, rep) = picard_solve(&m, &bd, p, &RegularizationSchedule::default(), &SolverConfig::default()).unwrap();
            assert!(u.values().iter().all(|&v| v == 0.0));
            assert!(rep.converged);
            assert_eq!(rep.iterations, 0);
        }
    }

    #[test]
    fn affine_data_is_reproduced() {
        let m = disc(0.1);
        let l = ExactSolution::affine([2.0, 0.0], 1.0);
        let bd = BoundaryData::Exact(l.clone());
        for p in [1.5, 2.0, 3.0, 4.0] {
            let (u, rep) = picard_solve(&m, &bd, p, &RegularizationSchedule::default(), &SolverConfig::default()).unwrap();
            assert!(rep.converged, "p={p}: {rep:?}");
            for (x, v) in m.vertices().iter().zip(u.values()) {
                assert!((v - l.eval(*x).unwrap()).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn p2_matches_laplace_solve_bitwise() {
        let m = disc(0.05);
        let bd = BoundaryData::Exact(ExactSolution::harmonic_polynomial(3).unwrap());
        let cfg = SolverConfig::default();
        let direct = laplace_solve(&m, &bd, &cfg).unwrap();
        let (u, rep) = picard_solve(&m, &bd, 2.0, &RegularizationSchedule::default(), &cfg).unwrap();
        assert_eq!(rep.eps_stages.len(), 1);
        assert_eq!(rep.iterations, 1);
        assert_eq!(u.values(), direct.values());
    }

    #[test]
    fn boundary_csv_parsing() {
        let m = disc(0.5);
        let rows: String = m
            .boundary_vertices()
            .map(|v| format!("{v},{}\n", m.vertices()[v][0]))
            .collect();
        let bd = BoundaryData::from_csv(&format!("vertex,value\n{rows}")).unwrap();
        let tr = bd.trace(&m).unwrap();
        assert_eq!(tr.len(), m.boundary_vertices().count());
        let short = BoundaryData::from_csv("vertex,value\n1,2.0\n").unwrap();
        assert!(short.trace(&m).is_err());
        assert!(BoundaryData::from_csv("v,x\n").is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(RegularizationSchedule { eps0: 1.5, ..Default::default() }.validate().is_err());
        assert!(RegularizationSchedule { factor: 1.0, ..Default::default() }.validate().is_err());
        assert!(RegularizationSchedule { eps_min: 0.5, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_inner: 0, ..Default::default() }.validate().is_err());
    }
}
