//! Polar triangulations of discs and annuli, P1 nodal fields on them, and
//! uniform circle sampling.
//!
//! Meshes are built ring by ring: concentric circles of vertices at uniform
//! radial spacing, consecutive rings stitched together by an angular sweep.
//! Boundary vertices sit exactly on their circles.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{dot, norm, sub, Field, Point};
use crate::quadrature::circle_angles;
use crate::ExactSolution;

/// Smallest number of angles accepted by [`sample_circle`].
pub const MIN_CIRCLE_SAMPLES: usize = 64;

/// Barycentric slack for the containment test that decides edge ties.
const EDGE_TOL: f64 = 1e-12;
/// Barycentric slack for snapping points just outside the polygonal boundary.
const SNAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Disc,
    Annulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain {
    pub kind: DomainKind,
    pub center: Point,
    pub r_outer: f64,
    pub r_inner: f64,
}

impl Domain {
    pub fn disc(center: Point, radius: f64) -> Result<Self> {
        let d = Self { kind: DomainKind::Disc, center, r_outer: radius, r_inner: 0.0 };
        d.validate()?;
        Ok(d)
    }

    pub fn annulus(center: Point, r_inner: f64, r_outer: f64) -> Result<Self> {
        let d = Self { kind: DomainKind::Annulus, center, r_outer, r_inner };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.center.iter().all(|c| c.is_finite())
            && self.r_outer.is_finite()
            && self.r_inner.is_finite();
        if !finite || self.r_outer <= 0.0 {
            return Err(Error::InvalidMesh(format!(
                "degenerate domain: outer radius {}",
                self.r_outer
            )));
        }
        match self.kind {
            DomainKind::Disc if self.r_inner != 0.0 => {
                Err(Error::InvalidMesh("a disc has no inner radius".into()))
            }
            DomainKind::Annulus if !(self.r_inner > 0.0 && self.r_inner < self.r_outer) => {
                Err(Error::InvalidMesh(format!(
                    "annulus radii must satisfy 0 < {} < {}",
                    self.r_inner, self.r_outer
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn width(&self) -> f64 {
        self.r_outer - self.r_inner
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexFlag {
    Interior,
    Outer,
    Inner,
}

impl VertexFlag {
    pub fn is_boundary(self) -> bool {
        self != VertexFlag::Interior
    }

    fn label(self) -> &'static str {
        match self {
            VertexFlag::Interior => "interior",
            VertexFlag::Outer => "outer",
            VertexFlag::Inner => "inner",
        }
    }
}

/// Per-triangle data reused by assembly, gradients and point location.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    /// Gradients of the three hat functions, in local vertex order.
    pub grad_basis: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
struct Locator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl Locator {
    fn build(vertices: &[Point], triangles: &[[usize; 3]], cell: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut loc = Self { origin: lo, cell, nx, ny, start: vec![0; nx * ny + 1], items: Vec::new() };
        let ranges: Vec<_> = triangles
            .iter()
            .map(|t| {
                let xs = t.map(|i| vertices[i][0]);
                let ys = t.map(|i| vertices[i][1]);
                let (i0, j0) = loc.cell_of([xs.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::INFINITY, f64::min)]);
                let (i1, j1) = loc.cell_of([xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)]);
                (i0, j0, i1, j1)
            })
            .collect();
        for &(i0, j0, i1, j1) in &ranges {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.start[j * nx + i + 1] += 1;
                }
            }
        }
        for c in 0..nx * ny {
            loc.start[c + 1] += loc.start[c];
        }
        let mut fill = loc.start.clone();
        loc.items = vec![0; loc.start[nx * ny]];
        // triangles are visited in index order, so every cell list is sorted
        for (t, &(i0, j0, i1, j1)) in ranges.iter().enumerate() {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let c = j * nx + i;
                    loc.items[fill[c]] = t;
                    fill[c] += 1;
                }
            }
        }
        loc
    }

    fn cell_of(&self, x: Point) -> (usize, usize) {
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        (
            clamp(((x[0] - self.origin[0]) / self.cell).floor(), self.nx),
            clamp(((x[1] - self.origin[1]) / self.cell).floor(), self.ny),
        )
    }

    fn cell_items(&self, i: usize, j: usize) -> &[usize] {
        let c = j * self.nx + i;
        &self.items[self.start[c]..self.start[c + 1]]
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    domain: Domain,
    h: f64,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    flags: Vec<VertexFlag>,
    ring_radii: Vec<f64>,
    geometry: Vec<ElementGeometry>,
    locator: Locator,
}

/// Stitches an inner ring to an outer ring with positively oriented triangles.
fn stitch(inner: &[usize], inner_angles: &[f64], outer: &[usize], outer_angles: &[f64], out: &mut Vec<[usize; 3]>) {
    let (na, nb) = (inner.len(), outer.len());
    let angle = |angles: &[f64], i: usize| {
        let n = angles.len();
        angles[i % n] + 2.0 * PI * (i / n) as f64
    };
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        let advance_inner = if i == na {
            false
        } else if j == nb {
            true
        } else {
            angle(inner_angles, i + 1) < angle(outer_angles, j + 1)
        };
        if advance_inner {
            out.push([inner[i % na], outer[j % nb], inner[(i + 1) % na]]);
            i += 1;
        } else {
            out.push([inner[i % na], outer[j % nb], outer[(j + 1) % nb]]);
            j += 1;
        }
    }
}

fn ring(center: Point, r: f64, n: usize) -> (Vec<Point>, Vec<f64>) {
    let angles = circle_angles(n);
    let pts = angles.iter().map(|t| [center[0] + r * t.cos(), center[1] + r * t.sin()]).collect();
    (pts, angles)
}

/// Builds the polar triangulation of `domain` with target edge length `h`.
pub fn build_mesh(domain: Domain, h: f64) -> Result<TriMesh> {
    build_mesh_jittered(domain, h, 0)
}

/// Like [`build_mesh`], with interior vertices perturbed by up to 15% of the
/// ring spacing. Seed 0 means no perturbation.
pub fn build_mesh_jittered(domain: Domain, h: f64, seed: u64) -> Result<TriMesh> {
    domain.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidMesh(format!("edge length must be positive, got {h}")));
    }
    if h > domain.width() / 2.0 {
        return Err(Error::InvalidMesh(format!(
            "edge length {h} too large for radial width {}",
            domain.width()
        )));
    }
    let c = domain.center;
    let n_rings = (domain.width() / h - 1e-9).ceil().max(1.0) as usize;
    let dr = domain.width() / n_rings as f64;

    let mut vertices = Vec::new();
    let mut flags = Vec::new();
    let mut triangles = Vec::new();
    let mut ring_radii = Vec::new();
    let mut prev: Option<(Vec<usize>, Vec<f64>)> = None;

    if domain.kind == DomainKind::Disc {
        vertices.push(c);
        flags.push(VertexFlag::Interior);
        ring_radii.push(0.0);
    }
    let first = if domain.kind == DomainKind::Disc { 1 } else { 0 };
    for i in first..=n_rings {
        let r = domain.r_inner + i as f64 * dr;
        let count = match domain.kind {
            DomainKind::Disc => 6 * i,
            DomainKind::Annulus => ((2.0 * PI * r / dr).round() as usize).max(6),
        };
        let flag = if i == n_rings {
            VertexFlag::Outer
        } else if i == 0 {
            VertexFlag::Inner
        } else {
            VertexFlag::Interior
        };
        let (pts, angles) = ring(c, r, count);
        let ids: Vec<usize> = (vertices.len()..vertices.len() + count).collect();
        vertices.extend(pts);
        flags.extend(std::iter::repeat_n(flag, count));
        ring_radii.push(r);
        match &prev {
            None if domain.kind == DomainKind::Disc => {
                for k in 0..count {
                    triangles.push([0, ids[k], ids[(k + 1) % count]]);
                }
            }
            None => {}
            Some((pids, pangles)) => stitch(pids, pangles, &ids, &angles, &mut triangles),
        }
        prev = Some((ids, angles));
    }

    if seed != 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = 0.15 * dr;
        for (v, f) in vertices.iter_mut().zip(&flags) {
            if *f == VertexFlag::Interior {
                v[0] += amp * (2.0 * rng.random::<f64>() - 1.0);
                v[1] += amp * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
    }

    TriMesh::from_parts(domain, h, vertices, triangles, flags, ring_radii)
}

impl TriMesh {
    fn from_parts(
        domain: Domain,
        h: f64,
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        flags: Vec<VertexFlag>,
        ring_radii: Vec<f64>,
    ) -> Result<Self> {
        let mut geometry = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| vertices[i]);
            let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if area2 <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} has non-positive area")));
            }
            let g = |p: Point, q: Point| [(p[1] - q[1]) / area2, (q[0] - p[0]) / area2];
            geometry.push(ElementGeometry { area: 0.5 * area2, grad_basis: [g(b, c), g(c, a), g(a, b)] });
        }
        let locator = Locator::build(&vertices, &triangles, h);
        Ok(Self { domain, h, vertices, triangles, flags, ring_radii, geometry, locator })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn flags(&self) -> &[VertexFlag] {
        &self.flags
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    /// Radii of the vertex rings, innermost first (0 for the disc center).
    pub fn ring_radii(&self) -> &[f64] {
        &self.ring_radii
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn boundary_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags.iter().enumerate().filter(|(_, f)| f.is_boundary()).map(|(i, _)| i)
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let v0 = self.vertices[self.triangles[t][0]];
        let gb = &self.geometry[t].grad_basis;
        let d = sub(x, v0);
        let l1 = dot(gb[1], d);
        let l2 = dot(gb[2], d);
        [1.0 - l1 - l2, l1, l2]
    }

    /// Containing triangle and barycentric coordinates of `x`.
    ///
    /// Points on shared edges resolve to the lowest triangle index. Points
    /// within the snapping tolerance of the mesh boundary are accepted.
    pub fn locate(&self, x: Point) -> Result<(usize, [f64; 3])> {
        let (ci, cj) = self.locator.cell_of(x);
        for &t in self.locator.cell_items(ci, cj) {
            let l = self.barycentric(t, x);
            if l.iter().all(|&v| v >= -EDGE_TOL) {
                return Ok((t, l));
            }
        }
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for j in cj.saturating_sub(1)..=(cj + 1).min(self.locator.ny - 1) {
            for i in ci.saturating_sub(1)..=(ci + 1).min(self.locator.nx - 1) {
                for &t in self.locator.cell_items(i, j) {
                    let l = self.barycentric(t, x);
                    let m = l.iter().cloned().fold(f64::INFINITY, f64::min);
                    if m >= -SNAP_TOL && best.is_none_or(|(bt, _, bm)| m > bm || (m == bm && t < bt)) {
                        best = Some((t, l, m));
                    }
                }
            }
        }
        best.map(|(t, l, _)| (t, l)).ok_or(Error::OutsideMesh { point: x })
    }

    /// Checks the structural invariants: positive orientation, boundary
    /// vertices on their circles, and edge connectivity.
    pub fn check_invariants(&self) -> Result<()> {
        if self.geometry.iter().any(|g| g.area <= 0.0) {
            return Err(Error::InvalidMesh("non-positive triangle area".into()));
        }
        let tol = self.h * self.h / 8.0;
        for (v, f) in self.vertices.iter().zip(&self.flags) {
            let rho = norm(sub(*v, self.domain.center));
            let off = match f {
                VertexFlag::Outer => (rho - self.domain.r_outer).abs(),
                VertexFlag::Inner => (rho - self.domain.r_inner).abs(),
                VertexFlag::Interior => 0.0,
            };
            if off > tol {
                return Err(Error::InvalidMesh(format!("boundary vertex off its circle by {off}")));
            }
        }
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        if by_edge.values().any(|ts| ts.len() > 2) {
            return Err(Error::InvalidMesh("edge shared by more than two triangles".into()));
        }
        let mut adj = vec![Vec::new(); self.triangles.len()];
        for ts in by_edge.values() {
            if let [a, b] = ts[..] {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut seen = vec![false; self.triangles.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(t) = queue.pop_front() {
            for &s in &adj[t] {
                if !seen[s] {
                    seen[s] = true;
                    queue.push_back(s);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidMesh("mesh is not edge-connected".into()));
        }
        Ok(())
    }

    /// Plain-text export: `v x y flag` lines then `t i j k` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (v, f) in self.vertices.iter().zip(&self.flags) {
            let _ = writeln!(s, "v {:.17e} {:.17e} {}", v[0], v[1], f.label());
        }
        for t in &self.triangles {
            let _ = writeln!(s, "t {} {} {}", t[0], t[1], t[2]);
        }
        s
    }
}

/// Piecewise-linear field given by one value per mesh vertex.
#[derive(Debug, Clone)]
pub struct ScalarField {
    mesh: Arc<TriMesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<TriMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::InvalidParameter(format!(
                "{} nodal values for {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite nodal value at vertex {i}")));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<TriMesh>) -> Self {
        let n = mesh.n_vertices();
        Self { mesh, values: vec![0.0; n] }
    }

    pub fn from_fn(mesh: Arc<TriMesh>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = mesh.vertices().iter().map(|&x| f(x)).collect();
        Self::new(mesh, values)
    }

    /// Nodal interpolant of a catalog solution.
    pub fn from_exact(mesh: Arc<TriMesh>, sol: &ExactSolution) -> Result<Self> {
        let values = mesh.vertices().iter().map(|&x| sol.eval(x)).collect::<Result<Vec<_>>>()?;
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.mesh.clone(), self.values.iter().map(|v| factor * v).collect())
    }

    pub fn interpolate(&self, x: Point) -> Result<f64> {
        let (t, l) = self.mesh.locate(x)?;
        let tri = self.mesh.triangles[t];
        Ok(l[0] * self.values[tri[0]] + l[1] * self.values[tri[1]] + l[2] * self.values[tri[2]])
    }

    pub fn element_gradient(&self, t: usize) -> Result<[f64; 2]> {
        if t >= self.mesh.n_triangles() {
            return Err(Error::InvalidParameter(format!(
                "triangle index {t} out of range ({} triangles)",
                self.mesh.n_triangles()
            )));
        }
        Ok(self.gradient_unchecked(t))
    }

    #[inline]
    pub(crate) fn gradient_unchecked(&self, t: usize) -> [f64; 2] {
        let tri = self.mesh.triangles[t];
        let gb = &self.mesh.geometry[t].grad_basis;
        let mut g = [0.0; 2];
        for k in 0..3 {
            let u = self.values[tri[k]];
            g[0] += u * gb[k][0];
            g[1] += u * gb[k][1];
        }
        g
    }

    pub fn sample_circle(&self, center: Point, r: f64, n_theta: usize) -> Result<CircleSample> {
        sample_circle(self, center, r, n_theta)
    }

    /// One value per line under a `value` header, in vertex order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("value\n");
        for v in &self.values {
            let _ = writeln!(s, "{v:.16e}");
        }
        s
    }

    pub fn from_csv(mesh: Arc<TriMesh>, text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some("value") => {}
            other => return Err(Error::Parse(format!("expected `value` header, found {other:?}"))),
        }
        let values = lines
            .map(|l| l.parse::<f64>().map_err(|e| Error::Parse(format!("{l}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mesh, values)
    }
}

impl Field for ScalarField {
    fn value(&self, x: Point) -> Result<f64> {
        self.interpolate(x)
    }

    fn gradient(&self, x: Point) -> Result<[f64; 2]> {
        let (t, _) = self.mesh.locate(x)?;
        Ok(self.gradient_unchecked(t))
    }

    fn value_and_gradient(&self, x: Point) -> Result<(f64, [f64; 2])> {
        let (t, l) = self.mesh.locate(x)?;
        let tri = self.mesh.triangles[t];
        let u = l[0] * self.values[tri[0]] + l[1] * self.values[tri[1]] + l[2] * self.values[tri[2]];
        Ok((u, self.gradient_unchecked(t)))
    }

    fn resolution(&self) -> Option<f64> {
        Some(self.mesh.h)
    }

    fn nodal_max_abs(&self) -> Option<f64> {
        Some(self.values.iter().fold(0.0, |m, v| m.max(v.abs())))
    }
}

/// Samples of `u`, `grad u` and `u_nu = grad u . nu` on a circle.
#[derive(Debug, Clone, Serialize)]
pub struct CircleSample {
    pub center: Point,
    pub r: f64,
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
    pub u_nu: Vec<f64>,
}

impl CircleSample {
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.theta
            .iter()
            .map(|t| [self.center[0] + self.r * t.cos(), self.center[1] + self.r * t.sin()])
    }
}

/// Samples `field` at `theta_j = 2 pi j / n_theta` on the circle `|x - center| = r`.
pub fn sample_circle<F: Field + ?Sized>(field: &F, center: Point, r: f64, n_theta: usize) -> Result<CircleSample> {
    if n_theta < MIN_CIRCLE_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "circle sampling needs at least {MIN_CIRCLE_SAMPLES} angles, got {n_theta}"
        )));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("circle radius must be positive, got {r}")));
    }
    let theta = circle_angles(n_theta);
    let mut u = Vec::with_capacity(n_theta);
    let mut grad = Vec::with_capacity(n_theta);
    let mut u_nu = Vec::with_capacity(n_theta);
    for &t in &theta {
        let nu = [t.cos(), t.sin()];
        let (v, g) = field.value_and_gradient([center[0] + r * nu[0], center[1] + r * nu[1]])?;
        u.push(v);
        grad.push(g);
        u_nu.push(dot(g, nu));
    }
    Ok(CircleSample { center, r, theta, u, grad, u_nu })
}
