//! Linearization of the nondivergence p-Laplacian around an affine function,
//! and the equation satisfied by the difference of two solutions.
//!
//! With `u = L + h`, `alpha = grad L`, the nondivergence operator splits as
//!
//! ```text
//! |grad u|^2 lap u + (p-2) sum u_i u_j u_ij
//!     = |alpha|^2 lap h + (p-2) sum alpha_i alpha_j h_ij + R(x),
//! R = |grad h|^2 lap h + 2 (grad h . alpha) lap h
//!     + (p-2) (sum h_i h_j h_ij + sum alpha_j h_i h_ij + sum alpha_i h_j h_ij),
//! ```
//!
//! and `R` is written as `b(x) . grad h` with `b = R grad h / |grad h|^2`
//! (`b = 0` where `grad h = 0`; every term of `R` carries a factor of `grad h`).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{p_laplace_nondivergence, ExactSolution, Hessian};
use crate::field::{dot, Point};
use crate::mesh::ScalarField;

/// A field with pointwise value, gradient and symmetric Hessian.
pub trait C2Field: Sync {
    fn value(&self, x: Point) -> Result<f64>;
    fn gradient(&self, x: Point) -> Result<[f64; 2]>;
    fn hessian(&self, x: Point) -> Result<Hessian>;
}

impl C2Field for ExactSolution {
    fn value(&self, x: Point) -> Result<f64> {
        self.eval(x)
    }
    fn gradient(&self, x: Point) -> Result<[f64; 2]> {
        self.grad(x)
    }
    fn hessian(&self, x: Point) -> Result<Hessian> {
        ExactSolution::hessian(self, x)
    }
}

impl<F: C2Field + ?Sized> C2Field for &F {
    fn value(&self, x: Point) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: Point) -> Result<[f64; 2]> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: Point) -> Result<Hessian> {
        (**self).hessian(x)
    }
}

/// `|alpha|^2 |xi|^2 + (p-2) (alpha . xi)^2`.
pub fn quadratic_form(alpha: [f64; 2], xi: [f64; 2], p: f64) -> f64 {
    let a = dot(alpha, xi);
    dot(alpha, alpha) * dot(xi, xi) + (p - 2.0) * a * a
}

/// `a_ij = |alpha|^2 delta_ij + (p-2) alpha_i alpha_j`.
pub fn principal_matrix(alpha: [f64; 2], p: f64) -> [[f64; 2]; 2] {
    let n2 = dot(alpha, alpha);
    let off = (p - 2.0) * alpha[0] * alpha[1];
    [
        [n2 + (p - 2.0) * alpha[0] * alpha[0], off],
        [off, n2 + (p - 2.0) * alpha[1] * alpha[1]],
    ]
}

/// Exact eigenvalues of the principal matrix: `(p-1)|alpha|^2` along `alpha`
/// and `|alpha|^2` across it, returned as `(min, max)`.
pub fn ellipticity_bounds(alpha: [f64; 2], p: f64) -> Result<(f64, f64)> {
    let n2 = dot(alpha, alpha);
    if n2 == 0.0 {
        return Err(Error::InvalidParameter("alpha must be nonzero".into()));
    }
    let along = (p - 1.0) * n2;
    Ok((along.min(n2), along.max(n2)))
}

/// The remainder `R(x)` for given `grad h` and Hessian of `h`.
pub fn drift_remainder(gh: [f64; 2], hh: &Hessian, alpha: [f64; 2], p: f64) -> f64 {
    let lap = hh[0][0] + hh[1][1];
    let quad = |a: [f64; 2], b: [f64; 2]| {
        a[0] * (hh[0][0] * b[0] + hh[0][1] * b[1]) + a[1] * (hh[1][0] * b[0] + hh[1][1] * b[1])
    };
    dot(gh, gh) * lap
        + 2.0 * dot(gh, alpha) * lap
        + (p - 2.0) * (quad(gh, gh) + quad(gh, alpha) + quad(alpha, gh))
}

/// Drift `b(x)` with `b . grad h = R(x)`.
pub fn drift_coefficients<H: C2Field + ?Sized>(h: &H, alpha: [f64; 2], p: f64, x: Point) -> Result<[f64; 2]> {
    let gh = h.gradient(x)?;
    let n2 = dot(gh, gh);
    if n2 == 0.0 {
        return Ok([0.0, 0.0]);
    }
    let r = drift_remainder(gh, &h.hessian(x)?, alpha, p);
    Ok([r * gh[0] / n2, r * gh[1] / n2])
}

/// `h = u - L` for an affine `L`.
pub struct AffineDifference<'a, U: ?Sized> {
    pub u: &'a U,
    pub alpha: [f64; 2],
    pub l0: f64,
}

impl<U: C2Field + ?Sized> C2Field for AffineDifference<'_, U> {
    fn value(&self, x: Point) -> Result<f64> {
        Ok(self.u.value(x)? - dot(self.alpha, x) - self.l0)
    }
    fn gradient(&self, x: Point) -> Result<[f64; 2]> {
        let g = self.u.gradient(x)?;
        Ok([g[0] - self.alpha[0], g[1] - self.alpha[1]])
    }
    fn hessian(&self, x: Point) -> Result<Hessian> {
        self.u.hessian(x)
    }
}

/// Principal matrix, ellipticity bounds and drift for `u = L + h`.
#[derive(Debug, Clone, Serialize)]
pub struct AffineLinearization {
    pub alpha: [f64; 2],
    pub l0: f64,
    pub p: f64,
    pub principal: [[f64; 2]; 2],
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl AffineLinearization {
    pub fn new(l: &ExactSolution, p: f64) -> Result<Self> {
        let ExactSolution::Affine { l: alpha, l0 } = *l else {
            return Err(Error::InvalidParameter(format!("linearization needs an affine field, got {}", l.id())));
        };
        let (lambda_min, lambda_max) = ellipticity_bounds(alpha, p)?;
        Ok(Self { alpha, l0, p, principal: principal_matrix(alpha, p), lambda_min, lambda_max })
    }

    pub fn drift<U: C2Field + ?Sized>(&self, u: &U, x: Point) -> Result<[f64; 2]> {
        drift_coefficients(&self.difference(u), self.alpha, self.p, x)
    }

    pub fn difference<'a, U: C2Field + ?Sized>(&self, u: &'a U) -> AffineDifference<'a, U> {
        AffineDifference { u, alpha: self.alpha, l0: self.l0 }
    }

    /// `sum a_ij h_ij + b . grad h` at `x`.
    pub fn residual_at<U: C2Field + ?Sized>(&self, u: &U, x: Point) -> Result<f64> {
        let h = self.difference(u);
        let gh = h.gradient(x)?;
        let hh = h.hessian(x)?;
        let a = &self.principal;
        let principal: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| a[i][j] * hh[i][j]).sum();
        let b = drift_coefficients(&h, self.alpha, self.p, x)?;
        Ok(principal + dot(b, gh))
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub evaluated: usize,
    /// Points where the relevant gradient vanishes (`grad h` for the affine
    /// linearization, `grad v` for the two-solution equation).
    pub flagged_points: Vec<Point>,
}

/// Max over `sample` of `|alpha|^2 lap h + (p-2) sum alpha_i alpha_j h_ij + b . grad h`,
/// `h = u - L`. Vanishes when `u` solves the nondivergence p-Laplace equation.
pub fn residual_affine_linearization<U: C2Field + ?Sized>(u: &U, l: &ExactSolution, p: f64, sample: &[Point]) -> Result<ResidualReport> {
    let lin = AffineLinearization::new(l, p)?;
    let h = lin.difference(u);
    let mut rep = ResidualReport::default();
    for &x in sample {
        if h.gradient(x)? == [0.0, 0.0] {
            rep.flagged_points.push(x);
        }
        rep.max_residual = rep.max_residual.max(lin.residual_at(u, x)?.abs());
        rep.evaluated += 1;
    }
    Ok(rep)
}

/// The two-solution operator at `x`, `h = u - v`:
/// `|grad v|^2 lap h + (p-2) sum v_i v_j h_ij + ((grad v + grad u) . grad h) lap u
///  + (p-2) sum u_ij (v_i h_j + u_j h_i)`.
pub fn two_solution_operator(gu: [f64; 2], hu: &Hessian, gv: [f64; 2], hv: &Hessian, p: f64) -> f64 {
    let gh = [gu[0] - gv[0], gu[1] - gv[1]];
    let mut hh = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            hh[i][j] = hu[i][j] - hv[i][j];
        }
    }
    let lap_h = hh[0][0] + hh[1][1];
    let lap_u = hu[0][0] + hu[1][1];
    let mut vvh = 0.0;
    let mut cross = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            vvh += gv[i] * gv[j] * hh[i][j];
            cross += hu[i][j] * (gv[i] * gh[j] + gu[j] * gh[i]);
        }
    }
    let sum = [gv[0] + gu[0], gv[1] + gu[1]];
    dot(gv, gv) * lap_h + (p - 2.0) * vvh + dot(sum, gh) * lap_u + (p - 2.0) * cross
}

/// Max over `sample` of the two-solution operator; points with `grad v = 0`
/// are evaluated and flagged.
pub fn residual_two_solution<U: C2Field + ?Sized, V: C2Field + ?Sized>(u: &U, v: &V, p: f64, sample: &[Point]) -> Result<ResidualReport> {
    let mut rep = ResidualReport::default();
    for &x in sample {
        let gv = v.gradient(x)?;
        if gv == [0.0, 0.0] {
            rep.flagged_points.push(x);
        }
        let r = two_solution_operator(u.gradient(x)?, &u.hessian(x)?, gv, &v.hessian(x)?, p);
        rep.max_residual = rep.max_residual.max(r.abs());
        rep.evaluated += 1;
    }
    Ok(rep)
}

/// Nondivergence p-Laplace operator of a `C^2` field at `x`.
pub fn p_laplace_at<U: C2Field + ?Sized>(u: &U, x: Point, p: f64) -> Result<f64> {
    Ok(p_laplace_nondivergence(u.gradient(x)?, &u.hessian(x)?, p))
}

/// Approximate `C^2` view of a P1 field: a quadratic is fitted by least
/// squares to the nodal values within `radius` of the query point.
///
/// Exact for fields interpolating a quadratic; otherwise the Hessian is only
/// as good as the data, roughly `O(h)` on smooth solutions.
pub struct PatchFit {
    field: Arc<ScalarField>,
    radius: f64,
}

impl PatchFit {
    /// `radius` defaults to `2.5 h` when `None`.
    pub fn new(field: Arc<ScalarField>, radius: Option<f64>) -> Result<Self> {
        let radius = radius.unwrap_or(2.5 * field.mesh().h());
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("patch radius must be positive, got {radius}")));
        }
        Ok(Self { field, radius })
    }

    /// Coefficients of `c0 + c1 dx + c2 dy + c3 dx^2/2 + c4 dx dy + c5 dy^2/2`.
    fn fit(&self, x: Point) -> Result<[f64; 6]> {
        self.field.mesh().locate(x)?;
        let mesh = self.field.mesh();
        let vals = self.field.values();
        let rows: Vec<usize> = (0..mesh.n_vertices())
            .filter(|&i| {
                let v = mesh.vertices()[i];
                (v[0] - x[0]).hypot(v[1] - x[1]) <= self.radius
            })
            .collect();
        if rows.len() < 6 {
            return Err(Error::InvalidParameter(format!(
                "patch of radius {} around {x:?} holds only {} nodes",
                self.radius,
                rows.len()
            )));
        }
        let s = self.radius;
        let a = DMatrix::from_fn(rows.len(), 6, |k, c| {
            let v = mesh.vertices()[rows[k]];
            let (dx, dy) = ((v[0] - x[0]) / s, (v[1] - x[1]) / s);
            [1.0, dx, dy, 0.5 * dx * dx, dx * dy, 0.5 * dy * dy][c]
        });
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|&i| vals[i]));
        let c = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::LinearSolver(format!("patch fit: {e}")))?;
        Ok([c[0], c[1] / s, c[2] / s, c[3] / (s * s), c[4] / (s * s), c[5] / (s * s)])
    }
}

impl C2Field for PatchFit {
    fn value(&self, x: Point) -> Result<f64> {
        Ok(self.fit(x)?[0])
    }
    fn gradient(&self, x: Point) -> Result<[f64; 2]> {
        let c = self.fit(x)?;
        Ok([c[1], c[2]])
    }
    fn hessian(&self, x: Point) -> Result<Hessian> {
        let c = self.fit(x)?;
        Ok([[c[3], c[4]], [c[4], c[5]]])
    }
}
