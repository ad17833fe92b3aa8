//! The frequency function `F_p(r) = r D(r) / I(r)` and the identities,
//! inequalities and probes built around it.
//!
//! `I(r) = int_{dB_r} |u|^p dS` is evaluated with the trapezoid rule in the
//! angle, `D(r) = int_{B_r} |grad u|^p dx` with a polar tensor rule
//! (Gauss-Legendre in the radius, trapezoid in the angle). All balls share a
//! center given by [`Quadrature::center`], which need not be the mesh center.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{dot, Field, Point};
use crate::mesh::{sample_circle, CircleSample};
use crate::quadrature::{circle_angles, circle_trapezoid, gauss_legendre_on, power_integral};
use crate::DIM;

/// Quadrature settings shared by every radius of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub center: Point,
    pub n_theta: usize,
    /// Lower bound on the number of radial nodes of the disc rule.
    pub min_rings: usize,
}

impl Quadrature {
    pub fn new(center: Point, n_theta: usize) -> Self {
        Self { center, n_theta, min_rings: 32 }
    }

    /// `max(min_rings, r / h)` radial nodes, `h` the field resolution if any.
    pub fn rings_for<F: Field + ?Sized>(&self, field: &F, r: f64) -> usize {
        let by_mesh = field.resolution().map_or(0, |h| (r / h).ceil() as usize);
        self.min_rings.max(by_mesh)
    }

    fn circle<F: Field + ?Sized>(&self, field: &F, r: f64) -> Result<CircleSample> {
        sample_circle(field, self.center, r, self.n_theta)
    }

    /// Polar tensor rule for `int_{B_r} g(u, grad u) dx`.
    fn disc_integral<F: Field + ?Sized>(&self, field: &F, r: f64, g: impl Fn(f64, [f64; 2]) -> f64) -> Result<f64> {
        let angles = circle_angles(self.n_theta);
        let dtheta = 2.0 * PI / self.n_theta as f64;
        let mut total = 0.0;
        for (rho, w) in gauss_legendre_on(self.rings_for(field, r), 0.0, r) {
            let mut ring = 0.0;
            for t in &angles {
                let x = [self.center[0] + rho * t.cos(), self.center[1] + rho * t.sin()];
                let (u, grad) = field.value_and_gradient(x)?;
                ring += g(u, grad);
            }
            total += w * rho * dtheta * ring;
        }
        Ok(total)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")))
    }
}

#[inline]
fn grad_pow(g: [f64; 2], p: f64) -> f64 {
    dot(g, g).powf(0.5 * p)
}

/// `I(r) = int_{dB_r} |u|^p dS`.
pub fn boundary_i<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64) -> Result<f64> {
    check_p(p)?;
    let s = q.circle(field, r)?;
    Ok(circle_integral_of_power(&s, p))
}

fn circle_integral_of_power(s: &CircleSample, p: f64) -> f64 {
    let vals: Vec<f64> = s.u.iter().map(|u| u.abs().powf(p)).collect();
    circle_trapezoid(&vals, s.r)
}

/// `D(r) = int_{B_r} |grad u|^p dx`.
pub fn bulk_d<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64) -> Result<f64> {
    check_p(p)?;
    q.disc_integral(field, r, |_, g| grad_pow(g, p))
}

/// `int_{B_r} |u|^p dx`.
pub fn bulk_mass<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64) -> Result<f64> {
    check_p(p)?;
    q.disc_integral(field, r, |u, _| u.abs().powf(p))
}

/// `int_{dB_r} |grad u|^p dS`.
pub fn surface_gradient<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64) -> Result<f64> {
    check_p(p)?;
    let s = q.circle(field, r)?;
    let vals: Vec<f64> = s.grad.iter().map(|g| grad_pow(*g, p)).collect();
    Ok(circle_trapezoid(&vals, r))
}

/// Cutoff below which `I(r)` counts as zero: `1e-14 (1 + max|u|^p) r`, with
/// the nodal maximum for discrete fields and the circle maximum otherwise.
fn zero_threshold<F: Field + ?Sized>(field: &F, s: &CircleSample, p: f64) -> f64 {
    let m = field
        .nodal_max_abs()
        .unwrap_or_else(|| s.u.iter().fold(0.0_f64, |a, u| a.max(u.abs())));
    1e-14 * (1.0 + m.powf(p)) * s.r
}

/// `r^exponent D(r) / I(r)`, `None` where `I(r)` vanishes.
///
/// `exponent = 1` is the frequency function; `exponent = p - 1` is the
/// alternative normalization.
pub fn frequency_f_weighted<F: Field + ?Sized>(
    field: &F,
    q: &Quadrature,
    p: f64,
    r: f64,
    exponent: f64,
) -> Result<Option<f64>> {
    check_p(p)?;
    let s = q.circle(field, r)?;
    let i = circle_integral_of_power(&s, p);
    if i <= zero_threshold(field, &s, p) {
        return Ok(None);
    }
    let d = bulk_d(field, q, p, r)?;
    Ok(Some(r.powf(exponent) * d / i))
}

/// `F_p(r) = r D(r) / I(r)`, `None` where `I(r)` vanishes.
pub fn frequency_f<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64) -> Result<Option<f64>> {
    frequency_f_weighted(field, q, p, r, 1.0)
}

#[inline]
fn sign(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn i_prime_from(s: &CircleSample, p: f64) -> f64 {
    let i = circle_integral_of_power(s, p);
    let flux: Vec<f64> = s
        .u
        .iter()
        .zip(&s.u_nu)
        .map(|(u, un)| u.abs().powf(p - 1.0) * sign(*u) * un)
        .collect();
    (DIM as f64 - 1.0) / s.r * i + p * circle_trapezoid(&flux, s.r)
}

/// `I'(r) = (n-1)/r I(r) + p int_{dB_r} |u|^{p-1} sign(u) u_nu dS`.
///
/// The sign factor splits the circle into `{u > 0}` and `{u <= 0}`;
/// `sign(0) = 0`.
pub fn i_prime_formula<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64) -> Result<f64> {
    check_p(p)?;
    Ok(i_prime_from(&q.circle(field, r)?, p))
}

/// Centered difference `(I(r + dr) - I(r - dr)) / (2 dr)`.
pub fn i_prime_finite_difference<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64, dr: f64) -> Result<f64> {
    Ok((boundary_i(field, q, p, r + dr)? - boundary_i(field, q, p, r - dr)?) / (2.0 * dr))
}

/// Both sides of an inequality `lhs <= rhs` and whether it holds within the
/// stated slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64, slack: f64) -> Self {
        Self { lhs, rhs, slack, holds: lhs <= rhs + slack }
    }
}

/// `I'(r) <= (n-1)/r I(r) + p int |u|^{p-1} |u_nu| dS`, slack `1e-8` times the
/// magnitude of the terms.
pub fn i_prime_bound_check<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64) -> Result<BoundCheck> {
    check_p(p)?;
    let s = q.circle(field, r)?;
    let lhs = i_prime_from(&s, p);
    let i = circle_integral_of_power(&s, p);
    let abs_flux: Vec<f64> = s.u.iter().zip(&s.u_nu).map(|(u, un)| u.abs().powf(p - 1.0) * un.abs()).collect();
    let second = p * circle_trapezoid(&abs_flux, r);
    let first = (DIM as f64 - 1.0) / r * i;
    let rhs = first + second;
    Ok(BoundCheck::new(lhs, rhs, 1e-8 * lhs.abs().max(first).max(second)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityRow {
    pub r: f64,
    pub left: f64,
    pub right: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub rows: Vec<IdentityRow>,
    pub worst: f64,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-14)
}

/// Energy identity `int_{B_r} |grad u|^p = int_{dB_r} |grad u|^{p-2} u u_nu dS`.
pub fn energy_identity_residual<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64) -> Result<IdentityRow> {
    let left = bulk_d(field, q, p, r)?;
    let s = q.circle(field, r)?;
    let vals: Vec<f64> = s
        .grad
        .iter()
        .zip(s.u.iter().zip(&s.u_nu))
        .map(|(g, (u, un))| {
            let n2 = dot(*g, *g);
            // |g|^{p-2} u_nu -> 0 as g -> 0 for every p > 1
            if n2 == 0.0 {
                0.0
            } else {
                n2.powf(0.5 * p - 1.0) * u * un
            }
        })
        .collect();
    let right = circle_trapezoid(&vals, r);
    Ok(IdentityRow { r, left, right, residual: relative_gap(left, right) })
}

pub fn energy_identity_report<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, radii: &[f64]) -> Result<IdentityReport> {
    let rows = radii
        .par_iter()
        .map(|&r| energy_identity_residual(field, q, p, r))
        .collect::<Result<Vec<_>>>()?;
    let worst = rows.iter().fold(0.0_f64, |m, row| m.max(row.residual));
    Ok(IdentityReport { rows, worst })
}

/// `p int_{B_r} |grad u|^p <= (p-1) int_{dB_r} |grad u|^p + int_{dB_r} |u|^p`,
/// with slack 1% of the right side.
pub fn grad_estimate_check<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64) -> Result<BoundCheck> {
    let lhs = p * bulk_d(field, q, p, r)?;
    let rhs = (p - 1.0) * surface_gradient(field, q, p, r)? + boundary_i(field, q, p, r)?;
    Ok(BoundCheck::new(lhs, rhs, 0.01 * rhs.abs()))
}

/// Sampled `I`, `D`, `F_p`, `I'` on an increasing radius grid in `(r_b, R_b]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyProfile {
    pub p: f64,
    pub center: Point,
    pub r_b: f64,
    pub radii: Vec<f64>,
    pub i: Vec<f64>,
    pub d: Vec<f64>,
    pub f: Vec<Option<f64>>,
    pub i_prime: Vec<f64>,
    /// Largest defined `F`, `None` if `F` is nowhere defined.
    pub m: Option<f64>,
}

/// Uniform grid `r_b + k (R_b - r_b) / count`, `k = 1..=count`.
pub fn radius_grid(r_b: f64, r_big: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| r_b + k as f64 * (r_big - r_b) / count as f64).collect()
}

impl FrequencyProfile {
    fn assemble(p: f64, center: Point, r_b: f64, rows: Vec<(f64, f64, f64, Option<f64>, f64)>) -> Self {
        let mut prof = Self {
            p,
            center,
            r_b,
            radii: Vec::new(),
            i: Vec::new(),
            d: Vec::new(),
            f: Vec::new(),
            i_prime: Vec::new(),
            m: None,
        };
        for (r, i, d, f, ip) in rows {
            prof.radii.push(r);
            prof.i.push(i);
            prof.d.push(d);
            prof.f.push(f);
            prof.i_prime.push(ip);
        }
        prof.m = prof.f.iter().flatten().cloned().reduce(f64::max);
        prof
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// CSV with columns `r,I,D,F,Iprime,F_defined`; `F` blank when undefined.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,I,D,F,Iprime,F_defined\n");
        for k in 0..self.len() {
            let f = self.f[k].map(|v| format!("{v:.16e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{},{:.16e},{}",
                self.radii[k],
                self.i[k],
                self.d[k],
                f,
                self.i_prime[k],
                self.f[k].is_some()
            );
        }
        s
    }

    pub fn from_csv(text: &str, p: f64, center: Point, r_b: f64) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("r,I,D,F,Iprime,F_defined") => {}
            other => return Err(Error::Parse(format!("unexpected profile header {other:?}"))),
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        let mut rows = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(Error::Parse(format!("expected 6 columns in `{line}`")));
            }
            let defined = match cols[5].trim() {
                "true" => true,
                "false" => false,
                other => return Err(Error::Parse(format!("bad F_defined `{other}`"))),
            };
            let f = if defined { Some(num(cols[3])?) } else { None };
            rows.push((num(cols[0])?, num(cols[1])?, num(cols[2])?, f, num(cols[4])?));
        }
        Ok(Self::assemble(p, center, r_b, rows))
    }
}

/// Evaluates the profile on `radii` (strictly increasing, all above `r_b`).
///
/// Radii are processed in parallel; the output keeps grid order.
pub fn frequency_profile<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r_b: f64, radii: &[f64]) -> Result<FrequencyProfile> {
    check_p(p)?;
    if radii.is_empty() {
        return Err(Error::InvalidParameter("empty radius grid".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= r_b {
        return Err(Error::InvalidParameter("radii must increase strictly and exceed r_b".into()));
    }
    let rows = radii
        .par_iter()
        .map(|&r| {
            let s = q.circle(field, r)?;
            let i = circle_integral_of_power(&s, p);
            let d = bulk_d(field, q, p, r)?;
            let f = (i > zero_threshold(field, &s, p)).then(|| r * d / i);
            Ok((r, i, d, f, i_prime_from(&s, p)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyProfile::assemble(p, q.center, r_b, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingReport {
    pub p: f64,
    #[serde(rename = "M")]
    pub m: f64,
    /// `1 / (4 p M)`; infinite when `M = 0`.
    pub eps0: f64,
    pub r_b: f64,
    pub r0: f64,
    pub r_star: f64,
    /// `(r, I(r_star) / I(r))` for every grid radius up to `r_star`.
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
    /// `max I / min I` over the grid radii in `(r_b, r_star]`.
    pub pairwise_max_ratio: f64,
    /// `(n-1) log(r0 / r_1)` with `r_1` the first grid radius.
    pub log_term: f64,
    /// `(eps0 p)^{-1/(p-1)} (p-1) int_{r_1}^{r0} t^{-1/(p-1)} dt`.
    pub power_term: f64,
    pub pass: bool,
}

/// The two window terms for a pair `r <= s`.
pub fn window_terms(p: f64, eps0: f64, r: f64, s: f64) -> (f64, f64) {
    let log_term = (DIM as f64 - 1.0) * (s / r).ln();
    let coeff = if eps0.is_infinite() { 0.0 } else { (eps0 * p).powf(-1.0 / (p - 1.0)) };
    (log_term, coeff * (p - 1.0) * power_integral(r, s, p))
}

/// Weak doubling scan: `eps0 = 1/(4pM)`, the largest grid radius `r0` such
/// that both window terms stay `<= 1/4` for every pair of grid radii up to
/// it, `r_star = argmax I` on that window, and the ratios `I(r_star)/I(r)`.
pub fn doubling_scan(profile: &FrequencyProfile) -> Result<DoublingReport> {
    if profile.is_empty() {
        return Err(Error::InvalidParameter("empty profile".into()));
    }
    for (k, f) in profile.f.iter().enumerate() {
        if f.is_none() || profile.i[k] <= 0.0 {
            return Err(Error::UndefinedFrequency { r: profile.radii[k], i_value: profile.i[k] });
        }
    }
    let p = profile.p;
    let m = profile.m.expect("all F defined");
    if !m.is_finite() {
        return Err(Error::InvalidParameter("frequency is unbounded on the window".into()));
    }
    let eps0 = 1.0 / (4.0 * p * m);
    let radii = &profile.radii;
    let pair_ok = |j: usize, k: usize| {
        let (a, b) = window_terms(p, eps0, radii[j], radii[k]);
        a <= 0.25 && b <= 0.25
    };
    let mut k0 = 0;
    for k in 1..radii.len() {
        if (0..k).all(|j| pair_ok(j, k)) {
            k0 = k;
        } else {
            break;
        }
    }
    let mut star = 0;
    for k in 0..=k0 {
        if profile.i[k] > profile.i[star] {
            star = k;
        }
    }
    let i_star = profile.i[star];
    let ratios: Vec<(f64, f64)> = (0..=star).map(|k| (radii[k], i_star / profile.i[k])).collect();
    let max_ratio = ratios.iter().fold(0.0_f64, |a, r| a.max(r.1));
    let window = &profile.i[..=star];
    let (lo, hi) = window.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let pairwise_max_ratio = hi / lo;
    let (log_term, power_term) = window_terms(p, eps0, radii[0], radii[k0]);
    Ok(DoublingReport {
        p,
        m,
        eps0,
        r_b: profile.r_b,
        r0: radii[k0],
        r_star: radii[star],
        pass: max_ratio <= 4.0 && pairwise_max_ratio <= 4.0,
        ratios,
        max_ratio,
        pairwise_max_ratio,
        log_term,
        power_term,
    })
}

/// Largest grid radius whose circle carries `max |u| <= tol`; 0 if none.
pub fn vanishing_radius<F: Field + ?Sized>(field: &F, q: &Quadrature, radii: &[f64], tol: f64) -> Result<f64> {
    let mut s = 0.0_f64;
    for &r in radii {
        let c = q.circle(field, r)?;
        if c.u.iter().all(|u| u.abs() <= tol) {
            s = s.max(r);
        }
    }
    Ok(s)
}

/// `D(r) (rho - r)^p / int_{B_rho} |u|^p dx`.
pub fn caccioppoli_ratio<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64, rho: f64) -> Result<f64> {
    if !(r < rho) {
        return Err(Error::InvalidParameter(format!("need r < rho, got {r} >= {rho}")));
    }
    let den = bulk_mass(field, q, p, rho)?;
    if den == 0.0 {
        return Err(Error::ZeroDenominator("Caccioppoli ratio"));
    }
    Ok(bulk_d(field, q, p, r)? * (rho - r).powf(p) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionProbes {
    /// `int_{dB_r} |grad u|^p dS / I(r)`.
    pub a1: f64,
    /// `int_{B_r} |u|^p dx / (r I(r))`.
    pub a2: f64,
}

pub fn condition_probes<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64) -> Result<ConditionProbes> {
    check_p(p)?;
    let s = q.circle(field, r)?;
    let i = circle_integral_of_power(&s, p);
    if i <= zero_threshold(field, &s, p) {
        return Err(Error::UndefinedFrequency { r, i_value: i });
    }
    let grads: Vec<f64> = s.grad.iter().map(|g| grad_pow(*g, p)).collect();
    Ok(ConditionProbes {
        a1: circle_trapezoid(&grads, r) / i,
        a2: bulk_mass(field, q, p, r)? / (r * i),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareProbe {
    /// Quadrature-weighted fraction of `B_r` where `|u| <= zero_tol`.
    pub gamma_hat: f64,
    /// `int_{B_r} |u|^p / (r^p D(r))`.
    pub c_hat: f64,
}

pub fn poincare_probe<F: Field + ?Sized>(field: &F, q: &Quadrature, p: f64, r: f64, zero_tol: f64) -> Result<PoincareProbe> {
    let d = bulk_d(field, q, p, r)?;
    if d == 0.0 {
        return Err(Error::ZeroDenominator("Poincare probe (D(r) = 0)"));
    }
    let zero_area = q.disc_integral(field, r, |u, _| if u.abs() <= zero_tol { 1.0 } else { 0.0 })?;
    let area = q.disc_integral(field, r, |_, _| 1.0)?;
    Ok(PoincareProbe {
        gamma_hat: zero_area / area,
        c_hat: bulk_mass(field, q, p, r)? / (r.powf(p) * d),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityProbe {
    pub radii: Vec<f64>,
    /// `int_{B_r} u^2 dx` on the grid.
    pub bulk: Vec<f64>,
    /// `int_{dB_r} u^2 dS` on the grid.
    pub surface: Vec<f64>,
    /// Second differences of `bulk` nonnegative, one verdict per interior grid point.
    pub bulk_convex: Vec<bool>,
    pub surface_convex: Vec<bool>,
    /// First differences of `surface / r` nonnegative, one verdict per grid interval.
    pub normalized_increasing: Vec<bool>,
}

impl ConvexityProbe {
    pub fn all_hold(&self) -> bool {
        self.bulk_convex.iter().chain(&self.surface_convex).chain(&self.normalized_increasing).all(|b| *b)
    }
}

fn second_difference_verdicts(r: &[f64], f: &[f64]) -> Vec<bool> {
    let min_dr = r.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let scale = f.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / (min_dr * min_dr);
    (1..r.len() - 1)
        .map(|k| {
            let left = (f[k] - f[k - 1]) / (r[k] - r[k - 1]);
            let right = (f[k + 1] - f[k]) / (r[k + 1] - r[k]);
            2.0 * (right - left) / (r[k + 1] - r[k - 1]) >= -1e-8 * scale
        })
        .collect()
}

fn first_difference_verdicts(r: &[f64], f: &[f64]) -> Vec<bool> {
    let min_dr = r.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let scale = f.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / min_dr;
    r.windows(2)
        .zip(f.windows(2))
        .map(|(rw, fw)| (fw[1] - fw[0]) / (rw[1] - rw[0]) >= -1e-8 * scale)
        .collect()
}

/// Convexity of `r -> int_{B_r} u^2` and `r -> int_{dB_r} u^2`, and
/// monotonicity of `r -> (1/r) int_{dB_r} u^2`, on a grid of at least three
/// radii. Meaningful for harmonic fields (`p = 2`).
pub fn convexity_probe<F: Field + ?Sized>(field: &F, q: &Quadrature, radii: &[f64]) -> Result<ConvexityProbe> {
    if radii.len() < 3 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("need at least 3 strictly increasing radii".into()));
    }
    let pairs = radii
        .par_iter()
        .map(|&r| Ok((bulk_mass(field, q, 2.0, r)?, boundary_i(field, q, 2.0, r)?)))
        .collect::<Result<Vec<_>>>()?;
    let (bulk, surface): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let normalized: Vec<f64> = surface.iter().zip(radii).map(|(s, r)| s / r).collect();
    Ok(ConvexityProbe {
        bulk_convex: second_difference_verdicts(radii, &bulk),
        surface_convex: second_difference_verdicts(radii, &surface),
        normalized_increasing: first_difference_verdicts(radii, &normalized),
        radii: radii.to_vec(),
        bulk,
        surface,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactSolution;
    use crate::field::Scaled;

    const O: Point = [0.0, 0.0];

    fn q(n: usize) -> Quadrature {
        Quadrature::new(O, n)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn x() -> ExactSolution {
        ExactSolution::affine([1.0, 0.0], 0.0)
    }

    /// `(x - 0.5)^+` with a one-sided gradient: zero on the left half disc.
    struct HalfZero;

    impl Field for HalfZero {
        fn value(&self, p: Point) -> Result<f64> {
            Ok(p[0].max(0.0))
        }
        fn gradient(&self, p: Point) -> Result<[f64; 2]> {
            Ok([if p[0] > 0.0 { 1.0 } else { 0.0 }, 0.0])
        }
    }

    /// Radial bump vanishing on `|x| <= 0.5`.
    struct Bump;

    impl Field for Bump {
        fn value(&self, p: Point) -> Result<f64> {
            Ok((p[0].hypot(p[1]) - 0.5).max(0.0))
        }
        fn gradient(&self, p: Point) -> Result<[f64; 2]> {
            let r = p[0].hypot(p[1]);
            Ok(if r > 0.5 { [p[0] / r, p[1] / r] } else { [0.0, 0.0] })
        }
    }

    #[test]
    fn boundary_integral_examples() {
        let one = ExactSolution::constant(1.0);
        assert!(close(boundary_i(&one, &q(64), 3.0, 0.5).unwrap(), PI, 1e-14));
        assert_eq!(boundary_i(&ExactSolution::constant(0.0), &q(64), 2.0, 0.5).unwrap(), 0.0);
        assert!(close(boundary_i(&x(), &q(64), 2.0, 0.5).unwrap(), PI / 8.0, 1e-14));
    }

    #[test]
    fn bulk_integral_examples() {
        assert_eq!(bulk_d(&ExactSolution::constant(2.0), &q(64), 2.0, 0.5).unwrap(), 0.0);
        assert!(close(bulk_d(&x(), &q(64), 3.0, 0.5).unwrap(), PI / 4.0, 1e-13));
        let z2 = ExactSolution::harmonic_polynomial(2).unwrap();
        assert!(close(bulk_d(&z2, &q(64), 2.0, 0.5).unwrap(), PI / 8.0, 1e-13));
    }

    #[test]
    fn frequency_of_homogeneous_harmonics() {
        assert!(close(frequency_f(&x(), &q(64), 2.0, 0.3).unwrap().unwrap(), 1.0, 1e-13));
        for k in 1..=4 {
            let u = ExactSolution::harmonic_polynomial(k).unwrap();
            for r in [0.2, 0.5, 0.9] {
                let f = frequency_f(&u, &q(128), 2.0, r).unwrap().unwrap();
                assert!(close(f, k as f64, 1e-12), "k={k} r={r}: {f}");
            }
        }
    }

    #[test]
    fn frequency_of_linear_field_for_general_p() {
        // C_p = int_0^{2pi} |cos t|^p dt, by a fine independent midpoint sum
        for p in [1.5, 3.0, 4.0] {
            let n = 200_000;
            let c_p: f64 = (0..n)
                .map(|j| ((j as f64 + 0.5) * 2.0 * PI / n as f64).cos().abs().powf(p))
                .sum::<f64>()
                * 2.0
                * PI
                / n as f64;
            let r = 0.4;
            let f = frequency_f(&x(), &q(4096), p, r).unwrap().unwrap();
            assert!(close(f, PI * r.powf(2.0 - p) / c_p, 1e-6), "p={p}");
        }
    }

    #[test]
    fn frequency_undefined_where_i_vanishes() {
        let zero = ExactSolution::constant(0.0);
        assert_eq!(frequency_f(&zero, &q(64), 2.0, 0.5).unwrap(), None);
        assert_eq!(frequency_f(&Bump, &q(64), 2.0, 0.4).unwrap(), None);
        assert!(frequency_f(&Bump, &q(64), 2.0, 0.7).unwrap().is_some());
    }

    #[test]
    fn weighted_frequency_exponent() {
        let u = ExactSolution::harmonic_polynomial(2).unwrap();
        let r = 0.5;
        let f1 = frequency_f(&u, &q(64), 3.0, r).unwrap().unwrap();
        let f2 = frequency_f_weighted(&u, &q(64), 3.0, r, 2.0).unwrap().unwrap();
        assert!(close(f2, f1 * r, 1e-14));
    }

    #[test]
    fn i_prime_examples() {
        let c = ExactSolution::constant(1.5);
        assert!(close(i_prime_formula(&c, &q(64), 2.0, 0.3).unwrap(), 2.0 * PI * 2.25, 1e-14));
        assert!(close(i_prime_formula(&x(), &q(64), 2.0, 0.5).unwrap(), 3.0 * PI / 4.0, 1e-14));
        assert_eq!(i_prime_formula(&ExactSolution::constant(0.0), &q(64), 2.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn i_prime_matches_finite_difference() {
        let fields = [
            ExactSolution::harmonic_polynomial(3).unwrap(),
            ExactSolution::affine([0.3, -1.0], 0.2),
            ExactSolution::radial_with(3.0, 2, [2.0, 0.5]).unwrap(),
        ];
        for u in &fields {
            for p in [1.5, 2.0, 3.0] {
                let r = 0.5;
                let a = i_prime_formula(u, &q(512), p, r).unwrap();
                let b = i_prime_finite_difference(u, &q(512), p, r, 1e-3).unwrap();
                let i = boundary_i(u, &q(512), p, r).unwrap();
                assert!((a - b).abs() <= 0.01 * a.abs().max(i / r), "{} p={p}: {a} vs {b}", u.id());
            }
        }
    }

    #[test]
    fn i_prime_bound_equality_and_strictness() {
        let b = i_prime_bound_check(&x(), &q(64), 2.0, 0.5).unwrap();
        assert!(b.holds && close(b.lhs, 3.0 * PI / 4.0, 1e-14) && close(b.rhs, 3.0 * PI / 4.0, 1e-14));
        let b = i_prime_bound_check(&ExactSolution::constant(2.0), &q(64), 3.0, 0.5).unwrap();
        assert!(b.holds && close(b.lhs, b.rhs, 1e-14));
        // u = x centered at (0.2, 0): u u_nu < 0 on part of the circle
        let shifted = Quadrature::new([0.2, 0.0], 2048);
        let b = i_prime_bound_check(&x(), &shifted, 2.0, 0.5).unwrap();
        assert!(b.holds && b.lhs < b.rhs - 1e-3, "{b:?}");
    }

    #[test]
    fn energy_identity_examples() {
        let row = energy_identity_residual(&ExactSolution::constant(0.0), &q(64), 2.0, 0.5).unwrap();
        assert_eq!(row.residual, 0.0);
        let row = energy_identity_residual(&x(), &q(64), 3.0, 0.5).unwrap();
        assert!(close(row.left, PI / 4.0, 1e-13) && close(row.right, PI / 4.0, 1e-13));
        assert!(row.residual < 1e-12);
    }

    #[test]
    fn energy_identity_holds_for_catalog_solutions() {
        let cases = [
            (ExactSolution::harmonic_polynomial(3).unwrap(), 2.0),
            (ExactSolution::affine([1.0, 2.0], -0.3), 1.5),
            (ExactSolution::radial_with(3.0, 2, [1.5, 0.0]).unwrap(), 3.0),
            (ExactSolution::radial_with(4.0, 2, [0.0, -1.2]).unwrap(), 4.0),
        ];
        let quad = Quadrature { min_rings: 64, ..q(1024) };
        for (u, p) in &cases {
            let rep = energy_identity_report(u, &quad, *p, &[0.2, 0.5, 0.8]).unwrap();
            assert!(rep.worst <= 1e-8, "{} p={p}: {}", u.id(), rep.worst);
        }
    }

    #[test]
    fn gradient_estimate_examples() {
        let b = grad_estimate_check(&ExactSolution::constant(0.0), &q(64), 2.0, 0.5).unwrap();
        assert!(b.holds && b.lhs == 0.0 && b.rhs == 0.0);
        let b = grad_estimate_check(&x(), &q(64), 2.0, 1.0).unwrap();
        assert!(b.holds && close(b.lhs, 2.0 * PI, 1e-13) && close(b.rhs, 3.0 * PI, 1e-13));
    }

    #[test]
    fn doubling_examples() {
        let grid = radius_grid(0.1, 0.9, 40);
        let prof = frequency_profile(&x(), &q(64), 2.0, 0.1, &grid).unwrap();
        let rep = doubling_scan(&prof).unwrap();
        assert!(close(rep.m, 1.0, 1e-12) && close(rep.eps0, 0.125, 1e-12));
        assert!(rep.pass && rep.ratios.iter().all(|r| r.1 <= 4.0));
        assert!(rep.r_b < rep.r_star && rep.r_star <= rep.r0 && rep.r0 <= 0.9);
        // log(r0 / r_1) <= 1/4 bounds the window
        assert!(rep.r0 <= grid[0] * 0.25f64.exp() + 1e-12);

        let z3 = ExactSolution::harmonic_polynomial(3).unwrap();
        let rep = doubling_scan(&frequency_profile(&z3, &q(128), 2.0, 0.1, &grid).unwrap()).unwrap();
        assert!(close(rep.m, 3.0, 1e-10) && close(rep.eps0, 1.0 / 24.0, 1e-10) && rep.pass);

        let c = ExactSolution::constant(2.0);
        let rep = doubling_scan(&frequency_profile(&c, &q(64), 3.0, 0.1, &grid).unwrap()).unwrap();
        assert_eq!(rep.m, 0.0);
        assert!(rep.eps0.is_infinite() && rep.pass);
        assert_eq!(rep.r_star, rep.r0);
        for (r, ratio) in &rep.ratios {
            assert!(close(*ratio, rep.r_star / r, 1e-12));
        }
    }

    #[test]
    fn doubling_rejects_vanishing_window() {
        let grid = radius_grid(0.1, 0.9, 16);
        let prof = frequency_profile(&Bump, &q(64), 2.0, 0.1, &grid).unwrap();
        assert!(matches!(doubling_scan(&prof), Err(Error::UndefinedFrequency { .. })));
    }

    #[test]
    fn profile_invariants_and_csv_round_trip() {
        let u = ExactSolution::harmonic_polynomial(2).unwrap();
        let grid = radius_grid(0.0, 0.8, 8);
        let prof = frequency_profile(&u, &q(64), 2.5, 0.0, &grid).unwrap();
        for k in 0..prof.len() {
            assert_eq!(prof.f[k], Some(prof.radii[k] * prof.d[k] / prof.i[k]));
        }
        assert_eq!(prof.m, prof.f.iter().flatten().cloned().reduce(f64::max));
        let back = FrequencyProfile::from_csv(&prof.to_csv(), 2.5, O, 0.0).unwrap();
        assert_eq!(back, prof);

        let prof = frequency_profile(&Bump, &q(64), 2.0, 0.0, &grid).unwrap();
        let csv = prof.to_csv();
        assert!(csv.lines().nth(1).unwrap().ends_with(",,0.0000000000000000e0,false"));
        assert_eq!(FrequencyProfile::from_csv(&csv, 2.0, O, 0.0).unwrap(), prof);
    }

    #[test]
    fn profile_rejects_bad_grids() {
        let u = x();
        assert!(frequency_profile(&u, &q(64), 2.0, 0.5, &[0.4, 0.6]).is_err());
        assert!(frequency_profile(&u, &q(64), 2.0, 0.0, &[0.4, 0.4]).is_err());
        assert!(frequency_profile(&u, &q(64), 1.0, 0.0, &[0.4]).is_err());
    }

    #[test]
    fn vanishing_radius_examples() {
        let grid = radius_grid(0.0, 0.9, 90);
        assert_eq!(vanishing_radius(&ExactSolution::constant(0.0), &q(64), &grid, 1e-12).unwrap(), 0.9);
        assert_eq!(vanishing_radius(&x(), &q(64), &grid, 1e-12).unwrap(), 0.0);
        let s = vanishing_radius(&Bump, &q(64), &grid, 1e-12).unwrap();
        assert!((s - 0.5).abs() <= 0.01 + 1e-12, "{s}");
    }

    #[test]
    fn caccioppoli_examples() {
        let c = ExactSolution::constant(3.0);
        assert_eq!(caccioppoli_ratio(&c, &q(64), 2.0, 0.5, 1.0).unwrap(), 0.0);
        assert!(close(caccioppoli_ratio(&x(), &q(64), 2.0, 0.5, 1.0).unwrap(), 0.25, 1e-13));
        assert!(caccioppoli_ratio(&x(), &q(64), 2.0, 1.0, 0.5).is_err());
        assert!(matches!(
            caccioppoli_ratio(&ExactSolution::constant(0.0), &q(64), 2.0, 0.5, 1.0),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn condition_probe_examples() {
        let c = condition_probes(&ExactSolution::constant(2.0), &q(64), 3.0, 0.7).unwrap();
        assert_eq!(c.a1, 0.0);
        assert!(close(c.a2, 0.5, 1e-13));
        let c = condition_probes(&x(), &q(64), 2.0, 1.0).unwrap();
        assert!(close(c.a1, 2.0, 1e-13) && close(c.a2, 0.25, 1e-13));
        assert!(condition_probes(&ExactSolution::constant(0.0), &q(64), 2.0, 0.5).is_err());
    }

    #[test]
    fn poincare_probe_examples() {
        let pr = poincare_probe(&x(), &q(64), 2.0, 1.0, 1e-12).unwrap();
        // the rays at theta = pi/2, 3pi/2 lie on the zero line
        assert!((pr.gamma_hat - 2.0 / 64.0).abs() < 1e-12, "{}", pr.gamma_hat);
        let pr = poincare_probe(&x(), &q(63), 2.0, 1.0, 1e-12).unwrap();
        assert_eq!(pr.gamma_hat, 0.0);
        assert!(close(pr.c_hat, 0.25, 1e-13));
        assert!(matches!(
            poincare_probe(&ExactSolution::constant(1.0), &q(64), 2.0, 1.0, 1e-12),
            Err(Error::ZeroDenominator(_))
        ));
        let pr = poincare_probe(&HalfZero, &q(64), 2.0, 1.0, 1e-12).unwrap();
        assert!((pr.gamma_hat - 0.5).abs() < 0.02, "{}", pr.gamma_hat);
    }

    #[test]
    fn convexity_probe_examples() {
        let grid = radius_grid(0.0, 0.9, 9);
        let c = convexity_probe(&ExactSolution::constant(1.0), &q(64), &grid).unwrap();
        assert!(c.all_hold());
        let c = convexity_probe(&x(), &q(64), &grid).unwrap();
        assert!(c.all_hold());
        assert_eq!(c.bulk_convex.len(), 7);
        assert_eq!(c.normalized_increasing.len(), 8);
        assert!(convexity_probe(&x(), &q(64), &[0.1, 0.2]).is_err());
    }

    #[test]
    fn scaling_covariance() {
        let u = ExactSolution::harmonic_polynomial(2).unwrap();
        let lam = -2.5;
        let v = Scaled { inner: u.clone(), factor: lam };
        let p = 3.0;
        let r = 0.6;
        let f_u = frequency_f(&u, &q(128), p, r).unwrap().unwrap();
        let f_v = frequency_f(&v, &q(128), p, r).unwrap().unwrap();
        assert!(close(f_u, f_v, 1e-12));
        let s = lam.abs().powf(p);
        assert!(close(boundary_i(&v, &q(128), p, r).unwrap(), s * boundary_i(&u, &q(128), p, r).unwrap(), 1e-12));
        assert!(close(bulk_d(&v, &q(128), p, r).unwrap(), s * bulk_d(&u, &q(128), p, r).unwrap(), 1e-12));
        let cu = condition_probes(&u, &q(128), p, r).unwrap();
        let cv = condition_probes(&v, &q(128), p, r).unwrap();
        assert!(close(cu.a1, cv.a1, 1e-12) && close(cu.a2, cv.a2, 1e-12));
    }
}
