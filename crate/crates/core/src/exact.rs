//! Closed-form p-harmonic reference solutions.
//!
//! Every member carries analytic first and second derivatives so it can act
//! as Dirichlet data for the solver, as ground truth for the frequency
//! diagnostics, and as a `C^2` input for the linearization residuals.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{dot, norm, sub, Field, Point};
use crate::DIM;

pub type Hessian = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactSolution {
    /// `L(x) = l . x + l0`.
    Affine { l: [f64; 2], l0: f64 },
    /// `Re((x + iy)^k)`, harmonic, so only admissible with `p = 2`.
    HarmonicPolynomial { k: u32 },
    /// Radial fundamental solution `|x - c|^{(p-n)/(p-1)}`, or `log|x - c|`
    /// when `p = n`.
    RadialFundamental { p: f64, n: usize, center: Point },
    Constant { c: f64 },
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")))
    }
}

impl ExactSolution {
    pub fn affine(l: [f64; 2], l0: f64) -> Self {
        Self::Affine { l, l0 }
    }

    pub fn constant(c: f64) -> Self {
        Self::Constant { c }
    }

    pub fn harmonic_polynomial(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "harmonic polynomial degree must be positive".into(),
            ));
        }
        Ok(Self::HarmonicPolynomial { k })
    }

    /// Planar radial solution centered at the origin.
    pub fn radial(p: f64) -> Result<Self> {
        Self::radial_with(p, DIM, [0.0, 0.0])
    }

    pub fn radial_with(p: f64, n: usize, center: Point) -> Result<Self> {
        check_exponent(p)?;
        if n < 2 {
            return Err(Error::InvalidParameter(format!("dimension n must be >= 2, got {n}")));
        }
        Ok(Self::RadialFundamental { p, n, center })
    }

    /// Parses a catalog id such as `affine:2,0,1`, `harmpoly:3`, `radial`,
    /// `radial:3` or `const:1.5`.
    ///
    /// A bare `radial` takes its exponent from `p`.
    pub fn from_id(id: &str, p: f64) -> Result<Self> {
        let bad = || Error::UnknownCatalogId(id.to_string());
        let (name, args) = match id.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (id.trim(), None),
        };
        let numbers = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        match (name, args) {
            ("affine", Some(a)) => match numbers(a)?.as_slice() {
                [l1, l2, l0] => Ok(Self::affine([*l1, *l2], *l0)),
                [l1, l2] => Ok(Self::affine([*l1, *l2], 0.0)),
                _ => Err(bad()),
            },
            ("harmpoly", Some(a)) => {
                let k: u32 = a.parse().map_err(|_| bad())?;
                Self::harmonic_polynomial(k)
            }
            ("radial", None) => Self::radial(p),
            ("radial", Some(a)) => match numbers(a)?.as_slice() {
                [q] => Self::radial(*q),
                [q, cx, cy] => Self::radial_with(*q, DIM, [*cx, *cy]),
                _ => Err(bad()),
            },
            ("const" | "constant", Some(a)) => match numbers(a)?.as_slice() {
                [c] => Ok(Self::constant(*c)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }

    pub fn id(&self) -> String {
        match self {
            Self::Affine { l, l0 } => format!("affine:{},{},{}", l[0], l[1], l0),
            Self::HarmonicPolynomial { k } => format!("harmpoly:{k}"),
            Self::RadialFundamental { p, center, .. } if *center == [0.0, 0.0] => {
                format!("radial:{p}")
            }
            Self::RadialFundamental { p, center, .. } => {
                format!("radial:{p},{},{}", center[0], center[1])
            }
            Self::Constant { c } => format!("const:{c}"),
        }
    }

    /// Whether the member solves the p-Laplace equation for this `p`.
    pub fn admits(&self, p: f64) -> bool {
        match self {
            Self::Affine { .. } | Self::Constant { .. } => p > 1.0 && p.is_finite(),
            Self::HarmonicPolynomial { .. } => p == 2.0,
            Self::RadialFundamental { p: own, .. } => (own - p).abs() <= 1e-12 * own.abs(),
        }
    }

    /// Exponent of the radial member; `None` for the logarithmic case `p = n`.
    pub fn radial_exponent(p: f64, n: usize) -> Option<f64> {
        let n = n as f64;
        if (p - n).abs() <= 1e-14 * n {
            None
        } else {
            Some((p - n) / (p - 1.0))
        }
    }

    fn radial_offset(center: Point, x: Point) -> Result<([f64; 2], f64)> {
        let d = sub(x, center);
        let rho = norm(d);
        if rho == 0.0 {
            return Err(Error::DomainViolation {
                point: x,
                reason: "radial solution is singular at its center",
            });
        }
        Ok((d, rho))
    }

    pub fn eval(&self, x: Point) -> Result<f64> {
        match self {
            Self::Affine { l, l0 } => Ok(dot(*l, x) + l0),
            Self::HarmonicPolynomial { k } => Ok(Complex64::new(x[0], x[1]).powu(*k).re),
            Self::RadialFundamental { p, n, center } => {
                let (_, rho) = Self::radial_offset(*center, x)?;
                Ok(match Self::radial_exponent(*p, *n) {
                    Some(a) => rho.powf(a),
                    None => rho.ln(),
                })
            }
            Self::Constant { c } => Ok(*c),
        }
    }

    pub fn grad(&self, x: Point) -> Result<[f64; 2]> {
        match self {
            Self::Affine { l, .. } => Ok(*l),
            Self::HarmonicPolynomial { k } => {
                // d/dx z^k = k z^{k-1}, d/dy z^k = i k z^{k-1}
                let w = Complex64::new(x[0], x[1]).powu(k - 1) * (*k as f64);
                Ok([w.re, -w.im])
            }
            Self::RadialFundamental { p, n, center } => {
                let (d, rho) = Self::radial_offset(*center, x)?;
                let s = match Self::radial_exponent(*p, *n) {
                    Some(a) => a * rho.powf(a - 2.0),
                    None => rho.powi(-2),
                };
                Ok([s * d[0], s * d[1]])
            }
            Self::Constant { .. } => Ok([0.0, 0.0]),
        }
    }

    pub fn hessian(&self, x: Point) -> Result<Hessian> {
        match self {
            Self::Affine { .. } | Self::Constant { .. } => Ok([[0.0; 2]; 2]),
            Self::HarmonicPolynomial { k } => {
                if *k < 2 {
                    return Ok([[0.0; 2]; 2]);
                }
                let w = Complex64::new(x[0], x[1]).powu(k - 2) * ((k * (k - 1)) as f64);
                Ok([[w.re, -w.im], [-w.im, -w.re]])
            }
            Self::RadialFundamental { p, n, center } => {
                let (d, rho) = Self::radial_offset(*center, x)?;
                // u = f(rho): H = f'/rho I + (f'' - f'/rho) d d^T / rho^2
                let (f1_over_rho, f2) = match Self::radial_exponent(*p, *n) {
                    Some(a) => (a * rho.powf(a - 2.0), a * (a - 1.0) * rho.powf(a - 2.0)),
                    None => (rho.powi(-2), -rho.powi(-2)),
                };
                let c = (f2 - f1_over_rho) / (rho * rho);
                Ok([
                    [f1_over_rho + c * d[0] * d[0], c * d[0] * d[1]],
                    [c * d[1] * d[0], f1_over_rho + c * d[1] * d[1]],
                ])
            }
        }
    }
}

impl Field for ExactSolution {
    fn value(&self, x: Point) -> Result<f64> {
        self.eval(x)
    }
    fn gradient(&self, x: Point) -> Result<[f64; 2]> {
        self.grad(x)
    }
}

/// `|grad u|^2 lap u + (p - 2) sum_ij u_i u_j u_ij`, the nondivergence form of
/// the p-Laplacian with the factor `|grad u|^{p-4}` removed.
pub fn p_laplace_nondivergence(g: [f64; 2], h: &Hessian, p: f64) -> f64 {
    let lap = h[0][0] + h[1][1];
    let ghg = g[0] * (h[0][0] * g[0] + h[0][1] * g[1]) + g[1] * (h[1][0] * g[0] + h[1][1] * g[1]);
    dot(g, g) * lap + (p - 2.0) * ghg
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct HarmonicityCheck {
    pub max_residual: f64,
    pub checked: usize,
    /// Critical points (`grad u = 0`) excluded from the maximum.
    pub skipped: Vec<Point>,
}

/// Maximum of the nondivergence p-Laplace residual over `sample`.
pub fn verify_p_harmonic(sol: &ExactSolution, p: f64, sample: &[Point]) -> Result<HarmonicityCheck> {
    check_exponent(p)?;
    if !sol.admits(p) {
        return Err(Error::InadmissibleExponent { p, what: sol.id() });
    }
    let mut out = HarmonicityCheck::default();
    for &x in sample {
        let g = sol.grad(x)?;
        if g == [0.0, 0.0] {
            out.skipped.push(x);
            continue;
        }
        let r = p_laplace_nondivergence(g, &sol.hessian(x)?, p).abs();
        out.max_residual = out.max_residual.max(r);
        out.checked += 1;
    }
    Ok(out)
}
