//! Common read-only interface over discrete and analytic scalar fields.

use crate::error::Result;

pub type Point = [f64; 2];

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn sub(a: Point, b: Point) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// A scalar field that can be sampled pointwise together with its gradient.
///
/// Implemented by P1 finite element fields ([`crate::ScalarField`]) and by the
/// closed-form catalog ([`crate::ExactSolution`]), so every quadrature in
/// [`crate::frequency`] runs unchanged on both.
pub trait Field: Sync {
    fn value(&self, x: Point) -> Result<f64>;

    fn gradient(&self, x: Point) -> Result<[f64; 2]>;

    fn value_and_gradient(&self, x: Point) -> Result<(f64, [f64; 2])> {
        Ok((self.value(x)?, self.gradient(x)?))
    }

    /// Characteristic element size, if the field is discrete.
    fn resolution(&self) -> Option<f64> {
        None
    }

    /// Largest nodal magnitude `max |u|`, if the field is discrete.
    fn nodal_max_abs(&self) -> Option<f64> {
        None
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn value(&self, x: Point) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: Point) -> Result<[f64; 2]> {
        (**self).gradient(x)
    }
    fn value_and_gradient(&self, x: Point) -> Result<(f64, [f64; 2])> {
        (**self).value_and_gradient(x)
    }
    fn resolution(&self) -> Option<f64> {
        (**self).resolution()
    }
    fn nodal_max_abs(&self) -> Option<f64> {
        (**self).nodal_max_abs()
    }
}

/// `lambda * u` without copying the underlying field.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<F> {
    pub inner: F,
    pub factor: f64,
}

impl<F: Field> Field for Scaled<F> {
    fn value(&self, x: Point) -> Result<f64> {
        Ok(self.factor * self.inner.value(x)?)
    }
    fn gradient(&self, x: Point) -> Result<[f64; 2]> {
        let g = self.inner.gradient(x)?;
        Ok([self.factor * g[0], self.factor * g[1]])
    }
    fn value_and_gradient(&self, x: Point) -> Result<(f64, [f64; 2])> {
        let (v, g) = self.inner.value_and_gradient(x)?;
        Ok((self.factor * v, [self.factor * g[0], self.factor * g[1]]))
    }
    fn resolution(&self) -> Option<f64> {
        self.inner.resolution()
    }
    fn nodal_max_abs(&self) -> Option<f64> {
        self.inner.nodal_max_abs().map(|m| m * self.factor.abs())
    }
}
