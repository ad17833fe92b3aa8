//! Compressed sparse row storage and Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the sparsity pattern from per-row column lists; values start at zero.
    pub fn with_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        cols.binary_search(&col).ok().map(|k| self.row_ptr[row] + k)
    }

    /// Adds `v` to entry `(row, col)`; the entry must be in the pattern.
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let k = self.slot(row, col).expect("entry outside sparsity pattern");
        self.values[k] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            *yi = self.col_idx[a..b].iter().zip(&self.values[a..b]).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .all(|k| (self.values[k] - self.get(self.col_idx[k], i)).abs() <= tol)
        })
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for SPD `A` from initial guess `x`, stopping once
/// `||b - A x|| <= rel_tol ||b||`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = a.n();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome { iterations: 0, relative_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { f64::NAN })
        .collect();
    if inv_diag.iter().any(|d| !d.is_finite()) {
        return Err(Error::LinearSolver("non-positive diagonal entry".into()));
    }
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / b_norm;
    for it in 0..max_iter {
        if res <= rel_tol {
            return Ok(CgOutcome { iterations: it, relative_residual: res });
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::LinearSolver(format!("matrix not positive definite (p'Ap = {pap})")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / b_norm;
    }
    if res <= rel_tol {
        return Ok(CgOutcome { iterations: max_iter, relative_residual: res });
    }
    Err(Error::LinearSolver(format!(
        "conjugate gradients stalled at relative residual {res:.3e} after {max_iter} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut c = vec![i];
                if i > 0 {
                    c.push(i - 1);
                }
                if i + 1 < n {
                    c.push(i + 1);
                }
                c
            })
            .collect();
        let mut a = CsrMatrix::with_pattern(rows);
        for i in 0..n {
            a.add(i, i, 2.0 + i as f64 * 0.01);
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
                a.add(i + 1, i, -1.0);
            }
        }
        a
    }

    #[test]
    fn solves_tridiagonal_system() {
        let a = laplace_1d(50);
        assert!(a.is_symmetric(0.0));
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; 50];
        a.mul_vec(&x_true, &mut b);
        let mut x = vec![0.0; 50];
        let out = pcg(&a, &b, &mut x, 1e-13, 500).unwrap();
        assert!(out.relative_residual <= 1e-13);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_1d(5);
        let mut x = vec![1.0; 5];
        let out = pcg(&a, &[0.0; 5], &mut x, 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(x, vec![0.0; 5]);
    }

    #[test]
    fn reports_indefinite_matrix() {
        let mut a = CsrMatrix::with_pattern(vec![vec![0, 1], vec![0, 1]]);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(0, 1, 3.0);
        a.add(1, 0, 3.0);
        let mut x = vec![0.0; 2];
        assert!(pcg(&a, &[1.0, -1.0], &mut x, 1e-12, 10).is_err());
    }
}
