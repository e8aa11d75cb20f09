//! Minimal dense linear algebra for small state dimensions.
//!
//! State vectors in these models are short (a level, a few regression
//! coefficients, a handful of Fourier harmonics), so a plain row-major
//! square matrix over `Vec<f64>` is all that is needed.

use alloc::{vec, vec::Vec};

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        Matrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Computes `G * self * G'`.
    pub fn sandwich(&self, g: &Matrix) -> Matrix {
        let n = self.n;
        let gc = g.matmul(self);
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += gc[(i, k)] * g[(j, k)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// Quadratic form `x' * self * x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let ri: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            s += x[i] * ri;
        }
        s
    }

    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    /// Lower-triangular Cholesky factor of a PSD matrix. Pivots below
    /// `tol` are treated as zero (their column is zeroed), so positive
    /// semi-definite inputs factor cleanly; a pivot below `-tol` fails.
    pub fn cholesky(&self, tol: f64) -> Result<Matrix> {
        let n = self.n;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= tol {
                if d < -tol {
                    return Err(Error::numerical("matrix not positive semi-definite"));
                }
                continue; // semi-definite direction, leave column zero
            }
            let dj = libm::sqrt(d);
            l[(j, j)] = dj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(l)
    }

    /// Eigenvalues and eigenvectors of a symmetric matrix via cyclic
    /// Jacobi rotations. Returns `(values, vectors)` with eigenvectors as
    /// columns of the returned matrix.
    pub fn sym_eigen(&self) -> (Vec<f64>, Matrix) {
        let n = self.n;
        let mut a = self.clone();
        a.symmetrize();
        let mut v = Matrix::identity(n);
        for _sweep in 0..64 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off < 1e-30 * (1.0 + a.trace() * a.trace()) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                    } else {
                        -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                    };
                    let c = 1.0 / libm::sqrt(1.0 + t * t);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let vals = (0..n).map(|i| a[(i, i)]).collect();
        (vals, v)
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sandwich_matches_manual() {
        let c = Matrix::from_rows(2, vec![4.0, 2.0, 2.0, 9.0]);
        let g = Matrix::from_rows(2, vec![1.0, 1.0, 0.0, 1.0]);
        let p = c.sandwich(&g);
        // G C G' = [[17, 11], [11, 9]]
        assert!((p[(0, 0)] - 17.0).abs() < 1e-12);
        assert!((p[(0, 1)] - 11.0).abs() < 1e-12);
        assert!((p[(1, 1)] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigen_recovers_spectrum() {
        let m = Matrix::from_rows(3, vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let (mut vals, vecs) = m.sym_eigen();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // eigenvalues of this tridiagonal matrix: 3 - sqrt(3)... check via trace/det
        let trace: f64 = vals.iter().sum();
        assert!((trace - 7.0).abs() < 1e-10);
        let det: f64 = vals.iter().product();
        assert!((det - 8.0).abs() < 1e-9);
        // vectors orthonormal
        for i in 0..3 {
            let col: Vec<f64> = (0..3).map(|k| vecs[(k, i)]).collect();
            assert!((dot(&col, &col) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_roundtrip() {
        let m = Matrix::from_rows(2, vec![4.0, 2.0, 2.0, 9.0]);
        let l = m.cholesky(1e-12).unwrap();
        let mut back = Matrix::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    back[(i, j)] += l[(i, k)] * l[(j, k)];
                }
            }
        }
        assert!((back[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((back[(1, 1)] - 9.0).abs() < 1e-12);
    }
}
