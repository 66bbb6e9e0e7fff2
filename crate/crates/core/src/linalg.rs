//! Small dense kernels: symmetric eigendecomposition (cyclic Jacobi) and
//! least squares by Householder QR.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("rank-deficient design matrix (column {0})")]
    RankDeficient(usize),
    #[error("Jacobi iteration did not converge")]
    NoConvergence,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn column(&self, c: usize) -> Vec<F> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, o: &Self) -> Result<Self, LinalgError> {
        if self.cols != o.rows {
            return Err(LinalgError::Dimension("matmul inner sizes differ"));
        }
        let mut out = Self::zeros(self.rows, o.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == F::zero() {
                    continue;
                }
                for c in 0..o.cols {
                    out.data[r * o.cols + c] += a * o.data[k * o.cols + c];
                }
            }
        }
        Ok(out)
    }
}

impl<F> std::ops::Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    fn index(&self, (r, c): (usize, usize)) -> &F {
        &self.data[r * self.cols + c]
    }
}

impl<F> std::ops::IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut F {
        &mut self.data[r * self.cols + c]
    }
}

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue. Eigenvectors
/// are the columns of the returned matrix.
pub fn symmetric_eigen<F: Real>(a: &Matrix<F>) -> Result<(Vec<F>, Matrix<F>), LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::NotSquare(a.rows, a.cols));
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let frob: F = m.data.iter().map(|&x| x * x).sum();
    let eps = F::epsilon() * F::epsilon() * frob;
    let mut converged = n < 2;
    for _ in 0..100 {
        let mut off = F::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off <= eps {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == F::zero() {
                    continue;
                }
                let (app, aqq) = (m[(p, p)], m[(q, q)]);
                let theta = (aqq - app) / (F::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Like [`symmetric_eigen`], starting from an approximate eigenbasis `guess`
/// (orthogonal). Converges in few sweeps when `a` is close to diagonal in that basis.
pub fn symmetric_eigen_from<F: Real>(a: &Matrix<F>, guess: &Matrix<F>) -> Result<(Vec<F>, Matrix<F>), LinalgError> {
    if guess.rows != a.rows || guess.cols != a.cols {
        return Err(LinalgError::Dimension("guess must match the matrix shape"));
    }
    let b = guess.transpose().matmul(a)?.matmul(guess)?;
    let (vals, w) = symmetric_eigen(&b)?;
    Ok((vals, guess.matmul(&w)?))
}

/// Flips `v` so its largest-magnitude component (first on ties) is positive.
pub fn fix_sign<F: Real>(v: &mut [F]) {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = k;
        }
    }
    if v.get(best).is_some_and(|&x| x < F::zero()) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Minimizes ||A x - b|| for a full-column-rank `A` (rows >= cols).
pub fn least_squares<F: Real>(a: &Matrix<F>, b: &[F]) -> Result<Vec<F>, LinalgError> {
    let (n, p) = (a.rows, a.cols);
    if b.len() != n {
        return Err(LinalgError::Dimension("rhs length differs from row count"));
    }
    if n < p {
        return Err(LinalgError::RankDeficient(n));
    }
    let mut r = a.clone();
    let mut y = b.to_vec();
    let scale = r.data.iter().fold(F::zero(), |s, x| s.max(x.abs()));
    for k in 0..p {
        let norm = (k..n).map(|i| r[(i, k)] * r[(i, k)]).sum::<F>().sqrt();
        if norm <= F::lit(1e-10) * scale.max(F::min_positive_value()) {
            return Err(LinalgError::RankDeficient(k));
        }
        let alpha = if r[(k, k)] > F::zero() { -norm } else { norm };
        let mut v: Vec<F> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: F = v.iter().map(|&x| x * x).sum();
        if vnorm2 > F::zero() {
            for c in k..p {
                let dot: F = (k..n).map(|i| v[i - k] * r[(i, c)]).sum();
                let f = F::lit(2.0) * dot / vnorm2;
                for i in k..n {
                    r[(i, c)] -= f * v[i - k];
                }
            }
            let dot: F = (k..n).map(|i| v[i - k] * y[i]).sum();
            let f = F::lit(2.0) * dot / vnorm2;
            for i in k..n {
                y[i] -= f * v[i - k];
            }
        }
    }
    let mut x = vec![F::zero(); p];
    for k in (0..p).rev() {
        let mut s = y[k];
        for c in k + 1..p {
            s -= r[(k, c)] * x[c];
        }
        x[k] = s / r[(k, k)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_2x2() {
        let a = Matrix::<f64> { rows: 2, cols: 2, data: vec![2.0, 1.0, 1.0, 2.0] };
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[(0, 0)].abs() - s).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let n = 6;
        let a = Matrix::from_fn(n, n, |r, c| 1.0 / (1.0 + r as f64 + c as f64) + if r == c { 0.3 } else { 0.0 });
        let (vals, v) = symmetric_eigen(&a).unwrap();
        let d = Matrix::from_fn(n, n, |r, c| if r == c { vals[r] } else { 0.0 });
        let back = v.matmul(&d).unwrap().matmul(&v.transpose()).unwrap();
        for (x, y) in back.data.iter().zip(&a.data) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn warm_start_matches_cold() {
        let n = 5;
        let a = Matrix::from_fn(n, n, |r, c| ((r * 3 + c * 3) % 7) as f64 + if r == c { 2.0 } else { 0.0 });
        let (cold, v) = symmetric_eigen(&a).unwrap();
        let mut b = a.clone();
        b[(0, 1)] += 1e-3;
        b[(1, 0)] += 1e-3;
        let (warm, _) = symmetric_eigen_from(&b, &v).unwrap();
        let (reference, _) = symmetric_eigen(&b).unwrap();
        for (x, y) in warm.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((cold[0] - warm[0]).abs() < 1e-2);
    }

    #[test]
    fn exact_line_fit() {
        let a = Matrix::from_fn(5, 2, |r, c| if c == 0 { r as f64 } else { 1.0 });
        let b: Vec<f64> = (0..5).map(|r| 3.0 * r as f64 - 2.0).collect();
        let x = least_squares(&a, &b).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_detected() {
        let a = Matrix::from_fn(4, 2, |r, _| r as f64);
        assert!(matches!(least_squares(&a, &[0.0; 4]), Err(LinalgError::RankDeficient(1))));
    }

    #[test]
    fn sign_rule() {
        let mut v = vec![0.1, -0.9, 0.2];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.2]);
    }
}
