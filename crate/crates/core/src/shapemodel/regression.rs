//! Quadratic regression from object features to deformation-mode values.

use serde::{Deserialize, Serialize};

use super::ShapeError;
use crate::geometry::ObjectFeatures;
use crate::linalg::{least_squares, Matrix};
use crate::scalar::Real;

/// Upper-triangular `W` with `b = q^T W q`, `q = [dx, dpsi, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct QuadForm<F> {
    pub w: [[F; 3]; 3],
}

impl<F: Real> QuadForm<F> {
    pub fn zero() -> Self {
        Self { w: [[F::zero(); 3]; 3] }
    }

    /// Coefficients in monomial order `dx^2, dx*dpsi, dx, dpsi^2, dpsi, 1`.
    pub fn from_coefficients(c: &[F; 6]) -> Self {
        let z = F::zero();
        Self { w: [[c[0], c[1], c[2]], [z, c[3], c[4]], [z, z, c[5]]] }
    }

    pub fn coefficients(&self) -> [F; 6] {
        let w = &self.w;
        [w[0][0], w[0][1], w[0][2], w[1][1], w[1][2], w[2][2]]
    }

    pub fn eval(&self, f: &ObjectFeatures<F>) -> F {
        let q = [f.dx_obj, f.dpsi_obj, F::one()];
        let mut s = F::zero();
        for (r, row) in self.w.iter().enumerate() {
            for (c, &w) in row.iter().enumerate() {
                s += q[r] * w * q[c];
            }
        }
        s
    }
}

pub fn monomials<F: Real>(f: &ObjectFeatures<F>) -> [F; 6] {
    let (x, p) = (f.dx_obj, f.dpsi_obj);
    [x * x, x * p, x, p * p, p, F::one()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct RegressionModel<F> {
    /// One quadratic form per deformation mode.
    pub modes: Vec<QuadForm<F>>,
    pub r_squared: Vec<F>,
}

impl<F: Real> RegressionModel<F> {
    pub fn predict(&self, f: &ObjectFeatures<F>) -> Vec<F> {
        self.modes.iter().map(|w| w.eval(f)).collect()
    }
}

/// `b[j]` holds the mode values of training pose `j`.
pub fn fit_regression<F: Real>(b: &[Vec<F>], poses: &[ObjectFeatures<F>]) -> Result<RegressionModel<F>, ShapeError> {
    let n = poses.len();
    if b.len() != n {
        return Err(ShapeError::PoseCount(b.len(), n));
    }
    if n < 6 {
        return Err(ShapeError::TooFewShapes(n));
    }
    let d = b[0].len();
    let design = Matrix::from_fn(n, 6, |r, c| monomials(&poses[r])[c]);
    let mut modes = Vec::with_capacity(d);
    let mut r_squared = Vec::with_capacity(d);
    for i in 0..d {
        let y: Vec<F> = b.iter().map(|row| row[i]).collect();
        let coef = least_squares(&design, &y).map_err(|_| ShapeError::RankDeficientDesign)?;
        let w = QuadForm::from_coefficients(&[coef[0], coef[1], coef[2], coef[3], coef[4], coef[5]]);
        let mean = y.iter().copied().sum::<F>() / F::count(n);
        let ss_tot: F = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
        let ss_res: F = y.iter().zip(poses).map(|(&v, p)| (v - w.eval(p)) * (v - w.eval(p))).sum();
        let r2 = if ss_tot > F::zero() { F::one() - ss_res / ss_tot } else { F::one() };
        modes.push(w);
        r_squared.push(r2);
    }
    Ok(RegressionModel { modes, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_matches_monomials() {
        let c = [1.0, -2.0, 0.5, 3.0, 0.25, -1.0];
        let w = QuadForm::from_coefficients(&c);
        let f = ObjectFeatures::new(0.3, 1.1);
        let m = monomials(&f);
        let direct: f64 = c.iter().zip(&m).map(|(a, b)| a * b).sum();
        assert!((w.eval(&f) - direct).abs() < 1e-14);
        assert_eq!(w.w[1][0], 0.0);
        assert_eq!(w.coefficients(), c);
    }

    #[test]
    fn too_few_poses() {
        let poses = vec![ObjectFeatures::new(0.1, 1.0); 5];
        let b = vec![vec![0.0]; 5];
        assert_eq!(fit_regression(&b, &poses), Err(ShapeError::TooFewShapes(5)));
    }

    #[test]
    fn collinear_poses_are_rank_deficient() {
        let poses: Vec<_> = (0..8).map(|i| ObjectFeatures::new(0.1, 1.0 + 0.1 * i as f64)).collect();
        let b = vec![vec![0.0]; 8];
        assert_eq!(fit_regression(&b, &poses), Err(ShapeError::RankDeficientDesign));
    }
}
