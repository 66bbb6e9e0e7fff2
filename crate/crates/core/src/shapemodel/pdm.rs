//! Landmark matrices and the point distribution model.

use serde::{Deserialize, Serialize};

use super::ShapeError;
use crate::classifier::Boundary;
use crate::geometry::{ObjectFeatures, Point2};
use crate::linalg::{fix_sign, symmetric_eigen, Matrix};
use crate::scalar::Real;

/// One column per object pose: `[x_1..x_m, y_1..y_m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct BoundaryMatrix<F> {
    pub m: usize,
    pub columns: Vec<Vec<F>>,
    pub object_poses: Vec<ObjectFeatures<F>>,
}

impl<F: Real> BoundaryMatrix<F> {
    pub fn rows(&self) -> usize {
        2 * self.m
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn boundary(&self, j: usize) -> Boundary<F> {
        column_to_boundary(&self.columns[j], self.m)
    }
}

pub fn boundary_to_column<F: Real>(b: &Boundary<F>) -> Vec<F> {
    b.landmarks.iter().map(|p| p.x).chain(b.landmarks.iter().map(|p| p.y)).collect()
}

pub fn column_to_boundary<F: Real>(h: &[F], m: usize) -> Boundary<F> {
    Boundary { landmarks: (0..m).map(|k| Point2::new(h[k], h[m + k])).collect() }
}

pub fn assemble_h<F: Real>(boundaries: &[Boundary<F>], object_poses: &[ObjectFeatures<F>]) -> Result<BoundaryMatrix<F>, ShapeError> {
    if boundaries.is_empty() {
        return Err(ShapeError::Empty);
    }
    if boundaries.len() != object_poses.len() {
        return Err(ShapeError::PoseCount(boundaries.len(), object_poses.len()));
    }
    let m = boundaries[0].len();
    if let Some(b) = boundaries.iter().find(|b| b.len() != m) {
        return Err(ShapeError::LandmarkCount(m, b.len()));
    }
    Ok(BoundaryMatrix { m, columns: boundaries.iter().map(boundary_to_column).collect(), object_poses: object_poses.to_vec() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Pdm<F> {
    pub m: usize,
    pub d: usize,
    pub mean: Vec<F>,
    /// `d` orthonormal columns of length `2m`.
    pub modes: Vec<Vec<F>>,
    /// Top-`d` eigenvalues, descending.
    pub eigenvalues: Vec<F>,
    /// Non-negative eigenvalue spectrum of the covariance (at most N-1 entries).
    pub spectrum: Vec<F>,
}

impl<F: Real> Pdm<F> {
    /// Fraction of total variance in the first `k` modes.
    pub fn energy(&self, k: usize) -> F {
        let total: F = self.spectrum.iter().copied().sum();
        if total <= F::zero() {
            return F::one();
        }
        self.spectrum.iter().take(k).copied().sum::<F>() / total
    }

    /// `b = P^T (h - mean)`.
    pub fn project(&self, h: &[F]) -> Vec<F> {
        self.modes
            .iter()
            .map(|p| p.iter().zip(h.iter().zip(&self.mean)).map(|(&pk, (&hk, &mk))| pk * (hk - mk)).sum())
            .collect()
    }

    pub fn reconstruct_column(&self, b: &[F]) -> Vec<F> {
        let mut h = self.mean.clone();
        for (p, &bi) in self.modes.iter().zip(b) {
            for (hk, &pk) in h.iter_mut().zip(p) {
                *hk += pk * bi;
            }
        }
        h
    }

    pub fn reconstruct(&self, b: &[F]) -> Result<Boundary<F>, ShapeError> {
        if b.len() != self.d {
            return Err(ShapeError::ModeCount(self.d, b.len()));
        }
        Ok(column_to_boundary(&self.reconstruct_column(b), self.m))
    }

    /// Mean distance between each landmark of `h` and its projection onto the model.
    pub fn mean_landmark_error(&self, h: &[F]) -> F {
        let r = self.reconstruct_column(&self.project(h));
        let m = self.m;
        (0..m).map(|k| Point2::new(h[k] - r[k], h[m + k] - r[m + k]).norm()).sum::<F>() / F::count(m)
    }
}

pub fn fit_pdm<F: Real>(hm: &BoundaryMatrix<F>, d: usize) -> Result<Pdm<F>, ShapeError> {
    fit_pdm_columns(&hm.columns, hm.m, d)
}

pub(crate) fn fit_pdm_columns<F: Real>(columns: &[Vec<F>], m: usize, d: usize) -> Result<Pdm<F>, ShapeError> {
    let n = columns.len();
    let rows = 2 * m;
    if n < 2 {
        return Err(ShapeError::TooFewShapes(n));
    }
    if d == 0 || d > rows.min(n - 1) {
        return Err(ShapeError::BadModeCount { d, max: rows.min(n - 1) });
    }
    let mut mean = vec![F::zero(); rows];
    for c in columns {
        for (mk, &ck) in mean.iter_mut().zip(c) {
            *mk += ck;
        }
    }
    mean.iter_mut().for_each(|x| *x /= F::count(n));
    let centred: Vec<Vec<F>> = columns.iter().map(|c| c.iter().zip(&mean).map(|(&a, &b)| a - b).collect()).collect();
    let denom = F::count(n - 1);

    // Snapshot form: eigenvectors of the N x N Gram matrix map to covariance eigenvectors.
    let gram = Matrix::from_fn(n, n, |a, b| centred[a].iter().zip(&centred[b]).map(|(&x, &y)| x * y).sum::<F>() / denom);
    let (vals, vecs) = symmetric_eigen(&gram)?;
    let spectrum: Vec<F> = vals.iter().take(n - 1).map(|&v| v.max(F::zero())).collect();
    let top = spectrum.first().copied().unwrap_or(F::zero());
    let scale = mean.iter().fold(F::zero(), |s, x| s.max(x.abs())).max(F::one());
    if top <= F::lit(1e-24) * scale * scale {
        return Err(ShapeError::NoVariation);
    }

    let tiny = F::lit(1e-12) * top;
    let mut modes: Vec<Vec<F>> = Vec::with_capacity(d);
    for i in 0..d {
        let mut u = vec![F::zero(); rows];
        if spectrum[i] > tiny {
            let s = (spectrum[i] * denom).sqrt();
            for (a, col) in centred.iter().enumerate() {
                let w = vecs[(a, i)] / s;
                for (uk, &ck) in u.iter_mut().zip(col) {
                    *uk += w * ck;
                }
            }
        }
        // re-orthonormalize; zero-variance modes are completed from the standard basis
        let mut basis = 0;
        loop {
            for p in &modes {
                let dot: F = p.iter().zip(&u).map(|(&a, &b)| a * b).sum();
                u.iter_mut().zip(p).for_each(|(x, &pk)| *x -= dot * pk);
            }
            let norm = u.iter().map(|&x| x * x).sum::<F>().sqrt();
            if norm > F::lit(1e-6) {
                u.iter_mut().for_each(|x| *x /= norm);
                break;
            }
            u = vec![F::zero(); rows];
            u[basis] = F::one();
            basis += 1;
        }
        fix_sign(&mut u);
        modes.push(u);
    }
    Ok(Pdm { m, d, mean, modes, eigenvalues: spectrum[..d].to_vec(), spectrum })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(s: f64, dx: f64) -> Boundary<f64> {
        Boundary {
            landmarks: vec![
                Point2::new(dx, 0.0),
                Point2::new(dx + s, 0.0),
                Point2::new(dx + s, s),
                Point2::new(dx, s),
            ],
        }
    }

    #[test]
    fn assemble_round_trip() {
        let bs = vec![square(1.0, 0.0), square(2.0, 0.5)];
        let poses = vec![ObjectFeatures::new(0.1, 1.0), ObjectFeatures::new(0.2, 1.0)];
        let h = assemble_h(&bs, &poses).unwrap();
        assert_eq!(h.rows(), 8);
        assert_eq!(h.columns[1][4..], [0.0, 0.0, 2.0, 2.0]);
        assert_eq!(h.boundary(1), bs[1]);
    }

    #[test]
    fn mismatched_landmarks_rejected() {
        let mut b = square(1.0, 0.0);
        b.landmarks.pop();
        let r = assemble_h(&[square(1.0, 0.0), b], &[ObjectFeatures::new(0.0, 0.0); 2]);
        assert_eq!(r, Err(ShapeError::LandmarkCount(4, 3)));
    }

    #[test]
    fn two_point_pca() {
        let h = assemble_h(&[square(1.0, 0.0), square(1.5, 0.2)], &[ObjectFeatures::new(0.0, 0.0); 2]).unwrap();
        let pdm = fit_pdm(&h, 1).unwrap();
        for c in &h.columns {
            let r = pdm.reconstruct_column(&pdm.project(c));
            for (a, b) in r.iter().zip(c) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        assert!((pdm.energy(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_columns_have_no_variation() {
        let h = assemble_h(&[square(1.0, 0.0), square(1.0, 0.0)], &[ObjectFeatures::new(0.0, 0.0); 2]).unwrap();
        assert_eq!(fit_pdm(&h, 1), Err(ShapeError::NoVariation));
    }

    #[test]
    fn mode_count_bounds() {
        let h = assemble_h(&[square(1.0, 0.0), square(1.5, 0.2)], &[ObjectFeatures::new(0.0, 0.0); 2]).unwrap();
        assert!(matches!(fit_pdm(&h, 2), Err(ShapeError::BadModeCount { d: 2, max: 1 })));
        assert!(matches!(fit_pdm(&h, 0), Err(ShapeError::BadModeCount { .. })));
    }
}
