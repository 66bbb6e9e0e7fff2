//! Pose beliefs that can be sampled.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::MapError;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Real;

/// Anything that can produce pose-feature samples.
pub trait PoseSampler<F: Real>: Sync {
    fn dim(&self) -> usize;
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<F>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct GaussianBelief<F> {
    pub mean: Vec<F>,
    pub covariance: Vec<Vec<F>>,
    #[serde(skip)]
    factor: Option<Vec<Vec<F>>>,
}

impl<F: Real> GaussianBelief<F> {
    pub fn new(mean: Vec<F>, covariance: Vec<Vec<F>>) -> Result<Self, MapError> {
        let k = mean.len();
        if covariance.len() != k || covariance.iter().any(|r| r.len() != k) {
            return Err(MapError::BadCovariance("shape does not match the mean".into()));
        }
        let tol = F::lit(1e-12);
        for (i, row) in covariance.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().take(i) {
                if (v - covariance[j][i]).abs() > tol {
                    return Err(MapError::BadCovariance(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        let a = Matrix::from_fn(k, k, |r, c| covariance[r][c]);
        let (vals, vecs) = symmetric_eigen(&a).map_err(|e| MapError::BadCovariance(e.to_string()))?;
        if let Some(v) = vals.iter().find(|&&v| v < -tol) {
            return Err(MapError::BadCovariance(format!("negative eigenvalue {}", v.as_f64())));
        }
        // L = V sqrt(max(Lambda, 0)) so that L L^T = Sigma
        let factor = (0..k).map(|r| (0..k).map(|c| vecs[(r, c)] * vals[c].max(F::zero()).sqrt()).collect()).collect();
        Ok(Self { mean, covariance, factor: Some(factor) })
    }

    pub fn diagonal(mean: Vec<F>, variances: &[F]) -> Result<Self, MapError> {
        let k = variances.len();
        let cov = (0..k).map(|r| (0..k).map(|c| if r == c { variances[r] } else { F::zero() }).collect()).collect();
        Self::new(mean, cov)
    }

    /// Same mean with every covariance entry multiplied by `factor`.
    pub fn scaled(&self, factor: F) -> Result<Self, MapError> {
        let cov = self.covariance.iter().map(|r| r.iter().map(|&v| v * factor).collect()).collect();
        Self::new(self.mean.clone(), cov)
    }

    fn factor(&self) -> Vec<Vec<F>> {
        match &self.factor {
            Some(f) => f.clone(),
            None => Self::new(self.mean.clone(), self.covariance.clone()).expect("validated belief").factor.unwrap(),
        }
    }
}

impl<F: Real> PoseSampler<F> for GaussianBelief<F> {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<F> {
        let k = self.mean.len();
        let z: Vec<F> = (0..k).map(|_| F::lit(rng.sample::<f64, _>(StandardNormal))).collect();
        let l = match &self.factor {
            Some(f) => std::borrow::Cow::Borrowed(f),
            None => std::borrow::Cow::Owned(self.factor()),
        };
        (0..k).map(|r| self.mean[r] + (0..k).map(|c| l[r][c] * z[c]).sum::<F>()).collect()
    }
}

/// Equally weighted particles, e.g. from a particle-filter localizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ParticleSet<F> {
    pub particles: Vec<Vec<F>>,
}

impl<F: Real> PoseSampler<F> for ParticleSet<F> {
    fn dim(&self) -> usize {
        self.particles.first().map_or(0, |p| p.len())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<F> {
        self.particles[rng.random_range(0..self.particles.len())].clone()
    }
}
