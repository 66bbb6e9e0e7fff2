//! Monte Carlo place maps and robot-pose conditioning.

use rand::Rng;
use rayon::prelude::*;

use super::belief::PoseSampler;
use super::grid::{ArplaceGrid, Frame, GridGeometry};
use super::MapError;
use crate::classifier::Boundary;
use crate::geometry::{point_in_polygon, FrameTransform, ObjectFeatures, Point2};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Real;
use crate::shapemodel::GsmModel;

/// One sampled success region: the reconstructed boundary and its shift along the edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBoundary<F> {
    pub features: Vec<F>,
    pub boundary: Boundary<F>,
    pub y_shift: F,
}

impl<F: Real> SampledBoundary<F> {
    /// Boundary with the edge-direction shift applied.
    pub fn shifted(&self) -> Vec<Point2<F>> {
        self.boundary.landmarks.iter().map(|p| Point2::new(p.x, p.y + self.y_shift)).collect()
    }
}

/// Draws `n` object poses `[dx_obj, dy_obj, dpsi_obj]` and reconstructs each success region.
pub fn sample_boundaries<F: Real, S: PoseSampler<F>, R: Rng + ?Sized>(
    gsm: &GsmModel<F>,
    belief: &S,
    n: usize,
    rng: &mut R,
) -> Result<Vec<SampledBoundary<F>>, MapError> {
    if belief.dim() != 3 {
        return Err(MapError::BadParameter("object belief must cover [dx_obj, dy_obj, dpsi_obj]"));
    }
    if n == 0 {
        return Err(MapError::BadParameter("need at least one sample"));
    }
    Ok((0..n)
        .map(|_| {
            let f = belief.draw(rng);
            let boundary = gsm.boundary_for(&ObjectFeatures { dx_obj: f[0], dpsi_obj: f[2] });
            SampledBoundary { y_shift: f[1], boundary, features: f }
        })
        .collect())
}

struct Raster<F> {
    poly: Vec<Point2<F>>,
    lo: Point2<F>,
    hi: Point2<F>,
}

impl<F: Real> Raster<F> {
    fn new(poly: Vec<Point2<F>>) -> Self {
        let mut lo = Point2::new(F::infinity(), F::infinity());
        let mut hi = Point2::new(F::neg_infinity(), F::neg_infinity());
        for p in &poly {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        Self { poly, lo, hi }
    }

    fn contains(&self, p: Point2<F>) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y && point_in_polygon(p, &self.poly)
    }
}

/// Counts, per cell, how many sampled regions contain the cell centre (mapped into
/// the feature frame by `to_local`) and divides by the sample count.
fn rasterize<F: Real>(
    samples: &[SampledBoundary<F>],
    geometry: &GridGeometry<F>,
    to_local: impl Fn(Point2<F>) -> Point2<F> + Sync,
) -> ArplaceGrid<F> {
    let centers: Vec<Point2<F>> = (0..geometry.len()).map(|k| to_local(geometry.center_of(k))).collect();
    let counts: Vec<u32> = samples
        .par_iter()
        .map(|s| {
            let r = Raster::new(s.shifted());
            centers.iter().map(|&c| u32::from(r.contains(c))).collect::<Vec<u32>>()
        })
        .reduce(
            || vec![0u32; centers.len()],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = F::count(samples.len());
    ArplaceGrid { geometry: *geometry, probs: counts.iter().map(|&c| F::count(c as usize) / n).collect() }
}

/// Place map in the object's feature frame.
pub fn compute_map<F: Real, S: PoseSampler<F>, R: Rng + ?Sized>(
    gsm: &GsmModel<F>,
    belief: &S,
    geometry: &GridGeometry<F>,
    n: usize,
    rng: &mut R,
) -> Result<ArplaceGrid<F>, MapError> {
    if geometry.frame != Frame::Gsm {
        return Err(MapError::FrameMismatch);
    }
    let samples = sample_boundaries(gsm, belief, n, rng)?;
    Ok(map_from_samples(&samples, geometry))
}

pub fn map_from_samples<F: Real>(samples: &[SampledBoundary<F>], geometry: &GridGeometry<F>) -> ArplaceGrid<F> {
    rasterize(samples, geometry, |p| p)
}

/// Place map on a world-frame grid; `frame` maps the object's feature frame into the world.
pub fn compute_world_map<F: Real, S: PoseSampler<F>, R: Rng + ?Sized>(
    gsm: &GsmModel<F>,
    belief: &S,
    frame: &FrameTransform<F>,
    geometry: &GridGeometry<F>,
    n: usize,
    rng: &mut R,
) -> Result<ArplaceGrid<F>, MapError> {
    if geometry.frame != Frame::World {
        return Err(MapError::FrameMismatch);
    }
    let samples = sample_boundaries(gsm, belief, n, rng)?;
    Ok(rasterize(&samples, geometry, |p| frame.inverse_apply(p)))
}

/// Expected success when the robot is sent to each cell but ends up displaced by
/// zero-mean Gaussian noise with covariance `robot_cov`. The discrete kernel is
/// truncated at Mahalanobis distance 8 and renormalized over the cells inside the grid.
pub fn apply_robot_uncertainty<F: Real>(map: &ArplaceGrid<F>, robot_cov: [[F; 2]; 2]) -> Result<ArplaceGrid<F>, MapError> {
    let tol = F::lit(1e-12);
    if (robot_cov[0][1] - robot_cov[1][0]).abs() > tol {
        return Err(MapError::BadCovariance("robot covariance is asymmetric".into()));
    }
    let a = Matrix::from_fn(2, 2, |r, c| robot_cov[r][c]);
    let (vals, vecs) = symmetric_eigen(&a).map_err(|e| MapError::BadCovariance(e.to_string()))?;
    if vals.iter().any(|&v| v < -tol) {
        return Err(MapError::BadCovariance("robot covariance is not positive semidefinite".into()));
    }
    let g = &map.geometry;
    let h = g.cell_size;
    // directions with negligible spread act as a delta
    let floor = F::lit(1e-12) * h * h;
    let axes: Vec<(Point2<F>, Option<F>)> =
        (0..2).map(|i| (Point2::new(vecs[(0, i)], vecs[(1, i)]), (vals[i] > floor).then_some(vals[i]))).collect();
    let reach = |v: Option<F>| v.map_or(F::zero(), |l| F::lit(8.0) * l.sqrt());
    let ext = reach(axes[0].1).max(reach(axes[1].1));
    let rad = (ext / h).ceil().to_usize().unwrap_or(0);
    let r = rad as i64;

    let mut stencil: Vec<(i64, i64, F)> = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            let d = Point2::new(F::lit(dc as f64) * h, F::lit(dr as f64) * h);
            let mut maha = F::zero();
            let mut ok = true;
            for (axis, var) in &axes {
                let z = axis.dot(d);
                match var {
                    Some(l) => maha += z * z / *l,
                    None => ok &= z.abs() <= F::lit(1e-9) * h,
                }
            }
            if ok && maha <= F::lit(64.0) {
                stencil.push((dr, dc, (-F::lit(0.5) * maha).exp()));
            }
        }
    }

    let (nx, ny) = (g.nx as i64, g.ny as i64);
    let probs: Vec<F> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (row, col) = ((k / g.nx) as i64, (k % g.nx) as i64);
            let here = map.probs[k];
            let (mut wsum, mut acc) = (F::zero(), F::zero());
            for &(dr, dc, w) in &stencil {
                let (rr, cc) = (row + dr, col + dc);
                if rr < 0 || cc < 0 || rr >= ny || cc >= nx {
                    continue;
                }
                wsum += w;
                acc += w * (map.probs[(rr * nx + cc) as usize] - here);
            }
            let v = if wsum > F::zero() { here + acc / wsum } else { here };
            v.max(F::zero()).min(F::one())
        })
        .collect();
    Ok(ArplaceGrid { geometry: *g, probs })
}
