//! Greedy landmark placement along dense contours so that a low-dimensional PDM
//! explains the training shapes well.

use serde::{Deserialize, Serialize};

use super::pdm::boundary_to_column;
use super::ShapeError;
use crate::classifier::contour::{arc_lengths, point_at};
use crate::classifier::Boundary;
use crate::geometry::Point2;
use crate::linalg::{symmetric_eigen_from, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct LandmarkOptions<F> {
    /// Arc length of one move unit in meters (normally the extraction cell size).
    pub step: F,
    pub energy_threshold: F,
    pub max_sweeps: usize,
    /// A sweep that lowers the cost by less than this fraction ends the search for the current d.
    pub min_relative_gain: F,
}

impl<F: Real> Default for LandmarkOptions<F> {
    fn default() -> Self {
        Self { step: F::lit(0.01), energy_threshold: F::lit(0.95), max_sweeps: 30, min_relative_gain: F::lit(0.01) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct LandmarkResult<F> {
    pub boundaries: Vec<Boundary<F>>,
    /// Normalized arc-length position of every landmark on every contour.
    pub params: Vec<Vec<F>>,
    pub d: usize,
    pub energy: F,
    pub mean_error: F,
    pub cost: F,
    /// `(d, cost)` after every accepted move, in order.
    pub accepted_costs: Vec<(usize, F)>,
}

struct Contour<F> {
    poly: Vec<Point2<F>>,
    cum: Vec<F>,
    total: F,
}

impl<F: Real> Contour<F> {
    fn new(poly: &[Point2<F>]) -> Result<Self, ShapeError> {
        if poly.len() < 3 {
            return Err(ShapeError::DegenerateContour);
        }
        let (cum, total) = arc_lengths(poly);
        if !(total > F::zero()) {
            return Err(ShapeError::DegenerateContour);
        }
        Ok(Self { poly: poly.to_vec(), cum, total })
    }

    fn column(&self, params: &[F]) -> Vec<F> {
        let pts: Vec<Point2<F>> = params.iter().map(|&t| point_at(&self.poly, &self.cum, self.total, t)).collect();
        boundary_to_column(&Boundary { landmarks: pts })
    }
}

pub fn uniform_params<F: Real>(m: usize) -> Vec<F> {
    (0..m).map(|k| F::count(k) / F::count(m)).collect()
}

/// Scores landmark placements. Keeps the Gram eigenbasis of the last accepted
/// placement as a warm start for the next eigendecomposition.
struct Scorer<F> {
    m: usize,
    d: usize,
    basis: Matrix<F>,
}

impl<F: Real> Scorer<F> {
    fn new(n: usize, m: usize, d: usize) -> Self {
        Self { m, d, basis: Matrix::identity(n) }
    }

    /// `(cost, energy, mean landmark error, eigenbasis)`. Mirrors `fit_pdm` in
    /// snapshot form: the residual of column `a` is `X (e_a - sum_i v_i v_i[a])`.
    fn score(&self, columns: &[Vec<F>]) -> Result<(F, F, F, Matrix<F>), ShapeError> {
        let (n, m, rows) = (columns.len(), self.m, 2 * self.m);
        let mut mean = vec![F::zero(); rows];
        for c in columns {
            mean.iter_mut().zip(c).for_each(|(mk, &ck)| *mk += ck);
        }
        mean.iter_mut().for_each(|x| *x /= F::count(n));
        let x: Vec<Vec<F>> = columns.iter().map(|c| c.iter().zip(&mean).map(|(&a, &b)| a - b).collect()).collect();
        let gram = Matrix::from_fn(n, n, |a, b| x[a].iter().zip(&x[b]).map(|(&p, &q)| p * q).sum::<F>());
        let trace: F = (0..n).map(|a| gram[(a, a)]).sum();
        if trace <= F::zero() {
            return Ok((F::zero(), F::one(), F::zero(), self.basis.clone()));
        }
        let (vals, v) = symmetric_eigen_from(&gram, &self.basis)?;
        let e = vals.iter().take(self.d).map(|&l| l.max(F::zero())).sum::<F>() / trace;
        let mut l = F::zero();
        for a in 0..n {
            let mut coef = vec![F::zero(); n];
            coef[a] = F::one();
            for i in 0..self.d {
                let via = v[(a, i)];
                for (b, cb) in coef.iter_mut().enumerate() {
                    *cb -= v[(b, i)] * via;
                }
            }
            let mut r = vec![F::zero(); rows];
            for (b, &cb) in coef.iter().enumerate() {
                r.iter_mut().zip(&x[b]).for_each(|(rk, &xk)| *rk += cb * xk);
            }
            l += (0..m).map(|k| (r[k] * r[k] + r[m + k] * r[m + k]).sqrt()).sum::<F>();
        }
        l /= F::count(n * m);
        Ok(((F::lit(2.0) - e) * l * l, e, l, v))
    }
}

fn evaluate<F: Real>(columns: &[Vec<F>], m: usize, d: usize) -> Result<(F, F, F), ShapeError> {
    let (c, e, l, _) = Scorer::new(columns.len(), m, d).score(columns)?;
    Ok((c, e, l))
}

/// Cost `(2 - e) * l^2` of the given landmark placement.
pub fn landmark_cost<F: Real>(contours: &[Vec<Point2<F>>], params: &[Vec<F>], d: usize) -> Result<F, ShapeError> {
    let cs: Vec<Contour<F>> = contours.iter().map(|c| Contour::new(c)).collect::<Result<_, _>>()?;
    let m = params.first().map_or(0, |p| p.len());
    let cols: Vec<Vec<F>> = cs.iter().zip(params).map(|(c, p)| c.column(p)).collect();
    Ok(evaluate(&cols, m, d)?.0)
}

pub fn optimize_landmarks<F: Real>(contours: &[Vec<Point2<F>>], m: usize, opts: &LandmarkOptions<F>) -> Result<LandmarkResult<F>, ShapeError> {
    if m < 4 {
        return Err(ShapeError::TooFewLandmarks(m));
    }
    let n = contours.len();
    if n < 2 {
        return Err(ShapeError::TooFewShapes(n));
    }
    let cs: Vec<Contour<F>> = contours.iter().map(|c| Contour::new(c)).collect::<Result<_, _>>()?;
    let mut params: Vec<Vec<F>> = vec![uniform_params(m); n];
    let mut cols: Vec<Vec<F>> = cs.iter().zip(&params).map(|(c, p)| c.column(p)).collect();
    let mut accepted_costs = Vec::new();
    let units = [1i32, -1, 2, -2, 4, -4];

    let max_d = n - 1;
    let mut best_energy = F::zero();
    for d in 1..=max_d.min(2 * m) {
        let mut scorer = Scorer::new(n, m, d);
        let (mut cost, _, _, basis) = scorer.score(&cols)?;
        scorer.basis = basis;
        for sweep in 0..opts.max_sweeps {
            log::trace!("landmarks: d={d} sweep={sweep} cost={}", cost.as_f64());
            let sweep_start = cost;
            let mut improved = false;
            for j in 0..n {
                let du = opts.step / cs[j].total;
                for k in 0..m {
                    let lo = if k == 0 { params[j][m - 1] - F::one() } else { params[j][k - 1] };
                    let hi = if k + 1 == m { params[j][0] + F::one() } else { params[j][k + 1] };
                    let orig = params[j][k];
                    let mut best: Option<(F, F, Matrix<F>)> = None;
                    for &u in &units {
                        let t = orig + F::lit(u as f64) * du;
                        if t <= lo || t >= hi {
                            continue;
                        }
                        params[j][k] = t;
                        let p = point_at(&cs[j].poly, &cs[j].cum, cs[j].total, t);
                        let (ox, oy) = (cols[j][k], cols[j][m + k]);
                        cols[j][k] = p.x;
                        cols[j][m + k] = p.y;
                        let (c, _, _, basis) = scorer.score(&cols)?;
                        cols[j][k] = ox;
                        cols[j][m + k] = oy;
                        if c < cost && best.as_ref().is_none_or(|(bc, _, _)| c < *bc) {
                            best = Some((c, t, basis));
                        }
                    }
                    params[j][k] = orig;
                    if let Some((c, t, basis)) = best {
                        params[j][k] = t;
                        scorer.basis = basis;
                        let p = point_at(&cs[j].poly, &cs[j].cum, cs[j].total, t);
                        cols[j][k] = p.x;
                        cols[j][m + k] = p.y;
                        cost = c;
                        accepted_costs.push((d, c));
                        improved = true;
                    }
                }
            }
            // stop on a sweep that gains less than the relative tolerance
            if !improved || sweep_start - cost <= opts.min_relative_gain * sweep_start {
                break;
            }
        }
        let (cost, e, l) = evaluate(&cols, m, d)?;
        log::debug!("landmarks: d={d} energy={} mean error={} cost={}", e.as_f64(), l.as_f64(), cost.as_f64());
        best_energy = best_energy.max(e);
        if e > opts.energy_threshold {
            let boundaries = cs
                .iter()
                .zip(&params)
                .map(|(c, p)| Boundary { landmarks: p.iter().map(|&t| point_at(&c.poly, &c.cum, c.total, t)).collect() })
                .collect();
            return Ok(LandmarkResult { boundaries, params, d, energy: e, mean_error: l, cost, accepted_costs });
        }
    }
    Err(ShapeError::EnergyNotReached { best: best_energy.as_f64() })
}
