//! Cost-sensitive soft-margin SVM with a Gaussian kernel, trained by SMO using
//! second-order working-set selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ObjectFeatures, RobotOffset};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvmError {
    #[error("labeled set needs at least two points with both classes present")]
    NeedBothClasses,
    #[error("points and labels differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("label {0} is not +1 or -1")]
    BadLabel(i8),
    #[error("invalid hyperparameter: {0}")]
    BadParameter(&'static str),
    #[error("SMO did not converge after {iterations} iterations (max KKT violation {violation})")]
    NotConverged { iterations: usize, violation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct LabeledSet<F> {
    pub points: Vec<RobotOffset<F>>,
    /// +1 success, -1 failure.
    pub labels: Vec<i8>,
    pub object: ObjectFeatures<F>,
}

impl<F: Real> LabeledSet<F> {
    pub fn validate(&self) -> Result<(), SvmError> {
        if self.points.len() != self.labels.len() {
            return Err(SvmError::LengthMismatch(self.points.len(), self.labels.len()));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(SvmError::BadLabel(l));
        }
        let pos = self.labels.contains(&1);
        let neg = self.labels.contains(&-1);
        if self.points.len() < 2 || !pos || !neg {
            return Err(SvmError::NeedBothClasses);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct SvmParams<F> {
    pub kernel_sigma: F,
    pub cost_c: F,
    pub positive_class_weight: F,
    pub tolerance: F,
    pub max_iterations: usize,
}

impl<F: Real> Default for SvmParams<F> {
    fn default() -> Self {
        Self {
            kernel_sigma: F::lit(0.1),
            cost_c: F::lit(40.0),
            positive_class_weight: F::lit(2.0),
            tolerance: F::lit(1e-3),
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct SvmModel<F> {
    pub support_points: Vec<RobotOffset<F>>,
    /// alpha_i * y_i for each support point.
    pub alphas: Vec<F>,
    pub bias: F,
    pub kernel_sigma: F,
    pub cost_c: F,
    pub positive_class_weight: F,
    /// Max KKT violation at termination.
    pub kkt_violation: F,
    pub iterations: usize,
}

#[inline]
pub fn gaussian_kernel<F: Real>(a: &RobotOffset<F>, b: &RobotOffset<F>, sigma: F) -> F {
    let dx = a.dx_rob - b.dx_rob;
    let dy = a.dy_rob - b.dy_rob;
    (-(dx * dx + dy * dy) / (F::lit(2.0) * sigma * sigma)).exp()
}

impl<F: Real> SvmModel<F> {
    /// Signed score; positive predicts success.
    pub fn decide(&self, robot: &RobotOffset<F>) -> F {
        let mut s = self.bias;
        for (p, &a) in self.support_points.iter().zip(&self.alphas) {
            s += a * gaussian_kernel(p, robot, self.kernel_sigma);
        }
        s
    }

    pub fn predict(&self, robot: &RobotOffset<F>) -> i8 {
        if self.decide(robot) > F::zero() {
            1
        } else {
            -1
        }
    }

    /// Fraction of `set` classified correctly.
    pub fn accuracy(&self, points: &[RobotOffset<F>], labels: &[i8]) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        let ok = points.iter().zip(labels).filter(|(p, &l)| self.predict(p) == l).count();
        ok as f64 / points.len() as f64
    }
}

pub fn train_svm<F: Real>(data: &LabeledSet<F>, params: &SvmParams<F>) -> Result<SvmModel<F>, SvmError> {
    data.validate()?;
    if !(params.kernel_sigma > F::zero()) {
        return Err(SvmError::BadParameter("kernel_sigma must be positive"));
    }
    if !(params.cost_c > F::zero() && params.positive_class_weight > F::zero()) {
        return Err(SvmError::BadParameter("cost and class weight must be positive"));
    }
    if !(params.tolerance > F::zero()) {
        return Err(SvmError::BadParameter("tolerance must be positive"));
    }

    // canonical order makes the solver path, and hence the model, independent of input order
    let mut order: Vec<usize> = (0..data.points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&data.points[a], &data.points[b]);
        pa.dx_rob
            .partial_cmp(&pb.dx_rob)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(pa.dy_rob.partial_cmp(&pb.dy_rob).unwrap_or(std::cmp::Ordering::Equal))
            .then(data.labels[a].cmp(&data.labels[b]))
    });
    let x: Vec<RobotOffset<F>> = order.iter().map(|&i| data.points[i]).collect();
    let y: Vec<F> = order.iter().map(|&i| if data.labels[i] > 0 { F::one() } else { -F::one() }).collect();
    let n = x.len();
    let c: Vec<F> = y
        .iter()
        .map(|&yi| if yi > F::zero() { params.cost_c * params.positive_class_weight } else { params.cost_c })
        .collect();

    let mut k = vec![F::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let v = gaussian_kernel(&x[i], &x[j], params.kernel_sigma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let tau = F::lit(1e-12);

    let mut alpha = vec![F::zero(); n];
    let mut grad = vec![-F::one(); n];
    let in_up = |a: F, yi: F, ci: F| (yi > F::zero() && a < ci) || (yi < F::zero() && a > F::zero());
    let in_low = |a: F, yi: F, ci: F| (yi < F::zero() && a < ci) || (yi > F::zero() && a > F::zero());

    let mut iterations = 0usize;
    let violation = loop {
        // i: maximal violating index in I_up
        let mut gmax = F::neg_infinity();
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t], c[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = F::infinity();
        let mut j_sel = usize::MAX;
        let mut best = F::infinity();
        for t in 0..n {
            if !in_low(alpha[t], y[t], c[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            if v < gmin {
                gmin = v;
            }
            if i_sel != usize::MAX && v < gmax {
                let b = gmax - v;
                let mut a = k[i_sel * n + i_sel] + k[t * n + t] - F::lit(2.0) * k[i_sel * n + t];
                if a <= F::zero() {
                    a = tau;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j_sel = t;
                }
            }
        }
        let viol = gmax - gmin;
        if i_sel == usize::MAX || j_sel == usize::MAX || viol <= params.tolerance {
            break if viol.is_finite() { viol } else { F::zero() };
        }
        if iterations >= params.max_iterations {
            return Err(SvmError::NotConverged { iterations, violation: viol.as_f64() });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let (ci, cj) = (c[i], c[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + F::lit(2.0) * q(i, j);
            if quad <= F::zero() {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > F::zero() {
                if alpha[j] < F::zero() {
                    alpha[j] = F::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < F::zero() {
                alpha[i] = F::zero();
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - F::lit(2.0) * q(i, j);
            if quad <= F::zero() {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < F::zero() {
                alpha[j] = F::zero();
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < F::zero() {
                alpha[i] = F::zero();
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * dai + q(t, j) * daj;
        }
    };

    // bias from free vectors, midpoint of the feasible interval otherwise
    let (mut ub, mut lb) = (F::infinity(), F::neg_infinity());
    let (mut sum_free, mut n_free) = (F::zero(), 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c[t] {
            if y[t] < F::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= F::zero() {
            if y[t] > F::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum_free += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 { sum_free / F::count(n_free) } else { (ub + lb) / F::lit(2.0) };

    let mut support_points = Vec::new();
    let mut alphas = Vec::new();
    for t in 0..n {
        if alpha[t] > F::zero() {
            support_points.push(x[t]);
            alphas.push(alpha[t] * y[t]);
        }
    }
    Ok(SvmModel {
        support_points,
        alphas,
        bias: -rho,
        kernel_sigma: params.kernel_sigma,
        cost_c: params.cost_c,
        positive_class_weight: params.positive_class_weight,
        kkt_violation: violation,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(points: &[(f64, f64, i8)]) -> LabeledSet<f64> {
        LabeledSet {
            points: points.iter().map(|&(x, y, _)| RobotOffset::new(x, y)).collect(),
            labels: points.iter().map(|&(_, _, l)| l).collect(),
            object: ObjectFeatures::new(0.1, 1.5),
        }
    }

    #[test]
    fn separable_four_points() {
        let d = set(&[(0.0, 0.0, 1), (0.05, 0.0, 1), (0.5, 0.0, -1), (0.55, 0.05, -1)]);
        let m = train_svm(&d, &SvmParams::default()).unwrap();
        assert_eq!(m.accuracy(&d.points, &d.labels), 1.0);
        assert!(m.kkt_violation <= 1e-3);
    }

    #[test]
    fn box_constraints_hold() {
        // noisy interleaved labels force bounded alphas
        let mut pts = Vec::new();
        for i in 0..30 {
            let x = i as f64 * 0.02;
            pts.push((x, 0.0, if (i * 7) % 3 == 0 { 1 } else { -1 }));
        }
        let d = set(&pts);
        let p = SvmParams { cost_c: 1.5, ..SvmParams::default() };
        let m = train_svm(&d, &p).unwrap();
        let mut sum = 0.0;
        for &a in &m.alphas {
            let cap = if a > 0.0 { 3.0 } else { 1.5 };
            assert!(a.abs() <= cap + 1e-12);
            sum += a;
        }
        // equality constraint sum(alpha_i y_i) = 0
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn far_point_scores_bias() {
        let d = set(&[(0.0, 0.0, 1), (0.1, 0.0, -1), (0.0, 0.1, -1)]);
        let m = train_svm(&d, &SvmParams::default()).unwrap();
        let far = RobotOffset::new(1.0, 1.0);
        assert!((m.decide(&far) - m.bias).abs() < 1e-6);
    }

    #[test]
    fn rejects_single_class_and_bad_labels() {
        assert_eq!(train_svm(&set(&[(0.0, 0.0, 1), (1.0, 0.0, 1)]), &SvmParams::default()), Err(SvmError::NeedBothClasses));
        assert_eq!(train_svm(&set(&[(0.0, 0.0, 1), (1.0, 0.0, 0)]), &SvmParams::default()), Err(SvmError::BadLabel(0)));
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let mut pts = Vec::new();
        for i in 0..40 {
            pts.push((i as f64 * 0.01, (i % 5) as f64 * 0.01, if i % 2 == 0 { 1 } else { -1 }));
        }
        let p = SvmParams { max_iterations: 1, ..SvmParams::default() };
        match train_svm(&set(&pts), &p) {
            Err(SvmError::NotConverged { iterations, violation }) => {
                assert_eq!(iterations, 1);
                assert!(violation > 1e-3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn generic_f32() {
        let d = LabeledSet::<f32> {
            points: vec![RobotOffset::new(0.0, 0.0), RobotOffset::new(0.5, 0.0)],
            labels: vec![1, -1],
            object: ObjectFeatures::new(0.0, 0.0),
        };
        let m = train_svm(&d, &SvmParams::default()).unwrap();
        assert!(m.decide(&RobotOffset::new(0.0, 0.0)) > 0.0);
        assert!(m.decide(&RobotOffset::new(0.5, 0.0)) < 0.0);
    }
}
