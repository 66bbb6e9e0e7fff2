//! Desk-scale experiments in the synthetic world: robustness under pose uncertainty,
//! classifier accuracy against training size, and the benefit of merging pick-up locations.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::arplace::{apply_robot_uncertainty, compute_map, Frame, GaussianBelief, GridGeometry, MapError};
use crate::classifier::{train_svm, LabeledSet, SvmError, SvmParams};
use crate::geometry::{ObjectFeatures, Point2, Pose2, RobotOffset};
use crate::planner::{
    apply_merge_transform, detect_merge_flaw, plan_duration, project, resolve_designators, PlanError, PlanNode, PlannerConfig, PlanningContext,
    ProjectionOptions, Scene, SceneObject, TimeModel,
};
use crate::shapemodel::{GsmModel, TrainingBounds};
use crate::simworld::{
    execute_planned_grasp, execute_trial, simulate_trial, succeeds_noiseless, theoretically_reachable, trial_rng, FailureCause, WorldConfig,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("bad experiment parameter: {0}")]
    BadParameter(&'static str),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Pearson's 2x2 test of homogeneity without continuity correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn chi_square(successes_a: u64, n_a: u64, successes_b: u64, n_b: u64) -> Result<ChiSquare, EvalError> {
    if n_a == 0 || n_b == 0 {
        return Err(EvalError::BadParameter("each group needs at least one trial"));
    }
    if successes_a > n_a || successes_b > n_b {
        return Err(EvalError::BadParameter("successes exceed trials"));
    }
    let n = (n_a + n_b) as f64;
    let succ = (successes_a + successes_b) as f64;
    let fail = n - succ;
    if succ == 0.0 || fail == 0.0 {
        return Ok(ChiSquare { statistic: 0.0, p_value: 1.0 });
    }
    let observed = [
        [successes_a as f64, (n_a - successes_a) as f64],
        [successes_b as f64, (n_b - successes_b) as f64],
    ];
    let rows = [n_a as f64, n_b as f64];
    let cols = [succ, fail];
    let mut stat = 0.0;
    for (r, row) in observed.iter().enumerate() {
        for (c, &o) in row.iter().enumerate() {
            let e = rows[r] * cols[c] / n;
            stat += (o - e) * (o - e) / e;
        }
    }
    let dist = ChiSquared::new(1.0).expect("one degree of freedom");
    Ok(ChiSquare { statistic: stat, p_value: dist.sf(stat).clamp(0.0, 1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Arplace,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub sigma_obj_values: Vec<f64>,
    pub sigma_rob_values: Vec<f64>,
    pub trials_per_cell: usize,
    /// Listed in output column order.
    pub strategies: [Strategy; 2],
    /// Range the true cup pose is drawn from; `None` uses the model's training range.
    pub object_range: Option<TrainingBounds<f64>>,
    /// Orientation noise per meter of position noise, in rad/m.
    pub angle_sigma_per_meter: f64,
    /// Noise along the table edge per meter of position noise.
    pub edge_sigma_per_meter: f64,
    pub n_samples: usize,
    pub cell_size: f64,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            sigma_obj_values: vec![0.0, 0.05, 0.10, 0.15, 0.20],
            sigma_rob_values: vec![0.0, 0.05],
            trials_per_cell: 100,
            strategies: [Strategy::Arplace, Strategy::Fixed],
            object_range: None,
            angle_sigma_per_meter: 1.0,
            edge_sigma_per_meter: 1.0,
            n_samples: 100,
            cell_size: 0.025,
            seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.trials_per_cell == 0 {
            return Err(EvalError::BadParameter("trials_per_cell must be at least 1"));
        }
        if self.sigma_obj_values.is_empty() || self.sigma_rob_values.is_empty() {
            return Err(EvalError::BadParameter("empty sigma list"));
        }
        let finite = |v: f64| v >= 0.0 && v.is_finite();
        if !self.sigma_obj_values.iter().chain(&self.sigma_rob_values).all(|&s| finite(s)) {
            return Err(EvalError::BadParameter("sigmas must be finite and non-negative"));
        }
        if !finite(self.angle_sigma_per_meter) || !finite(self.edge_sigma_per_meter) {
            return Err(EvalError::BadParameter("noise scales must be finite and non-negative"));
        }
        if self.n_samples == 0 || !(self.cell_size > 0.0) {
            return Err(EvalError::BadParameter("n_samples and cell_size must be positive"));
        }
        if let Some(r) = &self.object_range {
            if !(r.dx_min <= r.dx_max && r.dpsi_min <= r.dpsi_max) {
                return Err(EvalError::BadParameter("empty object range"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub sigma_obj: f64,
    pub sigma_rob: f64,
    pub trials: usize,
    /// Success counts in the order of `SweepSpec::strategies`.
    pub successes: [usize; 2],
    pub test: ChiSquare,
}

impl ConditionResult {
    pub fn ratio(&self, k: usize) -> f64 {
        self.successes[k] as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub strategies: [Strategy; 2],
    pub conditions: Vec<ConditionResult>,
}

impl SweepResult {
    pub fn condition(&self, sigma_obj: f64, sigma_rob: f64) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.sigma_obj == sigma_obj && c.sigma_rob == sigma_rob)
    }
}

/// Offset from the object centre to the centroid of its noiseless success region,
/// sampled on a `cell`-spaced lattice over the robot bounds.
pub fn fixed_offset(object: &ObjectFeatures<f64>, world: &WorldConfig, cell: f64) -> Result<Point2<f64>, EvalError> {
    let b = world.robot_bounds;
    let nx = ((b.dx_max - b.dx_min) / cell).round() as usize + 1;
    let ny = ((b.dy_max - b.dy_min) / cell).round() as usize + 1;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for i in 0..nx {
        for j in 0..ny {
            let r = RobotOffset::new(b.dx_min + i as f64 * cell, b.dy_min + j as f64 * cell);
            if succeeds_noiseless(object, &r, world) {
                sx += r.dx_rob;
                sy += r.dy_rob;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(EvalError::BadParameter("object has an empty success region"));
    }
    Ok(Point2::new(sx / n as f64 + object.dx_obj, sy / n as f64))
}

/// Base position of the FIXED strategy for a perceived object: the same offset from the
/// cup every time, pushed back from the table if it would collide.
pub fn fixed_choice(offset: Point2<f64>, perceived: &ObjectFeatures<f64>, world: &WorldConfig) -> Point2<f64> {
    Point2::new((offset.x - perceived.dx_obj).max(world.robot_radius), offset.y)
}

struct Trial {
    truth: ObjectFeatures<f64>,
    perceived: ObjectFeatures<f64>,
    /// Perceived position of the cup along the edge; the true one is 0.
    dy: f64,
    /// Where the robot ends up relative to where it believes it is.
    localization: Point2<f64>,
}

fn draw_trial<R: Rng + ?Sized>(spec: &SweepSpec, range: &TrainingBounds<f64>, sigma_obj: f64, sigma_rob: f64, rng: &mut R) -> Trial {
    let truth = ObjectFeatures::new(rng.random_range(range.dx_min..=range.dx_max), rng.random_range(range.dpsi_min..=range.dpsi_max));
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let (ex, ea, ey, rx, ry) = (z(), z(), z(), z(), z());
    Trial {
        truth,
        perceived: ObjectFeatures::new(
            (truth.dx_obj + sigma_obj * ex).max(0.0),
            truth.dpsi_obj + sigma_obj * spec.angle_sigma_per_meter * ea,
        ),
        dy: sigma_obj * spec.edge_sigma_per_meter * ey,
        localization: Point2::new(sigma_rob * rx, sigma_rob * ry),
    }
}

/// ARPlace choice: argmax of the belief map conditioned on the robot's own uncertainty.
#[allow(clippy::too_many_arguments)]
fn arplace_choice(
    t: &Trial,
    spec: &SweepSpec,
    sigma_obj: f64,
    sigma_rob: f64,
    nav_noise: f64,
    gsm: &GsmModel<f64>,
    geometry: &GridGeometry<f64>,
    stream: u64,
) -> Result<Point2<f64>, EvalError> {
    let sa = sigma_obj * spec.angle_sigma_per_meter;
    let se = sigma_obj * spec.edge_sigma_per_meter;
    let belief = GaussianBelief::diagonal(vec![t.perceived.dx_obj, 0.0, t.perceived.dpsi_obj], &[sigma_obj * sigma_obj, se * se, sa * sa])?;
    let mut rng = trial_rng(spec.seed ^ 0x5eed_0000_0000, stream);
    let map = compute_map(gsm, &belief, geometry, spec.n_samples, &mut rng)?;
    // the robot knows both its localization error and its navigation noise
    let s2 = sigma_rob * sigma_rob + nav_noise * nav_noise;
    let map = apply_robot_uncertainty(&map, [[s2, 0.0], [0.0, s2]])?;
    Ok(map.best_cell().center)
}

/// Runs both strategies on the same true poses, perception errors and execution noise.
pub fn robustness_experiment(spec: &SweepSpec, gsm: &GsmModel<f64>, world: &WorldConfig) -> Result<SweepResult, EvalError> {
    spec.validate()?;
    let range = spec.object_range.unwrap_or(gsm.training_bounds);
    let mean = ObjectFeatures::new(0.5 * (range.dx_min + range.dx_max), 0.5 * (range.dpsi_min + range.dpsi_max));
    let offset = fixed_offset(&mean, world, 0.01)?;
    let b = world.robot_bounds;
    let geometry = GridGeometry::covering(b.dx_min, b.dx_max, b.dy_min, b.dy_max, spec.cell_size, Frame::Gsm)?;
    let grid: Vec<(usize, f64, f64)> = spec
        .sigma_obj_values
        .iter()
        .flat_map(|&so| spec.sigma_rob_values.iter().map(move |&sr| (so, sr)))
        .enumerate()
        .map(|(k, (so, sr))| (k, so, sr))
        .collect();
    let conditions = grid
        .iter()
        .map(|&(cond, so, sr)| {
            let outcomes: Vec<[bool; 2]> = (0..spec.trials_per_cell)
                .into_par_iter()
                .map(|i| {
                    let stream = ((cond as u64) << 32) | i as u64;
                    let mut rng = trial_rng(spec.seed, stream);
                    let t = draw_trial(spec, &range, so, sr, &mut rng);
                    let exec_seed: u64 = rng.random();
                    let mut out = [false; 2];
                    for (k, &s) in spec.strategies.iter().enumerate() {
                        let c = match s {
                            Strategy::Arplace => arplace_choice(&t, spec, so, sr, world.nav_noise_sigma, gsm, &geometry, stream)?,
                            Strategy::Fixed => fixed_choice(offset, &t.perceived, world),
                        };
                        let mut exec = trial_rng(exec_seed, 0);
                        let nx: f64 = exec.sample(StandardNormal);
                        let ny: f64 = exec.sample(StandardNormal);
                        // perceived frame -> true frame is a shift along the edge
                        let achieved = RobotOffset::new(
                            c.x + t.localization.x + world.nav_noise_sigma * nx,
                            c.y + t.dy + t.localization.y + world.nav_noise_sigma * ny,
                        );
                        // the arm plans against what the robot believes
                        let planned = theoretically_reachable(&t.perceived, &RobotOffset::new(c.x, c.y), world);
                        let cause = execute_planned_grasp(&t.truth, &achieved, planned, world, &mut exec);
                        out[k] = cause == FailureCause::None;
                    }
                    Ok(out)
                })
                .collect::<Result<_, EvalError>>()?;
            let successes = [0, 1].map(|k| outcomes.iter().filter(|o| o[k]).count());
            let n = spec.trials_per_cell as u64;
            let test = chi_square(successes[0] as u64, n, successes[1] as u64, n)?;
            log::info!("sigma_obj={so} sigma_rob={sr}: {:?} p={}", successes, test.p_value);
            Ok(ConditionResult { sigma_obj: so, sigma_rob: sr, trials: spec.trials_per_cell, successes, test })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(SweepResult { strategies: spec.strategies, conditions })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub size: usize,
    pub accuracy: f64,
    /// Trials actually simulated to produce the training set.
    pub executed: usize,
}

fn uniform_offset<R: Rng + ?Sized>(world: &WorldConfig, rng: &mut R) -> RobotOffset<f64> {
    let b = world.robot_bounds;
    RobotOffset::new(rng.random_range(b.dx_min..=b.dx_max), rng.random_range(b.dy_min..=b.dy_max))
}

/// Fraction of `points` whose label matches what `predict` says.
fn agreement(points: &[RobotOffset<f64>], labels: &[i8], predict: impl Fn(&RobotOffset<f64>) -> i8) -> f64 {
    let hits = points.iter().zip(labels).filter(|(p, &l)| predict(p) == l).count();
    hits as f64 / points.len() as f64
}

/// Held-out accuracy of per-pose classifiers trained on growing random samples.
/// Labels of the 150-sample test set always come from full simulation.
pub fn accuracy_curve(
    world: &WorldConfig,
    object: &ObjectFeatures<f64>,
    sizes: &[usize],
    use_capability_filter: bool,
    params: &SvmParams<f64>,
    seed: u64,
) -> Result<Vec<AccuracyPoint>, EvalError> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] > w[1]) || sizes[0] == 0 {
        return Err(EvalError::BadParameter("sizes must be positive and ascending"));
    }
    const HELD_OUT: usize = 150;
    let mut test_rng = trial_rng(seed, u64::MAX);
    let test_points: Vec<_> = (0..HELD_OUT).map(|_| uniform_offset(world, &mut test_rng)).collect();
    let test_labels: Vec<i8> = test_points
        .iter()
        .enumerate()
        .map(|(k, r)| simulate_trial(object, r, world, &mut trial_rng(seed ^ 0x7e57, k as u64)).label.sign())
        .collect();

    let max = *sizes.last().expect("non-empty");
    let mut pick = trial_rng(seed, u64::MAX - 1);
    let points: Vec<_> = (0..max).map(|_| uniform_offset(world, &mut pick)).collect();
    let records: Vec<_> = points
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut rng = trial_rng(seed, k as u64);
            if use_capability_filter {
                execute_trial(object, r, world, &mut rng)
            } else {
                simulate_trial(object, r, world, &mut rng)
            }
        })
        .collect();
    sizes
        .par_iter()
        .map(|&size| {
            let labels: Vec<i8> = records[..size].iter().map(|r| r.label.sign()).collect();
            let executed = records[..size].iter().filter(|r| r.cause.was_executed()).count();
            let set = LabeledSet { points: points[..size].to_vec(), labels: labels.clone(), object: *object };
            let accuracy = match train_svm(&set, params) {
                Ok(model) => model.accuracy(&test_points, &test_labels),
                // one class only: the classifier degenerates to that constant
                Err(SvmError::NeedBothClasses) => agreement(&test_points, &test_labels, |_| labels[0]),
                Err(e) => return Err(e.into()),
            };
            Ok(AccuracyPoint { size, accuracy, executed })
        })
        .collect()
}

/// The two-cup pick-up scene, parameterized by cup separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoCupScenario {
    /// Distance of both cups from the table edge.
    pub edge_distance: f64,
    /// Handle orientations relative to the inward normal, left cup first.
    pub dpsi: [f64; 2],
    /// Position standard deviation of both beliefs; orientation uses twice this in rad.
    pub belief_sigma: f64,
    /// Midpoint of the two cups along the edge.
    pub center: f64,
    pub robot_start: Point2<f64>,
    /// Projections averaged per plan.
    pub runs: usize,
}

impl Default for TwoCupScenario {
    fn default() -> Self {
        Self {
            edge_distance: 0.10,
            dpsi: [2.3, 1.9],
            belief_sigma: 0.01,
            center: 0.8,
            robot_start: Point2::new(0.8, -1.5),
            runs: 10,
        }
    }
}

impl TwoCupScenario {
    /// Scene on the world's first table edge. Cups start at the expected pose.
    pub fn scene(&self, world: &WorldConfig, separation: f64) -> Result<Scene, EvalError> {
        let edge = world.table_polygon.first().ok_or(EvalError::BadParameter("world has no table"))?;
        let dir = edge.p1.sub(edge.p0);
        let dir = dir.scale(1.0 / dir.norm());
        let normal = edge.inward_normal;
        let heading = normal.angle();
        let s = self.belief_sigma;
        let cov = [[s * s, 0.0, 0.0], [0.0, s * s, 0.0], [0.0, 0.0, 4.0 * s * s]];
        let objects = [-0.5, 0.5]
            .iter()
            .zip(self.dpsi)
            .enumerate()
            .map(|(k, (&side, dpsi))| {
                let at = edge.p0.add(dir.scale(self.center + side * separation)).add(normal.scale(self.edge_distance));
                let pose = Pose2::new(at.x, at.y, heading + dpsi);
                SceneObject { id: format!("cup-{}", k + 1), pose, estimate: pose, covariance: cov }
            })
            .collect();
        Ok(Scene { table: world.table_polygon.clone(), objects, robot_start: self.robot_start })
    }

    pub fn plan() -> PlanNode {
        PlanNode::Sequence { children: vec![PlanNode::pick_up("cup-1"), PlanNode::pick_up("cup-2")] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRow {
    pub distance: f64,
    pub duration_a: f64,
    /// Absent when no merge flaw was found.
    pub duration_b: Option<f64>,
    /// Best merged success probability over all cells.
    pub merged_probability: Option<f64>,
    pub navigations_a: usize,
    pub navigations_b: Option<usize>,
}

impl TransformRow {
    /// `(a - b) / a`.
    pub fn reduction(&self) -> Option<f64> {
        self.duration_b.map(|b| (self.duration_a - b) / self.duration_a)
    }

    /// `a / b`.
    pub fn speedup(&self) -> Option<f64> {
        self.duration_b.map(|b| self.duration_a / b)
    }
}

fn mean_duration(plan: &PlanNode, ctx: &PlanningContext, runs: usize, seed: u64) -> Result<(f64, usize), EvalError> {
    let mut total = 0.0;
    let mut navs = 0;
    for r in 0..runs {
        let trace = project(plan, ctx, &ProjectionOptions::default(), &mut trial_rng(seed, r as u64))?;
        total += plan_duration(&trace, ctx.time_model);
        navs = navs.max(trace.navigations().count());
    }
    Ok((total / runs as f64, navs))
}

/// Projected durations of the two-cup plan before and after the merge transform.
pub fn transformation_benefit(
    distances: &[f64],
    scenario: &TwoCupScenario,
    gsm: &GsmModel<f64>,
    world: &WorldConfig,
    config: &PlannerConfig,
    time_model: &TimeModel,
    seed: u64,
) -> Result<Vec<TransformRow>, EvalError> {
    if scenario.runs == 0 {
        return Err(EvalError::BadParameter("runs must be at least 1"));
    }
    distances
        .par_iter()
        .map(|&distance| {
            let scene = scenario.scene(world, distance)?;
            let ctx = PlanningContext { gsm, world, scene: &scene, config, time_model, seed };
            let plan = TwoCupScenario::plan();
            let a = resolve_designators(&plan, &ctx)?;
            let (duration_a, navigations_a) = mean_duration(&a, &ctx, scenario.runs, seed)?;
            let flaw = detect_merge_flaw(&a, &ctx)?;
            let (duration_b, navigations_b, merged_probability) = match &flaw {
                Some(f) => {
                    let b = apply_merge_transform(&a, f)?;
                    let (d, n) = mean_duration(&b, &ctx, scenario.runs, seed)?;
                    (Some(d), Some(n), f.proposed.map(|p| p.probability))
                }
                None => (None, None, None),
            };
            Ok(TransformRow { distance, duration_a, duration_b, merged_probability, navigations_a, navigations_b })
        })
        .collect()
}

/// Separations from 0.20 m to 0.60 m in 5 cm steps.
pub fn default_distances() -> Vec<f64> {
    (0..=8).map(|k| 0.20 + 0.05 * k as f64).map(|d| (d * 100.0).round() / 100.0).collect()
}
