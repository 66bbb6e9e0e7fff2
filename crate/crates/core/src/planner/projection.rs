//! Designator resolution and plan projection.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Designator, PlanError, PlanNode, PlannerConfig, ResolvedLocation, Scene, SceneObject};
use crate::arplace::{apply_robot_uncertainty, compute_world_map, merge, ArplaceGrid, Frame, GaussianBelief, GridGeometry};
use crate::geometry::{gsm_frame, nearest_edge, object_features, robot_offset, FrameTransform, Point2};
use crate::shapemodel::GsmModel;
use crate::simworld::{execute_grasp, trial_rng, FailureCause, Label, WorldConfig};

/// Duration of each traced activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeModel {
    pub nav_speed_mps: f64,
    /// Fixed cost of every navigation (planning, localization, docking).
    pub nav_overhead_s: f64,
    pub grasp_s: f64,
    pub perceive_s: f64,
}

impl Default for TimeModel {
    fn default() -> Self {
        Self { nav_speed_mps: 0.3, nav_overhead_s: 0.0, grasp_s: 0.0, perceive_s: 0.0 }
    }
}

impl TimeModel {
    /// Constants chosen so the two-cup scenario takes roughly 48 s unmerged and 32 s merged.
    pub fn calibrated() -> Self {
        Self { nav_speed_mps: 0.3, nav_overhead_s: 15.0, grasp_s: 5.0, perceive_s: 1.2 }
    }

    pub fn duration(&self, e: &Event) -> f64 {
        match e {
            Event::Navigate { distance, .. } => self.nav_overhead_s + distance / self.nav_speed_mps,
            Event::Grasp { .. } => self.grasp_s,
            Event::Perceive { .. } => self.perceive_s,
            Event::TaskStart { .. } | Event::TaskEnd { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    TaskStart { task: String, kind: String },
    TaskEnd { task: String, status: TaskStatus },
    Perceive { task: String, object: String, covariance_scale: f64 },
    Navigate { task: String, from: Point2<f64>, goal: Point2<f64>, achieved: Point2<f64>, distance: f64 },
    Grasp { task: String, object: String, robot: Point2<f64>, label: Label, cause: FailureCause },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
}

impl ExecutionTrace {
    pub fn navigations(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().map(|e| &e.event).filter(|e| matches!(e, Event::Navigate { .. }))
    }

    pub fn grasps(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().map(|e| &e.event).filter(|e| matches!(e, Event::Grasp { .. }))
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("trace events serialize") + "\n").collect()
    }
}

pub fn plan_duration(trace: &ExecutionTrace, tm: &TimeModel) -> f64 {
    trace.events.iter().map(|e| tm.duration(&e.event)).sum()
}

/// Everything projection and flaw detection need besides the plan.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub gsm: &'a GsmModel<f64>,
    pub world: &'a WorldConfig,
    pub scene: &'a Scene,
    pub config: &'a PlannerConfig,
    pub time_model: &'a TimeModel,
    pub seed: u64,
}

impl PlanningContext<'_> {
    fn object_frame(&self, obj: &SceneObject) -> Result<(FrameTransform<f64>, crate::geometry::ObjectFeatures<f64>), PlanError> {
        let edge = &self.scene.table[nearest_edge(obj.estimate.position(), &self.scene.table)?];
        Ok((gsm_frame(&obj.estimate, edge)?, object_features(&obj.estimate, edge)?))
    }

    /// World-frame lattice (anchored at the world origin) covering the object's candidate base rectangle.
    fn object_geometry(&self, obj: &SceneObject) -> Result<GridGeometry<f64>, PlanError> {
        let (frame, _) = self.object_frame(obj)?;
        let b = self.world.robot_bounds;
        let corners = [(b.dx_min, b.dy_min), (b.dx_max, b.dy_min), (b.dx_max, b.dy_max), (b.dx_min, b.dy_max)];
        let pts: Vec<Point2<f64>> = corners.iter().map(|&(x, y)| frame.apply(Point2::new(x, y))).collect();
        Ok(lattice_cover(&pts, self.config.cell_size))
    }
}

fn lattice_cover(pts: &[Point2<f64>], cell: f64) -> GridGeometry<f64> {
    let x0 = (pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) / cell).floor();
    let y0 = (pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) / cell).floor();
    let x1 = (pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) / cell).ceil();
    let y1 = (pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) / cell).ceil();
    GridGeometry { origin: Point2::new(x0 * cell, y0 * cell), cell_size: cell, nx: (x1 - x0) as usize, ny: (y1 - y0) as usize, frame: Frame::World }
}

fn object_index(ctx: &PlanningContext, id: &str) -> Result<usize, PlanError> {
    ctx.scene.objects.iter().position(|o| o.id == id).ok_or_else(|| PlanError::UnknownObject(id.into()))
}

/// Place map for picking up `id`, on `geometry`, conditioned on the robot's position uncertainty.
pub fn object_map(ctx: &PlanningContext, id: &str, geometry: &GridGeometry<f64>) -> Result<ArplaceGrid<f64>, PlanError> {
    let obj = ctx.scene.object(id)?;
    let (frame, f) = ctx.object_frame(obj)?;
    let cov = obj.covariance.iter().map(|r| r.to_vec()).collect();
    let belief = GaussianBelief::new(vec![f.dx_obj, 0.0, f.dpsi_obj], cov)?;
    let mut rng = trial_rng(ctx.seed, object_index(ctx, id)? as u64);
    let map = compute_world_map(ctx.gsm, &belief, &frame, geometry, ctx.config.n_samples, &mut rng)?;
    let s2 = ctx.config.robot_sigma * ctx.config.robot_sigma;
    Ok(apply_robot_uncertainty(&map, [[s2, 0.0], [0.0, s2]])?)
}

/// Merged map for grasping all `ids` from one base position, on a shared grid.
pub(crate) fn joint_map(ctx: &PlanningContext, ids: &[String]) -> Result<ArplaceGrid<f64>, PlanError> {
    let mut pts = Vec::new();
    for id in ids {
        let g = ctx.object_geometry(ctx.scene.object(id)?)?;
        pts.push(g.origin);
        pts.push(g.center(g.ny - 1, g.nx - 1).add(Point2::new(0.5 * g.cell_size, 0.5 * g.cell_size)));
    }
    let geometry = lattice_cover(&pts, ctx.config.cell_size);
    let mut merged: Option<ArplaceGrid<f64>> = None;
    for id in ids {
        let m = object_map(ctx, id, &geometry)?;
        merged = Some(match merged {
            None => m,
            Some(acc) => merge(&acc, &m)?,
        });
    }
    merged.ok_or_else(|| PlanError::StaleFlaw("designator names no object".into()))
}

fn resolve(ctx: &PlanningContext, d: &Designator) -> Result<ResolvedLocation, PlanError> {
    let map = if d.objects.len() == 1 {
        let obj = ctx.scene.object(&d.objects[0])?;
        object_map(ctx, &d.objects[0], &ctx.object_geometry(obj)?)?
    } else {
        joint_map(ctx, &d.objects)?
    };
    let best = map.best_cell();
    Ok(ResolvedLocation { x: best.center.x, y: best.center.y, probability: best.value })
}

/// Fills every unresolved location designator with the best cell of its place map.
pub fn resolve_designators(plan: &PlanNode, ctx: &PlanningContext) -> Result<PlanNode, PlanError> {
    let mut out = plan.clone();
    let mut paths = Vec::new();
    plan.walk(&mut |p, n| {
        if let PlanNode::AtLocation { location, .. } = n {
            if location.resolved.is_none() {
                paths.push(p.to_string());
            }
        }
    });
    for p in paths {
        if let Some(PlanNode::AtLocation { location, .. }) = out.at_path_mut(&p) {
            location.resolved = Some(resolve(ctx, location)?);
        }
    }
    Ok(out)
}

/// Test hook: displaces where the robot actually ends up for a navigation task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectionOptions {
    pub disturbances: HashMap<String, Point2<f64>>,
}

struct Projector<'a, 'r, R: Rng + ?Sized> {
    ctx: &'a PlanningContext<'a>,
    opts: &'a ProjectionOptions,
    rng: &'r mut R,
    robot: Point2<f64>,
    last_goal: Option<Point2<f64>>,
    covariance_scale: HashMap<String, f64>,
    time: f64,
    trace: ExecutionTrace,
}

impl<R: Rng + ?Sized> Projector<'_, '_, R> {
    fn emit(&mut self, event: Event) {
        self.time += self.ctx.time_model.duration(&event);
        self.trace.events.push(TraceEvent { time: self.time, event });
    }

    fn run(&mut self, node: &PlanNode, path: &str, picking: Option<&str>) -> Result<TaskStatus, PlanError> {
        self.emit(Event::TaskStart { task: path.into(), kind: node.kind().into() });
        let status = match node {
            PlanNode::Sequence { children } => self.run_children(children, path, picking)?,
            PlanNode::Achieve { goal, children } => self.run_children(children, path, goal.picked_up_object().or(picking))?,
            PlanNode::Perceive { object } => {
                let s = self.covariance_scale.entry(object.clone()).or_insert(1.0);
                *s *= self.ctx.config.perceive_factor;
                let scale = *s;
                self.emit(Event::Perceive { task: path.into(), object: object.clone(), covariance_scale: scale });
                TaskStatus::Succeeded
            }
            PlanNode::AtLocation { location, children } => {
                let goal = location.resolved.as_ref().ok_or_else(|| PlanError::Unresolved(path.into()))?.point();
                if self.last_goal != Some(goal) {
                    self.navigate(path, goal);
                }
                let mut status = TaskStatus::Succeeded;
                if let Some(obj) = picking {
                    status = self.grasp(path, obj, goal)?;
                }
                if status == TaskStatus::Succeeded {
                    status = self.run_children(children, path, None)?;
                }
                status
            }
        };
        self.emit(Event::TaskEnd { task: path.into(), status });
        Ok(status)
    }

    fn run_children(&mut self, children: &[PlanNode], path: &str, picking: Option<&str>) -> Result<TaskStatus, PlanError> {
        for (k, c) in children.iter().enumerate() {
            if self.run(c, &format!("{path}.{k}"), picking)? == TaskStatus::Failed {
                return Ok(TaskStatus::Failed);
            }
        }
        Ok(TaskStatus::Succeeded)
    }

    fn navigate(&mut self, path: &str, goal: Point2<f64>) {
        let s = self.ctx.world.nav_noise_sigma;
        let nx: f64 = self.rng.sample(StandardNormal);
        let ny: f64 = self.rng.sample(StandardNormal);
        let mut achieved = goal.add(Point2::new(s * nx, s * ny));
        if let Some(d) = self.opts.disturbances.get(path) {
            achieved = achieved.add(*d);
        }
        let from = self.robot;
        self.emit(Event::Navigate { task: path.into(), from, goal, achieved, distance: from.dist(goal) });
        self.robot = achieved;
        self.last_goal = Some(goal);
    }

    fn grasp(&mut self, path: &str, id: &str, commanded: Point2<f64>) -> Result<TaskStatus, PlanError> {
        let obj = self.ctx.scene.object(id)?;
        let table = &self.ctx.scene.table;
        let edge = &table[nearest_edge(obj.pose.position(), table)?];
        let frame = gsm_frame(&obj.pose, edge)?;
        let features = object_features(&obj.pose, edge)?;
        let heading = edge.inward_normal.angle();
        let cmd = robot_offset(&crate::geometry::Pose2::new(commanded.x, commanded.y, heading), &frame);
        let ach = robot_offset(&crate::geometry::Pose2::new(self.robot.x, self.robot.y, heading), &frame);
        let rec = execute_grasp(&features, &cmd, &ach, self.ctx.world, self.rng);
        let robot = self.robot;
        self.emit(Event::Grasp { task: path.into(), object: id.into(), robot, label: rec.label, cause: rec.cause });
        Ok(if rec.label.is_success() { TaskStatus::Succeeded } else { TaskStatus::Failed })
    }
}

/// Executes the plan against the synthetic world and records what happened.
pub fn project<R: Rng + ?Sized>(plan: &PlanNode, ctx: &PlanningContext, opts: &ProjectionOptions, rng: &mut R) -> Result<ExecutionTrace, PlanError> {
    let mut unresolved = None;
    plan.walk(&mut |p, n| {
        if let PlanNode::AtLocation { location, .. } = n {
            if location.resolved.is_none() && unresolved.is_none() {
                unresolved = Some(p.to_string());
            }
        }
    });
    if let Some(p) = unresolved {
        return Err(PlanError::Unresolved(p));
    }
    if let PlanNode::Sequence { children } = plan {
        if children.is_empty() {
            return Ok(ExecutionTrace::default());
        }
    }
    let mut pr = Projector {
        ctx,
        opts,
        rng,
        robot: ctx.scene.robot_start,
        last_goal: None,
        covariance_scale: HashMap::new(),
        time: 0.0,
        trace: ExecutionTrace::default(),
    };
    pr.run(plan, "t", None)?;
    Ok(pr.trace)
}
