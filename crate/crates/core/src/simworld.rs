//! Synthetic navigate-reach-grasp world.
//!
//! Everything is evaluated in the edge-relative feature frame: the table occupies
//! `x < 0`, the object centre sits at `(-dx_obj, 0)` and the robot base at
//! `(dx_rob, dy_rob)`, always facing the table (-x). The handle sticks out of the
//! cup along the object heading. The deterministic part of the world is the set of
//! achieved base positions from which the arm reaches the handle without hitting
//! the table or the cup and closes on it at a usable angle. Navigation noise and a
//! controller local-minimum event make individual trials stochastic.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ObjectFeatures, Point2, RobotOffset, TableEdge};
use crate::provenance::Provenance;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset parse: {0}")]
    Parse(String),
}

/// Axis-aligned rectangle of candidate base positions in the feature frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotBounds {
    pub dx_min: f64,
    pub dx_max: f64,
    pub dy_min: f64,
    pub dy_max: f64,
}

impl RobotBounds {
    pub fn contains(&self, r: &RobotOffset<f64>) -> bool {
        r.dx_rob >= self.dx_min && r.dx_rob <= self.dx_max && r.dy_rob >= self.dy_min && r.dy_rob <= self.dy_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub table_polygon: Vec<TableEdge<f64>>,
    pub robot_radius: f64,
    pub reach_min: f64,
    pub reach_max: f64,
    /// Half-width of the arm's workspace sector around the robot's front.
    pub reach_halfangle: f64,
    pub nav_noise_sigma: f64,
    /// How far the gripper closing point may miss the handle.
    pub grasp_margin: f64,
    pub local_minimum_rate: f64,
    pub cup_radius: f64,
    /// Distance from cup centre to handle.
    pub handle_offset: f64,
    /// Largest angle between approach direction and handle axis that still holds the cup.
    pub slip_angle: f64,
    /// Bounding rectangle of candidate base positions used for data acquisition.
    pub robot_bounds: RobotBounds,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let corners = [
            Point2::new(0.0, 0.0),
            Point2::new(1.6, 0.0),
            Point2::new(1.6, 0.8),
            Point2::new(0.0, 0.8),
        ];
        Self {
            table_polygon: crate::geometry::table_polygon(&corners).expect("static rectangle"),
            robot_radius: 0.35,
            reach_min: 0.4,
            reach_max: 0.75,
            reach_halfangle: 60f64.to_radians(),
            nav_noise_sigma: 0.01,
            grasp_margin: 0.02,
            local_minimum_rate: 0.02,
            cup_radius: 0.04,
            handle_offset: 0.07,
            slip_angle: 1.2,
            robot_bounds: RobotBounds { dx_min: 0.2, dx_max: 1.2, dy_min: -0.8, dy_max: 0.8 },
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::InvalidConfig(m.to_string()));
        if !(self.reach_min > 0.0 && self.reach_min < self.reach_max) {
            return bad("need 0 < reach_min < reach_max");
        }
        if !(self.robot_radius > 0.0) {
            return bad("robot_radius must be positive");
        }
        if !(0.0..=1.0).contains(&self.local_minimum_rate) {
            return bad("local_minimum_rate must lie in [0, 1]");
        }
        if !(self.nav_noise_sigma >= 0.0 && self.grasp_margin >= 0.0 && self.cup_radius >= 0.0) {
            return bad("noise, margin and cup radius must be non-negative");
        }
        if self.handle_offset < self.cup_radius {
            return bad("handle must sit outside the cup");
        }
        let b = &self.robot_bounds;
        if !(b.dx_min < b.dx_max && b.dy_min < b.dy_max) {
            return bad("robot_bounds must be a non-empty rectangle");
        }
        Ok(())
    }

    /// The same world without navigation noise or controller failures.
    pub fn noiseless(&self) -> Self {
        Self { nav_noise_sigma: 0.0, local_minimum_rate: 0.0, ..self.clone() }
    }

    /// Candidate base grid spanning `robot_bounds` with `nx` values along dx and `ny` along dy.
    pub fn robot_grid(&self, nx: usize, ny: usize) -> Vec<RobotOffset<f64>> {
        let b = &self.robot_bounds;
        let mut out = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                out.push(RobotOffset::new(lerp(b.dx_min, b.dx_max, i, nx), lerp(b.dy_min, b.dy_max, j, ny)));
            }
        }
        out
    }
}

fn lerp(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if n <= 1 {
        return 0.5 * (lo + hi);
    }
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

/// Object poses on an `n_dx` x `n_dpsi` lattice (dx-major).
pub fn object_grid(dx: (f64, f64), dpsi: (f64, f64), n_dx: usize, n_dpsi: usize) -> Vec<ObjectFeatures<f64>> {
    let mut out = Vec::with_capacity(n_dx * n_dpsi);
    for i in 0..n_dx {
        for j in 0..n_dpsi {
            out.push(ObjectFeatures::new(lerp(dx.0, dx.1, i, n_dx), lerp(dpsi.0, dpsi.1, j, n_dpsi)));
        }
    }
    out
}

/// The 16-pose training lattice used throughout the pipeline.
pub fn default_object_grid() -> Vec<ObjectFeatures<f64>> {
    object_grid((0.05, 0.25), (1.7, 2.6), 4, 4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Success,
    Failure,
}

impl Label {
    pub fn is_success(self) -> bool {
        self == Label::Success
    }

    /// +1 for success, -1 for failure.
    pub fn sign(self) -> i8 {
        if self.is_success() {
            1
        } else {
            -1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    None,
    UnreachableTheory,
    TableCollision,
    ObjectCollision,
    EmptyGrip,
    Slip,
    LocalMinimum,
}

impl FailureCause {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureCause::None => "none",
            FailureCause::UnreachableTheory => "unreachable_theory",
            FailureCause::TableCollision => "table_collision",
            FailureCause::ObjectCollision => "object_collision",
            FailureCause::EmptyGrip => "empty_grip",
            FailureCause::Slip => "slip",
            FailureCause::LocalMinimum => "local_minimum",
        }
    }

    /// False only for pairs rejected by the capability filter.
    pub fn was_executed(self) -> bool {
        self != FailureCause::UnreachableTheory
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => FailureCause::None,
            "unreachable_theory" => FailureCause::UnreachableTheory,
            "table_collision" => FailureCause::TableCollision,
            "object_collision" => FailureCause::ObjectCollision,
            "empty_grip" => FailureCause::EmptyGrip,
            "slip" => FailureCause::Slip,
            "local_minimum" => FailureCause::LocalMinimum,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub object: ObjectFeatures<f64>,
    pub robot: RobotOffset<f64>,
    pub label: Label,
    pub cause: FailureCause,
}

impl TrialRecord {
    fn new(object: ObjectFeatures<f64>, robot: RobotOffset<f64>, cause: FailureCause) -> Self {
        let label = if cause == FailureCause::None { Label::Success } else { Label::Failure };
        Self { object, robot, label, cause }
    }
}

/// Independent RNG stream for trial `stream` under `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Handle position in the feature frame.
pub fn handle_position(object: &ObjectFeatures<f64>, world: &WorldConfig) -> Point2<f64> {
    let centre = Point2::new(-object.dx_obj, 0.0);
    // heading in the feature frame: inward normal (-x) rotated by dpsi
    let heading = std::f64::consts::PI + object.dpsi_obj;
    centre.add(Point2::new(heading.cos(), heading.sin()).scale(world.handle_offset))
}

fn approach(object: &ObjectFeatures<f64>, base: Point2<f64>, world: &WorldConfig) -> (Point2<f64>, f64, f64) {
    let handle = handle_position(object, world);
    let a = handle.sub(base);
    let dist = a.norm();
    // robot faces -x
    let off_axis = (a.y).atan2(-a.x).abs();
    (handle, dist, off_axis)
}

/// Capability-map style kinematic bound plus the table-clearance bound.
pub fn theoretically_reachable(object: &ObjectFeatures<f64>, robot: &RobotOffset<f64>, world: &WorldConfig) -> bool {
    if robot.dx_rob < world.robot_radius {
        return false;
    }
    let (_, dist, off_axis) = approach(object, robot.as_point(), world);
    dist >= world.reach_min && dist <= world.reach_max && off_axis <= world.reach_halfangle
}

/// Outcome of the physical sequence from an achieved base position, before any
/// stochastic controller failure. `planned` is false when the arm could not plan a
/// reach from the commanded pose.
fn physical_outcome(object: &ObjectFeatures<f64>, achieved: Point2<f64>, planned: bool, local_minimum: bool, world: &WorldConfig) -> FailureCause {
    if achieved.x < world.robot_radius {
        return FailureCause::TableCollision;
    }
    let (handle, dist, off_axis) = approach(object, achieved, world);
    let cup = Point2::new(-object.dx_obj, 0.0);
    if segment_point_distance(achieved, handle, cup) < world.cup_radius {
        return FailureCause::ObjectCollision;
    }
    if local_minimum {
        return FailureCause::LocalMinimum;
    }
    let miss = (dist - world.reach_max).max(world.reach_min - dist).max(0.0);
    if !planned || miss > world.grasp_margin || off_axis > world.reach_halfangle {
        return FailureCause::EmptyGrip;
    }
    // angle between approach direction and the handle's axis (cup -> handle, reversed)
    let axis = cup.sub(handle);
    let dir = handle.sub(achieved);
    let cosang = (axis.dot(dir) / (axis.norm() * dir.norm())).clamp(-1.0, 1.0);
    if cosang.acos() > world.slip_angle {
        return FailureCause::Slip;
    }
    FailureCause::None
}

fn segment_point_distance(a: Point2<f64>, b: Point2<f64>, p: Point2<f64>) -> f64 {
    let d = b.sub(a);
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a.add(d.scale(t)))
}

/// Ground-truth success predicate of the noiseless world.
pub fn succeeds_noiseless(object: &ObjectFeatures<f64>, robot: &RobotOffset<f64>, world: &WorldConfig) -> bool {
    theoretically_reachable(object, robot, world)
        && physical_outcome(object, robot.as_point(), true, false, world) == FailureCause::None
}

/// Deterministic success set over achieved base positions (reach planned from the
/// commanded pose is assumed to have succeeded).
pub fn achieved_pose_succeeds(object: &ObjectFeatures<f64>, achieved: &RobotOffset<f64>, world: &WorldConfig) -> bool {
    physical_outcome(object, achieved.as_point(), true, false, world) == FailureCause::None
}

/// Runs the navigate-reach-grasp-lift sequence without the capability filter.
/// Draws exactly three variates from `rng`.
pub fn simulate_trial<R: Rng + ?Sized>(object: &ObjectFeatures<f64>, robot: &RobotOffset<f64>, world: &WorldConfig, rng: &mut R) -> TrialRecord {
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    let achieved = RobotOffset::new(robot.dx_rob + world.nav_noise_sigma * nx, robot.dy_rob + world.nav_noise_sigma * ny);
    execute_grasp(object, robot, &achieved, world, rng)
}

/// Reach, grasp and lift from an already achieved base position. The arm motion is
/// planned for the commanded position. Draws one variate from `rng`.
pub fn execute_grasp<R: Rng + ?Sized>(
    object: &ObjectFeatures<f64>,
    commanded: &RobotOffset<f64>,
    achieved: &RobotOffset<f64>,
    world: &WorldConfig,
    rng: &mut R,
) -> TrialRecord {
    let planned = theoretically_reachable(object, commanded, world);
    let cause = execute_planned_grasp(object, achieved, planned, world, rng);
    TrialRecord::new(*object, *commanded, cause)
}

/// Like [`execute_grasp`] when the reach was planned against a belief rather than the
/// true object: `planned` says whether that planning succeeded.
pub fn execute_planned_grasp<R: Rng + ?Sized>(
    object: &ObjectFeatures<f64>,
    achieved: &RobotOffset<f64>,
    planned: bool,
    world: &WorldConfig,
    rng: &mut R,
) -> FailureCause {
    let u: f64 = rng.random();
    physical_outcome(object, achieved.as_point(), planned, u < world.local_minimum_rate, world)
}

/// One trial with capability filtering: theoretically unreachable bases fail without simulation.
pub fn execute_trial<R: Rng + ?Sized>(object: &ObjectFeatures<f64>, robot: &RobotOffset<f64>, world: &WorldConfig, rng: &mut R) -> TrialRecord {
    if !theoretically_reachable(object, robot, world) {
        return TrialRecord::new(*object, *robot, FailureCause::UnreachableTheory);
    }
    simulate_trial(object, robot, world, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub world: WorldConfig,
    pub object_grid: Vec<ObjectFeatures<f64>>,
    pub robot_grid: Vec<RobotOffset<f64>>,
    /// Object-major: record `j * M + i` pairs object `j` with robot offset `i`.
    pub records: Vec<TrialRecord>,
    /// Number of trials that were actually simulated.
    pub executed: usize,
}

impl Dataset {
    pub fn n_objects(&self) -> usize {
        self.object_grid.len()
    }

    pub fn n_robots(&self) -> usize {
        self.robot_grid.len()
    }

    /// Records belonging to object pose `j`.
    pub fn slice(&self, j: usize) -> &[TrialRecord] {
        let m = self.n_robots();
        &self.records[j * m..(j + 1) * m]
    }

    /// Rebuilds a dataset from records in object-major order.
    pub fn from_records(world: WorldConfig, records: Vec<TrialRecord>) -> Result<Self, WorldError> {
        let mut object_grid: Vec<ObjectFeatures<f64>> = Vec::new();
        for r in &records {
            if object_grid.last() != Some(&r.object) {
                object_grid.push(r.object);
            }
        }
        if object_grid.is_empty() {
            return Err(WorldError::EmptyGrid("no records"));
        }
        let m = records.len() / object_grid.len();
        if m * object_grid.len() != records.len() {
            return Err(WorldError::Parse("records are not an N x M block".into()));
        }
        let robot_grid: Vec<_> = records[..m].iter().map(|r| r.robot).collect();
        for (k, r) in records.iter().enumerate() {
            if r.object != object_grid[k / m] || r.robot != robot_grid[k % m] {
                return Err(WorldError::Parse(format!("record {k} breaks the object-major layout")));
            }
        }
        let executed = records.iter().filter(|r| r.cause != FailureCause::UnreachableTheory).count();
        Ok(Self { world, object_grid, robot_grid, records, executed })
    }

    pub fn write_csv<W: Write>(&self, mut out: W, provenance: Option<&Provenance>) -> Result<(), WorldError> {
        if let Some(p) = provenance {
            writeln!(out, "{}", p.comment_line())?;
        }
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(["object_dx", "object_dpsi", "robot_dx", "robot_dy", "label", "cause"])?;
        for r in &self.records {
            w.write_record([
                r.object.dx_obj.to_string(),
                r.object.dpsi_obj.to_string(),
                r.robot.dx_rob.to_string(),
                r.robot.dy_rob.to_string(),
                if r.label.is_success() { "success".into() } else { "failure".into() },
                r.cause.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, world: WorldConfig) -> Result<Self, WorldError> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers()?.clone();
        let expected = ["object_dx", "object_dpsi", "robot_dx", "robot_dy", "label", "cause"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(WorldError::Parse(format!("unexpected header {:?}", headers)));
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let num = |i: usize| -> Result<f64, WorldError> {
                row[i].parse::<f64>().map_err(|e| WorldError::Parse(format!("column {i}: {e}")))
            };
            let label = match &row[4] {
                "success" => Label::Success,
                "failure" => Label::Failure,
                other => return Err(WorldError::Parse(format!("bad label {other}"))),
            };
            let cause = FailureCause::parse(&row[5]).ok_or_else(|| WorldError::Parse(format!("bad cause {}", &row[5])))?;
            if label.is_success() != (cause == FailureCause::None) {
                return Err(WorldError::Parse("label and cause disagree".into()));
            }
            records.push(TrialRecord {
                object: ObjectFeatures { dx_obj: num(0)?, dpsi_obj: num(1)? },
                robot: RobotOffset::new(num(2)?, num(3)?),
                label,
                cause,
            });
        }
        Self::from_records(world, records)
    }
}

/// Runs one trial per (object, robot) pair. Trial `j * M + i` draws from its own
/// RNG stream, so results do not depend on scheduling.
pub fn generate_dataset(
    world: &WorldConfig,
    object_grid: &[ObjectFeatures<f64>],
    robot_grid: &[RobotOffset<f64>],
    seed: u64,
    use_capability_filter: bool,
) -> Result<Dataset, WorldError> {
    world.validate()?;
    if object_grid.is_empty() {
        return Err(WorldError::EmptyGrid("object grid"));
    }
    if robot_grid.is_empty() {
        return Err(WorldError::EmptyGrid("robot grid"));
    }
    let m = robot_grid.len();
    let records: Vec<TrialRecord> = (0..object_grid.len() * m)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k as u64);
            let (o, r) = (&object_grid[k / m], &robot_grid[k % m]);
            if use_capability_filter {
                execute_trial(o, r, world, &mut rng)
            } else {
                simulate_trial(o, r, world, &mut rng)
            }
        })
        .collect();
    let executed = if use_capability_filter {
        records.iter().filter(|r| r.cause != FailureCause::UnreachableTheory).count()
    } else {
        records.len()
    };
    Ok(Dataset { world: world.clone(), object_grid: object_grid.to_vec(), robot_grid: robot_grid.to_vec(), records, executed })
}
