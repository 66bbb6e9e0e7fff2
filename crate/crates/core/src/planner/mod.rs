//! A small transformational planner: plans with symbolic location designators,
//! projection against the synthetic world, flaw detection and the merge transform.

pub mod flaws;
pub mod projection;
pub mod sexpr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arplace::MapError;
use crate::geometry::{GeometryError, Point2, Pose2, TableEdge};

pub use flaws::{apply_merge_transform, detect_merge_flaw, detect_unreached_goal_flaw, Flaw, FlawKind};
pub use projection::{
    object_map, plan_duration, project, resolve_designators, Event, ExecutionTrace, PlanningContext, ProjectionOptions, TaskStatus, TimeModel,
    TraceEvent,
};
pub use sexpr::{parse_plan, write_plan};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("plan syntax: {0}")]
    Parse(String),
    #[error("unresolved designator at task {0}")]
    Unresolved(String),
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error("plan no longer matches the flaw: {0}")]
    StaleFlaw(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Goal {
    pub fn picked_up(object: &str) -> Self {
        Self { predicate: "entity-picked-up".into(), args: vec![object.into()] }
    }

    /// Object named by an `entity-picked-up` goal.
    pub fn picked_up_object(&self) -> Option<&str> {
        (self.predicate == "entity-picked-up" && self.args.len() == 1).then(|| self.args[0].as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    PickUp,
    PutDown,
    JointPickUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedLocation {
    pub x: f64,
    pub y: f64,
    pub probability: f64,
}

impl ResolvedLocation {
    pub fn point(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Designator {
    pub purpose: Purpose,
    pub objects: Vec<String>,
    pub resolved: Option<ResolvedLocation>,
}

impl Designator {
    pub fn pick_up(object: &str) -> Self {
        Self { purpose: Purpose::PickUp, objects: vec![object.into()], resolved: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanNode {
    Achieve { goal: Goal, children: Vec<PlanNode> },
    Perceive { object: String },
    AtLocation { location: Designator, children: Vec<PlanNode> },
    Sequence { children: Vec<PlanNode> },
}

impl PlanNode {
    pub fn children(&self) -> &[PlanNode] {
        match self {
            PlanNode::Achieve { children, .. } | PlanNode::AtLocation { children, .. } | PlanNode::Sequence { children } => children,
            PlanNode::Perceive { .. } => &[],
        }
    }

    fn children_mut(&mut self) -> Option<&mut Vec<PlanNode>> {
        match self {
            PlanNode::Achieve { children, .. } | PlanNode::AtLocation { children, .. } | PlanNode::Sequence { children } => Some(children),
            PlanNode::Perceive { .. } => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PlanNode::Achieve { .. } => "achieve",
            PlanNode::Perceive { .. } => "perceive",
            PlanNode::AtLocation { .. } => "at_location",
            PlanNode::Sequence { .. } => "sequence",
        }
    }

    /// Node at a task path such as `t.0.1` (the root is `t`).
    pub fn at_path(&self, path: &str) -> Option<&PlanNode> {
        let mut node = self;
        for idx in path_indices(path)? {
            node = node.children().get(idx)?;
        }
        Some(node)
    }

    pub fn at_path_mut(&mut self, path: &str) -> Option<&mut PlanNode> {
        let mut node = self;
        for idx in path_indices(path)? {
            node = node.children_mut()?.get_mut(idx)?;
        }
        Some(node)
    }

    /// Visits every node with its task path, parents before children.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&str, &'a PlanNode)) {
        fn go<'a>(n: &'a PlanNode, path: String, f: &mut impl FnMut(&str, &'a PlanNode)) {
            f(&path, n);
            for (k, c) in n.children().iter().enumerate() {
                go(c, format!("{path}.{k}"), f);
            }
        }
        go(self, "t".to_string(), f);
    }

    /// Goals of all achieve nodes in plan order.
    pub fn goals(&self) -> Vec<Goal> {
        let mut out = Vec::new();
        self.walk(&mut |_, n| {
            if let PlanNode::Achieve { goal, .. } = n {
                out.push(goal.clone());
            }
        });
        out
    }

    /// The canonical pick-up plan for one object: perceive it, then grasp it at a location.
    pub fn pick_up(object: &str) -> Self {
        PlanNode::Achieve {
            goal: Goal::picked_up(object),
            children: vec![
                PlanNode::Perceive { object: object.into() },
                PlanNode::AtLocation { location: Designator::pick_up(object), children: vec![] },
            ],
        }
    }
}

fn path_indices(path: &str) -> Option<Vec<usize>> {
    let mut parts = path.split('.');
    if parts.next()? != "t" {
        return None;
    }
    parts.map(|p| p.parse().ok()).collect()
}

/// Ground-truth and believed state of one object in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    /// True pose.
    pub pose: Pose2<f64>,
    /// Perceived pose.
    pub estimate: Pose2<f64>,
    /// Covariance of `[dx_obj, dy_obj, dpsi_obj]` around the estimate.
    pub covariance: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub table: Vec<TableEdge<f64>>,
    pub objects: Vec<SceneObject>,
    pub robot_start: Point2<f64>,
}

impl Scene {
    pub fn object(&self, id: &str) -> Result<&SceneObject, PlanError> {
        self.objects.iter().find(|o| o.id == id).ok_or_else(|| PlanError::UnknownObject(id.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Minimum merged success probability for the merge transform.
    pub threshold: f64,
    pub n_samples: usize,
    pub cell_size: f64,
    /// Standard deviation of the robot's own position estimate.
    pub robot_sigma: f64,
    /// Covariance multiplier applied by each perception.
    pub perceive_factor: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { threshold: 0.85, n_samples: 100, cell_size: 0.025, robot_sigma: 0.05, perceive_factor: 0.5 }
    }
}
