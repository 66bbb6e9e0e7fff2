//! Flaw detection over plans and traces, and the location-merging transform.

use serde::{Deserialize, Serialize};

use super::projection::{joint_map, Event, ExecutionTrace, PlanningContext};
use super::{Designator, PlanError, PlanNode, Purpose, ResolvedLocation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlawKind {
    UnoptimizedLocations,
    UnreachedGoalLocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flaw {
    pub kind: FlawKind,
    /// Task paths the flaw is about.
    pub tasks: Vec<String>,
    pub objects: Vec<String>,
    pub proposed: Option<ResolvedLocation>,
}

/// `(achieve path, at-location path, object)` for every pick-up task with a location.
fn pick_up_tasks(plan: &PlanNode) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    plan.walk(&mut |path, n| {
        if let PlanNode::Achieve { goal, children } = n {
            if let Some(obj) = goal.picked_up_object() {
                if let Some(k) = children.iter().position(|c| matches!(c, PlanNode::AtLocation { .. })) {
                    out.push((path.to_string(), format!("{path}.{k}"), obj.to_string()));
                }
            }
        }
    });
    out
}

fn designator_at<'a>(plan: &'a PlanNode, path: &str) -> Option<&'a Designator> {
    match plan.at_path(path)? {
        PlanNode::AtLocation { location, .. } => Some(location),
        _ => None,
    }
}

/// First pair of pick-up tasks on distinct objects, at different locations, that
/// can both be done from one base position with merged success probability above
/// the threshold.
pub fn detect_merge_flaw(plan: &PlanNode, ctx: &PlanningContext) -> Result<Option<Flaw>, PlanError> {
    let tasks = pick_up_tasks(plan);
    for i in 0..tasks.len() {
        for j in i + 1..tasks.len() {
            let (a, b) = (&tasks[i], &tasks[j]);
            if a.2 == b.2 {
                continue;
            }
            if designator_at(plan, &a.1) == designator_at(plan, &b.1) {
                continue;
            }
            let objects = vec![a.2.clone(), b.2.clone()];
            let map = joint_map(ctx, &objects)?;
            let best = map.best_cell();
            log::debug!("merge candidate {} + {}: best merged probability {}", a.2, b.2, best.value);
            if best.value > ctx.config.threshold {
                return Ok(Some(Flaw {
                    kind: FlawKind::UnoptimizedLocations,
                    tasks: vec![a.1.clone(), b.1.clone()],
                    objects,
                    proposed: Some(ResolvedLocation { x: best.center.x, y: best.center.y, probability: best.value }),
                }));
            }
        }
    }
    Ok(None)
}

/// One flaw per navigation whose achieved position is farther than `tolerance` from its goal.
pub fn detect_unreached_goal_flaw(trace: &ExecutionTrace, tolerance: f64) -> Vec<Flaw> {
    trace
        .navigations()
        .filter_map(|e| match e {
            Event::Navigate { task, goal, achieved, .. } if goal.dist(*achieved) > tolerance => Some(Flaw {
                kind: FlawKind::UnreachedGoalLocation,
                tasks: vec![task.clone()],
                objects: vec![],
                proposed: None,
            }),
            _ => None,
        })
        .collect()
}

/// Gives both matched at-location tasks the flaw's shared location.
pub fn apply_merge_transform(plan: &PlanNode, flaw: &Flaw) -> Result<PlanNode, PlanError> {
    if flaw.kind != FlawKind::UnoptimizedLocations || flaw.tasks.len() != 2 || flaw.objects.len() != 2 {
        return Err(PlanError::StaleFlaw("not a location-merging flaw".into()));
    }
    let proposed = flaw.proposed.ok_or_else(|| PlanError::StaleFlaw("flaw proposes no location".into()))?;
    let joint = Designator { purpose: Purpose::JointPickUp, objects: flaw.objects.clone(), resolved: Some(proposed) };
    let mut out = plan.clone();
    for (path, obj) in flaw.tasks.iter().zip(&flaw.objects) {
        match out.at_path_mut(path) {
            Some(PlanNode::AtLocation { location, .. }) if location.objects.contains(obj) => *location = joint.clone(),
            _ => return Err(PlanError::StaleFlaw(format!("no at-location for {obj} at {path}"))),
        }
    }
    Ok(out)
}
