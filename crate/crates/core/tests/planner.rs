mod common;

use std::collections::HashMap;

use arplace::evalharness::TwoCupScenario;
use arplace::planner::*;
use arplace::simworld::{trial_rng, WorldConfig};
use arplace::Point2;

struct Fixture {
    world: WorldConfig,
    scene: Scene,
    config: PlannerConfig,
    time_model: TimeModel,
}

impl Fixture {
    fn new(separation: f64, noiseless: bool) -> Self {
        let (world, _) = common::trained();
        let world = if noiseless { world.noiseless() } else { world.clone() };
        let scene = TwoCupScenario::default().scene(&world, separation).unwrap();
        Self { world, scene, config: PlannerConfig::default(), time_model: TimeModel::default() }
    }

    fn ctx(&self) -> PlanningContext<'_> {
        PlanningContext {
            gsm: &common::trained().1,
            world: &self.world,
            scene: &self.scene,
            config: &self.config,
            time_model: &self.time_model,
            seed: 7,
        }
    }
}

fn two_cups() -> PlanNode {
    TwoCupScenario::plan()
}

fn skeleton(trace: &ExecutionTrace) -> Vec<String> {
    trace
        .events
        .iter()
        .map(|e| match &e.event {
            Event::TaskStart { task, kind } => format!("start {task} {kind}"),
            Event::TaskEnd { task, status } => format!("end {task} {status:?}"),
            Event::Perceive { task, object, .. } => format!("perceive {task} {object}"),
            Event::Navigate { task, .. } => format!("navigate {task}"),
            Event::Grasp { task, object, .. } => format!("grasp {task} {object}"),
        })
        .collect()
}

#[test]
fn empty_sequence_projects_to_empty_trace() {
    let f = Fixture::new(0.2, true);
    let trace = project(&PlanNode::Sequence { children: vec![] }, &f.ctx(), &ProjectionOptions::default(), &mut trial_rng(0, 0)).unwrap();
    assert!(trace.events.is_empty());
    assert_eq!(plan_duration(&trace, &TimeModel::calibrated()), 0.0);
}

#[test]
fn unresolved_plan_is_rejected_before_execution() {
    let f = Fixture::new(0.2, true);
    let err = project(&PlanNode::pick_up("cup-1"), &f.ctx(), &ProjectionOptions::default(), &mut trial_rng(0, 0)).unwrap_err();
    assert!(matches!(err, PlanError::Unresolved(p) if p == "t.1"));
}

#[test]
fn one_pick_up_follows_the_expected_event_skeleton() {
    let f = Fixture::new(0.2, true);
    let ctx = f.ctx();
    let plan = resolve_designators(&PlanNode::pick_up("cup-1"), &ctx).unwrap();
    let trace = project(&plan, &ctx, &ProjectionOptions::default(), &mut trial_rng(0, 0)).unwrap();
    let expected = [
        "start t achieve",
        "start t.0 perceive",
        "perceive t.0 cup-1",
        "end t.0 Succeeded",
        "start t.1 at_location",
        "navigate t.1",
        "grasp t.1 cup-1",
        "end t.1 Succeeded",
        "end t Succeeded",
    ];
    assert_eq!(skeleton(&trace), expected);
    assert!(trace.events.windows(2).all(|w| w[0].time <= w[1].time));
}

#[test]
fn noiseless_navigation_reaches_the_goal_exactly() {
    let f = Fixture::new(0.3, true);
    let ctx = f.ctx();
    let plan = resolve_designators(&two_cups(), &ctx).unwrap();
    let trace = project(&plan, &ctx, &ProjectionOptions::default(), &mut trial_rng(1, 0)).unwrap();
    let navs: Vec<_> = trace.navigations().collect();
    assert_eq!(navs.len(), 2);
    for e in navs {
        let Event::Navigate { goal, achieved, .. } = e else { unreachable!() };
        assert_eq!(goal, achieved);
    }
    assert!(detect_unreached_goal_flaw(&trace, 1e-9).is_empty());
}

#[test]
fn injected_disturbance_gives_exactly_one_unreached_flaw() {
    let f = Fixture::new(0.3, false);
    let ctx = f.ctx();
    let plan = resolve_designators(&two_cups(), &ctx).unwrap();
    let opts = ProjectionOptions { disturbances: HashMap::from([("t.1.1".to_string(), Point2::new(0.0, -0.5))]) };
    let trace = project(&plan, &ctx, &opts, &mut trial_rng(2, 0)).unwrap();
    let flaws = detect_unreached_goal_flaw(&trace, 0.05);
    assert_eq!(flaws.len(), 1);
    assert_eq!(flaws[0].kind, FlawKind::UnreachedGoalLocation);
    assert_eq!(flaws[0].tasks, vec!["t.1.1".to_string()]);
    // a tolerance above every deviation reports nothing
    assert!(detect_unreached_goal_flaw(&trace, 1.0).is_empty());
}

#[test]
fn unreached_flaws_are_complete() {
    let f = Fixture::new(0.3, false);
    let ctx = f.ctx();
    let plan = resolve_designators(&two_cups(), &ctx).unwrap();
    let trace = project(&plan, &ctx, &ProjectionOptions::default(), &mut trial_rng(3, 0)).unwrap();
    for tol in [0.001, 0.005, 0.01, 0.02, 0.05] {
        let expected: Vec<String> = trace
            .navigations()
            .filter_map(|e| match e {
                Event::Navigate { task, goal, achieved, .. } if goal.dist(*achieved) > tol => Some(task.clone()),
                _ => None,
            })
            .collect();
        let got: Vec<String> = detect_unreached_goal_flaw(&trace, tol).into_iter().flat_map(|f| f.tasks).collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn single_pick_up_has_no_merge_flaw() {
    let f = Fixture::new(0.2, true);
    let ctx = f.ctx();
    let plan = resolve_designators(&PlanNode::pick_up("cup-1"), &ctx).unwrap();
    assert!(detect_merge_flaw(&plan, &ctx).unwrap().is_none());
}

#[test]
fn close_cups_merge_and_far_cups_do_not() {
    let near = Fixture::new(0.2, true);
    let ctx = near.ctx();
    let plan = resolve_designators(&two_cups(), &ctx).unwrap();
    let flaw = detect_merge_flaw(&plan, &ctx).unwrap().expect("cups 20 cm apart should merge");
    assert_eq!(flaw.kind, FlawKind::UnoptimizedLocations);
    assert_eq!(flaw.tasks, vec!["t.0.1".to_string(), "t.1.1".to_string()]);
    assert!(flaw.proposed.unwrap().probability > 0.85);

    let far = Fixture::new(0.6, true);
    let ctx = far.ctx();
    let plan = resolve_designators(&two_cups(), &ctx).unwrap();
    assert!(detect_merge_flaw(&plan, &ctx).unwrap().is_none());
}

#[test]
fn merge_gate_is_sound() {
    // raising the threshold above the proposed probability must silence the flaw
    let mut f = Fixture::new(0.35, true);
    let plan = resolve_designators(&two_cups(), &f.ctx()).unwrap();
    let p = detect_merge_flaw(&plan, &f.ctx()).unwrap().unwrap().proposed.unwrap().probability;
    f.config.threshold = p;
    assert!(detect_merge_flaw(&plan, &f.ctx()).unwrap().is_none());
}

#[test]
fn merge_transform_shares_one_location() {
    let f = Fixture::new(0.2, true);
    let ctx = f.ctx();
    let a = resolve_designators(&two_cups(), &ctx).unwrap();
    let flaw = detect_merge_flaw(&a, &ctx).unwrap().unwrap();
    let b = apply_merge_transform(&a, &flaw).unwrap();

    let loc = |p: &PlanNode, path: &str| match p.at_path(path) {
        Some(PlanNode::AtLocation { location, .. }) => location.clone(),
        _ => panic!("no at-location at {path}"),
    };
    assert_eq!(loc(&b, "t.0.1"), loc(&b, "t.1.1"));
    assert_eq!(loc(&b, "t.0.1").purpose, Purpose::JointPickUp);
    assert_eq!(loc(&b, "t.0.1").resolved, flaw.proposed);

    // every node outside the two at-location nodes is unchanged
    let mut before = Vec::new();
    a.walk(&mut |p, n| before.push((p.to_string(), n.clone())));
    let mut after = Vec::new();
    b.walk(&mut |p, n| after.push((p.to_string(), n.clone())));
    assert_eq!(before.len(), after.len());
    for ((pa, na), (pb, nb)) in before.iter().zip(&after) {
        assert_eq!(pa, pb);
        if flaw.tasks.contains(pa) {
            continue;
        }
        if matches!(na, PlanNode::Perceive { .. } | PlanNode::AtLocation { .. }) {
            assert_eq!(na, nb, "node {pa} changed");
        }
        assert_eq!(na.kind(), nb.kind());
    }
    assert_eq!(a.goals(), b.goals());

    // re-detection on the merged plan finds nothing, and reapplying changes nothing
    assert!(detect_merge_flaw(&b, &ctx).unwrap().is_none());
    assert_eq!(apply_merge_transform(&b, &flaw).unwrap(), b);
}

#[test]
fn merged_plan_saves_exactly_one_navigation() {
    let mut f = Fixture::new(0.2, true);
    f.time_model = TimeModel::calibrated();
    let ctx = f.ctx();
    let a = resolve_designators(&two_cups(), &ctx).unwrap();
    let b = apply_merge_transform(&a, &detect_merge_flaw(&a, &ctx).unwrap().unwrap()).unwrap();
    let ta = project(&a, &ctx, &ProjectionOptions::default(), &mut trial_rng(4, 0)).unwrap();
    let tb = project(&b, &ctx, &ProjectionOptions::default(), &mut trial_rng(4, 0)).unwrap();
    assert_eq!(ta.navigations().count(), 2);
    assert_eq!(tb.navigations().count(), 1);
    assert_eq!(ta.grasps().count(), tb.grasps().count());

    // event accounting: the difference is exactly the navigation time
    let tm = &f.time_model;
    let nav_time = |t: &ExecutionTrace| t.navigations().map(|e| tm.duration(e)).sum::<f64>();
    let da = plan_duration(&ta, tm);
    let db = plan_duration(&tb, tm);
    assert!(db < da);
    assert!(((da - db) - (nav_time(&ta) - nav_time(&tb))).abs() < 1e-9);
}

#[test]
fn changed_plan_makes_flaw_stale() {
    let f = Fixture::new(0.2, true);
    let ctx = f.ctx();
    let a = resolve_designators(&two_cups(), &ctx).unwrap();
    let flaw = detect_merge_flaw(&a, &ctx).unwrap().unwrap();
    let shrunk = PlanNode::Sequence { children: vec![a.children()[0].clone()] };
    assert!(matches!(apply_merge_transform(&shrunk, &flaw), Err(PlanError::StaleFlaw(_))));
}

#[test]
fn projection_is_deterministic() {
    let f = Fixture::new(0.3, false);
    let ctx = f.ctx();
    let plan = resolve_designators(&two_cups(), &ctx).unwrap();
    let t1 = project(&plan, &ctx, &ProjectionOptions::default(), &mut trial_rng(9, 3)).unwrap();
    let t2 = project(&plan, &ctx, &ProjectionOptions::default(), &mut trial_rng(9, 3)).unwrap();
    assert_eq!(t1.to_json_lines(), t2.to_json_lines());
    assert_eq!(resolve_designators(&two_cups(), &ctx).unwrap(), plan);
}

#[test]
fn perception_shrinks_covariance_scale() {
    let f = Fixture::new(0.2, true);
    let ctx = f.ctx();
    let once = resolve_designators(&PlanNode::pick_up("cup-1"), &ctx).unwrap();
    let plan = PlanNode::Sequence { children: vec![PlanNode::Perceive { object: "cup-1".into() }, once] };
    let trace = project(&plan, &ctx, &ProjectionOptions::default(), &mut trial_rng(0, 0)).unwrap();
    let scales: Vec<f64> = trace
        .events
        .iter()
        .filter_map(|e| match &e.event {
            Event::Perceive { covariance_scale, .. } => Some(*covariance_scale),
            _ => None,
        })
        .collect();
    assert_eq!(scales, vec![0.5, 0.25]);
}

#[test]
fn three_meter_drive_takes_ten_seconds() {
    let nav = Event::Navigate {
        task: "t.0".into(),
        from: Point2::new(0.0, 0.0),
        goal: Point2::new(3.0, 0.0),
        achieved: Point2::new(3.0, 0.0),
        distance: 3.0,
    };
    let trace = ExecutionTrace {
        events: vec![
            TraceEvent { time: 0.0, event: Event::TaskStart { task: "t.0".into(), kind: "at_location".into() } },
            TraceEvent { time: 10.0, event: nav },
            TraceEvent { time: 10.0, event: Event::TaskEnd { task: "t.0".into(), status: TaskStatus::Succeeded } },
        ],
    };
    assert!((plan_duration(&trace, &TimeModel::default()) - 10.0).abs() < 1e-12);
}

#[test]
fn plans_round_trip_through_text() {
    let f = Fixture::new(0.2, true);
    let ctx = f.ctx();
    let a = resolve_designators(&two_cups(), &ctx).unwrap();
    let b = apply_merge_transform(&a, &detect_merge_flaw(&a, &ctx).unwrap().unwrap()).unwrap();
    for p in [two_cups(), a, b] {
        assert_eq!(parse_plan(&write_plan(&p)).unwrap(), p);
    }
}
