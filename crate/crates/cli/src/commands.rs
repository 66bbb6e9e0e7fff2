//! Subcommand implementations. Every artifact starts with the provenance stamp.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use arplace::arplace::{apply_robot_uncertainty, compute_map, cost_map, merge as merge_grids, ArplaceGrid, Frame, GaussianBelief, GridGeometry};
use arplace::evalharness::{accuracy_curve, robustness_experiment, transformation_benefit, TwoCupScenario};
use arplace::pipeline;
use arplace::planner::{
    apply_merge_transform, detect_merge_flaw, detect_unreached_goal_flaw, parse_plan, plan_duration, project, resolve_designators, write_plan,
    ExecutionTrace, Flaw, PlanNode, PlanningContext, ProjectionOptions, Scene, SceneObject, TimeModel,
};
use arplace::provenance::Provenance;
use arplace::shapemodel::GsmModel;
use arplace::simworld::{generate_dataset, trial_rng, Dataset};
use arplace::{ObjectFeatures, Point2};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::CliError;

pub struct Context {
    pub cfg: PipelineConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub provenance: Provenance,
}

impl Context {
    pub fn new(cfg: PipelineConfig, seed: u64, out: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&out).map_err(|e| CliError::output(&out, e))?;
        let provenance = cfg.provenance(seed);
        Ok(Self { cfg, seed, out, provenance })
    }

    fn write(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::output(&path, e))?;
        fs::write(&path, buf).map_err(|e| CliError::output(&path, e))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let doc = Stamped { provenance: self.provenance.clone(), body };
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, &doc).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }
}

/// JSON artifact: provenance first, payload second.
#[derive(Serialize, Deserialize)]
struct Stamped<T> {
    provenance: Provenance,
    body: T,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::missing(path, e))
}

fn load_gsm(path: &Path) -> Result<GsmModel<f64>, CliError> {
    let doc: Stamped<GsmModel<f64>> = serde_json::from_str(&read_text(path)?).map_err(|e| CliError::bad_input(path, e))?;
    doc.body.validate().map_err(|e| CliError::bad_input(path, e))?;
    Ok(doc.body)
}

fn load_map(path: &Path) -> Result<ArplaceGrid<f64>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::missing(path, e))?;
    ArplaceGrid::read_text(BufReader::new(file)).map_err(|e| CliError::bad_input(path, e))
}

pub fn gen_data(ctx: &Context, filter: bool) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let objects = cfg.data.objects();
    let robots = cfg.world.robot_grid(cfg.data.robot_counts[0], cfg.data.robot_counts[1]);
    let ds = generate_dataset(&cfg.world, &objects, &robots, ctx.seed, filter).map_err(CliError::computation)?;
    ctx.write("dataset.csv", |w| ds.write_csv(w, Some(&ctx.provenance)).map_err(std::io::Error::other))?;
    println!("trials {} executed {}", ds.records.len(), ds.executed);
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    landmark_modes: usize,
    energy: f64,
    mean_landmark_error: f64,
    r_squared: &'a [f64],
    training_accuracy: Vec<f64>,
}

pub fn train(ctx: &Context, data: &Path) -> Result<(), CliError> {
    let file = fs::File::open(data).map_err(|e| CliError::missing(data, e))?;
    let ds = Dataset::read_csv(BufReader::new(file), ctx.cfg.world.clone()).map_err(|e| CliError::bad_input(data, e))?;
    let out = pipeline::train(&ds, &ctx.cfg.train).map_err(CliError::computation)?;
    let sets = arplace::classifier::labeled_sets(&ds);
    let training_accuracy = out.svms.iter().zip(&sets).map(|(m, s)| m.accuracy(&s.points, &s.labels)).collect();
    let r = &out.report;
    ctx.write_json("gsm.json", &out.gsm)?;
    ctx.write_json(
        "train_report.json",
        &TrainSummary {
            landmark_modes: r.landmark_d,
            energy: r.energy,
            mean_landmark_error: r.mean_landmark_error,
            r_squared: &r.r_squared,
            training_accuracy,
        },
    )?;
    println!("d={} energy={:.4} r2={:?}", out.gsm.d, r.energy, r.r_squared);
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeliefFile {
    mean: Vec<f64>,
    variances: Option<Vec<f64>>,
    covariance: Option<Vec<Vec<f64>>>,
}

fn load_belief(path: &Path) -> Result<GaussianBelief<f64>, CliError> {
    let b: BeliefFile = toml::from_str(&read_text(path)?).map_err(|e| CliError::bad_input(path, e))?;
    let belief = match (b.variances, b.covariance) {
        (Some(v), None) => GaussianBelief::diagonal(b.mean, &v),
        (None, Some(c)) => GaussianBelief::new(b.mean, c),
        _ => return Err(CliError::bad_input(path, "give exactly one of `variances` and `covariance`")),
    };
    belief.map_err(|e| CliError::bad_input(path, e))
}

pub fn map(ctx: &Context, gsm: &Path, belief: &Path, name: &str) -> Result<(), CliError> {
    let gsm = load_gsm(gsm)?;
    let belief = load_belief(belief)?;
    let m = &ctx.cfg.map;
    let b = ctx.cfg.world.robot_bounds;
    let geometry = GridGeometry::covering(b.dx_min, b.dx_max, b.dy_min, b.dy_max, m.cell_size, Frame::Gsm).map_err(|e| CliError::config(e.to_string()))?;
    let map = compute_map(&gsm, &belief, &geometry, m.n_samples, &mut trial_rng(ctx.seed, 0)).map_err(CliError::computation)?;
    let s2 = m.robot_sigma * m.robot_sigma;
    let map = apply_robot_uncertainty(&map, [[s2, 0.0], [0.0, s2]]).map_err(CliError::computation)?;
    ctx.write(&format!("{name}.txt"), |w| map.write_text(w, Some(&ctx.provenance)))?;
    ctx.write(&format!("{name}.pgm"), |w| map.write_pgm(w, Some(&ctx.provenance)))?;
    let best = map.best_cell();
    println!("best cell ({}, {}) at ({:.3}, {:.3}) p={:.4}", best.row, best.col, best.center.x, best.center.y, best.value);
    Ok(())
}

pub fn merge_maps(paths: &[PathBuf]) -> Result<ArplaceGrid<f64>, CliError> {
    let mut acc = load_map(&paths[0])?;
    for p in &paths[1..] {
        acc = merge_grids(&acc, &load_map(p)?).map_err(|e| CliError::bad_input(p, e))?;
    }
    Ok(acc)
}

pub fn merge(ctx: &Context, maps: &[PathBuf], name: &str) -> Result<(), CliError> {
    let merged = merge_maps(maps)?;
    ctx.write(&format!("{name}.txt"), |w| merged.write_text(w, Some(&ctx.provenance)))?;
    let best = merged.best_cell();
    println!("best cell ({}, {}) p={:.4}", best.row, best.col, best.value);
    Ok(())
}

pub fn cost(ctx: &Context, map: &Path, robot: [f64; 2], retry: f64, name: &str) -> Result<(), CliError> {
    let map = load_map(map)?;
    let speed = ctx.cfg.time_model.nav_speed_mps;
    let costs = cost_map(&map, Point2::new(robot[0], robot[1]), retry, speed).map_err(CliError::computation)?;
    ctx.write(&format!("{name}.txt"), |w| costs.write_text(w, Some(&ctx.provenance)))?;
    let best = costs.best_cell();
    println!("cheapest cell ({}, {}) at ({:.3}, {:.3}) expected {:.2} s", best.row, best.col, best.center.x, best.center.y, best.value);
    Ok(())
}

pub fn export_pgm(ctx: &Context, map: &Path) -> Result<(), CliError> {
    let grid = load_map(map)?;
    let stem = map.file_stem().and_then(|s| s.to_str()).unwrap_or("map");
    ctx.write(&format!("{stem}.pgm"), |w| grid.write_pgm(w, Some(&ctx.provenance)))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    robot_start: Point2,
    objects: Vec<SceneObject>,
}

fn load_scene(ctx: &Context, path: Option<&Path>, separation: f64) -> Result<Scene, CliError> {
    match path {
        Some(p) => {
            let s: SceneFile = toml::from_str(&read_text(p)?).map_err(|e| CliError::bad_input(p, e))?;
            Ok(Scene { table: ctx.cfg.world.table_polygon.clone(), objects: s.objects, robot_start: s.robot_start })
        }
        None => ctx.cfg.scenario.scene(&ctx.cfg.world, separation).map_err(|e| CliError::config(e.to_string())),
    }
}

fn trace_lines(ctx: &Context, trace: &ExecutionTrace) -> impl FnOnce(&mut Vec<u8>) -> std::io::Result<()> {
    let header = serde_json::json!({ "provenance": ctx.provenance });
    let body = trace.to_json_lines();
    move |w| {
        writeln!(w, "{header}")?;
        w.write_all(body.as_bytes())
    }
}

#[derive(Serialize)]
struct PlanReport {
    duration_a: f64,
    navigations_a: usize,
    merge_flaw: Option<Flaw>,
    duration_b: Option<f64>,
    navigations_b: Option<usize>,
    unreached_goals: Vec<Flaw>,
}

pub fn plan(ctx: &Context, gsm: &Path, plan: Option<&Path>, scene: Option<&Path>, separation: f64, tolerance: f64) -> Result<(), CliError> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(CliError::config("--tolerance must be positive"));
    }
    let gsm = load_gsm(gsm)?;
    let scene = load_scene(ctx, scene, separation)?;
    let plan: PlanNode = match plan {
        Some(p) => parse_plan(&read_text(p)?).map_err(|e| CliError::bad_input(p, e))?,
        None => TwoCupScenario::plan(),
    };
    let cfg = &ctx.cfg;
    let pctx = PlanningContext { gsm: &gsm, world: &cfg.world, scene: &scene, config: &cfg.planner, time_model: &cfg.time_model, seed: ctx.seed };
    let a = resolve_designators(&plan, &pctx).map_err(CliError::computation)?;
    let opts = ProjectionOptions::default();
    let trace_a = project(&a, &pctx, &opts, &mut trial_rng(ctx.seed, 1)).map_err(CliError::computation)?;
    let stamp = format!("; {}\n", ctx.provenance.comment_line().trim_start_matches("# "));
    ctx.write("plan_a.sexp", |w| write!(w, "{stamp}{}", write_plan(&a)))?;
    ctx.write("trace_a.jsonl", trace_lines(ctx, &trace_a))?;
    let flaw = detect_merge_flaw(&a, &pctx).map_err(CliError::computation)?;
    let mut report = PlanReport {
        duration_a: plan_duration(&trace_a, &cfg.time_model),
        navigations_a: trace_a.navigations().count(),
        merge_flaw: flaw.clone(),
        duration_b: None,
        navigations_b: None,
        unreached_goals: detect_unreached_goal_flaw(&trace_a, tolerance),
    };
    if let Some(f) = &flaw {
        let b = apply_merge_transform(&a, f).map_err(CliError::computation)?;
        let trace_b = project(&b, &pctx, &opts, &mut trial_rng(ctx.seed, 1)).map_err(CliError::computation)?;
        ctx.write("plan_b.sexp", |w| write!(w, "{stamp}{}", write_plan(&b)))?;
        ctx.write("trace_b.jsonl", trace_lines(ctx, &trace_b))?;
        report.duration_b = Some(plan_duration(&trace_b, &cfg.time_model));
        report.navigations_b = Some(trace_b.navigations().count());
    }
    ctx.write_json("plan_report.json", &report)?;
    match report.duration_b {
        Some(b) => println!("merged locations: {:.1} s -> {:.1} s", report.duration_a, b),
        None => println!("no merge: {:.1} s", report.duration_a),
    }
    Ok(())
}

fn csv_artifact(ctx: &Context, name: &str, header: &[&str], rows: Vec<Vec<String>>, notes: &[String]) -> Result<PathBuf, CliError> {
    ctx.write(name, |w| {
        writeln!(w, "{}", ctx.provenance.comment_line())?;
        for n in notes {
            writeln!(w, "# {n}")?;
        }
        let mut out = csv::Writer::from_writer(&mut *w);
        out.write_record(header).map_err(std::io::Error::other)?;
        for r in rows {
            out.write_record(&r).map_err(std::io::Error::other)?;
        }
        out.flush()
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn eval_robustness(ctx: &Context, gsm: &Path) -> Result<(), CliError> {
    let gsm = load_gsm(gsm)?;
    let spec = &ctx.cfg.robustness;
    let result = robustness_experiment(spec, &gsm, &ctx.cfg.world).map_err(CliError::computation)?;
    let names = result.strategies.map(|s| serde_json::to_value(s).expect("strategy").as_str().unwrap_or_default().to_string());
    let rows = result
        .conditions
        .iter()
        .map(|c| {
            vec![
                c.sigma_obj.to_string(),
                c.sigma_rob.to_string(),
                c.trials.to_string(),
                c.successes[0].to_string(),
                c.successes[1].to_string(),
                c.ratio(0).to_string(),
                c.ratio(1).to_string(),
                c.test.statistic.to_string(),
                c.test.p_value.to_string(),
            ]
        })
        .collect();
    let notes = [
        format!("strategies={} {}", names[0], names[1]),
        format!("trials_per_cell={} n_samples={} cell_size={}", spec.trials_per_cell, spec.n_samples, spec.cell_size),
        format!("angle_sigma_per_meter={} edge_sigma_per_meter={}", spec.angle_sigma_per_meter, spec.edge_sigma_per_meter),
    ];
    let header = ["sigma_obj", "sigma_rob", "trials", "successes_a", "successes_b", "ratio_a", "ratio_b", "chi2", "p_value"];
    csv_artifact(ctx, "robustness.csv", &header, rows, &notes)?;
    for c in &result.conditions {
        println!(
            "sigma_obj={:.2} sigma_rob={:.2}  {}={:.2} {}={:.2}  p={:.4}",
            c.sigma_obj,
            c.sigma_rob,
            names[0],
            c.ratio(0),
            names[1],
            c.ratio(1),
            c.test.p_value
        );
    }
    Ok(())
}

pub fn eval_accuracy(ctx: &Context) -> Result<(), CliError> {
    let a = &ctx.cfg.accuracy;
    let object = ObjectFeatures::new(a.object[0], a.object[1]);
    let params = ctx.cfg.train.svm_params();
    let filtered = accuracy_curve(&ctx.cfg.world, &object, &a.sizes, true, &params, ctx.seed).map_err(CliError::computation)?;
    let plain = accuracy_curve(&ctx.cfg.world, &object, &a.sizes, false, &params, ctx.seed).map_err(CliError::computation)?;
    let rows = filtered
        .iter()
        .zip(&plain)
        .map(|(f, p)| vec![f.size.to_string(), p.accuracy.to_string(), p.executed.to_string(), f.accuracy.to_string(), f.executed.to_string()])
        .collect();
    let notes = [format!("object dx_obj={} dpsi_obj={} held_out=150", object.dx_obj, object.dpsi_obj)];
    let header = ["size", "accuracy_unfiltered", "executed_unfiltered", "accuracy_filtered", "executed_filtered"];
    csv_artifact(ctx, "accuracy.csv", &header, rows, &notes)?;
    for (f, p) in filtered.iter().zip(&plain) {
        println!("size={:>4}  unfiltered {:.3} ({} run)  filtered {:.3} ({} run)", f.size, p.accuracy, p.executed, f.accuracy, f.executed);
    }
    Ok(())
}

pub fn eval_transform(ctx: &Context, gsm: &Path) -> Result<(), CliError> {
    let gsm = load_gsm(gsm)?;
    let cfg = &ctx.cfg;
    let tm = if cfg.transform.calibrated { TimeModel::calibrated() } else { cfg.time_model };
    let rows = transformation_benefit(&cfg.transform.distances, &cfg.scenario, &gsm, &cfg.world, &cfg.planner, &tm, ctx.seed)
        .map_err(CliError::computation)?;
    let table = rows
        .iter()
        .map(|r| {
            vec![
                r.distance.to_string(),
                r.duration_a.to_string(),
                opt(r.duration_b),
                opt(r.merged_probability),
                opt(r.reduction()),
                opt(r.speedup()),
            ]
        })
        .collect();
    let notes = [
        format!(
            "time_model nav_speed_mps={} nav_overhead_s={} grasp_s={} perceive_s={}",
            tm.nav_speed_mps, tm.nav_overhead_s, tm.grasp_s, tm.perceive_s
        ),
        format!("threshold={} runs={}", cfg.planner.threshold, cfg.scenario.runs),
        "reduction=(a-b)/a and speedup=a/b are both reported; 48 s to 32 s is a 33% reduction, a 1.5x speedup, not 50%".to_string(),
    ];
    let header = ["distance", "duration_a", "duration_b", "merged_probability", "reduction", "speedup"];
    csv_artifact(ctx, "transform.csv", &header, table, &notes)?;
    for r in &rows {
        match (r.duration_b, r.reduction()) {
            (Some(b), Some(red)) => println!("d={:.2}  A={:.1} s  B={:.1} s  reduction {:.0}%", r.distance, r.duration_a, b, 100.0 * red),
            _ => println!("d={:.2}  A={:.1} s  no merge", r.distance, r.duration_a),
        }
    }
    Ok(())
}
