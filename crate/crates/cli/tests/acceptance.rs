//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion on stderr
//! (written directly, so the lines show even when libtest captures output).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use arplace::arplace::{apply_robot_uncertainty, compute_map, merge, ArplaceGrid, Frame, GaussianBelief, GridGeometry, PoseSampler};
use arplace::evalharness::{accuracy_curve, chi_square, default_distances, robustness_experiment, transformation_benefit, SweepSpec, TwoCupScenario};
use arplace::pipeline::{train, TrainConfig};
use arplace::planner::{PlannerConfig, TimeModel};
use arplace::shapemodel::GsmModel;
use arplace::simworld::{default_object_grid, generate_dataset, trial_rng, WorldConfig};
use arplace::{ObjectFeatures, Point2, RobotOffset};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn say(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn cli(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_arplace")).current_dir(dir).args(args).output().expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn stamped_body(path: &Path) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["body"].clone()
}

fn trained() -> (WorldConfig, GsmModel<f64>, f64) {
    let world = WorldConfig::default();
    let ds = generate_dataset(&world, &default_object_grid(), &world.robot_grid(11, 17), 0, true).unwrap();
    let out = train(&ds, &TrainConfig::default()).unwrap();
    (world, out.gsm, out.report.r_squared[0])
}

fn pipeline_completeness() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("belief.toml"), "mean = [0.15, 0.0, 2.15]\nvariances = [0.0025, 0.0025, 0.01]\n").unwrap();
    let t = Instant::now();
    cli(d, &["--out", ".", "gen-data"]);
    cli(d, &["--out", ".", "train", "--data", "dataset.csv"]);
    cli(d, &["--out", ".", "map", "--gsm", "gsm.json", "--belief", "belief.toml"]);
    let secs = t.elapsed().as_secs_f64();
    let rows = fs::read_to_string(d.join("dataset.csv")).unwrap().lines().filter(|l| !l.starts_with('#')).count() - 1;
    let d_modes = stamped_body(&d.join("gsm.json"))["d"].as_u64().unwrap();
    let energy = stamped_body(&d.join("train_report.json"))["energy"].as_f64().unwrap();
    let pass = rows == 16 * 187 && secs < 300.0 && d_modes == 2 && energy >= 0.95 && d.join("map.txt").exists();
    outcome(pass, format!("{rows} trials, {secs:.1} s (< 300), d={d_modes}, energy={energy:.4} (>= 0.95)"))
}

fn classifier_accuracy(world: &WorldConfig) -> Outcome {
    let params = TrainConfig::default().svm_params();
    let sizes = [10, 25, 50, 100, 150, 200, 300, 400];
    let (mut worst_acc, mut worst_gap) = (1.0f64, 0.0f64);
    let (mut run_f, mut run_u) = (0usize, 0usize);
    for o in default_object_grid() {
        let f = accuracy_curve(world, &o, &sizes, true, &params, 0).unwrap();
        let u = accuracy_curve(world, &o, &sizes, false, &params, 0).unwrap();
        let (fl, ul) = (f.last().unwrap(), u.last().unwrap());
        worst_acc = worst_acc.min(ul.accuracy).min(fl.accuracy);
        worst_gap = worst_gap.max((fl.accuracy - ul.accuracy).abs());
        run_f += fl.executed;
        run_u += ul.executed;
    }
    let cut = 1.0 - run_f as f64 / run_u as f64;
    let pass = worst_acc >= 0.90 && cut >= 0.5 && worst_gap <= 0.02;
    outcome(
        pass,
        format!("16 poses: min held-out accuracy {worst_acc:.3} (>= 0.90), executed {run_f}/{run_u} = {:.0}% cut (>= 50%), max plateau gap {worst_gap:.3} (<= 0.02)", 100.0 * cut),
    )
}

fn regression_fit(r2: f64) -> Outcome {
    outcome(r2 >= 0.9, format!("R^2 of mode 1 = {r2:.4} (>= 0.9)"))
}

/// Per-cell success frequency over `n` belief draws, checked with the model's own
/// point predicate rather than the rasterizer.
fn point_oracle(gsm: &GsmModel<f64>, belief: &GaussianBelief<f64>, g: &GridGeometry<f64>, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = trial_rng(seed, 99);
    let mut hits = vec![0u32; g.len()];
    for _ in 0..n {
        let s = belief.draw(&mut rng);
        let f = ObjectFeatures::new(s[0], s[2]);
        for (k, h) in hits.iter_mut().enumerate() {
            let c = g.center_of(k);
            *h += u32::from(gsm.predict_success(&RobotOffset::new(c.x, c.y - s[1]), &f));
        }
    }
    hits.iter().map(|&h| h as f64 / n as f64).collect()
}

fn map_accuracy(world: &WorldConfig, gsm: &GsmModel<f64>) -> Outcome {
    let b = world.robot_bounds;
    let g = GridGeometry::covering(b.dx_min, b.dx_max, b.dy_min, b.dy_max, 0.025, Frame::Gsm).unwrap();
    let belief = GaussianBelief::diagonal(vec![0.15, 0.0, 2.15], &[0.05f64.powi(2), 0.05f64.powi(2), 0.1f64.powi(2)]).unwrap();

    let t = Instant::now();
    let fast = compute_map(gsm, &belief, &g, 100, &mut trial_rng(1, 0)).unwrap();
    let fast = apply_robot_uncertainty(&fast, [[0.0025, 0.0], [0.0, 0.0025]]).unwrap();
    let secs = t.elapsed().as_secs_f64();

    let raw = compute_map(gsm, &belief, &g, 100, &mut trial_rng(1, 0)).unwrap();
    let oracle = point_oracle(gsm, &belief, &g, 10_000, 2);
    let within = raw.probs.iter().zip(&oracle).filter(|(a, b)| (*a - *b).abs() <= 0.1).count();
    let frac = within as f64 / g.len() as f64;

    let sharp = GaussianBelief::diagonal(vec![0.15, 0.0, 2.15], &[0.0; 3]).unwrap();
    let exact = compute_map(gsm, &sharp, &g, 100, &mut trial_rng(3, 0)).unwrap();
    let f = ObjectFeatures::new(0.15, 2.15);
    let mismatches = (0..g.len())
        .filter(|&k| {
            let c = g.center_of(k);
            exact.probs[k] != if gsm.predict_success(&RobotOffset::new(c.x, c.y), &f) { 1.0 } else { 0.0 }
        })
        .count();
    let pass = frac >= 0.95 && mismatches == 0 && secs <= 2.0 && fast.max() > 0.0;
    outcome(
        pass,
        format!("{:.1}% of {} cells within 0.1 of the 10k oracle (>= 95%), zero-covariance mismatches {mismatches}, {secs:.3} s per map (<= 2)", 100.0 * frac, g.len()),
    )
}

fn map_algebra() -> Outcome {
    let g = GridGeometry::new(Point2::new(0.2, -0.8), 0.025, 17, 23, Frame::Gsm).unwrap();
    let mut rng = trial_rng(5, 0);
    let mut random = || ArplaceGrid::from_probs(g, (0..g.len()).map(|_| rng.random::<f64>()).collect()).unwrap();
    let dist = |a: &ArplaceGrid<f64>, b: &ArplaceGrid<f64>| a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let one = ArplaceGrid::filled(g, 1.0);
    let mut worst = 0.0f64;
    let mut identity_ok = true;
    for _ in 0..50 {
        let (a, b, c) = (random(), random(), random());
        worst = worst.max(dist(&merge(&a, &b).unwrap(), &merge(&b, &a).unwrap()));
        worst = worst.max(dist(&merge(&merge(&a, &b).unwrap(), &c).unwrap(), &merge(&a, &merge(&b, &c).unwrap()).unwrap()));
        worst = worst.max(dist(&merge(&a, &one).unwrap(), &a));
        identity_ok &= apply_robot_uncertainty(&a, [[0.0; 2]; 2]).unwrap() == a;
    }
    let uniform = ArplaceGrid::filled(g, 0.37);
    let kept = apply_robot_uncertainty(&uniform, [[0.0025, 0.001], [0.001, 0.0016]]).unwrap() == uniform;
    let pass = worst <= 1e-12 && identity_ok && kept;
    outcome(pass, format!("merge laws max error {worst:.1e} (<= 1e-12), zero-covariance identity {identity_ok}, uniform map kept exactly {kept}"))
}

fn robustness(world: &WorldConfig, gsm: &GsmModel<f64>) -> Outcome {
    let spec = SweepSpec::default();
    let t = Instant::now();
    let r = robustness_experiment(&spec, gsm, world).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let mut parts = Vec::new();
    let mut pass = secs < 600.0;
    for so in [0.05, 0.10] {
        let c = r.condition(so, 0.05).unwrap();
        let ok = c.successes[0] > c.successes[1] && c.test.p_value < 0.05;
        pass &= ok;
        parts.push(format!("sigma_obj={so:.2}: {}/{} vs {}/{} p={:.4}", c.successes[0], c.trials, c.successes[1], c.trials, c.test.p_value));
    }
    let c0 = r.condition(0.0, 0.0).unwrap();
    pass &= c0.ratio(0) >= 0.95 && c0.ratio(1) >= 0.95;
    parts.push(format!("sigma=0: {:.2}/{:.2} (>= 0.95)", c0.ratio(0), c0.ratio(1)));
    parts.push(format!("{} conditions in {secs:.1} s (< 600)", r.conditions.len()));
    outcome(pass, parts.join("; "))
}

fn merge_transform(world: &WorldConfig, gsm: &GsmModel<f64>) -> Outcome {
    let rows = transformation_benefit(
        &default_distances(),
        &TwoCupScenario::default(),
        gsm,
        world,
        &PlannerConfig::default(),
        &TimeModel::calibrated(),
        0,
    )
    .unwrap();
    let mut pass = true;
    let mut fired = Vec::new();
    for r in &rows {
        if r.distance <= 0.45 + 1e-9 {
            let ok = r.merged_probability.is_some_and(|p| p > 0.85) && r.reduction().is_some_and(|x| x >= 0.30);
            pass &= ok;
        } else {
            pass &= r.duration_b.is_none();
        }
        if r.duration_b.is_some() {
            fired.push(format!("{:.2}", r.distance));
        }
    }
    let first = &rows[0];
    let (a, b) = (first.duration_a, first.duration_b.unwrap_or(f64::NAN));
    pass &= (a - 48.0).abs() <= 4.8 && (b - 32.0).abs() <= 3.2;
    let min_red = rows.iter().filter_map(|r| r.reduction()).fold(f64::INFINITY, f64::min);
    outcome(
        pass,
        format!("merged at [{}], min reduction {:.0}% (>= 30%), 0.20 m: A={a:.1} s (48 +-10%), B={b:.1} s (32 +-10%)", fired.join(" "), 100.0 * min_red),
    )
}

fn chi_square_oracle() -> Outcome {
    let frozen = [
        ((90, 100, 60, 100), 24.0, 9.63357008643095e-07),
        ((30, 40, 10, 40), 20.0, 7.744216431044088e-06),
        ((97, 100, 71, 100), 25.148809523809526, 5.307240605861442e-07),
        ((12, 50, 25, 60), 3.813279032457114, 0.050847815262552006),
        ((5, 20, 15, 25), 5.512500000000001, 0.01888104015609883),
    ];
    let mut worst = 0.0f64;
    for ((sa, na, sb, nb), stat, p) in frozen {
        let t = chi_square(sa, na, sb, nb).unwrap();
        worst = worst.max((t.statistic - stat).abs()).max((t.p_value - p).abs());
    }
    let degenerate = [(50, 100, 50, 100), (0, 30, 0, 40), (30, 30, 40, 40)].iter().all(|&(a, b, c, d)| chi_square(a, b, c, d).unwrap().p_value == 1.0);
    outcome(worst <= 1e-6 && degenerate, format!("5 frozen tables max error {worst:.1e} (<= 1e-6), degenerate tables p=1 {degenerate}"))
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn reproducibility() -> Outcome {
    let config = "[robustness]\nsigma_obj_values = [0.0, 0.1]\nsigma_rob_values = [0.05]\ntrials_per_cell = 10\n\n\
                  [accuracy]\nsizes = [20, 80]\n\n[transform]\ndistances = [0.2, 0.6]\n\n[scenario]\nruns = 2\n";
    let belief = "mean = [0.15, 0.0, 2.15]\nvariances = [0.0025, 0.0025, 0.01]\n";
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let d = dir.path();
            fs::write(d.join("cfg.toml"), config).unwrap();
            fs::write(d.join("belief.toml"), belief).unwrap();
            let base = ["--config", "cfg.toml", "--seed", "11", "--out", "out"];
            let steps: [&[&str]; 10] = [
                &["gen-data"],
                &["train", "--data", "out/dataset.csv"],
                &["map", "--gsm", "out/gsm.json", "--belief", "belief.toml"],
                &["merge", "out/map.txt", "out/map.txt"],
                &["cost", "--map", "out/merged.txt", "--robot", "1.0", "-0.4"],
                &["export-pgm", "--map", "out/merged.txt"],
                &["plan", "--gsm", "out/gsm.json"],
                &["eval", "robustness", "--gsm", "out/gsm.json"],
                &["eval", "accuracy"],
                &["eval", "transform", "--gsm", "out/gsm.json"],
            ];
            for s in steps {
                let args: Vec<&str> = base.iter().chain(s.iter()).copied().collect();
                cli(d, &args);
            }
            let tree = read_tree(&d.join("out"));
            (dir, tree)
        })
        .collect();
    let (a, b) = (&runs[0].1, &runs[1].1);
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let pass = a.len() >= 15 && a.keys().eq(b.keys()) && differing.is_empty();
    outcome(pass, format!("{} artifacts from 10 commands, {} differ between runs", a.len(), differing.len()))
}

#[test]
fn acceptance_criteria() {
    let started = Instant::now();
    let (world, gsm, r2) = trained();
    type Check<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);
    let checks: Vec<Check> = vec![
        ("pipeline completeness", Box::new(pipeline_completeness)),
        ("classifier accuracy and filtering", Box::new(|| classifier_accuracy(&world))),
        ("shape regression fit", Box::new(move || regression_fit(r2))),
        ("place map accuracy and speed", Box::new(|| map_accuracy(&world, &gsm))),
        ("map algebra", Box::new(map_algebra)),
        ("robustness against fixed offset", Box::new(|| robustness(&world, &gsm))),
        ("location merge transform", Box::new(|| merge_transform(&world, &gsm))),
        ("chi-square oracle", Box::new(chi_square_oracle)),
        ("CLI reproducibility", Box::new(reproducibility)),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        say(&format!("[{verdict}] {}. {name}: {} [{:.1} s]", k + 1, o.detail, t.elapsed().as_secs_f64()));
        if !o.pass {
            failed.push(k + 1);
        }
    }
    say(&format!("acceptance: {}/{} criteria pass in {:.1} s", checks.len() - failed.len(), checks.len(), started.elapsed().as_secs_f64()));
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
