use std::fs;
use std::path::Path;
use std::process::Command;

use nalgebra::DMatrix;
use priest::basis::Kinematics;
use priest::costs::primary_cost;
use priest::sim::env::{Body, Environment, PLANAR_Z_AXIS};
use priest::sim::p2p::PlanConfig;

fn priest() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_priest"));
    for (k, _) in std::env::vars() {
        if k.starts_with("PRIEST_") {
            c.env_remove(k);
        }
    }
    c
}

fn open_field() -> Environment {
    Environment::empty(
        [-1.0, -4.0, -1.0],
        [10.0, 4.0, 1.0],
        [0.0, 0.0, 0.0],
        [8.0, 1.0, 0.0],
        true,
    )
}

/// Goal enclosed by a ring of overlapping discs.
fn sealed() -> Environment {
    let mut env = open_field();
    for k in 0..16 {
        let th = std::f64::consts::TAU * k as f64 / 16.0;
        env.bodies.push(Body {
            center: [8.0 + 1.5 * th.cos(), 1.0 + 1.5 * th.sin(), 0.0],
            velocity: [0.0; 3],
            a: 0.5,
            b: PLANAR_Z_AXIS,
        });
    }
    env
}

fn write_env(dir: &Path, env: &Environment) -> std::path::PathBuf {
    let p = dir.join("world.json");
    env.save(fs::File::create(&p).unwrap()).unwrap();
    p
}

fn plan(dir: &Path, env: &Environment) -> i32 {
    let world = write_env(dir, env);
    let out = dir.join("out");
    let status = priest()
        .args(["plan", "--seed", "3", "--env"])
        .arg(&world)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    status.status.code().unwrap()
}

#[test]
fn obstacle_free_plan_exits_zero_and_csv_reproduces_the_cost() {
    let dir = tempfile::tempdir().unwrap();
    let env = open_field();
    assert_eq!(plan(dir.path(), &env), 0);

    let csv = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# priest "));
    assert_eq!(lines.next().unwrap(), "# seed 3");
    assert!(lines.next().unwrap().starts_with("# config {"));
    assert_eq!(lines.next().unwrap(), "t,x,y,z,vx,vy,vz,ax,ay,az");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();

    let cfg = PlanConfig::default();
    let problem = cfg.problem(&env).unwrap();
    assert_eq!(rows.len(), problem.basis.n_p());
    let col = |off: usize| DMatrix::from_fn(rows.len(), 3, |i, k| rows[i][off + k]);
    let kin = Kinematics {
        pos: col(1),
        vel: col(4),
        acc: col(7),
    };
    let cost = primary_cost(&kin, &problem.basis, &problem.weights, &problem.context());

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    let reported = summary["primary_cost"].as_f64().unwrap();
    assert!((cost - reported).abs() <= 1e-6, "{cost} vs {reported}");
    assert_eq!(summary["feasible"], true);
    assert_eq!(summary["header"]["seed"], 3);

    let diag = fs::read_to_string(dir.path().join("out/diagnostics.jsonl")).unwrap();
    assert!(diag.lines().next().unwrap().contains("\"header\""));
    assert!(diag.lines().count() > 1);
}

#[test]
fn sealed_goal_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(plan(dir.path(), &sealed()), 1);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["feasible"], false);
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[bench.plan.sampler]\nn_elite = 500\n").unwrap();
    let code = |args: &[&str]| priest().args(args).output().unwrap().status.code().unwrap();
    assert_eq!(code(&["plan", "--config", bad.to_str().unwrap()]), 2);
    assert_eq!(code(&["plan", "--planner", "astar"]), 2);
    assert_eq!(
        code(&["plan", "--env", dir.path().join("missing.json").to_str().unwrap()]),
        2
    );
    assert_eq!(code(&["launch"]), 2);
    assert_eq!(code(&["--help"]), 0);
}
