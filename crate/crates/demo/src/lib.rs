//! Browser demo: planning in random 2D worlds, one projection run, and a
//! PRIEST versus CEM comparison. Every export returns a JSON string.
//!
//! The `*_json` functions hold the logic and run natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use priest::basis::{evaluate, BasisSet, Trajectory};
use priest::projection::ProjectionWorkspace;
use priest::sim::env::{generate_env_2d, Clutter2d, Environment};
use priest::sim::p2p::{run_trial, PlanConfig, Planner};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Paths drawn per iteration for each of the sample groups.
const SHOWN: usize = 12;

pub fn world(seed: u32, n_obstacles: u32) -> priest::Result<Environment> {
    let cfg = Clutter2d {
        n_obstacles: n_obstacles as usize,
        ..Clutter2d::default()
    };
    generate_env_2d(&cfg, &mut ChaCha8Rng::seed_from_u64(seed as u64))
}

fn world_json(env: &Environment) -> Value {
    json!({
        "bounds": [env.bounds_min[0], env.bounds_min[1], env.bounds_max[0], env.bounds_max[1]],
        "start": [env.start[0], env.start[1]],
        "goal": [env.goal[0], env.goal[1]],
        "obstacles": env.bodies.iter().map(|b| [b.center[0], b.center[1], b.a]).collect::<Vec<_>>(),
    })
}

fn path(coeffs: &[f64], basis: &BasisSet) -> priest::Result<Vec<[f64; 2]>> {
    let kin = evaluate(&Trajectory::new(coeffs.to_vec(), basis)?, basis)?;
    Ok((0..kin.n_p()).map(|t| [kin.pos[(t, 0)], kin.pos[(t, 1)]]).collect())
}

fn paths(set: &[Vec<f64>], basis: &BasisSet) -> priest::Result<Vec<Vec<[f64; 2]>>> {
    set.iter().take(SHOWN).map(|c| path(c, basis)).collect()
}

fn plan_once(env: &Environment, planner: Planner, seed: u32, history: bool) -> priest::Result<Value> {
    let mut cfg = PlanConfig::default();
    cfg.sampler.record_history = history;
    let basis = cfg.basis()?;
    let (res, out) = run_trial(env, planner, &cfg, seed as u64)?;
    let iterations = res
        .history
        .iter()
        .map(|h| {
            Ok(json!({
                "mean": path(&h.means[0], &basis)?,
                "samples": paths(&h.samples, &basis)?,
                "projected": paths(&h.projected, &basis)?,
                "elites": paths(&h.elites, &basis)?,
            }))
        })
        .collect::<priest::Result<Vec<_>>>()?;
    Ok(json!({
        "planner": planner.name(),
        "path": path(res.best.coeffs(), &basis)?,
        "success": out.success,
        "residual": out.residual,
        "cost": res.best_cost,
        "smoothness": out.smoothness,
        "compute_time": out.compute_time,
        "best_costs": res.diagnostics.iter().map(|d| d.best_cost).collect::<Vec<_>>(),
        "history": iterations,
    }))
}

/// One plan in a random world, with the sampling history of every iteration.
pub fn plan_json(seed: u32, n_obstacles: u32, planner: &str) -> priest::Result<Value> {
    let env = world(seed, n_obstacles)?;
    let planner: Planner = planner.parse()?;
    Ok(json!({ "world": world_json(&env), "result": plan_once(&env, planner, seed, true)? }))
}

/// Projection of the straight start-goal line, one path and residual per sweep.
pub fn projection_json(seed: u32, n_obstacles: u32, sweeps: u32) -> priest::Result<Value> {
    let env = world(seed, n_obstacles)?;
    let cfg = PlanConfig::default();
    let problem = cfg.problem(&env)?;
    let bc = problem.boundary()?;
    let ws = ProjectionWorkspace::new(
        &problem.basis,
        problem.obstacles.len(),
        &problem.limits,
        &bc,
        &cfg.projection,
    )?;
    let xi = problem.straight_line_mean()?.coeffs().to_vec();
    let mut state = ws.init_state(&xi);
    let mut scratch = ws.scratch();
    let mut steps = vec![path(&state.xi_bar, &problem.basis)?];
    for _ in 0..sweeps {
        ws.iterate(&xi, &mut state, &problem.obstacles, &problem.limits, &mut scratch);
        steps.push(path(&state.xi_bar, &problem.basis)?);
    }
    Ok(json!({ "world": world_json(&env), "paths": steps, "residuals": state.trace }))
}

/// PRIEST and the plain CEM baseline on the same world and seed.
pub fn compare_json(seed: u32, n_obstacles: u32) -> priest::Result<Value> {
    let env = world(seed, n_obstacles)?;
    Ok(json!({
        "world": world_json(&env),
        "priest": plan_once(&env, Planner::Priest, seed, false)?,
        "cem": plan_once(&env, Planner::Cem, seed, false)?,
    }))
}

fn export(v: priest::Result<Value>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn plan(seed: u32, n_obstacles: u32, planner: &str) -> Result<String, JsError> {
    export(plan_json(seed, n_obstacles, planner))
}

#[wasm_bindgen]
pub fn projection(seed: u32, n_obstacles: u32, sweeps: u32) -> Result<String, JsError> {
    export(projection_json(seed, n_obstacles, sweeps))
}

#[wasm_bindgen]
pub fn compare(seed: u32, n_obstacles: u32) -> Result<String, JsError> {
    export(compare_json(seed, n_obstacles))
}
