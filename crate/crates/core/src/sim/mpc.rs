//! Receding-horizon navigation with a simulated planar LIDAR.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{evaluate, fit_positions, BasisSet, BoundaryConstraints, StartState, Trajectory};
use crate::clock::Stopwatch;
use crate::costs::CostWeights;
use crate::error::{Error, Result};
use crate::polar::Obstacle;
use crate::sampler::{Problem, SamplerConfig};

use super::env::{Environment, PLANAR_Z_AXIS};
use super::p2p::{self, PlanConfig, Planner};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub pos: [f64; 3],
    pub vel: [f64; 3],
    pub acc: [f64; 3],
    pub time: f64,
}

impl RobotState {
    pub fn at_rest(pos: [f64; 3]) -> Self {
        Self {
            pos,
            ..Default::default()
        }
    }

    fn start_state(&self) -> StartState {
        StartState {
            pos: self.pos,
            vel: self.vel,
            acc: self.acc,
        }
    }
}

/// A planned trajectory, the basis it is expressed in, and the plan time at
/// which execution resumes.
#[derive(Debug, Clone)]
pub struct Command<'a> {
    pub traj: &'a Trajectory,
    pub basis: &'a BasisSet,
    pub start: f64,
}

impl<'a> Command<'a> {
    pub fn new(traj: &'a Trajectory, basis: &'a BasisSet) -> Self {
        Self {
            traj,
            basis,
            start: basis.t0(),
        }
    }
}

/// Advance the world by `dt` while the robot tracks the first `dt` seconds of
/// `cmd` exactly. Returns the new state and whether any of `substeps` checks
/// found the robot in collision.
pub fn step_world(
    env: &Environment,
    robot: &RobotState,
    cmd: &Command<'_>,
    dt: f64,
    substeps: usize,
) -> (Environment, RobotState, bool) {
    let t0 = cmd.start;
    let mut collided = false;
    for k in 1..=substeps.max(1) {
        let tau = dt * k as f64 / substeps.max(1) as f64;
        let [p, _, _] = cmd.traj.state_at(cmd.basis, t0 + tau);
        if env.in_collision(p, tau) {
            collided = true;
        }
    }
    let [pos, vel, acc] = cmd.traj.state_at(cmd.basis, t0 + dt);
    let next = RobotState {
        pos,
        vel,
        acc,
        time: robot.time + dt,
    };
    (env.advanced(dt), next, collided)
}

/// Range of the first hit of each of `n_rays` evenly spaced planar rays,
/// `INFINITY` where nothing lies within `max_range`. Ray `i` points at angle
/// `2 pi i / n_rays`.
pub fn lidar_ranges(origin: [f64; 3], env: &Environment, n_rays: usize, max_range: f64) -> Vec<f64> {
    (0..n_rays)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / n_rays as f64;
            let (uy, ux) = th.sin_cos();
            let mut best = f64::INFINITY;
            for b in &env.bodies {
                let fx = origin[0] - b.center[0];
                let fy = origin[1] - b.center[1];
                // |f + r u|^2 = a^2 with |u| = 1
                let half_b = fx * ux + fy * uy;
                let c = fx * fx + fy * fy - b.a * b.a;
                let disc = half_b * half_b - c;
                if disc < 0.0 {
                    continue;
                }
                let sq = disc.sqrt();
                let r = if -half_b - sq >= 0.0 {
                    -half_b - sq
                } else {
                    -half_b + sq
                };
                if r >= 0.0 && r < best {
                    best = r;
                }
            }
            if best <= max_range {
                best
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Hit points of [`lidar_ranges`].
pub fn scan_points(origin: [f64; 3], ranges: &[f64]) -> Vec<[f64; 3]> {
    let n = ranges.len();
    ranges
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite())
        .map(|(i, &r)| {
            let (uy, ux) = (std::f64::consts::TAU * i as f64 / n as f64).sin_cos();
            [origin[0] + r * ux, origin[1] + r * uy, origin[2]]
        })
        .collect()
}

/// Planar ray cast from `origin` against every body. One point per ray that
/// hits something within `max_range`.
pub fn lidar_scan(origin: [f64; 3], env: &Environment, n_rays: usize, max_range: f64) -> Vec<[f64; 3]> {
    scan_points(origin, &lidar_ranges(origin, env, n_rays, max_range))
}

/// True when `p` lies behind a LIDAR return: one of the rays nearest to its
/// bearing hit something closer than `p`.
fn occluded(origin: [f64; 3], p: [f64; 3], ranges: &[f64]) -> bool {
    let n = ranges.len() as i64;
    let (dx, dy) = (p[0] - origin[0], p[1] - origin[1]);
    let r = dx.hypot(dy);
    let k = (dy.atan2(dx).rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU * n as f64).round() as i64;
    (-1..=1).any(|o| ranges[(k + o).rem_euclid(n) as usize] < r)
}

/// Voxel-grid downsampling (one centroid per occupied voxel), then the `k`
/// centroids nearest to `origin`.
pub fn extract_obstacles(points: &[[f64; 3]], voxel: f64, k: usize, origin: [f64; 3]) -> Vec<[f64; 3]> {
    let mut cells: BTreeMap<[i64; 3], ([f64; 3], usize)> = BTreeMap::new();
    for p in points {
        let key = [0, 1, 2].map(|i| (p[i] / voxel).floor() as i64);
        let e = cells.entry(key).or_insert(([0.0; 3], 0));
        for i in 0..3 {
            e.0[i] += p[i];
        }
        e.1 += 1;
    }
    let mut cents: Vec<[f64; 3]> = cells.into_values().map(|(s, n)| s.map(|v| v / n as f64)).collect();
    let d2 = |p: &[f64; 3]| (0..3).map(|i| (p[i] - origin[i]).powi(2)).sum::<f64>();
    cents.sort_by(|a, b| d2(a).total_cmp(&d2(b)));
    cents.truncate(k);
    cents
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    /// Settings of every replan; its `horizon` is the planning horizon.
    pub plan: PlanConfig,
    pub replan_dt: f64,
    pub timeout: f64,
    pub substeps: usize,
    pub n_rays: usize,
    pub max_range: f64,
    pub voxel: f64,
    pub k_nearest: usize,
    /// Radius of the disc placed around every LIDAR point.
    pub point_radius: f64,
    pub goal_tol: f64,
    /// The planner keeps this far inside the horizontal workspace bounds.
    pub wall_margin: f64,
    /// The local goal lies at most this fraction of `v_max * horizon` ahead.
    pub lookahead: f64,
    /// Shortest horizon used when the goal is close.
    pub min_horizon: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            plan: PlanConfig {
                horizon: 5.0,
                n_p: 25,
                v_max: 1.0,
                a_max: 2.0,
                inflate: 0.1,
                weights: CostWeights::mpc(),
                sampler: SamplerConfig {
                    iterations: 4,
                    batch: 40,
                    n_proj: 30,
                    n_elite: 10,
                    ..SamplerConfig::default()
                },
                ..PlanConfig::default()
            },
            replan_dt: 0.1,
            timeout: 120.0,
            substeps: 10,
            n_rays: 360,
            max_range: 6.0,
            voxel: 0.2,
            k_nearest: 60,
            point_radius: 0.4,
            goal_tol: 0.5,
            wall_margin: 0.25,
            lookahead: 0.9,
            min_horizon: 2.0,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.replan_dt > 0.0 && self.replan_dt < self.plan.horizon) {
            return bad("replan_dt must lie in (0, horizon)");
        }
        if !(self.timeout >= 0.0) || self.n_rays == 0 || !(self.voxel > 0.0) || !(self.point_radius > 0.0) {
            return bad("timeout, n_rays, voxel and point_radius must be positive");
        }
        if !(self.wall_margin >= 0.0) {
            return bad("wall_margin must be >= 0");
        }
        if !(self.min_horizon > self.replan_dt && self.min_horizon <= self.plan.horizon) {
            return bad("min_horizon must lie in (replan_dt, horizon]");
        }
        if !(self.lookahead > 0.0 && self.lookahead <= 1.0) {
            return bad("lookahead must lie in (0, 1]");
        }
        self.plan.sampler.validate()?;
        self.plan.projection.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ending {
    Reached,
    Collision,
    Timeout,
    PlannerError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub ending: Ending,
    /// First time within `goal_tol` of the goal; `None` if never reached.
    pub travel_time: Option<f64>,
    pub compute_times: Vec<f64>,
    pub collision: bool,
    pub final_goal_distance: f64,
    pub max_acceleration: f64,
    pub log: Vec<RobotState>,
    /// Local goal used by each replan.
    pub local_goals: Vec<[f64; 3]>,
    /// Worst violation of each executed plan against what was perceived.
    pub plan_violations: Vec<f64>,
    pub error: Option<String>,
}

/// Shortest time to cover `distance` from rest with speed and acceleration
/// limits, arriving at any speed.
pub fn kinematic_lower_bound(distance: f64, v_max: f64, a_max: f64) -> f64 {
    let d = distance.max(0.0);
    let ramp = v_max * v_max / (2.0 * a_max);
    if d <= ramp {
        (2.0 * d / a_max).sqrt()
    } else {
        v_max / a_max + (d - ramp) / v_max
    }
}

/// Kinematic lower bound on the travel time of an episode in `env`.
pub fn episode_lower_bound(env: &Environment, cfg: &MpcConfig) -> f64 {
    kinematic_lower_bound(dist(env.start, env.goal) - cfg.goal_tol, cfg.plan.v_max, cfg.plan.a_max)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

/// Free local goal: the furthest point toward `goal` (within the lookahead)
/// that clears every perceived point and is not hidden behind a LIDAR return,
/// trying lateral shifts before backing off.
fn local_goal(
    robot: &RobotState,
    goal: [f64; 3],
    points: &[[f64; 3]],
    ranges: &[f64],
    env: &Environment,
    cfg: &MpcConfig,
) -> [f64; 3] {
    let d = dist(robot.pos, goal);
    let reach = cfg.lookahead * cfg.plan.v_max * cfg.plan.horizon;
    if d <= 1e-9 {
        return goal;
    }
    let dir = [0, 1, 2].map(|i| (goal[i] - robot.pos[i]) / d);
    let normal = [-dir[1], dir[0], 0.0];
    let margin = cfg.point_radius + 0.1;
    let free = |p: [f64; 3]| {
        (0..2).all(|i| {
            p[i] >= env.bounds_min[i] + cfg.wall_margin + 0.1 && p[i] <= env.bounds_max[i] - cfg.wall_margin - 0.1
        }) && points.iter().all(|q| dist(p, *q) >= margin)
            && !occluded(robot.pos, p, ranges)
    };
    let ahead = d.min(reach);
    for frac in [1.0, 0.75, 0.5, 0.3, 0.15] {
        let base = [0, 1, 2].map(|i| robot.pos[i] + dir[i] * ahead * frac);
        for k in 0..=8 {
            for sign in [1.0, -1.0] {
                let off = sign * 0.2 * k as f64;
                let p = [0, 1, 2].map(|i| base[i] + normal[i] * off);
                if free(p) {
                    return p;
                }
                if k == 0 {
                    break;
                }
            }
        }
    }
    robot.pos
}

/// Previous plan continued by `shift` seconds and refit to the new boundary
/// conditions. Times past the old horizon hold the final position.
fn warm_start(prev: &Trajectory, prev_basis: &BasisSet, shift: f64, problem: &Problem) -> Result<Trajectory> {
    let basis = &problem.basis;
    let mut targets = DMatrix::zeros(basis.n_p(), 3);
    for (row, &t) in basis.t_grid().iter().enumerate() {
        let tt = (t - basis.t0() + prev_basis.t0() + shift).min(prev_basis.tf());
        let [p, _, _] = prev.state_at(prev_basis, tt);
        for k in 0..3 {
            targets[(row, k)] = p[k];
        }
    }
    let bc = BoundaryConstraints::new(basis, &problem.start, problem.goal)?;
    fit_positions(basis, &bc, &targets)
}

/// True when the part of `traj` after plan time `from` keeps `radius` away
/// from every perceived point.
fn clear_ahead(traj: &Trajectory, basis: &BasisSet, from: f64, points: &[[f64; 3]], radius: f64) -> bool {
    basis.t_grid().iter().filter(|&&t| t >= from).all(|&t| {
        let [p, _, _] = traj.state_at(basis, t);
        points.iter().all(|q| dist(p, *q) >= radius)
    })
}

/// Worst violation of `traj` against the perceived obstacles and limits.
fn perceived_violation(traj: &Trajectory, problem: &Problem) -> Result<f64> {
    let kin = evaluate(traj, &problem.basis)?;
    Ok(p2p::violations(&kin, &problem.obstacles, &problem.limits).max())
}

struct Recorder {
    log: Vec<RobotState>,
    compute_times: Vec<f64>,
    local_goals: Vec<[f64; 3]>,
    plan_violations: Vec<f64>,
    max_acc: f64,
}

impl Recorder {
    fn finish(self, robot: &RobotState, goal: [f64; 3], ending: Ending, error: Option<String>) -> EpisodeResult {
        let success = ending == Ending::Reached;
        EpisodeResult {
            success,
            ending,
            travel_time: success.then_some(robot.time),
            compute_times: self.compute_times,
            collision: ending == Ending::Collision,
            final_goal_distance: dist(robot.pos, goal),
            max_acceleration: self.max_acc,
            log: self.log,
            local_goals: self.local_goals,
            plan_violations: self.plan_violations,
            error,
        }
    }
}

/// Drive from `env.start` toward `env.goal`, replanning every `replan_dt`.
pub fn run_mpc_episode(env: &Environment, planner: Planner, cfg: &MpcConfig, seed: u64) -> Result<EpisodeResult> {
    cfg.validate()?;
    if !env.planar {
        return Err(Error::InvalidConfig(
            "receding-horizon episodes need a planar world".into(),
        ));
    }
    let mut world = env.clone();
    let mut robot = RobotState::at_rest(env.start);
    let mut rec = Recorder {
        log: vec![robot],
        compute_times: Vec::new(),
        local_goals: Vec::new(),
        plan_violations: Vec::new(),
        max_acc: 0.0,
    };
    // (basis, executed plan, sampler mean, time already executed)
    let mut prev: Option<(BasisSet, Trajectory, Option<Trajectory>, f64)> = None;
    // once the final goal is within the shortest horizon, the plan reaching it is followed to the end
    let mut committed: Option<(BasisSet, Trajectory, f64)> = None;
    let mut limits = env.limits(cfg.plan.v_max, cfg.plan.a_max);
    for i in 0..2 {
        limits.s_min[i] += cfg.wall_margin;
        limits.s_max[i] -= cfg.wall_margin;
    }
    let reach = cfg.lookahead * cfg.plan.v_max * cfg.plan.horizon;
    for step in 0u64.. {
        if dist(robot.pos, env.goal) <= cfg.goal_tol {
            return Ok(rec.finish(&robot, env.goal, Ending::Reached, None));
        }
        if robot.time >= cfg.timeout - 1e-9 {
            return Ok(rec.finish(&robot, env.goal, Ending::Timeout, None));
        }

        let clock = Stopwatch::start();
        let ranges = lidar_ranges(robot.pos, &world, cfg.n_rays, cfg.max_range);
        let points = extract_obstacles(&scan_points(robot.pos, &ranges), cfg.voxel, cfg.k_nearest, robot.pos);

        if let Some((cb, ct, offset)) = committed.take() {
            if offset + cfg.replan_dt <= cb.tf() + 1e-9 && clear_ahead(&ct, &cb, offset, &points, cfg.point_radius) {
                rec.compute_times.push(clock.elapsed_secs());
                rec.local_goals.push(env.goal);
                rec.plan_violations.push(0.0);
                let cmd = Command {
                    traj: &ct,
                    basis: &cb,
                    start: offset,
                };
                let (next_world, next_robot, collided) = step_world(&world, &robot, &cmd, cfg.replan_dt, cfg.substeps);
                world = next_world;
                robot = next_robot;
                rec.max_acc = rec.max_acc.max(dist(robot.acc, [0.0; 3]));
                rec.log.push(robot);
                if collided {
                    return Ok(rec.finish(&robot, env.goal, Ending::Collision, None));
                }
                prev = Some((cb.clone(), ct.clone(), None, offset + cfg.replan_dt - cb.t0()));
                committed = Some((cb, ct, offset + cfg.replan_dt));
                continue;
            }
        }

        let goal = local_goal(&robot, env.goal, &points, &ranges, &world, cfg);
        rec.local_goals.push(goal);
        // a goal inside the lookahead is approached on a proportionally shorter horizon
        let horizon = (cfg.plan.horizon * dist(robot.pos, goal) / reach).clamp(cfg.min_horizon, cfg.plan.horizon);
        let basis = BasisSet::with_kind(cfg.plan.basis, cfg.plan.n_p, cfg.plan.degree, 0.0, horizon)?;
        let obstacles = points
            .iter()
            .map(|&c| Obstacle::fixed(c, cfg.point_radius, PLANAR_Z_AXIS, basis.n_p()))
            .collect::<Result<Vec<_>>>()?;
        let mut problem = Problem {
            basis: basis.clone(),
            start: robot.start_state(),
            goal,
            obstacles,
            limits,
            weights: cfg.plan.weights,
            planar: true,
            initial_mean: None,
        };
        let (fallback, warm) = match &prev {
            Some((pb, plan, mean, done)) => (
                warm_start(plan, pb, *done, &problem).ok(),
                mean.as_ref().and_then(|m| warm_start(m, pb, *done, &problem).ok()),
            ),
            None => (None, None),
        };
        problem.initial_mean = warm.map(Trajectory::into_coeffs);
        let result = match p2p::optimize(
            &problem,
            planner,
            &cfg.plan,
            seed.wrapping_mul(1_000_003).wrapping_add(step),
        ) {
            Ok(r) => r,
            Err(e) => {
                rec.compute_times.push(clock.elapsed_secs());
                return Ok(rec.finish(&robot, env.goal, Ending::PlannerError, Some(e.to_string())));
            }
        };
        let mean = result
            .final_states
            .get(result.best_dist)
            .map(|s| Trajectory::from_raw(s.mean.as_slice().to_vec()));
        // keep the continuation of the last plan when it is safer
        let mut chosen = result.best;
        let mut viol = perceived_violation(&chosen, &problem)?;
        if let Some(f) = fallback {
            let vf = perceived_violation(&f, &problem)?;
            if vf + 1e-9 < viol {
                chosen = f;
                viol = vf;
            }
        }
        rec.plan_violations.push(viol);
        rec.compute_times.push(clock.elapsed_secs());

        let cmd = Command::new(&chosen, &basis);
        let (next_world, next_robot, collided) = step_world(&world, &robot, &cmd, cfg.replan_dt, cfg.substeps);
        world = next_world;
        robot = next_robot;
        rec.max_acc = rec.max_acc.max(dist(robot.acc, [0.0; 3]));
        rec.log.push(robot);
        if goal == env.goal && horizon <= cfg.min_horizon && viol <= cfg.plan.success_tol {
            committed = Some((basis.clone(), chosen.clone(), basis.t0() + cfg.replan_dt));
        }
        prev = Some((basis, chosen, mean, cfg.replan_dt));
        if collided {
            return Ok(rec.finish(&robot, env.goal, Ending::Collision, None));
        }
    }
    unreachable!()
}
