//! Benchmark worlds: random 2D clutter, random 3D rooms, a corridor with
//! oncoming obstacles and a single large blocking obstacle.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::polar::{Limits, Obstacle};

/// Semi-axis used along z for obstacles of planar worlds.
pub const PLANAR_Z_AXIS: f64 = 10.0;
/// Half-height of the workspace box of planar worlds.
pub const PLANAR_Z_HALF: f64 = 1.0;

/// One physical obstacle: an axis-aligned ellipsoid moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub center: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    pub a: f64,
    pub b: f64,
}

impl Body {
    pub fn center_at(&self, t: f64) -> [f64; 3] {
        std::array::from_fn(|k| self.center[k] + self.velocity[k] * t)
    }

    /// Membership value at time `t`; positive strictly inside.
    pub fn inside_value(&self, p: [f64; 3], t: f64) -> f64 {
        let c = self.center_at(t);
        let dx = p[0] - c[0];
        let dy = p[1] - c[1];
        let dz = p[2] - c[2];
        1.0 - (dx * dx + dy * dy) / (self.a * self.a) - dz * dz / (self.b * self.b)
    }

    /// Distance from `p` to the surface, measured in the horizontal plane
    /// for planar bodies and in 3D otherwise. Negative inside.
    pub fn surface_distance(&self, p: [f64; 3], t: f64, planar: bool) -> f64 {
        let c = self.center_at(t);
        let mut d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
        if !planar {
            d2 += (p[2] - c[2]).powi(2);
        }
        d2.sqrt() - self.a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub bodies: Vec<Body>,
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
    pub start: [f64; 3],
    pub goal: [f64; 3],
    pub dynamic: bool,
    pub planar: bool,
}

impl Environment {
    pub fn empty(bounds_min: [f64; 3], bounds_max: [f64; 3], start: [f64; 3], goal: [f64; 3], planar: bool) -> Self {
        Self {
            bodies: Vec::new(),
            bounds_min,
            bounds_max,
            start,
            goal,
            dynamic: false,
            planar,
        }
    }

    /// Smallest surface distance from `p` to any body at time `t`.
    pub fn clearance(&self, p: [f64; 3], t: f64) -> f64 {
        self.bodies
            .iter()
            .map(|b| b.surface_distance(p, t, self.planar))
            .fold(f64::INFINITY, f64::min)
    }

    /// Inside some body, or outside the workspace box.
    pub fn in_collision(&self, p: [f64; 3], t: f64) -> bool {
        let outside = (0..3).any(|k| p[k] < self.bounds_min[k] || p[k] > self.bounds_max[k]);
        outside || self.bodies.iter().any(|b| b.inside_value(p, t) > 0.0)
    }

    /// Bodies as planner obstacles on the grid of `basis`, with the grid
    /// times offset by `t_now` and each semi-axis grown by `inflate`.
    pub fn obstacles(&self, basis: &BasisSet, t_now: f64, inflate: f64) -> Result<Vec<Obstacle>> {
        let times: Vec<f64> = basis.t_grid().iter().map(|t| t + t_now).collect();
        self.bodies
            .iter()
            .map(|b| {
                Obstacle::new(
                    times.iter().map(|&t| b.center_at(t)).collect(),
                    b.a + inflate,
                    b.b + inflate,
                )
            })
            .collect()
    }

    /// Copy with every body advanced by `dt`.
    pub fn advanced(&self, dt: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.bodies {
            b.center = b.center_at(dt);
        }
        out
    }

    pub fn limits(&self, v_max: f64, a_max: f64) -> Limits {
        Limits {
            v_max,
            a_max,
            s_min: self.bounds_min,
            s_max: self.bounds_max,
        }
    }

    pub fn save<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn load<R: std::io::Read>(r: R) -> Result<Self> {
        let env: Self = serde_json::from_reader(r)?;
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if !(self.bounds_min[k] <= self.bounds_max[k]) {
                return Err(Error::InvalidConfig(format!("empty workspace along axis {k}")));
            }
        }
        for (i, b) in self.bodies.iter().enumerate() {
            if !(b.a > 0.0 && b.b > 0.0) || b.center.iter().chain(&b.velocity).any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("body {i} is malformed")));
            }
        }
        Ok(())
    }
}

/// Random circular obstacles in a rectangle, motion in the `z = 0` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Clutter2d {
    pub width: f64,
    pub height: f64,
    pub n_obstacles: usize,
    pub radius: f64,
    /// Minimum center distance from start and goal.
    pub clearance: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub max_attempts: usize,
}

impl Default for Clutter2d {
    fn default() -> Self {
        Self {
            width: 16.0,
            height: 10.0,
            n_obstacles: 50,
            radius: 0.4,
            clearance: 0.8,
            start: [1.0, 5.0],
            goal: [15.0, 5.0],
            max_attempts: 100_000,
        }
    }
}

/// Random spheres in a box-shaped room.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Clutter3d {
    pub size: [f64; 3],
    pub n_obstacles: usize,
    pub radius: f64,
    pub clearance: f64,
    pub start: [f64; 3],
    pub goal: [f64; 3],
    pub max_attempts: usize,
}

impl Default for Clutter3d {
    fn default() -> Self {
        Self {
            size: [7.0, 7.0, 3.0],
            n_obstacles: 25,
            radius: 0.68,
            clearance: 1.08,
            start: [0.5, 0.5, 1.0],
            goal: [6.5, 6.5, 2.0],
            max_attempts: 100_000,
        }
    }
}

/// Straight corridor along x with obstacles drifting toward the start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Corridor {
    pub length: f64,
    pub half_width: f64,
    pub n_obstacles: usize,
    pub radius: f64,
    pub speed: f64,
    pub clearance: f64,
    pub start_x: f64,
    pub goal_x: f64,
    /// Obstacles are spawned with x in this range.
    pub spawn_x: [f64; 2],
    pub max_attempts: usize,
}

impl Default for Corridor {
    fn default() -> Self {
        Self {
            length: 14.0,
            half_width: 1.5,
            n_obstacles: 10,
            radius: 0.3,
            speed: 0.1,
            clearance: 0.8,
            start_x: 1.0,
            goal_x: 11.0,
            spawn_x: [3.0, 13.0],
            max_attempts: 100_000,
        }
    }
}

/// A single large disc sitting on the start-goal line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BigObstacle {
    pub radius: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub bounds_min: [f64; 2],
    pub bounds_max: [f64; 2],
    /// Random lateral displacement of the obstacle center, uniform in
    /// `[-jitter, jitter]`.
    pub jitter: f64,
}

impl Default for BigObstacle {
    fn default() -> Self {
        Self {
            radius: 7.0,
            start: [1.0, 7.0],
            goal: [20.0, 13.0],
            bounds_min: [-1.0, -3.0],
            bounds_max: [22.0, 23.0],
            jitter: 0.5,
        }
    }
}

fn place<F: FnMut(&mut ChaCha8Rng) -> [f64; 3]>(
    rng: &mut ChaCha8Rng,
    count: usize,
    max_attempts: usize,
    keep_out: &[[f64; 3]],
    clearance: f64,
    planar: bool,
    mut draw: F,
) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::RejectionBudget { attempts: max_attempts });
        }
        let c = draw(rng);
        let ok = keep_out.iter().all(|p| {
            let mut d2 = (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2);
            if !planar {
                d2 += (c[2] - p[2]).powi(2);
            }
            d2.sqrt() >= clearance
        });
        if ok {
            out.push(c);
        }
    }
    Ok(out)
}

pub fn generate_env_2d(cfg: &Clutter2d, rng: &mut ChaCha8Rng) -> Result<Environment> {
    let start = [cfg.start[0], cfg.start[1], 0.0];
    let goal = [cfg.goal[0], cfg.goal[1], 0.0];
    let (w, h) = (cfg.width, cfg.height);
    let centers = place(
        rng,
        cfg.n_obstacles,
        cfg.max_attempts,
        &[start, goal],
        cfg.clearance,
        true,
        |r| [r.random_range(0.0..w), r.random_range(0.0..h), 0.0],
    )?;
    Ok(Environment {
        bodies: centers
            .into_iter()
            .map(|c| Body {
                center: c,
                velocity: [0.0; 3],
                a: cfg.radius,
                b: PLANAR_Z_AXIS,
            })
            .collect(),
        bounds_min: [0.0, 0.0, -PLANAR_Z_HALF],
        bounds_max: [w, h, PLANAR_Z_HALF],
        start,
        goal,
        dynamic: false,
        planar: true,
    })
}

pub fn generate_env_3d(cfg: &Clutter3d, rng: &mut ChaCha8Rng) -> Result<Environment> {
    let s = cfg.size;
    let centers = place(
        rng,
        cfg.n_obstacles,
        cfg.max_attempts,
        &[cfg.start, cfg.goal],
        cfg.clearance,
        false,
        |r| {
            [
                r.random_range(0.0..s[0]),
                r.random_range(0.0..s[1]),
                r.random_range(0.0..s[2]),
            ]
        },
    )?;
    Ok(Environment {
        bodies: centers
            .into_iter()
            .map(|c| Body {
                center: c,
                velocity: [0.0; 3],
                a: cfg.radius,
                b: cfg.radius,
            })
            .collect(),
        bounds_min: [0.0; 3],
        bounds_max: s,
        start: cfg.start,
        goal: cfg.goal,
        dynamic: false,
        planar: false,
    })
}

pub fn generate_env_dynamic(cfg: &Corridor, rng: &mut ChaCha8Rng) -> Result<Environment> {
    let start = [cfg.start_x, 0.0, 0.0];
    let goal = [cfg.goal_x, 0.0, 0.0];
    let y = cfg.half_width - cfg.radius;
    let (x0, x1) = (cfg.spawn_x[0], cfg.spawn_x[1]);
    let centers = place(
        rng,
        cfg.n_obstacles,
        cfg.max_attempts,
        &[start, goal],
        cfg.clearance,
        true,
        |r| [r.random_range(x0..x1), r.random_range(-y..y), 0.0],
    )?;
    Ok(Environment {
        bodies: centers
            .into_iter()
            .map(|c| Body {
                center: c,
                velocity: [-cfg.speed, 0.0, 0.0],
                a: cfg.radius,
                b: PLANAR_Z_AXIS,
            })
            .collect(),
        bounds_min: [0.0, -cfg.half_width, -PLANAR_Z_HALF],
        bounds_max: [cfg.length, cfg.half_width, PLANAR_Z_HALF],
        start,
        goal,
        dynamic: true,
        planar: true,
    })
}

pub fn generate_env_big_obstacle(cfg: &BigObstacle, rng: &mut ChaCha8Rng) -> Result<Environment> {
    let mid = [(cfg.start[0] + cfg.goal[0]) / 2.0, (cfg.start[1] + cfg.goal[1]) / 2.0];
    let (dx, dy) = (cfg.goal[0] - cfg.start[0], cfg.goal[1] - cfg.start[1]);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return Err(Error::DegenerateSegment);
    }
    let shift = if cfg.jitter > 0.0 {
        rng.random_range(-cfg.jitter..=cfg.jitter)
    } else {
        0.0
    };
    let center = [mid[0] - dy / len * shift, mid[1] + dx / len * shift, 0.0];
    Ok(Environment {
        bodies: vec![Body {
            center,
            velocity: [0.0; 3],
            a: cfg.radius,
            b: PLANAR_Z_AXIS,
        }],
        bounds_min: [cfg.bounds_min[0], cfg.bounds_min[1], -PLANAR_Z_HALF],
        bounds_max: [cfg.bounds_max[0], cfg.bounds_max[1], PLANAR_Z_HALF],
        start: [cfg.start[0], cfg.start[1], 0.0],
        goal: [cfg.goal[0], cfg.goal[1], 0.0],
        dynamic: false,
        planar: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn clutter_2d_counts_and_clearance() {
        let cfg = Clutter2d::default();
        let env = generate_env_2d(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(env.bodies.len(), 50);
        assert!(env.bodies.iter().all(|b| b.a == 0.4));
        assert!(env.clearance(env.start, 0.0) >= 0.4 - 1e-12);
        assert!(env.clearance(env.goal, 0.0) >= 0.4 - 1e-12);
        let again = generate_env_2d(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(env, again);
    }

    #[test]
    fn rejection_budget_reported() {
        let cfg = Clutter2d {
            width: 1.0,
            height: 1.0,
            start: [0.5, 0.5],
            goal: [0.5, 0.5],
            clearance: 5.0,
            max_attempts: 100,
            ..Default::default()
        };
        assert!(matches!(
            generate_env_2d(&cfg, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::RejectionBudget { .. })
        ));
    }

    #[test]
    fn moving_body_displacement() {
        let b = Body {
            center: [1.0, 2.0, 0.0],
            velocity: [-0.1, 0.0, 0.0],
            a: 0.3,
            b: 10.0,
        };
        let c = b.center_at(2.5);
        assert!((c[0] - 0.75).abs() < 1e-12 && c[1] == 2.0);
    }

    #[test]
    fn environment_file_round_trip() {
        let env = generate_env_3d(&Clutter3d::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut buf = Vec::new();
        env.save(&mut buf).unwrap();
        assert_eq!(Environment::load(buf.as_slice()).unwrap(), env);
    }
}
