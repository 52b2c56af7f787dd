use std::f64::consts::PI;

use nalgebra::DMatrix;
use priest::basis::Kinematics;
use priest::polar::{self, Limits, Obstacle, PolarVariables, D_MAX, D_MIN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRID: usize = 4096;
const INSTANCES: usize = 100;

pub fn grid_step() -> f64 {
    2.0 * PI / GRID as f64
}

pub fn grid_argmin(f: impl Fn(f64) -> f64) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..GRID {
        let th = -PI + k as f64 * grid_step();
        let v = f(th);
        if v < best.0 {
            best = (v, th);
        }
    }
    best.1
}

pub fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-11 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

pub fn unit(alpha: f64, beta: f64) -> [f64; 3] {
    [alpha.cos() * beta.sin(), alpha.sin() * beta.sin(), beta.cos()]
}

/// `|v - d * (sx ux, sy uy, sz uz)|^2` for the direction `u(alpha, beta)`.
pub fn misfit(v: [f64; 3], scale: [f64; 3], alpha: f64, beta: f64, d: f64) -> f64 {
    let u = unit(alpha, beta);
    (0..3).map(|k| (v[k] - d * scale[k] * u[k]).powi(2)).sum()
}

pub struct Instance {
    pub kin: Kinematics,
    pub obstacles: Vec<Obstacle>,
    pub limits: Limits,
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng, ellipsoid: bool) -> Self {
        let row = |rng: &mut ChaCha8Rng, s: f64| DMatrix::from_fn(1, 3, |_, _| rng.random_range(-s..s));
        let kin = Kinematics {
            pos: row(rng, 5.0),
            vel: row(rng, 3.0),
            acc: row(rng, 3.0),
        };
        let a = rng.random_range(0.3..2.0);
        let b = if ellipsoid { rng.random_range(0.3..2.0) } else { a };
        let center = [0, 1, 2].map(|_| rng.random_range(-2.0..2.0));
        Self {
            kin,
            obstacles: vec![Obstacle::fixed(center, a, b, 1).unwrap()],
            limits: Limits {
                v_max: rng.random_range(0.5..3.0),
                a_max: rng.random_range(0.5..3.0),
                s_min: [-10.0; 3],
                s_max: [10.0; 3],
            },
        }
    }

    pub fn offset(&self) -> [f64; 3] {
        let c = self.obstacles[0].centers()[0];
        [0, 1, 2].map(|k| self.kin.pos[(0, k)] - c[k])
    }

    pub fn obstacle_scale(&self) -> [f64; 3] {
        let o = &self.obstacles[0];
        [o.a(), o.a(), o.b()]
    }

    pub fn random_polar(&self, rng: &mut ChaCha8Rng) -> PolarVariables {
        let mut p = PolarVariables::new(1, 1);
        p.alpha_o[0] = rng.random_range(-PI..PI);
        p.alpha_v[0] = rng.random_range(-PI..PI);
        p.alpha_a[0] = rng.random_range(-PI..PI);
        p.beta_o[0] = rng.random_range(0.05..PI - 0.05);
        p.beta_v[0] = rng.random_range(0.05..PI - 0.05);
        p.beta_a[0] = rng.random_range(0.05..PI - 0.05);
        p.d_o[0] = rng.random_range(1.0..3.0);
        p.d_v[0] = rng.random_range(0.05..1.0);
        p.d_a[0] = rng.random_range(0.05..1.0);
        p
    }
}

/// Worst disagreement of each closed-form block update with its oracle:
/// alpha and beta in grid steps, d in absolute units.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlockErrors {
    pub alpha: f64,
    pub beta: f64,
    pub d: f64,
}

pub fn block_errors(seed: u64, instances: usize) -> BlockErrors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = BlockErrors::default();
    let steps = |a: f64, b: f64| circular_gap(a, b) / grid_step();
    for _ in 0..instances {
        let inst = Instance::random(&mut rng, true);
        let vm = inst.limits.v_max;
        let am = inst.limits.a_max;
        let (off, sc) = (inst.offset(), inst.obstacle_scale());
        let (vel, acc) = (inst.kin.vel_at(0), inst.kin.acc_at(0));

        let before = inst.random_polar(&mut rng);
        let mut p = before.clone();
        polar::update_alpha(&inst.kin, &inst.obstacles, &mut p);
        for (got, g) in [
            (
                p.alpha_o[0],
                grid_argmin(|al| misfit(off, sc, al, before.beta_o[0], before.d_o[0])),
            ),
            (
                p.alpha_v[0],
                grid_argmin(|al| misfit(vel, [vm; 3], al, before.beta_v[0], before.d_v[0])),
            ),
            (
                p.alpha_a[0],
                grid_argmin(|al| misfit(acc, [am; 3], al, before.beta_a[0], before.d_a[0])),
            ),
        ] {
            e.alpha = e.alpha.max(steps(got, g));
        }

        let mut p = inst.random_polar(&mut rng);
        polar::update_d(&inst.kin, &inst.obstacles, &inst.limits, &mut p);
        for (got, want) in [
            (
                p.d_o[0],
                golden_min(|d| misfit(off, sc, p.alpha_o[0], p.beta_o[0], d), D_MIN[0], 1e3),
            ),
            (
                p.d_v[0],
                golden_min(
                    |d| misfit(vel, [vm; 3], p.alpha_v[0], p.beta_v[0], d),
                    D_MIN[1],
                    D_MAX[1],
                ),
            ),
            (
                p.d_a[0],
                golden_min(
                    |d| misfit(acc, [am; 3], p.alpha_a[0], p.beta_a[0], d),
                    D_MIN[2],
                    D_MAX[2],
                ),
            ),
        ] {
            e.d = e.d.max((got - want).abs());
        }

        let inst = Instance::random(&mut rng, false);
        let (off, sc) = (inst.offset(), inst.obstacle_scale());
        let (vel, acc) = (inst.kin.vel_at(0), inst.kin.acc_at(0));
        let (vm, am) = (inst.limits.v_max, inst.limits.a_max);
        let before = inst.random_polar(&mut rng);
        let mut p = before.clone();
        polar::update_beta(&inst.kin, &inst.obstacles, &mut p);
        for (got, g) in [
            (
                p.beta_o[0],
                grid_argmin(|be| misfit(off, sc, before.alpha_o[0], be, before.d_o[0])),
            ),
            (
                p.beta_v[0],
                grid_argmin(|be| misfit(vel, [vm; 3], before.alpha_v[0], be, before.d_v[0])),
            ),
            (
                p.beta_a[0],
                grid_argmin(|be| misfit(acc, [am; 3], before.alpha_a[0], be, before.d_a[0])),
            ),
        ] {
            e.beta = e.beta.max(steps(got, g));
        }
    }
    e
}
