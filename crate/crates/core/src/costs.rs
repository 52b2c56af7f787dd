//! Primary trajectory costs and the residual-augmented cost.
//!
//! The sampler only ever consumes scalar cost values, so none of these need
//! to be smooth.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, Kinematics};
use crate::error::{Error, Result};

/// Speed floor (m/s) in the curvature denominator.
pub const SPEED_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub w_smooth: f64,
    pub w_curv: f64,
    pub w_path: f64,
    pub w_resid: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self::point_to_point()
    }
}

impl CostWeights {
    pub fn point_to_point() -> Self {
        Self {
            w_smooth: 1.0,
            w_curv: 0.0,
            w_path: 0.0,
            w_resid: 10.0,
        }
    }

    pub fn mpc() -> Self {
        Self {
            w_smooth: 1.0,
            w_curv: 0.1,
            w_path: 1.0,
            w_resid: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w_smooth, self.w_curv, self.w_path, self.w_resid];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "cost weights must be finite and >= 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `sum_t |acc(t)|^2 * dt`.
pub fn smoothness_cost(kin: &Kinematics, basis: &BasisSet) -> f64 {
    kin.acc.iter().map(|a| a * a).sum::<f64>() * basis.dt()
}

/// Curvature `|v x a| / max(|v|, eps)^3` at one sample.
pub fn curvature(v: [f64; 3], a: [f64; 3]) -> f64 {
    let cx = v[1] * a[2] - v[2] * a[1];
    let cy = v[2] * a[0] - v[0] * a[2];
    let cz = v[0] * a[1] - v[1] * a[0];
    let cross = (cx * cx + cy * cy + cz * cz).sqrt();
    let speed = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(SPEED_FLOOR);
    cross / (speed * speed * speed)
}

/// `sum_t kappa(t)^2 * dt`.
pub fn curvature_cost(kin: &Kinematics, basis: &BasisSet) -> f64 {
    (0..kin.n_p())
        .map(|t| curvature(kin.vel_at(t), kin.acc_at(t)).powi(2))
        .sum::<f64>()
        * basis.dt()
}

/// Distance from `p` to the segment `start -> goal`.
pub fn point_segment_distance(p: [f64; 3], start: [f64; 3], goal: [f64; 3]) -> f64 {
    let d = [goal[0] - start[0], goal[1] - start[1], goal[2] - start[2]];
    let len2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let w = [p[0] - start[0], p[1] - start[1], p[2] - start[2]];
    let s = if len2 > 0.0 {
        ((w[0] * d[0] + w[1] * d[1] + w[2] * d[2]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [w[0] - s * d[0], w[1] - s * d[1], w[2] - s * d[2]];
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt()
}

/// Mean distance of the waypoints to the straight start-to-goal segment.
pub fn path_error_cost(kin: &Kinematics, start: [f64; 3], goal: [f64; 3]) -> Result<f64> {
    let d2: f64 = (0..3).map(|k| (goal[k] - start[k]).powi(2)).sum();
    if d2 <= 0.0 {
        return Err(Error::DegenerateSegment);
    }
    let n = kin.n_p();
    Ok((0..n)
        .map(|t| point_segment_distance(kin.pos_at(t), start, goal))
        .sum::<f64>()
        / n as f64)
}

/// Reference segment for the path-following term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostContext {
    pub start: [f64; 3],
    pub goal: [f64; 3],
}

/// Weighted primary cost `c_1`. Terms with zero weight are not evaluated.
pub fn primary_cost(kin: &Kinematics, basis: &BasisSet, w: &CostWeights, ctx: &CostContext) -> f64 {
    let mut c = 0.0;
    if w.w_smooth != 0.0 {
        c += w.w_smooth * smoothness_cost(kin, basis);
    }
    if w.w_curv != 0.0 {
        c += w.w_curv * curvature_cost(kin, basis);
    }
    if w.w_path != 0.0 {
        // a degenerate segment contributes nothing
        c += w.w_path * path_error_cost(kin, ctx.start, ctx.goal).unwrap_or(0.0);
    }
    c
}

/// `c_aug = c_1 + w_resid * r`.
pub fn augmented_cost(kin: &Kinematics, residual: f64, basis: &BasisSet, w: &CostWeights, ctx: &CostContext) -> f64 {
    primary_cost(kin, basis, w, ctx) + w.w_resid * residual
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{evaluate_slice, BasisSet};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_kin(b: &BasisSet) -> Kinematics {
        let n = b.ncoef();
        let mut c = vec![0.0; b.n_v()];
        c[1] = 4.0;
        c[n + 1] = 2.0;
        evaluate_slice(&c, b)
    }

    #[test]
    fn constant_velocity_line_costs_vanish() {
        let b = BasisSet::new(40, 6, 0.0, 4.0).unwrap();
        let kin = line_kin(&b);
        assert_abs_diff_eq!(smoothness_cost(&kin, &b), 0.0, epsilon = 1e-20);
        assert_abs_diff_eq!(curvature_cost(&kin, &b), 0.0, epsilon = 1e-20);
        let start = kin.pos_at(0);
        let goal = kin.pos_at(39);
        assert_abs_diff_eq!(path_error_cost(&kin, start, goal).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn smoothness_is_quadratic() {
        let b = BasisSet::new(40, 6, 0.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c: Vec<f64> = (0..b.n_v()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c2: Vec<f64> = c.iter().map(|v| 2.0 * v).collect();
        let s1 = smoothness_cost(&evaluate_slice(&c, &b), &b);
        let s2 = smoothness_cost(&evaluate_slice(&c2, &b), &b);
        assert_abs_diff_eq!(s2, 4.0 * s1, epsilon = 1e-9 * s2.max(1.0));
    }

    #[test]
    fn smoothness_matches_loop_and_quadratic_form() {
        let b = BasisSet::new(30, 7, 0.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c: Vec<f64> = (0..b.n_v()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let kin = evaluate_slice(&c, &b);
        let mut lp = 0.0;
        for t in 0..b.n_p() {
            let a = kin.acc_at(t);
            lp += (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]) * b.dt();
        }
        assert_abs_diff_eq!(smoothness_cost(&kin, &b), lp, epsilon = 1e-10);
        let q = b.pddot().transpose() * b.pddot() * b.dt();
        let n = b.ncoef();
        let mut quad = 0.0;
        for k in 0..3 {
            let x = nalgebra::DVector::from_column_slice(&c[k * n..(k + 1) * n]);
            quad += (x.transpose() * &q * &x)[0];
        }
        assert_abs_diff_eq!(smoothness_cost(&kin, &b), quad, epsilon = 1e-9);
    }

    #[test]
    fn circle_curvature() {
        let r = 2.5;
        let w = 0.7;
        let mut worst = 0.0f64;
        for i in 0..50 {
            let th = i as f64 * 0.13;
            let v = [-r * w * th.sin(), r * w * th.cos(), 0.0];
            let a = [-r * w * w * th.cos(), -r * w * w * th.sin(), 0.0];
            worst = worst.max((curvature(v, a) - 1.0 / r).abs());
        }
        assert!(worst <= 1e-6);
    }

    #[test]
    fn curvature_matches_finite_difference_of_tangent_angle() {
        // planar curve: kappa = |d(theta)/ds|
        let b = BasisSet::new(60, 5, 0.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut c: Vec<f64> = (0..b.n_v()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let n = b.ncoef();
        c[1] = 3.0; // keep speed well away from zero
        for v in &mut c[2 * n..] {
            *v = 0.0;
        }
        let traj = crate::basis::Trajectory::new(c, &b).unwrap();
        let h = 1e-5;
        for i in 1..59 {
            let t = b.t_grid()[i];
            let [_, v, a] = traj.state_at(&b, t);
            let [_, vp, _] = traj.state_at(&b, t + h);
            let [_, vm, _] = traj.state_at(&b, t - h);
            let theta = |v: [f64; 3]| v[1].atan2(v[0]);
            let dtheta = (theta(vp) - theta(vm)) / (2.0 * h);
            let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert!((curvature(v, a) - dtheta.abs() / speed).abs() <= 1e-3);
        }
    }

    #[test]
    fn path_error_examples() {
        let kin = Kinematics {
            pos: DMatrix::from_row_slice(1, 3, &[0.5, 1.0, 0.0]),
            vel: DMatrix::zeros(1, 3),
            acc: DMatrix::zeros(1, 3),
        };
        assert_abs_diff_eq!(path_error_cost(&kin, [0.0; 3], [1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert!(path_error_cost(&kin, [1.0; 3], [1.0; 3]).is_err());
    }

    #[test]
    fn path_error_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let start = [0.3, -1.0, 0.5];
        let goal = [4.0, 2.0, -0.5];
        for _ in 0..20 {
            let p = [
                rng.random_range(-2.0..6.0),
                rng.random_range(-3.0..4.0),
                rng.random_range(-1.0..1.0),
            ];
            let dense = (0..=100_000)
                .map(|i| {
                    let s = i as f64 / 100_000.0;
                    (0..3)
                        .map(|k| (p[k] - start[k] - s * (goal[k] - start[k])).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((point_segment_distance(p, start, goal) - dense).abs() <= 1e-4);
        }
    }

    #[test]
    fn augmented_cost_weighting() {
        let b = BasisSet::new(30, 6, 0.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c: Vec<f64> = (0..b.n_v()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let kin = evaluate_slice(&c, &b);
        let ctx = CostContext {
            start: [0.0; 3],
            goal: [1.0, 1.0, 0.0],
        };
        let zero = CostWeights {
            w_smooth: 0.0,
            w_curv: 0.0,
            w_path: 0.0,
            w_resid: 0.0,
        };
        assert_eq!(augmented_cost(&kin, 3.0, &b, &zero, &ctx), 0.0);
        let w = CostWeights {
            w_smooth: 0.7,
            w_curv: 0.2,
            w_path: 1.3,
            w_resid: 2.0,
        };
        let r = 0.4;
        let expected = 0.7 * smoothness_cost(&kin, &b)
            + 0.2 * curvature_cost(&kin, &b)
            + 1.3 * path_error_cost(&kin, ctx.start, ctx.goal).unwrap()
            + 2.0 * r;
        assert_abs_diff_eq!(augmented_cost(&kin, r, &b, &w, &ctx), expected, epsilon = 1e-12);
        let p2p = CostWeights {
            w_resid: 1.0,
            ..CostWeights::point_to_point()
        };
        assert_eq!(
            augmented_cost(&kin, 0.0, &b, &p2p, &ctx),
            primary_cost(&kin, &b, &p2p, &ctx)
        );
    }
}
