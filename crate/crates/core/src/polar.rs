//! Polar reformulation of the collision, velocity and acceleration
//! constraints, and the closed-form alternating-minimization updates of the
//! auxiliary angles and distances.
//!
//! Every inequality of the form `|scaled(v)| >= 1` or `|v| <= bound` is
//! rewritten as an equality between `v` and a point `d * bound * u(alpha,
//! beta)` on a scaled sphere, plus a simple bound on `d`. For fixed trajectory
//! samples each `(alpha, beta, d)` triple is found in closed form.
//!
//! Row layout of the stacked constraint matrix, per axis `x`, `y`, `z`:
//! `n_o * n_p` obstacle rows (obstacle-major), `n_p` velocity rows, `n_p`
//! acceleration rows. The workspace-bound block `G = [-P; P]` per axis follows
//! after all three axes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, Kinematics, Trajectory, AXES};
use crate::error::{Error, Result};

/// Axis-aligned ellipsoid with semi-axes `(a, a, b)` whose center follows a
/// sampled trajectory over the planning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    centers: Vec<[f64; 3]>,
    a: f64,
    b: f64,
    velocity: Option<[f64; 3]>,
}

impl Obstacle {
    pub fn new(centers: Vec<[f64; 3]>, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "obstacle semi-axes must be positive, got a={a} b={b}"
            )));
        }
        if centers.is_empty() {
            return Err(Error::InvalidConfig("obstacle has no center samples".into()));
        }
        Ok(Self {
            centers,
            a,
            b,
            velocity: None,
        })
    }

    /// Static obstacle replicated over `n_p` samples.
    pub fn fixed(center: [f64; 3], a: f64, b: f64, n_p: usize) -> Result<Self> {
        Self::new(vec![center; n_p], a, b)
    }

    /// Constant-velocity obstacle; `center` is its position at `t_grid[0]`.
    pub fn moving(center: [f64; 3], velocity: [f64; 3], a: f64, b: f64, t_grid: &[f64]) -> Result<Self> {
        let t0 = t_grid.first().copied().unwrap_or(0.0);
        let centers = t_grid
            .iter()
            .map(|&t| {
                let dt = t - t0;
                [
                    center[0] + velocity[0] * dt,
                    center[1] + velocity[1] * dt,
                    center[2] + velocity[2] * dt,
                ]
            })
            .collect();
        let mut o = Self::new(centers, a, b)?;
        o.velocity = Some(velocity);
        Ok(o)
    }

    pub fn centers(&self) -> &[[f64; 3]] {
        &self.centers
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn velocity(&self) -> Option<[f64; 3]> {
        self.velocity
    }

    /// Left side of the ellipsoid inequality: `1 - scaled squared distance`.
    /// Nonpositive outside the obstacle.
    pub fn ellipse_value(&self, t: usize, p: [f64; 3]) -> f64 {
        let c = self.centers[t];
        let dx = p[0] - c[0];
        let dy = p[1] - c[1];
        let dz = p[2] - c[2];
        1.0 - (dx * dx + dy * dy) / (self.a * self.a) - dz * dz / (self.b * self.b)
    }

    /// Shift the obstacle rigidly.
    pub fn translated(&self, shift: [f64; 3]) -> Self {
        let mut o = self.clone();
        for c in &mut o.centers {
            for k in 0..3 {
                c[k] += shift[k];
            }
        }
        o
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub v_max: f64,
    pub a_max: f64,
    pub s_min: [f64; 3],
    pub s_max: [f64; 3],
}

impl Limits {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0 && self.a_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "v_max and a_max must be positive (got {}, {})",
                self.v_max, self.a_max
            )));
        }
        for k in 0..3 {
            if !(self.s_min[k] < self.s_max[k]) {
                return Err(Error::InvalidConfig(format!(
                    "workspace bound on axis {k}: s_min {} >= s_max {}",
                    self.s_min[k], self.s_max[k]
                )));
            }
        }
        Ok(())
    }

    pub fn translated(&self, shift: [f64; 3]) -> Self {
        let mut l = *self;
        for k in 0..3 {
            l.s_min[k] += shift[k];
            l.s_max[k] += shift[k];
        }
        l
    }
}

/// Lower bounds of the three `d` blocks (obstacle, velocity, acceleration).
pub const D_MIN: [f64; 3] = [1.0, 0.0, 0.0];
/// Upper bounds of the three `d` blocks.
pub const D_MAX: [f64; 3] = [f64::INFINITY, 1.0, 1.0];

/// Auxiliary angles and distances. Obstacle blocks are indexed
/// `j * n_p + t`; velocity and acceleration blocks by `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarVariables {
    pub n_o: usize,
    pub n_p: usize,
    pub alpha_o: Vec<f64>,
    pub beta_o: Vec<f64>,
    pub d_o: Vec<f64>,
    pub alpha_v: Vec<f64>,
    pub beta_v: Vec<f64>,
    pub d_v: Vec<f64>,
    pub alpha_a: Vec<f64>,
    pub beta_a: Vec<f64>,
    pub d_a: Vec<f64>,
}

impl PolarVariables {
    /// Angles zero, distances at their lower bounds.
    pub fn new(n_o: usize, n_p: usize) -> Self {
        let no = n_o * n_p;
        Self {
            n_o,
            n_p,
            alpha_o: vec![0.0; no],
            beta_o: vec![0.0; no],
            d_o: vec![D_MIN[0]; no],
            alpha_v: vec![0.0; n_p],
            beta_v: vec![0.0; n_p],
            d_v: vec![D_MIN[1]; n_p],
            alpha_a: vec![0.0; n_p],
            beta_a: vec![0.0; n_p],
            d_a: vec![D_MIN[2]; n_p],
        }
    }

    /// Fresh variables fitted to the given samples by one full sweep.
    pub fn fitted(kin: &Kinematics, obstacles: &[Obstacle], limits: &Limits) -> Self {
        let mut polar = Self::new(obstacles.len(), kin.n_p());
        polar.sweep(kin, obstacles, limits);
        polar
    }

    /// One Gauss-Seidel pass: alpha, then beta, then d.
    pub fn sweep(&mut self, kin: &Kinematics, obstacles: &[Obstacle], limits: &Limits) {
        update_alpha(kin, obstacles, self);
        update_beta(kin, obstacles, self);
        update_d(kin, obstacles, limits, self);
    }

    pub fn d_bounds_hold(&self) -> bool {
        let ok = |v: &[f64], k: usize| v.iter().all(|&d| d >= D_MIN[k] && d <= D_MAX[k]);
        ok(&self.d_o, 0) && ok(&self.d_v, 1) && ok(&self.d_a, 2)
    }
}

/// `atan2` with the all-zero argument mapped to angle 0.
#[inline]
pub fn angle(y: f64, x: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        0.0
    } else {
        y.atan2(x)
    }
}

#[inline]
fn offset(kin: &Kinematics, o: &Obstacle, t: usize) -> (f64, f64, f64) {
    let c = o.centers[t];
    (kin.pos[(t, 0)] - c[0], kin.pos[(t, 1)] - c[1], kin.pos[(t, 2)] - c[2])
}

/// Azimuth update. With `d * sin(beta) >= 0` the minimizer over each angle is
/// the azimuth of the offset (robot minus center, velocity, acceleration).
pub fn update_alpha(kin: &Kinematics, obstacles: &[Obstacle], polar: &mut PolarVariables) {
    let n_p = kin.n_p();
    for (j, o) in obstacles.iter().enumerate() {
        for t in 0..n_p {
            let (dx, dy, _) = offset(kin, o, t);
            polar.alpha_o[j * n_p + t] = angle(dy, dx);
        }
    }
    for t in 0..n_p {
        polar.alpha_v[t] = angle(kin.vel[(t, 1)], kin.vel[(t, 0)]);
        polar.alpha_a[t] = angle(kin.acc[(t, 1)], kin.acc[(t, 0)]);
    }
}

/// Polar-angle update given the current azimuths. For obstacles the angle is
/// measured in the ellipsoid-normalized frame `(dx/a, dy/a, dz/b)`.
pub fn update_beta(kin: &Kinematics, obstacles: &[Obstacle], polar: &mut PolarVariables) {
    let n_p = kin.n_p();
    for (j, o) in obstacles.iter().enumerate() {
        for t in 0..n_p {
            let i = j * n_p + t;
            let (dx, dy, dz) = offset(kin, o, t);
            let (sa, ca) = polar.alpha_o[i].sin_cos();
            polar.beta_o[i] = angle((dx * ca + dy * sa) / o.a, dz / o.b);
        }
    }
    for t in 0..n_p {
        let (sa, ca) = polar.alpha_v[t].sin_cos();
        let (vx, vy, vz) = (kin.vel[(t, 0)], kin.vel[(t, 1)], kin.vel[(t, 2)]);
        polar.beta_v[t] = angle(vx * ca + vy * sa, vz);
        let (sa, ca) = polar.alpha_a[t].sin_cos();
        let (ax, ay, az) = (kin.acc[(t, 0)], kin.acc[(t, 1)], kin.acc[(t, 2)]);
        polar.beta_a[t] = angle(ax * ca + ay * sa, az);
    }
}

/// One-dimensional least-squares fit of `d` along the unit direction given by
/// the current angles, clamped to the block bounds. A vanishing denominator
/// snaps `d` to its lower bound.
pub fn update_d(kin: &Kinematics, obstacles: &[Obstacle], limits: &Limits, polar: &mut PolarVariables) {
    let n_p = kin.n_p();
    for (j, o) in obstacles.iter().enumerate() {
        for t in 0..n_p {
            let i = j * n_p + t;
            let (dx, dy, dz) = offset(kin, o, t);
            let (sa, ca) = polar.alpha_o[i].sin_cos();
            let (sb, cb) = polar.beta_o[i].sin_cos();
            let ux = o.a * ca * sb;
            let uy = o.a * sa * sb;
            let uz = o.b * cb;
            let den = ux * ux + uy * uy + uz * uz;
            let num = dx * ux + dy * uy + dz * uz;
            polar.d_o[i] = clamp_ratio(num, den, 0);
        }
    }
    for t in 0..n_p {
        polar.d_v[t] = fit_norm_ratio(kin.vel_at(t), polar.alpha_v[t], polar.beta_v[t], limits.v_max, 1);
        polar.d_a[t] = fit_norm_ratio(kin.acc_at(t), polar.alpha_a[t], polar.beta_a[t], limits.a_max, 2);
    }
}

#[inline]
fn fit_norm_ratio(v: [f64; 3], alpha: f64, beta: f64, bound: f64, block: usize) -> f64 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let ux = bound * ca * sb;
    let uy = bound * sa * sb;
    let uz = bound * cb;
    let den = ux * ux + uy * uy + uz * uz;
    let num = v[0] * ux + v[1] * uy + v[2] * uz;
    clamp_ratio(num, den, block)
}

#[inline]
fn clamp_ratio(num: f64, den: f64, block: usize) -> f64 {
    if den <= 0.0 || !den.is_finite() {
        return D_MIN[block];
    }
    (num / den).clamp(D_MIN[block], D_MAX[block])
}

/// Number of rows of the stacked obstacle/velocity/acceleration block.
pub fn f_tilde_rows(n_o: usize, n_p: usize) -> usize {
    AXES * (n_o + 2) * n_p
}

/// Number of rows of the workspace-bound block.
pub fn g_rows(n_p: usize) -> usize {
    2 * AXES * n_p
}

/// Targets `e~` in row order of `F~`.
pub fn compute_e_tilde(polar: &PolarVariables, obstacles: &[Obstacle], limits: &Limits) -> Vec<f64> {
    let mut out = vec![0.0; f_tilde_rows(polar.n_o, polar.n_p)];
    fill_e_tilde(polar, obstacles, limits, &mut out);
    out
}

pub(crate) fn fill_e_tilde(polar: &PolarVariables, obstacles: &[Obstacle], limits: &Limits, out: &mut [f64]) {
    let n_p = polar.n_p;
    let n_o = polar.n_o;
    let block = (n_o + 2) * n_p;
    let (ex, rest) = out.split_at_mut(block);
    let (ey, ez) = rest.split_at_mut(block);
    for (j, o) in obstacles.iter().enumerate() {
        for t in 0..n_p {
            let i = j * n_p + t;
            let (sa, ca) = polar.alpha_o[i].sin_cos();
            let (sb, cb) = polar.beta_o[i].sin_cos();
            let d = polar.d_o[i];
            let c = o.centers[t];
            ex[i] = c[0] + o.a * d * ca * sb;
            ey[i] = c[1] + o.a * d * sa * sb;
            ez[i] = c[2] + o.b * d * cb;
        }
    }
    let vo = n_o * n_p;
    let ao = (n_o + 1) * n_p;
    for t in 0..n_p {
        let (sa, ca) = polar.alpha_v[t].sin_cos();
        let (sb, cb) = polar.beta_v[t].sin_cos();
        let r = polar.d_v[t] * limits.v_max;
        ex[vo + t] = r * ca * sb;
        ey[vo + t] = r * sa * sb;
        ez[vo + t] = r * cb;
        let (sa, ca) = polar.alpha_a[t].sin_cos();
        let (sb, cb) = polar.beta_a[t].sin_cos();
        let r = polar.d_a[t] * limits.a_max;
        ex[ao + t] = r * ca * sb;
        ey[ao + t] = r * sa * sb;
        ez[ao + t] = r * cb;
    }
}

/// Targets `e~` of a full alternating sweep, computed without forming the
/// angles: the swept polar variables reproduce the offset direction exactly,
/// so each target is the offset rescaled by its clamped length ratio.
pub fn fill_targets(kin: &Kinematics, obstacles: &[Obstacle], limits: &Limits, out: &mut [f64]) {
    let n_p = kin.n_p();
    let n_o = obstacles.len();
    let block = (n_o + 2) * n_p;
    let (ex, rest) = out.split_at_mut(block);
    let (ey, ez) = rest.split_at_mut(block);
    let px = kin.pos.column(0);
    let py = kin.pos.column(1);
    let pz = kin.pos.column(2);
    for (j, o) in obstacles.iter().enumerate() {
        let (ia, ib) = (1.0 / o.a, 1.0 / o.b);
        for t in 0..n_p {
            let i = j * n_p + t;
            let c = o.centers[t];
            let (dx, dy, dz) = (px[t] - c[0], py[t] - c[1], pz[t] - c[2]);
            let q = ((dx * ia).powi(2) + (dy * ia).powi(2) + (dz * ib).powi(2)).sqrt();
            if q >= D_MIN[0] {
                ex[i] = px[t];
                ey[i] = py[t];
                ez[i] = pz[t];
            } else if q > 0.0 {
                let s = D_MIN[0] / q;
                ex[i] = c[0] + dx * s;
                ey[i] = c[1] + dy * s;
                ez[i] = c[2] + dz * s;
            } else {
                ex[i] = c[0];
                ey[i] = c[1];
                ez[i] = c[2] + o.b * D_MIN[0];
            }
        }
    }
    let clip = |x: f64, y: f64, z: f64, bound: f64| -> [f64; 3] {
        let n = (x * x + y * y + z * z).sqrt();
        if n <= bound {
            [x, y, z]
        } else {
            let s = bound / n;
            [x * s, y * s, z * s]
        }
    };
    let vo = n_o * n_p;
    let ao = (n_o + 1) * n_p;
    for t in 0..n_p {
        let v = clip(kin.vel[(t, 0)], kin.vel[(t, 1)], kin.vel[(t, 2)], limits.v_max);
        ex[vo + t] = v[0];
        ey[vo + t] = v[1];
        ez[vo + t] = v[2];
        let a = clip(kin.acc[(t, 0)], kin.acc[(t, 1)], kin.acc[(t, 2)], limits.a_max);
        ex[ao + t] = a[0];
        ey[ao + t] = a[1];
        ez[ao + t] = a[2];
    }
}

/// Bound vector `tau`: per axis `-s_min` over the grid, then `s_max`.
pub fn compute_tau(limits: &Limits, n_p: usize) -> Vec<f64> {
    let mut tau = Vec::with_capacity(g_rows(n_p));
    for k in 0..AXES {
        tau.extend(std::iter::repeat_n(-limits.s_min[k], n_p));
        tau.extend(std::iter::repeat_n(limits.s_max[k], n_p));
    }
    tau
}

/// Full target vector `e = [e~; tau - s]`.
pub fn compute_e(
    polar: &PolarVariables,
    obstacles: &[Obstacle],
    limits: &Limits,
    slack: &[f64],
    tau: &[f64],
) -> Result<Vec<f64>> {
    if slack.len() != tau.len() || tau.len() != g_rows(polar.n_p) {
        return Err(Error::DimensionMismatch {
            context: "slack/tau",
            expected: g_rows(polar.n_p),
            got: slack.len().min(tau.len()),
        });
    }
    if obstacles.len() != polar.n_o {
        return Err(Error::DimensionMismatch {
            context: "obstacles vs polar variables",
            expected: polar.n_o,
            got: obstacles.len(),
        });
    }
    let nt = f_tilde_rows(polar.n_o, polar.n_p);
    let mut e = vec![0.0; nt + tau.len()];
    fill_e_tilde(polar, obstacles, limits, &mut e[..nt]);
    for (dst, (t, s)) in e[nt..].iter_mut().zip(tau.iter().zip(slack)) {
        *dst = t - s;
    }
    Ok(e)
}

/// `G xi` evaluated from sampled positions, in `tau` order.
pub(crate) fn g_times(kin: &Kinematics, out: &mut [f64]) {
    let n_p = kin.n_p();
    for k in 0..AXES {
        let base = k * 2 * n_p;
        for t in 0..n_p {
            out[base + t] = -kin.pos[(t, k)];
            out[base + n_p + t] = kin.pos[(t, k)];
        }
    }
}

/// Slack update `s = max(0, -G xi + tau)`.
pub fn update_slack(kin: &Kinematics, tau: &[f64], slack: &mut [f64]) {
    g_times(kin, slack);
    for (s, &t) in slack.iter_mut().zip(tau) {
        *s = (t - *s).max(0.0);
    }
}

/// Squared norm of `F~ xi - e~` using sampled kinematics for `F~ xi`.
pub(crate) fn f_tilde_misfit_sq(kin: &Kinematics, n_o: usize, e_tilde: &[f64]) -> f64 {
    let n_p = kin.n_p();
    let block = (n_o + 2) * n_p;
    let mut acc = 0.0;
    for k in 0..AXES {
        let e = &e_tilde[k * block..(k + 1) * block];
        let pos = kin.pos.column(k);
        let vel = kin.vel.column(k);
        let ac = kin.acc.column(k);
        for j in 0..n_o {
            for t in 0..n_p {
                let r = pos[t] - e[j * n_p + t];
                acc += r * r;
            }
        }
        for t in 0..n_p {
            let r = vel[t] - e[n_o * n_p + t];
            acc += r * r;
            let r = ac[t] - e[(n_o + 1) * n_p + t];
            acc += r * r;
        }
    }
    acc
}

/// Norm of the workspace-bound violation `max(0, G xi - tau)`.
pub(crate) fn bound_violation(kin: &Kinematics, limits: &Limits) -> f64 {
    let mut acc = 0.0;
    for k in 0..AXES {
        for t in 0..kin.n_p() {
            let p = kin.pos[(t, k)];
            let lo = (limits.s_min[k] - p).max(0.0);
            let hi = (p - limits.s_max[k]).max(0.0);
            acc += lo * lo + hi * hi;
        }
    }
    acc.sqrt()
}

/// Constraint residual of sampled kinematics: the misfit of the best-fit polar
/// targets plus the workspace-bound violation.
pub fn residual_of(kin: &Kinematics, obstacles: &[Obstacle], limits: &Limits) -> f64 {
    let mut e = vec![0.0; f_tilde_rows(obstacles.len(), kin.n_p())];
    fill_targets(kin, obstacles, limits, &mut e);
    f_tilde_misfit_sq(kin, obstacles.len(), &e).sqrt() + bound_violation(kin, limits)
}

pub fn residual(traj: &Trajectory, basis: &BasisSet, obstacles: &[Obstacle], limits: &Limits) -> Result<f64> {
    check_obstacles(obstacles, basis.n_p())?;
    let kin = crate::basis::evaluate(traj, basis)?;
    Ok(residual_of(&kin, obstacles, limits))
}

pub(crate) fn check_obstacles(obstacles: &[Obstacle], n_p: usize) -> Result<()> {
    for (index, o) in obstacles.iter().enumerate() {
        if o.centers.len() != n_p {
            return Err(Error::ObstacleGrid {
                index,
                expected: n_p,
                got: o.centers.len(),
            });
        }
    }
    Ok(())
}

/// Explicit stacked constraint matrices.
#[derive(Debug, Clone)]
pub struct PolarConstraintSystem {
    pub n_o: usize,
    pub n_p: usize,
    pub f_tilde: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub tau: Vec<f64>,
    pub f: DMatrix<f64>,
}

impl PolarConstraintSystem {
    pub fn new(basis: &BasisSet, obstacles: &[Obstacle], limits: &Limits) -> Result<Self> {
        if basis.n_p() == 0 || basis.ncoef() == 0 {
            return Err(Error::InvalidConfig("empty basis".into()));
        }
        limits.validate()?;
        check_obstacles(obstacles, basis.n_p())?;
        let n_o = obstacles.len();
        let n_p = basis.n_p();
        let n = basis.ncoef();
        let block_rows = (n_o + 2) * n_p;

        let mut block = DMatrix::zeros(block_rows, n);
        for j in 0..n_o {
            block.view_mut((j * n_p, 0), (n_p, n)).copy_from(basis.p());
        }
        block.view_mut((n_o * n_p, 0), (n_p, n)).copy_from(basis.pdot());
        block.view_mut(((n_o + 1) * n_p, 0), (n_p, n)).copy_from(basis.pddot());

        let mut f_tilde = DMatrix::zeros(AXES * block_rows, AXES * n);
        let mut g = DMatrix::zeros(g_rows(n_p), AXES * n);
        for k in 0..AXES {
            f_tilde
                .view_mut((k * block_rows, k * n), (block_rows, n))
                .copy_from(&block);
            g.view_mut((k * 2 * n_p, k * n), (n_p, n)).copy_from(&(-basis.p()));
            g.view_mut((k * 2 * n_p + n_p, k * n), (n_p, n)).copy_from(basis.p());
        }
        let mut f = DMatrix::zeros(f_tilde.nrows() + g.nrows(), AXES * n);
        f.view_mut((0, 0), f_tilde.shape()).copy_from(&f_tilde);
        f.view_mut((f_tilde.nrows(), 0), g.shape()).copy_from(&g);
        Ok(Self {
            n_o,
            n_p,
            f_tilde,
            g,
            tau: compute_tau(limits, n_p),
            f,
        })
    }
}
