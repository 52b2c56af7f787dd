//! Polynomial trajectory parametrization.
//!
//! Each axis is a polynomial in normalized time `s = (t - t0) / (tf - t0)`,
//! sampled on a uniform grid, written either in monomials `s^k` or in
//! Chebyshev polynomials `T_k(2s - 1)`. The three axes share one [`BasisSet`] and their
//! coefficient vectors are stacked as `[c_x; c_y; c_z]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const AXES: usize = 3;

/// Derivative orders fixed by the boundary system: position, velocity and
/// acceleration at the start, position at the end.
pub const BOUNDARY_LEVELS: [usize; 3] = [0, 1, 2];

/// Rows of the boundary system per axis.
pub const BOUNDARY_ROWS_PER_AXIS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Monomial,
    #[default]
    Chebyshev,
}

impl BasisKind {
    /// Values and first two derivatives (with respect to `s`) of every basis
    /// function at normalized time `s`.
    fn eval(self, s: f64, v: &mut [f64], d: &mut [f64], dd: &mut [f64]) {
        let n = v.len();
        match self {
            BasisKind::Monomial => {
                for j in 0..n {
                    let jf = j as f64;
                    v[j] = s.powi(j as i32);
                    d[j] = if j >= 1 { jf * s.powi(j as i32 - 1) } else { 0.0 };
                    dd[j] = if j >= 2 {
                        jf * (jf - 1.0) * s.powi(j as i32 - 2)
                    } else {
                        0.0
                    };
                }
            }
            BasisKind::Chebyshev => {
                let x = 2.0 * s - 1.0;
                for j in 0..n {
                    (v[j], d[j], dd[j]) = match j {
                        0 => (1.0, 0.0, 0.0),
                        1 => (x, 1.0, 0.0),
                        _ => (
                            2.0 * x * v[j - 1] - v[j - 2],
                            2.0 * v[j - 1] + 2.0 * x * d[j - 1] - d[j - 2],
                            4.0 * d[j - 1] + 2.0 * x * dd[j - 1] - dd[j - 2],
                        ),
                    };
                }
                // chain rule dx/ds = 2
                for j in 0..n {
                    d[j] *= 2.0;
                    dd[j] *= 4.0;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BasisSet {
    kind: BasisKind,
    n_p: usize,
    degree: usize,
    t0: f64,
    tf: f64,
    t_grid: Vec<f64>,
    p: DMatrix<f64>,
    pdot: DMatrix<f64>,
    pddot: DMatrix<f64>,
}

impl BasisSet {
    /// Monomial basis in normalized time sampled at `n_p` uniform stamps
    /// spanning `[t0, tf]`. Derivative matrices are exact.
    pub fn new(n_p: usize, degree: usize, t0: f64, tf: f64) -> Result<Self> {
        Self::with_kind(BasisKind::Monomial, n_p, degree, t0, tf)
    }

    pub fn with_kind(kind: BasisKind, n_p: usize, degree: usize, t0: f64, tf: f64) -> Result<Self> {
        if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
            return Err(Error::DegenerateHorizon { t0, tf });
        }
        let ncoef = degree + 1;
        if ncoef > n_p || n_p < 2 {
            return Err(Error::TooFewSamples {
                degree,
                need: ncoef.max(2),
                n_p,
            });
        }
        let span = tf - t0;
        let t_grid: Vec<f64> = (0..n_p).map(|i| t0 + span * i as f64 / (n_p - 1) as f64).collect();

        let mut p = DMatrix::zeros(n_p, ncoef);
        let mut pdot = DMatrix::zeros(n_p, ncoef);
        let mut pddot = DMatrix::zeros(n_p, ncoef);
        let (mut v, mut d, mut dd) = (vec![0.0; ncoef], vec![0.0; ncoef], vec![0.0; ncoef]);
        for (row, &t) in t_grid.iter().enumerate() {
            kind.eval((t - t0) / span, &mut v, &mut d, &mut dd);
            for j in 0..ncoef {
                p[(row, j)] = v[j];
                pdot[(row, j)] = d[j] / span;
                pddot[(row, j)] = dd[j] / (span * span);
            }
        }
        Ok(Self {
            kind,
            n_p,
            degree,
            t0,
            tf,
            t_grid,
            p,
            pdot,
            pddot,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficients per axis.
    pub fn ncoef(&self) -> usize {
        self.degree + 1
    }

    /// Total decision variables, `3 * (degree + 1)`.
    pub fn n_v(&self) -> usize {
        AXES * self.ncoef()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn horizon(&self) -> f64 {
        self.tf - self.t0
    }

    /// Uniform spacing of the time grid.
    pub fn dt(&self) -> f64 {
        self.horizon() / (self.n_p - 1) as f64
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn pdot(&self) -> &DMatrix<f64> {
        &self.pdot
    }

    pub fn pddot(&self) -> &DMatrix<f64> {
        &self.pddot
    }

    /// Basis rows (value, first and second derivative) at an arbitrary time.
    /// Times outside the horizon extrapolate the polynomial.
    pub fn rows_at(&self, t: f64) -> [Vec<f64>; 3] {
        let span = self.horizon();
        let n = self.ncoef();
        let (mut v, mut d, mut dd) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        self.kind.eval((t - self.t0) / span, &mut v, &mut d, &mut dd);
        d.iter_mut().for_each(|x| *x /= span);
        dd.iter_mut().for_each(|x| *x /= span * span);
        [v, d, dd]
    }
}

/// Stacked polynomial coefficients `[c_x; c_y; c_z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    coeffs: Vec<f64>,
}

impl Trajectory {
    pub fn new(coeffs: Vec<f64>, basis: &BasisSet) -> Result<Self> {
        if coeffs.len() != basis.n_v() {
            return Err(Error::DimensionMismatch {
                context: "trajectory coefficients",
                expected: basis.n_v(),
                got: coeffs.len(),
            });
        }
        Ok(Self { coeffs })
    }

    pub fn from_vector(v: &DVector<f64>, basis: &BasisSet) -> Result<Self> {
        Self::new(v.as_slice().to_vec(), basis)
    }

    pub(crate) fn from_raw(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(basis: &BasisSet) -> Self {
        Self {
            coeffs: vec![0.0; basis.n_v()],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coeffs)
    }

    /// Coefficients of one axis.
    pub fn axis(&self, axis: usize) -> &[f64] {
        let n = self.coeffs.len() / AXES;
        &self.coeffs[axis * n..(axis + 1) * n]
    }

    /// Position, velocity and acceleration at an arbitrary time.
    pub fn state_at(&self, basis: &BasisSet, t: f64) -> [[f64; 3]; 3] {
        let rows = basis.rows_at(t);
        let mut out = [[0.0; 3]; 3];
        for (level, row) in rows.iter().enumerate() {
            for axis in 0..AXES {
                out[level][axis] = dot(row, self.axis(axis));
            }
        }
        out
    }
}

/// Sampled positions, velocities and accelerations, each `n_p x 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub pos: DMatrix<f64>,
    pub vel: DMatrix<f64>,
    pub acc: DMatrix<f64>,
}

impl Kinematics {
    pub fn n_p(&self) -> usize {
        self.pos.nrows()
    }

    pub fn pos_at(&self, t: usize) -> [f64; 3] {
        [self.pos[(t, 0)], self.pos[(t, 1)], self.pos[(t, 2)]]
    }

    pub fn vel_at(&self, t: usize) -> [f64; 3] {
        [self.vel[(t, 0)], self.vel[(t, 1)], self.vel[(t, 2)]]
    }

    pub fn acc_at(&self, t: usize) -> [f64; 3] {
        [self.acc[(t, 0)], self.acc[(t, 1)], self.acc[(t, 2)]]
    }
}

pub fn evaluate(traj: &Trajectory, basis: &BasisSet) -> Result<Kinematics> {
    if traj.coeffs.len() != basis.n_v() {
        return Err(Error::DimensionMismatch {
            context: "evaluate",
            expected: basis.n_v(),
            got: traj.coeffs.len(),
        });
    }
    Ok(evaluate_slice(&traj.coeffs, basis))
}

/// `evaluate` on raw stacked coefficients; the caller guarantees length `n_v`.
pub(crate) fn evaluate_slice(coeffs: &[f64], basis: &BasisSet) -> Kinematics {
    let n_p = basis.n_p();
    let mut pos = DMatrix::zeros(n_p, AXES);
    let mut vel = DMatrix::zeros(n_p, AXES);
    let mut acc = DMatrix::zeros(n_p, AXES);
    eval_into(coeffs, basis, &mut pos, &mut vel, &mut acc);
    Kinematics { pos, vel, acc }
}

pub(crate) fn eval_into(
    coeffs: &[f64],
    basis: &BasisSet,
    pos: &mut DMatrix<f64>,
    vel: &mut DMatrix<f64>,
    acc: &mut DMatrix<f64>,
) {
    let n = basis.ncoef();
    for axis in 0..AXES {
        let c = &coeffs[axis * n..(axis + 1) * n];
        matvec_into(basis.p(), c, pos.column_mut(axis).as_mut_slice());
        matvec_into(basis.pdot(), c, vel.column_mut(axis).as_mut_slice());
        matvec_into(basis.pddot(), c, acc.column_mut(axis).as_mut_slice());
    }
}

fn matvec_into(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for (o, &mij) in out.iter_mut().zip(m.column(j).iter()) {
            *o += mij * xj;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Position, velocity and acceleration of the robot at the start of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StartState {
    pub pos: [f64; 3],
    pub vel: [f64; 3],
    pub acc: [f64; 3],
}

impl StartState {
    pub fn at_rest(pos: [f64; 3]) -> Self {
        Self {
            pos,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryConstraints {
    pub a: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub q_levels: [usize; 3],
}

impl BoundaryConstraints {
    /// Block-diagonal system with rows `[P_0; Pdot_0; Pddot_0; P_-1]` per axis.
    pub fn new(basis: &BasisSet, start: &StartState, goal: [f64; 3]) -> Result<Self> {
        let n = basis.ncoef();
        let rows = AXES * BOUNDARY_ROWS_PER_AXIS;
        let mut a = DMatrix::zeros(rows, basis.n_v());
        let mut b_eq = DVector::zeros(rows);
        let last = basis.n_p() - 1;
        for axis in 0..AXES {
            let r0 = axis * BOUNDARY_ROWS_PER_AXIS;
            let c0 = axis * n;
            for j in 0..n {
                a[(r0, c0 + j)] = basis.p()[(0, j)];
                a[(r0 + 1, c0 + j)] = basis.pdot()[(0, j)];
                a[(r0 + 2, c0 + j)] = basis.pddot()[(0, j)];
                a[(r0 + 3, c0 + j)] = basis.p()[(last, j)];
            }
            b_eq[r0] = start.pos[axis];
            b_eq[r0 + 1] = start.vel[axis];
            b_eq[r0 + 2] = start.acc[axis];
            b_eq[r0 + 3] = goal[axis];
        }
        let rank = linalg::rank(&a, 1e-10);
        if rank < rows {
            return Err(Error::RankDeficientBoundary {
                rank,
                rows,
                degree: basis.degree(),
            });
        }
        Ok(Self {
            a,
            b_eq,
            q_levels: BOUNDARY_LEVELS,
        })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// `max |A xi - b_eq|`.
    pub fn violation(&self, coeffs: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.a.nrows() {
            let mut acc = -self.b_eq[r];
            for (c, &x) in coeffs.iter().enumerate() {
                acc += self.a[(r, c)] * x;
            }
            worst = worst.max(acc.abs());
        }
        worst
    }

    /// Minimum-norm solution of `A xi = b`.
    pub fn fit_min_norm(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let aat = &self.a * self.a.transpose();
        let y = aat.lu().solve(b).ok_or(Error::SingularKkt {
            size: self.a.nrows(),
            rank: linalg::rank(&self.a, 1e-10),
        })?;
        Ok(self.a.transpose() * y)
    }
}

/// Least-squares fit of sampled target positions (`n_p x 3`) subject to the
/// boundary equalities.
pub fn fit_positions(basis: &BasisSet, bc: &BoundaryConstraints, targets: &DMatrix<f64>) -> Result<Trajectory> {
    if targets.nrows() != basis.n_p() || targets.ncols() != AXES {
        return Err(Error::DimensionMismatch {
            context: "fit targets",
            expected: basis.n_p(),
            got: targets.nrows(),
        });
    }
    let n = basis.ncoef();
    let nv = basis.n_v();
    let ptp = basis.p().transpose() * basis.p();
    let mut h = DMatrix::zeros(nv, nv);
    let mut g = DVector::zeros(nv);
    for axis in 0..AXES {
        h.view_mut((axis * n, axis * n), (n, n)).copy_from(&ptp);
        let rhs = basis.p().transpose() * targets.column(axis);
        g.rows_mut(axis * n, n).copy_from(&rhs);
    }
    let (x, _) = linalg::solve_eq_qp(&h, &g, &bc.a, &bc.b_eq)?;
    Trajectory::from_vector(&x, basis)
}

/// Straight start-to-goal line sampled on the grid, uniform in time.
pub fn straight_line_targets(basis: &BasisSet, start: [f64; 3], goal: [f64; 3]) -> DMatrix<f64> {
    line_targets(basis, start, goal, |s| s)
}

/// Samples of the start-to-goal segment traversed with progress `profile(s)`,
/// `s` the normalized time.
pub fn line_targets<F: Fn(f64) -> f64>(basis: &BasisSet, start: [f64; 3], goal: [f64; 3], profile: F) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(basis.n_p(), AXES);
    let span = basis.horizon();
    for (row, &t) in basis.t_grid().iter().enumerate() {
        let u = profile((t - basis.t0()) / span);
        for axis in 0..AXES {
            out[(row, axis)] = start[axis] + (goal[axis] - start[axis]) * u;
        }
    }
    out
}

/// Quintic rest-to-rest progress `10s^3 - 15s^4 + 6s^5`.
pub fn smooth_step(s: f64) -> f64 {
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}
