//! Batch projection of sampled trajectories onto the constraint set.
//!
//! Each sample is refined by a fixed number of augmented-Lagrangian sweeps:
//! closed-form polar updates, slack and multiplier updates, then an
//! equality-constrained QP whose solution is an affine map of the sample
//! through a KKT inverse that is built once and shared by every sample.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{eval_into, BasisSet, BoundaryConstraints, Kinematics, Trajectory, AXES};
use crate::error::{Error, Result};
use crate::linalg;
use crate::polar::{self, Limits, Obstacle, PolarConstraintSystem};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    pub rho: f64,
    pub max_iters: usize,
    pub feas_tol: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 15,
            feas_tol: 1e-3,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig(format!("rho must be >= 0, got {}", self.rho)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything about the projection that does not depend on the sample.
#[derive(Debug, Clone)]
pub struct ProjectionWorkspace {
    basis: BasisSet,
    n_o: usize,
    rho: f64,
    /// Inverse of `[[I + rho F^T F, A^T], [A, 0]]`.
    m: DMatrix<f64>,
    ftf: DMatrix<f64>,
    a: DMatrix<f64>,
    b_eq: DVector<f64>,
    tau: Vec<f64>,
}

impl ProjectionWorkspace {
    /// Build from an explicit constraint system.
    pub fn from_system(
        basis: &BasisSet,
        system: &PolarConstraintSystem,
        bc: &BoundaryConstraints,
        cfg: &ProjectionConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if system.f.ncols() != basis.n_v() || system.n_p != basis.n_p() {
            return Err(Error::DimensionMismatch {
                context: "constraint system vs basis",
                expected: basis.n_v(),
                got: system.f.ncols(),
            });
        }
        let ftf = system.f.transpose() * &system.f;
        Self::assemble(basis, system.n_o, ftf, bc, system.tau.clone(), cfg.rho)
    }

    /// Build from the block structure alone. `F^T F` only depends on the
    /// basis and the obstacle count, so the explicit stacked matrix is never
    /// formed.
    pub fn new(
        basis: &BasisSet,
        n_o: usize,
        limits: &Limits,
        bc: &BoundaryConstraints,
        cfg: &ProjectionConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        limits.validate()?;
        let n = basis.ncoef();
        let ptp = basis.p().transpose() * basis.p();
        let block = &ptp * (n_o as f64 + 2.0)
            + basis.pdot().transpose() * basis.pdot()
            + basis.pddot().transpose() * basis.pddot();
        let mut ftf = DMatrix::zeros(basis.n_v(), basis.n_v());
        for k in 0..AXES {
            ftf.view_mut((k * n, k * n), (n, n)).copy_from(&block);
        }
        Self::assemble(basis, n_o, ftf, bc, polar::compute_tau(limits, basis.n_p()), cfg.rho)
    }

    fn assemble(
        basis: &BasisSet,
        n_o: usize,
        ftf: DMatrix<f64>,
        bc: &BoundaryConstraints,
        tau: Vec<f64>,
        rho: f64,
    ) -> Result<Self> {
        if bc.a.ncols() != basis.n_v() {
            return Err(Error::DimensionMismatch {
                context: "boundary system columns",
                expected: basis.n_v(),
                got: bc.a.ncols(),
            });
        }
        let nv = basis.n_v();
        let h = DMatrix::identity(nv, nv) + &ftf * rho;
        let kkt = linalg::kkt_matrix(&h, &bc.a);
        let size = kkt.nrows();
        let m = kkt.clone().try_inverse().ok_or(Error::SingularKkt {
            size,
            rank: linalg::rank(&kkt, 1e-12),
        })?;
        let check = (&m * &kkt - DMatrix::<f64>::identity(size, size)).amax();
        if !(check <= 1e-8) {
            return Err(Error::SingularKkt {
                size,
                rank: linalg::rank(&kkt, 1e-12),
            });
        }
        Ok(Self {
            basis: basis.clone(),
            n_o,
            rho,
            m,
            ftf,
            a: bc.a.clone(),
            b_eq: bc.b_eq.clone(),
            tau,
        })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn n_o(&self) -> usize {
        self.n_o
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn kkt_inverse(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn ftf(&self) -> &DMatrix<f64> {
        &self.ftf
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn b_eq(&self) -> &DVector<f64> {
        &self.b_eq
    }

    /// The KKT matrix this workspace inverts.
    pub fn kkt(&self) -> DMatrix<f64> {
        let nv = self.basis.n_v();
        let h = DMatrix::identity(nv, nv) + &self.ftf * self.rho;
        linalg::kkt_matrix(&h, &self.a)
    }

    /// Length of the full target vector `e`.
    pub fn e_len(&self) -> usize {
        polar::f_tilde_rows(self.n_o, self.basis.n_p()) + polar::g_rows(self.basis.n_p())
    }

    /// `F^T e` using the block structure of `F`.
    pub fn ft_times(&self, e: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.n_v()];
        self.ft_times_into(e, &mut out);
        out
    }

    fn ft_times_into(&self, e: &[f64], out: &mut [f64]) {
        let b = &self.basis;
        let n_p = b.n_p();
        let n = b.ncoef();
        let n_o = self.n_o;
        let blk = (n_o + 2) * n_p;
        let g0 = AXES * blk;
        let mut w = vec![0.0; n_p];
        for k in 0..AXES {
            let ek = &e[k * blk..(k + 1) * blk];
            let gk = &e[g0 + k * 2 * n_p..g0 + (k + 1) * 2 * n_p];
            for t in 0..n_p {
                let mut s = gk[n_p + t] - gk[t];
                for j in 0..n_o {
                    s += ek[j * n_p + t];
                }
                w[t] = s;
            }
            let ev = &ek[n_o * n_p..(n_o + 1) * n_p];
            let ea = &ek[(n_o + 1) * n_p..];
            let dst = &mut out[k * n..(k + 1) * n];
            for c in 0..n {
                let pc = b.p().column(c);
                let vc = b.pdot().column(c);
                let ac = b.pddot().column(c);
                let mut acc = 0.0;
                for t in 0..n_p {
                    acc += pc[t] * w[t] + vc[t] * ev[t] + ac[t] * ea[t];
                }
                dst[c] = acc;
            }
        }
    }

    /// Solve the equality-constrained QP
    /// `min 1/2|x - xi|^2 + rho/2 |F x - e|^2 - lambda^T x  s.t.  A x = b_eq`.
    /// Returns the minimizer and the equality multipliers.
    pub fn qp_step(&self, xi: &[f64], e: &[f64], lambda: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let nv = self.basis.n_v();
        if xi.len() != nv || lambda.len() != nv {
            return Err(Error::DimensionMismatch {
                context: "qp_step sample",
                expected: nv,
                got: xi.len().min(lambda.len()),
            });
        }
        if e.len() != self.e_len() {
            return Err(Error::DimensionMismatch {
                context: "qp_step e",
                expected: self.e_len(),
                got: e.len(),
            });
        }
        let fte = self.ft_times(e);
        let mut xi_bar = vec![0.0; nv];
        let nu = self.qp_solve(xi, &fte, lambda, &mut xi_bar);
        Ok((xi_bar, nu))
    }

    fn qp_solve(&self, xi: &[f64], fte: &[f64], lambda: &[f64], out: &mut [f64]) -> Vec<f64> {
        let nv = self.basis.n_v();
        let neq = self.b_eq.len();
        let mut eta = vec![0.0; nv + neq];
        for i in 0..nv {
            eta[i] = xi[i] + lambda[i] + self.rho * fte[i];
        }
        eta[nv..].copy_from_slice(self.b_eq.as_slice());
        let mut sol = vec![0.0; nv + neq];
        for (c, &ec) in eta.iter().enumerate() {
            if ec == 0.0 {
                continue;
            }
            for (s, &mrc) in sol.iter_mut().zip(self.m.column(c).iter()) {
                *s += mrc * ec;
            }
        }
        out.copy_from_slice(&sol[..nv]);
        sol[nv..].to_vec()
    }

    /// Multiplier update `lambda -= rho F^T (F xi_bar - e)`.
    fn lambda_update(&self, xi_bar: &[f64], fte: &[f64], lambda: &mut [f64]) {
        let nv = xi_bar.len();
        for r in 0..nv {
            let mut ftfx = 0.0;
            for c in 0..nv {
                ftfx += self.ftf[(r, c)] * xi_bar[c];
            }
            lambda[r] -= self.rho * (ftfx - fte[r]);
        }
    }

    /// `max |A x - b_eq|`.
    pub fn equality_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.a.nrows() {
            let mut acc = -self.b_eq[r];
            for (c, &v) in x.iter().enumerate() {
                acc += self.a[(r, c)] * v;
            }
            worst = worst.max(acc.abs());
        }
        worst
    }

    /// Initial per-sample state: `lambda = 0`, slack fitted to the raw sample.
    pub fn init_state(&self, xi: &[f64]) -> ProjectionState {
        let kin = crate::basis::evaluate_slice(xi, &self.basis);
        let mut slack = vec![0.0; self.tau.len()];
        polar::update_slack(&kin, &self.tau, &mut slack);
        ProjectionState {
            xi_bar: xi.to_vec(),
            lambda: vec![0.0; xi.len()],
            slack,
            trace: Vec::new(),
            max_eq_violation: 0.0,
        }
    }

    /// One augmented-Lagrangian sweep on a single sample: polar updates,
    /// slack, target assembly, multiplier update, QP step. Records the
    /// residual of the incoming iterate in the trace.
    pub fn iterate(
        &self,
        xi: &[f64],
        state: &mut ProjectionState,
        obstacles: &[Obstacle],
        limits: &Limits,
        scratch: &mut Scratch,
    ) {
        eval_into(
            &state.xi_bar,
            &self.basis,
            &mut scratch.kin.pos,
            &mut scratch.kin.vel,
            &mut scratch.kin.acc,
        );
        let kin = &scratch.kin;
        polar::update_slack(kin, &self.tau, &mut state.slack);
        let nt = polar::f_tilde_rows(self.n_o, self.basis.n_p());
        polar::fill_targets(kin, obstacles, limits, &mut scratch.e[..nt]);
        for ((dst, &t), &s) in scratch.e[nt..].iter_mut().zip(&self.tau).zip(&state.slack) {
            *dst = t - s;
        }
        let misfit = polar::f_tilde_misfit_sq(kin, self.n_o, &scratch.e[..nt]).sqrt();
        state.trace.push(misfit + polar::bound_violation(kin, limits));

        self.ft_times_into(&scratch.e, &mut scratch.fte);
        self.lambda_update(&state.xi_bar, &scratch.fte, &mut state.lambda);
        let xi_bar = &mut state.xi_bar;
        self.qp_solve(xi, &scratch.fte, &state.lambda, xi_bar);
        state.max_eq_violation = state.max_eq_violation.max(self.equality_violation(&state.xi_bar));
    }

    pub fn scratch(&self) -> Scratch {
        let n_p = self.basis.n_p();
        Scratch {
            kin: Kinematics {
                pos: DMatrix::zeros(n_p, AXES),
                vel: DMatrix::zeros(n_p, AXES),
                acc: DMatrix::zeros(n_p, AXES),
            },
            e: vec![0.0; self.e_len()],
            fte: vec![0.0; self.basis.n_v()],
        }
    }

    /// Project one sample for `iters` sweeps.
    pub fn project_one(&self, xi: &[f64], obstacles: &[Obstacle], limits: &Limits, iters: usize) -> SampleProjection {
        let mut state = self.init_state(xi);
        let mut scratch = self.scratch();
        for _ in 0..iters {
            self.iterate(xi, &mut state, obstacles, limits, &mut scratch);
            if state.xi_bar.iter().any(|v| !v.is_finite()) {
                let sweeps = state.trace.len();
                return SampleProjection {
                    xi_bar: xi.to_vec(),
                    residual: f64::INFINITY,
                    trace: state.trace,
                    max_eq_violation: state.max_eq_violation,
                    failure: Some(format!("non-finite iterate after {sweeps} sweeps")),
                };
            }
        }
        let kin = crate::basis::evaluate_slice(&state.xi_bar, &self.basis);
        let residual = polar::residual_of(&kin, obstacles, limits);
        SampleProjection {
            xi_bar: state.xi_bar,
            residual,
            trace: state.trace,
            max_eq_violation: state.max_eq_violation,
            failure: None,
        }
    }

    /// Project every sample. Samples are independent, so the result does not
    /// depend on how the work is split across threads.
    pub fn project_batch(
        &self,
        samples: &[Trajectory],
        obstacles: &[Obstacle],
        limits: &Limits,
        cfg: &ProjectionConfig,
    ) -> Result<BatchProjection> {
        polar::check_obstacles(obstacles, self.basis.n_p())?;
        if obstacles.len() != self.n_o {
            return Err(Error::DimensionMismatch {
                context: "obstacle count vs workspace",
                expected: self.n_o,
                got: obstacles.len(),
            });
        }
        for s in samples {
            if s.coeffs().len() != self.basis.n_v() {
                return Err(Error::DimensionMismatch {
                    context: "batch sample",
                    expected: self.basis.n_v(),
                    got: s.coeffs().len(),
                });
            }
        }
        let iters = cfg.max_iters;
        let run = |s: &Trajectory| self.project_one(s.coeffs(), obstacles, limits, iters);
        #[cfg(feature = "parallel")]
        let results: Vec<SampleProjection> = samples.par_iter().map(run).collect();
        #[cfg(not(feature = "parallel"))]
        let results: Vec<SampleProjection> = samples.iter().map(run).collect();
        Ok(BatchProjection::from_samples(results))
    }
}

/// Reusable buffers for one worker.
#[derive(Debug, Clone)]
pub struct Scratch {
    kin: Kinematics,
    e: Vec<f64>,
    fte: Vec<f64>,
}

/// Per-sample iterate, multipliers and slack.
#[derive(Debug, Clone)]
pub struct ProjectionState {
    pub xi_bar: Vec<f64>,
    pub lambda: Vec<f64>,
    pub slack: Vec<f64>,
    /// Residual of the iterate entering each sweep.
    pub trace: Vec<f64>,
    pub max_eq_violation: f64,
}

#[derive(Debug, Clone)]
pub struct SampleProjection {
    pub xi_bar: Vec<f64>,
    pub residual: f64,
    pub trace: Vec<f64>,
    pub max_eq_violation: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BatchProjection {
    pub projected: Vec<Trajectory>,
    pub residuals: Vec<f64>,
    pub traces: Vec<Vec<f64>>,
    /// Largest `|A xi_bar - b_eq|` seen at any sweep, per sample.
    pub max_eq_violation: Vec<f64>,
    /// Samples that hit a non-finite value, with a diagnostic.
    pub failures: Vec<(usize, String)>,
}

impl BatchProjection {
    fn from_samples(results: Vec<SampleProjection>) -> Self {
        let mut out = Self {
            projected: Vec::with_capacity(results.len()),
            residuals: Vec::with_capacity(results.len()),
            traces: Vec::with_capacity(results.len()),
            max_eq_violation: Vec::with_capacity(results.len()),
            failures: Vec::new(),
        };
        for (i, r) in results.into_iter().enumerate() {
            if let Some(msg) = r.failure {
                out.failures.push((i, msg));
            }
            out.projected.push(Trajectory::from_raw(r.xi_bar));
            out.residuals.push(r.residual);
            out.traces.push(r.trace);
            out.max_eq_violation.push(r.max_eq_violation);
        }
        out
    }

    /// Mean residual over samples at each sweep.
    pub fn mean_trace(&self) -> Vec<f64> {
        let iters = self.traces.iter().map(Vec::len).max().unwrap_or(0);
        (0..iters)
            .map(|k| {
                let vals: Vec<f64> = self.traces.iter().filter_map(|t| t.get(k)).copied().collect();
                vals.iter().sum::<f64>() / vals.len().max(1) as f64
            })
            .collect()
    }

    /// CSV with columns `iteration,sample,residual`.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,sample,residual")?;
        for (i, trace) in self.traces.iter().enumerate() {
            for (k, r) in trace.iter().enumerate() {
                writeln!(w, "{k},{i},{r:.9e}")?;
            }
        }
        Ok(())
    }
}

/// Convenience wrapper: build the workspace and project a batch.
pub fn project_batch(
    samples: &[Trajectory],
    basis: &BasisSet,
    bc: &BoundaryConstraints,
    obstacles: &[Obstacle],
    limits: &Limits,
    cfg: &ProjectionConfig,
) -> Result<BatchProjection> {
    let ws = ProjectionWorkspace::new(basis, obstacles.len(), limits, bc, cfg)?;
    ws.project_batch(samples, obstacles, limits, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::StartState;
    use approx::assert_abs_diff_eq;

    fn setup(n_o: usize) -> (BasisSet, BoundaryConstraints, Vec<Obstacle>, Limits) {
        let b = BasisSet::new(30, 8, 0.0, 10.0).unwrap();
        let bc = BoundaryConstraints::new(&b, &StartState::at_rest([0.0, 0.0, 0.0]), [10.0, 0.0, 0.0]).unwrap();
        let obs = (0..n_o)
            .map(|j| Obstacle::fixed([2.0 + j as f64, 3.0, 0.0], 0.5, 0.5, 30).unwrap())
            .collect();
        let l = Limits {
            v_max: 3.0,
            a_max: 3.0,
            s_min: [-5.0, -5.0, -1.0],
            s_max: [15.0, 5.0, 1.0],
        };
        (b, bc, obs, l)
    }

    #[test]
    fn structured_and_explicit_workspaces_agree() {
        let (b, bc, obs, l) = setup(3);
        let cfg = ProjectionConfig::default();
        let sys = PolarConstraintSystem::new(&b, &obs, &l).unwrap();
        let w1 = ProjectionWorkspace::from_system(&b, &sys, &bc, &cfg).unwrap();
        let w2 = ProjectionWorkspace::new(&b, 3, &l, &bc, &cfg).unwrap();
        assert!((w1.ftf() - w2.ftf()).amax() < 1e-9 * w1.ftf().amax());
        let e: Vec<f64> = (0..w1.e_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let direct = sys.f.transpose() * DVector::from_column_slice(&e);
        let structured = w2.ft_times(&e);
        for (a, b) in direct.iter().zip(&structured) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn kkt_inverse_times_kkt_is_identity() {
        let (b, bc, _, l) = setup(5);
        let ws = ProjectionWorkspace::new(&b, 5, &l, &bc, &ProjectionConfig::default()).unwrap();
        let k = ws.kkt();
        let n = k.nrows();
        assert!((ws.kkt_inverse() * k - DMatrix::<f64>::identity(n, n)).amax() <= 1e-8);
    }

    #[test]
    fn rho_zero_is_euclidean_projection_onto_equalities() {
        let (b, bc, _, l) = setup(0);
        let cfg = ProjectionConfig {
            rho: 0.0,
            ..Default::default()
        };
        let ws = ProjectionWorkspace::new(&b, 0, &l, &bc, &cfg).unwrap();
        let xi: Vec<f64> = (0..b.n_v()).map(|i| (i as f64).cos()).collect();
        let (x, _) = ws.qp_step(&xi, &vec![0.0; ws.e_len()], &vec![0.0; b.n_v()]).unwrap();
        // analytic projection: xi - A^T (A A^T)^-1 (A xi - b)
        let xv = DVector::from_column_slice(&xi);
        let r = &bc.a * &xv - &bc.b_eq;
        let corr = bc.a.transpose() * (&bc.a * bc.a.transpose()).lu().solve(&r).unwrap();
        let expected = xv - corr;
        for (a, e) in x.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, e, epsilon = 1e-8);
        }
    }

    #[test]
    fn feasible_fixed_point() {
        let (b, bc, obs, mut l) = setup(2);
        l.a_max = 8.0;
        let ws = ProjectionWorkspace::new(&b, 2, &l, &bc, &ProjectionConfig::default()).unwrap();
        let line = crate::basis::straight_line_targets(&b, [0.0; 3], [10.0, 0.0, 0.0]);
        let xi = crate::basis::fit_positions(&b, &bc, &line).unwrap();
        let out = ws.project_one(xi.coeffs(), &obs, &l, 15);
        for (a, e) in out.xi_bar.iter().zip(xi.coeffs()) {
            assert_abs_diff_eq!(a, e, epsilon = 1e-6);
        }
        assert!(out.residual <= 1e-3);
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let (b, bc, obs, l) = setup(2);
        let cfg = ProjectionConfig::default();
        let xi = Trajectory::new((0..b.n_v()).map(|i| (i as f64 * 0.3).sin()).collect(), &b).unwrap();
        let out = project_batch(&vec![xi; 6], &b, &bc, &obs, &l, &cfg).unwrap();
        for p in &out.projected[1..] {
            assert_eq!(p.coeffs(), out.projected[0].coeffs());
        }
    }

    #[test]
    fn trace_csv_header() {
        let (b, bc, obs, l) = setup(1);
        let cfg = ProjectionConfig {
            max_iters: 2,
            ..Default::default()
        };
        let xi = Trajectory::zeros(&b);
        let out = project_batch(&[xi], &b, &bc, &obs, &l, &cfg).unwrap();
        let mut buf = Vec::new();
        out.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,sample,residual\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn config_validation() {
        assert!(ProjectionConfig {
            max_iters: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
