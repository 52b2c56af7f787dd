//! Projection-guided sampling optimizer, its decentralized variant with
//! several parallel Gaussians, and a plain cross-entropy baseline.
//!
//! One outer iteration:
//! 1. draw samples from each Gaussian over trajectory coefficients,
//! 2. project the whole stacked batch toward the feasible set,
//! 3. per Gaussian, keep the lowest-residual samples, score them by
//!    `c_1 + w_resid * r`, keep the lowest-cost ones,
//! 4. refit each Gaussian with exponentiated-cost weights.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{evaluate_slice, fit_positions, BasisSet, BoundaryConstraints, StartState, Trajectory, AXES};
use crate::clock::Stopwatch;
use crate::costs::{self, CostContext, CostWeights};
use crate::error::{Error, Result};
use crate::polar::{self, Limits, Obstacle};
use crate::projection::{ProjectionConfig, ProjectionWorkspace};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Outer iterations `N`.
    pub iterations: usize,
    /// Samples per iteration `N_b`, across all distributions.
    pub batch: usize,
    /// Lowest-residual samples kept before cost evaluation.
    pub n_proj: usize,
    /// Lowest-cost samples used for the distribution update.
    pub n_elite: usize,
    /// Learning rate `sigma` in `(0, 1]`.
    pub learning_rate: f64,
    /// Temperature `gamma` of the exponentiated cost weights.
    pub temperature: f64,
    /// Number of parallel distributions.
    pub n_dists: usize,
    /// Initial per-coefficient standard deviation as a fraction of the
    /// workspace extent.
    pub init_std_frac: f64,
    pub seed: u64,
    /// Keep per-iteration means and elite samples in the result.
    pub record_history: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 13,
            batch: 110,
            n_proj: 80,
            n_elite: 20,
            learning_rate: 0.8,
            temperature: 1.0,
            n_dists: 1,
            init_std_frac: 0.02,
            seed: 0,
            record_history: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.iterations == 0 || self.batch == 0 || self.n_elite == 0 {
            return bad("iterations, batch and n_elite must be positive".into());
        }
        if !(self.n_elite <= self.n_proj && self.n_proj <= self.batch) {
            return bad(format!(
                "need n_elite <= n_proj <= batch, got {} / {} / {}",
                self.n_elite, self.n_proj, self.batch
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning rate must lie in (0, 1], got {}", self.learning_rate));
        }
        if !(self.temperature > 0.0) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if self.n_dists == 0 || !self.batch.is_multiple_of(self.n_dists) {
            return bad(format!("n_dists ({}) must divide batch ({})", self.n_dists, self.batch));
        }
        if self.n_proj / self.n_dists == 0 || self.n_elite / self.n_dists == 0 {
            return bad("each distribution needs at least one constraint elite and one elite".into());
        }
        if !(self.init_std_frac >= 0.0) {
            return bad("init_std_frac must be >= 0".into());
        }
        Ok(())
    }
}

/// Gaussian over stacked coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl SamplerState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    /// Lower factor `L` with `L L^T = cov`. Falls back to a clamped
    /// eigen-decomposition when the covariance is only semidefinite.
    pub fn sqrt_cov(&self) -> Result<DMatrix<f64>> {
        if let Some(ch) = self.cov.clone().cholesky() {
            return Ok(ch.l());
        }
        if self.cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::CholeskyFailed { jitter: 0.0 });
        }
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let scale = eig.eigenvalues.amax().max(1.0);
        if eig.eigenvalues.iter().any(|&l| l < -1e-8 * scale) {
            return Err(Error::CholeskyFailed { jitter: 0.0 });
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
    }
}

/// `count` i.i.d. draws from `N(mean, cov)`.
pub fn sample_batch(state: &SamplerState, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<DVector<f64>>> {
    let l = state.sqrt_cov()?;
    let n = state.mean.len();
    Ok((0..count)
        .map(|_| {
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            &state.mean + &l * z
        })
        .collect())
}

/// Indices of the `k` smallest values; ties go to the smaller index and NaN
/// sorts last.
pub fn select_lowest(values: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > values.len() {
        return Err(Error::SelectionTooLarge { k, len: values.len() });
    }
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| key(values[a]).total_cmp(&key(values[b])).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// `exp(-(c - min c) / gamma)`; the best sample gets weight exactly 1.
pub fn compute_weights(costs: &[f64], temperature: f64) -> Vec<f64> {
    let delta = costs.iter().copied().fold(f64::INFINITY, f64::min);
    costs.iter().map(|&c| (-(c - delta) / temperature).exp()).collect()
}

/// Weighted refit blended with the previous distribution by `learning_rate`.
/// A vanishing total weight leaves the state untouched.
pub fn update_distribution(
    state: &SamplerState,
    elites: &[&[f64]],
    weights: &[f64],
    learning_rate: f64,
) -> SamplerState {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() || elites.is_empty() {
        log::warn!("distribution update skipped: total elite weight {total}");
        return state.clone();
    }
    let n = state.mean.len();
    let mut wmean = DVector::zeros(n);
    for (x, &w) in elites.iter().zip(weights) {
        for i in 0..n {
            wmean[i] += w * x[i];
        }
    }
    wmean /= total;
    let mean = &state.mean * (1.0 - learning_rate) + wmean * learning_rate;

    let mut wcov = DMatrix::zeros(n, n);
    let mut dev = DVector::zeros(n);
    for (x, &w) in elites.iter().zip(weights) {
        for i in 0..n {
            dev[i] = x[i] - mean[i];
        }
        wcov.ger(w, &dev, &dev, 1.0);
    }
    wcov /= total;
    let cov = &state.cov * (1.0 - learning_rate) + wcov * learning_rate;
    let cov = (&cov + cov.transpose()) * 0.5;
    SamplerState { mean, cov }
}

/// Point-to-point problem: boundary states, obstacle field, limits, costs.
#[derive(Debug, Clone)]
pub struct Problem {
    pub basis: BasisSet,
    pub start: StartState,
    pub goal: [f64; 3],
    pub obstacles: Vec<Obstacle>,
    pub limits: Limits,
    pub weights: CostWeights,
    /// Motion confined to the `z = start.z` plane; the z coefficients are
    /// never perturbed.
    pub planar: bool,
    /// Overrides the straight-line initial mean (single-distribution runs).
    pub initial_mean: Option<Vec<f64>>,
}

impl Problem {
    pub fn boundary(&self) -> Result<BoundaryConstraints> {
        BoundaryConstraints::new(&self.basis, &self.start, self.goal)
    }

    pub fn context(&self) -> CostContext {
        CostContext {
            start: self.start.pos,
            goal: self.goal,
        }
    }

    /// Least-squares fit of the straight start-to-goal line, traversed with a
    /// rest-to-rest quintic progress, that satisfies the boundary conditions.
    pub fn straight_line_mean(&self) -> Result<Trajectory> {
        let bc = self.boundary()?;
        let line = crate::basis::line_targets(&self.basis, self.start.pos, self.goal, crate::basis::smooth_step);
        fit_positions(&self.basis, &bc, &line)
    }

    /// Initial means for `m` distributions: the straight line bent sideways
    /// by offsets spread across the workspace. `m = 1` gives the straight line.
    pub fn initial_means(&self, m: usize) -> Result<Vec<Trajectory>> {
        if m == 1 {
            if let Some(mu) = &self.initial_mean {
                return Ok(vec![Trajectory::new(mu.clone(), &self.basis)?]);
            }
            return Ok(vec![self.straight_line_mean()?]);
        }
        let bc = self.boundary()?;
        let s = self.start.pos;
        let g = self.goal;
        let (dx, dy) = (g[0] - s[0], g[1] - s[1]);
        let len = (dx * dx + dy * dy).sqrt();
        let (nx, ny) = if len > 0.0 { (-dy / len, dx / len) } else { (0.0, 1.0) };
        let l = &self.limits;
        let width = nx.abs() * (l.s_max[0] - l.s_min[0]) + ny.abs() * (l.s_max[1] - l.s_min[1]);
        let spacing = 0.8 * width / m as f64;
        let mut out = Vec::with_capacity(m);
        for j in 0..m {
            let off = (j as f64 - (m as f64 - 1.0) / 2.0) * spacing;
            let mut targets = crate::basis::line_targets(&self.basis, s, g, crate::basis::smooth_step);
            for (row, &t) in self.basis.t_grid().iter().enumerate() {
                let u = (t - self.basis.t0()) / self.basis.horizon();
                let bump = off * (std::f64::consts::PI * u).sin();
                targets[(row, 0)] = (targets[(row, 0)] + nx * bump).clamp(l.s_min[0], l.s_max[0]);
                targets[(row, 1)] = (targets[(row, 1)] + ny * bump).clamp(l.s_min[1], l.s_max[1]);
            }
            out.push(fit_positions(&self.basis, &bc, &targets)?);
        }
        Ok(out)
    }

    /// Diagonal initial covariance scaled by the workspace extent.
    pub fn initial_cov(&self, std_frac: f64) -> DMatrix<f64> {
        let l = &self.limits;
        let extent = (0..AXES)
            .filter(|&k| !(self.planar && k == 2))
            .map(|k| l.s_max[k] - l.s_min[k])
            .fold(0.0f64, f64::max);
        let sd = std_frac * extent;
        let n = self.basis.ncoef();
        DMatrix::from_fn(self.basis.n_v(), self.basis.n_v(), |r, c| {
            if r == c && !(self.planar && r / n == 2) {
                sd * sd
            } else {
                0.0
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        self.weights.validate()?;
        polar::check_obstacles(&self.obstacles, self.basis.n_p())
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiag {
    pub iteration: usize,
    pub min_cost: Vec<f64>,
    pub mean_cost: Vec<f64>,
    pub mean_residual: f64,
    pub min_residual: f64,
    pub elite_count: usize,
    pub best_cost: f64,
    pub elapsed_ms: f64,
}

/// Means and elite samples of one iteration, kept when `record_history` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSnapshot {
    pub means: Vec<Vec<f64>>,
    pub samples: Vec<Vec<f64>>,
    pub projected: Vec<Vec<f64>>,
    pub elites: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub best: Trajectory,
    pub best_cost: f64,
    pub best_residual: f64,
    /// Distribution that produced `best`.
    pub best_dist: usize,
    /// Lowest augmented cost reached by each distribution.
    pub dist_best_costs: Vec<f64>,
    pub diagnostics: Vec<IterationDiag>,
    /// Seconds per outer iteration.
    pub iteration_times: Vec<f64>,
    pub wall_time: f64,
    /// Largest boundary-equality violation of any projected iterate.
    pub max_eq_violation: f64,
    pub final_states: Vec<SamplerState>,
    pub history: Vec<IterationSnapshot>,
}

impl OptimizeResult {
    /// Write the diagnostics stream as JSON lines.
    pub fn write_diagnostics<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for d in &self.diagnostics {
            serde_json::to_writer(&mut w, d)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Projected,
    EqualityOnly,
}

/// Single-distribution projection-guided optimization.
pub fn priest_optimize(problem: &Problem, cfg: &SamplerConfig, proj: &ProjectionConfig) -> Result<OptimizeResult> {
    let cfg = SamplerConfig { n_dists: 1, ..*cfg };
    run(problem, &cfg, proj, Mode::Projected)
}

/// Several Gaussians sharing one projection batch; returns the best solution
/// over all of them.
pub fn dpriest_optimize(problem: &Problem, cfg: &SamplerConfig, proj: &ProjectionConfig) -> Result<OptimizeResult> {
    run(problem, cfg, proj, Mode::Projected)
}

/// Cross-entropy baseline: samples only get the boundary equalities enforced
/// and are ranked by `c_1` plus a weighted direct constraint violation.
pub fn cem_baseline_optimize(problem: &Problem, cfg: &SamplerConfig) -> Result<OptimizeResult> {
    let cfg = SamplerConfig { n_dists: 1, ..*cfg };
    let proj = ProjectionConfig {
        rho: 0.0,
        max_iters: 1,
        ..Default::default()
    };
    run(problem, &cfg, &proj, Mode::EqualityOnly)
}

/// Independent per-distribution random streams split from the master seed.
pub fn dist_rng(seed: u64, dist: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(dist as u64);
    rng
}

struct Scored {
    residual: f64,
    cost: f64,
    eq_violation: f64,
}

fn run(problem: &Problem, cfg: &SamplerConfig, proj: &ProjectionConfig, mode: Mode) -> Result<OptimizeResult> {
    cfg.validate()?;
    proj.validate()?;
    problem.validate()?;
    let total = Stopwatch::start();
    let basis = &problem.basis;
    let bc = problem.boundary()?;
    let obstacles: &[Obstacle] = match mode {
        Mode::Projected => &problem.obstacles,
        Mode::EqualityOnly => &[],
    };
    let ws = ProjectionWorkspace::new(basis, obstacles.len(), &problem.limits, &bc, proj)?;
    let ctx = problem.context();

    let m = cfg.n_dists;
    let per_dist = cfg.batch / m;
    let n_proj = match mode {
        Mode::Projected => cfg.n_proj / m,
        Mode::EqualityOnly => per_dist,
    };
    let n_elite = cfg.n_elite / m;

    let cov0 = problem.initial_cov(cfg.init_std_frac);
    let mut states: Vec<SamplerState> = problem
        .initial_means(m)?
        .into_iter()
        .map(|mu| SamplerState::new(mu.to_vector(), cov0.clone()))
        .collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..m).map(|j| dist_rng(cfg.seed, j)).collect();

    let mut best: Option<(Vec<f64>, f64, f64, usize)> = None;
    let mut dist_best = vec![f64::INFINITY; m];
    let mut diagnostics = Vec::with_capacity(cfg.iterations);
    let mut iteration_times = Vec::with_capacity(cfg.iterations);
    let mut history = Vec::new();
    let mut max_eq = 0.0f64;

    for iteration in 0..cfg.iterations {
        let watch = Stopwatch::start();
        let mut samples: Vec<Vec<f64>> = Vec::with_capacity(cfg.batch);
        for (state, rng) in states.iter().zip(rngs.iter_mut()) {
            for s in sample_batch(state, per_dist, rng)? {
                samples.push(s.as_slice().to_vec());
            }
        }

        let project = |xi: &Vec<f64>| -> (Vec<f64>, Scored) {
            let out = ws.project_one(xi, obstacles, &problem.limits, proj.max_iters);
            let kin = evaluate_slice(&out.xi_bar, basis);
            let (residual, penalty) = match mode {
                Mode::Projected => (out.residual, out.residual),
                Mode::EqualityOnly => {
                    let v = polar::residual_of(&kin, &problem.obstacles, &problem.limits);
                    (v, v)
                }
            };
            let cost = costs::augmented_cost(&kin, penalty, basis, &problem.weights, &ctx);
            (
                out.xi_bar,
                Scored {
                    residual,
                    cost,
                    eq_violation: out.max_eq_violation,
                },
            )
        };
        #[cfg(feature = "parallel")]
        let scored: Vec<(Vec<f64>, Scored)> = samples.par_iter().map(project).collect();
        #[cfg(not(feature = "parallel"))]
        let scored: Vec<(Vec<f64>, Scored)> = samples.iter().map(project).collect();

        if let Some((i, _)) = scored
            .iter()
            .enumerate()
            .find(|(_, (x, s))| !s.cost.is_finite() && x.iter().all(|v| v.is_finite()) && s.residual.is_finite())
        {
            return Err(Error::NonFinite(format!(
                "augmented cost of sample {i} at iteration {iteration}"
            )));
        }

        let mut min_cost = Vec::with_capacity(m);
        let mut mean_cost = Vec::with_capacity(m);
        let mut elite_total = 0;
        let mut snapshot_elites = Vec::new();
        for j in 0..m {
            let range = j * per_dist..(j + 1) * per_dist;
            let slice = &scored[range.clone()];
            let residuals: Vec<f64> = slice.iter().map(|(_, s)| s.residual).collect();
            let constraint_elite = select_lowest(&residuals, n_proj)?;
            let cand_costs: Vec<f64> = constraint_elite.iter().map(|&i| slice[i].1.cost).collect();
            let elite_local = select_lowest(&cand_costs, n_elite)?;
            let elite: Vec<usize> = elite_local.iter().map(|&i| constraint_elite[i]).collect();
            let elite_costs: Vec<f64> = elite.iter().map(|&i| slice[i].1.cost).collect();
            let weights = compute_weights(&elite_costs, cfg.temperature);
            let elite_x: Vec<&[f64]> = elite.iter().map(|&i| slice[i].0.as_slice()).collect();
            states[j] = update_distribution(&states[j], &elite_x, &weights, cfg.learning_rate);

            let top = elite[0];
            let c = slice[top].1.cost;
            if c < dist_best[j] {
                dist_best[j] = c;
            }
            if best.as_ref().is_none_or(|b| c < b.1) {
                best = Some((slice[top].0.clone(), c, slice[top].1.residual, j));
            }
            min_cost.push(c);
            mean_cost.push(elite_costs.iter().sum::<f64>() / elite_costs.len() as f64);
            elite_total += elite.len();
            if cfg.record_history {
                snapshot_elites.extend(elite.iter().map(|&i| slice[i].0.clone()));
            }
        }
        for (_, s) in &scored {
            max_eq = max_eq.max(s.eq_violation);
        }
        let mean_residual = scored.iter().map(|(_, s)| s.residual).sum::<f64>() / scored.len() as f64;
        let min_residual = scored.iter().map(|(_, s)| s.residual).fold(f64::INFINITY, f64::min);
        if cfg.record_history {
            history.push(IterationSnapshot {
                means: states.iter().map(|s| s.mean.as_slice().to_vec()).collect(),
                samples: samples.clone(),
                projected: scored.iter().map(|(x, _)| x.clone()).collect(),
                elites: snapshot_elites,
            });
        }
        let secs = watch.elapsed_secs();
        iteration_times.push(secs);
        diagnostics.push(IterationDiag {
            iteration,
            min_cost,
            mean_cost,
            mean_residual,
            min_residual,
            elite_count: elite_total,
            best_cost: best.as_ref().map_or(f64::INFINITY, |b| b.1),
            elapsed_ms: total.elapsed_secs() * 1e3,
        });
    }

    let (coeffs, best_cost, best_residual, best_dist) =
        best.ok_or_else(|| Error::NonFinite("no elite sample was produced".into()))?;
    Ok(OptimizeResult {
        best: Trajectory::new(coeffs, basis)?,
        best_cost,
        best_residual,
        best_dist,
        dist_best_costs: dist_best,
        diagnostics,
        iteration_times,
        wall_time: total.elapsed_secs(),
        max_eq_violation: max_eq,
        final_states: states,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn zero_cov_samples_equal_mean() {
        let mu = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let s = SamplerState::new(mu.clone(), DMatrix::zeros(3, 3));
        let mut rng = dist_rng(1, 0);
        for x in sample_batch(&s, 5, &mut rng).unwrap() {
            assert_eq!(x, mu);
        }
    }

    #[test]
    fn sample_mean_converges() {
        let n = 4;
        let mu = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.0]);
        let s = SamplerState::new(mu.clone(), DMatrix::identity(n, n));
        let mut rng = dist_rng(7, 0);
        let xs = sample_batch(&s, 100_000, &mut rng).unwrap();
        let mean = xs.iter().fold(DVector::zeros(n), |acc, x| acc + x) / xs.len() as f64;
        assert!((mean - mu).amax() < 0.05);
    }

    #[test]
    fn same_seed_same_batch() {
        let s = SamplerState::new(DVector::zeros(3), DMatrix::identity(3, 3));
        let a = sample_batch(&s, 10, &mut dist_rng(3, 0)).unwrap();
        let b = sample_batch(&s, 10, &mut dist_rng(3, 0)).unwrap();
        assert_eq!(a, b);
        let c = sample_batch(&s, 10, &mut dist_rng(3, 1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn select_lowest_examples() {
        let mut got = select_lowest(&[3.0, 1.0, 2.0], 2).unwrap();
        got.sort();
        assert_eq!(got, vec![1, 2]);
        assert_eq!(select_lowest(&[5.0; 4], 2).unwrap(), vec![0, 1]);
        assert!(select_lowest(&[1.0], 2).is_err());
        assert_eq!(select_lowest(&[f64::NAN, 1.0], 1).unwrap(), vec![1]);
    }

    #[test]
    fn select_lowest_matches_sort() {
        let mut rng = dist_rng(9, 0);
        let v: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let got = select_lowest(&v, 37).unwrap();
        for (i, &ix) in got.iter().enumerate() {
            assert_eq!(v[ix], sorted[i]);
        }
    }

    #[test]
    fn weight_examples() {
        assert_eq!(compute_weights(&[4.2], 1.0), vec![1.0]);
        assert_eq!(compute_weights(&[2.0; 3], 0.5), vec![1.0; 3]);
        let c = [1.0, 2.5, 0.3, 4.0];
        let shifted: Vec<f64> = c.iter().map(|v| v + 7.3).collect();
        let w1 = compute_weights(&c, 0.7);
        let w2 = compute_weights(&shifted, 0.7);
        for (a, b) in w1.iter().zip(&w2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(w1.iter().cloned().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn sigma_zero_and_one() {
        let s = SamplerState::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::identity(2, 2));
        let e = [0.0, 5.0];
        let same = update_distribution(&s, &[&e], &[1.0], 1e-300);
        assert_abs_diff_eq!((same.mean - &s.mean).amax(), 0.0, epsilon = 1e-12);
        let collapsed = update_distribution(&s, &[&e], &[1.0], 1.0);
        assert_eq!(collapsed.mean.as_slice(), &e);
        assert!(collapsed.cov.iter().all(|v| *v == 0.0));
        let zero_w = update_distribution(&s, &[&e], &[0.0], 0.5);
        assert_eq!(zero_w, s);
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        let bad = SamplerConfig {
            n_dists: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            n_elite: 90,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
