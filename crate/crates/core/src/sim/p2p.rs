//! Single-shot point-to-point planning in a known world.

use serde::{Deserialize, Serialize};

use crate::basis::{evaluate, BasisKind, BasisSet, Kinematics, StartState, Trajectory};
use crate::costs::{self, CostWeights};
use crate::error::{Error, Result};
use crate::polar::{self, Limits, Obstacle};
use crate::projection::ProjectionConfig;
use crate::sampler::{self, OptimizeResult, Problem, SamplerConfig};

use super::env::Environment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Planner {
    #[default]
    Priest,
    Dpriest,
    Cem,
}

impl Planner {
    pub fn name(self) -> &'static str {
        match self {
            Planner::Priest => "priest",
            Planner::Dpriest => "dpriest",
            Planner::Cem => "cem",
        }
    }
}

impl std::str::FromStr for Planner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "priest" => Ok(Planner::Priest),
            "dpriest" => Ok(Planner::Dpriest),
            "cem" => Ok(Planner::Cem),
            other => Err(Error::InvalidConfig(format!("unknown planner '{other}'"))),
        }
    }
}

/// Settings for one-shot planning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    pub basis: BasisKind,
    pub horizon: f64,
    pub n_p: usize,
    pub degree: usize,
    pub v_max: f64,
    pub a_max: f64,
    /// Added to every obstacle semi-axis before planning.
    pub inflate: f64,
    /// Largest tolerated penetration depth (m) and relative limit excess
    /// for a plan to count as feasible.
    pub success_tol: f64,
    pub sampler: SamplerConfig,
    pub projection: ProjectionConfig,
    pub weights: CostWeights,
    /// Number of distributions used by the decentralized planner.
    pub dpriest_dists: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            basis: BasisKind::Chebyshev,
            horizon: 15.0,
            n_p: 50,
            degree: 10,
            v_max: 2.5,
            a_max: 2.5,
            inflate: 0.03,
            success_tol: 1e-2,
            sampler: SamplerConfig::default(),
            projection: ProjectionConfig::default(),
            weights: CostWeights::point_to_point(),
            dpriest_dists: 2,
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.v_max > 0.0 && self.a_max > 0.0) {
            return bad("v_max and a_max must be positive".into());
        }
        if !(self.inflate >= 0.0 && self.success_tol >= 0.0) {
            return bad("inflate and success_tol must be >= 0".into());
        }
        if self.dpriest_dists == 0 || !self.sampler.batch.is_multiple_of(self.dpriest_dists) {
            return bad(format!(
                "dpriest_dists {} must divide the batch {}",
                self.dpriest_dists, self.sampler.batch
            ));
        }
        self.basis()?;
        self.sampler.validate()?;
        self.projection.validate()?;
        self.weights.validate()
    }

    pub fn basis(&self) -> Result<BasisSet> {
        BasisSet::with_kind(self.basis, self.n_p, self.degree, 0.0, self.horizon)
    }

    /// Problem for a world at rest at its start position.
    pub fn problem(&self, env: &Environment) -> Result<Problem> {
        let basis = self.basis()?;
        let obstacles = env.obstacles(&basis, 0.0, self.inflate)?;
        Ok(Problem {
            basis,
            start: StartState::at_rest(env.start),
            goal: env.goal,
            obstacles,
            limits: env.limits(self.v_max, self.a_max),
            weights: self.weights,
            planar: env.planar,
            initial_mean: None,
        })
    }
}

pub fn optimize(problem: &Problem, planner: Planner, cfg: &PlanConfig, seed: u64) -> Result<OptimizeResult> {
    let mut sc = SamplerConfig { seed, ..cfg.sampler };
    match planner {
        Planner::Priest => sampler::priest_optimize(problem, &sc, &cfg.projection),
        Planner::Dpriest => {
            sc.n_dists = cfg.dpriest_dists;
            sampler::dpriest_optimize(problem, &sc, &cfg.projection)
        }
        Planner::Cem => sampler::cem_baseline_optimize(problem, &sc),
    }
}

/// Worst violations of a trajectory evaluated on the planning grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    /// Deepest penetration into any obstacle, in meters.
    pub penetration: f64,
    /// Largest speed above the limit, relative to the limit.
    pub speed: f64,
    pub acceleration: f64,
    /// Largest excursion outside the workspace box, in meters.
    pub bounds: f64,
}

impl Violations {
    pub fn max(&self) -> f64 {
        self.penetration.max(self.speed).max(self.acceleration).max(self.bounds)
    }
}

/// Direct constraint check, independent of the polar reformulation.
pub fn violations(kin: &Kinematics, obstacles: &[Obstacle], limits: &Limits) -> Violations {
    let mut v = Violations {
        penetration: 0.0,
        speed: 0.0,
        acceleration: 0.0,
        bounds: 0.0,
    };
    let norm = |x: [f64; 3]| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    for t in 0..kin.n_p() {
        let p = kin.pos_at(t);
        for o in obstacles {
            let c = o.centers()[t];
            let q = [(p[0] - c[0]) / o.a(), (p[1] - c[1]) / o.a(), (p[2] - c[2]) / o.b()];
            let depth = (1.0 - norm(q)) * o.a().min(o.b());
            v.penetration = v.penetration.max(depth);
        }
        v.speed = v.speed.max(norm(kin.vel_at(t)) / limits.v_max - 1.0);
        v.acceleration = v.acceleration.max(norm(kin.acc_at(t)) / limits.a_max - 1.0);
        for k in 0..3 {
            v.bounds = v.bounds.max(limits.s_min[k] - p[k]).max(p[k] - limits.s_max[k]);
        }
    }
    v
}

/// Outcome of one planning trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub success: bool,
    pub residual: f64,
    pub cost: f64,
    pub smoothness: f64,
    pub max_acceleration: f64,
    pub violations: Violations,
    pub compute_time: f64,
    pub travel_time: f64,
    pub max_eq_violation: f64,
}

/// Judge the returned trajectory against the true (uninflated) obstacles.
pub fn assess(
    traj: &Trajectory,
    problem: &Problem,
    env: &Environment,
    cfg: &PlanConfig,
    result: &OptimizeResult,
) -> Result<PlanOutcome> {
    let basis = &problem.basis;
    let kin = evaluate(traj, basis)?;
    let truth = env.obstacles(basis, 0.0, 0.0)?;
    let residual = polar::residual_of(&kin, &truth, &problem.limits);
    let viol = violations(&kin, &truth, &problem.limits);
    let max_acceleration = (0..kin.n_p())
        .map(|t| {
            let a = kin.acc_at(t);
            (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
        })
        .fold(0.0, f64::max);
    Ok(PlanOutcome {
        success: viol.max() <= cfg.success_tol,
        residual,
        cost: result.best_cost,
        smoothness: costs::smoothness_cost(&kin, basis),
        max_acceleration,
        violations: viol,
        compute_time: result.wall_time,
        travel_time: basis.horizon(),
        max_eq_violation: result.max_eq_violation,
    })
}

/// Plan once in `env` and judge the result.
pub fn run_trial(
    env: &Environment,
    planner: Planner,
    cfg: &PlanConfig,
    seed: u64,
) -> Result<(OptimizeResult, PlanOutcome)> {
    let problem = cfg.problem(env)?;
    let result = optimize(&problem, planner, cfg, seed)?;
    let outcome = assess(&result.best, &problem, env, cfg, &result)?;
    Ok((result, outcome))
}
