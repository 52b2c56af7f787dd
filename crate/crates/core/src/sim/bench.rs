//! Benchmark suites, aggregate metrics and the timing study.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::BoundaryConstraints;
use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::linalg::linear_fit;
use crate::polar::Obstacle;
use crate::projection::ProjectionWorkspace;
use crate::sampler::{self, SamplerConfig};

use super::env::{
    generate_env_2d, generate_env_3d, generate_env_big_obstacle, generate_env_dynamic, BigObstacle, Clutter2d,
    Clutter3d, Corridor, Environment, PLANAR_Z_AXIS,
};
use super::mpc::{run_mpc_episode, MpcConfig};
use super::p2p::{run_trial, PlanConfig, Planner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Static2d,
    Static3d,
    Dynamic,
    Point2point,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Static2d, Suite::Static3d, Suite::Dynamic, Suite::Point2point];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Static2d => "static2d",
            Suite::Static3d => "static3d",
            Suite::Dynamic => "dynamic",
            Suite::Point2point => "point2point",
        }
    }

    /// Default number of trials.
    pub fn default_trials(self) -> usize {
        match self {
            Suite::Static2d => 117,
            Suite::Static3d => 100,
            Suite::Dynamic => 30,
            Suite::Point2point => 100,
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite '{s}'")))
    }
}

/// World generators and planner settings of every suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub clutter2d: Clutter2d,
    pub clutter3d: Clutter3d,
    pub corridor: Corridor,
    pub big_obstacle: BigObstacle,
    /// Single-shot planning in the 2D and 3D clutter suites.
    pub plan: PlanConfig,
    /// Single-shot planning around the large obstacle.
    pub big_plan: PlanConfig,
    pub mpc: MpcConfig,
    /// Largest polar residual accepted in the large-obstacle suite.
    pub big_residual_tol: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            clutter2d: Clutter2d::default(),
            clutter3d: Clutter3d::default(),
            corridor: Corridor::default(),
            big_obstacle: BigObstacle::default(),
            plan: PlanConfig::default(),
            big_plan: PlanConfig {
                v_max: 2.8,
                a_max: 3.3,
                ..PlanConfig::default()
            },
            mpc: MpcConfig::default(),
            big_residual_tol: 1e-2,
        }
    }
}

impl BenchConfig {
    pub fn world(&self, suite: Suite, seed: u64) -> Result<Environment> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match suite {
            Suite::Static2d => generate_env_2d(&self.clutter2d, &mut rng),
            Suite::Static3d => generate_env_3d(&self.clutter3d, &mut rng),
            Suite::Dynamic => generate_env_dynamic(&self.corridor, &mut rng),
            Suite::Point2point => generate_env_big_obstacle(&self.big_obstacle, &mut rng),
        }
    }
}

/// Outcome of one trial of one planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub suite: Suite,
    pub planner: Planner,
    pub seed: u64,
    pub success: bool,
    pub collision: bool,
    pub travel_time: Option<f64>,
    /// One entry per optimizer call.
    pub compute_times: Vec<f64>,
    pub max_acceleration: f64,
    /// Single-shot suites only.
    pub residual: Option<f64>,
    pub error: Option<String>,
}

pub fn run_one(suite: Suite, planner: Planner, seed: u64, cfg: &BenchConfig) -> Result<TrialRecord> {
    let env = cfg.world(suite, seed)?;
    let base = TrialRecord {
        suite,
        planner,
        seed,
        success: false,
        collision: false,
        travel_time: None,
        compute_times: Vec::new(),
        max_acceleration: 0.0,
        residual: None,
        error: None,
    };
    match suite {
        Suite::Dynamic => {
            let ep = run_mpc_episode(&env, planner, &cfg.mpc, seed)?;
            Ok(TrialRecord {
                success: ep.success,
                collision: ep.collision,
                travel_time: ep.travel_time,
                compute_times: ep.compute_times,
                max_acceleration: ep.max_acceleration,
                error: ep.error,
                ..base
            })
        }
        _ => {
            let plan = if suite == Suite::Point2point {
                &cfg.big_plan
            } else {
                &cfg.plan
            };
            let (_, out) = run_trial(&env, planner, plan, seed)?;
            let mut success = out.success;
            if suite == Suite::Point2point {
                success &= out.residual <= cfg.big_residual_tol;
            }
            Ok(TrialRecord {
                success,
                collision: out.violations.penetration > plan.success_tol,
                travel_time: success.then_some(out.travel_time),
                compute_times: vec![out.compute_time],
                max_acceleration: out.max_acceleration,
                residual: Some(out.residual),
                ..base
            })
        }
    }
}

/// Mean, min and max; `None` for an empty sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let (mut n, mut sum, mut min, mut max) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            n += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        (n > 0).then(|| Stats {
            mean: sum / n as f64,
            min,
            max,
        })
    }
}

/// Aggregates of one planner over one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub suite: Suite,
    pub planner: Planner,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Over successful trials.
    pub travel_time: Option<Stats>,
    /// Over every optimizer call.
    pub compute_time: Option<Stats>,
    /// Per-trial peak acceleration, over successful trials.
    pub acceleration: Option<Stats>,
}

impl MetricsTable {
    pub fn from_records(suite: Suite, planner: Planner, records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.success).collect();
        Self {
            suite,
            planner,
            trials: records.len(),
            successes: ok.len(),
            success_rate: if records.is_empty() {
                0.0
            } else {
                ok.len() as f64 / records.len() as f64
            },
            travel_time: Stats::of(ok.iter().filter_map(|r| r.travel_time)),
            compute_time: Stats::of(records.iter().flat_map(|r| r.compute_times.iter().copied())),
            acceleration: Stats::of(ok.iter().map(|r| r.max_acceleration)),
        }
    }

    pub const CSV_HEADER: &'static str = "suite,planner,trials,success_rate,travel_mean,travel_min,travel_max,compute_mean,compute_min,compute_max,acc_mean,acc_max";

    pub fn csv_row(&self) -> String {
        let f = |s: Option<Stats>, pick: fn(&Stats) -> f64| s.map(|s| format!("{:.6}", pick(&s))).unwrap_or_default();
        format!(
            "{},{},{},{:.4},{},{},{},{},{},{},{},{}",
            self.suite.name(),
            self.planner.name(),
            self.trials,
            self.success_rate,
            f(self.travel_time, |s| s.mean),
            f(self.travel_time, |s| s.min),
            f(self.travel_time, |s| s.max),
            f(self.compute_time, |s| s.mean),
            f(self.compute_time, |s| s.min),
            f(self.compute_time, |s| s.max),
            f(self.acceleration, |s| s.mean),
            f(self.acceleration, |s| s.max),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub tables: Vec<MetricsTable>,
    pub records: Vec<TrialRecord>,
}

impl BenchmarkReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", MetricsTable::CSV_HEADER)?;
        for t in &self.tables {
            writeln!(w, "{}", t.csv_row())?;
        }
        Ok(())
    }

    /// One JSON object per trial.
    pub fn write_records<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Run `n_trials` worlds (seeds `first_seed..`) for every planner. Every
/// planner sees the same worlds.
pub fn run_benchmark(
    suite: Suite,
    n_trials: usize,
    first_seed: u64,
    planners: &[Planner],
    cfg: &BenchConfig,
) -> Result<BenchmarkReport> {
    let mut tables = Vec::new();
    let mut records = Vec::new();
    for &planner in planners {
        let seeds: Vec<u64> = (0..n_trials as u64).map(|i| first_seed + i).collect();
        let run = |&seed: &u64| run_one(suite, planner, seed, cfg);
        #[cfg(feature = "parallel")]
        let recs: Vec<TrialRecord> = {
            use rayon::prelude::*;
            seeds.par_iter().map(run).collect::<Result<_>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let recs: Vec<TrialRecord> = seeds.iter().map(run).collect::<Result<_>>()?;
        tables.push(MetricsTable::from_records(suite, planner, &recs));
        records.extend(recs);
    }
    Ok(BenchmarkReport { tables, records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingConfig {
    pub obstacle_counts: Vec<usize>,
    /// Batch size used while varying the obstacle count.
    pub fixed_batch: usize,
    pub batch_sizes: Vec<usize>,
    /// Obstacle count used while varying the batch size.
    pub fixed_obstacles: usize,
    pub dist_counts: Vec<usize>,
    /// Samples per distribution in the decentralized study.
    pub per_dist_batch: usize,
    pub repeats: usize,
    pub seed: u64,
    pub plan: PlanConfig,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            obstacle_counts: vec![8, 16, 32, 64],
            fixed_batch: 110,
            batch_sizes: vec![32, 64, 128, 256],
            fixed_obstacles: 16,
            dist_counts: vec![1, 2, 4, 8],
            per_dist_batch: 40,
            repeats: 5,
            seed: 0,
            plan: PlanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Obstacles,
    Batch,
    Dists,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Obstacles => "obstacles",
            Study::Batch => "batch",
            Study::Dists => "dists",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub study: Study,
    pub x: usize,
    pub repeat: usize,
    /// Seconds per iteration.
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub study: Study,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Fits of the per-point median time against `x`.
    pub fits: Vec<LineFit>,
    pub wall_time: f64,
}

impl ScalingReport {
    pub fn fit(&self, study: Study) -> Option<LineFit> {
        self.fits.iter().copied().find(|f| f.study == study)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "study,x,repeat,seconds")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{:.9}", r.study.name(), r.x, r.repeat, r.seconds)?;
        }
        Ok(())
    }

    /// Median over repeats for every `x` of `study`.
    pub fn medians(&self, study: Study) -> Vec<(usize, f64)> {
        let mut xs: Vec<usize> = self.rows.iter().filter(|r| r.study == study).map(|r| r.x).collect();
        xs.sort_unstable();
        xs.dedup();
        xs.into_iter()
            .map(|x| {
                let mut t: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.study == study && r.x == x)
                    .map(|r| r.seconds)
                    .collect();
                t.sort_by(f64::total_cmp);
                (x, t[t.len() / 2])
            })
            .collect()
    }
}

fn random_obstacles(rng: &mut ChaCha8Rng, n: usize, n_p: usize) -> Result<Vec<Obstacle>> {
    (0..n)
        .map(|_| {
            let c = [rng.random_range(3.0..13.0), rng.random_range(1.0..9.0), 0.0];
            Obstacle::fixed(c, 0.4, PLANAR_Z_AXIS, n_p)
        })
        .collect()
}

/// Seconds for one warm projection sweep over a batch of `n_b` samples.
pub fn time_projection_sweep(n_o: usize, n_b: usize, repeats: usize, plan: &PlanConfig, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = Environment::empty(
        [0.0, 0.0, -1.0],
        [16.0, 10.0, 1.0],
        [1.0, 5.0, 0.0],
        [15.0, 5.0, 0.0],
        true,
    );
    let mut problem = plan.problem(&env)?;
    problem.obstacles = random_obstacles(&mut rng, n_o, problem.basis.n_p())?;
    let bc: BoundaryConstraints = problem.boundary()?;
    let ws = ProjectionWorkspace::new(&problem.basis, n_o, &problem.limits, &bc, &plan.projection)?;
    let state0 = sampler::SamplerState::new(
        problem.straight_line_mean()?.to_vector(),
        problem.initial_cov(plan.sampler.init_std_frac),
    );
    let samples = sampler::sample_batch(&state0, n_b, &mut rng)?;
    let samples: Vec<Vec<f64>> = samples.into_iter().map(|s| s.as_slice().to_vec()).collect();
    let mut states: Vec<_> = samples.iter().map(|s| (ws.init_state(s), ws.scratch())).collect();
    let sweep = |states: &mut Vec<_>| {
        let work =
            |(xi, (st, sc)): (&Vec<f64>, &mut (_, _))| ws.iterate(xi, st, &problem.obstacles, &problem.limits, sc);
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            samples.par_iter().zip(states.par_iter_mut()).for_each(work);
        }
        #[cfg(not(feature = "parallel"))]
        samples.iter().zip(states.iter_mut()).for_each(work);
    };
    sweep(&mut states);
    let mut out = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let clock = Stopwatch::start();
        sweep(&mut states);
        out.push(clock.elapsed_secs());
    }
    Ok(out)
}

/// Seconds per sampler iteration of the decentralized planner with `m`
/// distributions of `per_dist` samples each.
pub fn time_dpriest_iteration(
    m: usize,
    per_dist: usize,
    repeats: usize,
    plan: &PlanConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = Environment::empty(
        [0.0, 0.0, -1.0],
        [16.0, 10.0, 1.0],
        [1.0, 5.0, 0.0],
        [15.0, 5.0, 0.0],
        true,
    );
    let mut problem = plan.problem(&env)?;
    problem.obstacles = random_obstacles(&mut rng, 16, problem.basis.n_p())?;
    let n_proj = (per_dist * 3 / 4).max(1);
    let cfg = SamplerConfig {
        iterations: 2,
        batch: per_dist * m,
        n_dists: m,
        n_proj,
        n_elite: (n_proj / 3).max(1),
        seed,
        ..plan.sampler
    };
    let mut out = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let r = sampler::dpriest_optimize(&problem, &cfg, &plan.projection)?;
        out.push(r.iteration_times.iter().sum::<f64>() / r.iteration_times.len() as f64);
    }
    Ok(out)
}

pub fn scaling_bench(cfg: &ScalingConfig) -> Result<ScalingReport> {
    let clock = Stopwatch::start();
    let mut rows = Vec::new();
    let mut push = |study, x, times: Vec<f64>| {
        for (repeat, seconds) in times.into_iter().enumerate() {
            rows.push(ScalingRow {
                study,
                x,
                repeat,
                seconds,
            });
        }
    };
    for &n_o in &cfg.obstacle_counts {
        push(
            Study::Obstacles,
            n_o,
            time_projection_sweep(n_o, cfg.fixed_batch, cfg.repeats, &cfg.plan, cfg.seed)?,
        );
    }
    for &n_b in &cfg.batch_sizes {
        push(
            Study::Batch,
            n_b,
            time_projection_sweep(cfg.fixed_obstacles, n_b, cfg.repeats, &cfg.plan, cfg.seed)?,
        );
    }
    for &m in &cfg.dist_counts {
        push(
            Study::Dists,
            m,
            time_dpriest_iteration(m, cfg.per_dist_batch, cfg.repeats, &cfg.plan, cfg.seed)?,
        );
    }
    let mut report = ScalingReport {
        rows,
        fits: Vec::new(),
        wall_time: 0.0,
    };
    for study in [Study::Obstacles, Study::Batch, Study::Dists] {
        let med = report.medians(study);
        if med.len() >= 2 {
            let x: Vec<f64> = med.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = med.iter().map(|p| p.1).collect();
            let (slope, intercept, r2) = linear_fit(&x, &y);
            report.fits.push(LineFit {
                study,
                slope,
                intercept,
                r2,
            });
        }
    }
    report.wall_time = clock.elapsed_secs();
    Ok(report)
}
