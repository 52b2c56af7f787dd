//! Command-line interface: single-shot planning, benchmark suites,
//! receding-horizon episodes and the timing study.
//!
//! Settings come from built-in defaults, then an optional TOML file
//! (`--config`), then flags or their `PRIEST_*` environment variables.
//!
//! Exit codes: 0 success, 1 infeasible plan or failed episode, 2 invalid
//! configuration or input, 3 runtime or I/O failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::basis::evaluate;
use crate::error::{Error, Result};
use crate::sim::bench::{run_benchmark, scaling_bench, BenchConfig, ScalingConfig, Study, Suite};
use crate::sim::env::Environment;
use crate::sim::mpc::run_mpc_episode;
use crate::sim::p2p::{run_trial, Planner};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Plan,
    Benchmark,
    Mpc,
    Scaling,
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: Mode,
    pub planner: Planner,
    /// Planners compared by `benchmark`.
    pub planners: Vec<Planner>,
    pub seed: u64,
    pub suite: Suite,
    /// Defaults to the suite's own trial count.
    pub trials: Option<usize>,
    /// World file for `plan` and `mpc`; generated from `suite` and `seed` when absent.
    pub env_file: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub out: PathBuf,
    pub bench: BenchConfig,
    pub scaling: ScalingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Plan,
            planner: Planner::Priest,
            planners: vec![Planner::Priest, Planner::Cem],
            seed: 0,
            suite: Suite::Static2d,
            trials: None,
            env_file: None,
            threads: 0,
            out: PathBuf::from("out"),
            bench: BenchConfig::default(),
            scaling: ScalingConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::InvalidConfig("seed must fit in a signed 64-bit integer".into()));
        }
        if self.planners.is_empty() {
            return Err(Error::InvalidConfig("planner list is empty".into()));
        }
        if self.trials == Some(0) {
            return Err(Error::InvalidConfig("trials must be positive".into()));
        }
        self.bench.plan.validate()?;
        self.bench.big_plan.validate()?;
        self.bench.mpc.validate()?;
        self.scaling.plan.validate()
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or_else(|| self.suite.default_trials())
    }

    /// Comment lines that open every CSV output.
    pub fn csv_header(&self) -> Result<String> {
        Ok(format!(
            "# priest {}\n# seed {}\n# config {}\n",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            serde_json::to_string(self)?
        ))
    }

    pub fn json_header(&self) -> serde_json::Value {
        serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config": self,
        })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "priest",
    version,
    about = "Projection-guided sampling-based trajectory optimization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan once in a world file or a generated world.
    Plan(Common),
    /// Run a benchmark suite for every selected planner.
    Benchmark(Common),
    /// Run one receding-horizon episode.
    Mpc(Common),
    /// Time projection sweeps and decentralized iterations.
    Scaling(Common),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, env = "PRIEST_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "PRIEST_SEED")]
    pub seed: Option<u64>,
    /// priest, dpriest or cem; repeat or comma-separate for benchmarks.
    #[arg(long, env = "PRIEST_PLANNER", value_delimiter = ',')]
    pub planner: Vec<Planner>,
    /// static2d, static3d, dynamic or point2point.
    #[arg(long, env = "PRIEST_SUITE")]
    pub suite: Option<Suite>,
    #[arg(long, env = "PRIEST_TRIALS")]
    pub trials: Option<usize>,
    #[arg(long, env = "PRIEST_THREADS")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, env = "PRIEST_OUT")]
    pub out: Option<PathBuf>,
    /// World file (JSON).
    #[arg(long = "env", env = "PRIEST_ENV_FILE")]
    pub env_file: Option<PathBuf>,
}

/// Resolve defaults, the config file and flag overrides.
pub fn resolve(mode: Mode, args: &Common) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.mode = mode;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(first) = args.planner.first() {
        cfg.planner = *first;
        cfg.planners = args.planner.clone();
    }
    if let Some(s) = args.suite {
        cfg.suite = s;
    }
    if args.trials.is_some() {
        cfg.trials = args.trials;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if args.env_file.is_some() {
        cfg.env_file = args.env_file.clone();
    }
    if mode == Mode::Mpc && args.suite.is_none() {
        cfg.suite = Suite::Dynamic;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn load_world(cfg: &RunConfig) -> Result<Environment> {
    match &cfg.env_file {
        Some(p) => {
            let f = File::open(p).map_err(|e| Error::InvalidConfig(format!("cannot open {}: {e}", p.display())))?;
            Environment::load(std::io::BufReader::new(f)).map_err(|e| Error::InvalidConfig(e.to_string()))
        }
        None => cfg.bench.world(cfg.suite, cfg.seed),
    }
}

pub fn cmd_plan(cfg: &RunConfig) -> Result<i32> {
    let env = load_world(cfg)?;
    let plan = if cfg.suite == Suite::Point2point {
        &cfg.bench.big_plan
    } else {
        &cfg.bench.plan
    };
    let (result, outcome) = run_trial(&env, cfg.planner, plan, cfg.seed)?;
    let problem = plan.problem(&env)?;
    let kin = evaluate(&result.best, &problem.basis)?;
    let primary = crate::costs::primary_cost(&kin, &problem.basis, &problem.weights, &problem.context());

    fs::create_dir_all(&cfg.out)?;
    let mut w = create(&cfg.out, "trajectory.csv")?;
    write!(w, "{}", cfg.csv_header()?)?;
    writeln!(w, "t,x,y,z,vx,vy,vz,ax,ay,az")?;
    for (i, t) in problem.basis.t_grid().iter().enumerate() {
        let (p, v, a) = (kin.pos_at(i), kin.vel_at(i), kin.acc_at(i));
        writeln!(
            w,
            "{t},{},{},{},{},{},{},{},{},{}",
            p[0], p[1], p[2], v[0], v[1], v[2], a[0], a[1], a[2]
        )?;
    }
    w.flush()?;
    let mut d = create(&cfg.out, "diagnostics.jsonl")?;
    serde_json::to_writer(&mut d, &serde_json::json!({ "header": cfg.json_header() }))?;
    writeln!(d)?;
    result.write_diagnostics(&mut d)?;
    d.flush()?;
    let feasible = outcome.residual <= plan.projection.feas_tol;
    write_json(
        &cfg.out,
        "summary.json",
        &serde_json::json!({
            "header": cfg.json_header(),
            "planner": cfg.planner,
            "feasible": feasible,
            "success": outcome.success,
            "residual": outcome.residual,
            "cost": outcome.cost,
            "primary_cost": primary,
            "smoothness": outcome.smoothness,
            "max_acceleration": outcome.max_acceleration,
            "violations": outcome.violations,
            "compute_time": outcome.compute_time,
            "iteration_times": result.iteration_times,
            "max_eq_violation": outcome.max_eq_violation,
            "coefficients": result.best.coeffs(),
            "basis": plan.basis,
            "horizon": plan.horizon,
            "n_p": plan.n_p,
            "degree": plan.degree,
        }),
    )?;
    Ok(if feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

pub fn cmd_mpc(cfg: &RunConfig) -> Result<i32> {
    let env = load_world(cfg)?;
    let ep = run_mpc_episode(&env, cfg.planner, &cfg.bench.mpc, cfg.seed)?;
    fs::create_dir_all(&cfg.out)?;
    write_json(
        &cfg.out,
        "episode.json",
        &serde_json::json!({ "header": cfg.json_header(), "planner": cfg.planner, "episode": ep }),
    )?;
    Ok(if ep.success { EXIT_OK } else { EXIT_INFEASIBLE })
}

pub fn cmd_benchmark(cfg: &RunConfig) -> Result<i32> {
    let report = run_benchmark(cfg.suite, cfg.trials(), cfg.seed, &cfg.planners, &cfg.bench)?;
    fs::create_dir_all(&cfg.out)?;
    let mut w = create(&cfg.out, "metrics.csv")?;
    write!(w, "{}", cfg.csv_header()?)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let mut e = create(&cfg.out, "episodes.jsonl")?;
    serde_json::to_writer(&mut e, &serde_json::json!({ "header": cfg.json_header() }))?;
    writeln!(e)?;
    report.write_records(&mut e)?;
    e.flush()?;
    for t in &report.tables {
        log::info!("{}", t.csv_row());
    }
    Ok(EXIT_OK)
}

pub fn cmd_scaling(cfg: &RunConfig) -> Result<i32> {
    let s = ScalingConfig {
        seed: cfg.seed,
        ..cfg.scaling.clone()
    };
    let report = scaling_bench(&s)?;
    fs::create_dir_all(&cfg.out)?;
    let mut w = create(&cfg.out, "scaling.csv")?;
    write!(w, "{}", cfg.csv_header()?)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let fits: Vec<_> = [Study::Obstacles, Study::Batch, Study::Dists]
        .into_iter()
        .filter_map(|st| report.fit(st))
        .collect();
    write_json(
        &cfg.out,
        "scaling_fits.json",
        &serde_json::json!({ "header": cfg.json_header(), "fits": fits, "wall_time": report.wall_time }),
    )?;
    Ok(EXIT_OK)
}

fn set_threads(n: usize) {
    #[cfg(feature = "parallel")]
    if n > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

/// Parse `args`, run the command and map the outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (mode, common) = match &cli.command {
        Command::Plan(c) => (Mode::Plan, c),
        Command::Benchmark(c) => (Mode::Benchmark, c),
        Command::Mpc(c) => (Mode::Mpc, c),
        Command::Scaling(c) => (Mode::Scaling, c),
    };
    let cfg = match resolve(mode, common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    set_threads(cfg.threads);
    let out = match mode {
        Mode::Plan => cmd_plan(&cfg),
        Mode::Benchmark => cmd_benchmark(&cfg),
        Mode::Mpc => cmd_mpc(&cfg),
        Mode::Scaling => cmd_scaling(&cfg),
    };
    match out {
        Ok(code) => code,
        Err(e @ Error::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
