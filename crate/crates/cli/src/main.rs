//! Command-line driver for switchlearn experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use switchlearn::dynamics::{BenchmarkName, BoxDomain};
use switchlearn::experiment::{
    self, bound_check, evaluate, generate, load_bundle, load_data, predict, reproduce, run, write_bound,
    write_data, write_evaluation, write_run, EpsilonSource, ExperimentConfig, ExperimentError, MuDomain, ReproduceOptions,
    PREDICTION_FILE,
};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_DIVERGENCE: u8 = 4;
const EXIT_CHECK_FAILED: u8 = 5;

#[derive(Parser)]
#[command(name = "switchlearn", version, about = "Adaptive learning of switched dynamical systems")]
struct Cli {
    /// Log progress to stderr (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate trajectory data for a benchmark.
    Gen(GenArgs),
    /// Run the adaptive loop on a data directory and write a model bundle.
    Run(RunArgs),
    /// Roll a model bundle out next to the exact trajectory.
    Predict(EvalArgs),
    /// Roll out and write accuracy metrics.
    Eval(EvalArgs),
    /// Check the a-priori error bound along a rollout.
    Bound(BoundArgs),
    /// Run the full pipeline for a benchmark and check the results.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Default)]
struct Overrides {
    /// Initial-state sampling seed.
    #[arg(long)]
    seed_data: Option<u64>,
    /// Measurement-noise seed.
    #[arg(long)]
    seed_noise: Option<u64>,
    /// Network initialization seed.
    #[arg(long)]
    seed_init: Option<u64>,
    /// Minibatch shuffle seed.
    #[arg(long)]
    seed_shuffle: Option<u64>,
    /// Validation-error tolerance of the adaptive loop.
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed_data {
            cfg.seeds.data = s;
        }
        if let Some(s) = self.seed_noise {
            cfg.seeds.noise = s;
        }
        if let Some(s) = self.seed_init {
            cfg.seeds.init = s;
        }
        if let Some(s) = self.seed_shuffle {
            cfg.train.shuffle_seed = s;
        }
        if let Some(t) = self.tol {
            cfg.adaptive.tol = t;
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Benchmark whose defaults start the configuration.
    #[arg(long, value_parser = parse_benchmark)]
    benchmark: Option<BenchmarkName>,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Multiply trajectory and epoch counts by this factor.
    #[arg(long, allow_hyphen_values = true)]
    scale: Option<f64>,
    /// Multiplicative measurement-noise level.
    #[arg(long, allow_hyphen_values = true)]
    noise: Option<f64>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Bundle directory; defaults to the data directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Network initialization seed.
    #[arg(long)]
    seed_init: Option<u64>,
    /// Minibatch shuffle seed.
    #[arg(long)]
    seed_shuffle: Option<u64>,
    /// Validation-error tolerance of the adaptive loop.
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    /// Largest number of intervals.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Also train Kaiming-initialized children for one epoch at every split.
    #[arg(long)]
    compare_fresh_init: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Bundle directory written by `run`.
    #[arg(long)]
    model: PathBuf,
    /// Initial sample, comma separated (a state, or the amplitude for heat);
    /// defaults to the benchmark's test orbit.
    #[arg(long, value_parser = parse_sample, allow_hyphen_values = true)]
    x0: Option<Sample>,
    /// Output directory; defaults to the bundle directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstantsDomain {
    /// Bounding box of all observed states.
    Data,
    /// The benchmark's initial-state sampling box.
    Sampling,
}

#[derive(Clone, Copy, ValueEnum)]
enum Epsilon {
    /// Mismatch against the exact regime flow on all observed inputs.
    Flow,
    /// Mismatch against the observed next states of the validation trajectory.
    Validation,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Data directory; defaults to the bundle directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Box for the Lipschitz constants and the field gap.
    #[arg(long, value_enum, default_value = "data")]
    constants_domain: ConstantsDomain,
    /// Explicit box `lo1,lo2,..:hi1,hi2,..`, overriding --constants-domain.
    #[arg(long, allow_hyphen_values = true)]
    constants_box: Option<String>,
    /// One-step error entering the bound.
    #[arg(long, value_enum, default_value = "flow")]
    epsilon: Epsilon,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_parser = parse_benchmark)]
    benchmark: BenchmarkName,
    /// 1.0 for the full experiment; smaller values give desk-scale runs
    /// checked for qualitative properties only.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: PathBuf,
}

fn parse_benchmark(s: &str) -> Result<BenchmarkName, String> {
    s.parse().map_err(|e: switchlearn::dynamics::DynamicsError| e.to_string())
}

/// Comma-separated reals given as one argument.
#[derive(Clone)]
struct Sample(Vec<f64>);

fn parse_sample(s: &str) -> Result<Sample, String> {
    parse_vector(s).map(Sample)
}

fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect()
}

fn parse_box(s: &str) -> Result<BoxDomain, ExperimentError> {
    let bad = || ExperimentError::Config(format!("--constants-box expects lo1,lo2,..:hi1,hi2,.., got '{s}'"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lower = parse_vector(lo).map_err(|_| bad())?;
    let upper = parse_vector(hi).map_err(|_| bad())?;
    BoxDomain::new(lower, upper).map_err(|e| ExperimentError::Config(e.to_string()))
}

enum Outcome {
    Done,
    ChecksFailed,
}

fn gen(a: GenArgs) -> Result<Outcome, ExperimentError> {
    let mut cfg = match (&a.config, a.benchmark) {
        (Some(path), b) => {
            let cfg = ExperimentConfig::from_json(&read(path)?)?;
            if b.is_some_and(|b| b != cfg.benchmark) {
                return Err(ExperimentError::Config(format!(
                    "--benchmark disagrees with {} ({})",
                    path.display(),
                    cfg.benchmark
                )));
            }
            cfg
        }
        (None, Some(b)) => ExperimentConfig::for_benchmark(b),
        (None, None) => return Err(ExperimentError::Config("gen needs --benchmark or --config".into())),
    };
    if let Some(s) = a.scale {
        cfg = cfg.scaled(s)?;
    }
    if let Some(n) = a.noise {
        cfg.noise = n;
    }
    a.overrides.apply(&mut cfg);
    cfg.validate()?;
    let store = generate(&cfg)?;
    write_data(&a.out, &cfg, &store)?;
    println!(
        "wrote {} trajectories of {} to {} (config {})",
        store.trajectory_count(),
        cfg.benchmark,
        a.out.display(),
        cfg.hash()
    );
    Ok(Outcome::Done)
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))
}

fn run_cmd(a: RunArgs) -> Result<Outcome, ExperimentError> {
    let (mut cfg, store) = load_data(&a.data)?;
    if let Some(s) = a.seed_init {
        cfg.seeds.init = s;
    }
    if let Some(s) = a.seed_shuffle {
        cfg.train.shuffle_seed = s;
    }
    if let Some(t) = a.tol {
        cfg.adaptive.tol = t;
    }
    if let Some(m) = a.max_iterations {
        cfg.adaptive.max_iterations = m;
    }
    cfg.adaptive.compare_fresh_init |= a.compare_fresh_init;
    cfg.validate()?;
    let out = a.out.unwrap_or(a.data);
    let result = run(&cfg, store)?;
    let manifest = write_run(&out, &cfg, &result)?;
    println!(
        "{:?} after {} intervals; endpoints {:?}; bundle in {}",
        manifest.exit_reason,
        manifest.k_hat,
        manifest.endpoints,
        out.display()
    );
    Ok(Outcome::Done)
}

fn initial_state(cfg: &ExperimentConfig, sample: Option<&Sample>) -> Result<Option<Vec<f64>>, ExperimentError> {
    let Some(Sample(sample)) = sample else { return Ok(None) };
    let b = cfg.benchmark();
    if sample.len() != b.domain.dim() {
        return Err(ExperimentError::Data(format!(
            "--x0 has {} components, the {} bundle expects {}",
            sample.len(),
            b.name,
            b.domain.dim()
        )));
    }
    Ok(Some(b.initial_map.apply(sample)))
}

fn predict_cmd(a: EvalArgs, with_metrics: bool) -> Result<Outcome, ExperimentError> {
    let (cfg, _, model) = load_bundle(&a.model)?;
    let x0 = initial_state(&cfg, a.x0.as_ref())?;
    let out = a.out.unwrap_or(a.model);
    if with_metrics {
        let (p, s) = evaluate(&cfg, &model, x0.as_deref())?;
        write_evaluation(&out, &p, &s)?;
        println!(
            "test MSE {:.4e}; identified switches {:?}; written to {}",
            s.test_mse,
            s.identified_switches,
            out.display()
        );
    } else {
        let x0 = x0.unwrap_or_else(|| cfg.benchmark().test_initial_state());
        let p = predict(&cfg, &model, &x0)?;
        std::fs::create_dir_all(&out).map_err(|e| ExperimentError::io(&out, e))?;
        let path = out.join(PREDICTION_FILE);
        let mut buf = Vec::new();
        switchlearn::evaluation::write_prediction_csv(&mut buf, &p.grid, &p.rollout.trajectory, &p.reference)
            .and_then(|()| std::fs::write(&path, buf))
            .map_err(|e| ExperimentError::io(&path, e))?;
        println!("prediction written to {}", path.display());
    }
    Ok(Outcome::Done)
}

fn bound_cmd(a: BoundArgs) -> Result<Outcome, ExperimentError> {
    let (cfg, _, model) = load_bundle(&a.eval.model)?;
    let data_dir = a.data.as_deref().unwrap_or(&a.eval.model);
    let (_, store) = load_data(data_dir)?;
    let x0 = initial_state(&cfg, a.eval.x0.as_ref())?;
    let domain = match (&a.constants_box, a.constants_domain) {
        (Some(s), _) => MuDomain::Custom(parse_box(s)?),
        (None, ConstantsDomain::Data) => MuDomain::DataBox,
        (None, ConstantsDomain::Sampling) => MuDomain::Sampling,
    };
    let eps = match a.epsilon {
        Epsilon::Flow => EpsilonSource::FlowMap,
        Epsilon::Validation => EpsilonSource::Validation,
    };
    let (report, s) = bound_check(&cfg, &model, store, x0.as_deref(), &domain, eps)?;
    let out = a.eval.out.unwrap_or(a.eval.model);
    write_bound(&out, &report, &s)?;
    println!(
        "L1 {:.4} L2 {:.4} mu {:.4} eta {:.4} eps {:.4e}; {} exceedances, {} hull violations; written to {}",
        s.l1,
        s.l2,
        s.mu,
        s.eta,
        s.eps,
        s.exceedances,
        s.hull_violations,
        out.display()
    );
    Ok(Outcome::Done)
}

fn reproduce_cmd(a: ReproduceArgs) -> Result<Outcome, ExperimentError> {
    let mut seeds = ExperimentConfig::for_benchmark(a.benchmark).seeds;
    let o = &a.overrides;
    seeds.data = o.seed_data.unwrap_or(seeds.data);
    seeds.noise = o.seed_noise.unwrap_or(seeds.noise);
    seeds.init = o.seed_init.unwrap_or(seeds.init);
    let opts = ReproduceOptions {
        scale: a.scale,
        seeds: Some(seeds),
        shuffle_seed: o.seed_shuffle,
        tol: o.tol,
    };
    let s = reproduce(a.benchmark, &opts, &a.out)?;
    for c in &s.checks {
        println!(
            "{} {}: observed {}, expected {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.expected
        );
    }
    println!("summary written to {}", a.out.join(experiment::SUMMARY_FILE).display());
    Ok(if s.passed { Outcome::Done } else { Outcome::ChecksFailed })
}

fn exit_code(e: &ExperimentError) -> u8 {
    match e.root() {
        ExperimentError::Config(_) => EXIT_CONFIG,
        ExperimentError::Data(_) => EXIT_DATA,
        ExperimentError::Divergence(_) => EXIT_DIVERGENCE,
        ExperimentError::Io { .. } | ExperimentError::Stage { .. } => EXIT_IO,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run_cmd(a),
        Command::Predict(a) => predict_cmd(a, false),
        Command::Eval(a) => predict_cmd(a, true),
        Command::Bound(a) => bound_cmd(a),
        Command::Reproduce(a) => reproduce_cmd(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => {
            eprintln!("error: reproduction checks failed");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(e) => {
            info!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
