use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uav_height::agent::PolicyKind;
use uav_height::episode::StateVariant;
use uav_height::harness::{self, CellSpec, ExperimentConfig};
use uav_height::neural;
use uav_height::topology::CityTopology;
use uav_height::Error;

/// UAV height control experiments over stochastic city models.
#[derive(Parser)]
#[command(name = "uav-height", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a city and write it as JSON.
    Topology(TopologyArgs),
    /// Run a single cell: one policy at one density point.
    Run(RunArgs),
    /// Run the full density sweep.
    Sweep(SweepArgs),
    /// Recompute every logged SE in an output directory and compare.
    Replay(ReplayArgs),
    /// Check TD-loss gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TopologyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 5.0)]
    bs_density: f64,
    #[arg(long, default_value_t = 500.0)]
    build_density: f64,
    #[arg(long, default_value_t = 0)]
    replicate: usize,
    /// Output directory; prints to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    policy: PolicyKind,
    /// State variant, DQN only.
    #[arg(long)]
    variant: Option<StateVariant>,
    #[arg(long, default_value_t = 5.0)]
    bs_density: f64,
    #[arg(long, default_value_t = 500.0)]
    build_density: f64,
    #[arg(long, default_value_t = 0)]
    replicate: usize,
    #[arg(long)]
    episodes: Option<usize>,
    /// Summary window as FIRST-LAST, 1-based inclusive.
    #[arg(long, value_parser = parse_window)]
    window: Option<(usize, usize)>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Restrict to these policies (comma separated).
    #[arg(long, value_delimiter = ',')]
    policy: Vec<PolicyKind>,
    /// Restrict DQN to these state variants (comma separated).
    #[arg(long, value_delimiter = ',')]
    variant: Vec<StateVariant>,
    /// Override the BS density leg (comma separated).
    #[arg(long, value_delimiter = ',')]
    bs_density: Vec<f64>,
    /// Override the building density leg (comma separated).
    #[arg(long, value_delimiter = ',')]
    build_density: Vec<f64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, value_parser = parse_window)]
    window: Option<(usize, usize)>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Directory holding manifest.json and steps.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn parse_window(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('-').ok_or("expected FIRST-LAST")?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

/// Usage failures exit with 1, runtime failures with 2.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::NothingToRun | Error::Json(_) => Self::Usage(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn set_episodes(cfg: &mut ExperimentConfig, episodes: Option<usize>, window: Option<(usize, usize)>) {
    if let Some(n) = episodes {
        cfg.episodes = n;
        if window.is_none() {
            // keep the default window's shape: the last sixth of the run
            let lo = n - n / 6;
            cfg.summary_window = (lo.max(1), n);
        }
    }
    if let Some(w) = window {
        cfg.summary_window = w;
    }
}

fn write_outputs(cfg: &ExperimentConfig, cells: &[CellSpec], jobs: usize, out: &Path) -> Result<(), Failure> {
    cfg.validate()?;
    let report = harness::run_and_write(cfg, cells, jobs, out)?;
    if let Some(first) = report.failures.first() {
        return Err(Failure::Runtime(format!(
            "{} of {} cells failed; first: {first}",
            report.failures.len(),
            cells.len()
        )));
    }
    eprintln!("wrote {} cells to {}", report.results.len(), out.display());
    Ok(())
}

fn topology(args: TopologyArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let spec = CellSpec {
        bs_density_km2: args.bs_density,
        build_density_km2: args.build_density,
        policy: PolicyKind::Constant,
        variant: None,
        replicate: args.replicate,
    };
    let topo = CityTopology::generate(&cfg.topology_params(&spec), spec.topology_seed(cfg.master_seed))?;
    let json = topo.to_json()?;
    match args.out {
        Some(dir) => {
            fs::create_dir_all(&dir).map_err(Error::from)?;
            fs::write(dir.join("topology.json"), json + "\n").map_err(Error::from)?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.common)?;
    set_episodes(&mut cfg, args.episodes, args.window);
    let variant = match (args.policy, args.variant) {
        (PolicyKind::Dqn, v) => Some(v.unwrap_or(StateVariant::Basic)),
        (_, None) => None,
        (p, Some(_)) => return Err(Failure::Usage(format!("--variant only applies to dqn, not {p}"))),
    };
    cfg.bs_densities_km2 = vec![args.bs_density];
    cfg.build_densities_km2 = vec![args.build_density];
    cfg.policies = vec![args.policy];
    cfg.variants = variant.into_iter().collect();
    cfg.replicates = args.replicate + 1;
    let cell = CellSpec {
        bs_density_km2: args.bs_density,
        build_density_km2: args.build_density,
        policy: args.policy,
        variant,
        replicate: args.replicate,
    };
    write_outputs(&cfg, &[cell], 1, &args.out)
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.common)?;
    set_episodes(&mut cfg, args.episodes, args.window);
    if !args.policy.is_empty() {
        cfg.policies = args.policy;
    }
    if !args.variant.is_empty() {
        cfg.variants = args.variant;
    }
    if !args.bs_density.is_empty() {
        cfg.bs_densities_km2 = args.bs_density;
    }
    if !args.build_density.is_empty() {
        cfg.build_densities_km2 = args.build_density;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if args.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    cfg.validate()?;
    write_outputs(&cfg, &cfg.cells(), args.jobs, &args.out)
}

fn replay(args: ReplayArgs) -> Result<(), Failure> {
    let rep = harness::replay_check(&args.out)?;
    println!(
        "replay ok: {} rows, {} episodes, max abs error {:e}",
        rep.rows_checked, rep.episodes_checked, rep.max_abs_error
    );
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<(), Failure> {
    let cfg = ExperimentConfig::default();
    let mut dims = vec![StateVariant::Basic.obs_len(cfg.episode.k_nearest)];
    dims.extend(&cfg.agent.hidden);
    dims.push(3);
    let errs = neural::self_test(&dims, args.instances, args.batch, args.seed)?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    println!("gradcheck: {} instances, worst relative error {worst:e}", errs.len());
    if worst > args.tolerance {
        return Err(Failure::Runtime(format!("relative error {worst:e} exceeds {:e}", args.tolerance)));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Topology(a) => topology(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Replay(a) => replay(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
