use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "splint", version, about = "Curve/spline-surface intersection and lattice-skin truss tools")]
struct Cli {
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random workloads
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Intersect lines or quadratic curves with a patch set
    Intersect(IntersectArgs),
    /// Immerse a lattice in a closed surface and write the truss
    LatticeGen(LatticeArgs),
    /// Linear statics of a pin-jointed truss
    SolveTruss(SolveArgs),
    /// Bounding volume hierarchy statistics as CSV
    BvhStats(BvhArgs),
    /// Time the implicit and subdivision methods on random cases
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mrep,
    Subdivision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CellTypeArg {
    Bcc,
    Pyramidal,
    CubicEdges,
}

#[derive(Args, Debug)]
pub struct IntersectArgs {
    #[arg(long)]
    pub patches: PathBuf,
    /// Segment endpoints as "x0,y0,z0 x1,y1,z1"; repeatable
    #[arg(long)]
    pub line: Vec<String>,
    /// Quadratic Bezier curve as "x0,y0,z0 x1,y1,z1 x2,y2,z2"; repeatable
    #[arg(long)]
    pub quadratic: Vec<String>,
    /// Rank tolerance (singular value ratio)
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Method::Mrep)]
    pub method: Method,
    /// Flatness tolerance for the subdivision method
    #[arg(long, default_value_t = 1e-9)]
    pub ftol: f64,
    /// Report file (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LatticeArgs {
    #[arg(long)]
    pub patches: PathBuf,
    #[arg(long)]
    pub lattice: PathBuf,
    /// Overrides the cell type of the lattice file
    #[arg(long, value_enum)]
    pub cell_type: Option<CellTypeArg>,
    /// Strut cross-section area (default: circle of diameter cell_size / 10)
    #[arg(long)]
    pub area: Option<f64>,
    /// Bounding directions: 6, 14 or 26
    #[arg(long, default_value_t = 14)]
    pub dop: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub truss: PathBuf,
    #[arg(long)]
    pub bc: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BvhArgs {
    #[arg(long)]
    pub patches: PathBuf,
    /// Bounding directions: 6, 14 or 26
    #[arg(long, default_value_t = 14)]
    pub dop: usize,
    #[arg(long, default_value_t = splint::bvh::DEFAULT_MAX_LEAF)]
    pub max_leaf: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Workload, "random<N>" for N random cubic patch / segment pairs
    #[arg(long, default_value = "random100")]
    pub cases: String,
    /// Comma-separated flatness tolerances for the subdivision runs
    #[arg(long, value_delimiter = ',', default_value = "1e-6,1e-9")]
    pub ftol: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<splint::Error>()) {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not configure thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Intersect(a) => commands::intersect(a),
        Command::LatticeGen(a) => commands::lattice_gen(a),
        Command::SolveTruss(a) => commands::solve_truss(a),
        Command::BvhStats(a) => commands::bvh_stats(a),
        Command::Bench(a) => commands::bench(a, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
