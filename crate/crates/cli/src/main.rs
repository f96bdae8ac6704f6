use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use scld::alm_solver::{solve, SolverConfig, WSolveMethod};
use scld::evaluation::{corruption_sweep, rho_sweep};
use scld::io::{ingest_matrix, write_csv_table, write_json, write_labels, write_matrix};
use scld::pipeline::{
    load_source, run_pipeline, ClusterOptions, DataSource, PipelineConfig, SolverDiagnostics,
};
use scld::{generate, AffinitySide, DenseMatrix, Error, LabeledDataset, NoiseModel, SyntheticSpec};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// LogDet low-rank representation and subspace clustering.
#[derive(Parser, Debug)]
#[command(name = "scld", version)]
struct Cli {
    /// Worker threads for the sweep subcommands and k-means restarts.
    #[arg(long, global = true, env = "SCLD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the low-rank representation Z of a data matrix.
    Solve(SolveArgs),
    /// Run the full segmentation pipeline and write a JSON run record.
    Cluster(ClusterCmd),
    /// Clustering error versus corruption fraction on synthetic data.
    SweepCorruption(SweepCorruptionArgs),
    /// Clustering error versus rho on one dataset.
    SweepRho(SweepRhoArgs),
    /// Generate a synthetic union-of-subspaces dataset.
    Gen(GenArgs),
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Fidelity weight rho. Starting points: 55 for motion trajectories,
    /// 0.03-0.08 for face images; tune for other data.
    #[arg(long, default_value_t = 55.0)]
    rho: f64,
    /// Initial penalty beta0.
    #[arg(long, default_value_t = 0.3)]
    beta0: f64,
    /// Penalty growth factor gamma (> 1).
    #[arg(long, default_value_t = 1.1)]
    gamma: f64,
    /// Relative-change stopping tolerance.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Reuse one eigendecomposition of XᵀX for every W-step.
    #[arg(long)]
    cached_eigen: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            beta0: self.beta0,
            gamma: self.gamma,
            tol: self.tol,
            max_iters: self.max_iters,
            w_solve: if self.cached_eigen {
                WSolveMethod::CachedEigen
            } else {
                WSolveMethod::Cholesky
            },
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum NoiseArg {
    Variance,
    StdDev,
}

#[derive(Args, Debug, Clone)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 100)]
    ambient_dim: usize,
    #[arg(long, default_value_t = 5)]
    num_subspaces: usize,
    #[arg(long, default_value_t = 4)]
    subspace_dim: usize,
    #[arg(long, default_value_t = 20)]
    points_per_subspace: usize,
    /// Fraction of columns to corrupt.
    #[arg(long, default_value_t = 0.0)]
    corruption: f64,
    #[arg(long, default_value_t = 0.2)]
    noise_scale: f64,
    /// Whether noise_scale·‖x‖ is the per-entry variance or standard deviation.
    #[arg(long, value_enum, default_value_t = NoiseArg::Variance)]
    noise_model: NoiseArg,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl SyntheticArgs {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            ambient_dim: self.ambient_dim,
            num_subspaces: self.num_subspaces,
            subspace_dim: self.subspace_dim,
            points_per_subspace: self.points_per_subspace,
            corruption_fraction: self.corruption,
            noise_scale: self.noise_scale,
            noise_model: match self.noise_model {
                NoiseArg::Variance => NoiseModel::Variance,
                NoiseArg::StdDev => NoiseModel::StdDev,
            },
            seed: self.data_seed,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Args, Debug, Clone)]
struct ClusterArgs {
    /// Affinity sharpness; entries are cosines raised to 2·alpha.
    #[arg(long, default_value_t = 2)]
    alpha: u32,
    /// Build features from U·Σ^½ (left) or V·Σ^½ (right).
    #[arg(long, value_enum, default_value_t = SideArg::Left)]
    side: SideArg,
    /// Relative singular value cutoff for the skinny SVD.
    #[arg(long, default_value_t = 1e-6)]
    rank_tol: f64,
    /// k-means seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ClusterArgs {
    fn side(&self) -> AffinitySide {
        match self.side {
            SideArg::Left => AffinitySide::Left,
            SideArg::Right => AffinitySide::Right,
        }
    }

    fn options(&self) -> ClusterOptions {
        ClusterOptions {
            alpha: self.alpha,
            affinity_side: self.side(),
            rank_tol: self.rank_tol,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SourceArgs {
    /// Data matrix CSV (rows = features, columns = samples).
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    input: Option<PathBuf>,
    /// Ground-truth labels, one integer per line.
    #[arg(long, requires = "input")]
    labels: Option<PathBuf>,
    /// Generate the data instead of reading it.
    #[arg(long)]
    synthetic: bool,
    #[command(flatten)]
    synthetic_args: SyntheticArgs,
}

impl SourceArgs {
    fn source(&self) -> DataSource {
        match &self.input {
            Some(matrix) => DataSource::Files {
                matrix: matrix.clone(),
                labels: self.labels.clone(),
            },
            None => DataSource::Synthetic(self.synthetic_args.spec()),
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    /// Where to write Z as CSV.
    #[arg(long)]
    output: PathBuf,
    /// Optional JSON file for solver diagnostics.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct ClusterCmd {
    #[command(flatten)]
    source: SourceArgs,
    /// Number of subspaces.
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    cluster: ClusterArgs,
    /// JSON run record destination; printed to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepCorruptionArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7"
    )]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    /// Candidate rho values; each fraction reports the best one. Uses --rho when empty.
    #[arg(long, value_delimiter = ',')]
    rho_grid: Vec<f64>,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    cluster: ClusterArgs,
    #[arg(long)]
    output_csv: Option<PathBuf>,
    #[arg(long)]
    output_json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepRhoArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,20,55,100,200")]
    rhos: Vec<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    cluster: ClusterArgs,
    #[arg(long)]
    output_csv: Option<PathBuf>,
    #[arg(long)]
    output_json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long)]
    output_matrix: PathBuf,
    #[arg(long)]
    output_labels: Option<PathBuf>,
}

#[derive(Serialize)]
struct CorruptionCsvRow {
    fraction: f64,
    rho: f64,
    trials: usize,
    mean_error: f64,
    std_error: f64,
}

fn emit<T: Serialize>(
    rows: &[T],
    csv: Option<&PathBuf>,
    json: Option<&PathBuf>,
) -> Result<(), Error> {
    if let Some(p) = csv {
        write_csv_table(rows, p)?;
    }
    if let Some(p) = json {
        write_json(&rows, p)?;
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    let text = scld::io::to_json_pretty(value)?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Gen(args) => {
            let data = generate(&args.synthetic.spec())?;
            write_matrix(&data.x, &args.output_matrix)?;
            if let Some(p) = &args.output_labels {
                write_labels(&data.labels, p)?;
            }
            eprintln!(
                "wrote {}x{} matrix to {}",
                data.x.nrows(),
                data.x.ncols(),
                args.output_matrix.display()
            );
        }
        Command::Solve(args) => {
            let x = ingest_matrix(&args.input)?;
            let result = solve(&x, &args.solver.config())?;
            write_matrix(&result.z, &args.output)?;
            let diag = SolverDiagnostics::from_result(&result)?;
            match &args.report {
                Some(p) => write_json(&diag, p)?,
                None => eprintln!(
                    "{} iterations ({:?}), final ‖Z−W‖ = {:.3e}",
                    diag.iterations, diag.termination, diag.final_residual
                ),
            }
        }
        Command::Cluster(args) => {
            let mut config = PipelineConfig::new(args.source.source(), args.k);
            config.solver = args.solver.config();
            config.alpha = args.cluster.alpha;
            config.affinity_side = args.cluster.side();
            config.rank_tol = args.cluster.rank_tol;
            config.seed = args.cluster.seed;
            config.output_path = args.output.clone();
            let record = run_pipeline(&config)?;
            if args.output.is_none() {
                print_json(&record)?;
            } else if let Some(e) = record.error_rate {
                eprintln!("clustering error {:.4}", e);
            }
        }
        Command::SweepCorruption(args) => {
            let rows = corruption_sweep(
                &args.synthetic.spec(),
                &args.fractions,
                args.trials,
                &args.solver.config(),
                &args.rho_grid,
                &args.cluster.options(),
            )?;
            let flat: Vec<CorruptionCsvRow> = rows
                .iter()
                .map(|r| CorruptionCsvRow {
                    fraction: r.fraction,
                    rho: r.rho,
                    trials: r.trials,
                    mean_error: r.mean_error,
                    std_error: r.std_error,
                })
                .collect();
            if let Some(p) = &args.output_csv {
                write_csv_table(&flat, p)?;
            }
            if let Some(p) = &args.output_json {
                write_json(&rows, p)?;
            }
            if args.output_csv.is_none() && args.output_json.is_none() {
                print_json(&rows)?;
            }
        }
        Command::SweepRho(args) => {
            let (x, truth) = load_source(&args.source.source())?;
            let labels = truth.ok_or_else(|| {
                Error::InvalidArgument("sweep-rho needs ground-truth labels".into())
            })?;
            let k = args.k.unwrap_or_else(|| {
                labels
                    .iter()
                    .collect::<std::collections::BTreeSet<_>>()
                    .len()
            });
            let dataset = LabeledDataset {
                x,
                labels,
                bases: Vec::new(),
                rotation: DenseMatrix::zeros(0, 0),
                corrupted: Vec::new(),
            };
            let rows = rho_sweep(
                &dataset,
                k,
                &args.rhos,
                &args.solver.config(),
                &args.cluster.options(),
            )?;
            emit(&rows, args.output_csv.as_ref(), args.output_json.as_ref())?;
            if args.output_csv.is_none() && args.output_json.is_none() {
                print_json(&rows)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_CONFIG
            })
        }
    }
}
