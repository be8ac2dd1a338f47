use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use samplets::cli::{exit_code, run, Command, RunSpec};
use samplets::io::Format;

#[derive(Parser)]
#[command(
    name = "samplets",
    version,
    about = "Samplet transforms, compression and kernel solvers on scattered data"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// Input point file (`x0,...,x{d-1}[,value]` CSV or SMPL binary).
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Point file format; inferred from the extension by default.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Polynomial degree; samplets have q+1 vanishing moments.
    #[arg(short, long, default_value_t = 3)]
    q: usize,
    #[arg(long)]
    leaf_size: Option<usize>,
    /// Map the bounding box into the unit cube before building the tree.
    #[arg(long)]
    rescale_unit_box: bool,
}

#[derive(Args)]
struct KernelArgs {
    /// Kernel, e.g. `matern(nu=1/2,l=0.1)`, `gauss(l=0.5)`, `periodic(s=50,l=1)`.
    #[arg(short, long = "kernel", required = true)]
    kernels: Vec<String>,
    /// Admissibility parameter.
    #[arg(long, default_value_t = 1.25)]
    eta: f64,
    /// Chebyshev degree per axis for far-field interpolation.
    #[arg(long, default_value_t = 6)]
    interp_degree: usize,
}

#[derive(Subcommand)]
enum Sub {
    /// Samplet coefficients of the point values.
    Transform(Common),
    /// Point values from a coefficient file.
    Inverse {
        /// Coefficient CSV (its `.json` sidecar must be next to it).
        #[arg(short, long)]
        input: PathBuf,
        /// The point file the coefficients were computed on.
        #[arg(short, long)]
        points: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        rescale_unit_box: bool,
    },
    /// Hard-thresholding report.
    Compress {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4,1e-5")]
        thresholds: Vec<f64>,
    },
    /// Energy-based tree coarsening; lists the subtree leaves.
    Coarsen {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-2)]
        epsilon: f64,
    },
    /// Adaptive subsampling over the leaves of a coarsened tree.
    Subsample {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'n', long)]
        samples: usize,
        #[arg(long, default_value_t = 1e-2)]
        epsilon: f64,
        /// Use the tree truncated at this level instead of coarsening.
        #[arg(long)]
        level: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the chosen point indices.
        #[arg(long)]
        indices: Option<PathBuf>,
    },
    /// Compressed kernel matrix in the SMPK container.
    Assemble {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Regularized kernel interpolation by conjugate gradients.
    Interpolate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 1e-8)]
        mu: f64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// l1 basis pursuit over one or more kernels.
    Pursue {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Uniform l1 weight.
        #[arg(short, long, default_value_t = 1e-6)]
        weight: f64,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compression error against the dense matrix for several q.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        qs: Vec<usize>,
    },
    /// Execute a TOML run specification.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn from_common(command: Command, c: Common) -> RunSpec {
    let mut s = RunSpec::new(command, c.input);
    s.output = c.output;
    s.format = c.format;
    s.q = c.q;
    s.leaf_size = c.leaf_size;
    s.rescale_unit_box = c.rescale_unit_box;
    s
}

fn with_kernel(mut s: RunSpec, k: KernelArgs) -> RunSpec {
    s.kernels = k.kernels;
    s.eta = k.eta;
    s.interp_degree = k.interp_degree;
    s
}

fn spec_of(sub: Sub) -> Result<RunSpec, samplets::Error> {
    Ok(match sub {
        Sub::Transform(c) => from_common(Command::Transform, c),
        Sub::Inverse {
            input,
            points,
            output,
            format,
            rescale_unit_box,
        } => {
            let mut s = RunSpec::new(Command::Inverse, input);
            s.points = Some(points);
            s.output = Some(output);
            s.format = format;
            s.rescale_unit_box = rescale_unit_box;
            s
        }
        Sub::Compress { common, thresholds } => {
            let mut s = from_common(Command::Compress, common);
            s.thresholds = thresholds;
            s
        }
        Sub::Coarsen { common, epsilon } => {
            let mut s = from_common(Command::Coarsen, common);
            s.epsilon = epsilon;
            s
        }
        Sub::Subsample {
            common,
            samples,
            epsilon,
            level,
            seed,
            indices,
        } => {
            let mut s = from_common(Command::Subsample, common);
            s.samples = Some(samples);
            s.epsilon = epsilon;
            s.level = level;
            s.seed = seed;
            s.indices = indices;
            s
        }
        Sub::Assemble { common, kernel, report } => {
            let mut s = with_kernel(from_common(Command::Assemble, common), kernel);
            s.report = report;
            s
        }
        Sub::Interpolate {
            common,
            kernel,
            mu,
            tol,
            max_iter,
            report,
        } => {
            let mut s = with_kernel(from_common(Command::Interpolate, common), kernel);
            s.mu = mu;
            s.tol = tol;
            s.max_iter = max_iter;
            s.report = report;
            s
        }
        Sub::Pursue {
            common,
            kernel,
            weight,
            gamma,
            tol,
            max_iter,
            report,
        } => {
            let mut s = with_kernel(from_common(Command::Pursue, common), kernel);
            s.weight = weight;
            s.gamma = gamma;
            s.tol = tol;
            s.max_iter = max_iter;
            s.report = report;
            s
        }
        Sub::Report { common, kernel, qs } => {
            let mut s = with_kernel(from_common(Command::Report, common), kernel);
            s.qs = qs;
            s
        }
        Sub::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| samplets::Error::InvalidParameter(format!("{}: {e}", config.display())))?;
            RunSpec::from_toml(&text)?
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = spec_of(cli.command).and_then(|mut spec| {
        if cli.threads.is_some() {
            spec.threads = cli.threads;
        }
        run(&spec)
    });
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&result) as u8)
}
