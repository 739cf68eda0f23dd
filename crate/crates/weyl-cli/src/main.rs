mod commands;
mod error;
mod parse;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use weyl_core::suites::SuiteConfig;

use commands::{EnumerateMode, Report, SampleKind};
use error::CliError;
use parse::parse_dims;

/// Lattice enumeration, invariant distributions and coboundary solvers for
/// unitary representations of SO(N,1) and their products.
///
/// Representations are given inline as `N=5,n=0:3,nu=0.5+1i` (entries of n
/// separated by ':'), or as JSON with --spec-file. Diagrams are rows
/// top-down separated by '/', e.g. `1,2/1/0`; `0` is the zero diagram.
#[derive(Parser)]
#[command(name = "weyl", version)]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the summary table on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecArgs {
    /// Inline representation, e.g. `N=4,n=1,nu=0.3`.
    #[arg(long)]
    spec: Option<String>,
    /// JSON representation file.
    #[arg(long)]
    spec_file: Option<PathBuf>,
}

impl SpecArgs {
    fn load(&self) -> Result<weyl_core::rep_params::RepSpec, CliError> {
        commands::load_spec(self.spec.as_deref(), self.spec_file.as_deref())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampled {
    Vector,
    MInvariant,
    Product,
    Form,
}

#[derive(Subcommand)]
enum Command {
    /// List lattice points of a cylinder, cocubic paths, or the floor.
    Enumerate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value = "0")]
        lambda: String,
        /// List points with m_k up to this height.
        #[arg(long, required_unless_present_any = ["paths", "floor"])]
        height: Option<i64>,
        /// List the paths from --from to --to instead.
        #[arg(long, requires_all = ["from", "to"], conflicts_with = "floor")]
        paths: bool,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<String>,
        /// Print the floor of the cylinder.
        #[arg(long)]
        floor: bool,
    },
    /// Ladder coefficients, diagonal coefficient and path weights at one point.
    Coeffs {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value = "0")]
        lambda: String,
        #[arg(long, allow_hyphen_values = true)]
        m: String,
    },
    /// Values of an invariant distribution up to a height.
    Dist {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value = "0")]
        lambda: String,
        /// `floorI` for the I-th floor point, or an m tuple.
        #[arg(long, default_value = "floor0", allow_hyphen_values = true)]
        anchor: String,
        #[arg(long)]
        height: i64,
    },
    /// Project a vector onto the common kernel of the invariant distributions.
    Project {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Solve Xg = f for a vector in the kernel.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        /// Use the descending level-sweep solver.
        #[arg(long)]
        sweep: bool,
        /// Relative residual tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Run a verification suite (or `all`).
    Verify {
        #[arg(long)]
        suite: String,
        /// Dimensions of the single-factor ensembles.
        #[arg(long = "N", default_value = "3,4,5")]
        dims: String,
        #[arg(long, default_value_t = 100)]
        height: i64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Solve sum_i X_i g_i = f on a product.
    SolveTopdegree {
        #[arg(long = "in")]
        input: PathBuf,
        /// Accept inputs that are not M-invariant (experimental).
        #[arg(long)]
        general: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Check that a form is closed (or, in top degree, in the kernel).
    CheckCocycle {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Solve d eta = omega for a closed form below top degree.
    SolveLowerdegree {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Draw a random input file.
    Sample {
        #[arg(value_enum)]
        kind: Sampled,
        #[command(flatten)]
        spec: SpecArgs,
        /// Factor dimensions for products and forms.
        #[arg(long, default_value = "3,4")]
        factors: String,
        #[arg(long, default_value_t = 0)]
        degree: usize,
        /// Project vectors onto the kernel.
        #[arg(long)]
        kernel: bool,
        /// For forms: return d of a random form of one degree lower.
        #[arg(long)]
        closed: bool,
        #[arg(long, default_value_t = 6)]
        height: i64,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cmd: Command) -> Result<Report, CliError> {
    match cmd {
        Command::Enumerate {
            spec,
            lambda,
            height,
            paths,
            from,
            to,
            floor,
        } => {
            let spec = spec.load()?;
            let mode = if paths {
                EnumerateMode::Paths {
                    from: from.unwrap_or_default(),
                    to: to.unwrap_or_default(),
                }
            } else if floor {
                EnumerateMode::Floor
            } else {
                EnumerateMode::Points {
                    height: height.unwrap_or_default(),
                }
            };
            commands::enumerate(&spec, &lambda, mode)
        }
        Command::Coeffs { spec, lambda, m } => commands::coeffs(&spec.load()?, &lambda, &m),
        Command::Dist {
            spec,
            lambda,
            anchor,
            height,
        } => commands::dist(&spec.load()?, &lambda, &anchor, height),
        Command::Project { input } => commands::project(&input),
        Command::Solve { input, sweep, tol } => commands::solve(&input, sweep, tol),
        Command::Verify {
            suite,
            dims,
            height,
            seed,
        } => commands::verify(
            &suite,
            SuiteConfig {
                seed,
                dims: parse_dims(&dims)?,
                height,
            },
        ),
        Command::SolveTopdegree { input, general, tol } => commands::solve_topdegree(&input, general, tol),
        Command::CheckCocycle { input, tol } => commands::check_cocycle(&input, tol),
        Command::SolveLowerdegree { input, tol } => commands::solve_lowerdegree(&input, tol),
        Command::Sample {
            kind,
            spec,
            factors,
            degree,
            kernel,
            closed,
            height,
            count,
            seed,
        } => {
            let kind = match kind {
                Sampled::Vector => SampleKind::Vector {
                    spec: spec.load()?,
                    kernel,
                },
                Sampled::MInvariant => SampleKind::MInvariant {
                    spec: spec.load()?,
                    kernel,
                },
                Sampled::Product => SampleKind::Product {
                    dims: parse_dims(&factors)?,
                    kernel,
                },
                Sampled::Form => SampleKind::Form {
                    dims: parse_dims(&factors)?,
                    degree,
                    closed,
                },
            };
            commands::sample(kind, seed, height, count)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("WEYL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("WEYL_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

fn emit(report: &Report, out: Option<&Path>, quiet: bool) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&report.json).expect("JSON values serialize");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, &text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })?,
    }
    if !quiet {
        let width = report.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut err = std::io::stderr().lock();
        for (k, v) in &report.summary {
            let _ = writeln!(err, "  {k:<width$}  {v}");
        }
        if let Some(f) = &report.failure {
            let _ = writeln!(err, "FAIL: {f}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads()
        .and_then(|_| run(cli.command))
        .and_then(|report| emit(&report, cli.out.as_deref(), cli.quiet).map(|_| report));
    match result {
        Ok(report) if report.failure.is_some() => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
