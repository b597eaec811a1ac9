//! Command-line front end: convergence sweeps, single transports and the SE(3)
//! curvature tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ladder_core::error::Error;
use ladder_core::lab::{
    emit_report, run_experiment, run_single, write_report, ExperimentSpec, ManifoldKind,
    ReportFormat,
};
use ladder_core::ladder::{Backend, Scheme};
use ladder_core::se3::{self, basis, Se3Tables, AlgebraVector};

#[derive(Parser)]
#[command(name = "ladders", version, about = "Ladder schemes for parallel transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the rung count and fit convergence rates.
    Converge(ConvergeArgs),
    /// Run a single transport and compare it with the reference.
    Transport(TransportArgs),
    /// Print the SE(3) curvature tables at the identity.
    Curvature(CurvatureArgs),
}

#[derive(Args)]
struct Common {
    /// sphere, spd or se3
    #[arg(long)]
    manifold: ManifoldKind,
    /// schild, pole, averaged or fanning
    #[arg(long)]
    scheme: Scheme,
    /// closed or infinitesimal
    #[arg(long, default_value = "closed")]
    backend: Backend,
    /// Scaling exponent in [1, 2] (default: 2 for Schild, 1 for pole)
    #[arg(long)]
    alpha: Option<f64>,
    /// Anisotropy of the SE(3) metric
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Rung count of the numerical reference (default: 4 × largest n)
    #[arg(long)]
    n_ref: Option<usize>,
    /// Residual target of the shooting inverse (default: round-off floor)
    #[arg(long)]
    tol_log: Option<f64>,
}

impl Common {
    fn spec(&self, n_grid: Vec<usize>) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(self.manifold, self.scheme, self.backend)
            .with_beta(self.beta)
            .with_grid(n_grid);
        spec.alpha = self.alpha;
        spec.n_ref = self.n_ref;
        if self.tol_log.is_some() {
            spec.tolerances.tol_log = self.tol_log;
        }
        spec
    }
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 5)]
    n_min: usize,
    #[arg(long, default_value_t = 320)]
    n_max: usize,
    /// Output file; the report goes to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Args)]
struct TransportArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
struct CurvatureArgs {
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Also print the covariant derivative of the curvature
    #[arg(long)]
    nabla: bool,
}

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
        e if e.is_numerical() => EXIT_NUMERICAL,
        Error::DegenerateFit(_) | Error::MissingDerivativeOracle => EXIT_NUMERICAL,
        _ => EXIT_INVALID,
    }
}

fn converge(args: &ConvergeArgs) -> Result<u8, Error> {
    let grid = ExperimentSpec::geometric_grid(args.n_min, args.n_max)?;
    let report = run_experiment(&args.common.spec(grid))?;
    match &args.out {
        Some(path) => emit_report(&report, path, args.format)?,
        None => write_report(&report, std::io::stdout().lock(), args.format)?,
    }
    if let Some(fit) = &report.fit {
        eprintln!(
            "slope {:.4} (r² {:.5}), longitudinal coefficient {:.6e} (r² {:.5})",
            fit.slope, fit.r_squared, fit.long_coef, fit.long_r_squared
        );
    }
    for f in &report.failures {
        eprintln!("n = {}: {}", f.n, f.message);
    }
    Ok(if report.failures.iter().any(|f| f.numerical) {
        EXIT_NUMERICAL
    } else if report.failures.is_empty() {
        0
    } else {
        EXIT_INVALID
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.12e}")).collect();
    format!("[{}]", items.join(", "))
}

fn single(args: &TransportArgs) -> Result<u8, Error> {
    let spec = args.common.spec(vec![args.n.max(2)]);
    let out = run_single(&spec, args.n)?;
    println!("n           {}", out.n);
    println!("endpoint    {}", fmt_vec(&out.endpoint));
    println!("transported {}", fmt_vec(&out.transported));
    println!("reference   {}", fmt_vec(&out.reference));
    println!("abs_error   {:.6e}", out.abs_error);
    println!("long_error  {:.6e}", out.long_error);
    println!("rk_calls    {}", out.rk_calls);
    println!("wall_time_s {:.6}", out.wall_time_s);
    Ok(0)
}

fn fmt_algebra(v: &AlgebraVector) -> String {
    let terms: Vec<String> = (0..6)
        .filter(|&k| v[k] != 0.0)
        .map(|k| format!("{:+.12} e{}", v[k], k + 1))
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" ")
    }
}

/// Largest basis coefficient below which a tensor entry is treated as zero.
const ZERO: f64 = 1e-12;

fn curvature(args: &CurvatureArgs) -> Result<u8, Error> {
    let t = Se3Tables::new(args.beta)?;
    println!("beta = {}, tau = {:.12}", args.beta, se3::tau(args.beta));
    println!("R(ei,ej)ek, i < j, nonzero entries:");
    for i in 0..6 {
        for j in i + 1..6 {
            for k in 0..6 {
                let r = t.riemann(&basis(i), &basis(j), &basis(k));
                if r.amax() > ZERO {
                    println!("  R(e{},e{})e{} = {}", i + 1, j + 1, k + 1, fmt_algebra(&r));
                }
            }
        }
    }
    let table = se3::nabla_curvature_table(args.beta)?;
    let max = table.iter().map(|v| v.amax()).fold(0.0, f64::max);
    if args.nabla {
        println!("(∇_ei R)(ej,ek)el, j < k, nonzero entries:");
        for i in 0..6 {
            for j in 0..6 {
                for k in j + 1..6 {
                    for l in 0..6 {
                        let v = &table[((i * 6 + j) * 6 + k) * 6 + l];
                        if v.amax() > ZERO {
                            println!(
                                "  (∇_e{} R)(e{},e{})e{} = {}",
                                i + 1,
                                j + 1,
                                k + 1,
                                l + 1,
                                fmt_algebra(v)
                            );
                        }
                    }
                }
            }
        }
    }
    for (j, k) in [(se3::E3, se3::E2), (se3::E3, se3::E1)] {
        let v = &table[((se3::E3 * 6 + j) * 6 + k) * 6 + se3::E4];
        println!("(∇_e3 R)(e{},e{})e4 = {}", j + 1, k + 1, fmt_algebra(v));
    }
    println!("max |∇R| = {max:.3e}");
    let vanishes = max <= ZERO;
    let symmetric = args.beta == 1.0;
    println!(
        "∇R {} and beta {} 1: {}",
        if vanishes { "vanishes" } else { "does not vanish" },
        if symmetric { "=" } else { "≠" },
        if vanishes == symmetric { "consistent" } else { "INCONSISTENT" }
    );
    Ok(if vanishes == symmetric { 0 } else { EXIT_NUMERICAL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Converge(a) => converge(a),
        Command::Transport(a) => single(a),
        Command::Curvature(a) => curvature(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
