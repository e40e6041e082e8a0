use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sobolev_spectral::config::StudyConfig;
use sobolev_spectral::expr::Expr;
use sobolev_spectral::jacobi::gauss_lobatto;
use sobolev_spectral::solver::{integrate, Integrator, Sampling, Scheme, SolveConfig};
use sobolev_spectral::study::{projection_error, run_study, ProjectionOp, StudyOptions};
use sobolev_spectral::Error;

#[derive(Parser)]
#[command(
    name = "sobolev-spectral",
    version,
    about = "Spectral Galerkin and collocation solvers for pseudo-parabolic equations"
)]
struct Cli {
    /// Worker threads for convergence studies (defaults to all cores).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gauss-Lobatto-Jacobi nodes and weights as `j,node,weight`.
    Quadrature {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Projection errors of `f` as `N,err_l2w,err_h1w`.
    Project {
        /// One of `l2`, `h10`, `interp`.
        #[arg(long)]
        op: ProjectionOp,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        /// Expression in `x`.
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrates one configuration and writes the final solution as `x,v`.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the first scheme of the configuration.
        #[arg(long)]
        scheme: Option<Scheme>,
        /// Defaults to the largest entry of `n_list`.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "rk4")]
        integrator: Integrator,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a convergence study and writes the CSV report.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Measure errors against a Galerkin reference run instead of `exact`.
        #[arg(long)]
        reference: bool,
        /// Report the largest error over the stored samples, not the final one.
        #[arg(long)]
        max_over_samples: bool,
        /// Overrides the `out` field of the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Expr(_)) => 2,
        Some(Error::AllRunsDiverged | Error::Divergence { .. }) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match cli.command {
        Command::Quadrature { n, mu, out } => quadrature(n, mu, out.as_deref()),
        Command::Project {
            op,
            mu,
            f,
            n_list,
            out,
        } => project(op, mu, &f, &n_list, out.as_deref()),
        Command::Solve {
            config,
            scheme,
            n,
            integrator,
            out,
        } => solve(&config, scheme, n, integrator, out.as_deref()),
        Command::Converge {
            config,
            reference,
            max_over_samples,
            out,
        } => converge(&config, reference, max_over_samples, out.as_deref()),
    }
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn quadrature(n: usize, mu: f64, out: Option<&Path>) -> Result<()> {
    let rule = gauss_lobatto(n, mu)?;
    let mut w = open_output(out)?;
    writeln!(w, "j,node,weight")?;
    for (j, (x, wt)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        writeln!(w, "{j},{x:.16e},{wt:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

fn project(op: ProjectionOp, mu: f64, f: &str, n_list: &[usize], out: Option<&Path>) -> Result<()> {
    let f = Expr::parse(f).map_err(Error::from)?;
    let mut w = open_output(out)?;
    writeln!(w, "N,err_l2w,err_h1w")?;
    for &n in n_list {
        let e = projection_error(op, &f, n, mu)?;
        writeln!(w, "{n},{:.16e},{:.16e}", e.l2w, e.h1w)?;
    }
    w.flush()?;
    Ok(())
}

fn solve(
    config: &Path,
    scheme: Option<Scheme>,
    n: Option<usize>,
    integrator: Integrator,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = StudyConfig::load(config)?;
    let problem = cfg.problem()?;
    let mut solve = SolveConfig::new(
        scheme.unwrap_or(cfg.schemes[0]),
        n.unwrap_or(*cfg.n_list.last().expect("validated n_list is not empty")),
    );
    solve.dt = cfg.dt;
    solve.integrator = integrator;
    solve.sampling = Sampling::Count(1);
    let start = Instant::now();
    let traj = integrate(&problem, &solve)?;
    let seconds = start.elapsed().as_secs_f64();
    let field = traj.final_field();
    let rule = gauss_lobatto(solve.n, cfg.mu)?;
    let values = field.derivative_values(0, rule.nodes())?;

    let mut w = open_output(out)?;
    writeln!(
        w,
        "# scheme={} N={} dt={:e} T={} seconds={seconds:.6}",
        traj.scheme,
        traj.n,
        traj.dt,
        traj.final_time()
    )?;
    writeln!(w, "x,v")?;
    for (x, v) in rule.nodes().iter().zip(&values) {
        writeln!(w, "{x:.16e},{v:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

fn converge(
    config: &Path,
    reference: bool,
    max_over_samples: bool,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = StudyConfig::load(config)?;
    let report = run_study(
        &cfg,
        StudyOptions {
            reference,
            max_over_samples,
        },
    )?;
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.out));
    let mut w = open_output(Some(&path))?;
    report.write_csv(&mut w)?;
    w.flush()?;

    for r in &report.runs {
        if r.diverged {
            eprintln!("warning: {} N={} diverged", r.scheme, r.n);
        }
    }
    for r in &report.rates {
        let show = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.3}"));
        println!(
            "{}: rate_l2w={} rate_h1w={}",
            r.scheme,
            show(r.l2w),
            show(r.h1w)
        );
    }
    println!("wrote {} in {:.2} s", path.display(), report.seconds);
    Ok(())
}
