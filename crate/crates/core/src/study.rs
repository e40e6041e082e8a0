//! Convergence studies: manufactured forcings, sweeps over `N`, error
//! measurement at the final time, and log-log rate fits.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use crate::config::{ErrorNorm, StudyConfig};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::jacobi::{gauss_lobatto, QuadratureRule, MAX_DEGREE};
use crate::solver::{integrate, ExprAt, ProblemSpec, Sampling, Scheme, SolveConfig, XDerivative};
use crate::spaces::{error_norms, over_resolution, ErrorNorms, SpectralField, SpectralSpace};

/// The source `g(x, t)` that makes `exact` solve the problem when added to `gamma`:
///
/// ```text
/// g = c v_t - (a v_xt)_x + (alpha~ v_x)_x - beta~ v_x - gamma~
/// ```
///
/// where `alpha~`, `beta~`, `gamma~` have `exact` substituted for `v` before
/// differentiating.
pub fn manufacture_forcing(exact: &Expr, spec: &ProblemSpec) -> Result<Expr> {
    if exact.depends_on(Var::V) {
        return Err(Error::Config("exact may depend on x and t only".into()));
    }
    let v_t = exact.diff(Var::T)?;
    let v_x = exact.diff(Var::X)?;
    let v_xt = v_x.diff(Var::T)?;
    let sub = |e: &Expr| e.substitute(Var::V, exact);
    let flux = (sub(spec.alpha()) * v_x.clone()).diff(Var::X)?;
    let mixed = (spec.a().clone() * v_xt).diff(Var::X)?;
    Ok(spec.c().clone() * v_t - mixed + flux - sub(spec.beta()) * v_x - sub(spec.gamma()))
}

/// Ordinary least-squares slope of `ln(error)` against `ln(N)`, over the
/// points whose error is finite and positive.
pub fn fit_rate(n_values: &[usize], errors: &[f64]) -> Result<f64> {
    if n_values.len() != errors.len() {
        return Err(Error::Shape {
            expected: n_values.len(),
            found: errors.len(),
        });
    }
    let points: Vec<(f64, f64)> = n_values
        .iter()
        .zip(errors)
        .filter(|(_, e)| e.is_finite() && **e > 0.0)
        .map(|(&n, &e)| ((n as f64).ln(), e.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            usable: points.len(),
        });
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData { usable: 1 });
    }
    Ok(sxy / sxx)
}

/// How a study measures its errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StudyOptions {
    /// Measure against a Galerkin run at twice the largest `N` with half the step.
    pub reference: bool,
    /// Take the largest error over the stored trajectory samples instead of
    /// the final-time error (needs `exact`).
    pub max_over_samples: bool,
}

/// One `(scheme, N)` integration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scheme: Scheme,
    pub n: usize,
    /// `None` when the norm was not requested, NaN when the run diverged.
    pub err_l2w: Option<f64>,
    pub err_h1w: Option<f64>,
    pub seconds: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRates {
    pub scheme: Scheme,
    pub l2w: Option<f64>,
    pub h1w: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRun {
    pub n: usize,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub runs: Vec<RunRecord>,
    pub rates: Vec<SchemeRates>,
    pub reference: Option<ReferenceRun>,
    pub seconds: f64,
}

impl ConvergenceReport {
    pub fn runs_for(&self, scheme: Scheme) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(move |r| r.scheme == scheme)
    }

    pub fn rates_for(&self, scheme: Scheme) -> Option<&SchemeRates> {
        self.rates.iter().find(|r| r.scheme == scheme)
    }

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "scheme,N,err_l2w,err_h1w,seconds")?;
        for r in &self.runs {
            writeln!(
                w,
                "{},{},{},{},{:.6}",
                r.scheme,
                r.n,
                Num(r.err_l2w),
                Num(r.err_h1w),
                r.seconds
            )?;
        }
        for r in &self.rates {
            writeln!(
                w,
                "# scheme={} rate_l2w={} rate_h1w={}",
                r.scheme,
                Num(r.l2w),
                Num(r.h1w)
            )?;
        }
        if let Some(reference) = self.reference {
            writeln!(
                w,
                "# reference=galerkin N={} dt={:e}",
                reference.n, reference.dt
            )?;
        }
        writeln!(w, "# config={}", self.config.to_json())
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("CSV is UTF-8")
    }
}

/// A CSV number with 17 significant digits, or `NA`.
struct Num(Option<f64>);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.16e}"),
            None => f.write_str("NA"),
        }
    }
}

/// Errors of `approx` against another spectral field on `rule`.
fn field_errors(
    approx: &SpectralField,
    reference: &SpectralField,
    rule: &QuadratureRule,
) -> Result<ErrorNorms> {
    let xs = rule.nodes();
    let (a, da) = (
        approx.derivative_values(0, xs)?,
        approx.derivative_values(1, xs)?,
    );
    let (r, dr) = (
        reference.derivative_values(0, xs)?,
        reference.derivative_values(1, xs)?,
    );
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (j, w) in rule.weights().iter().enumerate() {
        l2 += w * (a[j] - r[j]).powi(2);
        h1 += w * (da[j] - dr[j]).powi(2);
    }
    Ok(ErrorNorms {
        l2w: l2.sqrt(),
        h1w: (l2 + h1).sqrt(),
    })
}

enum Truth<'a> {
    Exact(&'a Expr),
    Reference { field: SpectralField, n: usize },
}

fn measure(
    truth: &Truth<'_>,
    problem: &ProblemSpec,
    cfg: &StudyConfig,
    scheme: Scheme,
    n: usize,
    max_over_samples: bool,
) -> Result<ErrorNorms> {
    let mut solve = SolveConfig::new(scheme, n);
    solve.dt = cfg.dt;
    if !max_over_samples {
        solve.sampling = Sampling::Count(1);
    }
    let traj = integrate(problem, &solve)?;
    match truth {
        Truth::Exact(exact) => {
            let rule = gauss_lobatto(over_resolution(n), cfg.mu)?;
            let samples: Vec<usize> = if max_over_samples {
                (0..traj.times.len()).collect()
            } else {
                vec![traj.times.len() - 1]
            };
            let mut worst = ErrorNorms { l2w: 0.0, h1w: 0.0 };
            for k in samples {
                let t = traj.times[k];
                let e = error_norms(
                    &ExprAt { expr: exact, t },
                    &XDerivative::new(exact, t),
                    &traj.fields[k],
                    &rule,
                )?;
                worst.l2w = worst.l2w.max(e.l2w);
                worst.h1w = worst.h1w.max(e.h1w);
            }
            Ok(worst)
        }
        Truth::Reference { field, n: n_ref } => {
            let rule = gauss_lobatto((2 * n).max(n_ref + 1), cfg.mu)?;
            field_errors(traj.final_field(), field, &rule)
        }
    }
}

/// Runs every `(scheme, N)` pair of `cfg` (concurrently on the current rayon
/// pool) and fits rates.
pub fn run_study(cfg: &StudyConfig, opts: StudyOptions) -> Result<ConvergenceReport> {
    let start = Instant::now();
    cfg.validate()?;
    let problem = cfg.problem()?;
    let exact = cfg.exact_expr()?;
    if opts.max_over_samples && (opts.reference || exact.is_none()) {
        return Err(Error::Config(
            "the maximum over samples needs an exact solution".into(),
        ));
    }

    let mut reference = None;
    let truth = match (&exact, opts.reference) {
        (Some(e), false) => Truth::Exact(e),
        (_, true) => {
            let n_max = *cfg.n_list.last().expect("validated non-empty");
            let n_ref = 2 * n_max;
            if n_ref > MAX_DEGREE {
                return Err(Error::Config(format!(
                    "reference resolution {n_ref} exceeds the maximum {MAX_DEGREE}"
                )));
            }
            let mut solve = SolveConfig::new(Scheme::Galerkin, n_ref);
            solve.dt = cfg.dt / 2.0;
            solve.sampling = Sampling::Count(1);
            info!("reference run: galerkin N = {n_ref}, dt = {:e}", solve.dt);
            let traj = integrate(&problem, &solve)?;
            reference = Some(ReferenceRun {
                n: n_ref,
                dt: solve.dt,
            });
            Truth::Reference {
                field: traj.final_field().field().clone(),
                n: n_ref,
            }
        }
        (None, false) => {
            return Err(Error::Config(
                "no exact solution given; reference mode is required".into(),
            ))
        }
    };

    let jobs: Vec<(Scheme, usize)> = cfg
        .schemes
        .iter()
        .flat_map(|&s| cfg.n_list.iter().map(move |&n| (s, n)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(scheme, n)| {
            let t0 = Instant::now();
            let outcome = measure(&truth, &problem, cfg, scheme, n, opts.max_over_samples);
            let seconds = t0.elapsed().as_secs_f64();
            let (errors, diverged) = match outcome {
                Ok(e) => ((e.l2w, e.h1w), false),
                Err(Error::Divergence { time }) => {
                    warn!("{scheme} N = {n} diverged at t = {time}");
                    ((f64::NAN, f64::NAN), true)
                }
                Err(e) => return Err(e),
            };
            Ok(RunRecord {
                scheme,
                n,
                err_l2w: cfg.wants(ErrorNorm::L2w).then_some(errors.0),
                err_h1w: cfg.wants(ErrorNorm::H1w).then_some(errors.1),
                seconds,
                diverged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if runs.iter().all(|r| r.diverged) {
        return Err(Error::AllRunsDiverged);
    }

    let rates = cfg
        .schemes
        .iter()
        .map(|&scheme| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.scheme == scheme).collect();
            let ns: Vec<usize> = mine.iter().map(|r| r.n).collect();
            let fit = |pick: fn(&RunRecord) -> Option<f64>| -> Option<f64> {
                let errs: Option<Vec<f64>> = mine.iter().map(|r| pick(r)).collect();
                fit_rate(&ns, &errs?).ok()
            };
            SchemeRates {
                scheme,
                l2w: fit(|r| r.err_l2w),
                h1w: fit(|r| r.err_h1w),
            }
        })
        .collect();

    Ok(ConvergenceReport {
        config: cfg.clone(),
        runs,
        rates,
        reference,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// One of the three approximation operators of [`crate::spaces`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionOp {
    L2,
    H10,
    Interp,
}

impl FromStr for ProjectionOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(ProjectionOp::L2),
            "h10" => Ok(ProjectionOp::H10),
            "interp" => Ok(ProjectionOp::Interp),
            _ => Err(Error::Config(format!(
                "unknown operator `{s}` (expected l2, h10 or interp)"
            ))),
        }
    }
}

/// Error norms of the chosen approximation of `f(x)` at resolution `n`,
/// measured on the over-integration rule.
pub fn projection_error(op: ProjectionOp, f: &Expr, n: usize, mu: f64) -> Result<ErrorNorms> {
    if f.depends_on(Var::T) || f.depends_on(Var::V) {
        return Err(Error::Config("f may depend on x only".into()));
    }
    let space = SpectralSpace::new(n, mu)?;
    let df = XDerivative::new(f, 0.0);
    let approx = match op {
        ProjectionOp::L2 => space.project_l2(f)?,
        ProjectionOp::H10 => space.project_h10(f, &df)?.into_field(),
        ProjectionOp::Interp => space.interpolate(f)?,
    };
    error_norms(f, &df, &approx, space.over_rule())
}
