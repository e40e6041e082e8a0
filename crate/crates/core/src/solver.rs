//! Semidiscrete Galerkin and collocation schemes for
//!
//! ```text
//! c v_t - (a v_xt)_x = -(alpha v_x)_x + beta v_x + gamma   on (-1, 1)
//! v(-1, t) = v(1, t) = 0,   v(x, 0) = v0(x)
//! ```
//!
//! and their method-of-lines integration in time.
//!
//! The Galerkin state is the vector of boundary-basis coefficients; its time
//! derivative solves `A xi = B(v)` with `A` factored once. The collocation
//! state is the vector of nodal values; its time derivative solves the nodal
//! system `(diag(c) - D diag(a) D) u = r` with identity rows at the endpoints.

use std::fmt;
use std::str::FromStr;

use log::{debug, error};
use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::forms::{
    assemble_a, b_functional, diff_matrix, project_a_coeffs, BasisTable, BoundaryBasis, DiffMatrix,
    FormMatrices,
};
use crate::jacobi::{check_mu, gauss_lobatto, QuadratureRule};
use crate::spaces::{over_resolution, BoundaryField, Evaluable, SpectralField, SpectralSpace};

/// Nodal magnitude beyond which a run is declared divergent.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Evaluates a coefficient expression, reporting failures with the node.
pub(crate) fn eval_coefficient(
    name: &'static str,
    e: &Expr,
    x: f64,
    t: f64,
    v: f64,
) -> Result<f64> {
    match e.eval(x, t, v) {
        Ok(y) if y.is_finite() => Ok(y),
        Ok(y) => Err(Error::Evaluation {
            name,
            x,
            message: format!("non-finite value {y}"),
        }),
        Err(err) => Err(Error::Evaluation {
            name,
            x,
            message: err.to_string(),
        }),
    }
}

/// An expression in `(x, t)` frozen at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct ExprAt<'a> {
    pub expr: &'a Expr,
    pub t: f64,
}

impl Evaluable for ExprAt<'_> {
    fn value_at(&self, x: f64) -> Result<f64> {
        Ok(self.expr.eval(x, self.t, 0.0)?)
    }
}

/// `d/dx` of an expression in `(x, t)` at a fixed time: symbolic when possible,
/// otherwise a five-point central difference (for `abs`).
#[derive(Debug, Clone)]
pub struct XDerivative {
    expr: Expr,
    symbolic: bool,
    t: f64,
}

impl XDerivative {
    const STEP: f64 = 1e-4;

    pub fn new(e: &Expr, t: f64) -> Self {
        match e.diff(Var::X) {
            Ok(d) => Self {
                expr: d,
                symbolic: true,
                t,
            },
            Err(_) => Self {
                expr: e.clone(),
                symbolic: false,
                t,
            },
        }
    }

    pub fn is_symbolic(&self) -> bool {
        self.symbolic
    }
}

impl Evaluable for XDerivative {
    fn value_at(&self, x: f64) -> Result<f64> {
        if self.symbolic {
            return Ok(self.expr.eval(x, self.t, 0.0)?);
        }
        let h = Self::STEP;
        let f = |s: f64| self.expr.eval(x + s * h, self.t, 0.0);
        Ok((f(-2.0)? - 8.0 * f(-1.0)? + 8.0 * f(1.0)? - f(2.0)?) / (12.0 * h))
    }
}

/// Data of one initial-boundary-value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    a: Expr,
    c: Expr,
    alpha: Expr,
    beta: Expr,
    gamma: Expr,
    v0: Expr,
    mu: f64,
    t_final: f64,
}

impl ProblemSpec {
    /// `a`, `c` and `v0` may depend on `x` only.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Expr,
        c: Expr,
        alpha: Expr,
        beta: Expr,
        gamma: Expr,
        v0: Expr,
        mu: f64,
        t_final: f64,
    ) -> Result<Self> {
        check_mu(mu)?;
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Domain(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        for (name, e) in [("a", &a), ("c", &c), ("v0", &v0)] {
            if e.depends_on(Var::T) || e.depends_on(Var::V) {
                return Err(Error::Config(format!("{name} may depend on x only")));
            }
        }
        for x in [-1.0, 1.0] {
            let y = v0.eval(x, 0.0, 0.0)?;
            if !(y.abs() <= 1e-10) {
                return Err(Error::Precondition(format!(
                    "v0 must vanish at the endpoints, v0({x}) = {y:e}"
                )));
            }
        }
        Ok(Self {
            a,
            c,
            alpha,
            beta,
            gamma,
            v0,
            mu,
            t_final,
        })
    }

    /// [`ProblemSpec::new`] from expression sources.
    #[allow(clippy::too_many_arguments)]
    pub fn parse(
        a: &str,
        c: &str,
        alpha: &str,
        beta: &str,
        gamma: &str,
        v0: &str,
        mu: f64,
        t_final: f64,
    ) -> Result<Self> {
        Self::new(
            a.parse()?,
            c.parse()?,
            alpha.parse()?,
            beta.parse()?,
            gamma.parse()?,
            v0.parse()?,
            mu,
            t_final,
        )
    }

    pub fn a(&self) -> &Expr {
        &self.a
    }

    pub fn c(&self) -> &Expr {
        &self.c
    }

    pub fn alpha(&self) -> &Expr {
        &self.alpha
    }

    pub fn beta(&self) -> &Expr {
        &self.beta
    }

    pub fn gamma(&self) -> &Expr {
        &self.gamma
    }

    pub fn v0(&self) -> &Expr {
        &self.v0
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// The same problem with a different source term.
    pub fn with_gamma(&self, gamma: Expr) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Galerkin,
    Collocation,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Galerkin => "galerkin",
            Scheme::Collocation => "collocation",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "galerkin" => Ok(Scheme::Galerkin),
            "collocation" => Ok(Scheme::Collocation),
            _ => Err(Error::Config(format!("unknown scheme `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Integrator {
    #[default]
    #[serde(rename = "rk4")]
    Rk4,
    #[serde(rename = "implicit-trapezoid", alias = "trapezoid")]
    ImplicitTrapezoid,
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "implicit-trapezoid" | "trapezoid" => Ok(Integrator::ImplicitTrapezoid),
            _ => Err(Error::Config(format!("unknown integrator `{s}`"))),
        }
    }
}

/// Which states a [`Trajectory`] keeps. The final state is always kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// The initial state and about this many evenly spaced steps.
    Count(usize),
    /// Every step.
    All,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Count(10)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub scheme: Scheme,
    pub n: usize,
    pub dt: f64,
    pub integrator: Integrator,
    /// Resolution of the Galerkin integration rule; `None` means
    /// [`over_resolution`]`(n)`.
    pub over_quadrature: Option<usize>,
    pub sampling: Sampling,
}

impl SolveConfig {
    pub const DEFAULT_DT: f64 = 1e-3;

    pub fn new(scheme: Scheme, n: usize) -> Self {
        Self {
            scheme,
            n,
            dt: Self::DEFAULT_DT,
            integrator: Integrator::Rk4,
            over_quadrature: None,
            sampling: Sampling::default(),
        }
    }

    fn validate(&self, t_final: f64) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!(
                "N must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.dt > 0.0 && self.dt <= t_final) {
            return Err(Error::Config(format!(
                "dt must lie in (0, T = {t_final}], got {}",
                self.dt
            )));
        }
        if let Some(m) = self.over_quadrature {
            if m < self.n {
                return Err(Error::Config(format!(
                    "over-quadrature resolution {m} is below N = {}",
                    self.n
                )));
            }
        }
        Ok(())
    }
}

/// Stored states of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub n: usize,
    pub mu: f64,
    /// The step actually used (`T / steps`).
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub fields: Vec<BoundaryField>,
}

impl Trajectory {
    pub fn final_field(&self) -> &BoundaryField {
        self.fields
            .last()
            .expect("a trajectory always holds its final state")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("a trajectory always holds its final state")
    }
}

/// Precomputed Galerkin operators for one `(spec, N)`.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    space: SpectralSpace,
    basis: BoundaryBasis,
    table: BasisTable,
    mats: FormMatrices,
}

impl GalerkinSystem {
    pub fn new(spec: &ProblemSpec, n: usize) -> Result<Self> {
        Self::with_over_quadrature(spec, n, over_resolution(n))
    }

    pub fn with_over_quadrature(spec: &ProblemSpec, n: usize, over: usize) -> Result<Self> {
        let space = SpectralSpace::new(n, spec.mu())?;
        let basis = BoundaryBasis::new(n, spec.mu())?;
        let rule = if over == over_resolution(n) {
            space.over_rule().clone()
        } else {
            gauss_lobatto(over, spec.mu())?
        };
        let table = basis.tabulate(&rule);
        let mats = assemble_a(spec.a(), spec.c(), &basis, &table)?;
        Ok(Self {
            space,
            basis,
            table,
            mats,
        })
    }

    pub fn space(&self) -> &SpectralSpace {
        &self.space
    }

    pub fn basis(&self) -> &BoundaryBasis {
        &self.basis
    }

    pub fn table(&self) -> &BasisTable {
        &self.table
    }

    pub fn forms(&self) -> &FormMatrices {
        &self.mats
    }

    /// Boundary coefficients of `R_N v0`.
    pub fn initial(&self, spec: &ProblemSpec) -> Result<Vec<f64>> {
        let dv0 = XDerivative::new(spec.v0(), 0.0);
        project_a_coeffs(spec.v0(), &dv0, &self.mats, &self.basis, &self.table)
    }

    /// `B(v, phi_j)` for boundary coefficients `coeffs`.
    pub fn b_vector(&self, coeffs: &[f64], t: f64, spec: &ProblemSpec) -> Result<DVector<f64>> {
        let (v, vx) = self.table.synthesize(coeffs);
        b_functional(&v, &vx, t, spec, &self.table)
    }

    /// Coefficients of `v_t` solving `A v_t = B(v)`.
    pub fn rhs(&self, coeffs: &[f64], t: f64, spec: &ProblemSpec) -> Result<Vec<f64>> {
        let b = self.b_vector(coeffs, t, spec)?;
        Ok(self.mats.solve(&b)?.iter().copied().collect())
    }

    pub fn field(&self, coeffs: &[f64]) -> Result<BoundaryField> {
        self.space.boundary_field(&self.basis, coeffs)
    }

    pub fn coefficients(&self, v: &BoundaryField) -> Result<Vec<f64>> {
        let modal = v
            .modal()
            .ok_or_else(|| Error::Precondition("Galerkin state needs modal coefficients".into()))?;
        self.basis.from_modal(modal)
    }
}

/// Precomputed collocation operators for one `(spec, N)`.
#[derive(Debug, Clone)]
pub struct CollocationSystem {
    space: SpectralSpace,
    diff: DiffMatrix,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl CollocationSystem {
    pub fn new(spec: &ProblemSpec, n: usize) -> Result<Self> {
        let space = SpectralSpace::new(n, spec.mu())?;
        let diff = diff_matrix(space.rule());
        let lu = collocation_matrix(spec, space.rule(), &diff)?;
        Ok(Self { space, diff, lu })
    }

    pub fn space(&self) -> &SpectralSpace {
        &self.space
    }

    pub fn diff(&self) -> &DiffMatrix {
        &self.diff
    }

    /// `v0` at the nodes with exact zeros at the endpoints.
    pub fn initial(&self, spec: &ProblemSpec) -> Result<Vec<f64>> {
        collocation_initial_values(spec, self.space.rule())
    }

    pub fn rhs(&self, values: &[f64], t: f64, spec: &ProblemSpec) -> Result<Vec<f64>> {
        let r = collocation_forcing(values, t, spec, self.space.rule(), &self.diff)?;
        solve_collocation(&self.lu, r)
    }

    pub fn field(&self, values: &[f64]) -> Result<BoundaryField> {
        BoundaryField::new(self.space.from_nodal(values.to_vec())?)
    }
}

fn collocation_matrix(
    spec: &ProblemSpec,
    rule: &QuadratureRule,
    diff: &DiffMatrix,
) -> Result<LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let nodes = rule.nodes();
    let m = nodes.len();
    let mut a = DVector::zeros(m);
    let mut c = DVector::zeros(m);
    for (j, &x) in nodes.iter().enumerate() {
        a[j] = positive_coefficient("a", spec.a(), x)?;
        c[j] = positive_coefficient("c", spec.c(), x)?;
    }
    let d = diff.matrix();
    let mut mat = DMatrix::from_diagonal(&c) - d * DMatrix::from_diagonal(&a) * d;
    for row in [0, m - 1] {
        mat.row_mut(row).fill(0.0);
        mat[(row, row)] = 1.0;
    }
    let lu = mat.lu();
    if !lu.is_invertible() {
        error!(
            "collocation matrix is singular (N = {}, mu = {})",
            rule.n(),
            rule.mu()
        );
        return Err(Error::Numeric(format!(
            "collocation matrix is singular (N = {}, mu = {})",
            rule.n(),
            rule.mu()
        )));
    }
    Ok(lu)
}

fn positive_coefficient(name: &'static str, e: &Expr, x: f64) -> Result<f64> {
    let value = eval_coefficient(name, e, x, 0.0, 0.0)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::CoefficientSign { name, x, value })
    }
}

/// The nodal right side `r` of the collocation system.
fn collocation_forcing(
    values: &[f64],
    t: f64,
    spec: &ProblemSpec,
    rule: &QuadratureRule,
    diff: &DiffMatrix,
) -> Result<DVector<f64>> {
    let nodes = rule.nodes();
    let m = nodes.len();
    let dv = diff.apply(values)?;
    let mut flux = vec![0.0; m];
    for j in 0..m {
        let alpha = eval_coefficient("alpha", spec.alpha(), nodes[j], t, values[j])?;
        flux[j] = alpha * dv[j];
    }
    let dflux = diff.apply(&flux)?;
    let mut r = DVector::zeros(m);
    for j in 1..m - 1 {
        let (x, v) = (nodes[j], values[j]);
        let beta = eval_coefficient("beta", spec.beta(), x, t, v)?;
        let gamma = eval_coefficient("gamma", spec.gamma(), x, t, v)?;
        r[j] = -dflux[j] + beta * dv[j] + gamma;
    }
    Ok(r)
}

fn solve_collocation(
    lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    r: DVector<f64>,
) -> Result<Vec<f64>> {
    let mut u = lu
        .solve(&r)
        .ok_or_else(|| Error::Numeric("collocation matrix is singular".into()))?;
    let last = u.len() - 1;
    u[0] = 0.0;
    u[last] = 0.0;
    Ok(u.iter().copied().collect())
}

fn collocation_initial_values(spec: &ProblemSpec, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let mut values = crate::spaces::sample(spec.v0(), rule.nodes())?;
    let last = values.len() - 1;
    values[0] = 0.0;
    values[last] = 0.0;
    Ok(values)
}

/// `R_N v0`, the Galerkin initial state.
pub fn galerkin_initial(spec: &ProblemSpec, n: usize) -> Result<BoundaryField> {
    let system = GalerkinSystem::new(spec, n)?;
    let coeffs = system.initial(spec)?;
    system.field(&coeffs)
}

/// `I_N v0`, the collocation initial state.
pub fn collocation_initial(spec: &ProblemSpec, rule: &QuadratureRule) -> Result<BoundaryField> {
    if rule.mu() != spec.mu() {
        return Err(Error::Precondition(format!(
            "rule weight exponent {} differs from the problem's {}",
            rule.mu(),
            spec.mu()
        )));
    }
    let values = collocation_initial_values(spec, rule)?;
    let space = SpectralSpace::new(rule.n(), rule.mu())?;
    BoundaryField::new(space.from_nodal(values)?)
}

/// The Galerkin time derivative: `xi` in `P_N^0` with `A(xi, phi_j) = B(v, phi_j)`.
pub fn galerkin_rhs(
    v: &BoundaryField,
    t: f64,
    spec: &ProblemSpec,
    mats: &FormMatrices,
    basis: &BoundaryBasis,
    table: &BasisTable,
) -> Result<BoundaryField> {
    let modal = v
        .modal()
        .ok_or_else(|| Error::Precondition("galerkin_rhs needs modal coefficients".into()))?;
    let coeffs = basis.from_modal(modal)?;
    let (values, derivs) = table.synthesize(&coeffs);
    let b = b_functional(&values, &derivs, t, spec, table)?;
    let xi = mats.solve(&b)?;
    let modal = basis.to_modal(xi.as_slice())?;
    Ok(BoundaryField::from_modal_trusted(
        SpectralField::from_modal(basis.n(), basis.mu(), modal)?,
    ))
}

/// The collocation time derivative at the nodes of `rule`.
pub fn collocation_rhs(
    v: &BoundaryField,
    t: f64,
    spec: &ProblemSpec,
    rule: &QuadratureRule,
    diff: &DiffMatrix,
) -> Result<BoundaryField> {
    let values = v
        .nodal()
        .ok_or_else(|| Error::Precondition("collocation_rhs needs nodal values".into()))?;
    let lu = collocation_matrix(spec, rule, diff)?;
    let r = collocation_forcing(values, t, spec, rule, diff)?;
    let u = solve_collocation(&lu, r)?;
    BoundaryField::new(SpectralField::from_nodal(rule.n(), rule.mu(), u)?)
}

enum System {
    Galerkin(Box<GalerkinSystem>),
    Collocation(Box<CollocationSystem>),
}

impl System {
    fn rhs(&self, y: &[f64], t: f64, spec: &ProblemSpec) -> Result<Vec<f64>> {
        match self {
            System::Galerkin(s) => s.rhs(y, t, spec),
            System::Collocation(s) => s.rhs(y, t, spec),
        }
    }

    fn field(&self, y: &[f64]) -> Result<BoundaryField> {
        match self {
            System::Galerkin(s) => s.field(y),
            System::Collocation(s) => s.field(y),
        }
    }
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn rk4_step(system: &System, spec: &ProblemSpec, t: f64, h: f64, y: &[f64]) -> Result<Vec<f64>> {
    let k1 = system.rhs(y, t, spec)?;
    let k2 = system.rhs(&axpy(y, h / 2.0, &k1), t + h / 2.0, spec)?;
    let k3 = system.rhs(&axpy(y, h / 2.0, &k2), t + h / 2.0, spec)?;
    let k4 = system.rhs(&axpy(y, h, &k3), t + h, spec)?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Implicit trapezoid with a simplified Newton iteration whose Jacobian is
/// refreshed only when convergence slows.
struct Trapezoid {
    newton: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl Trapezoid {
    const MAX_ITER: usize = 25;
    const SLOW: usize = 6;

    fn jacobian(
        system: &System,
        spec: &ProblemSpec,
        t: f64,
        y: &[f64],
        f0: &[f64],
    ) -> Result<DMatrix<f64>> {
        let n = y.len();
        let mut jac = DMatrix::zeros(n, n);
        let mut probe = y.to_vec();
        for k in 0..n {
            let h = 1e-7 * (1.0 + y[k].abs());
            probe[k] = y[k] + h;
            let f = system.rhs(&probe, t, spec)?;
            for i in 0..n {
                jac[(i, k)] = (f[i] - f0[i]) / h;
            }
            probe[k] = y[k];
        }
        Ok(jac)
    }

    fn step(
        &mut self,
        system: &System,
        spec: &ProblemSpec,
        t: f64,
        h: f64,
        y: &[f64],
    ) -> Result<Vec<f64>> {
        let f0 = system.rhs(y, t, spec)?;
        for attempt in 0..2 {
            if self.newton.is_none() || attempt == 1 {
                let jac = Self::jacobian(system, spec, t, y, &f0)?;
                let n = y.len();
                let m = DMatrix::identity(n, n) - jac * (h / 2.0);
                self.newton = Some(m.lu());
            }
            let lu = self.newton.as_ref().expect("just set");
            let mut z = axpy(y, h, &f0);
            for iter in 0..Self::MAX_ITER {
                let fz = system.rhs(&z, t + h, spec)?;
                let g = DVector::from_iterator(
                    y.len(),
                    (0..y.len()).map(|i| z[i] - y[i] - h / 2.0 * (f0[i] + fz[i])),
                );
                let delta = lu
                    .solve(&g)
                    .ok_or_else(|| Error::Numeric("trapezoid Newton matrix is singular".into()))?;
                let scale = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for (zi, d) in z.iter_mut().zip(delta.iter()) {
                    *zi -= d;
                }
                if delta.amax() <= 1e-13 * scale {
                    if iter >= Self::SLOW {
                        self.newton = None;
                    }
                    return Ok(z);
                }
                if !delta.amax().is_finite() {
                    break;
                }
            }
        }
        Err(Error::Numeric(format!(
            "trapezoid Newton iteration failed to converge at t = {}",
            t + h
        )))
    }
}

fn check_state(y: &[f64], t: f64) -> Result<()> {
    if y.iter()
        .all(|v| v.is_finite() && v.abs() <= BLOWUP_THRESHOLD)
    {
        Ok(())
    } else {
        Err(Error::Divergence { time: t })
    }
}

/// Integrates from the scheme's initial condition to `T` with a fixed step.
pub fn integrate(spec: &ProblemSpec, cfg: &SolveConfig) -> Result<Trajectory> {
    cfg.validate(spec.t_final())?;
    let system = match cfg.scheme {
        Scheme::Galerkin => System::Galerkin(Box::new(match cfg.over_quadrature {
            Some(m) => GalerkinSystem::with_over_quadrature(spec, cfg.n, m)?,
            None => GalerkinSystem::new(spec, cfg.n)?,
        })),
        Scheme::Collocation => System::Collocation(Box::new(CollocationSystem::new(spec, cfg.n)?)),
    };
    let mut y = match &system {
        System::Galerkin(s) => s.initial(spec)?,
        System::Collocation(s) => s.initial(spec)?,
    };
    let t_final = spec.t_final();
    let steps = ((t_final / cfg.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let stride = match cfg.sampling {
        Sampling::All => 1,
        Sampling::Count(k) => (steps / k.max(1)).max(1),
    };
    debug!(
        "integrating {} N = {} mu = {} with {steps} steps of {h:e}",
        cfg.scheme,
        cfg.n,
        spec.mu()
    );

    let mut times = vec![0.0];
    let mut fields = vec![system.field(&y)?];
    let mut trapezoid = Trapezoid { newton: None };
    for step in 1..=steps {
        let t = (step - 1) as f64 * h;
        y = match cfg.integrator {
            Integrator::Rk4 => rk4_step(&system, spec, t, h, &y),
            Integrator::ImplicitTrapezoid => trapezoid.step(&system, spec, t, h, &y),
        }
        .map_err(|e| match e {
            Error::Numeric(_) => Error::Divergence { time: t },
            other => other,
        })?;
        let now = if step == steps {
            t_final
        } else {
            step as f64 * h
        };
        check_state(&y, now)?;
        if step % stride == 0 || step == steps {
            times.push(now);
            fields.push(system.field(&y)?);
        }
    }
    Ok(Trajectory {
        scheme: cfg.scheme,
        n: cfg.n,
        mu: spec.mu(),
        dt: h,
        steps,
        times,
        fields,
    })
}
