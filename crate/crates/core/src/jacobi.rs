//! Symmetric Jacobi polynomials `J_n = P_n^{(mu, mu)}` and Gauss-Lobatto-Jacobi
//! quadrature.
//!
//! The polynomials use the standard Jacobi normalization, `J_n(1) = binom(n + mu, n)`,
//! and are orthogonal on `(-1, 1)` under the weight `w(x) = (1 - x^2)^mu`.
//! Evaluation runs the three-term recurrence upward in `n`.
//!
//! Derivatives reduce to the shifted family through
//! `d/dx P_n^{(a,a)} = (n + 2a + 1) / 2 * P_{n-1}^{(a+1,a+1)}`.

use libm::tgamma as gamma;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest resolution `N` accepted for a discretization.
pub const MAX_DEGREE: usize = 256;

/// Largest quadrature resolution. Over-integration and reference runs go past
/// [`MAX_DEGREE`], so rules (and the bases that evaluate on them) get more room.
pub const MAX_RULE_RESOLUTION: usize = 4 * MAX_DEGREE;

pub(crate) fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > -1.0 && mu < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("mu must lie in (-1, 1), got {mu}")))
    }
}

fn check_point(x: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} lies outside [-1, 1]")))
    }
}

/// Coefficients of `J_{n+1}(x) = (a x + b) J_n(x) - c J_{n-1}(x)`.
///
/// `b` is always zero for the symmetric family; it is kept so the table reads
/// like the general three-term recurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recurrence {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Recurrence step from degree `n` to `n + 1` for `P^{(alpha, alpha)}`, `n >= 1`.
fn step(alpha: f64, n: usize) -> Recurrence {
    let n = n as f64;
    let denom = (n + 1.0) * (n + 2.0 * alpha + 1.0);
    Recurrence {
        a: (2.0 * n + 2.0 * alpha + 1.0) * (n + alpha + 1.0) / denom,
        b: 0.0,
        c: (n + alpha) * (n + alpha + 1.0) / denom,
    }
}

/// `P_n^{(alpha, alpha)}(x)` for any `alpha > -1`, no range checks.
pub(crate) fn eval_symmetric(alpha: f64, n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = (alpha + 1.0) * x;
    for k in 1..n {
        let r = step(alpha, k);
        let next = r.a * x * cur - r.c * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[k] = P_k^{(alpha, alpha)}(x)` for `k < out.len()`.
pub(crate) fn eval_symmetric_all(alpha: f64, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = (alpha + 1.0) * x;
    for k in 1..out.len() - 1 {
        let r = step(alpha, k);
        out[k + 1] = r.a * x * out[k] - r.c * out[k - 1];
    }
}

/// `d^k/dx^k P_n^{(alpha, alpha)}(x)`, any `k`, no range checks.
pub(crate) fn deriv_symmetric(alpha: f64, n: usize, k: usize, x: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut scale = 1.0;
    for i in 0..k {
        scale *= (n as f64 + 2.0 * alpha + 1.0 + i as f64) / 2.0;
    }
    scale * eval_symmetric(alpha + k as f64, n - k, x)
}

/// `binom(n + alpha, n)`, the value of `P_n^{(alpha, alpha)}` at `x = 1`.
pub(crate) fn endpoint_symmetric(alpha: f64, n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * (k as f64 + alpha) / k as f64)
}

/// `int_{-1}^{1} (1 - x^2)^mu dx`.
pub(crate) fn weight_mass(mu: f64) -> f64 {
    std::f64::consts::PI.sqrt() * gamma(mu + 1.0) / gamma(mu + 1.5)
}

/// Symmetric Jacobi family `J_n^{mu,mu}` up to a fixed maximum degree.
#[derive(Debug, Clone)]
pub struct JacobiBasis {
    mu: f64,
    max_degree: usize,
    recurrence: Vec<Recurrence>,
}

impl JacobiBasis {
    pub fn new(mu: f64, max_degree: usize) -> Result<Self> {
        check_mu(mu)?;
        if max_degree > MAX_RULE_RESOLUTION {
            return Err(Error::DegreeOutOfRange {
                degree: max_degree,
                max: MAX_RULE_RESOLUTION,
            });
        }
        // Entry 0 encodes J_1 = (mu + 1) x from J_0 = 1.
        let mut recurrence = Vec::with_capacity(max_degree.max(1));
        recurrence.push(Recurrence {
            a: mu + 1.0,
            b: 0.0,
            c: 0.0,
        });
        recurrence.extend((1..max_degree).map(|n| step(mu, n)));
        Ok(Self {
            mu,
            max_degree,
            recurrence,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Row `n` advances `J_n` to `J_{n+1}`.
    pub fn recurrence(&self) -> &[Recurrence] {
        &self.recurrence
    }

    fn check_degree(&self, n: usize) -> Result<()> {
        if n > self.max_degree {
            Err(Error::DegreeOutOfRange {
                degree: n,
                max: self.max_degree,
            })
        } else {
            Ok(())
        }
    }

    /// `J_n(x)`.
    pub fn eval(&self, n: usize, x: f64) -> Result<f64> {
        self.check_degree(n)?;
        check_point(x)?;
        let mut prev = 0.0;
        let mut cur = 1.0;
        for r in &self.recurrence[..n] {
            let next = (r.a * x + r.b) * cur - r.c * prev;
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    pub fn eval_many(&self, n: usize, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(n, x)).collect()
    }

    /// `d^k/dx^k J_n(x)` for `k` in `{1, 2}`.
    pub fn deriv(&self, n: usize, k: usize, x: f64) -> Result<f64> {
        if k == 0 || k > 2 {
            return Err(Error::UnsupportedOrder(k));
        }
        self.check_degree(n)?;
        check_point(x)?;
        Ok(deriv_symmetric(self.mu, n, k, x))
    }

    pub fn deriv_many(&self, n: usize, k: usize, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.deriv(n, k, x)).collect()
    }

    /// `J_n(1) = binom(n + mu, n)`.
    pub fn endpoint_value(&self, n: usize) -> f64 {
        endpoint_symmetric(self.mu, n)
    }

    /// Exact `||J_n||_{0,w}^2`.
    pub fn norm_sq(&self, n: usize) -> f64 {
        let mu = self.mu;
        let h0 = weight_mass(mu);
        if n == 0 {
            return h0;
        }
        // J_1 = (mu + 1) x and int x^2 w = h0 / (2 mu + 3).
        let mut h = (mu + 1.0) * (mu + 1.0) * h0 / (2.0 * mu + 3.0);
        for k in 2..=n {
            let k = k as f64;
            h *= (2.0 * k + 2.0 * mu - 1.0) / (2.0 * k + 2.0 * mu + 1.0) * (k + mu) * (k + mu)
                / (k * (k + 2.0 * mu));
        }
        h
    }
}

/// Gauss-Lobatto-Jacobi nodes and weights for `w(x) = (1 - x^2)^mu`.
///
/// `N + 1` points including both endpoints; exact for polynomials of degree
/// up to `2N - 1`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    mu: f64,
    n: usize,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// The resolution `N`; the rule has `N + 1` points.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_j f(x_j) w_j`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .sum()
    }
}

/// Builds the `(N + 1)`-point Gauss-Lobatto rule for `w_mu`.
///
/// Interior nodes are the zeros of `J_N'`, i.e. of `P_{N-1}^{(mu+1, mu+1)}`,
/// obtained as eigenvalues of that family's Jacobi matrix. Weights solve the
/// moment equations `sum_j w_j J_k(x_j) = (J_k, 1)_w`, `k = 0..=N`.
pub fn gauss_lobatto(n: usize, mu: f64) -> Result<QuadratureRule> {
    check_mu(mu)?;
    if n < 2 {
        return Err(Error::Domain(format!(
            "Gauss-Lobatto rules need N >= 2, got {n}"
        )));
    }
    if n > MAX_RULE_RESOLUTION {
        return Err(Error::DegreeOutOfRange {
            degree: n,
            max: MAX_RULE_RESOLUTION,
        });
    }

    let interior = shifted_gauss_nodes(n - 1, mu + 1.0)?;
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(-1.0);
    nodes.extend(interior);
    nodes.push(1.0);

    let weights = lobatto_weights(&nodes, mu)?;
    Ok(QuadratureRule {
        nodes,
        weights,
        mu,
        n,
    })
}

/// Zeros of `P_m^{(alpha, alpha)}` in ascending order, symmetrized about 0.
fn shifted_gauss_nodes(m: usize, alpha: f64) -> Result<Vec<f64>> {
    let mut jm = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let kf = k as f64;
        let s = 2.0 * kf + 2.0 * alpha;
        let b = 2.0 / s
            * (kf * (kf + alpha) * (kf + alpha) * (kf + 2.0 * alpha) / ((s + 1.0) * (s - 1.0)))
                .sqrt();
        jm[(k - 1, k)] = b;
        jm[(k, k - 1)] = b;
    }
    let eigen = SymmetricEigen::try_new(jm, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("Golub-Welsch eigensolver did not converge".into()))?;
    let mut x: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    x.sort_by(|a, b| a.total_cmp(b));
    for i in 0..m / 2 {
        let s = 0.5 * (x[m - 1 - i] - x[i]);
        x[i] = -s;
        x[m - 1 - i] = s;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    Ok(x)
}

fn lobatto_weights(nodes: &[f64], mu: f64) -> Result<Vec<f64>> {
    let size = nodes.len();
    // Row k holds J_k at every node, scaled to unit max-norm.
    let mut system = DMatrix::<f64>::zeros(size, size);
    let mut column = vec![0.0; size];
    for (j, &x) in nodes.iter().enumerate() {
        eval_symmetric_all(mu, x, &mut column);
        for (k, &v) in column.iter().enumerate() {
            system[(k, j)] = v;
        }
    }
    let mut rhs = DVector::<f64>::zeros(size);
    rhs[0] = weight_mass(mu);
    for k in 0..size {
        let scale = system.row(k).amax();
        system.row_mut(k).unscale_mut(scale);
        rhs[k] /= scale;
    }
    let w = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular moment system for quadrature weights".into()))?;
    let mut weights: Vec<f64> = w.iter().copied().collect();
    for i in 0..size / 2 {
        let s = 0.5 * (weights[i] + weights[size - 1 - i]);
        weights[i] = s;
        weights[size - 1 - i] = s;
    }
    if let Some(bad) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::Numeric(format!(
            "non-positive quadrature weight {bad}"
        )));
    }
    Ok(weights)
}
