//! Weighted inner products and Sobolev norms, modal/nodal transforms, and the
//! approximation operators: the `L^2_w` projection, the `H^1_{w,0}` projection
//! and Gauss-Lobatto interpolation.
//!
//! A [`SpectralField`] is a polynomial of degree `N` held by its coefficients in
//! the `J_k^{mu,mu}` basis (modal) and/or its values at the Gauss-Lobatto nodes
//! (nodal). [`SpectralSpace`] owns the rule and the transform tables for one
//! `(N, mu)` pair.
//!
//! "Continuous" inner products against non-polynomial functions are computed by
//! over-integration on a Gauss-Lobatto rule of resolution [`over_resolution`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::forms::BoundaryBasis;
use crate::jacobi::{
    self, check_mu, eval_symmetric_all, gauss_lobatto, JacobiBasis, QuadratureRule, MAX_DEGREE,
};

/// Resolution of the over-integration rule paired with resolution `n`.
pub fn over_resolution(n: usize) -> usize {
    (2 * n).max(n + 32)
}

/// Anything that can be sampled on `[-1, 1]`.
pub trait Evaluable {
    fn value_at(&self, x: f64) -> Result<f64>;
}

impl<F: Fn(f64) -> f64> Evaluable for F {
    fn value_at(&self, x: f64) -> Result<f64> {
        Ok(self(x))
    }
}

/// Expressions are sampled at `t = v = 0`.
impl Evaluable for Expr {
    fn value_at(&self, x: f64) -> Result<f64> {
        Ok(self.eval(x, 0.0, 0.0)?)
    }
}

impl Evaluable for SpectralField {
    fn value_at(&self, x: f64) -> Result<f64> {
        self.eval(x)
    }
}

/// Samples `f` at every point, rejecting non-finite values.
pub(crate) fn sample(f: &(impl Evaluable + ?Sized), xs: &[f64]) -> Result<Vec<f64>> {
    xs.iter()
        .map(|&x| {
            let y = f.value_at(x)?;
            if y.is_finite() {
                Ok(y)
            } else {
                Err(Error::Input(format!("non-finite sample {y} at x = {x}")))
            }
        })
        .collect()
}

/// `sum_n coeffs[n] P_n^{(alpha, alpha)}(x)` by upward recurrence.
pub(crate) fn sum_series(alpha: f64, coeffs: &[f64], x: f64) -> f64 {
    let Some((&c0, rest)) = coeffs.split_first() else {
        return 0.0;
    };
    let mut total = c0;
    if rest.is_empty() {
        return total;
    }
    let mut prev = 1.0;
    let mut cur = (alpha + 1.0) * x;
    total += rest[0] * cur;
    for (k, &c) in rest.iter().enumerate().skip(1) {
        let n = k as f64;
        let denom = (n + 1.0) * (n + 2.0 * alpha + 1.0);
        let a = (2.0 * n + 2.0 * alpha + 1.0) * (n + alpha + 1.0) / denom;
        let b = (n + alpha) * (n + alpha + 1.0) / denom;
        let next = a * x * cur - b * prev;
        prev = cur;
        cur = next;
        total += c * cur;
    }
    total
}

/// Coefficients of the `k`-th derivative of `sum c_n J_n^{mu}` in the
/// `J^{mu+k}` family.
pub(crate) fn derivative_coeffs(mu: f64, coeffs: &[f64], k: usize) -> Vec<f64> {
    let mut current = coeffs.to_vec();
    let mut alpha = mu;
    for _ in 0..k {
        if current.len() <= 1 {
            return vec![0.0];
        }
        current = current
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, &c)| c * (n as f64 + 2.0 * alpha + 1.0) / 2.0)
            .collect();
        alpha += 1.0;
    }
    current
}

/// A polynomial of degree at most `N`, held in modal and/or nodal form.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    n: usize,
    mu: f64,
    modal: Option<Vec<f64>>,
    nodal: Option<Vec<f64>>,
}

impl SpectralField {
    pub fn from_modal(n: usize, mu: f64, coeffs: Vec<f64>) -> Result<Self> {
        check_mu(mu)?;
        check_len(n + 1, coeffs.len())?;
        Ok(Self {
            n,
            mu,
            modal: Some(coeffs),
            nodal: None,
        })
    }

    pub fn from_nodal(n: usize, mu: f64, values: Vec<f64>) -> Result<Self> {
        check_mu(mu)?;
        check_len(n + 1, values.len())?;
        Ok(Self {
            n,
            mu,
            modal: None,
            nodal: Some(values),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn modal(&self) -> Option<&[f64]> {
        self.modal.as_deref()
    }

    pub fn nodal(&self) -> Option<&[f64]> {
        self.nodal.as_deref()
    }

    fn require_modal(&self) -> Result<&[f64]> {
        self.modal
            .as_deref()
            .ok_or_else(|| Error::Precondition("field has no modal representation".into()))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(sum_series(self.mu, self.require_modal()?, x))
    }

    /// Values of the `k`-th derivative at each point.
    pub fn derivative_values(&self, k: usize, xs: &[f64]) -> Result<Vec<f64>> {
        let coeffs = derivative_coeffs(self.mu, self.require_modal()?, k);
        let alpha = self.mu + k as f64;
        Ok(xs.iter().map(|&x| sum_series(alpha, &coeffs, x)).collect())
    }

    /// Largest coefficient index with a non-negligible value.
    pub fn degree(&self) -> Option<usize> {
        let c = self.modal.as_deref()?;
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Some(c.iter().rposition(|v| v.abs() > 1e-12 * scale).unwrap_or(0))
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}

/// A field vanishing at both endpoints, i.e. a member of `P_N^0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField(SpectralField);

impl BoundaryField {
    /// Wraps a field whose nodal endpoint values are negligible.
    pub fn new(field: SpectralField) -> Result<Self> {
        let nodal = field
            .nodal()
            .ok_or_else(|| Error::Precondition("boundary field needs nodal values".into()))?;
        let scale = nodal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ends = nodal[0].abs().max(nodal[nodal.len() - 1].abs());
        if ends > 1e-12 * scale {
            return Err(Error::Precondition(format!(
                "field does not vanish at the endpoints (|v(+-1)| = {ends:e})"
            )));
        }
        Ok(Self(field))
    }

    /// Wraps a field known to lie in `P_N^0` by construction.
    pub(crate) fn from_modal_trusted(field: SpectralField) -> Self {
        Self(field)
    }

    pub fn field(&self) -> &SpectralField {
        &self.0
    }

    pub fn into_field(self) -> SpectralField {
        self.0
    }
}

impl std::ops::Deref for BoundaryField {
    type Target = SpectralField;
    fn deref(&self) -> &SpectralField {
        &self.0
    }
}

/// Rule, Jacobi family and transform tables for one `(N, mu)`.
#[derive(Debug, Clone)]
pub struct SpectralSpace {
    basis: JacobiBasis,
    rule: QuadratureRule,
    over: QuadratureRule,
    /// `vandermonde[(j, k)] = J_k(x_j)`.
    vandermonde: DMatrix<f64>,
    /// `(J_k, J_k)_{N,w}`.
    discrete_norms: Vec<f64>,
}

impl SpectralSpace {
    pub fn new(n: usize, mu: f64) -> Result<Self> {
        if n > MAX_DEGREE {
            return Err(Error::DegreeOutOfRange {
                degree: n,
                max: MAX_DEGREE,
            });
        }
        let rule = gauss_lobatto(n, mu)?;
        let over = gauss_lobatto(over_resolution(n), mu)?;
        let basis = JacobiBasis::new(mu, n)?;
        let mut vandermonde = DMatrix::zeros(n + 1, n + 1);
        let mut row = vec![0.0; n + 1];
        for (j, &x) in rule.nodes().iter().enumerate() {
            eval_symmetric_all(mu, x, &mut row);
            for (k, &v) in row.iter().enumerate() {
                vandermonde[(j, k)] = v;
            }
        }
        let discrete_norms = (0..=n)
            .map(|k| {
                rule.weights()
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * vandermonde[(j, k)] * vandermonde[(j, k)])
                    .sum()
            })
            .collect();
        Ok(Self {
            basis,
            rule,
            over,
            vandermonde,
            discrete_norms,
        })
    }

    pub fn n(&self) -> usize {
        self.rule.n()
    }

    pub fn mu(&self) -> f64 {
        self.rule.mu()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Over-integration rule of resolution [`over_resolution`]`(N)`.
    pub fn over_rule(&self) -> &QuadratureRule {
        &self.over
    }

    pub fn basis(&self) -> &JacobiBasis {
        &self.basis
    }

    /// Nodal values to modal coefficients (discrete Jacobi transform).
    pub fn analysis(&self, nodal: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n() + 1, nodal.len())?;
        let w = self.rule.weights();
        Ok((0..=self.n())
            .map(|k| {
                let s: f64 = (0..=self.n())
                    .map(|j| w[j] * nodal[j] * self.vandermonde[(j, k)])
                    .sum();
                s / self.discrete_norms[k]
            })
            .collect())
    }

    /// Modal coefficients to nodal values.
    pub fn synthesis(&self, modal: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n() + 1, modal.len())?;
        let c = DVector::from_column_slice(modal);
        Ok((&self.vandermonde * c).iter().copied().collect())
    }

    pub fn from_modal(&self, coeffs: Vec<f64>) -> Result<SpectralField> {
        let nodal = self.synthesis(&coeffs)?;
        Ok(SpectralField {
            n: self.n(),
            mu: self.mu(),
            modal: Some(coeffs),
            nodal: Some(nodal),
        })
    }

    pub fn from_nodal(&self, values: Vec<f64>) -> Result<SpectralField> {
        let modal = self.analysis(&values)?;
        Ok(SpectralField {
            n: self.n(),
            mu: self.mu(),
            modal: Some(modal),
            nodal: Some(values),
        })
    }

    /// Fills in whichever representation is missing.
    pub fn complete(&self, field: SpectralField) -> Result<SpectralField> {
        if field.n != self.n() || field.mu != self.mu() {
            return Err(Error::Shape {
                expected: self.n(),
                found: field.n,
            });
        }
        match (field.modal, field.nodal) {
            (Some(m), Some(v)) => Ok(SpectralField {
                modal: Some(m),
                nodal: Some(v),
                ..field
            }),
            (Some(m), None) => self.from_modal(m),
            (None, Some(v)) => self.from_nodal(v),
            (None, None) => Err(Error::Precondition("field has no representation".into())),
        }
    }

    /// `I_N f`: the interpolant at the Gauss-Lobatto nodes.
    pub fn interpolate(&self, f: &(impl Evaluable + ?Sized)) -> Result<SpectralField> {
        let values = sample(f, self.rule.nodes())?;
        self.from_nodal(values)
    }

    /// `P_N f`: the `L^2_w` orthogonal projection.
    pub fn project_l2(&self, f: &(impl Evaluable + ?Sized)) -> Result<SpectralField> {
        let over = &self.over;
        let fx = sample(f, over.nodes())?;
        let n = self.n();
        let mut acc = vec![0.0; n + 1];
        let mut row = vec![0.0; n + 1];
        for ((&x, &w), &y) in over.nodes().iter().zip(over.weights()).zip(&fx) {
            eval_symmetric_all(self.mu(), x, &mut row);
            for (a, j) in acc.iter_mut().zip(&row) {
                *a += w * y * j;
            }
        }
        let coeffs = acc
            .iter()
            .enumerate()
            .map(|(k, a)| a / self.basis.norm_sq(k))
            .collect();
        self.from_modal(coeffs)
    }

    /// `P_N^{10} f`: the projection onto `P_N^0` under `[u, v] = (u', v')_w`.
    ///
    /// `df` is the derivative of `f`; `f` must vanish at both endpoints.
    pub fn project_h10(
        &self,
        f: &(impl Evaluable + ?Sized),
        df: &(impl Evaluable + ?Sized),
    ) -> Result<BoundaryField> {
        for x in [-1.0, 1.0] {
            let y = f.value_at(x)?;
            if !(y.abs() <= 1e-10) {
                return Err(Error::Precondition(format!(
                    "f must vanish at the endpoints, f({x}) = {y:e}"
                )));
            }
        }
        let boundary = BoundaryBasis::new(self.n(), self.mu())?;
        let table = boundary.tabulate(&self.over);
        let dfx = sample(df, self.over.nodes())?;
        let w = DVector::from_column_slice(self.over.weights());
        let weighted = DMatrix::from_diagonal(&w) * &table.derivs;
        let gram = table.derivs.transpose() * &weighted;
        let rhs = weighted.transpose() * DVector::from_vec(dfx);
        let coeffs = gram
            .cholesky()
            .ok_or_else(|| Error::Numeric("H1_0 Gram matrix is not positive definite".into()))?
            .solve(&rhs);
        self.boundary_field(&boundary, coeffs.as_slice())
    }

    /// Builds the field `sum_k b_k phi_k` from boundary-basis coefficients.
    pub fn boundary_field(&self, basis: &BoundaryBasis, coeffs: &[f64]) -> Result<BoundaryField> {
        let modal = basis.to_modal(coeffs)?;
        let mut field = self.from_modal(modal)?;
        if let Some(nodal) = field.nodal.as_mut() {
            nodal[0] = 0.0;
            let last = nodal.len() - 1;
            nodal[last] = 0.0;
        }
        Ok(BoundaryField(field))
    }

    /// `||f||_{k,w}` computed on this space's over-integration rule.
    pub fn norm(&self, f: &SpectralField, k: usize) -> Result<f64> {
        norm_sobolev(f, k, &self.over)
    }
}

/// `(f, g)_w` approximated on `rule`; exact when `f g` has degree at most `2N - 1`.
pub fn inner_w(
    f: &(impl Evaluable + ?Sized),
    g: &(impl Evaluable + ?Sized),
    rule: &QuadratureRule,
) -> Result<f64> {
    let fx = sample(f, rule.nodes())?;
    let gx = sample(g, rule.nodes())?;
    Ok(rule
        .weights()
        .iter()
        .zip(fx.iter().zip(&gx))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

/// The discrete inner product `sum_j f_j g_j w_j` on nodal values.
pub fn inner_n(f: &[f64], g: &[f64], rule: &QuadratureRule) -> Result<f64> {
    check_len(rule.len(), f.len())?;
    check_len(rule.len(), g.len())?;
    Ok(rule
        .weights()
        .iter()
        .zip(f.iter().zip(g))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

/// [`inner_n`] on the nodal representations of two fields.
pub fn inner_n_fields(f: &SpectralField, g: &SpectralField, rule: &QuadratureRule) -> Result<f64> {
    let nodal = |h: &SpectralField| -> Result<Vec<f64>> {
        if h.n != rule.n() {
            return Err(Error::Shape {
                expected: rule.n(),
                found: h.n,
            });
        }
        match h.nodal() {
            Some(v) => Ok(v.to_vec()),
            None => sample(h, rule.nodes()),
        }
    };
    inner_n(&nodal(f)?, &nodal(g)?, rule)
}

/// `||f||_{k,w} = (sum_{j<=k} ||f^{(j)}||_{0,w}^2)^{1/2}` for `k <= 2`.
///
/// Each term is exact on `rule` as long as its resolution is at least `N + 1`.
pub fn norm_sobolev(f: &SpectralField, k: usize, rule: &QuadratureRule) -> Result<f64> {
    if k > 2 {
        return Err(Error::UnsupportedOrder(k));
    }
    if rule.n() < f.n() + 1 {
        return Err(Error::Shape {
            expected: f.n() + 1,
            found: rule.n(),
        });
    }
    let mut total = 0.0;
    for j in 0..=k {
        let values = f.derivative_values(j, rule.nodes())?;
        total += values
            .iter()
            .zip(rule.weights())
            .map(|(v, w)| w * v * v)
            .sum::<f64>();
    }
    Ok(total.sqrt())
}

/// `||f - approx||_{0,w}` and `||f - approx||_{1,w}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2w: f64,
    pub h1w: f64,
}

/// Error norms of `approx` against `f` (with derivative `df`) on `rule`.
pub fn error_norms(
    f: &(impl Evaluable + ?Sized),
    df: &(impl Evaluable + ?Sized),
    approx: &SpectralField,
    rule: &QuadratureRule,
) -> Result<ErrorNorms> {
    let xs = rule.nodes();
    let fx = sample(f, xs)?;
    let dfx = sample(df, xs)?;
    let ax = approx.derivative_values(0, xs)?;
    let dax = approx.derivative_values(1, xs)?;
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for j in 0..xs.len() {
        let w = rule.weights()[j];
        let e = fx[j] - ax[j];
        let de = dfx[j] - dax[j];
        l2 += w * e * e;
        h1 += w * de * de;
    }
    Ok(ErrorNorms {
        l2w: l2.sqrt(),
        h1w: (l2 + h1).sqrt(),
    })
}

/// `P_N f` for resolution `n` and weight exponent `mu`.
pub fn project_l2(f: &(impl Evaluable + ?Sized), n: usize, mu: f64) -> Result<SpectralField> {
    SpectralSpace::new(n, mu)?.project_l2(f)
}

/// `P_N^{10} f`; `df` is the derivative of `f`.
pub fn project_h10(
    f: &(impl Evaluable + ?Sized),
    df: &(impl Evaluable + ?Sized),
    n: usize,
    mu: f64,
) -> Result<BoundaryField> {
    SpectralSpace::new(n, mu)?.project_h10(f, df)
}

/// `I_N f` on the nodes of `rule`.
pub fn interpolate(f: &(impl Evaluable + ?Sized), rule: &QuadratureRule) -> Result<SpectralField> {
    SpectralSpace::new(rule.n(), rule.mu())?.interpolate(f)
}

/// `|(f, phi)_w - (f, phi)_{N,w}|`, the continuous side by over-integration.
pub fn quadrature_gap(
    f: &(impl Evaluable + ?Sized),
    phi: &SpectralField,
    rule: &QuadratureRule,
) -> Result<f64> {
    if phi.n() != rule.n() {
        return Err(Error::Shape {
            expected: rule.n(),
            found: phi.n(),
        });
    }
    let over = jacobi::gauss_lobatto(over_resolution(rule.n()), rule.mu())?;
    let exact = inner_w(f, phi, &over)?;
    let discrete = inner_w(f, phi, rule)?;
    Ok((exact - discrete).abs())
}
