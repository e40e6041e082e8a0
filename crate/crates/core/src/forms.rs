//! Boundary-adapted basis of `P_N^0`, the bilinear form `A` and the functional
//! `B` of the weak formulation, their discrete analogues, the A-projection
//! `R_N`, and nodal differentiation.
//!
//! The basis is `phi_k = J_k + d_k J_{k+2}` for `k = 0..=N-2`, with `d_k`
//! making `phi_k(1) = 0`; by parity `phi_k(-1) = 0` as well. Each `phi_k` is a
//! multiple `s_k (1 - x^2) J_k^{mu+1}`, which gives the weighted gradient
//! `w^{-1} (phi_k w)' = phi_k' - 2 mu x s_k J_k^{mu+1}` without dividing by
//! the weight at the endpoints.

use log::debug;
use nalgebra::{DMatrix, DVector, SymmetricEigen, LU};

use crate::error::{Error, Result};
use crate::jacobi::{check_mu, endpoint_symmetric, eval_symmetric_all, QuadratureRule};
use crate::solver::{eval_coefficient, ProblemSpec};
use crate::spaces::{
    derivative_coeffs, sample, sum_series, BoundaryField, Evaluable, SpectralField,
};

/// Relative tolerance on the modal endpoint constraints when deflating.
const DEFLATION_TOL: f64 = 1e-10;

/// The two-term Jacobi basis of `P_N^0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryBasis {
    n: usize,
    mu: f64,
    d: Vec<f64>,
    s: Vec<f64>,
}

impl BoundaryBasis {
    pub fn new(n: usize, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        if n < 2 {
            return Err(Error::Domain(format!(
                "the boundary basis needs N >= 2, got {n}"
            )));
        }
        let (d, s) = (0..=n - 2)
            .map(|k| {
                let d = -endpoint_symmetric(mu, k) / endpoint_symmetric(mu, k + 2);
                let kf = k as f64;
                let s = -d * (2.0 * kf + 2.0 * mu + 4.0) * (2.0 * kf + 2.0 * mu + 3.0)
                    / (4.0 * (kf + 1.0) * (kf + 2.0));
                (d, s)
            })
            .unzip();
        Ok(Self { n, mu, d, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Dimension of `P_N^0`, i.e. `N - 1`.
    pub fn dim(&self) -> usize {
        self.n - 1
    }

    /// The combination coefficients `d_k`.
    pub fn combination(&self) -> &[f64] {
        &self.d
    }

    /// The factors `s_k` in `phi_k = s_k (1 - x^2) J_k^{mu+1}`.
    pub fn deflation_scales(&self) -> &[f64] {
        &self.s
    }

    /// Boundary coefficients to `J_k` coefficients (length `N + 1`).
    pub fn to_modal(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                found: coeffs.len(),
            });
        }
        let mut modal = vec![0.0; self.n + 1];
        for (k, &b) in coeffs.iter().enumerate() {
            modal[k] += b;
            modal[k + 2] += self.d[k] * b;
        }
        Ok(modal)
    }

    /// `J_k` coefficients to boundary coefficients, failing when the
    /// polynomial does not vanish at both endpoints.
    pub fn from_modal(&self, modal: &[f64]) -> Result<Vec<f64>> {
        if modal.len() != self.n + 1 {
            return Err(Error::Shape {
                expected: self.n + 1,
                found: modal.len(),
            });
        }
        let dim = self.dim();
        let mut b = vec![0.0; dim];
        let carried = |b: &[f64], k: usize| {
            if k >= 2 {
                self.d[k - 2] * b[k - 2]
            } else {
                0.0
            }
        };
        for k in 0..dim {
            b[k] = modal[k] - carried(&b, k);
        }
        let scale = modal.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for k in [self.n - 1, self.n] {
            let residual = (modal[k] - carried(&b, k)).abs();
            if residual > DEFLATION_TOL * scale {
                return Err(Error::Precondition(format!(
                    "polynomial does not vanish at the endpoints (deflation residual {residual:e})"
                )));
            }
        }
        Ok(b)
    }

    /// Values, derivatives and weighted gradients of every `phi_k` at the
    /// nodes of `rule`.
    pub fn tabulate(&self, rule: &QuadratureRule) -> BasisTable {
        let rows = rule.len();
        let dim = self.dim();
        let mut values = DMatrix::zeros(rows, dim);
        let mut derivs = DMatrix::zeros(rows, dim);
        let mut wgrad = DMatrix::zeros(rows, dim);
        let mut plain = vec![0.0; self.n + 1];
        let mut shifted = vec![0.0; self.n];
        let jprime = |buf: &[f64], m: usize| {
            if m == 0 {
                0.0
            } else {
                (m as f64 + 2.0 * self.mu + 1.0) / 2.0 * buf[m - 1]
            }
        };
        for (i, &x) in rule.nodes().iter().enumerate() {
            eval_symmetric_all(self.mu, x, &mut plain);
            eval_symmetric_all(self.mu + 1.0, x, &mut shifted);
            for k in 0..dim {
                let d = self.d[k];
                values[(i, k)] = plain[k] + d * plain[k + 2];
                let dphi = jprime(&shifted, k) + d * jprime(&shifted, k + 2);
                derivs[(i, k)] = dphi;
                wgrad[(i, k)] = dphi - 2.0 * self.mu * x * self.s[k] * shifted[k];
            }
        }
        BasisTable {
            rule: rule.clone(),
            values,
            derivs,
            wgrad,
        }
    }
}

/// Boundary-basis samples on one quadrature rule; rows are nodes, columns
/// basis functions.
#[derive(Debug, Clone)]
pub struct BasisTable {
    rule: QuadratureRule,
    values: DMatrix<f64>,
    pub(crate) derivs: DMatrix<f64>,
    wgrad: DMatrix<f64>,
}

impl BasisTable {
    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn derivs(&self) -> &DMatrix<f64> {
        &self.derivs
    }

    /// `w^{-1} (phi_k w)'` at the nodes.
    pub fn weighted_grads(&self) -> &DMatrix<f64> {
        &self.wgrad
    }

    /// `sum_k b_k phi_k` and its derivative at the nodes.
    pub fn synthesize(&self, coeffs: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let b = DVector::from_column_slice(coeffs);
        (&self.values * &b, &self.derivs * &b)
    }
}

/// `w^{-1} (psi w)_x` at `nodes`, for `psi` vanishing at both endpoints.
pub fn weighted_grad(psi: &BoundaryField, nodes: &[f64]) -> Result<Vec<f64>> {
    let modal = psi
        .modal()
        .ok_or_else(|| Error::Precondition("weighted_grad needs modal coefficients".into()))?;
    let basis = BoundaryBasis::new(psi.n(), psi.mu())?;
    let b = basis.from_modal(modal)?;
    let q: Vec<f64> = b.iter().zip(&basis.s).map(|(b, s)| b * s).collect();
    let dpsi = derivative_coeffs(psi.mu(), modal, 1);
    let alpha = psi.mu() + 1.0;
    Ok(nodes
        .iter()
        .map(|&x| sum_series(alpha, &dpsi, x) - 2.0 * psi.mu() * x * sum_series(alpha, &q, x))
        .collect())
}

/// Which inner product a [`FormMatrices`] was assembled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// `A`, integrals by over-quadrature.
    Continuous,
    /// `A_N`, discrete inner products at resolution `N`.
    Discrete,
}

/// An assembled form on the boundary basis together with its LU factors.
#[derive(Debug, Clone)]
pub struct FormMatrices {
    kind: FormKind,
    matrix: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    min_sym_eigenvalue: f64,
    a_values: Vec<f64>,
    c_values: Vec<f64>,
}

impl FormMatrices {
    pub fn kind(&self) -> FormKind {
        self.kind
    }

    /// `matrix[(j, k)] = A(phi_k, phi_j)`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_symmetric_eigenvalue(&self) -> f64 {
        self.min_sym_eigenvalue
    }

    /// `a` and `c` at the nodes used for assembly.
    pub fn coefficient_values(&self) -> (&[f64], &[f64]) {
        (&self.a_values, &self.c_values)
    }

    /// Solves `matrix * x = rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu
            .solve(rhs)
            .ok_or_else(|| Error::Numeric("form matrix is singular".into()))
    }

    /// `A(u, v)` for boundary coefficient vectors.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        v.dot(&(&self.matrix * u))
    }
}

fn sample_positive(
    name: &'static str,
    f: &(impl Evaluable + ?Sized),
    nodes: &[f64],
) -> Result<Vec<f64>> {
    nodes
        .iter()
        .map(|&x| {
            let value = f.value_at(x).map_err(|e| Error::Evaluation {
                name,
                x,
                message: e.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::Evaluation {
                    name,
                    x,
                    message: format!("non-finite value {value}"),
                });
            }
            if value <= 0.0 {
                return Err(Error::CoefficientSign { name, x, value });
            }
            Ok(value)
        })
        .collect()
}

fn assemble(
    kind: FormKind,
    a_fn: &(impl Evaluable + ?Sized),
    c_fn: &(impl Evaluable + ?Sized),
    basis: &BoundaryBasis,
    table: &BasisTable,
) -> Result<FormMatrices> {
    if table.values.ncols() != basis.dim() {
        return Err(Error::Shape {
            expected: basis.dim(),
            found: table.values.ncols(),
        });
    }
    let rule = &table.rule;
    let a_values = sample_positive("a", a_fn, rule.nodes())?;
    let c_values = sample_positive("c", c_fn, rule.nodes())?;
    let wa = DVector::from_iterator(
        rule.len(),
        rule.weights().iter().zip(&a_values).map(|(w, a)| w * a),
    );
    let wc = DVector::from_iterator(
        rule.len(),
        rule.weights().iter().zip(&c_values).map(|(w, c)| w * c),
    );
    let mass = table.values.transpose() * DMatrix::from_diagonal(&wc) * &table.values;
    let stiff = table.wgrad.transpose() * DMatrix::from_diagonal(&wa) * &table.derivs;
    let matrix = mass + stiff;

    let sym = (&matrix + matrix.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("eigenvalue iteration did not converge".into()))?;
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if !(min > 0.0) {
        return Err(Error::Numeric(format!(
            "form is not coercive on P_N^0 (min symmetric eigenvalue {min:e})"
        )));
    }
    debug!(
        "assembled {kind:?} form: N = {}, mu = {}, symmetric condition {:.3e}",
        basis.n(),
        basis.mu(),
        max / min
    );
    let lu = matrix.clone().lu();
    if !lu.is_invertible() {
        return Err(Error::Numeric("form matrix is singular".into()));
    }
    Ok(FormMatrices {
        kind,
        matrix,
        lu,
        min_sym_eigenvalue: min,
        a_values,
        c_values,
    })
}

/// `A(phi_k, phi_j) = (c phi_k, phi_j)_w + int a phi_k' (phi_j w)' dx` on the
/// (over-integration) rule of `table`.
pub fn assemble_a(
    a_fn: &(impl Evaluable + ?Sized),
    c_fn: &(impl Evaluable + ?Sized),
    basis: &BoundaryBasis,
    table: &BasisTable,
) -> Result<FormMatrices> {
    assemble(FormKind::Continuous, a_fn, c_fn, basis, table)
}

/// `A_N(phi_k, phi_j)` with discrete inner products; `table` must sit on the
/// resolution-`N` rule.
pub fn assemble_a_n(
    a_fn: &(impl Evaluable + ?Sized),
    c_fn: &(impl Evaluable + ?Sized),
    basis: &BoundaryBasis,
    table: &BasisTable,
) -> Result<FormMatrices> {
    if table.rule.n() != basis.n() {
        return Err(Error::Shape {
            expected: basis.n(),
            found: table.rule.n(),
        });
    }
    assemble(FormKind::Discrete, a_fn, c_fn, basis, table)
}

/// `B(v, phi_j)` given `v` and `v_x` at the nodes of `table`.
pub(crate) fn b_functional(
    v: &DVector<f64>,
    vx: &DVector<f64>,
    t: f64,
    spec: &ProblemSpec,
    table: &BasisTable,
) -> Result<DVector<f64>> {
    let rule = &table.rule;
    let mut flux = DVector::zeros(rule.len());
    let mut source = DVector::zeros(rule.len());
    for (i, (&x, &w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let (vi, dvi) = (v[i], vx[i]);
        let alpha = eval_coefficient("alpha", spec.alpha(), x, t, vi)?;
        let beta = eval_coefficient("beta", spec.beta(), x, t, vi)?;
        let gamma = eval_coefficient("gamma", spec.gamma(), x, t, vi)?;
        flux[i] = w * alpha * dvi;
        source[i] = w * (beta * dvi + gamma);
    }
    Ok(table.wgrad.tr_mul(&flux) + table.values.tr_mul(&source))
}

/// `B(v, phi_j)` for every boundary basis function, by quadrature on the rule
/// of `table`.
pub fn apply_b(
    v: &BoundaryField,
    t: f64,
    spec: &ProblemSpec,
    basis: &BoundaryBasis,
    table: &BasisTable,
) -> Result<Vec<f64>> {
    let modal = v
        .modal()
        .ok_or_else(|| Error::Precondition("apply_b needs modal coefficients".into()))?;
    let coeffs = basis.from_modal(modal)?;
    let (values, derivs) = table.synthesize(&coeffs);
    Ok(b_functional(&values, &derivs, t, spec, table)?
        .iter()
        .copied()
        .collect())
}

/// Right-hand side `A(f, phi_j)` for the A-projection.
fn a_projection_rhs(
    f: &(impl Evaluable + ?Sized),
    df: &(impl Evaluable + ?Sized),
    mats: &FormMatrices,
    table: &BasisTable,
) -> Result<DVector<f64>> {
    let rule = &table.rule;
    let (a, c) = mats.coefficient_values();
    if a.len() != rule.len() {
        return Err(Error::Shape {
            expected: a.len(),
            found: rule.len(),
        });
    }
    let fx = sample(f, rule.nodes())?;
    let dfx = sample(df, rule.nodes())?;
    let w = rule.weights();
    let cf = DVector::from_fn(rule.len(), |i, _| w[i] * c[i] * fx[i]);
    let adf = DVector::from_fn(rule.len(), |i, _| w[i] * a[i] * dfx[i]);
    Ok(table.values.tr_mul(&cf) + table.wgrad.tr_mul(&adf))
}

/// Boundary coefficients of `R_N f`, the solution of
/// `A(R_N f - f, phi_j) = 0` for every `j`.
pub fn project_a_coeffs(
    f: &(impl Evaluable + ?Sized),
    df: &(impl Evaluable + ?Sized),
    mats: &FormMatrices,
    basis: &BoundaryBasis,
    table: &BasisTable,
) -> Result<Vec<f64>> {
    for x in [-1.0, 1.0] {
        let y = f.value_at(x)?;
        if !(y.abs() <= 1e-10) {
            return Err(Error::Precondition(format!(
                "f must vanish at the endpoints, f({x}) = {y:e}"
            )));
        }
    }
    if mats.matrix.nrows() != basis.dim() {
        return Err(Error::Shape {
            expected: basis.dim(),
            found: mats.matrix.nrows(),
        });
    }
    let rhs = a_projection_rhs(f, df, mats, table)?;
    Ok(mats.solve(&rhs)?.iter().copied().collect())
}

/// `R_N f` as a modal boundary field; `df` is the derivative of `f`.
pub fn project_a(
    f: &(impl Evaluable + ?Sized),
    df: &(impl Evaluable + ?Sized),
    mats: &FormMatrices,
    basis: &BoundaryBasis,
    table: &BasisTable,
) -> Result<BoundaryField> {
    let coeffs = project_a_coeffs(f, df, mats, basis, table)?;
    let modal = basis.to_modal(&coeffs)?;
    Ok(BoundaryField::from_modal_trusted(
        SpectralField::from_modal(basis.n(), basis.mu(), modal)?,
    ))
}

/// Differentiation matrix on the nodes of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffMatrix(DMatrix<f64>);

impl DiffMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    /// Nodal values of `p'` from nodal values of `p`.
    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                found: values.len(),
            });
        }
        Ok((&self.0 * DVector::from_column_slice(values))
            .iter()
            .copied()
            .collect())
    }
}

/// Barycentric Lagrange differentiation matrix on the nodes of `rule`.
pub fn diff_matrix(rule: &QuadratureRule) -> DiffMatrix {
    let x = rule.nodes();
    let m = x.len();
    // Barycentric weights, with differences doubled to keep the products near 1.
    let lambda: Vec<f64> = (0..m)
        .map(|j| {
            let prod: f64 = (0..m)
                .filter(|&k| k != j)
                .map(|k| 2.0 * (x[j] - x[k]))
                .product();
            1.0 / prod
        })
        .collect();
    let mut d = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut diag = 0.0;
        for k in 0..m {
            if k != j {
                let v = lambda[k] / lambda[j] / (x[j] - x[k]);
                d[(j, k)] = v;
                diag -= v;
            }
        }
        d[(j, j)] = diag;
    }
    DiffMatrix(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::{deriv_symmetric, eval_symmetric, gauss_lobatto};
    use crate::spaces::{error_norms, over_resolution, SpectralSpace};
    use std::f64::consts::PI;

    const ONE: fn(f64) -> f64 = |_| 1.0;

    fn boundary(space: &SpectralSpace, f: impl Fn(f64) -> f64) -> BoundaryField {
        BoundaryField::new(space.interpolate(&f).unwrap()).unwrap()
    }

    fn spec(alpha: &str, beta: &str, gamma: &str) -> ProblemSpec {
        ProblemSpec::parse("1", "1", alpha, beta, gamma, "1 - x^2", 0.0, 1.0).unwrap()
    }

    #[test]
    fn basis_vanishes_and_factors() {
        for &mu in &[-0.5, 0.0, 0.25, 0.9] {
            let basis = BoundaryBasis::new(12, mu).unwrap();
            for k in 0..basis.dim() {
                let d = basis.combination()[k];
                let phi = |x: f64| eval_symmetric(mu, k, x) + d * eval_symmetric(mu, k + 2, x);
                assert!(phi(1.0).abs() < 1e-13 && phi(-1.0).abs() < 1e-13);
                for &x in &[-0.8, -0.1, 0.35, 0.7] {
                    let factored = basis.deflation_scales()[k]
                        * (1.0 - x * x)
                        * eval_symmetric(mu + 1.0, k, x);
                    assert!((phi(x) - factored).abs() < 1e-12 * (1.0 + phi(x).abs()));
                }
            }
        }
        let basis = BoundaryBasis::new(2, 0.0).unwrap();
        assert_eq!(basis.dim(), 1);
        assert!((basis.deflation_scales()[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn modal_round_trip_and_rejection() {
        let basis = BoundaryBasis::new(9, 0.25).unwrap();
        let b: Vec<f64> = (0..8).map(|k| (k as f64 * 0.7).sin()).collect();
        let modal = basis.to_modal(&b).unwrap();
        let back = basis.from_modal(&modal).unwrap();
        for (x, y) in b.iter().zip(&back) {
            assert!((x - y).abs() < 1e-13);
        }
        let mut bad = modal;
        bad[0] += 1e-3;
        assert!(matches!(
            basis.from_modal(&bad),
            Err(Error::Precondition(_))
        ));

        let smallest = BoundaryBasis::new(2, 0.0).unwrap();
        let modal = smallest.to_modal(&[2.0]).unwrap();
        assert_eq!(smallest.from_modal(&modal).unwrap(), vec![2.0]);
        assert!(smallest.from_modal(&[0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn weighted_grad_examples() {
        let space = SpectralSpace::new(8, 0.0).unwrap();
        let psi = boundary(&space, |x| (1.0 - x * x) * (x + 0.3).exp());
        let wg = weighted_grad(&psi, space.rule().nodes()).unwrap();
        let d = diff_matrix(space.rule());
        let dpsi = d.apply(psi.nodal().unwrap()).unwrap();
        for (a, b) in wg.iter().zip(&dpsi) {
            assert!((a - b).abs() < 1e-11);
        }

        for &mu in &[-0.5, 0.0, 0.25] {
            let space = SpectralSpace::new(6, mu).unwrap();
            let psi = boundary(&space, |x| 1.0 - x * x);
            let wg = weighted_grad(&psi, space.rule().nodes()).unwrap();
            for (&x, g) in space.rule().nodes().iter().zip(&wg) {
                assert!((g + 2.0 * (1.0 + mu) * x).abs() < 1e-12);
            }
        }

        let space = SpectralSpace::new(5, -0.5).unwrap();
        let psi = boundary(&space, |x| (1.0 - x * x) * x);
        let wg = weighted_grad(&psi, space.rule().nodes()).unwrap();
        for (&x, g) in space.rule().nodes().iter().zip(&wg) {
            assert!((g - (1.0 - 2.0 * x * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_grad_rejects_nonvanishing() {
        let space = SpectralSpace::new(5, 0.0).unwrap();
        let f = space.interpolate(&|x: f64| x + 2.0).unwrap();
        let fake = BoundaryField::from_modal_trusted(f);
        assert!(matches!(
            weighted_grad(&fake, &[0.0]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn assemble_a_examples() {
        // phi_0 = 3/2 (1 - x^2) for mu = 0.
        let basis = BoundaryBasis::new(2, 0.0).unwrap();
        let table = basis.tabulate(&gauss_lobatto(over_resolution(2), 0.0).unwrap());
        let mats = assemble_a(&ONE, &ONE, &basis, &table).unwrap();
        assert!((mats.matrix()[(0, 0)] - 56.0 / 15.0 * 2.25).abs() < 1e-12);

        let basis = BoundaryBasis::new(8, 0.0).unwrap();
        let table = basis.tabulate(&gauss_lobatto(over_resolution(8), 0.0).unwrap());
        let m = assemble_a(&ONE, &ONE, &basis, &table).unwrap();
        assert!((m.matrix() - m.matrix().transpose()).amax() <= 1e-12 * m.matrix().amax());

        for &mu in &[-0.5, 0.0, 0.25] {
            for n in [8, 32] {
                let basis = BoundaryBasis::new(n, mu).unwrap();
                let table = basis.tabulate(&gauss_lobatto(over_resolution(n), mu).unwrap());
                let a = |x: f64| 1.0 + 0.5 * x * x;
                let c = |x: f64| 2.0 + x;
                let m = assemble_a(&a, &c, &basis, &table).unwrap();
                assert!(m.min_symmetric_eigenvalue() > 0.0);
                assert_eq!(m.kind(), FormKind::Continuous);
            }
        }
    }

    #[test]
    fn assemble_a_rejects_bad_coefficients() {
        let basis = BoundaryBasis::new(4, 0.0).unwrap();
        let table = basis.tabulate(&gauss_lobatto(over_resolution(4), 0.0).unwrap());
        let neg = |x: f64| x;
        assert!(matches!(
            assemble_a(&neg, &ONE, &basis, &table),
            Err(Error::CoefficientSign { name: "a", .. })
        ));
        let nan = |_x: f64| f64::NAN;
        assert!(matches!(
            assemble_a(&ONE, &nan, &basis, &table),
            Err(Error::Evaluation { name: "c", .. })
        ));
    }

    #[test]
    fn apply_b_examples() {
        let space = SpectralSpace::new(4, 0.0).unwrap();
        let basis = BoundaryBasis::new(4, 0.0).unwrap();
        let table = basis.tabulate(space.over_rule());
        let v = boundary(&space, |x| 1.0 - x * x);

        let zero = apply_b(&v, 0.0, &spec("0", "0", "0"), &basis, &table).unwrap();
        assert!(zero.iter().all(|&b| b == 0.0));

        // Tested against phi_0 = 3/2 (1 - x^2).
        let b = apply_b(&v, 0.0, &spec("1", "0", "0"), &basis, &table).unwrap();
        assert!((b[0] - 8.0 / 3.0 * 1.5).abs() < 1e-13);
        let b = apply_b(&v, 0.0, &spec("0", "0", "1"), &basis, &table).unwrap();
        assert!((b[0] - 4.0 / 3.0 * 1.5).abs() < 1e-13);

        let bad = spec("log(v - 2)", "0", "0");
        assert!(matches!(
            apply_b(&v, 0.0, &bad, &basis, &table),
            Err(Error::Evaluation { name: "alpha", .. })
        ));
    }

    #[test]
    fn assemble_a_n_examples() {
        let basis = BoundaryBasis::new(2, 0.0).unwrap();
        let rule = gauss_lobatto(2, 0.0).unwrap();
        let m = assemble_a_n(&ONE, &ONE, &basis, &basis.tabulate(&rule)).unwrap();
        assert!((m.matrix()[(0, 0)] - 4.0 * 2.25).abs() < 1e-12);
        assert_eq!(m.kind(), FormKind::Discrete);

        let n = 10;
        let basis = BoundaryBasis::new(n, 0.0).unwrap();
        let discrete = assemble_a_n(
            &ONE,
            &ONE,
            &basis,
            &basis.tabulate(&gauss_lobatto(n, 0.0).unwrap()),
        )
        .unwrap();
        let exact = assemble_a(
            &ONE,
            &ONE,
            &basis,
            &basis.tabulate(&gauss_lobatto(over_resolution(n), 0.0).unwrap()),
        )
        .unwrap();
        for j in 0..basis.dim() {
            for k in 0..basis.dim() {
                if j + k + 4 < 2 * n {
                    let (a, b) = (discrete.matrix()[(j, k)], exact.matrix()[(j, k)]);
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "({j},{k})");
                }
            }
        }

        for &mu in &[-0.5, 0.0, 0.25] {
            let basis = BoundaryBasis::new(16, mu).unwrap();
            let rule = gauss_lobatto(16, mu).unwrap();
            let m =
                assemble_a_n(&|x: f64| 1.0 + x * x, &ONE, &basis, &basis.tabulate(&rule)).unwrap();
            assert!(m.min_symmetric_eigenvalue() > 0.0);
        }
        let wrong = gauss_lobatto(12, 0.0).unwrap();
        assert!(assemble_a_n(&ONE, &ONE, &basis, &basis.tabulate(&wrong)).is_err());
    }

    #[test]
    fn project_a_examples() {
        for &mu in &[-0.5, 0.0, 0.25] {
            let n = 8;
            let basis = BoundaryBasis::new(n, mu).unwrap();
            let table = basis.tabulate(&gauss_lobatto(over_resolution(n), mu).unwrap());
            let a = |x: f64| 1.0 + 0.25 * x;
            let mats = assemble_a(&a, &ONE, &basis, &table).unwrap();
            let f = |x: f64| (1.0 - x * x) * (x * x * x - 0.5 * x + 0.25);
            let df = |x: f64| {
                -2.0 * x * (x * x * x - 0.5 * x + 0.25) + (1.0 - x * x) * (3.0 * x * x - 0.5)
            };
            let q = project_a(&f, &df, &mats, &basis, &table).unwrap();
            for &x in &[-0.9, -0.3, 0.2, 0.8] {
                assert!((q.eval(x).unwrap() - f(x)).abs() < 1e-11);
            }
        }

        let n = 16;
        let space = SpectralSpace::new(n, 0.0).unwrap();
        let basis = BoundaryBasis::new(n, 0.0).unwrap();
        let table = basis.tabulate(space.over_rule());
        let mats = assemble_a(&ONE, &ONE, &basis, &table).unwrap();
        let f = |x: f64| (PI * (x + 1.0)).sin();
        let df = |x: f64| PI * (PI * (x + 1.0)).cos();
        let coeffs = project_a_coeffs(&f, &df, &mats, &basis, &table).unwrap();
        let q = project_a(&f, &df, &mats, &basis, &table).unwrap();
        let e = error_norms(&f, &df, &q, space.over_rule()).unwrap();
        assert!(e.h1w <= 1e-7, "{e:?}");

        let rhs = a_projection_rhs(&f, &df, &mats, &table).unwrap();
        let residual = mats.matrix() * DVector::from_vec(coeffs) - rhs;
        assert!(residual.amax() <= 1e-10);

        assert!(matches!(
            project_a(&|x: f64| x, &ONE, &mats, &basis, &table),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn diff_matrix_examples() {
        let rule = gauss_lobatto(6, 0.25).unwrap();
        let d = diff_matrix(&rule);
        assert!(d.apply(&[3.0; 7]).unwrap().iter().all(|v| v.abs() < 1e-12));

        let rule = gauss_lobatto(4, 0.0).unwrap();
        let d = diff_matrix(&rule);
        let sq: Vec<f64> = rule.nodes().iter().map(|x| x * x).collect();
        for (v, x) in d.apply(&sq).unwrap().iter().zip(rule.nodes()) {
            assert!((v - 2.0 * x).abs() < 1e-12);
        }

        let rule = gauss_lobatto(8, -0.5).unwrap();
        let d = diff_matrix(&rule);
        let j5: Vec<f64> = rule
            .nodes()
            .iter()
            .map(|&x| eval_symmetric(-0.5, 5, x))
            .collect();
        let exact: Vec<f64> = rule
            .nodes()
            .iter()
            .map(|&x| deriv_symmetric(-0.5, 5, 1, x))
            .collect();
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (v, e) in d.apply(&j5).unwrap().iter().zip(&exact) {
            assert!((v - e).abs() <= 1e-11 * scale);
        }
    }
}
