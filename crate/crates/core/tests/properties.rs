use std::path::PathBuf;

use nalgebra::DVector;
use proptest::prelude::*;

use sobolev_spectral::config::StudyConfig;
use sobolev_spectral::expr::{Expr, Var};
use sobolev_spectral::forms::{apply_b, assemble_a, diff_matrix, weighted_grad, BoundaryBasis};
use sobolev_spectral::jacobi::{gauss_lobatto, JacobiBasis};
use sobolev_spectral::solver::{
    collocation_rhs, galerkin_rhs, integrate, GalerkinSystem, ProblemSpec, Sampling, Scheme,
    SolveConfig,
};
use sobolev_spectral::spaces::{inner_w, BoundaryField, SpectralSpace};
use sobolev_spectral::study::manufacture_forcing;

fn mu_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![Just(-0.5), Just(0.0), Just(0.25), -0.9f64..0.9]
}

/// Generalized binomial coefficient for a nonnegative integer `k`.
fn binom(r: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (r - i as f64) / (i + 1) as f64)
}

/// Explicit finite-sum representation of the symmetric Jacobi polynomial.
fn jacobi_explicit(mu: f64, n: usize, x: f64) -> f64 {
    (0..=n)
        .map(|s| {
            binom(n as f64 + mu, n - s)
                * binom(n as f64 + mu, s)
                * ((x - 1.0) / 2.0).powi(s as i32)
                * ((x + 1.0) / 2.0).powi((n - s) as i32)
        })
        .sum()
}

fn random_boundary_field(space: &SpectralSpace, raw: &[f64]) -> BoundaryField {
    let basis = BoundaryBasis::new(space.n(), space.mu()).unwrap();
    let coeffs: Vec<f64> = raw.iter().take(basis.dim()).copied().collect();
    space.boundary_field(&basis, &coeffs).unwrap()
}

fn nonlinear_spec(mu: f64) -> ProblemSpec {
    ProblemSpec::parse(
        "1 + x^2/2",
        "2 + x",
        "-(1+v^2)/4",
        "v/2 + x",
        "sin(t)*x*v",
        "(1-x^2)*cos(x)",
        mu,
        1.0,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recurrence_matches_explicit_sum(mu in mu_strategy(), n in 0usize..16, x in -1.0f64..1.0) {
        let basis = JacobiBasis::new(mu, 16).unwrap();
        let got = basis.eval(n, x).unwrap();
        let want = jacobi_explicit(mu, n, x);
        prop_assert!((got - want).abs() <= 1e-11 * (1.0 + want.abs()), "{got} vs {want}");
        prop_assert!((basis.endpoint_value(n) - binom(n as f64 + mu, n)).abs() <= 1e-12 * binom(n as f64 + mu, n));
    }

    #[test]
    fn jacobi_family_is_orthogonal(mu in mu_strategy(), m in 0usize..24, n in 0usize..24) {
        prop_assume!(m != n);
        let basis = JacobiBasis::new(mu, 24).unwrap();
        let rule = gauss_lobatto(32, mu).unwrap();
        let inner = rule.integrate(|x| basis.eval(m, x).unwrap() * basis.eval(n, x).unwrap());
        prop_assert!(inner.abs() <= 1e-12 * (basis.norm_sq(m) * basis.norm_sq(n)).sqrt());
    }

    #[test]
    fn rule_structure(mu in mu_strategy(), n in 2usize..80) {
        let rule = gauss_lobatto(n, mu).unwrap();
        let nodes = rule.nodes();
        prop_assert_eq!(nodes[0], -1.0);
        prop_assert_eq!(nodes[n], 1.0);
        prop_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(rule.weights().iter().all(|&w| w > 0.0));
        for k in 0..n {
            let x = nodes[k];
            prop_assert!((x + nodes[n - k]).abs() <= 1e-13, "symmetry");
        }
    }

    #[test]
    fn transforms_round_trip(mu in mu_strategy(), n in 2usize..64, raw in prop::collection::vec(-1.0f64..1.0, 65)) {
        let space = SpectralSpace::new(n, mu).unwrap();
        let modal = &raw[..=n];
        let back = space.analysis(&space.synthesis(modal).unwrap()).unwrap();
        let scale = modal.iter().map(|c| c.abs()).fold(0.0, f64::max);
        for (a, b) in modal.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12 * scale.max(1e-300) * 10.0);
        }
    }

    #[test]
    fn l2_projection_residual_is_orthogonal(mu in mu_strategy(), n in 2usize..32, k in 1.0f64..6.0, shift in -1.0f64..1.0) {
        let f = move |x: f64| (k * x + shift).sin() * (x * x + 1.0).ln();
        let space = SpectralSpace::new(n, mu).unwrap();
        let p = space.project_l2(&f).unwrap();
        let over = gauss_lobatto(4 * n + 40, mu).unwrap();
        let fnorm = inner_w(&f, &f, &over).unwrap().sqrt();
        for j in 0..=n {
            let residual = |x: f64| f(x) - p.eval(x).unwrap();
            let jk = |x: f64| space.basis().eval(j, x).unwrap();
            let r = inner_w(&residual, &jk, &over).unwrap();
            prop_assert!(r.abs() <= 1e-11 * fnorm * space.basis().norm_sq(j).sqrt());
        }
    }

    #[test]
    fn h10_projection_residual_vanishes(mu in mu_strategy(), n in 2usize..32, k in 1.0f64..6.0) {
        let f = move |x: f64| (1.0 - x * x) * (k * x).cos();
        let df = move |x: f64| -2.0 * x * (k * x).cos() - (1.0 - x * x) * k * (k * x).sin();
        let space = SpectralSpace::new(n, mu).unwrap();
        let q = space.project_h10(&f, &df).unwrap();
        let basis = BoundaryBasis::new(n, mu).unwrap();
        let over = gauss_lobatto(4 * n + 40, mu).unwrap();
        let dq = |x: f64| q.derivative_values(1, &[x]).unwrap()[0];
        for j in 0..basis.dim() {
            let mut e = vec![0.0; basis.dim()];
            e[j] = 1.0;
            let phi = space.boundary_field(&basis, &e).unwrap();
            let dphi = |x: f64| phi.derivative_values(1, &[x]).unwrap()[0];
            let residual = |x: f64| dq(x) - df(x);
            let r = inner_w(&residual, &dphi, &over).unwrap();
            let scale = inner_w(&dphi, &dphi, &over).unwrap().sqrt();
            prop_assert!(r.abs() <= 1e-11 * scale * (1.0 + k * k));
        }
    }

    #[test]
    fn weighted_grad_matches_limit_formula(mu in mu_strategy(), n in 2usize..40, raw in prop::collection::vec(-1.0f64..1.0, 40)) {
        let space = SpectralSpace::new(n, mu).unwrap();
        let psi = random_boundary_field(&space, &raw);
        for rule in [space.rule(), space.over_rule()] {
            let nodes = rule.nodes();
            let got = weighted_grad(&psi, nodes).unwrap();
            let d = psi.derivative_values(1, nodes).unwrap();
            let v = psi.derivative_values(0, nodes).unwrap();
            let last = nodes.len() - 1;
            let scale = d.iter().map(|z| z.abs()).fold(1.0, f64::max);
            for j in 0..nodes.len() {
                let x = nodes[j];
                // psi / (1 - x^2), with the removable singularity at the endpoints.
                let ratio = if j == 0 {
                    d[0] / 2.0
                } else if j == last {
                    -d[last] / 2.0
                } else {
                    v[j] / (1.0 - x * x)
                };
                let want = d[j] - 2.0 * mu * x * ratio;
                // Interior division loses digits near the endpoints.
                let tol = if j == 0 || j == last { 1e-10 } else { 1e-9 / (1.0 - x * x).max(1e-3) };
                prop_assert!((got[j] - want).abs() <= tol * scale, "j={} {} vs {}", j, got[j], want);
            }
        }
    }

    #[test]
    fn diff_matrix_is_exact_on_polynomials(mu in mu_strategy(), n in 2usize..48) {
        let rule = gauss_lobatto(n, mu).unwrap();
        let d = diff_matrix(&rule);
        let basis = JacobiBasis::new(mu, n).unwrap();
        for row in d.matrix().row_iter() {
            let scale = row.iter().map(|z| z.abs()).fold(1.0, f64::max);
            prop_assert!(row.sum().abs() <= 1e-11 * scale);
        }
        for k in 0..=n {
            let values = basis.eval_many(k, rule.nodes()).unwrap();
            let want = basis.deriv_many(k, 1, rule.nodes()).unwrap();
            let got = d.apply(&values).unwrap();
            let scale = want.iter().map(|z| z.abs()).fold(1.0, f64::max);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-11 * scale * n as f64, "k={k}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn galerkin_derivative_solves_weak_form(mu in mu_strategy(), n in 2usize..24, t in 0.0f64..1.0, raw in prop::collection::vec(-1.0f64..1.0, 24)) {
        let spec = nonlinear_spec(mu);
        let system = GalerkinSystem::new(&spec, n).unwrap();
        let v = random_boundary_field(system.space(), &raw);
        let xi = galerkin_rhs(&v, t, &spec, system.forms(), system.basis(), system.table()).unwrap();
        let coeffs = system.coefficients(&xi).unwrap();
        let lhs = system.forms().matrix() * DVector::from_vec(coeffs);
        let rhs = apply_b(&v, t, &spec, system.basis(), system.table()).unwrap();
        let scale = rhs.iter().map(|z| z.abs()).fold(1.0, f64::max);
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn collocation_derivative_solves_strong_form(mu in mu_strategy(), n in 2usize..32, t in 0.0f64..1.0, raw in prop::collection::vec(-1.0f64..1.0, 32)) {
        let spec = nonlinear_spec(mu);
        let space = SpectralSpace::new(n, mu).unwrap();
        let v = random_boundary_field(&space, &raw);
        let v = BoundaryField::new(space.from_nodal(v.nodal().unwrap().to_vec()).unwrap()).unwrap();
        let rule = space.rule();
        let d = diff_matrix(rule);
        let u = collocation_rhs(&v, t, &spec, rule, &d).unwrap();
        let (vals, u) = (v.nodal().unwrap(), u.nodal().unwrap());
        prop_assert_eq!(u[0], 0.0);
        prop_assert_eq!(u[n], 0.0);
        let x = rule.nodes();
        let ev = |e: &Expr, j: usize| e.eval(x[j], t, vals[j]).unwrap();
        let dv = d.apply(vals).unwrap();
        let a_du: Vec<f64> = d.apply(u).unwrap().iter().enumerate().map(|(j, z)| ev(spec.a(), j) * z).collect();
        let flux: Vec<f64> = (0..=n).map(|j| ev(spec.alpha(), j) * dv[j]).collect();
        let (d_adu, d_flux) = (d.apply(&a_du).unwrap(), d.apply(&flux).unwrap());
        let scale = d_flux.iter().chain(&d_adu).map(|z| z.abs()).fold(1.0, f64::max);
        for j in 1..n {
            let lhs = ev(spec.c(), j) * u[j] - d_adu[j];
            let rhs = -d_flux[j] + ev(spec.beta(), j) * dv[j] + ev(spec.gamma(), j);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "j={}: {} vs {}", j, lhs, rhs);
        }
    }

    #[test]
    fn linear_problem_energy_does_not_grow(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, k in 1.0f64..8.0) {
        let v0 = format!("(1-x^2)*({c1} + {c2}*x + sin({k}*x))");
        let spec = ProblemSpec::parse("1", "1", "-1", "0", "0", &v0, 0.0, 0.5).unwrap();
        let mut cfg = SolveConfig::new(Scheme::Galerkin, 16);
        cfg.dt = 0.01;
        cfg.sampling = Sampling::All;
        let traj = integrate(&spec, &cfg).unwrap();
        let space = SpectralSpace::new(16, 0.0).unwrap();
        let energies: Vec<f64> = traj.fields.iter().map(|f| space.norm(f, 1).unwrap()).collect();
        for w in energies.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-13));
        }
    }
}

#[test]
fn rk4_is_fourth_order_in_time() {
    let spec = ProblemSpec::parse("1", "1", "-1", "0", "0", "sin(pi*(x+1))", 0.0, 1.0).unwrap();
    let lambda = -std::f64::consts::PI.powi(2) / (1.0 + std::f64::consts::PI.powi(2));
    let exact = move |x: f64| (std::f64::consts::PI * (x + 1.0)).sin() * lambda.exp();
    let over = gauss_lobatto(64, 0.0).unwrap();
    let errors: Vec<f64> = [0.25, 0.125, 0.0625]
        .iter()
        .map(|&dt| {
            let mut cfg = SolveConfig::new(Scheme::Galerkin, 24);
            cfg.dt = dt;
            let v = integrate(&spec, &cfg).unwrap();
            let v = v.final_field();
            let e = |x: f64| exact(x) - v.eval(x).unwrap();
            inner_w(&e, &e, &over).unwrap().sqrt()
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.7, "observed order {order} from {errors:?}");
    }
}

#[test]
fn assembled_form_is_coercive_for_positive_coefficients() {
    for mu in [-0.5, 0.0, 0.25] {
        for n in [2, 8, 32] {
            let basis = BoundaryBasis::new(n, mu).unwrap();
            let space = SpectralSpace::new(n, mu).unwrap();
            let table = basis.tabulate(space.over_rule());
            let a: Expr = "1 + x^2/2".parse().unwrap();
            let c: Expr = "2 + x".parse().unwrap();
            let mats = assemble_a(&a, &c, &basis, &table).unwrap();
            assert!(mats.min_symmetric_eigenvalue() > 0.0);
        }
    }
}

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// The forcing by the chain rule on the coefficient expressions, without
/// substituting `v` before differentiating.
fn forcing_by_chain_rule(exact: &Expr, spec: &ProblemSpec, x: f64, t: f64) -> f64 {
    let d = |e: &Expr, v: Var| e.diff(v).unwrap();
    let at = |e: &Expr, v: f64| e.eval(x, t, v).unwrap();
    let u = at(exact, 0.0);
    let u_t = at(&d(exact, Var::T), 0.0);
    let u_x = at(&d(exact, Var::X), 0.0);
    let u_xx = at(&d(&d(exact, Var::X), Var::X), 0.0);
    let u_xt = at(&d(&d(exact, Var::X), Var::T), 0.0);
    let u_xxt = at(&d(&d(&d(exact, Var::X), Var::X), Var::T), 0.0);
    let (alpha, beta, gamma) = (spec.alpha(), spec.beta(), spec.gamma());
    let alpha_total_x = at(&d(alpha, Var::X), u) + at(&d(alpha, Var::V), u) * u_x;
    at(spec.c(), u) * u_t - (at(&d(spec.a(), Var::X), u) * u_xt + at(spec.a(), u) * u_xxt)
        + alpha_total_x * u_x
        + at(alpha, u) * u_xx
        - at(beta, u) * u_x
        - at(gamma, u)
}

#[test]
fn manufactured_forcing_matches_chain_rule_for_shipped_configs() {
    let mut checked = 0;
    for entry in std::fs::read_dir(config_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = StudyConfig::load(&path).unwrap();
        let Some(exact) = cfg.exact_expr().unwrap() else {
            continue;
        };
        let base = cfg.base_problem().unwrap();
        let g = manufacture_forcing(&exact, &base).unwrap();
        for i in 0..200 {
            let x = -1.0 + 2.0 * i as f64 / 199.0;
            let t = cfg.t_final * ((i * 37) % 200) as f64 / 199.0;
            let got = g.eval(x, t, 0.0).unwrap();
            let want = forcing_by_chain_rule(&exact, &base, x, t);
            assert!(
                (got - want).abs() <= 1e-10 * (1.0 + want.abs()),
                "{}: x={x} t={t}: {got} vs {want}",
                path.display()
            );
        }
        checked += 1;
    }
    assert!(checked >= 3);
}
