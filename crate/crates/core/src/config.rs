//! The JSON study configuration.
//!
//! ```json
//! {
//!   "mu": 0.0, "T": 1.0, "dt": 0.001,
//!   "schemes": ["galerkin", "collocation"],
//!   "n_list": [8, 12, 16, 20, 24],
//!   "a": "1", "c": "1",
//!   "alpha": "-(1+v^2)/4", "beta": "v/2", "gamma": "0",
//!   "v0": "(1-x^2)*cos(3*x)",
//!   "exact": "(1-x^2)*exp(-t)*cos(3*x)",
//!   "error_norms": ["l2w", "h1w"],
//!   "out": "smooth.csv"
//! }
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::jacobi::MAX_DEGREE;
use crate::solver::{ProblemSpec, Scheme};
use crate::study::manufacture_forcing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorNorm {
    L2w,
    H1w,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub mu: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub schemes: Vec<Scheme>,
    pub n_list: Vec<usize>,
    pub a: String,
    pub c: String,
    pub alpha: String,
    pub beta: String,
    pub gamma: String,
    pub v0: String,
    #[serde(default)]
    pub exact: Option<String>,
    pub error_norms: Vec<ErrorNorm>,
    pub out: String,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Checks everything that does not need a solve.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("T must be positive, got {}", self.t_final));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_final) {
            return bad(format!("dt must lie in (0, T], got {}", self.dt));
        }
        if self.schemes.is_empty() {
            return bad("schemes must not be empty".into());
        }
        if self.schemes.iter().collect::<BTreeSet<_>>().len() != self.schemes.len() {
            return bad("schemes must not repeat".into());
        }
        if self.n_list.is_empty() {
            return bad("n_list must not be empty".into());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_list must be strictly ascending".into());
        }
        if self.n_list[0] < 2 {
            return bad("every N must be at least 2".into());
        }
        if let Some(&n) = self.n_list.last() {
            if n > MAX_DEGREE {
                return bad(format!("N = {n} exceeds the maximum {MAX_DEGREE}"));
            }
        }
        if self.error_norms.is_empty() {
            return bad("error_norms must not be empty".into());
        }
        let problem = self.base_problem()?;
        if let Some(exact) = self.exact_expr()? {
            if exact.depends_on(Var::V) {
                return bad("exact may depend on x and t only".into());
            }
            for t in [0.0, self.t_final] {
                for x in [-1.0, 1.0] {
                    let y = exact.eval(x, t, 0.0)?;
                    if !(y.abs() <= 1e-10) {
                        return bad(format!("exact does not vanish at x = {x}, t = {t}: {y:e}"));
                    }
                }
            }
            for k in 0..=20 {
                let x = -1.0 + k as f64 / 10.0;
                let (e, v) = (exact.eval(x, 0.0, 0.0)?, problem.v0().eval(x, 0.0, 0.0)?);
                if !((e - v).abs() <= 1e-10 * (1.0 + e.abs())) {
                    return bad(format!("v0 disagrees with exact at t = 0, x = {x}"));
                }
            }
        }
        Ok(())
    }

    pub fn exact_expr(&self) -> Result<Option<Expr>> {
        self.exact
            .as_deref()
            .map(|s| s.parse::<Expr>().map_err(Error::from))
            .transpose()
    }

    /// The problem with the configured `gamma`.
    pub fn base_problem(&self) -> Result<ProblemSpec> {
        ProblemSpec::parse(
            &self.a,
            &self.c,
            &self.alpha,
            &self.beta,
            &self.gamma,
            &self.v0,
            self.mu,
            self.t_final,
        )
        .map_err(|e| match e {
            Error::Expr(e) => Error::Config(e.to_string()),
            other => Error::Config(other.to_string()),
        })
    }

    /// The problem to solve: with a manufactured source added when `exact` is set.
    pub fn problem(&self) -> Result<ProblemSpec> {
        let base = self.base_problem()?;
        match self.exact_expr()? {
            Some(exact) => {
                let g = manufacture_forcing(&exact, &base)?;
                Ok(base.with_gamma(base.gamma().clone() + g))
            }
            None => Ok(base),
        }
    }

    pub fn wants(&self, norm: ErrorNorm) -> bool {
        self.error_norms.contains(&norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"mu": 0.0, "T": 1.0, "dt": 0.001,
        "schemes": ["galerkin"], "n_list": [8, 16, 32],
        "a": "1", "c": "1", "alpha": "-1", "beta": "0", "gamma": "0",
        "v0": "sin(pi*(x+1))", "exact": null,
        "error_norms": ["l2w", "h1w"], "out": "out.csv"}"#;

    fn with(key: &str, value: &str) -> String {
        let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        v[key] = serde_json::from_str(value).unwrap();
        v.to_string()
    }

    #[test]
    fn parses_valid_config() {
        let cfg = StudyConfig::from_json(BASE).unwrap();
        assert_eq!(cfg.n_list, vec![8, 16, 32]);
        assert_eq!(cfg.schemes, vec![Scheme::Galerkin]);
        assert!(cfg.exact.is_none());
        let again = StudyConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_invalid_configs() {
        let cases = [
            with("extra", "1"),
            with("n_list", "[8, 8, 16]"),
            with("n_list", "[1, 8, 16]"),
            with("n_list", "[8, 512]"),
            with("schemes", "[]"),
            with("schemes", r#"["galerkin", "galerkin"]"#),
            with("schemes", r#"["spectral"]"#),
            with("dt", "2.0"),
            with("T", "-1.0"),
            with("mu", "1.0"),
            with("error_norms", r#"["linf"]"#),
            with("v0", r#""x""#),
            with("a", r#""1 +""#),
            with("exact", r#""x""#),
            with("exact", r#""(1-x^2)*exp(-t)*cos(x)""#),
        ];
        for case in cases {
            assert!(
                matches!(StudyConfig::from_json(&case), Err(Error::Config(_))),
                "{case}"
            );
        }
    }
}
