use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::eval::{eval_in, Forward, JetAlgebra, Real};
use super::{parse, Dual, EvalError, Expr, ParseError};
use crate::jet::{Jet2, DEFAULT_DEGREE};

pub const DEFAULT_TRUST_X: f64 = 0.5;
pub const DEFAULT_TRUST_MU: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("field 'map': {0}")]
    Parse(#[from] ParseError),
    #[error("unbound parameter '{0}'")]
    Unbound(String),
    #[error("parameter name '{0}' is reserved")]
    Reserved(String),
    #[error("parameter '{0}' must be finite")]
    NonFiniteParam(String),
    #[error("field '{0}' must be a positive finite number, got {1}")]
    BadRadius(&'static str, f64),
    #[error("field 'degree' must be between 3 and 15, got {0}")]
    BadDegree(usize),
}

/// On-disk map description (TOML).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub map: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub degree: Option<usize>,
    pub trust_x: Option<f64>,
    pub trust_mu: Option<f64>,
}

impl MapConfig {
    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        toml::from_str(text).map_err(|e| SpecError::Config(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpecError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn build(&self) -> Result<MapSpec, SpecError> {
        MapSpec::new(
            &self.map,
            self.params.clone(),
            self.trust_x.unwrap_or(DEFAULT_TRUST_X),
            self.trust_mu.unwrap_or(DEFAULT_TRUST_MU),
            self.degree.unwrap_or(DEFAULT_DEGREE),
        )
    }
}

/// A parsed map `f(x, μ)` with bound parameters and its working neighbourhood.
#[derive(Debug, Clone)]
pub struct MapSpec {
    expr: Expr,
    bound: Expr,
    params: BTreeMap<String, f64>,
    trust_x: f64,
    trust_mu: f64,
    degree: usize,
}

fn no_params(_: &str) -> Option<f64> {
    None
}

impl MapSpec {
    pub fn new(
        source: &str,
        params: BTreeMap<String, f64>,
        trust_x: f64,
        trust_mu: f64,
        degree: usize,
    ) -> Result<Self, SpecError> {
        Self::from_expr(parse(source)?, params, trust_x, trust_mu, degree)
    }

    /// Shorthand with default radii and degree.
    pub fn parse_with(source: &str, params: &[(&str, f64)]) -> Result<Self, SpecError> {
        let params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self::new(source, params, DEFAULT_TRUST_X, DEFAULT_TRUST_MU, DEFAULT_DEGREE)
    }

    pub fn from_expr(
        expr: Expr,
        params: BTreeMap<String, f64>,
        trust_x: f64,
        trust_mu: f64,
        degree: usize,
    ) -> Result<Self, SpecError> {
        for (name, v) in &params {
            if name == "x" || name == "mu" {
                return Err(SpecError::Reserved(name.clone()));
            }
            if !v.is_finite() {
                return Err(SpecError::NonFiniteParam(name.clone()));
            }
        }
        if let Some(missing) = expr.params().into_iter().find(|p| !params.contains_key(p)) {
            return Err(SpecError::Unbound(missing));
        }
        if !(trust_x.is_finite() && trust_x > 0.0) {
            return Err(SpecError::BadRadius("trust_x", trust_x));
        }
        if !(trust_mu.is_finite() && trust_mu > 0.0) {
            return Err(SpecError::BadRadius("trust_mu", trust_mu));
        }
        if !(3..=15).contains(&degree) {
            return Err(SpecError::BadDegree(degree));
        }
        let bound = expr.substitute(&|e| match e {
            Expr::Param(name) => params.get(name).map(|v| Expr::Num(*v)),
            _ => None,
        });
        Ok(Self {
            expr,
            bound,
            params,
            trust_x,
            trust_mu,
            degree,
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn source(&self) -> String {
        self.expr.to_string()
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn trust_x(&self) -> f64 {
        self.trust_x
    }

    pub fn trust_mu(&self) -> f64 {
        self.trust_mu
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn with_degree(&self, degree: usize) -> Result<Self, SpecError> {
        Self::from_expr(self.expr.clone(), self.params.clone(), self.trust_x, self.trust_mu, degree)
    }

    pub fn with_trust(&self, trust_x: f64, trust_mu: f64) -> Result<Self, SpecError> {
        Self::from_expr(self.expr.clone(), self.params.clone(), trust_x, trust_mu, self.degree)
    }

    pub fn eval(&self, x: f64, mu: f64) -> Result<f64, EvalError> {
        let v = eval_in(&self.bound, &Real { x, mu }, &no_params)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Value and `∂f/∂x`.
    pub fn eval_dx(&self, x: f64, mu: f64) -> Result<Dual, EvalError> {
        let alg = Forward {
            x: Dual::new(x, 1.0),
            mu: Dual::new(mu, 0.0),
        };
        let d = eval_in(&self.bound, &alg, &no_params)?;
        if d.v.is_finite() && d.d.is_finite() {
            Ok(d)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Value and `∂f/∂μ`.
    pub fn eval_dmu(&self, x: f64, mu: f64) -> Result<Dual, EvalError> {
        let alg = Forward {
            x: Dual::new(x, 0.0),
            mu: Dual::new(mu, 1.0),
        };
        let d = eval_in(&self.bound, &alg, &no_params)?;
        if d.v.is_finite() && d.d.is_finite() {
            Ok(d)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// `n`-th iterate at fixed `μ`.
    pub fn iterate(&self, mut x: f64, mu: f64, n: usize) -> Result<f64, EvalError> {
        for _ in 0..n {
            x = self.eval(x, mu)?;
        }
        Ok(x)
    }

    /// Jet about the origin at the spec's degree.
    pub fn jet(&self) -> Result<Jet2, EvalError> {
        self.jet_at(0.0, 0.0, self.degree)
    }

    /// Jet in the offsets `(x - x0, μ - mu0)`.
    pub fn jet_at(&self, x0: f64, mu0: f64, degree: usize) -> Result<Jet2, EvalError> {
        let j = eval_in(&self.bound, &JetAlgebra { degree, x0, mu0 }, &no_params)?;
        if let Some(((i, k), _)) = j.terms().find(|(_, c)| !c.is_finite()) {
            return Err(crate::jet::JetError::NonFinite(i, k).into());
        }
        Ok(j)
    }

    /// Applies `x → -x` (as `-f(-x, μ)`) and/or `μ → -μ`.
    pub fn flipped(&self, flip_x: bool, flip_mu: bool) -> Self {
        let mut e = self.expr.substitute(&|leaf| match leaf {
            Expr::X if flip_x => Some(Expr::neg(Expr::X)),
            Expr::Mu if flip_mu => Some(Expr::neg(Expr::Mu)),
            _ => None,
        });
        if flip_x {
            e = Expr::neg(e);
        }
        Self::from_expr(e, self.params.clone(), self.trust_x, self.trust_mu, self.degree)
            .expect("flipping preserves validity")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip() {
        let cfg = MapConfig::from_toml(
            "map = \"x + mu - x^2 + a*x^3\"\ndegree = 7\ntrust_x = 0.4\n[params]\na = 0.5\n",
        )
        .unwrap();
        let spec = cfg.build().unwrap();
        assert_eq!(spec.trust_x(), 0.4);
        assert_eq!(spec.trust_mu(), DEFAULT_TRUST_MU);
        assert_eq!(spec.jet().unwrap().coeff(3, 0), 0.5);
    }

    #[test]
    fn unbound_parameter() {
        let cfg = MapConfig::from_toml("map = \"x + mu - c*x^2\"\n").unwrap();
        let err = cfg.build().unwrap_err();
        assert_eq!(err.to_string(), "unbound parameter 'c'");
    }

    #[test]
    fn unknown_field_rejected() {
        let err = MapConfig::from_toml("map = \"x\"\ntrustx = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("trustx"), "{err}");
    }

    #[test]
    fn invalid_fields() {
        assert!(matches!(
            MapSpec::parse_with("x + mu", &[("mu", 1.0)]),
            Err(SpecError::Reserved(_))
        ));
        let params = BTreeMap::new();
        assert!(matches!(
            MapSpec::new("x", params.clone(), -1.0, 0.1, 7),
            Err(SpecError::BadRadius("trust_x", _))
        ));
        assert!(matches!(MapSpec::new("x", params, 0.5, 0.1, 1), Err(SpecError::BadDegree(1))));
    }

    #[test]
    fn flips_match_jet_flips() {
        let spec = MapSpec::parse_with("x*exp(-x) + mu + 0.3*mu*x^2", &[]).unwrap();
        let j = spec.jet().unwrap();
        for (fx, fm) in [(true, false), (false, true), (true, true)] {
            let mut want = j.clone();
            if fx {
                want = want.flip_x();
            }
            if fm {
                want = want.flip_mu();
            }
            let got = spec.flipped(fx, fm).jet().unwrap();
            for ((i, k), c) in want.terms() {
                assert!((c - got.coeff(i, k)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivatives_by_forward_mode() {
        let spec = MapSpec::parse_with("(1+mu)*x*(1-x)", &[]).unwrap();
        let d = spec.eval_dx(0.25, 0.1).unwrap();
        assert!((d.v - 1.1 * 0.25 * 0.75).abs() < 1e-15);
        assert!((d.d - 1.1 * 0.5).abs() < 1e-15);
        let d = spec.eval_dmu(0.25, 0.1).unwrap();
        assert!((d.d - 0.1875).abs() < 1e-15);
    }
}
