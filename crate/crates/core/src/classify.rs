//! Which elementary bifurcation happens at the origin, and the reflections
//! that bring the map into the sign conventions of its normal form.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::expr::{EvalError, MapSpec};
use crate::jet::Jet2;

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Kind {
    SaddleNode,
    Transcritical,
    Pitchfork,
    PeriodDoubling,
    None,
    Degenerate,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::SaddleNode => "SaddleNode",
            Kind::Transcritical => "Transcritical",
            Kind::Pitchfork => "Pitchfork",
            Kind::PeriodDoubling => "PeriodDoubling",
            Kind::None => "None",
            Kind::Degenerate => "Degenerate",
        }
    }

    pub fn from_name(name: &str) -> Option<Kind> {
        let lower = name.to_ascii_lowercase().replace(['-', '_'], "");
        Some(match lower.as_str() {
            "saddlenode" | "sn" | "fold" => Kind::SaddleNode,
            "transcritical" | "tc" => Kind::Transcritical,
            "pitchfork" | "pf" => Kind::Pitchfork,
            "perioddoubling" | "pd" | "flip" => Kind::PeriodDoubling,
            _ => return None,
        })
    }

    /// True for the four bifurcations with a normal form.
    pub fn is_elementary(self) -> bool {
        !matches!(self, Kind::None | Kind::Degenerate)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub kind: Kind,
    pub flip_x: bool,
    pub flip_mu: bool,
    /// Raw derivative values of the input map at the origin, keyed by name.
    pub margins: BTreeMap<String, f64>,
    pub origin_fixed_for_all_mu: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supercritical: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Classification {
    /// Applies the recorded reflections to a jet of the input map.
    pub fn normalize_jet(&self, j: &Jet2) -> Jet2 {
        apply_flips(j, self.flip_x, self.flip_mu)
    }

    /// Applies the recorded reflections to the input map itself.
    pub fn normalize_spec(&self, spec: &MapSpec) -> MapSpec {
        if self.flip_x || self.flip_mu {
            spec.flipped(self.flip_x, self.flip_mu)
        } else {
            spec.clone()
        }
    }
}

pub fn apply_flips(j: &Jet2, flip_x: bool, flip_mu: bool) -> Jet2 {
    let mut out = j.clone();
    if flip_x {
        out = out.flip_x();
    }
    if flip_mu {
        out = out.flip_mu();
    }
    out
}

/// `f(0, μ) = 0` through the jet degree.
pub fn check_origin_fixed(j: &Jet2, tol: f64) -> bool {
    (0..=j.degree()).all(|k| j.coeff(0, k).abs() <= tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Degeneracy {
    pub quantity: &'static str,
    pub value: f64,
}

fn nonzero(quantity: &'static str, value: f64, tol: f64) -> Result<(), Degeneracy> {
    if value.abs() > tol {
        Ok(())
    } else {
        Err(Degeneracy { quantity, value })
    }
}

/// Reflects the jet into the sign conventions of `kind`'s normal form.
///
/// Saddle-node: `f_μ > 0, f_xx < 0`. Transcritical: `f_xx < 0, f_xμ > 0`.
/// Pitchfork: `f_xμ > 0`. Period-doubling: `f_xμ < 0`.
pub fn normalize_signs(j: &Jet2, kind: Kind, tol: f64) -> Result<(Jet2, bool, bool), Degeneracy> {
    let f_mu = j.deriv(0, 1);
    let f_xx = j.deriv(2, 0);
    let f_xmu = j.deriv(1, 1);
    let (flip_x, flip_mu) = match kind {
        Kind::SaddleNode => {
            nonzero("f_mu", f_mu, tol)?;
            nonzero("f_xx", f_xx, tol)?;
            let flip_x = f_xx > 0.0;
            let f_mu = if flip_x { -f_mu } else { f_mu };
            (flip_x, f_mu < 0.0)
        }
        Kind::Transcritical => {
            nonzero("f_xx", f_xx, tol)?;
            nonzero("f_xmu", f_xmu, tol)?;
            (f_xx > 0.0, f_xmu < 0.0)
        }
        Kind::Pitchfork => {
            nonzero("f_xmu", f_xmu, tol)?;
            (false, f_xmu < 0.0)
        }
        Kind::PeriodDoubling => {
            nonzero("f_xmu", f_xmu, tol)?;
            (false, f_xmu > 0.0)
        }
        Kind::None | Kind::Degenerate => (false, false),
    };
    Ok((apply_flips(j, flip_x, flip_mu), flip_x, flip_mu))
}

pub fn classify(spec: &MapSpec, tol: f64) -> Result<Classification, EvalError> {
    Ok(classify_jet(&spec.jet()?, tol))
}

pub fn classify_jet(j: &Jet2, tol: f64) -> Classification {
    let mut margins = BTreeMap::new();
    for (name, (i, k)) in [
        ("f", (0, 0)),
        ("f_x", (1, 0)),
        ("f_mu", (0, 1)),
        ("f_xx", (2, 0)),
        ("f_xmu", (1, 1)),
        ("f_xxx", (3, 0)),
    ] {
        margins.insert(name.to_string(), j.deriv(i, k));
    }
    let origin_fixed = check_origin_fixed(j, tol);
    let mut out = Classification {
        kind: Kind::None,
        flip_x: false,
        flip_mu: false,
        margins,
        origin_fixed_for_all_mu: origin_fixed,
        supercritical: None,
        note: None,
    };
    let f0 = j.deriv(0, 0);
    let fx = j.deriv(1, 0);
    let f_xx = j.deriv(2, 0);
    let f_xxx = j.deriv(3, 0);

    if f0.abs() > tol {
        out.note = Some("origin is not a fixed point at mu = 0".into());
        return out;
    }

    let candidate = if (fx - 1.0).abs() <= tol {
        if !origin_fixed {
            Kind::SaddleNode
        } else if f_xx.abs() > tol {
            Kind::Transcritical
        } else {
            if let Err(d) = nonzero("f_xxx", f_xxx, tol) {
                return degenerate(out, d);
            }
            Kind::Pitchfork
        }
    } else if (fx + 1.0).abs() <= tol {
        let q = 3.0 * f_xx * f_xx + 2.0 * f_xxx;
        out.margins.insert("3f_xx^2+2f_xxx".into(), q);
        if !origin_fixed {
            out.kind = Kind::Degenerate;
            out.note = Some("f_x = -1 but the origin is not fixed for all mu".into());
            return out;
        }
        if let Err(d) = nonzero("3f_xx^2+2f_xxx", q, tol) {
            return degenerate(out, d);
        }
        Kind::PeriodDoubling
    } else {
        out.note = Some(format!("origin is hyperbolic (f_x = {fx})"));
        return out;
    };

    let (normalized, flip_x, flip_mu) = match normalize_signs(j, candidate, tol) {
        Ok(n) => n,
        Err(d) => return degenerate(out, d),
    };
    out.flip_x = flip_x;
    out.flip_mu = flip_mu;
    match candidate {
        Kind::Pitchfork => {
            let supercritical = normalized.deriv(3, 0) < 0.0;
            out.supercritical = Some(supercritical);
            if !supercritical {
                out.kind = Kind::Degenerate;
                out.note = Some("subcritical pitchfork (f_xxx > 0 with f_xmu > 0) is not supported".into());
                return out;
            }
        }
        Kind::PeriodDoubling => {
            let q = 3.0 * f_xx * f_xx + 2.0 * f_xxx;
            let supercritical = q > 0.0;
            out.supercritical = Some(supercritical);
            if !supercritical {
                out.kind = Kind::Degenerate;
                out.note = Some("subcritical period-doubling (3f_xx^2 + 2f_xxx < 0) is not supported".into());
                return out;
            }
        }
        _ => {}
    }
    out.kind = candidate;
    out
}

fn degenerate(mut out: Classification, d: Degeneracy) -> Classification {
    out.kind = Kind::Degenerate;
    out.note = Some(format!("{} = {:e} is within tolerance of zero", d.quantity, d.value));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify_src(src: &str) -> Classification {
        classify(&MapSpec::parse_with(src, &[]).unwrap(), DEFAULT_TOL).unwrap()
    }

    #[test]
    fn origin_fixed_examples() {
        let spec = |s| MapSpec::parse_with(s, &[]).unwrap().jet().unwrap();
        assert!(check_origin_fixed(&spec("x + mu*x - x^2"), 1e-12));
        assert!(!check_origin_fixed(&spec("x + mu - x^2"), 1e-12));
        assert!(check_origin_fixed(&spec("x + 1e-15*mu"), 1e-12));
    }

    #[test]
    fn normalization_examples() {
        let jet = |s| MapSpec::parse_with(s, &[]).unwrap().jet().unwrap();
        let target = jet("x + mu - x^2");

        let (n, fx, fm) = normalize_signs(&jet("x - mu - x^2"), Kind::SaddleNode, 1e-9).unwrap();
        assert!(!fx && fm);
        assert_eq!(n, target);

        let (n, fx, fm) = normalize_signs(&jet("x + mu + x^2"), Kind::SaddleNode, 1e-9).unwrap();
        assert!(fx && fm);
        assert_eq!(n, target);

        let (n, fx, fm) = normalize_signs(&target, Kind::SaddleNode, 1e-9).unwrap();
        assert!(!fx && !fm);
        assert_eq!(n, target);
    }

    #[test]
    fn classify_examples() {
        let c = classify_src("x + mu - x^2 + 0.5*x^3");
        assert_eq!(c.kind, Kind::SaddleNode);
        assert!(!c.flip_x && !c.flip_mu);

        let c = classify_src("(1+mu)*x*(1-x)");
        assert_eq!(c.kind, Kind::Transcritical);
        assert_eq!(c.margins["f_xx"], -2.0);
        assert_eq!(c.margins["f_xmu"], 1.0);
        assert!(!c.flip_x && !c.flip_mu);

        let c = classify_src("-x - mu*x + x^3 + 0.3*x^5");
        assert_eq!(c.kind, Kind::PeriodDoubling);
        assert_eq!(c.supercritical, Some(true));
        assert_eq!(c.margins["3f_xx^2+2f_xxx"], 12.0);
        assert_eq!(c.margins["f_xmu"], -1.0);
        assert!(!c.flip_mu);

        let c = classify_src("x + mu*x - x^3");
        assert_eq!(c.kind, Kind::Pitchfork);
        assert_eq!(c.supercritical, Some(true));
    }

    #[test]
    fn unsupported_and_hyperbolic() {
        let c = classify_src("x + mu*x + x^3");
        assert_eq!(c.kind, Kind::Degenerate);
        assert!(c.note.unwrap().contains("subcritical pitchfork"));

        let c = classify_src("-x - mu*x - x^3");
        assert_eq!(c.kind, Kind::Degenerate);

        assert_eq!(classify_src("0.5*x + mu").kind, Kind::None);
        assert_eq!(classify_src("x + mu - x^2 + 1").kind, Kind::None);
        assert_eq!(classify_src("x + mu").kind, Kind::Degenerate);
        assert_eq!(classify_src("x + mu*x^2 - x^2").kind, Kind::Degenerate);
        assert_eq!(classify_src("-x + mu - x^2").kind, Kind::Degenerate);
    }

    #[test]
    fn pitchfork_with_negative_mu_coefficient_is_flipped() {
        let c = classify_src("x - mu*x - x^3");
        assert_eq!(c.kind, Kind::Pitchfork);
        assert!(c.flip_mu && !c.flip_x);
    }

    #[test]
    fn kind_names() {
        for k in [Kind::SaddleNode, Kind::Transcritical, Kind::Pitchfork, Kind::PeriodDoubling] {
            assert_eq!(Kind::from_name(k.name()), Some(k));
        }
        assert_eq!(Kind::from_name("pd"), Some(Kind::PeriodDoubling));
        assert_eq!(Kind::from_name("cusp"), None);
    }
}
