//! Extended normal forms, their leading coefficients and finite-μ
//! multiplier matching.
//!
//! | kind | normal form |
//! |------|-------------|
//! | saddle-node | `y + ν - y² + a y³` |
//! | transcritical | `y + ν y - y² + a y³` |
//! | pitchfork | `y + ν y - y³ + a y⁵ + b ν y²` |
//! | period-doubling | `-y - ν y + y³ + a y⁵` |

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::classify::Kind;
use crate::expr::{EvalError, MapSpec};
use crate::jet::Jet2;
use crate::roots::{self, RootError};
use crate::skeleton::{self, Branch, BranchLabel, SkeletonError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NfError {
    #[error("{0} has no extended normal form")]
    NoNormalForm(Kind),
    #[error("{what} must be nonzero (got {value:e})")]
    Vanishing { what: &'static str, value: f64 },
    #[error("mu = {mu}: {kind} matching needs mu > 0")]
    OutOfRange { kind: Kind, mu: f64 },
    #[error("mu = {mu}: map branch {label} could not be refined")]
    BranchFailure { mu: f64, label: BranchLabel },
    #[error("mu = {mu}: normal-form fixed point not found at nu = {nu}, a = {a}")]
    NoNormalFormRoot { mu: f64, nu: f64, a: f64 },
    #[error("mu = {mu}: {source}")]
    Newton { mu: f64, source: RootError },
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A member of one of the four extended normal-form families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalForm {
    pub kind: Kind,
    pub nu: f64,
    pub a: f64,
    pub b: f64,
}

impl NormalForm {
    pub fn new(kind: Kind, nu: f64, a: f64, b: f64) -> Result<Self, NfError> {
        if !kind.is_elementary() {
            return Err(NfError::NoNormalForm(kind));
        }
        Ok(Self { kind, nu, a, b })
    }

    pub fn eval(&self, y: f64) -> f64 {
        let Self { nu, a, b, .. } = *self;
        let y2 = y * y;
        match self.kind {
            Kind::SaddleNode => y + nu - y2 + a * y2 * y,
            Kind::Transcritical => y + nu * y - y2 + a * y2 * y,
            Kind::Pitchfork => y + nu * y - y2 * y + a * y2 * y2 * y + b * nu * y2,
            Kind::PeriodDoubling => -y - nu * y + y2 * y + a * y2 * y2 * y,
            Kind::None | Kind::Degenerate => unreachable!(),
        }
    }

    pub fn deriv(&self, y: f64) -> f64 {
        let Self { nu, a, b, .. } = *self;
        let y2 = y * y;
        match self.kind {
            Kind::SaddleNode => 1.0 - 2.0 * y + 3.0 * a * y2,
            Kind::Transcritical => 1.0 + nu - 2.0 * y + 3.0 * a * y2,
            Kind::Pitchfork => 1.0 + nu - 3.0 * y2 + 5.0 * a * y2 * y2 + 2.0 * b * nu * y,
            Kind::PeriodDoubling => -1.0 - nu + 3.0 * y2 + 5.0 * a * y2 * y2,
            Kind::None | Kind::Degenerate => unreachable!(),
        }
    }

    pub fn second_deriv(&self, y: f64) -> f64 {
        let Self { nu, a, b, .. } = *self;
        match self.kind {
            Kind::SaddleNode | Kind::Transcritical => -2.0 + 6.0 * a * y,
            Kind::Pitchfork => -6.0 * y + 20.0 * a * y.powi(3) + 2.0 * b * nu,
            Kind::PeriodDoubling => 6.0 * y + 20.0 * a * y.powi(3),
            Kind::None | Kind::Degenerate => unreachable!(),
        }
    }

    pub fn third_deriv(&self, y: f64) -> f64 {
        match self.kind {
            Kind::SaddleNode | Kind::Transcritical => 6.0 * self.a,
            Kind::Pitchfork => -6.0 + 60.0 * self.a * y * y,
            Kind::PeriodDoubling => 6.0 + 60.0 * self.a * y * y,
            Kind::None | Kind::Degenerate => unreachable!(),
        }
    }

    /// Expression text in `x` and `mu` with parameters `a` (and `b`).
    pub fn source(kind: Kind) -> Option<&'static str> {
        Some(match kind {
            Kind::SaddleNode => "x + mu - x^2 + a*x^3",
            Kind::Transcritical => "x + mu*x - x^2 + a*x^3",
            Kind::Pitchfork => "x + mu*x - x^3 + a*x^5 + b*mu*x^2",
            Kind::PeriodDoubling => "-x - mu*x + x^3 + a*x^5",
            Kind::None | Kind::Degenerate => return None,
        })
    }

    /// The family as a [`MapSpec`] with `ν` playing the role of `mu`.
    pub fn family_spec(kind: Kind, a: f64, b: f64) -> Result<MapSpec, NfError> {
        let src = Self::source(kind).ok_or(NfError::NoNormalForm(kind))?;
        let mut params = vec![("a", a)];
        if kind == Kind::Pitchfork {
            params.push(("b", b));
        }
        Ok(MapSpec::parse_with(src, &params).expect("normal-form sources are valid"))
    }
}

/// Closed-form `ν'(0)`, `a(0)` and (pitchfork) `b(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Leading {
    pub nu_prime_0: f64,
    pub a0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
}

fn nonzero(what: &'static str, value: f64) -> Result<f64, NfError> {
    if value == 0.0 || !value.is_finite() {
        Err(NfError::Vanishing { what, value })
    } else {
        Ok(value)
    }
}

/// Leading coefficients from a sign-normalized jet.
pub fn leading_coefficients(j: &Jet2, kind: Kind) -> Result<Leading, NfError> {
    let d = |i, k| j.deriv(i, k);
    let (f_mu, f_xmu) = (d(0, 1), d(1, 1));
    let (f2, f3, f4, f5) = (d(2, 0), d(3, 0), d(4, 0), d(5, 0));
    Ok(match kind {
        Kind::SaddleNode => {
            nonzero("f_xx", f2)?;
            Leading {
                nu_prime_0: -f_mu * f2 / 2.0,
                a0: 2.0 * f3 / (3.0 * f2 * f2),
                b0: None,
            }
        }
        Kind::Transcritical => {
            nonzero("f_xx", f2)?;
            Leading {
                nu_prime_0: f_xmu,
                a0: 2.0 * f3 / (3.0 * f2 * f2),
                b0: None,
            }
        }
        Kind::Pitchfork => {
            nonzero("f_xxx", f3)?;
            nonzero("f_xmu", f_xmu)?;
            let f_xxmu = d(2, 1);
            Leading {
                nu_prime_0: f_xmu,
                a0: 3.0 * f5 / (10.0 * f3 * f3) - 3.0 * f4 * f4 / (8.0 * f3.powi(3)),
                b0: Some((6.0 / -f3).sqrt() * (f4 / (4.0 * f3) + f_xxmu / (2.0 * f_xmu))),
            }
        }
        Kind::PeriodDoubling => {
            let q = nonzero("3f_xx^2 + 2f_xxx", 3.0 * f2 * f2 + 2.0 * f3)?;
            Leading {
                nu_prime_0: -f_xmu,
                a0: (45.0 / 4.0 * f2.powi(4) + 39.0 / 2.0 * f2 * f2 * f3 + 9.0 * f2 * f4 + 6.0 / 5.0 * f5)
                    / (q * q),
                b0: None,
            }
        }
        Kind::None | Kind::Degenerate => return Err(NfError::NoNormalForm(kind)),
    })
}

/// Takens' `α_p` for the `μ = 0` slice, `p ∈ {2, 3}`:
/// `α_p = (p!/|f^{(p)}|)^{p/(p-1)} f^{(p+1)}/(p+1)!`.
pub fn takens_alpha(j: &Jet2, p: usize) -> Result<f64, NfError> {
    assert!((2..=3).contains(&p), "takens_alpha supports p = 2 or 3");
    let cp = nonzero(if p == 2 { "f_xx" } else { "f_xxx" }, j.coeff(p, 0))?;
    let e = p as f64 / (p as f64 - 1.0);
    Ok((1.0 / cp.abs()).powf(e) * j.coeff(p + 1, 0))
}

/// Fitted normal-form parameters at one μ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub mu: f64,
    pub nu: f64,
    /// Absent when only `ν` is determined (μ < 0 for pitchfork and period-doubling).
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub residual: f64,
}

/// Multipliers of the map being matched, in normal-form orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapMultipliers {
    pub trivial: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub period_two: Option<f64>,
}

/// Newton-refines the branches at `mu` and collects their multipliers.
pub fn map_multipliers(spec: &MapSpec, branches: &[Branch], mu: f64) -> Result<MapMultipliers, NfError> {
    let mut out = MapMultipliers {
        trivial: None,
        lower: None,
        upper: None,
        period_two: None,
    };
    for br in branches {
        let siblings: Vec<&Branch> = branches
            .iter()
            .filter(|b| b.label != br.label && b.label != BranchLabel::PeriodTwoPair)
            .collect();
        let Some(s) = skeleton::newton_branch(spec, br, &siblings, &[mu]).pop() else {
            continue;
        };
        if !s.valid {
            return Err(NfError::BranchFailure { mu, label: br.label });
        }
        let slot = match br.label {
            BranchLabel::Trivial => &mut out.trivial,
            BranchLabel::Lower => &mut out.lower,
            BranchLabel::Upper => &mut out.upper,
            BranchLabel::PeriodTwoPair => &mut out.period_two,
        };
        *slot = Some(s.multiplier);
    }
    Ok(out)
}

/// Nearest root of `φ` on each side of zero, scanning outward in steps of `scale/16`.
fn side_root(phi: impl Fn(f64) -> (f64, f64), scale: f64, side: f64) -> Option<f64> {
    let step = side * scale / 16.0;
    let (lo, hi) = roots::first_sign_change(|y| Some(phi(y).0), 0.0, step, 64.0 * scale)?;
    let r = roots::bisect(|y| Some(phi(y).0), lo, hi, 1e-15 * scale.max(1e-300)).ok()?;
    Some(roots::polish(|y| Some(phi(y)), r, lo, hi, 2))
}

/// Normal-form fixed points bifurcating from zero, `(lower, upper)`.
/// For period-doubling these are the two points of the period-two orbit.
pub fn nf_nontrivial_points(nf: &NormalForm) -> Option<(f64, f64)> {
    let NormalForm { nu, a, b, .. } = *nf;
    match nf.kind {
        Kind::SaddleNode => {
            if nu <= 0.0 {
                return None;
            }
            let phi = |y: f64| (nu - y * y + a * y.powi(3), -2.0 * y + 3.0 * a * y * y);
            let s = nu.sqrt();
            Some((side_root(phi, s, -1.0)?, side_root(phi, s, 1.0)?))
        }
        Kind::Transcritical => {
            let y = tc_root(nu, a)?;
            Some((y.min(0.0), y.max(0.0)))
        }
        Kind::Pitchfork => {
            if nu <= 0.0 {
                return None;
            }
            let phi = |y: f64| (nu - y * y + a * y.powi(4) + b * nu * y, -2.0 * y + 4.0 * a * y.powi(3) + b * nu);
            let s = nu.sqrt();
            let lo = side_root(phi, s, -1.0)?;
            let hi = side_root(phi, s, 1.0)?;
            Some((lo, hi))
        }
        Kind::PeriodDoubling => {
            let s = pd_square(nu, a)?;
            let y = s.sqrt();
            Some((-y, y))
        }
        Kind::None | Kind::Degenerate => None,
    }
}

/// Nontrivial transcritical normal-form fixed point: root of `ν - y + a y²` near `ν`.
fn tc_root(nu: f64, a: f64) -> Option<f64> {
    let disc = 1.0 - 4.0 * a * nu;
    if disc < 0.0 {
        return None;
    }
    Some(2.0 * nu / (1.0 + disc.sqrt()))
}

/// `y²` on the period-two orbit of the period-doubling normal form: root of `-ν + s + a s²`.
fn pd_square(nu: f64, a: f64) -> Option<f64> {
    if nu <= 0.0 {
        return None;
    }
    let disc = 1.0 + 4.0 * a * nu;
    if disc < 0.0 {
        return None;
    }
    Some(2.0 * nu / (1.0 + disc.sqrt()))
}

fn newton_err(mu: f64) -> impl Fn(RootError) -> NfError {
    move |source| NfError::Newton { mu, source }
}

/// Solves the multiplier-matching equations at one `μ`.
///
/// `spec` must be the sign-normalized map and `branches` its skeleton.
pub fn match_multipliers(
    spec: &MapSpec,
    kind: Kind,
    branches: &[Branch],
    leading: &Leading,
    mu: f64,
) -> Result<Fit, NfError> {
    let trivial_nu = || -> Result<f64, NfError> {
        let fx = spec.eval_dx(0.0, mu)?.d;
        Ok(match kind {
            Kind::PeriodDoubling => -1.0 - fx,
            _ => fx - 1.0,
        })
    };
    match kind {
        Kind::SaddleNode => {
            if mu <= 0.0 {
                return Err(NfError::OutOfRange { kind, mu });
            }
            let mm = map_multipliers(spec, branches, mu)?;
            let (Some(l_lo), Some(l_hi)) = (mm.lower, mm.upper) else {
                return Err(NfError::BranchFailure { mu, label: BranchLabel::Upper });
            };
            fit_sn(mu, l_lo, l_hi, leading.nu_prime_0 * mu, leading.a0)
        }
        Kind::Transcritical => {
            let nu = trivial_nu()?;
            let mm = map_multipliers(spec, branches, mu)?;
            let target = mm.upper.ok_or(NfError::BranchFailure { mu, label: BranchLabel::Upper })?;
            fit_tc(mu, nu, target, leading.a0)
        }
        Kind::Pitchfork => {
            let nu = trivial_nu()?;
            if mu <= 0.0 {
                return Ok(Fit { mu, nu, a: None, b: None, residual: 0.0 });
            }
            let mm = map_multipliers(spec, branches, mu)?;
            let (Some(l_lo), Some(l_hi)) = (mm.lower, mm.upper) else {
                return Err(NfError::BranchFailure { mu, label: BranchLabel::Upper });
            };
            fit_pf(mu, nu, l_lo, l_hi, leading.a0, leading.b0.unwrap_or(0.0))
        }
        Kind::PeriodDoubling => {
            let nu = trivial_nu()?;
            if mu <= 0.0 {
                return Ok(Fit { mu, nu, a: None, b: None, residual: 0.0 });
            }
            let mm = map_multipliers(spec, branches, mu)?;
            let target = mm
                .period_two
                .ok_or(NfError::BranchFailure { mu, label: BranchLabel::PeriodTwoPair })?;
            fit_pd(mu, nu, target, leading.a0)
        }
        Kind::None | Kind::Degenerate => Err(NfError::NoNormalForm(kind)),
    }
}

/// Fits over a grid in parallel; results keep the grid order.
pub fn fit_grid(
    spec: &MapSpec,
    kind: Kind,
    branches: &[Branch],
    leading: &Leading,
    grid: &[f64],
) -> Vec<Result<Fit, NfError>> {
    grid.par_iter()
        .map(|&mu| match_multipliers(spec, kind, branches, leading, mu))
        .collect()
}

fn fit_sn(mu: f64, l_lo: f64, l_hi: f64, nu0: f64, a0: f64) -> Result<Fit, NfError> {
    // Fixed point y(ν, a) of ν - y² + a y³ and its multiplier d = 1 - 2y + 3a y².
    let point = |a: f64, y: f64| {
        let py = -2.0 * y + 3.0 * a * y * y;
        let y_nu = -1.0 / py;
        let y_a = -y.powi(3) / py;
        let dy = -2.0 + 6.0 * a * y;
        let d = 1.0 - 2.0 * y + 3.0 * a * y * y;
        (d, [dy * y_nu, 3.0 * y * y + dy * y_a])
    };
    let system = |p: &[f64; 2]| {
        let [nu, a] = *p;
        let nf = NormalForm::new(Kind::SaddleNode, nu, a, 0.0).ok()?;
        let (ylo, yhi) = nf_nontrivial_points(&nf)?;
        let (d_lo, g_lo) = point(a, ylo);
        let (d_hi, g_hi) = point(a, yhi);
        Some(([d_lo - l_lo, d_hi - l_hi], [g_lo, g_hi]))
    };
    let ([nu, a], _, _) = roots::newton(system, [nu0, a0]).map_err(newton_err(mu))?;
    let nf = NormalForm::new(Kind::SaddleNode, nu, a, 0.0)?;
    let (ylo, yhi) = nf_nontrivial_points(&nf).ok_or(NfError::NoNormalFormRoot { mu, nu, a })?;
    let residual = (nf.deriv(ylo) - l_lo).abs().max((nf.deriv(yhi) - l_hi).abs());
    Ok(Fit { mu, nu, a: Some(a), b: None, residual })
}

fn fit_tc(mu: f64, nu: f64, target: f64, a0: f64) -> Result<Fit, NfError> {
    let system = |p: &[f64; 1]| {
        let a = p[0];
        let y = tc_root(nu, a)?;
        let py = -1.0 + 2.0 * a * y;
        let y_a = -y * y / py;
        let d = 1.0 + nu - 2.0 * y + 3.0 * a * y * y;
        let da = 3.0 * y * y + (-2.0 + 6.0 * a * y) * y_a;
        Some(([d - target], [[da]]))
    };
    let ([a], _, _) = roots::newton(system, [a0]).map_err(newton_err(mu))?;
    let nf = NormalForm::new(Kind::Transcritical, nu, a, 0.0)?;
    let y = tc_root(nu, a).ok_or(NfError::NoNormalFormRoot { mu, nu, a })?;
    Ok(Fit { mu, nu, a: Some(a), b: None, residual: (nf.deriv(y) - target).abs() })
}

fn fit_pf(mu: f64, nu: f64, l_lo: f64, l_hi: f64, a0: f64, b0: f64) -> Result<Fit, NfError> {
    // ψ = ν - y² + a y⁴ + b ν y; multiplier 1 + y ψ_y at ψ = 0.
    let point = |a: f64, b: f64, y: f64| {
        let psi_y = -2.0 * y + 4.0 * a * y.powi(3) + b * nu;
        let psi_yy = -2.0 + 12.0 * a * y * y;
        let y_a = -y.powi(4) / psi_y;
        let y_b = -nu * y / psi_y;
        let m = 1.0 + y * psi_y;
        let m_y = psi_y + y * psi_yy;
        (m, [m_y * y_a + 4.0 * y.powi(4), m_y * y_b + y * nu])
    };
    let system = |p: &[f64; 2]| {
        let [a, b] = *p;
        let nf = NormalForm::new(Kind::Pitchfork, nu, a, b).ok()?;
        let (ylo, yhi) = nf_nontrivial_points(&nf)?;
        let (m_lo, g_lo) = point(a, b, ylo);
        let (m_hi, g_hi) = point(a, b, yhi);
        Some(([m_lo - l_lo, m_hi - l_hi], [g_lo, g_hi]))
    };
    let ([a, b], _, _) = roots::newton(system, [a0, b0]).map_err(newton_err(mu))?;
    let nf = NormalForm::new(Kind::Pitchfork, nu, a, b)?;
    let (ylo, yhi) = nf_nontrivial_points(&nf).ok_or(NfError::NoNormalFormRoot { mu, nu, a })?;
    let residual = (nf.deriv(ylo) - l_lo).abs().max((nf.deriv(yhi) - l_hi).abs());
    Ok(Fit { mu, nu, a: Some(a), b: Some(b), residual })
}

fn fit_pd(mu: f64, nu: f64, target: f64, a0: f64) -> Result<Fit, NfError> {
    // Orbit ±y with s = y²; multiplier (g'(y))², g' = -1 - ν + 3s + 5a s².
    let system = |p: &[f64; 1]| {
        let a = p[0];
        let s = pd_square(nu, a)?;
        let s_a = -s * s / (1.0 + 2.0 * a * s);
        let gp = -1.0 - nu + 3.0 * s + 5.0 * a * s * s;
        let gp_a = 5.0 * s * s + (3.0 + 10.0 * a * s) * s_a;
        Some(([gp * gp - target], [[2.0 * gp * gp_a]]))
    };
    let ([a], _, _) = roots::newton(system, [a0]).map_err(newton_err(mu))?;
    let nf = NormalForm::new(Kind::PeriodDoubling, nu, a, 0.0)?;
    let (_, y) = nf_nontrivial_points(&nf).ok_or(NfError::NoNormalFormRoot { mu, nu, a })?;
    let residual = (nf.deriv(y) * nf.deriv(-y) - target).abs();
    Ok(Fit { mu, nu, a: Some(a), b: None, residual })
}
