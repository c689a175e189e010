//! Fixed-point and period-two branches near the bifurcation: truncated series
//! in `m = √μ` (or in `μ`) and Newton-refined samples on a μ grid.
//!
//! All series functions expect a jet that has already been normalized to the
//! sign conventions of its kind (see [`crate::classify::normalize_signs`]).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, MapSpec};
use crate::jet::{Jet1, Jet2, JetError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("jet does not satisfy the {kind} hypotheses: {detail}")]
    Precondition { kind: &'static str, detail: String },
    #[error("jet degree {have} too low, need at least {need}")]
    DegreeTooLow { have: usize, need: usize },
    #[error("second-iterate coefficient {name} disagrees: composed {composed} vs formula {formula}")]
    Inconsistent {
        name: String,
        composed: f64,
        formula: f64,
    },
    #[error(transparent)]
    Jet(#[from] JetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BranchLabel {
    Trivial,
    Lower,
    Upper,
    PeriodTwoPair,
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchLabel::Trivial => "trivial",
            BranchLabel::Lower => "lower",
            BranchLabel::Upper => "upper",
            BranchLabel::PeriodTwoPair => "period2",
        })
    }
}

/// Expansion variable of a branch series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchParam {
    /// `m = √μ`, branch exists for `μ > 0` only.
    M,
    Mu,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub mu: f64,
    pub x: f64,
    /// Other point of a period-two orbit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner: Option<f64>,
    pub multiplier: f64,
    pub series_x: f64,
    pub residual: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub label: BranchLabel,
    pub param: BranchParam,
    pub location_series: Jet1,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner_series: Option<Jet1>,
    pub multiplier_series: Jet1,
    pub samples: Vec<Sample>,
}

impl Branch {
    fn new(label: BranchLabel, param: BranchParam, location: Vec<f64>, multiplier: Vec<f64>) -> Self {
        Self {
            label,
            param,
            location_series: Jet1::new(location),
            partner_series: None,
            multiplier_series: Jet1::new(multiplier),
            samples: Vec::new(),
        }
    }

    /// Series variable for `μ`, or `None` outside the branch's existence range.
    pub fn series_arg(&self, mu: f64) -> Option<f64> {
        match self.param {
            BranchParam::Mu => Some(mu),
            BranchParam::M if mu > 0.0 => Some(mu.sqrt()),
            BranchParam::M => None,
        }
    }

    pub fn predict(&self, mu: f64) -> Option<f64> {
        self.series_arg(mu).map(|t| self.location_series.eval(t))
    }

    pub fn predict_partner(&self, mu: f64) -> Option<f64> {
        let s = self.partner_series.as_ref()?;
        self.series_arg(mu).map(|t| s.eval(t))
    }

    pub fn predict_multiplier(&self, mu: f64) -> Option<f64> {
        self.series_arg(mu).map(|t| self.multiplier_series.eval(t))
    }

    /// Order of the first omitted term in the location series.
    pub fn location_order(&self) -> usize {
        self.location_series.degree() + 1
    }
}

/// Coefficients `c_2 … c_8` of `K(x, μ) = c2 μ + c3 x² + c4 μx + c5 μ² + c6 x³ + c7 μx² + c8 x⁴ + …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KCoeffs {
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
}

impl KCoeffs {
    /// Reads `K = (f - x)/x` from the jet of `f` (origin fixed for all μ).
    pub fn from_map_jet(j: &Jet2) -> Self {
        // K_ij is the coefficient of x^{i+1} μ^j in f.
        let k = |i: usize, jj: usize| j.coeff(i + 1, jj);
        Self {
            c2: k(0, 1),
            c3: k(2, 0),
            c4: k(1, 1),
            c5: k(0, 2),
            c6: k(3, 0),
            c7: k(2, 1),
            c8: k(4, 0),
        }
    }

    pub fn as_vec(&self) -> [f64; 7] {
        [self.c2, self.c3, self.c4, self.c5, self.c6, self.c7, self.c8]
    }

    /// Second-order coefficient of the nontrivial branches.
    pub fn z1(&self) -> f64 {
        (self.c2 * self.c6 - self.c3 * self.c4) / (2.0 * self.c3 * self.c3)
    }

    /// Third-order coefficient `L` of the nontrivial branches.
    pub fn ell(&self) -> f64 {
        let Self { c2, c3, c4, c5, c6, c7, c8 } = *self;
        let bracket = -5.0 * c2 * c2 * c6 * c6 / (4.0 * c3.powi(3)) + 3.0 * c2 * c4 * c6 / (2.0 * c3 * c3)
            - c4 * c4 / (4.0 * c3)
            + c5
            - c2 * c7 / c3
            + c2 * c2 * c8 / (c3 * c3);
        bracket / (2.0 * (-c2 * c3).sqrt())
    }

    pub fn b_coeff(&self) -> f64 {
        let Self { c2, c3, c4, c6, .. } = *self;
        (-c2 / c3.powi(3)).sqrt() * (c2 * c6 + c3 * c4)
    }

    pub fn c_coeff(&self) -> f64 {
        let Self { c2, c3, c4, c5, c6, c8, .. } = *self;
        -3.0 * c2 * c2 * c6 * c6 / (2.0 * c3.powi(3)) + c2 * c4 * c6 / (c3 * c3) + c4 * c4 / (2.0 * c3)
            - 2.0 * c5
            + 2.0 * c2 * c2 * c8 / (c3 * c3)
    }

    /// The two nontrivial branches of `x + xK`, through `m³`.
    fn nontrivial(&self) -> (Branch, Branch) {
        let r = (-self.c2 / self.c3).sqrt();
        let z1 = self.z1();
        let ell = self.ell();
        let b = self.b_coeff();
        let c = self.c_coeff();
        let mk = |k: i32| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            Branch::new(
                if k == 1 { BranchLabel::Lower } else { BranchLabel::Upper },
                BranchParam::M,
                vec![0.0, s * r, z1, s * ell],
                vec![1.0, 0.0, -2.0 * self.c2, s * b, c],
            )
        };
        (mk(1), mk(2))
    }
}

fn require(ok: bool, kind: &'static str, detail: impl FnOnce() -> String) -> Result<(), SkeletonError> {
    if ok {
        Ok(())
    } else {
        Err(SkeletonError::Precondition { kind, detail: detail() })
    }
}

fn require_degree(j: &Jet2, need: usize) -> Result<(), SkeletonError> {
    if j.degree() < need {
        Err(SkeletonError::DegreeTooLow { have: j.degree(), need })
    } else {
        Ok(())
    }
}

const PRE_TOL: f64 = 1e-9;

fn origin_fixed(j: &Jet2) -> bool {
    (0..=j.degree()).all(|k| j.coeff(0, k).abs() <= PRE_TOL)
}

/// Saddle-node branches `x_1` (negative) and `x_2` (positive) in `m`.
pub fn sn_branches(j: &Jet2) -> Result<(Branch, Branch), SkeletonError> {
    require_degree(j, 3)?;
    let (f0, fx, f_mu, f_xx) = (j.deriv(0, 0), j.deriv(1, 0), j.deriv(0, 1), j.deriv(2, 0));
    require(f0.abs() <= PRE_TOL && (fx - 1.0).abs() <= PRE_TOL, "saddle-node", || {
        format!("need f = 0, f_x = 1 at the origin, got f = {f0}, f_x = {fx}")
    })?;
    require(f_mu > 0.0 && f_xx < 0.0, "saddle-node", || {
        format!("need f_mu > 0, f_xx < 0, got f_mu = {f_mu}, f_xx = {f_xx}")
    })?;
    // H = f - x = c2 μ + c3 x² + c4 μx + c6 x³ + …
    let c2 = f_mu;
    let c3 = j.coeff(2, 0);
    let c4 = j.coeff(1, 1);
    let c6 = j.coeff(3, 0);
    let r = (-c2 / c3).sqrt();
    let z1 = (c2 * c6 - c3 * c4) / (2.0 * c3 * c3);
    let p = 2.0 * (-c2 * c3).sqrt();
    let q = -2.0 * c2 * c6 / c3;
    let lower = Branch::new(BranchLabel::Lower, BranchParam::M, vec![0.0, -r, z1], vec![1.0, p, q]);
    let upper = Branch::new(BranchLabel::Upper, BranchParam::M, vec![0.0, r, z1], vec![1.0, -p, q]);
    Ok((lower, upper))
}

/// Which mixed derivative enters the μ² coefficient of the transcritical branch to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum TcVariant {
    /// Last term uses `f_xμμ`; agrees with Newton samples.
    #[default]
    MixedSecond,
    /// Last term uses `f_xμ` in place of `f_xμμ`. Kept for diagnostics only.
    MixedFirst,
}

/// Transcritical trivial and nontrivial branches in `μ`.
pub fn tc_branches(j: &Jet2) -> Result<(Branch, Branch), SkeletonError> {
    tc_branches_variant(j, TcVariant::MixedSecond)
}

pub fn tc_branches_variant(j: &Jet2, variant: TcVariant) -> Result<(Branch, Branch), SkeletonError> {
    require_degree(j, 3)?;
    let fx = j.deriv(1, 0);
    require(origin_fixed(j) && (fx - 1.0).abs() <= PRE_TOL, "transcritical", || {
        format!("need f(0, mu) = 0 and f_x = 1, got f_x = {fx}")
    })?;
    // H = (f - x)/x = c1 x + c2 μ + c3 x² + c4 xμ + c5 μ² + …
    let c1 = j.coeff(2, 0);
    let c2 = j.coeff(1, 1);
    let c3 = j.coeff(3, 0);
    let c4 = j.coeff(2, 1);
    let c5 = j.coeff(1, 2);
    require(c1 < 0.0 && c2 > 0.0, "transcritical", || {
        format!("need f_xx < 0, f_xmu > 0, got f_xx = {}, f_xmu = {c2}", 2.0 * c1)
    })?;
    let last = match variant {
        TcVariant::MixedSecond => c5,
        TcVariant::MixedFirst => j.deriv(1, 1) / 2.0,
    };
    let x2 = -c2 * c2 * c3 / c1.powi(3) + c2 * c4 / (c1 * c1) - last / c1;
    let trivial = Branch::new(BranchLabel::Trivial, BranchParam::Mu, vec![0.0], vec![1.0, c2, c5]);
    let nontrivial = Branch::new(
        BranchLabel::Upper,
        BranchParam::Mu,
        vec![0.0, -c2 / c1, x2],
        vec![1.0, -c2, c2 * c2 * c3 / (c1 * c1) - c5],
    );
    Ok((trivial, nontrivial))
}

/// Pitchfork trivial branch (in `μ`) and the two nontrivial branches (in `m`).
pub fn pf_branches(j: &Jet2) -> Result<(Branch, Branch, Branch), SkeletonError> {
    require_degree(j, 5)?;
    let fx = j.deriv(1, 0);
    require(origin_fixed(j) && (fx - 1.0).abs() <= PRE_TOL, "pitchfork", || {
        format!("need f(0, mu) = 0 and f_x = 1, got f_x = {fx}")
    })?;
    let k = KCoeffs::from_map_jet(j);
    require(j.coeff(2, 0).abs() <= PRE_TOL && k.c2 > 0.0 && k.c3 < 0.0, "pitchfork", || {
        format!(
            "need f_xx = 0, f_xmu > 0, f_xxx < 0, got f_xx = {}, f_xmu = {}, f_xxx = {}",
            j.deriv(2, 0),
            k.c2,
            6.0 * k.c3
        )
    })?;
    let trivial = Branch::new(BranchLabel::Trivial, BranchParam::Mu, vec![0.0], vec![1.0, k.c2, k.c5]);
    let (lower, upper) = k.nontrivial();
    Ok((trivial, lower, upper))
}

/// Coefficients of the second iterate `f² = x + x G(x, μ)` of a period-doubling map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondIterate {
    #[serde(skip)]
    pub jet: Jet2,
    /// `b_1 … b_8` of `f = -x + x P(x, μ)`.
    pub b: [f64; 8],
    /// `c_2 … c_8` of `G`, read from the composed jet.
    pub c: KCoeffs,
    /// `c_2 … c_8` recomputed from `b`.
    pub c_from_b: KCoeffs,
}

fn p_coeffs(j: &Jet2) -> [f64; 8] {
    let p = |i: usize, jj: usize| j.coeff(i + 1, jj);
    [p(1, 0), p(0, 1), p(2, 0), p(1, 1), p(0, 2), p(3, 0), p(2, 1), p(4, 0)]
}

/// `G`'s coefficients as functions of `P`'s.
pub fn pd_c_from_b(b: &[f64; 8]) -> KCoeffs {
    let [b1, b2, b3, b4, b5, b6, b7, b8] = *b;
    KCoeffs {
        c2: -2.0 * b2,
        c3: -2.0 * (b1 * b1 + b3),
        c4: -b1 * b2,
        c5: b2 * b2 - 2.0 * b5,
        c6: b1 * (b1 * b1 + b3),
        c7: -2.0 * b7 - 4.0 * b1 * b4 + 2.0 * b1 * b1 * b2 + 4.0 * b2 * b3,
        c8: -2.0 * b8 - 6.0 * b1 * b6 - b1 * b1 * b3 + 3.0 * b3 * b3,
    }
}

/// Coefficient `M` of `m⁴` in the period-two multiplier.
pub fn pd_m_coeff(b: &[f64; 8]) -> f64 {
    let [b1, b2, b3, _, b5, b6, _, b8] = *b;
    let s = b1 * b1 + b3;
    4.0 * b5
        - b2 * b2 / (s * s)
            * (b1.powi(4) + 5.0 * b1 * b1 * b3 - 4.0 * b3 * b3 + 12.0 * b1 * b6 + 4.0 * b8)
}

fn check_pd(j: &Jet2) -> Result<(), SkeletonError> {
    require_degree(j, 5)?;
    let fx = j.deriv(1, 0);
    let f_xmu = j.deriv(1, 1);
    require(origin_fixed(j) && (fx + 1.0).abs() <= PRE_TOL, "period-doubling", || {
        format!("need f(0, mu) = 0 and f_x = -1, got f_x = {fx}")
    })?;
    let q = 3.0 * j.deriv(2, 0).powi(2) + 2.0 * j.deriv(3, 0);
    require(q > 0.0 && f_xmu < 0.0, "period-doubling", || {
        format!("need 3f_xx^2 + 2f_xxx > 0 and f_xmu < 0, got {q} and {f_xmu}")
    })
}

pub fn pd_second_iterate(j: &Jet2) -> Result<SecondIterate, SkeletonError> {
    check_pd(j)?;
    let jet = j.compose_x(j)?;
    let c = KCoeffs::from_map_jet(&jet);
    let b = p_coeffs(j);
    let c_from_b = pd_c_from_b(&b);
    let names = ["c2", "c3", "c4", "c5", "c6", "c7", "c8"];
    let scale = c.as_vec().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for ((name, composed), formula) in names.iter().zip(c.as_vec()).zip(c_from_b.as_vec()) {
        if (composed - formula).abs() > 1e-9 * scale {
            return Err(SkeletonError::Inconsistent {
                name: name.to_string(),
                composed,
                formula,
            });
        }
    }
    Ok(SecondIterate { jet, b, c, c_from_b })
}

/// Trivial fixed point of a period-doubling map (multiplier near -1).
pub fn pd_trivial_branch(j: &Jet2) -> Result<Branch, SkeletonError> {
    check_pd(j)?;
    let b = p_coeffs(j);
    Ok(Branch::new(BranchLabel::Trivial, BranchParam::Mu, vec![0.0], vec![-1.0, b[1], b[4]]))
}

/// The period-two orbit: upper point in `location_series`, lower point in
/// `partner_series`, shared multiplier `1 + 4 b2 m² + M m⁴`.
pub fn pd_branch(j: &Jet2) -> Result<Branch, SkeletonError> {
    let second = pd_second_iterate(j)?;
    let (lower, upper) = second.c.nontrivial();
    let b = second.b;
    let mut branch = Branch::new(
        BranchLabel::PeriodTwoPair,
        BranchParam::M,
        upper.location_series.coeffs().to_vec(),
        vec![1.0, 0.0, 4.0 * b[1], 0.0, pd_m_coeff(&b)],
    );
    branch.partner_series = Some(lower.location_series);
    Ok(branch)
}

/// μ sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuGrid {
    pub start: f64,
    pub end: f64,
    pub n: usize,
    pub log: bool,
}

impl MuGrid {
    /// 16 log-spaced points from `1e-6·trust_mu` to `trust_mu`.
    pub fn default_for(trust_mu: f64) -> Self {
        Self {
            start: 1e-6 * trust_mu,
            end: trust_mu,
            n: 16,
            log: true,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.start];
        }
        (0..self.n)
            .map(|i| {
                let t = i as f64 / (self.n - 1) as f64;
                if i == 0 {
                    self.start
                } else if i + 1 == self.n {
                    self.end
                } else if self.log {
                    let s = self.start.signum();
                    s * (self.start.abs().ln() * (1.0 - t) + self.end.abs().ln() * t).exp()
                } else {
                    self.start * (1.0 - t) + self.end * t
                }
            })
            .collect()
    }
}

impl FromStr for MuGrid {
    type Err = String;

    /// `a:b:n` with an optional `log` or `lin` suffix, e.g. `1e-6:0.01:16log`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("mu grid '{s}' must look like a:b:n(log|lin)"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}' in mu grid"));
        let start = num(parts[0])?;
        let end = num(parts[1])?;
        let last = parts[2].trim();
        let (count, log) = if let Some(c) = last.strip_suffix("log") {
            (c, true)
        } else if let Some(c) = last.strip_suffix("lin") {
            (c, false)
        } else {
            (last, true)
        };
        let n: usize = count.parse().map_err(|_| format!("bad point count '{count}' in mu grid"))?;
        if n == 0 || !start.is_finite() || !end.is_finite() {
            return Err(format!("mu grid '{s}' is empty or non-finite"));
        }
        if log && (start == 0.0 || end == 0.0 || start.signum() != end.signum()) {
            return Err(format!("log mu grid '{s}' needs nonzero endpoints of one sign"));
        }
        Ok(Self { start, end, n, log })
    }
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_RESIDUAL: f64 = 1e-12;

/// Newton on `f(x) - x` (or `f²(x) - x`) from `x0`; returns `(x, residual, converged)`.
fn newton_fixed(spec: &MapSpec, mu: f64, x0: f64, period: usize) -> Result<(f64, f64, bool), EvalError> {
    let mut x = x0;
    let residual_at = |x: f64| -> Result<(f64, f64), EvalError> {
        let mut y = x;
        let mut slope = 1.0;
        for _ in 0..period {
            let d = spec.eval_dx(y, mu)?;
            slope *= d.d;
            y = d.v;
        }
        Ok((y - x, slope - 1.0))
    };
    for _ in 0..NEWTON_MAX_ITER {
        let (r, dr) = residual_at(x)?;
        if r == 0.0 {
            return Ok((x, 0.0, true));
        }
        if dr == 0.0 || !dr.is_finite() {
            break;
        }
        let step = r / dr;
        x -= step;
        if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
    }
    let r = residual_at(x)?.0.abs();
    Ok((x, r, r <= NEWTON_RESIDUAL))
}

fn orbit_multiplier(spec: &MapSpec, mu: f64, x: f64, period: usize) -> Result<(f64, f64), EvalError> {
    let mut y = x;
    let mut m = 1.0;
    for _ in 0..period {
        let d = spec.eval_dx(y, mu)?;
        m *= d.d;
        y = d.v;
    }
    Ok((m, y))
}

/// Newton-refined samples of `branch` on `grid`, seeded by the series.
///
/// A sample is flagged invalid when Newton fails, `|μ|` exceeds the trust
/// radius, or the root lands more than half the distance to the nearest
/// sibling branch away from the prediction.
pub fn newton_branch(spec: &MapSpec, branch: &Branch, siblings: &[&Branch], grid: &[f64]) -> Vec<Sample> {
    let period = if branch.label == BranchLabel::PeriodTwoPair { 2 } else { 1 };
    grid.par_iter()
        .filter_map(|&mu| {
            let pred = branch.predict(mu)?;
            let mut gap = f64::INFINITY;
            for s in siblings {
                if let Some(p) = s.predict(mu) {
                    gap = gap.min((p - pred).abs());
                }
            }
            if let Some(p) = branch.predict_partner(mu) {
                gap = gap.min((p - pred).abs());
            }
            let invalid = |residual: f64| Sample {
                mu,
                x: pred,
                partner: None,
                multiplier: f64::NAN,
                series_x: pred,
                residual,
                valid: false,
            };
            let Ok((x, residual, converged)) = newton_fixed(spec, mu, pred, period) else {
                return Some(invalid(f64::INFINITY));
            };
            let Ok((multiplier, image)) = orbit_multiplier(spec, mu, x, period) else {
                return Some(invalid(residual));
            };
            let valid = converged
                && mu.abs() <= spec.trust_mu()
                && (gap.is_infinite() || (x - pred).abs() <= 0.5 * gap)
                && multiplier.is_finite();
            let partner = (period == 2).then(|| spec.eval(x, mu).unwrap_or(image));
            Some(Sample {
                mu,
                x,
                partner,
                multiplier,
                series_x: pred,
                residual,
                valid,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet(src: &str) -> Jet2 {
        MapSpec::parse_with(src, &[]).unwrap().jet().unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn sn_normal_form_branches() {
        let (lo, up) = sn_branches(&jet("x + mu - x^2")).unwrap();
        assert_eq!(lo.location_series.coeffs(), &[0.0, -1.0, 0.0]);
        assert_eq!(up.location_series.coeffs(), &[0.0, 1.0, 0.0]);
        assert_eq!(lo.multiplier_series.coeffs(), &[1.0, 2.0, 0.0]);
        assert_eq!(up.multiplier_series.coeffs(), &[1.0, -2.0, 0.0]);
    }

    #[test]
    fn sn_xexp_branches() {
        let (lo, up) = sn_branches(&jet("x*exp(-x) + mu")).unwrap();
        close(up.location_series.coeff(1), 1.0, 1e-14);
        close(up.location_series.coeff(2), 0.25, 1e-14);
        close(lo.location_series.coeff(1), -1.0, 1e-14);
        close(up.multiplier_series.coeff(1), -2.0, 1e-14);
        close(lo.multiplier_series.coeff(1), 2.0, 1e-14);
        close(up.multiplier_series.coeff(2), 1.0, 1e-14);
    }

    #[test]
    fn sn_extended_form_multiplier_carries_a() {
        let (_, up) = sn_branches(&jet("x + mu - x^2 + 0.3*x^3")).unwrap();
        close(up.multiplier_series.coeff(2), 0.6, 1e-14);
    }

    #[test]
    fn sn_rejects_wrong_signs() {
        assert!(matches!(
            sn_branches(&jet("x - mu - x^2")),
            Err(SkeletonError::Precondition { .. })
        ));
    }

    #[test]
    fn tc_logistic() {
        let (triv, nt) = tc_branches(&jet("(1+mu)*x*(1-x)")).unwrap();
        close(nt.location_series.coeff(1), 1.0, 1e-14);
        close(nt.location_series.coeff(2), -1.0, 1e-14);
        assert_eq!(nt.multiplier_series.coeffs(), &[1.0, -1.0, 0.0]);
        assert_eq!(triv.multiplier_series.coeffs(), &[1.0, 1.0, 0.0]);

        let (_, main) = tc_branches_variant(&jet("(1+mu)*x*(1-x)"), TcVariant::MixedFirst).unwrap();
        close(main.location_series.coeff(2), -0.5, 1e-14);
    }

    #[test]
    fn tc_normal_forms() {
        let (_, nt) = tc_branches(&jet("x + mu*x - x^2")).unwrap();
        assert_eq!(nt.location_series.coeffs(), &[0.0, 1.0, 0.0]);
        assert_eq!(nt.multiplier_series.coeffs(), &[1.0, -1.0, 0.0]);
        let (_, nt) = tc_branches(&jet("x + mu*x - x^2 + 0.7*x^3")).unwrap();
        close(nt.multiplier_series.coeff(2), 0.7, 1e-14);
    }

    #[test]
    fn pf_examples() {
        let (triv, lo, up) = pf_branches(&jet("x + mu*x - x^3")).unwrap();
        assert_eq!(up.location_series.coeffs(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(lo.location_series.coeffs(), &[0.0, -1.0, 0.0, 0.0]);
        assert_eq!(up.multiplier_series.coeffs(), &[1.0, 0.0, -2.0, 0.0, 0.0]);
        assert_eq!(triv.multiplier_series.coeffs(), &[1.0, 1.0, 0.0]);

        let (_, lo, up) = pf_branches(&jet("x + mu*x - x^3 + x^4")).unwrap();
        close(up.location_series.coeff(1), 1.0, 1e-14);
        close(up.location_series.coeff(2), 0.5, 1e-14);
        close(lo.location_series.coeff(2), 0.5, 1e-14);
        close(up.location_series.coeff(3), 0.625, 1e-14);
    }

    #[test]
    fn pf_extended_form_matches_closed_series() {
        let (a, b) = (0.4, -0.3);
        let spec = MapSpec::parse_with("x + mu*x - x^3 + a*x^5 + b*mu*x^2", &[("a", a), ("b", b)]).unwrap();
        let (_, lo, up) = pf_branches(&spec.jet().unwrap()).unwrap();
        for (br, s) in [(&lo, -1.0), (&up, 1.0)] {
            close(br.location_series.coeff(1), s, 1e-14);
            close(br.location_series.coeff(2), b / 2.0, 1e-14);
            close(br.location_series.coeff(3), s * (4.0 * a + b * b) / 8.0, 1e-14);
            // g_y = 1 - 2n² + (-1)^{k+1} b n³ + (4a - b²)/2 n⁴
            close(br.multiplier_series.coeff(3), -s * b, 1e-14);
            close(br.multiplier_series.coeff(4), (4.0 * a - b * b) / 2.0, 1e-14);
        }
    }

    #[test]
    fn pd_logistic_coefficients() {
        let j = jet("(-1-mu)*x - (3+mu)*x^2");
        let s = pd_second_iterate(&j).unwrap();
        assert_eq!(s.b[..4], [-3.0, -1.0, 0.0, -1.0]);
        let want = [2.0, -18.0, -3.0, 1.0, -27.0, -30.0, 0.0];
        for (got, w) in s.c.as_vec().iter().zip(want) {
            close(*got, w, 1e-11);
        }
        for (got, w) in s.c_from_b.as_vec().iter().zip(want) {
            close(*got, w, 1e-11);
        }
        close(s.c.c2 * s.c.c6 + s.c.c3 * s.c.c4, 0.0, 1e-12);
        let br = pd_branch(&j).unwrap();
        close(br.multiplier_series.coeff(2), -4.0, 1e-14);
        close(br.multiplier_series.coeff(4), -1.0, 1e-12);
        close(s.c.b_coeff(), 0.0, 1e-12);
        close(s.c.c_coeff(), -1.0, 1e-12);
    }

    #[test]
    fn pd_normal_form() {
        let a = 0.3;
        let spec = MapSpec::parse_with("-x - mu*x + x^3 + a*x^5", &[("a", a)]).unwrap();
        let j = spec.jet().unwrap();
        let s = pd_second_iterate(&j).unwrap();
        close(s.c.c3, -2.0, 1e-14);
        let br = pd_branch(&j).unwrap();
        close(br.multiplier_series.coeff(2), -4.0, 1e-14);
        close(br.multiplier_series.coeff(4), 4.0 * (1.0 - a), 1e-12);
        assert!(br.predict(-0.01).is_none());
        assert!(br.predict(0.01).is_some());
    }

    #[test]
    fn newton_examples() {
        let spec = MapSpec::parse_with("x + mu - x^2", &[]).unwrap();
        let (lo, up) = sn_branches(&spec.jet().unwrap()).unwrap();
        let s = newton_branch(&spec, &up, &[&lo], &[0.01]);
        assert!(s[0].valid);
        close(s[0].x, 0.1, 1e-15);
        close(s[0].multiplier, 0.8, 1e-14);

        let spec = MapSpec::parse_with("x*exp(-x) + mu", &[]).unwrap();
        let (lo, up) = sn_branches(&spec.jet().unwrap()).unwrap();
        let s = newton_branch(&spec, &up, &[&lo], &[1e-4]);
        assert!(s[0].valid);
        assert!((s[0].x - (0.01 + 0.25e-4)).abs() <= 2.5e-7);

        let s = newton_branch(&spec, &up, &[&lo], &[10.0]);
        assert!(!s[0].valid);
    }

    #[test]
    fn newton_period_two() {
        let spec = MapSpec::parse_with("(-1-mu)*x - (3+mu)*x^2", &[]).unwrap();
        let br = pd_branch(&spec.jet().unwrap()).unwrap();
        let s = newton_branch(&spec, &br, &[], &[1e-3]);
        assert!(s[0].valid, "{:?}", s[0]);
        let p = s[0].partner.unwrap();
        close(spec.eval(p, 1e-3).unwrap(), s[0].x, 1e-14);
        assert!(s[0].x > 0.0 && p < 0.0);
    }

    #[test]
    fn grid_parsing() {
        let g: MuGrid = "1e-4:1e-2:3log".parse().unwrap();
        let p = g.points();
        close(p[1], 1e-3, 1e-15);
        let g: MuGrid = "-0.05:-0.001:5lin".parse().unwrap();
        assert_eq!(g.points().len(), 5);
        assert!("0:1:3log".parse::<MuGrid>().is_err());
        assert!("1:2".parse::<MuGrid>().is_err());
        assert_eq!(MuGrid::default_for(0.05).points().len(), 16);
    }
}
