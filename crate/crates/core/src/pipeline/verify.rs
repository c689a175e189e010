use serde::Serialize;

use crate::classify::Kind;
use crate::expr::MapSpec;
use crate::jet::Jet2;
use crate::kinds::BifurcationStrategy;
use crate::normalform::{nf_nontrivial_points, takens_alpha, Leading, NormalForm};
use crate::oracle::{fd_derivative, isolate_fixed_points, slope};
use crate::skeleton::{Branch, BranchLabel, BranchParam};

pub const FD_REL_TOL: f64 = 1e-5;
pub const MULTIPLIER_TOL: f64 = 1e-10;
pub const TAKENS_TOL: f64 = 1e-13;
/// Slack allowed below the nominal order of a branch series.
pub const SLOPE_SLACK: f64 = 0.2;
pub const MATCH_MUS: [f64; 2] = [1e-3, 1e-2];
const COUNT_MUS: [f64; 4] = [-1e-2, -1e-3, 1e-3, 1e-2];
const ROOT_GRID: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub passed: bool,
    pub checks: Vec<CheckRow>,
}

fn row(name: String, value: f64, tolerance: f64, passed: bool, detail: String) -> CheckRow {
    CheckRow { name, value, tolerance, passed, detail }
}

/// Oracle cross-checks. `raw` is the input map, `spec`/`jet`/`branches`
/// its sign-normalized forms.
pub fn run(
    raw: &MapSpec,
    spec: &MapSpec,
    strategy: &dyn BifurcationStrategy,
    jet: &Jet2,
    branches: &[Branch],
    leading: &Leading,
) -> Verification {
    let mut checks = Vec::new();
    checks.extend(derivatives(raw));
    checks.extend(root_counts(spec, branches));
    checks.extend(branch_slopes(spec, branches));
    checks.extend(multipliers(spec, strategy, branches, leading));
    if matches!(strategy.kind(), Kind::SaddleNode | Kind::Transcritical) {
        let (value, detail) = match takens_alpha(jet, 2) {
            Ok(alpha) => ((alpha - leading.a0).abs(), format!("alpha2 = {alpha}, a0 = {}", leading.a0)),
            Err(e) => (f64::INFINITY, e.to_string()),
        };
        checks.push(row("takens alpha2 = a0".into(), value, TAKENS_TOL, value <= TAKENS_TOL, detail));
    }
    Verification { passed: checks.iter().all(|c| c.passed), checks }
}

fn derivatives(raw: &MapSpec) -> Vec<CheckRow> {
    let jet = match raw.jet() {
        Ok(j) => j,
        Err(e) => return vec![row("jet derivatives".into(), f64::INFINITY, FD_REL_TOL, false, e.to_string())],
    };
    let f = |x: f64, mu: f64| raw.eval(x, mu).ok();
    let mut out = Vec::new();
    for order in 1..=4usize {
        for i in 0..=order {
            let j = order - i;
            let exact = jet.deriv(i, j);
            let name = format!("fd d^{i}x d^{j}mu");
            match fd_derivative(f, 0.0, 0.0, i, j) {
                Some(est) => {
                    let rel = (est.value - exact).abs() / exact.abs().max(1.0);
                    let detail = format!("fd {} vs jet {exact}{}", est.value, if est.unstable { " (unstable)" } else { "" });
                    out.push(row(name, rel, FD_REL_TOL, rel <= FD_REL_TOL, detail));
                }
                None => out.push(row(name, f64::INFINITY, FD_REL_TOL, false, "evaluation failed".into())),
            }
        }
    }
    out
}

fn period(b: &Branch) -> usize {
    if b.label == BranchLabel::PeriodTwoPair {
        2
    } else {
        1
    }
}

/// Half-width of an interval holding every branch point at `mu` and
/// nothing from farther away.
fn radius(spec: &MapSpec, branches: &[Branch], mu: f64) -> f64 {
    let far = branches
        .iter()
        .flat_map(|b| [b.predict(mu), b.predict_partner(mu)])
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    (4.0 * far).max(4.0 * mu.abs().sqrt()).min(spec.trust_x())
}

fn root_counts(spec: &MapSpec, branches: &[Branch]) -> Vec<CheckRow> {
    let iterate = branches.iter().map(period).max().unwrap_or(1);
    COUNT_MUS
        .iter()
        .filter(|mu| mu.abs() <= spec.trust_mu())
        .map(|&mu| {
            let expected: usize = branches
                .iter()
                .filter(|b| b.predict(mu).is_some())
                .map(|b| if b.partner_series.is_some() { 2 } else { 1 })
                .sum();
            let r = radius(spec, branches, mu);
            let found = isolate_fixed_points(|x| spec.eval(x, mu).ok(), -r, r, ROOT_GRID, iterate);
            let n = found.roots.len();
            let detail = format!("expected {expected} on [-{r}, {r}], roots {:?}", found.roots);
            row(format!("root count at mu = {mu}"), n as f64, 0.0, n == expected, detail)
        })
        .collect()
}

/// Oracle root nearest the series prediction, searched within half the
/// distance to the nearest other branch point.
fn nearest_root(spec: &MapSpec, branches: &[Branch], b: &Branch, mu: f64) -> Option<(f64, f64)> {
    let pred = b.predict(mu)?;
    let gap = branches
        .iter()
        .flat_map(|o| [o.predict(mu), o.predict_partner(mu)])
        .flatten()
        .filter(|x| *x != pred)
        .fold(f64::INFINITY, |m, x| m.min((x - pred).abs()));
    let w = if gap.is_finite() { 0.5 * gap } else { 0.5 * pred.abs().max(1e-3) };
    let roots = isolate_fixed_points(|x| spec.eval(x, mu).ok(), pred - w, pred + w, 256, period(b)).roots;
    roots
        .into_iter()
        .min_by(|a, c| (a - pred).abs().total_cmp(&(c - pred).abs()))
        .map(|r| (r, pred))
}

fn branch_slopes(spec: &MapSpec, branches: &[Branch]) -> Vec<CheckRow> {
    let scales: Vec<f64> = (4..=9).map(|k| 2f64.powi(-k)).collect();
    branches
        .iter()
        .filter(|b| b.label != BranchLabel::Trivial)
        .map(|b| {
            let mus: Vec<f64> = match b.param {
                BranchParam::M => scales.iter().map(|m| m * m).collect(),
                BranchParam::Mu => scales.clone(),
            };
            let errs: Option<Vec<f64>> = mus
                .iter()
                .map(|&mu| nearest_root(spec, branches, b, mu).map(|(r, p)| (r - p).abs()))
                .collect();
            let order = b.location_order() as f64;
            let name = format!("branch {} series order", b.label);
            match errs.as_deref().and_then(|e| slope(&scales, e)) {
                Some(s) => row(
                    name,
                    s.slope,
                    order - SLOPE_SLACK,
                    s.slope >= order - SLOPE_SLACK,
                    format!("nominal order {order}, errors {:?}", errs.unwrap_or_default()),
                ),
                None => row(name, f64::NAN, order - SLOPE_SLACK, false, "oracle root not found".into()),
            }
        })
        .collect()
}

/// Multipliers at the fixed points (of the second iterate when `iterate`
/// is 2) of `f` on `[-r, r]`, found by the oracle and differentiated
/// along the orbit with `df`.
fn multipliers_of(f: impl Fn(f64) -> Option<f64>, df: impl Fn(f64) -> Option<f64>, r: f64, iterate: usize) -> Option<Vec<f64>> {
    isolate_fixed_points(&f, -r, r, ROOT_GRID, iterate)
        .roots
        .into_iter()
        .map(|x| {
            let (mut y, mut m) = (x, 1.0);
            for _ in 0..iterate {
                m *= df(y)?;
                y = f(y)?;
            }
            Some(m)
        })
        .collect()
}

fn multipliers(spec: &MapSpec, strategy: &dyn BifurcationStrategy, branches: &[Branch], leading: &Leading) -> Vec<CheckRow> {
    let kind = strategy.kind();
    let iterate = branches.iter().map(period).max().unwrap_or(1);
    MATCH_MUS
        .iter()
        .map(|&mu| {
            let name = format!("multiplier match at mu = {mu}");
            let fail = |d: String| row(name.clone(), f64::INFINITY, MULTIPLIER_TOL, false, d);
            let fit = match strategy.fit(spec, branches, leading, mu) {
                Ok(f) => f,
                Err(e) => return fail(e.to_string()),
            };
            let nf = match NormalForm::new(kind, fit.nu, fit.a.unwrap_or(0.0), fit.b.unwrap_or(0.0)) {
                Ok(n) => n,
                Err(e) => return fail(e.to_string()),
            };
            let r = radius(spec, branches, mu);
            let map = multipliers_of(|x| spec.eval(x, mu).ok(), |x| spec.eval_dx(x, mu).ok().map(|d| d.d), r, iterate);
            let far = nf_nontrivial_points(&nf).map(|(a, b)| a.abs().max(b.abs())).unwrap_or(0.0);
            let rn = (4.0 * far).max(4.0 * fit.nu.abs().sqrt());
            let norm = multipliers_of(|y| Some(nf.eval(y)), |y| Some(nf.deriv(y)), rn, iterate);
            match (map, norm) {
                (Some(m), Some(n)) if m.len() == n.len() && !m.is_empty() => {
                    let worst = m.iter().zip(&n).fold(0.0f64, |w, (a, b)| w.max((a - b).abs()));
                    row(name, worst, MULTIPLIER_TOL, worst <= MULTIPLIER_TOL, format!("map {m:?}, normal form {n:?}"))
                }
                (m, n) => fail(format!("fixed point sets differ: map {m:?}, normal form {n:?}")),
            }
        })
        .collect()
}
