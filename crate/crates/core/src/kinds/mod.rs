//! One strategy per bifurcation kind behind a common trait, registered by
//! name and chosen at run time from the classification or by the user.

mod period_doubling;
mod pitchfork;
mod saddle_node;
mod transcritical;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::classify::Kind;
use crate::conjugacy::{
    admissible_samples, build_basins, derivative_probe, residual, BasinConjugacy, ConjError, Conjugacy, EscapeMatch,
    Map1D,
    NormalFormMap, Probe, ResidualReport, SeedKind, SliceMap,
};
use crate::expr::{EvalError, MapSpec};
use crate::jet::Jet2;
use crate::normalform::{self, leading_coefficients, match_multipliers, Fit, Leading, NfError, NormalForm};
use crate::skeleton::{self, Branch, BranchLabel, SkeletonError};

pub use period_doubling::PeriodDoublingStrategy;
pub use pitchfork::PitchforkStrategy;
pub use saddle_node::{SaddleNodeStrategy, TRANSIT_FRACTION};
pub use transcritical::TranscriticalStrategy;

/// Amount added to the fitted `a` for the mismatch probes.
pub const MISMATCH_SHIFT: f64 = 0.5;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    NormalForm(#[from] NfError),
    #[error(transparent)]
    Conjugacy(#[from] ConjError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Other(String),
}

/// Everything a strategy needs to build conjugacies at one `μ`. The map,
/// jet and branches are in normal-form sign conventions.
pub struct ConjContext<'a> {
    pub spec: &'a MapSpec,
    pub jet: &'a Jet2,
    pub branches: &'a [Branch],
    pub leading: &'a Leading,
    pub mu: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchProbe {
    pub a: f64,
    pub probe: Probe,
}

/// One built conjugacy and its checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugacyCheck {
    pub label: String,
    pub mu: f64,
    pub nu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<[f64; 2]>,
    pub source: [f64; 2],
    pub seed: SeedKind,
    pub residual_sup: f64,
    pub samples: usize,
    pub failures: usize,
    pub monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<Probe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<MismatchProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape: Option<EscapeMatch>,
    /// `(x, h(x), |h(f(x)) - g(h(x))|)` per sample.
    #[serde(skip)]
    pub rows: Vec<(f64, f64, f64)>,
}

impl ConjugacyCheck {
    fn from_residual(label: String, fit: &Fit, source: (f64, f64), seed: SeedKind, r: ResidualReport) -> Self {
        Self {
            label,
            mu: fit.mu,
            nu: fit.nu,
            a: fit.a,
            b: fit.b,
            fixed_point: None,
            multipliers: None,
            source: [source.0, source.1],
            seed,
            residual_sup: r.sup,
            samples: r.samples,
            failures: r.failures,
            monotone: r.monotone,
            probe: None,
            mismatch: None,
            escape: None,
            rows: r.rows,
        }
    }
}

pub trait BifurcationStrategy: Send + Sync {
    fn kind(&self) -> Kind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Skeleton branches of a sign-normalized jet.
    fn branches(&self, j: &Jet2) -> Result<Vec<Branch>, SkeletonError>;

    /// Kind-specific coefficients worth reporting.
    fn coefficients(&self, j: &Jet2) -> Result<BTreeMap<String, f64>, SkeletonError>;

    /// Factor `k` with `y ≈ k x` between map and normal-form coordinates.
    fn coordinate_scale(&self, j: &Jet2) -> f64;

    fn leading(&self, j: &Jet2) -> Result<Leading, NfError> {
        leading_coefficients(j, self.kind())
    }

    fn fit(&self, spec: &MapSpec, branches: &[Branch], leading: &Leading, mu: f64) -> Result<Fit, NfError> {
        match_multipliers(spec, self.kind(), branches, leading, mu)
    }

    /// Builds and checks the conjugacies available at `ctx.mu`.
    fn conjugacies(&self, ctx: &ConjContext) -> Result<Vec<ConjugacyCheck>, StrategyError>;
}

/// Strategies by name.
#[derive(Clone, Default)]
pub struct Registry {
    entries: BTreeMap<&'static str, Arc<dyn BifurcationStrategy>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The four elementary kinds.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(SaddleNodeStrategy));
        r.register(Arc::new(TranscriticalStrategy));
        r.register(Arc::new(PitchforkStrategy));
        r.register(Arc::new(PeriodDoublingStrategy));
        r
    }

    pub fn register(&mut self, strategy: Arc<dyn BifurcationStrategy>) {
        self.entries.insert(strategy.name(), strategy);
    }

    /// Lookup by registered name or any alias understood by [`Kind::from_name`].
    pub fn get(&self, name: &str) -> Option<Arc<dyn BifurcationStrategy>> {
        if let Some(s) = self.entries.get(name) {
            return Some(s.clone());
        }
        Kind::from_name(name).and_then(|k| self.for_kind(k))
    }

    pub fn for_kind(&self, kind: Kind) -> Option<Arc<dyn BifurcationStrategy>> {
        self.entries.values().find(|s| s.kind() == kind).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

/// Newton-refined fixed points of period one at `mu`, sorted by position.
pub(crate) fn map_fixed_points(spec: &MapSpec, branches: &[Branch], mu: f64) -> Result<Vec<(BranchLabel, f64)>, NfError> {
    let mut out = Vec::new();
    for br in branches.iter().filter(|b| b.label != BranchLabel::PeriodTwoPair) {
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
        out.push((br.label, s.x));
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(out)
}

/// Fixed points of the normal form (of its second iterate for
/// period-doubling), sorted.
pub(crate) fn nf_fixed_points(nf: &NormalForm) -> Vec<f64> {
    let mut out = Vec::new();
    if nf.kind != Kind::SaddleNode {
        out.push(0.0);
    }
    if let Some((lo, hi)) = normalform::nf_nontrivial_points(nf) {
        out.push(lo);
        out.push(hi);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Shrinks `domain` so that no fixed points other than `known` remain:
/// beyond the outermost known point the domain stops halfway to the next
/// sign change of `f(x) - x`.
pub(crate) fn trim_domain(f: &dyn Map1D, known: &[f64], (lo, hi): (f64, f64)) -> (f64, f64) {
    const N: usize = 1024;
    let (Some(first), Some(last)) = (known.first().copied(), known.last().copied()) else {
        return (lo, hi);
    };
    let walk = |from: f64, to: f64| -> f64 {
        if (to - from).abs() <= 0.0 {
            return to;
        }
        let d = |x: f64| f.eval(x).map(|y| y - x);
        let mut sign = None;
        for i in 1..=N {
            let x = from + (to - from) * i as f64 / N as f64;
            let Some(v) = d(x) else {
                return from + 0.5 * (x - from);
            };
            let s = v.signum();
            match sign {
                None => sign = Some(s),
                Some(s0) if s0 != s || v == 0.0 => return from + 0.5 * (x - from),
                _ => {}
            }
        }
        to
    };
    (walk(first, lo), walk(last, hi))
}

fn arc<M: Map1D + 'static>(m: M) -> Arc<dyn Map1D> {
    Arc::new(m)
}

/// The normalized map at `mu` on its monotone trust interval, trimmed to
/// the fixed points `known`.
pub(crate) fn slice_map(spec: &MapSpec, mu: f64, known: &[f64]) -> Result<SliceMap, ConjError> {
    let full = SliceMap::new(spec.clone(), mu, spec.trust_x())?;
    let dom = trim_domain(&full, known, full.domain());
    Ok(SliceMap::with_domain(spec.clone(), mu, dom))
}

pub(crate) fn nf_map(nf: NormalForm, bound: f64, known: &[f64]) -> Result<NormalFormMap, ConjError> {
    let full = NormalFormMap::new(nf, bound)?;
    let dom = trim_domain(&full, known, full.domain());
    Ok(NormalFormMap::with_domain(nf, dom))
}

fn probe_at(h: &dyn Conjugacy, x: f64, y: f64) -> Option<Probe> {
    derivative_probe(h, x, y).ok()
}

/// Basin conjugacies for an orientation-preserving map and its fitted
/// normal form: residuals, derivative probes at every basin centre, and
/// probes against the normal form with `a + 0.5` at the non-trivial points.
pub(crate) fn increasing_checks(ctx: &ConjContext, kind: Kind, fit: &Fit, scale: f64) -> Result<Vec<ConjugacyCheck>, StrategyError> {
    let a = fit
        .a
        .ok_or_else(|| StrategyError::Other(format!("no fitted a at mu = {}", ctx.mu)))?;
    let b = fit.b.unwrap_or(0.0);
    let fps = map_fixed_points(ctx.spec, ctx.branches, ctx.mu)?;
    let xs: Vec<f64> = fps.iter().map(|p| p.1).collect();
    let f = arc(slice_map(ctx.spec, ctx.mu, &xs)?);
    let bound = 2.0 * scale * ctx.spec.trust_x();

    let nf = NormalForm::new(kind, fit.nu, a, b)?;
    let ys = nf_fixed_points(&nf);
    let g = arc(nf_map(nf, bound, &ys)?);
    let basins = build_basins(f.clone(), g, &xs, &ys)?;

    let wrong = NormalForm::new(kind, fit.nu, a + MISMATCH_SHIFT, b)?;
    let ys_wrong = nf_fixed_points(&wrong);
    let g_wrong = arc(nf_map(wrong, bound, &ys_wrong)?);
    let basins_wrong = build_basins(f.clone(), g_wrong, &xs, &ys_wrong).ok();

    let mut out = Vec::new();
    for (k, basin) in basins.iter().enumerate() {
        let label = fps[k].0;
        let tag = if basin.attracting() { "attracting" } else { "repelling" };
        out.push(basin_check(
            format!("basin of {tag} {label}"),
            fit,
            basin,
            f.as_ref(),
            ctx.samples,
            (label != BranchLabel::Trivial)
                .then(|| basins_wrong.as_ref().map(|w| &w[k]))
                .flatten()
                .map(|w| (a + MISMATCH_SHIFT, w)),
        ));
    }
    Ok(out)
}

fn basin_check(
    label: String,
    fit: &Fit,
    basin: &BasinConjugacy,
    f: &dyn Map1D,
    samples: usize,
    mismatch: Option<(f64, &BasinConjugacy)>,
) -> ConjugacyCheck {
    let (lo, hi) = basin.source();
    let xs = admissible_samples(f, lo, hi, samples);
    let mut check = ConjugacyCheck::from_residual(label, fit, (lo, hi), SeedKind::Linearized, residual(basin, &xs));
    let (x, y) = basin.fixed_points();
    let (lf, lg) = basin.multipliers();
    check.fixed_point = Some([x, y]);
    check.multipliers = Some([lf, lg]);
    check.probe = probe_at(basin, x, y);
    check.mismatch = mismatch.and_then(|(a, w)| {
        let (xw, yw) = w.fixed_points();
        probe_at(w, xw, yw).map(|probe| MismatchProbe { a, probe })
    });
    check
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let r = Registry::builtin();
        assert_eq!(r.names(), vec!["PeriodDoubling", "Pitchfork", "SaddleNode", "Transcritical"]);
        assert_eq!(r.get("sn").unwrap().kind(), Kind::SaddleNode);
        assert_eq!(r.get("PeriodDoubling").unwrap().kind(), Kind::PeriodDoubling);
        assert_eq!(r.get("flip").unwrap().kind(), Kind::PeriodDoubling);
        assert!(r.get("hopf").is_none());
        assert!(r.for_kind(Kind::Degenerate).is_none());
    }

    #[test]
    fn trims_far_fixed_points() {
        // x + 0.01 - x² + x³ has a third fixed point near 1.
        let nf = NormalForm::new(Kind::SaddleNode, 0.01, 1.0, 0.0).unwrap();
        let ys = nf_fixed_points(&nf);
        assert_eq!(ys.len(), 2);
        let m = nf_map(nf, 2.0, &ys).unwrap();
        let (lo, hi) = m.domain();
        assert!(lo == -2.0 && hi < 1.0 && hi > ys[1], "{lo} {hi}");
    }
}
