//! The full run: classify, skeleton, fit, conjugacy and verify, collected
//! into one serializable report. Stage failures are recorded and the run
//! continues where later stages do not depend on the failed one.

mod verify;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::classify::{classify_jet, normalize_signs, Classification, Kind, DEFAULT_TOL};
use crate::expr::MapSpec;
use crate::jet::Jet2;
use crate::kinds::{BifurcationStrategy, ConjContext, ConjugacyCheck, Registry};
use crate::normalform::{takens_alpha, Leading, NfError};
use crate::skeleton::{newton_branch, Branch, BranchLabel, BranchParam, MuGrid};

pub use verify::{CheckRow, Verification};

pub const TOOL_NAME: &str = "bifurcate";
pub const DEFAULT_CONJ_MU: f64 = 0.01;
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Classify,
    Skeleton,
    Fit,
    Conjugacy,
    Verify,
    All,
}

impl Stage {
    fn wants(self, other: Stage) -> bool {
        self == Stage::All || self == other
    }
}

/// Run options. Every `μ` here is in the coordinates of the input map.
#[derive(Debug, Clone, Serialize)]
pub struct Options {
    pub mu_grid: Option<MuGrid>,
    pub tol: f64,
    /// Strategy name overriding the classification.
    pub kind: Option<String>,
    pub conj_mu: f64,
    pub samples: usize,
    #[serde(skip)]
    pub timings: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            mu_grid: None,
            tol: DEFAULT_TOL,
            kind: None,
            conj_mu: DEFAULT_CONJ_MU,
            samples: DEFAULT_SAMPLES,
            timings: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Degenerate,
    NumericFailure,
}

impl Status {
    /// Process exit code for this outcome.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Degenerate => 2,
            Status::NumericFailure => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputEcho {
    pub map: String,
    pub params: BTreeMap<String, f64>,
    pub degree: usize,
    pub trust_x: f64,
    pub trust_mu: f64,
    pub options: Options,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    #[serde(flatten)]
    pub classification: Classification,
    /// Strategy actually used; differs from `kind` only under an override.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<&'static str>,
}

/// Branch series in normal-form orientation.
#[derive(Debug, Clone, Serialize)]
pub struct BranchSummary {
    pub label: BranchLabel,
    pub param: BranchParam,
    pub location_series: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner_series: Option<Vec<f64>>,
    pub multiplier_series: Vec<f64>,
}

/// One skeleton sample in the input map's coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonRow {
    pub mu: f64,
    pub branch: String,
    pub x: f64,
    pub multiplier: f64,
    pub series_x: f64,
    pub abs_err: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkeletonReport {
    pub coefficients: BTreeMap<String, f64>,
    pub branches: Vec<BranchSummary>,
    pub samples: Vec<SkeletonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub mu: f64,
    pub nu: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub kind: Kind,
    pub leading: Leading,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub takens_alpha2: Option<f64>,
    pub fits: Vec<FitRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugacyReport {
    /// Sources, fixed points and probes are in normal-form orientation;
    /// `conjugacy.csv` converts `x` back to the input coordinates.
    pub orientation: Orientation,
    pub checks: Vec<ConjugacyCheck>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Orientation {
    pub flip_x: bool,
    pub flip_mu: bool,
}

impl Orientation {
    fn x(self, x: f64) -> f64 {
        if self.flip_x {
            -x
        } else {
            x
        }
    }

    /// Input `μ` to normal-form `μ` and back; the map is an involution.
    fn mu(self, mu: f64) -> f64 {
        if self.flip_mu {
            -mu
        } else {
            mu
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub stage: Stage,
    pub input: InputEcho,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<SkeletonReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_form: Option<FitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugacy: Option<ConjugacyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    pub errors: Vec<String>,
    /// Seconds per stage.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl Report {
    /// `(mu, branch, x, multiplier, series_x, abs_err)` rows.
    pub fn skeleton_rows(&self) -> &[SkeletonRow] {
        self.skeleton.as_ref().map(|s| s.samples.as_slice()).unwrap_or(&[])
    }

    pub fn fit_rows(&self) -> &[FitRow] {
        self.normal_form.as_ref().map(|f| f.fits.as_slice()).unwrap_or(&[])
    }

    /// `(x, h(x), residual)` for every conjugacy sample, `x` in input coordinates.
    pub fn conjugacy_rows(&self) -> Vec<(f64, f64, f64)> {
        let Some(c) = &self.conjugacy else { return Vec::new() };
        c.checks
            .iter()
            .flat_map(|k| k.rows.iter().map(|&(x, h, r)| (c.orientation.x(x), h, r)))
            .collect()
    }
}

struct Prepared {
    strategy: std::sync::Arc<dyn BifurcationStrategy>,
    spec: MapSpec,
    jet: Jet2,
    branches: Vec<Branch>,
    leading: Leading,
    orientation: Orientation,
}

struct Clock {
    on: bool,
    out: BTreeMap<String, f64>,
}

impl Clock {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let r = f();
        if self.on {
            self.out.insert(name.to_string(), t.elapsed().as_secs_f64());
        }
        r
    }
}

/// Runs `stage` (and whatever it needs) on `spec`.
pub fn run(spec: &MapSpec, stage: Stage, opts: &Options, registry: &Registry) -> Report {
    let mut clock = Clock { on: opts.timings, out: BTreeMap::new() };
    let mut report = Report {
        tool: ToolInfo { name: TOOL_NAME, version: env!("CARGO_PKG_VERSION") },
        stage,
        input: InputEcho {
            map: spec.source(),
            params: spec.params().clone(),
            degree: spec.degree(),
            trust_x: spec.trust_x(),
            trust_mu: spec.trust_mu(),
            options: opts.clone(),
        },
        status: Status::Ok,
        classification: None,
        skeleton: None,
        normal_form: None,
        conjugacy: None,
        verification: None,
        errors: Vec::new(),
        timings: None,
    };

    let prepared = clock.time("classify", || prepare(spec, opts, registry, &mut report));
    if let Some(p) = prepared {
        if stage != Stage::Classify {
            if stage.wants(Stage::Skeleton) {
                report.skeleton = clock.time("skeleton", || skeleton_stage(&p, opts, &mut report.errors));
            }
            if stage.wants(Stage::Fit) {
                report.normal_form = clock.time("fit", || fit_stage(&p, opts, &mut report.errors));
            }
            if stage.wants(Stage::Conjugacy) {
                report.conjugacy = clock.time("conjugacy", || conjugacy_stage(&p, opts, &mut report.errors));
            }
            if stage.wants(Stage::Verify) {
                let v = clock.time("verify", || verify::run(spec, &p.spec, p.strategy.as_ref(), &p.jet, &p.branches, &p.leading));
                if !v.passed {
                    report.errors.push(format!(
                        "verification failed: {}",
                        v.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ")
                    ));
                }
                report.verification = Some(v);
            }
        }
    }
    if report.status == Status::Ok && !report.errors.is_empty() {
        report.status = Status::NumericFailure;
    }
    if opts.timings {
        report.timings = Some(clock.out);
    }
    report
}

fn prepare(spec: &MapSpec, opts: &Options, registry: &Registry, report: &mut Report) -> Option<Prepared> {
    let raw = match spec.jet() {
        Ok(j) => j,
        Err(e) => {
            report.errors.push(format!("jet evaluation at the origin failed: {e}"));
            report.status = Status::NumericFailure;
            return None;
        }
    };
    let mut c = classify_jet(&raw, opts.tol);
    let strategy = match &opts.kind {
        Some(name) => match registry.get(name) {
            Some(s) => s,
            None => {
                report.errors.push(format!("unknown kind '{name}'; known: {}", registry.names().join(", ")));
                report.status = Status::Degenerate;
                report.classification = Some(ClassificationReport { classification: c, strategy: None });
                return None;
            }
        },
        None => match registry.for_kind(c.kind) {
            Some(s) if c.kind.is_elementary() => s,
            _ => {
                let why = c.note.clone().unwrap_or_else(|| format!("no strategy for kind {}", c.kind));
                report.errors.push(format!("not an elementary bifurcation: {why}"));
                report.status = Status::Degenerate;
                report.classification = Some(ClassificationReport { classification: c, strategy: None });
                return None;
            }
        },
    };
    if opts.kind.is_some() {
        match normalize_signs(&raw, strategy.kind(), opts.tol) {
            Ok((_, fx, fm)) => {
                c.flip_x = fx;
                c.flip_mu = fm;
            }
            Err(d) => {
                report.errors.push(format!(
                    "kind {} does not apply: {} = {:e} is within tolerance of zero",
                    strategy.name(),
                    d.quantity,
                    d.value
                ));
                report.status = Status::Degenerate;
                report.classification = Some(ClassificationReport { classification: c, strategy: Some(strategy.name()) });
                return None;
            }
        }
    }
    let orientation = Orientation { flip_x: c.flip_x, flip_mu: c.flip_mu };
    let nspec = c.normalize_spec(spec);
    let jet = c.normalize_jet(&raw);
    report.classification = Some(ClassificationReport { classification: c, strategy: Some(strategy.name()) });
    if report.stage == Stage::Classify {
        // Nothing downstream is needed; skip the skeleton work.
        return None;
    }
    let branches = match strategy.branches(&jet) {
        Ok(b) => b,
        Err(e) => {
            report.errors.push(format!("skeleton: {e}"));
            report.status = Status::Degenerate;
            return None;
        }
    };
    let leading = match strategy.leading(&jet) {
        Ok(l) => l,
        Err(e) => {
            report.errors.push(format!("leading coefficients: {e}"));
            report.status = Status::Degenerate;
            return None;
        }
    };
    Some(Prepared { strategy, spec: nspec, jet, branches, leading, orientation })
}

/// Skeleton grid in normal-form `μ`: the user's grid, or the default
/// log grid mirrored to both signs.
fn skeleton_grid(p: &Prepared, opts: &Options) -> Vec<f64> {
    match &opts.mu_grid {
        Some(g) => g.points().into_iter().map(|m| p.orientation.mu(m)).collect(),
        None => {
            let pos = MuGrid::default_for(p.spec.trust_mu()).points();
            pos.iter().rev().map(|m| -m).chain(pos.iter().copied()).collect()
        }
    }
}

fn skeleton_stage(p: &Prepared, opts: &Options, errors: &mut Vec<String>) -> Option<SkeletonReport> {
    let coefficients = match p.strategy.coefficients(&p.jet) {
        Ok(c) => c,
        Err(e) => {
            errors.push(format!("skeleton coefficients: {e}"));
            BTreeMap::new()
        }
    };
    let grid = skeleton_grid(p, opts);
    let mut samples = Vec::new();
    for br in &p.branches {
        let siblings: Vec<&Branch> = p
            .branches
            .iter()
            .filter(|b| b.label != br.label && b.label != BranchLabel::PeriodTwoPair)
            .collect();
        for s in newton_branch(&p.spec, br, &siblings, &grid) {
            let mu = p.orientation.mu(s.mu);
            if !s.valid && s.mu.abs() <= p.spec.trust_mu() {
                errors.push(format!("skeleton: branch {} failed at mu = {mu}", br.label));
            }
            let mut push = |x: f64, series: f64, name: String| {
                samples.push(SkeletonRow {
                    mu,
                    branch: name,
                    x: p.orientation.x(x),
                    multiplier: s.multiplier,
                    series_x: p.orientation.x(series),
                    abs_err: (x - series).abs(),
                    valid: s.valid,
                });
            };
            push(s.x, s.series_x, br.label.to_string());
            if let (Some(px), Some(ps)) = (s.partner, br.predict_partner(s.mu)) {
                push(px, ps, format!("{}_partner", br.label));
            }
        }
    }
    samples.sort_by(|a, b| a.mu.total_cmp(&b.mu).then_with(|| a.branch.cmp(&b.branch)));
    let branches = p
        .branches
        .iter()
        .map(|b| BranchSummary {
            label: b.label,
            param: b.param,
            location_series: b.location_series.coeffs().to_vec(),
            partner_series: b.partner_series.as_ref().map(|s| s.coeffs().to_vec()),
            multiplier_series: b.multiplier_series.coeffs().to_vec(),
        })
        .collect();
    Some(SkeletonReport { coefficients, branches, samples })
}

fn fit_stage(p: &Prepared, opts: &Options, errors: &mut Vec<String>) -> Option<FitReport> {
    let kind = p.strategy.kind();
    // Default: the side where every kind has non-trivial branches.
    let grid: Vec<f64> = match &opts.mu_grid {
        Some(g) => g.points().into_iter().map(|m| p.orientation.mu(m)).collect(),
        None => MuGrid::default_for(p.spec.trust_mu()).points(),
    };
    let fits: Vec<_> = {
        use rayon::prelude::*;
        grid.par_iter()
            .map(|&mu| (mu, p.strategy.fit(&p.spec, &p.branches, &p.leading, mu)))
            .collect()
    };
    let rows = fits
        .into_iter()
        .map(|(mu, r)| {
            let mu_in = p.orientation.mu(mu);
            match r {
                Ok(f) => FitRow { mu: mu_in, nu: f.nu, a: f.a, b: f.b, residual: f.residual, error: None },
                Err(e) => {
                    // Asking for a fit where none exists is not a numeric failure.
                    if !matches!(e, NfError::OutOfRange { .. }) {
                        errors.push(format!("fit at mu = {mu_in}: {e}"));
                    }
                    FitRow { mu: mu_in, nu: f64::NAN, a: None, b: None, residual: f64::NAN, error: Some(e.to_string()) }
                }
            }
        })
        .collect();
    let takens_alpha2 = matches!(kind, Kind::SaddleNode | Kind::Transcritical)
        .then(|| takens_alpha(&p.jet, 2).ok())
        .flatten();
    Some(FitReport { kind, leading: p.leading, takens_alpha2, fits: rows })
}

fn conjugacy_stage(p: &Prepared, opts: &Options, errors: &mut Vec<String>) -> Option<ConjugacyReport> {
    let m = p.orientation.mu(opts.conj_mu).abs();
    let mut checks = Vec::new();
    for mu in [m, -m] {
        let ctx = ConjContext {
            spec: &p.spec,
            jet: &p.jet,
            branches: &p.branches,
            leading: &p.leading,
            mu,
            samples: opts.samples,
        };
        match p.strategy.conjugacies(&ctx) {
            Ok(cs) => {
                for c in &cs {
                    if c.failures > 0 || !c.residual_sup.is_finite() {
                        errors.push(format!("conjugacy '{}' at mu = {}: {} sample failures", c.label, c.mu, c.failures));
                    }
                }
                checks.extend(cs);
            }
            Err(e) => errors.push(format!("conjugacy at mu = {}: {e}", p.orientation.mu(mu))),
        }
    }
    Some(ConjugacyReport { orientation: p.orientation, checks })
}
