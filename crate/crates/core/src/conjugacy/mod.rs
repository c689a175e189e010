//! Numerical conjugacies `h` with `h ∘ f = g ∘ h` between a map and its
//! fitted normal form, built from a seed on a fundamental domain and
//! extended by push-forward.

mod basin;
mod escape;
mod koenigs;
mod lift;
mod piece;
mod probe;

use std::sync::Arc;

use thiserror::Error;

use crate::expr::MapSpec;
use crate::normalform::NormalForm;
use crate::roots;

pub use basin::{build_basin, build_basins, BasinConjugacy, Side};
pub use escape::{escape_data, match_nu_by_escape, EscapeData, EscapeMatch};
pub use koenigs::Linearization;
pub use lift::PdLift;
pub use piece::{build_between_fixed_points, build_no_fixed_points, ConjugacyPiece, SeedKind};
pub use probe::{derivative_probe, Probe, ProbeVerdict, SideProbe};

/// Iteration cap for push-forward and linearization loops.
pub const ITERATION_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConjError {
    #[error("{x} lies outside the source interval ({lo}, {hi})")]
    OutsideSource { x: f64, lo: f64, hi: f64 },
    #[error("{x} needs more than {cap} iterations to reach the seed domain")]
    IterationCap { x: f64, cap: usize },
    #[error("map evaluation failed at {0}")]
    Eval(f64),
    #[error("inverse undefined at {0}")]
    Inverse(f64),
    #[error("sign of f(x) - x on the source ({src}) differs from g(y) - y on the target ({tgt})")]
    SignMismatch { src: f64, tgt: f64 },
    #[error("fixed point detected inside ({lo}, {hi})")]
    FixedPointInside { lo: f64, hi: f64 },
    #[error("multiplier {0} is not hyperbolic")]
    NotHyperbolic(f64),
    #[error("fixed points have different stability (multipliers {0} and {1})")]
    StabilityMismatch(f64, f64),
    #[error("conjugacy is not monotone near {0}")]
    NotMonotone(f64),
    #[error("{0}")]
    Setup(String),
}

/// A one-dimensional map, monotone on its domain.
pub trait Map1D: Send + Sync {
    fn eval(&self, x: f64) -> Option<f64>;
    fn deriv(&self, x: f64) -> Option<f64>;

    /// Taylor coefficients `(f', f''/2, f'''/6)` at `x`, when available.
    fn taylor3(&self, _x: f64) -> Option<[f64; 3]> {
        None
    }

    /// Closed interval on which the map is defined and strictly monotone.
    fn domain(&self) -> (f64, f64);

    fn inverse(&self, y: f64) -> Option<f64> {
        invert(self, y)
    }
}

/// Bracketed bisection to width `1e-13`, then two Newton steps. A few
/// Newton steps first narrow the bracket; the whole domain is the fallback.
pub fn invert<M: Map1D + ?Sized>(map: &M, y: f64) -> Option<f64> {
    let (lo, hi) = map.domain();
    let (flo, fhi) = (map.eval(lo)?, map.eval(hi)?);
    if y < flo.min(fhi) || y > flo.max(fhi) {
        return None;
    }
    let r = |x: f64| map.eval(x).map(|v| v - y);
    let mut x = if fhi > flo { y } else { -y }.clamp(lo, hi);
    let mut step = hi - lo;
    for _ in 0..6 {
        let (Some(v), Some(d)) = (r(x), map.deriv(x)) else { break };
        if v == 0.0 || d == 0.0 {
            step = 0.0;
            break;
        }
        let next = (x - v / d).clamp(lo, hi);
        step = (next - x).abs();
        x = next;
        if step <= 1e-15 * x.abs().max(1e-300) {
            break;
        }
    }
    let e = (8.0 * step).max(1e-13);
    let (a, b) = ((x - e).max(lo), (x + e).min(hi));
    let bracketed = matches!((r(a), r(b)), (Some(va), Some(vb)) if va.signum() != vb.signum() || va == 0.0 || vb == 0.0);
    let (a, b) = if bracketed { (a, b) } else { (lo, hi) };
    let x = roots::bisect(r, a, b, 1e-13).ok()?;
    Some(roots::polish(|x| Some((map.eval(x)? - y, map.deriv(x)?)), x, lo, hi, 2))
}

/// Largest interval around `center` inside `[lo, hi]` on which `deriv`
/// keeps the sign it has at `center`.
pub fn monotone_domain(deriv: impl Fn(f64) -> Option<f64>, center: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    const STEPS: usize = 2048;
    let s0 = deriv(center)?.signum();
    if s0 == 0.0 {
        return None;
    }
    let ok = |x: f64| deriv(x).is_some_and(|d| d.signum() == s0 && d.is_finite());
    let walk = |end: f64| {
        let mut last = center;
        for i in 1..=STEPS {
            let x = center + (end - center) * i as f64 / STEPS as f64;
            if !ok(x) {
                break;
            }
            last = x;
        }
        last
    };
    Some((walk(lo), walk(hi)))
}

/// `x ↦ f(x, μ)` for a fixed `μ`.
#[derive(Debug, Clone)]
pub struct SliceMap {
    spec: MapSpec,
    mu: f64,
    domain: (f64, f64),
}

impl SliceMap {
    /// Restricts to the monotone interval around 0 within `[-bound, bound]`.
    pub fn new(spec: MapSpec, mu: f64, bound: f64) -> Result<Self, ConjError> {
        let domain = monotone_domain(|x| spec.eval_dx(x, mu).ok().map(|d| d.d), 0.0, -bound, bound)
            .ok_or_else(|| ConjError::Setup(format!("map is not monotone at 0 for mu = {mu}")))?;
        Ok(Self { spec, mu, domain })
    }

    pub fn with_domain(spec: MapSpec, mu: f64, domain: (f64, f64)) -> Self {
        Self { spec, mu, domain }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl Map1D for SliceMap {
    fn eval(&self, x: f64) -> Option<f64> {
        self.spec.eval(x, self.mu).ok()
    }

    fn deriv(&self, x: f64) -> Option<f64> {
        self.spec.eval_dx(x, self.mu).ok().map(|d| d.d)
    }

    fn taylor3(&self, x: f64) -> Option<[f64; 3]> {
        let j = self.spec.jet_at(x, self.mu, 3).ok()?;
        Some([j.coeff(1, 0), j.coeff(2, 0), j.coeff(3, 0)])
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// A normal-form member as a map of `y`.
#[derive(Debug, Clone)]
pub struct NormalFormMap {
    nf: NormalForm,
    domain: (f64, f64),
}

impl NormalFormMap {
    pub fn new(nf: NormalForm, bound: f64) -> Result<Self, ConjError> {
        let domain = monotone_domain(|y| Some(nf.deriv(y)), 0.0, -bound, bound)
            .ok_or_else(|| ConjError::Setup("normal form is not monotone at 0".into()))?;
        Ok(Self { nf, domain })
    }

    pub fn with_domain(nf: NormalForm, domain: (f64, f64)) -> Self {
        Self { nf, domain }
    }

    pub fn normal_form(&self) -> &NormalForm {
        &self.nf
    }
}

impl Map1D for NormalFormMap {
    fn eval(&self, y: f64) -> Option<f64> {
        Some(self.nf.eval(y))
    }

    fn deriv(&self, y: f64) -> Option<f64> {
        Some(self.nf.deriv(y))
    }

    fn taylor3(&self, y: f64) -> Option<[f64; 3]> {
        Some([self.nf.deriv(y), self.nf.second_deriv(y) / 2.0, self.nf.third_deriv(y) / 6.0])
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// Second iterate `f ∘ f`, restricted to where both steps stay in `f`'s domain.
#[derive(Clone)]
pub struct Iterate2 {
    f: Arc<dyn Map1D>,
    domain: (f64, f64),
}

impl Iterate2 {
    pub fn new(f: Arc<dyn Map1D>) -> Result<Self, ConjError> {
        let (lo, hi) = f.domain();
        let inside = |x: f64| f.eval(x).is_some_and(|y| y >= lo && y <= hi);
        let center = 0.0f64.clamp(lo, hi);
        if !inside(center) {
            return Err(ConjError::Setup("second iterate undefined at 0".into()));
        }
        let walk = |end: f64| {
            const STEPS: usize = 4096;
            let mut last = center;
            for i in 1..=STEPS {
                let x = center + (end - center) * i as f64 / STEPS as f64;
                if !inside(x) {
                    // Refine the boundary between last good and first bad point.
                    let (mut a, mut b) = (last, x);
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        if inside(m) {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    return a;
                }
                last = x;
            }
            last
        };
        let domain = (walk(lo), walk(hi));
        Ok(Self { f, domain })
    }

    pub fn inner(&self) -> &Arc<dyn Map1D> {
        &self.f
    }
}

impl Map1D for Iterate2 {
    fn eval(&self, x: f64) -> Option<f64> {
        self.f.eval(self.f.eval(x)?)
    }

    fn deriv(&self, x: f64) -> Option<f64> {
        let y = self.f.eval(x)?;
        Some(self.f.deriv(y)? * self.f.deriv(x)?)
    }

    fn taylor3(&self, x: f64) -> Option<[f64; 3]> {
        // Chain rule on Taylor coefficients: F(G(x)).
        let [g1, g2, g3] = self.f.taylor3(x)?;
        let [f1, f2, f3] = self.f.taylor3(self.f.eval(x)?)?;
        Some([f1 * g1, f1 * g2 + f2 * g1 * g1, f1 * g3 + 2.0 * f2 * g1 * g2 + f3 * g1.powi(3)])
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn inverse(&self, y: f64) -> Option<f64> {
        self.f.inverse(self.f.inverse(y)?)
    }
}

type RealFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Closure-backed map, mainly for tests.
#[derive(Clone)]
pub struct FnMap {
    f: Arc<RealFn>,
    df: Arc<RealFn>,
    inv: Option<Arc<RealFn>>,
    domain: (f64, f64),
}

impl FnMap {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: (f64, f64),
    ) -> Self {
        Self {
            f: Arc::new(f),
            df: Arc::new(df),
            inv: None,
            domain,
        }
    }

    /// Supplies an exact inverse.
    pub fn with_inverse(mut self, inv: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.inv = Some(Arc::new(inv));
        self
    }

    pub fn linear(slope: f64, domain: (f64, f64)) -> Self {
        Self::new(move |x| slope * x, move |_| slope, domain).with_inverse(move |y| y / slope)
    }

    pub fn shift(by: f64, domain: (f64, f64)) -> Self {
        Self::new(move |x| x + by, |_| 1.0, domain).with_inverse(move |y| y - by)
    }
}

impl Map1D for FnMap {
    fn eval(&self, x: f64) -> Option<f64> {
        Some((self.f)(x))
    }

    fn deriv(&self, x: f64) -> Option<f64> {
        Some((self.df)(x))
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn inverse(&self, y: f64) -> Option<f64> {
        match &self.inv {
            Some(inv) => Some(inv(y)),
            None => invert(self, y),
        }
    }
}

/// Evaluable conjugacy between `f` and `g` on an open source interval.
pub trait Conjugacy: Send + Sync {
    fn eval(&self, x: f64) -> Result<f64, ConjError>;
    fn source(&self) -> (f64, f64);
    fn f(&self) -> &dyn Map1D;
    fn g(&self) -> &dyn Map1D;
}

/// Residual statistics over a sample set.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ResidualReport {
    pub sup: f64,
    pub samples: usize,
    pub failures: usize,
    pub monotone: bool,
    #[serde(skip)]
    pub rows: Vec<(f64, f64, f64)>,
}

/// Points at least two local fundamental-domain widths `|f(x) - x|` from
/// both ends of `(lo, hi)`, evenly spread over the admissible block.
pub fn admissible_samples(f: &dyn Map1D, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    const SCAN: usize = 4096;
    let ok = |x: f64| match f.eval(x) {
        Some(y) => {
            let w = 2.0 * (y - x).abs();
            x - lo >= w && hi - x >= w
        }
        None => false,
    };
    let grid: Vec<f64> = (1..SCAN).map(|i| lo + (hi - lo) * i as f64 / SCAN as f64).collect();
    // Longest run of admissible grid points.
    let (mut best, mut cur) = ((0, 0), None::<usize>);
    for (i, &x) in grid.iter().enumerate() {
        if ok(x) {
            let start = *cur.get_or_insert(i);
            if i + 1 - start > best.1 - best.0 {
                best = (start, i + 1);
            }
        } else {
            cur = None;
        }
    }
    if best.1 <= best.0 {
        return Vec::new();
    }
    let (a, b) = (grid[best.0], grid[best.1 - 1]);
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// `sup |h(f(x)) - g(h(x))|` over `samples`, plus a monotonicity check of `h`.
pub fn residual(h: &dyn Conjugacy, samples: &[f64]) -> ResidualReport {
    use rayon::prelude::*;
    let rows: Vec<Option<(f64, f64, f64)>> = samples
        .par_iter()
        .map(|&x| {
            let hx = h.eval(x).ok()?;
            let hfx = h.eval(h.f().eval(x)?).ok()?;
            let ghx = h.g().eval(hx)?;
            Some((x, hx, (hfx - ghx).abs()))
        })
        .collect();
    let failures = rows.iter().filter(|r| r.is_none()).count();
    let rows: Vec<(f64, f64, f64)> = rows.into_iter().flatten().collect();
    let sup = rows.iter().fold(0.0f64, |m, r| m.max(r.2));
    let monotone = rows.windows(2).all(|w| w[1].1 > w[0].1);
    ResidualReport {
        sup: if failures > 0 { f64::INFINITY } else { sup },
        samples: rows.len(),
        failures,
        monotone,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_inverse() {
        let spec = MapSpec::parse_with("x*exp(-x) + mu", &[]).unwrap();
        let f = SliceMap::new(spec, 0.01, 0.5).unwrap();
        for y in [-0.3, 0.0, 0.1, 0.3] {
            let x = f.inverse(y).unwrap();
            assert!((f.eval(x).unwrap() - y).abs() < 1e-15);
        }
        assert!(f.inverse(10.0).is_none());
    }

    #[test]
    fn monotone_domain_stops_at_critical_point() {
        let spec = MapSpec::parse_with("(-1-mu)*x - (3+mu)*x^2", &[]).unwrap();
        let f = SliceMap::new(spec, 0.0, 0.5).unwrap();
        let (lo, hi) = f.domain();
        assert!((lo + 1.0 / 6.0).abs() < 1e-3 && lo > -1.0 / 6.0);
        assert_eq!(hi, 0.5);
    }

    #[test]
    fn second_iterate_taylor() {
        let spec = MapSpec::parse_with("(-1-mu)*x - (3+mu)*x^2 + 0.5*x^3", &[]).unwrap();
        let f: Arc<dyn Map1D> = Arc::new(SliceMap::new(spec.clone(), 0.01, 0.5).unwrap());
        let f2 = Iterate2::new(f).unwrap();
        let x = 0.02;
        let t = f2.taylor3(x).unwrap();
        let h = 1e-4;
        let e = |d: f64| f2.eval(x + d).unwrap();
        let second = (e(h) - 2.0 * e(0.0) + e(-h)) / (h * h) / 2.0;
        assert!((t[0] - f2.deriv(x).unwrap()).abs() < 1e-14);
        assert!((t[1] - second).abs() < 1e-5, "{} {}", t[1], second);
        let y = f2.eval(x).unwrap();
        assert!((f2.inverse(y).unwrap() - x).abs() < 1e-14);
    }
}
