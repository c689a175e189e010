//! Independent numerical checks: finite-difference derivatives, fixed
//! point isolation by sign changes, and log-log convergence slopes.

use serde::Serialize;

use crate::roots;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdEstimate {
    pub value: f64,
    /// Richardson-extrapolated estimates at `h` and `h/2` differ by more than 10%.
    pub unstable: bool,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn central(f: &impl Fn(f64, f64) -> Option<f64>, x: f64, mu: f64, i: usize, j: usize, h: f64) -> Option<f64> {
    let mut sum = 0.0;
    for a in 0..=i {
        let dx = (i as f64 / 2.0 - a as f64) * h;
        let wa = if a % 2 == 0 { 1.0 } else { -1.0 } * binom(i, a);
        for b in 0..=j {
            let dm = (j as f64 / 2.0 - b as f64) * h;
            let wb = if b % 2 == 0 { 1.0 } else { -1.0 } * binom(j, b);
            sum += wa * wb * f(x + dx, mu + dm)?;
        }
    }
    Some(sum / h.powi((i + j) as i32))
}

/// `∂^{i+j} f / ∂x^i ∂μ^j` at `(x, μ)` by central differences with one
/// Richardson step. Step `1e-3` for orders up to 2, `1e-2` for 3 to 5.
pub fn fd_derivative(f: impl Fn(f64, f64) -> Option<f64>, x: f64, mu: f64, i: usize, j: usize) -> Option<FdEstimate> {
    let order = i + j;
    if order == 0 {
        return f(x, mu).map(|value| FdEstimate { value, unstable: false });
    }
    if order > 5 {
        return None;
    }
    let h = if order <= 2 { 1e-3 } else { 1e-2 };
    let rich = |h: f64| -> Option<f64> {
        let d1 = central(&f, x, mu, i, j, h)?;
        let d2 = central(&f, x, mu, i, j, h / 2.0)?;
        Some((4.0 * d2 - d1) / 3.0)
    };
    let coarse = rich(h)?;
    let fine = rich(h / 2.0)?;
    let scale = fine.abs().max(1e-8);
    Some(FdEstimate {
        value: fine,
        unstable: (coarse - fine).abs() > 0.1 * scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoints {
    pub roots: Vec<f64>,
    /// Grid points where `|fᵏ(x) - x|` dips close to zero without a sign change.
    pub suspected_double: Vec<f64>,
}

/// Fixed points of `f` (or of `f ∘ f` when `iterate == 2`) on `[lo, hi]`,
/// located by sign changes on a grid of at least 256 cells and refined by
/// bisection to `1e-13`.
pub fn isolate_fixed_points(f: impl Fn(f64) -> Option<f64>, lo: f64, hi: f64, grid: usize, iterate: usize) -> FixedPoints {
    let n = grid.max(256);
    let g = |x: f64| -> Option<f64> {
        let mut y = x;
        for _ in 0..iterate.max(1) {
            y = f(y)?;
        }
        Some(y - x)
    };
    let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let vs: Vec<Option<f64>> = xs.iter().map(|&x| g(x)).collect();
    let mut roots = Vec::new();
    let mut suspected_double = Vec::new();
    for k in 0..n {
        let (Some(a), Some(b)) = (vs[k], vs[k + 1]) else { continue };
        if a == 0.0 {
            roots.push(xs[k]);
        } else if b != 0.0 && a.signum() != b.signum() {
            if let Ok(r) = roots::bisect(g, xs[k], xs[k + 1], 1e-13) {
                roots.push(r);
            }
        }
    }
    if let Some(Some(last)) = vs.last() {
        if *last == 0.0 {
            roots.push(hi);
        }
    }
    let tiny = 1e-6 * (hi - lo);
    for k in 1..n {
        let (Some(a), Some(b), Some(c)) = (vs[k - 1], vs[k], vs[k + 1]) else { continue };
        if b.abs() < a.abs() && b.abs() < c.abs() && a.signum() == c.signum() && b.signum() == a.signum() && b.abs() < tiny {
            suspected_double.push(xs[k]);
        }
    }
    FixedPoints { roots, suspected_double }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares slope of `ln err` against `ln scale`. Zero errors are
/// dropped; if all are zero the slope is `+∞`. Needs at least four scales.
pub fn slope(scales: &[f64], errors: &[f64]) -> Option<SlopeEstimate> {
    if scales.len() != errors.len() || scales.len() < 4 {
        return None;
    }
    let pts: Vec<(f64, f64)> = scales
        .iter()
        .zip(errors)
        .filter(|(s, e)| **s > 0.0 && e.abs() > 0.0)
        .map(|(s, e)| (s.ln(), e.abs().ln()))
        .collect();
    if pts.is_empty() {
        return Some(SlopeEstimate {
            slope: f64::INFINITY,
            intercept: f64::NEG_INFINITY,
            points: 0,
        });
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let s = sxy / sxx;
    Some(SlopeEstimate {
        slope: s,
        intercept: my - s * mx,
        points: pts.len(),
    })
}
