use std::sync::Arc;

use serde::Serialize;

use super::{Conjugacy, ConjError, Linearization, Map1D, ITERATION_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    Affine,
    Linearized,
    Blend,
}

#[derive(Clone)]
enum Seed {
    /// Chord from `(p0, q0)` to `(p1, q1)`.
    Affine { slope: f64 },
    /// `φ_g⁻¹(c · sgn(u) |u|^κ)` with `u = φ_f(x)`.
    Linearized {
        src: Linearization,
        tgt: Linearization,
        c: f64,
        kappa: f64,
        table: Option<Arc<Chebyshev>>,
    },
    /// Chord near `p0`, its transport `g ∘ A ∘ f⁻¹` near `p1`, glued by a
    /// smooth step.
    Blend { slope: f64, tau: f64 },
}

/// Conjugacy on one interval free of interior fixed points. A seed is
/// given on the fundamental domain between `p0` and `p1 = f(p0)`; other
/// points are carried there by `f` or `f⁻¹` and back by `g⁻¹` or `g`.
#[derive(Clone)]
pub struct ConjugacyPiece {
    f: Arc<dyn Map1D>,
    g: Arc<dyn Map1D>,
    source: (f64, f64),
    target: (f64, f64),
    p0: f64,
    p1: f64,
    q0: f64,
    direction: f64,
    seed: Seed,
}

/// Chebyshev interpolant on `[lo, hi]`.
struct Chebyshev {
    lo: f64,
    hi: f64,
    coef: Vec<f64>,
}

impl Chebyshev {
    const NODES: usize = 40;

    /// `None` if `f` fails at a node or the interpolant misses `f` by more
    /// than `1e-13` (relative) at the check points.
    fn fit(f: impl Fn(f64) -> Result<f64, ConjError>, lo: f64, hi: f64) -> Option<Self> {
        let n = Self::NODES;
        let pi = std::f64::consts::PI;
        let map = |t: f64| 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
        let vals: Vec<f64> = (0..n)
            .map(|k| f(map((pi * (k as f64 + 0.5) / n as f64).cos())).ok())
            .collect::<Option<_>>()?;
        let coef = (0..n)
            .map(|j| {
                let s: f64 = (0..n).map(|k| vals[k] * (pi * j as f64 * (k as f64 + 0.5) / n as f64).cos()).sum();
                s * if j == 0 { 1.0 } else { 2.0 } / n as f64
            })
            .collect();
        let cheb = Self { lo, hi, coef };
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for t in [-0.93, -0.31, 0.17, 0.71] {
            let x = map(t);
            if (cheb.eval(x) - f(x).ok()?).abs() > 1e-13 * scale {
                return None;
            }
        }
        Some(cheb)
    }

    fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let (mut b1, mut b2) = (0.0, 0.0);
        for c in self.coef.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coef[0]
    }
}

fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step, 0 for `t ≤ τ` and 1 for `t ≥ 1 - τ`.
fn smooth_step(t: f64, tau: f64) -> f64 {
    let r = ((t - tau) / (1.0 - 2.0 * tau)).clamp(0.0, 1.0);
    let (a, b) = (bump(r), bump(1.0 - r));
    a / (a + b)
}

fn check_free(f: &dyn Map1D, (lo, hi): (f64, f64)) -> Result<f64, ConjError> {
    const N: usize = 256;
    let mut sign = 0.0;
    for i in 1..N {
        let x = lo + (hi - lo) * i as f64 / N as f64;
        let d = f.eval(x).ok_or(ConjError::Eval(x))? - x;
        let s = d.signum();
        if d == 0.0 || (sign != 0.0 && s != sign) {
            return Err(ConjError::FixedPointInside { lo, hi });
        }
        sign = s;
    }
    Ok(sign)
}

impl ConjugacyPiece {
    fn assemble(
        f: Arc<dyn Map1D>,
        g: Arc<dyn Map1D>,
        source: (f64, f64),
        target: (f64, f64),
        p0: f64,
        q0: f64,
        seed: Seed,
    ) -> Result<Self, ConjError> {
        let direction = check_free(f.as_ref(), source)?;
        let tgt_dir = check_free(g.as_ref(), target)?;
        if direction != tgt_dir {
            return Err(ConjError::SignMismatch { src: direction, tgt: tgt_dir });
        }
        if !(source.0 < p0 && p0 < source.1) {
            return Err(ConjError::OutsideSource { x: p0, lo: source.0, hi: source.1 });
        }
        let p1 = f.eval(p0).ok_or(ConjError::Eval(p0))?;
        let q1 = g.eval(q0).ok_or(ConjError::Eval(q0))?;
        let mut piece = Self {
            f,
            g,
            source,
            target,
            p0,
            p1,
            q0,
            direction,
            seed,
        };
        match &mut piece.seed {
            Seed::Affine { slope } | Seed::Blend { slope, .. } => *slope = (q1 - q0) / (p1 - p0),
            Seed::Linearized { .. } => {}
        }
        Ok(piece)
    }

    /// Piece whose seed is `φ_g⁻¹ ∘ L ∘ φ_f`, with `L(u) = c sgn(u)|u|^κ`
    /// and `κ = ln λ_g / ln λ_f`. The result is smooth at the fixed point
    /// both linearizations are anchored at.
    #[allow(clippy::too_many_arguments)]
    pub fn linearized(
        f: Arc<dyn Map1D>,
        g: Arc<dyn Map1D>,
        source: (f64, f64),
        target: (f64, f64),
        src: Linearization,
        tgt: Linearization,
        c: f64,
        p0: f64,
    ) -> Result<Self, ConjError> {
        let kappa = tgt.multiplier().ln() / src.multiplier().ln();
        let seed = Seed::Linearized { src, tgt, c, kappa, table: None };
        let q0 = eval_linearized(&seed, p0)?;
        let mut piece = Self::assemble(f, g, source, target, p0, q0, seed)?;
        // The seed is only ever needed on the fundamental domain, where it is
        // analytic; tabulating it avoids re-running both linearizations.
        let (a, b) = (piece.p0.min(piece.p1), piece.p0.max(piece.p1));
        let pad = 0.01 * (b - a);
        let (a, b) = ((a - pad).max(piece.source.0), (b + pad).min(piece.source.1));
        let fitted = Chebyshev::fit(|x| eval_linearized(&piece.seed, x), a, b).map(Arc::new);
        if let Seed::Linearized { table, .. } = &mut piece.seed {
            *table = fitted;
        }
        Ok(piece)
    }

    pub fn seed_kind(&self) -> SeedKind {
        match self.seed {
            Seed::Affine { .. } => SeedKind::Affine,
            Seed::Linearized { .. } => SeedKind::Linearized,
            Seed::Blend { .. } => SeedKind::Blend,
        }
    }

    pub fn seed_point(&self) -> (f64, f64) {
        (self.p0, self.q0)
    }

    /// Width of the seed's fundamental domain.
    pub fn seed_width(&self) -> f64 {
        (self.p1 - self.p0).abs()
    }

    pub fn target(&self) -> (f64, f64) {
        self.target
    }

    /// `κ` for a linearized seed.
    pub fn exponent(&self) -> Option<f64> {
        match self.seed {
            Seed::Linearized { kappa, .. } => Some(kappa),
            _ => None,
        }
    }

    fn seed(&self, x: f64) -> Result<f64, ConjError> {
        match &self.seed {
            Seed::Affine { slope } => Ok(self.q0 + slope * (x - self.p0)),
            s @ Seed::Linearized { .. } => eval_linearized(s, x),
            Seed::Blend { slope, tau } => {
                let a = |x: f64| self.q0 + slope * (x - self.p0);
                let t = (self.p0 - x) / (self.p0 - self.p1);
                let beta = smooth_step(t, *tau);
                if beta == 0.0 {
                    return Ok(a(x));
                }
                let back = self.f.inverse(x).ok_or(ConjError::Inverse(x))?;
                let b = self.g.eval(a(back)).ok_or(ConjError::Eval(back))?;
                Ok((1.0 - beta) * a(x) + beta * b)
            }
        }
    }

    /// `h(x)` and the number of `f`-steps used to reach the seed domain.
    /// Narrows the source to `[lo, hi]` intersected with the current one.
    pub fn restrict_source(&mut self, lo: f64, hi: f64) {
        self.source = (self.source.0.max(lo), self.source.1.min(hi));
    }

    pub fn eval_with_steps(&self, x: f64) -> Result<(f64, i64), ConjError> {
        let (lo, hi) = self.source;
        if !(x > lo && x < hi) {
            return Err(ConjError::OutsideSource { x, lo, hi });
        }
        let (a, b) = (self.p0.min(self.p1), self.p0.max(self.p1));
        // Forward orbits run toward increasing x when direction > 0.
        let before = |y: f64| if self.direction > 0.0 { y < a } else { y > b };
        let after = |y: f64| if self.direction > 0.0 { y >= b } else { y <= a };
        let mut y = x;
        let mut n = 0i64;
        while before(y) {
            y = self.f.eval(y).ok_or(ConjError::Eval(y))?;
            n += 1;
            if n as usize > ITERATION_CAP {
                return Err(ConjError::IterationCap { x, cap: ITERATION_CAP });
            }
        }
        while after(y) {
            y = self.f.inverse(y).ok_or(ConjError::Inverse(y))?;
            n -= 1;
            if n.unsigned_abs() as usize > ITERATION_CAP {
                return Err(ConjError::IterationCap { x, cap: ITERATION_CAP });
            }
        }
        let mut z = self.seed(y)?;
        if n > 0 {
            for _ in 0..n {
                z = self.g.inverse(z).ok_or(ConjError::Inverse(z))?;
            }
        } else {
            for _ in 0..-n {
                z = self.g.eval(z).ok_or(ConjError::Eval(z))?;
            }
        }
        Ok((z, n))
    }
}

fn eval_linearized(seed: &Seed, x: f64) -> Result<f64, ConjError> {
    let Seed::Linearized { src, tgt, c, kappa, table } = seed else {
        unreachable!()
    };
    if let Some(t) = table {
        if x >= t.lo && x <= t.hi {
            return Ok(t.eval(x));
        }
    }
    let u = src.phi(x)?;
    tgt.phi_inv(c * u.signum() * u.abs().powf(*kappa))
}

impl Conjugacy for ConjugacyPiece {
    fn eval(&self, x: f64) -> Result<f64, ConjError> {
        self.eval_with_steps(x).map(|r| r.0)
    }

    fn source(&self) -> (f64, f64) {
        self.source
    }

    fn f(&self) -> &dyn Map1D {
        self.f.as_ref()
    }

    fn g(&self) -> &dyn Map1D {
        self.g.as_ref()
    }
}

/// Conjugacy between `f` on `source` and `g` on `target`, two intervals
/// whose ends are consecutive fixed points (or domain ends), using an
/// affine seed. `seed_point` defaults to the source midpoint and is sent to
/// the proportional point of the target.
pub fn build_between_fixed_points(
    f: Arc<dyn Map1D>,
    g: Arc<dyn Map1D>,
    source: (f64, f64),
    target: (f64, f64),
    seed_point: Option<f64>,
) -> Result<ConjugacyPiece, ConjError> {
    let p0 = seed_point.unwrap_or(0.5 * (source.0 + source.1));
    let t = (p0 - source.0) / (source.1 - source.0);
    let q0 = target.0 + t * (target.1 - target.0);
    ConjugacyPiece::assemble(f, g, source, target, p0, q0, Seed::Affine { slope: 0.0 })
}

/// Conjugacy on an interval without fixed points, anchored at `p0 ↦ q0`,
/// with a smooth blended seed.
pub fn build_no_fixed_points(
    f: Arc<dyn Map1D>,
    g: Arc<dyn Map1D>,
    source: (f64, f64),
    target: (f64, f64),
    p0: f64,
    q0: f64,
) -> Result<ConjugacyPiece, ConjError> {
    ConjugacyPiece::assemble(f, g, source, target, p0, q0, Seed::Blend { slope: 0.0, tau: 0.25 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugacy::{admissible_samples, residual, FnMap};

    fn arc(m: FnMap) -> Arc<dyn Map1D> {
        Arc::new(m)
    }

    #[test]
    fn halving_vs_quartering() {
        let f = arc(FnMap::linear(0.5, (-2.0, 2.0)));
        let g = arc(FnMap::linear(0.25, (-2.0, 2.0)));
        let h = build_between_fixed_points(f.clone(), g, (0.0, 1.0), (0.0, 0.5), None).unwrap();
        assert_eq!(h.eval(0.5).unwrap(), 0.25);
        assert!((h.eval(0.25).unwrap() - 0.0625).abs() < 1e-16);
        let xs = admissible_samples(f.as_ref(), 0.0, 1.0, 200);
        let r = residual(&h, &xs);
        assert!(r.sup < 1e-15 && r.monotone && r.failures == 0);
        // Derivative quotient at the fixed point collapses.
        assert!(h.eval(1e-6).unwrap() / 1e-6 < 1e-5);
    }

    #[test]
    fn reflected_linear_maps() {
        let f = arc(FnMap::linear(0.5, (-2.0, 2.0)));
        let g = arc(FnMap::linear(0.25, (-2.0, 2.0)));
        let h = build_between_fixed_points(f, g, (-1.0, 0.0), (-0.5, 0.0), None).unwrap();
        assert_eq!(h.eval(-0.5).unwrap(), -0.25);
        assert!((h.eval(-0.125).unwrap() + 0.25 * 0.25 * 0.25).abs() < 1e-16);
    }

    #[test]
    fn shifts_without_fixed_points() {
        let f = arc(FnMap::shift(1.0, (-100.0, 100.0)));
        let g = arc(FnMap::shift(2.0, (-200.0, 200.0)));
        let h = build_no_fixed_points(f.clone(), g, (-50.0, 50.0), (-100.0, 100.0), 0.0, 0.0).unwrap();
        for x in [0.0, 1.0, 3.0, -4.0, 10.0] {
            assert!((h.eval(x).unwrap() - 2.0 * x).abs() < 1e-12, "{x}");
        }
        let xs = admissible_samples(f.as_ref(), -50.0, 50.0, 300);
        assert!(residual(&h, &xs).sup < 1e-12);

        let same = arc(FnMap::shift(1.0, (-100.0, 100.0)));
        let id = build_no_fixed_points(f, same, (-50.0, 50.0), (-50.0, 50.0), 0.0, 0.0).unwrap();
        for x in [0.3, -7.7, 12.25] {
            assert!((id.eval(x).unwrap() - x).abs() < 1e-12);
        }
    }

    #[test]
    fn blend_is_smooth_across_the_seam() {
        let f = arc(FnMap::new(|x| x - 0.1 - 0.2 * x * x, |x| 1.0 - 0.4 * x, (-1.0, 1.0)));
        let g = arc(FnMap::shift(-0.1, (-2.0, 2.0)));
        let h = build_no_fixed_points(f.clone(), g, (-0.8, 0.5), (-2.0, 2.0), 0.3, 0.3).unwrap();
        let xs = admissible_samples(f.as_ref(), -0.8, 0.5, 500);
        let r = residual(&h, &xs);
        assert!(r.sup < 1e-12 && r.monotone, "{r:?}");
        // Finite-difference slopes on either side of p1 agree.
        let p1 = f.eval(0.3).unwrap();
        let d = 1e-6;
        let left = (h.eval(p1).unwrap() - h.eval(p1 - d).unwrap()) / d;
        let right = (h.eval(p1 + d).unwrap() - h.eval(p1).unwrap()) / d;
        assert!((left - right).abs() < 1e-4, "{left} {right}");
    }

    #[test]
    fn rejects_bad_intervals() {
        let f = arc(FnMap::linear(0.5, (-2.0, 2.0)));
        let g = arc(FnMap::linear(2.0, (-2.0, 2.0)));
        assert!(matches!(
            build_between_fixed_points(f.clone(), g, (0.0, 1.0), (0.0, 1.0), None),
            Err(ConjError::SignMismatch { .. })
        ));
        let g = arc(FnMap::linear(0.5, (-2.0, 2.0)));
        assert!(matches!(
            build_between_fixed_points(f, g, (-1.0, 1.0), (-1.0, 1.0), None),
            Err(ConjError::FixedPointInside { .. })
        ));
    }
}
