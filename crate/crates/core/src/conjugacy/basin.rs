use std::sync::Arc;

use serde::Serialize;

use super::{Conjugacy, ConjError, ConjugacyPiece, Linearization, Map1D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Conjugacy on the basin of attraction (or repulsion) of a hyperbolic
/// fixed point `x*`, made of one piece on each side. Both pieces share the
/// linearizations at `x*` and `y*`, so `h` is smooth there.
#[derive(Clone)]
pub struct BasinConjugacy {
    x_star: f64,
    y_star: f64,
    source: (f64, f64),
    target: (f64, f64),
    left: Option<ConjugacyPiece>,
    right: Option<ConjugacyPiece>,
    lambda_f: f64,
    lambda_g: f64,
    f: Arc<dyn Map1D>,
    g: Arc<dyn Map1D>,
}

impl BasinConjugacy {
    pub fn fixed_points(&self) -> (f64, f64) {
        (self.x_star, self.y_star)
    }

    pub fn multipliers(&self) -> (f64, f64) {
        (self.lambda_f, self.lambda_g)
    }

    pub fn attracting(&self) -> bool {
        self.lambda_f < 1.0
    }

    pub fn exponent(&self) -> f64 {
        self.lambda_g.ln() / self.lambda_f.ln()
    }

    pub fn target(&self) -> (f64, f64) {
        self.target
    }

    pub fn piece(&self, side: Side) -> Option<&ConjugacyPiece> {
        match side {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }
}

impl BasinConjugacy {
    /// Pulls in an end of the source that is not a fixed point so that the
    /// push-forward stays inside the target. Scans outward from `x*` and
    /// stops before the first point where `h` fails.
    pub fn shrink_open_end(&mut self, side: Side) {
        const STEPS: usize = 512;
        let x_star = self.x_star;
        let Some(piece) = (match side {
            Side::Left => self.left.as_mut(),
            Side::Right => self.right.as_mut(),
        }) else {
            return;
        };
        let end = match side {
            Side::Left => self.source.0,
            Side::Right => self.source.1,
        };
        let mut good = x_star;
        for k in 1..STEPS {
            let x = x_star + (end - x_star) * k as f64 / STEPS as f64;
            if piece.eval(x).is_err() {
                match side {
                    Side::Left => {
                        piece.restrict_source(good.min(x_star), f64::INFINITY);
                        self.source.0 = good;
                    }
                    Side::Right => {
                        piece.restrict_source(f64::NEG_INFINITY, good.max(x_star));
                        self.source.1 = good;
                    }
                }
                return;
            }
            good = x;
        }
    }
}

impl Conjugacy for BasinConjugacy {
    fn eval(&self, x: f64) -> Result<f64, ConjError> {
        let (lo, hi) = self.source;
        let piece = if x == self.x_star {
            return Ok(self.y_star);
        } else if x < self.x_star {
            self.left.as_ref()
        } else {
            self.right.as_ref()
        };
        piece
            .ok_or(ConjError::OutsideSource { x, lo, hi })?
            .eval(x)
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

/// Builds the basin conjugacy for `x* ∈ source` and `y* ∈ target`. The
/// scale `c` of the linear part is fixed by sending the midpoint of the
/// `anchor` side of the source to the midpoint of the same side of the
/// target.
pub fn build_basin(
    f: Arc<dyn Map1D>,
    g: Arc<dyn Map1D>,
    x_star: f64,
    y_star: f64,
    source: (f64, f64),
    target: (f64, f64),
    anchor: Side,
) -> Result<BasinConjugacy, ConjError> {
    let lin_f = Linearization::new(f.clone(), x_star)?;
    let lin_g = Linearization::new(g.clone(), y_star)?;
    let (lf, lg) = (lin_f.multiplier(), lin_g.multiplier());
    if (lf < 1.0) != (lg < 1.0) {
        return Err(ConjError::StabilityMismatch(lf, lg));
    }
    let kappa = lg.ln() / lf.ln();
    let halves = |side: Side| match side {
        Side::Left => ((source.0, x_star), (target.0, y_star)),
        Side::Right => ((x_star, source.1), (y_star, target.1)),
    };
    let mid = |(a, b): (f64, f64)| 0.5 * (a + b);
    let (s, t) = halves(anchor);
    let u = lin_f.phi(mid(s))?;
    let v = lin_g.phi(mid(t))?;
    let c = v.abs() / u.abs().powf(kappa);
    if !(c.is_finite() && c > 0.0) {
        return Err(ConjError::Setup(format!("degenerate linear scale {c}")));
    }
    let build = |side: Side| -> Result<Option<ConjugacyPiece>, ConjError> {
        let (s, t) = halves(side);
        if !(s.1 > s.0 && t.1 > t.0) {
            return Ok(None);
        }
        // Seed no farther from x* than the anchor midpoint; far out the two
        // maps need not be conjugate at all.
        let reach = (mid(halves(anchor).0) - x_star).abs();
        let p0 = if side == Side::Left { x_star - reach.min(x_star - s.0) * 0.5 } else { x_star + reach.min(s.1 - x_star) * 0.5 };
        let p0 = if side == anchor { mid(s) } else { p0 };
        ConjugacyPiece::linearized(f.clone(), g.clone(), s, t, lin_f.clone(), lin_g.clone(), c, p0).map(Some)
    };
    Ok(BasinConjugacy {
        x_star,
        y_star,
        source,
        target,
        left: build(Side::Left)?,
        right: build(Side::Right)?,
        lambda_f: lf,
        lambda_g: lg,
        f,
        g,
    })
}

/// One basin conjugacy per fixed point. `fps_f` and `fps_g` are sorted
/// fixed points of `f` and `g` in corresponding order; basins end at the
/// neighbouring fixed points or at the domain ends.
pub fn build_basins(
    f: Arc<dyn Map1D>,
    g: Arc<dyn Map1D>,
    fps_f: &[f64],
    fps_g: &[f64],
) -> Result<Vec<BasinConjugacy>, ConjError> {
    if fps_f.len() != fps_g.len() {
        return Err(ConjError::Setup(format!(
            "{} fixed points for the map but {} for the normal form",
            fps_f.len(),
            fps_g.len()
        )));
    }
    let (dom_f, dom_g) = (f.domain(), g.domain());
    let n = fps_f.len();
    (0..n)
        .map(|k| {
            let lo_f = if k > 0 { fps_f[k - 1] } else { dom_f.0 };
            let hi_f = if k + 1 < n { fps_f[k + 1] } else { dom_f.1 };
            let lo_g = if k > 0 { fps_g[k - 1] } else { dom_g.0 };
            let hi_g = if k + 1 < n { fps_g[k + 1] } else { dom_g.1 };
            let anchor = if k + 1 < n || k == 0 && n == 1 { Side::Right } else { Side::Left };
            let mut b = build_basin(f.clone(), g.clone(), fps_f[k], fps_g[k], (lo_f, hi_f), (lo_g, hi_g), anchor)?;
            if k == 0 {
                b.shrink_open_end(Side::Left);
            }
            if k + 1 == n {
                b.shrink_open_end(Side::Right);
            }
            Ok(b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Kind;
    use crate::conjugacy::{admissible_samples, residual, NormalFormMap};
    use crate::normalform::{nf_nontrivial_points, NormalForm};

    fn nf_map(nu: f64, a: f64) -> (Arc<dyn Map1D>, (f64, f64)) {
        let nf = NormalForm::new(Kind::SaddleNode, nu, a, 0.0).unwrap();
        let fps = nf_nontrivial_points(&nf).unwrap();
        (Arc::new(NormalFormMap::new(nf, 0.5).unwrap()), fps)
    }

    #[test]
    fn identical_maps_give_identity() {
        let (f, fps) = nf_map(0.01, 0.2);
        let basins = build_basins(f.clone(), f.clone(), &[fps.0, fps.1], &[fps.0, fps.1]).unwrap();
        for b in &basins {
            for x in [-0.05, 0.0, 0.05, 0.15, 0.3] {
                let (lo, hi) = b.source();
                if x > lo && x < hi {
                    assert!((b.eval(x).unwrap() - x).abs() < 1e-12, "{x}");
                }
            }
        }
    }

    #[test]
    fn nearby_normal_forms() {
        let (f, fa) = nf_map(0.01, 0.2);
        let (g, fb) = nf_map(0.0101, 0.25);
        let basins = build_basins(f.clone(), g, &[fa.0, fa.1], &[fb.0, fb.1]).unwrap();
        assert!(!basins[0].attracting() && basins[1].attracting());
        for b in &basins {
            let (lo, hi) = b.source();
            let xs = admissible_samples(f.as_ref(), lo, hi, 400);
            let r = residual(b, &xs);
            assert!(r.sup < 1e-10 && r.monotone && r.failures == 0, "{r:?}");
        }
    }
}
