use std::sync::Arc;

use super::{admissible_samples, Conjugacy, ConjError, Map1D};

/// Conjugacy between two orientation-reversing maps `f` and `g` obtained
/// from a conjugacy `h` of their second iterates on an interval `U` to the
/// right of the fixed point 0. On `f(U)` it is `g ∘ h ∘ f⁻¹`.
#[derive(Clone)]
pub struct PdLift {
    h: Arc<dyn Conjugacy>,
    f: Arc<dyn Map1D>,
    g: Arc<dyn Map1D>,
    upper: (f64, f64),
    lower: (f64, f64),
}

impl PdLift {
    pub fn new(h: Arc<dyn Conjugacy>, f: Arc<dyn Map1D>, g: Arc<dyn Map1D>) -> Result<Self, ConjError> {
        let upper = h.source();
        if upper.0 < 0.0 {
            return Err(ConjError::Setup(format!("lift interval ({}, {}) crosses 0", upper.0, upper.1)));
        }
        let a = f.eval(upper.1).ok_or(ConjError::Eval(upper.1))?;
        let b = f.eval(upper.0).ok_or(ConjError::Eval(upper.0))?;
        Ok(Self {
            h,
            f,
            g,
            upper,
            lower: (a.min(b), a.max(b)),
        })
    }

    pub fn inner(&self) -> &Arc<dyn Conjugacy> {
        &self.h
    }

    /// Sample points on `U` (admissible for `f ∘ f`) and their images in `f(U)`.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        let half = admissible_samples(self.h.f(), self.upper.0, self.upper.1, n.div_ceil(2));
        let mut out: Vec<f64> = half.iter().filter_map(|&x| self.f.eval(x)).collect();
        out.extend(half);
        out.sort_by(f64::total_cmp);
        out.truncate(n);
        out
    }

    /// The conjugacy built literally as `h ∘ h₁`, where `w = h⁻¹ ∘ g ∘ h`
    /// and `h₁` is the identity on `U` and `w ∘ f⁻¹` on `f(U)`. The inverse
    /// of `h` on `f(U)` comes from `h_lower`, a conjugacy of the second
    /// iterates there, by bisection.
    pub fn literal(&self, h_lower: &dyn Conjugacy, x: f64) -> Result<f64, ConjError> {
        if x > self.upper.0 && x < self.upper.1 {
            return self.h.eval(x);
        }
        let back = self.f.inverse(x).ok_or(ConjError::Inverse(x))?;
        let target = self.g.eval(self.h.eval(back)?).ok_or(ConjError::Eval(back))?;
        let (lo, hi) = h_lower.source();
        let w = crate::roots::bisect(
            |z| h_lower.eval(z).ok().map(|v| v - target),
            lo + 1e-12 * (hi - lo),
            hi - 1e-12 * (hi - lo),
            1e-14,
        )
        .map_err(|_| ConjError::Inverse(target))?;
        h_lower.eval(w)
    }
}

impl Conjugacy for PdLift {
    fn eval(&self, x: f64) -> Result<f64, ConjError> {
        if x == 0.0 {
            return Ok(0.0);
        }
        if x > self.upper.0 && x < self.upper.1 {
            return self.h.eval(x);
        }
        if x > self.lower.0 && x < self.lower.1 {
            let back = self.f.inverse(x).ok_or(ConjError::Inverse(x))?;
            return self.g.eval(self.h.eval(back)?).ok_or(ConjError::Eval(back));
        }
        let (lo, hi) = self.source();
        Err(ConjError::OutsideSource { x, lo, hi })
    }

    fn source(&self) -> (f64, f64) {
        (self.lower.0, self.upper.1)
    }

    fn f(&self) -> &dyn Map1D {
        self.f.as_ref()
    }

    fn g(&self) -> &dyn Map1D {
        self.g.as_ref()
    }
}
