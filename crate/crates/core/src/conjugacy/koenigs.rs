use std::sync::Arc;

use super::{ConjError, Map1D, ITERATION_CAP};

/// Linearizing coordinate `φ` with `φ(f(x)) = λ φ(x)` and `φ'(x*) = 1` near a
/// hyperbolic fixed point `x*`. Points are iterated toward `x*` (forward for
/// an attractor, backward for a repeller) until within `eps`, where a cubic
/// local solution takes over.
#[derive(Clone)]
pub struct Linearization {
    map: Arc<dyn Map1D>,
    x_star: f64,
    lambda: f64,
    a2: f64,
    a3: f64,
    eps: f64,
}

impl Linearization {
    pub fn new(map: Arc<dyn Map1D>, x_star: f64) -> Result<Self, ConjError> {
        let (lambda, f2, f3, eps) = match map.taylor3(x_star) {
            Some([l, f2, f3]) => (l, f2, f3, 1e-4),
            None => (map.deriv(x_star).ok_or(ConjError::Eval(x_star))?, 0.0, 0.0, 1e-9),
        };
        if !(lambda > 0.0) || (lambda - 1.0).abs() < 1e-12 || !lambda.is_finite() {
            return Err(ConjError::NotHyperbolic(lambda));
        }
        let a2 = f2 / (lambda - lambda * lambda);
        let a3 = (f3 + 2.0 * a2 * lambda * f2) / (lambda - lambda.powi(3));
        Ok(Self { map, x_star, lambda, a2, a3, eps })
    }

    pub fn multiplier(&self) -> f64 {
        self.lambda
    }

    pub fn fixed_point(&self) -> f64 {
        self.x_star
    }

    pub fn attracting(&self) -> bool {
        self.lambda < 1.0
    }

    fn local(&self, u: f64) -> f64 {
        u + self.a2 * u * u + self.a3 * u * u * u
    }

    fn local_inv(&self, w: f64) -> f64 {
        let mut u = w;
        for _ in 0..8 {
            let d = 1.0 + 2.0 * self.a2 * u + 3.0 * self.a3 * u * u;
            let step = (self.local(u) - w) / d;
            u -= step;
            if step.abs() <= 1e-17 * u.abs() {
                break;
            }
        }
        u
    }

    pub fn phi(&self, x: f64) -> Result<f64, ConjError> {
        let mut y = x;
        let mut n = 0i32;
        while (y - self.x_star).abs() > self.eps {
            y = if self.attracting() { self.map.eval(y) } else { self.map.inverse(y) }.ok_or(ConjError::Eval(y))?;
            n += 1;
            if n as usize > ITERATION_CAP {
                return Err(ConjError::IterationCap { x, cap: ITERATION_CAP });
            }
        }
        let v = self.local(y - self.x_star);
        Ok(if self.attracting() { v / self.lambda.powi(n) } else { v * self.lambda.powi(n) })
    }

    pub fn phi_inv(&self, v: f64) -> Result<f64, ConjError> {
        let mut w = v;
        let mut n = 0usize;
        while w.abs() > self.eps {
            w = if self.attracting() { w * self.lambda } else { w / self.lambda };
            n += 1;
            if n > ITERATION_CAP {
                return Err(ConjError::IterationCap { x: v, cap: ITERATION_CAP });
            }
        }
        let mut y = self.x_star + self.local_inv(w);
        for _ in 0..n {
            y = if self.attracting() { self.map.inverse(y) } else { self.map.eval(y) }.ok_or(ConjError::Inverse(y))?;
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugacy::NormalFormMap;
    use crate::classify::Kind;
    use crate::normalform::NormalForm;

    #[test]
    fn linear_map_is_its_own_linearization() {
        let f: Arc<dyn Map1D> = Arc::new(crate::conjugacy::FnMap::linear(0.5, (-1.0, 1.0)));
        let l = Linearization::new(f, 0.0).unwrap();
        assert!((l.phi(0.3).unwrap() - 0.3).abs() < 1e-15);
        assert!((l.phi_inv(-0.2).unwrap() + 0.2).abs() < 1e-15);
    }

    #[test]
    fn functional_equation() {
        let nf = NormalForm::new(Kind::SaddleNode, 0.01, 0.3, 0.0).unwrap();
        let g: Arc<dyn Map1D> = Arc::new(NormalFormMap::new(nf, 0.5).unwrap());
        for (x_star, probes) in [(0.1, [0.05, 0.2]), (-0.1, [-0.3, 0.0])] {
            let x_star = crate::roots::bisect(|y| Some(nf.eval(y) - y), x_star - 0.02, x_star + 0.02, 1e-15).unwrap();
            let l = Linearization::new(g.clone(), x_star).unwrap();
            for x in probes {
                let lhs = l.phi(g.eval(x).unwrap()).unwrap();
                let rhs = l.multiplier() * l.phi(x).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
                assert!((l.phi_inv(l.phi(x).unwrap()).unwrap() - x).abs() < 1e-12);
            }
        }
    }
}
