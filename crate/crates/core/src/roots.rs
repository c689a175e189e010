//! Small root-finding helpers: bracketed bisection, bracket search and a
//! damped Newton iteration for one or two unknowns.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("function evaluation failed at {0}")]
    Eval(f64),
    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian (determinant {0:e})")]
    Singular(f64),
}

/// Bisection on a sign-changing bracket until its width is at most `width`.
pub fn bisect(
    mut f: impl FnMut(f64) -> Option<f64>,
    lo: f64,
    hi: f64,
    width: f64,
) -> Result<f64, RootError> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut fa = f(a).ok_or(RootError::Eval(a))?;
    let fb = f(b).ok_or(RootError::Eval(b))?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoBracket { lo: a, hi: b });
    }
    while b - a > width {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m).ok_or(RootError::Eval(m))?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Walks from `start` in steps of `step` (either sign) until `f` changes
/// sign, giving up once `|x - start|` exceeds `limit`.
pub fn first_sign_change(
    mut f: impl FnMut(f64) -> Option<f64>,
    start: f64,
    step: f64,
    limit: f64,
) -> Option<(f64, f64)> {
    let mut x0 = start;
    let mut f0 = f(x0)?;
    if f0 == 0.0 {
        return Some((x0, x0));
    }
    let n = (limit / step.abs()).ceil() as usize;
    for i in 1..=n {
        let x1 = start + step * i as f64;
        let f1 = f(x1)?;
        if f1 == 0.0 || f1.signum() != f0.signum() {
            return Some(if x0 < x1 { (x0, x1) } else { (x1, x0) });
        }
        x0 = x1;
        f0 = f1;
    }
    None
}

/// A few Newton steps from a bracketed estimate; keeps the original point
/// if a step would leave `[lo, hi]`.
pub fn polish(
    mut f_df: impl FnMut(f64) -> Option<(f64, f64)>,
    mut x: f64,
    lo: f64,
    hi: f64,
    steps: usize,
) -> f64 {
    for _ in 0..steps {
        let Some((v, d)) = f_df(x) else { break };
        if v == 0.0 || d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - v / d;
        if !(lo..=hi).contains(&next) {
            break;
        }
        x = next;
    }
    x
}

pub const NEWTON_MAX_ITER: usize = 60;
pub const NEWTON_STEP_TOL: f64 = 1e-14;

fn norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn solve<const N: usize>(jac: &[[f64; N]; N], rhs: &[f64; N]) -> Result<[f64; N], RootError> {
    let mut out = [0.0; N];
    match N {
        1 => {
            if jac[0][0] == 0.0 || !jac[0][0].is_finite() {
                return Err(RootError::Singular(jac[0][0]));
            }
            out[0] = rhs[0] / jac[0][0];
        }
        2 => {
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let scale = jac.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).powi(2);
            if !(det.abs() > 1e-12 * scale) {
                return Err(RootError::Singular(det));
            }
            out[0] = (rhs[0] * jac[1][1] - jac[0][1] * rhs[1]) / det;
            out[1] = (jac[0][0] * rhs[1] - jac[1][0] * rhs[0]) / det;
        }
        _ => unreachable!("only one or two unknowns are supported"),
    }
    Ok(out)
}

/// Damped Newton for `F(p) = 0`, `N ∈ {1, 2}`. The closure returns the
/// residual and Jacobian, or `None` where `F` is undefined. The step is
/// halved while the residual does not decrease; iteration stops once a full
/// step is at most `1e-14` (relative) or the residual vanishes.
pub fn newton<const N: usize>(
    mut system: impl FnMut(&[f64; N]) -> Option<([f64; N], [[f64; N]; N])>,
    start: [f64; N],
) -> Result<([f64; N], f64, usize), RootError> {
    let mut p = start;
    let (mut r, mut jac) = system(&p).ok_or(RootError::Eval(p[0]))?;
    let mut rn = norm(&r);
    for it in 0..NEWTON_MAX_ITER {
        if rn == 0.0 {
            return Ok((p, 0.0, it));
        }
        let step = solve(&jac, &r)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut q = p;
            for k in 0..N {
                q[k] -= t * step[k];
            }
            if let Some((rq, jq)) = system(&q) {
                let qn = norm(&rq);
                if qn.is_finite() && t == 1.0 && qn == rn {
                    // A full step that does not move the residual: floor reached.
                    return Ok((q, qn, it + 1));
                }
                if qn.is_finite() && qn < rn {
                    accepted = Some((q, rq, jq, qn));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((q, rq, jq, qn)) = accepted else {
            // No decrease possible: we are at the floating-point floor.
            return Ok((p, rn, it));
        };
        p = q;
        r = rq;
        jac = jq;
        rn = qn;
        let size = (0..N).fold(0.0f64, |m, k| m.max((t * step[k]).abs() / p[k].abs().max(1.0)));
        if size <= NEWTON_STEP_TOL {
            return Ok((p, rn, it + 1));
        }
    }
    Err(RootError::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        residual: rn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| Some(x * x - 2.0), 0.0, 2.0, 1e-13).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| Some(x * x + 1.0), -1.0, 1.0, 1e-13).is_err());
        assert_eq!(bisect(|x| Some(x), 0.0, 1.0, 1e-13).unwrap(), 0.0);
    }

    #[test]
    fn sign_change_search() {
        let (a, b) = first_sign_change(|x| Some(0.01 - x * x), 0.0, 0.03, 1.0).unwrap();
        assert!(a < 0.1 && b >= 0.1);
        let (a, b) = first_sign_change(|x| Some(0.01 - x * x), 0.0, -0.03, 1.0).unwrap();
        assert!(a <= -0.1 && b > -0.1);
        assert!(first_sign_change(|x| Some(1.0 + x * x), 0.0, 0.1, 1.0).is_none());
    }

    #[test]
    fn newton_scalar_and_pair() {
        let (p, r, _) = newton(|p: &[f64; 1]| Some(([p[0].powi(3) - 8.0], [[3.0 * p[0] * p[0]]])), [1.0]).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-14 && r < 1e-13);

        // x² + y² = 2, x = y
        let (p, _, _) = newton(
            |p: &[f64; 2]| {
                let [x, y] = *p;
                Some(([x * x + y * y - 2.0, x - y], [[2.0 * x, 2.0 * y], [1.0, -1.0]]))
            },
            [2.0, 0.5],
        )
        .unwrap();
        assert!((p[0] - 1.0).abs() < 1e-14 && (p[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn newton_singular() {
        let e = newton(|p: &[f64; 2]| Some(([p[0] + p[1] - 1.0, 2.0 * (p[0] + p[1]) - 2.5], [[1.0, 1.0], [2.0, 2.0]])), [0.0, 0.0]);
        assert!(matches!(e, Err(RootError::Singular(_))));
    }
}
