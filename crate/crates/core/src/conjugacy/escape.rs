use serde::Serialize;

use super::{ConjError, ITERATION_CAP};
use crate::classify::Kind;
use crate::expr::MapSpec;
use crate::normalform::NormalForm;

/// Transit of the orbit of `x0` past `-x0`: `n` is the first iterate with
/// `fⁿ(x0) ≤ -x0` and `phase` the fractional position of `-x0` inside the
/// last step, so `time = n - phase` varies continuously with the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeData {
    pub n: usize,
    pub phase: f64,
}

impl EscapeData {
    pub fn time(&self) -> f64 {
        self.n as f64 - self.phase
    }
}

pub fn escape_data(f: impl Fn(f64) -> Option<f64>, x0: f64) -> Result<EscapeData, ConjError> {
    let mut prev = x0;
    for n in 1..=ITERATION_CAP {
        let next = f(prev).ok_or(ConjError::Eval(prev))?;
        if next >= prev {
            return Err(ConjError::FixedPointInside { lo: -x0, hi: x0 });
        }
        if next <= -x0 {
            let phase = (-x0 - next) / (prev - next);
            return Ok(EscapeData { n, phase });
        }
        prev = next;
    }
    Err(ConjError::IterationCap { x: x0, cap: ITERATION_CAP })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeMatch {
    pub mu: f64,
    pub nu: f64,
    pub map: EscapeData,
    pub normal_form: EscapeData,
}

impl EscapeMatch {
    pub fn phase_error(&self) -> f64 {
        (self.map.time() - self.normal_form.time()).abs()
    }
}

/// For a sign-normalized saddle-node map at `μ < 0`, the `ν < 0` for which
/// the normal form with coefficient `a` needs the same escape time from
/// `y0` past `-y0` as the map from `x0` past `-x0`.
pub fn match_nu_by_escape(spec: &MapSpec, x0: f64, y0: f64, mu: f64, a: f64) -> Result<EscapeMatch, ConjError> {
    let target = escape_data(|x| spec.eval(x, mu).ok(), x0)?;
    let t_target = target.time();
    let time = |nu: f64| -> Result<EscapeData, ConjError> {
        let nf = NormalForm::new(Kind::SaddleNode, nu, a, 0.0).map_err(|e| ConjError::Setup(e.to_string()))?;
        escape_data(|y| Some(nf.eval(y)), y0)
    };
    // Escape time grows as ν → 0⁻; bracket the target.
    let mut hi = -mu.abs().max(1e-12);
    let mut lo = hi;
    let mut steps = 0;
    while time(hi)?.time() < t_target {
        hi *= 0.5;
        steps += 1;
        if steps > 200 {
            return Err(ConjError::Setup("no escape-time bracket near zero".into()));
        }
    }
    while time(lo)?.time() > t_target {
        lo *= 2.0;
        steps += 1;
        if steps > 200 {
            return Err(ConjError::Setup("no escape-time bracket".into()));
        }
    }
    let mut best = (hi, time(hi)?);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let e = time(mid)?;
        if (e.time() - t_target).abs() < (best.1.time() - t_target).abs() {
            best = (mid, e);
        }
        if (e.time() - t_target).abs() <= 1e-12 || mid == lo || mid == hi {
            break;
        }
        if e.time() > t_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(EscapeMatch {
        mu,
        nu: best.0,
        map: target,
        normal_form: best.1,
    })
}
