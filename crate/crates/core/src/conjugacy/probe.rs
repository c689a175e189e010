use serde::Serialize;

use super::{Conjugacy, ConjError};

/// Quotients `(h(x* ± δ) - y*) / ±δ` at `δ_j = δ0 · 2^{-j}`, `j = 0..=levels`.
pub const PROBE_LEVELS: usize = 20;
const TAIL_START: usize = 10;
const SLOPE_TOL: f64 = 1e-3;
const SPREAD_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    /// Bounded and bounded away from zero.
    Converges,
    Vanishes,
    Diverges,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideProbe {
    pub quotients: Vec<f64>,
    /// Least-squares slope of `ln |q|` against `ln δ` over the tail.
    pub slope: f64,
    /// Relative spread of the last five quotients.
    pub spread: f64,
    pub limit: f64,
    pub verdict: ProbeVerdict,
    /// Evaluation failed before `δ_J`; the sequence stops at the last success.
    pub truncated: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub x_star: f64,
    pub y_star: f64,
    pub deltas: Vec<f64>,
    pub left: Option<SideProbe>,
    pub right: Option<SideProbe>,
}

impl Probe {
    /// Verdict shared by both probed sides, if they agree.
    pub fn verdict(&self) -> Option<ProbeVerdict> {
        let mut vs = self.left.iter().chain(&self.right).map(|s| s.verdict);
        let first = vs.next()?;
        vs.all(|v| v == first).then_some(first)
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn side(h: &dyn Conjugacy, x_star: f64, y_star: f64, deltas: &[f64], sign: f64) -> Result<SideProbe, ConjError> {
    let mut quotients = Vec::with_capacity(deltas.len());
    let mut truncated = None;
    for &d in deltas {
        match h.eval(x_star + sign * d) {
            Ok(v) => quotients.push((v - y_star) / (sign * d)),
            Err(e) => {
                truncated = Some(e.to_string());
                break;
            }
        }
    }
    if quotients.len() < 5 {
        return Err(ConjError::Setup(format!(
            "derivative probe at {x_star} failed after {} steps: {}",
            quotients.len(),
            truncated.unwrap_or_default()
        )));
    }
    let start = TAIL_START.min(quotients.len() - 5);
    let tail = &quotients[start..];
    let limit = *quotients.last().unwrap();
    if tail.iter().any(|q| *q == 0.0) {
        return Ok(SideProbe {
            slope: f64::INFINITY,
            spread: f64::INFINITY,
            limit,
            verdict: ProbeVerdict::Vanishes,
            quotients,
            truncated,
        });
    }
    let lx: Vec<f64> = deltas[start..quotients.len()].iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = tail.iter().map(|q| q.abs().ln()).collect();
    let s = slope(&lx, &ly);
    let last = &quotients[quotients.len() - 5..];
    let (mn, mx) = last.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| (a.min(*q), b.max(*q)));
    let spread = (mx - mn) / limit.abs();
    let verdict = if !s.is_finite() || !limit.is_finite() {
        ProbeVerdict::Diverges
    } else if s > SLOPE_TOL {
        ProbeVerdict::Vanishes
    } else if s < -SLOPE_TOL {
        ProbeVerdict::Diverges
    } else if spread <= SPREAD_TOL {
        ProbeVerdict::Converges
    } else if mx.abs() > mn.abs() {
        ProbeVerdict::Diverges
    } else {
        ProbeVerdict::Vanishes
    };
    Ok(SideProbe {
        quotients,
        slope: s,
        spread,
        limit,
        verdict,
        truncated,
    })
}

/// Probes the derivative of `h` at the fixed point `x* ↦ y*` from each side
/// lying inside the source. The initial step is `min(1e-2, d/4)`, with `d`
/// the distance from `x*` to the nearer source end.
pub fn derivative_probe(h: &dyn Conjugacy, x_star: f64, y_star: f64) -> Result<Probe, ConjError> {
    let (lo, hi) = h.source();
    let room = [x_star - lo, hi - x_star].into_iter().filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    if !room.is_finite() {
        return Err(ConjError::OutsideSource { x: x_star, lo, hi });
    }
    let d0 = (0.25 * room).min(1e-2);
    let deltas: Vec<f64> = (0..=PROBE_LEVELS).map(|j| d0 * 0.5f64.powi(j as i32)).collect();
    let left = (x_star - lo > 0.0).then(|| side(h, x_star, y_star, &deltas, -1.0)).transpose()?;
    let right = (hi - x_star > 0.0).then(|| side(h, x_star, y_star, &deltas, 1.0)).transpose()?;
    Ok(Probe {
        x_star,
        y_star,
        deltas,
        left,
        right,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::conjugacy::{build_basin, build_between_fixed_points, FnMap, Map1D, Side};

    #[test]
    fn affine_seed_for_different_rates_vanishes() {
        let f: Arc<dyn Map1D> = Arc::new(FnMap::linear(0.5, (-2.0, 2.0)));
        let g: Arc<dyn Map1D> = Arc::new(FnMap::linear(0.25, (-2.0, 2.0)));
        let h = build_between_fixed_points(f, g, (0.0, 1.0), (0.0, 0.5), None).unwrap();
        let p = derivative_probe(&h, 0.0, 0.0).unwrap();
        assert!(p.left.is_none());
        assert_eq!(p.verdict(), Some(ProbeVerdict::Vanishes));
    }

    #[test]
    fn linearized_seed_verdicts() {
        let f: Arc<dyn Map1D> = Arc::new(FnMap::new(|x| 0.5 * x + 0.3 * x * x, |x| 0.5 + 0.6 * x, (-0.5, 0.5)));
        for (rate, expected) in [(0.5, ProbeVerdict::Converges), (0.25, ProbeVerdict::Vanishes), (0.7, ProbeVerdict::Diverges)] {
            let g: Arc<dyn Map1D> = Arc::new(FnMap::linear(rate, (-1.0, 1.0)));
            let h = build_basin(f.clone(), g, 0.0, 0.0, (-0.4, 0.4), (-0.4, 0.4), Side::Right).unwrap();
            let p = derivative_probe(&h, 0.0, 0.0).unwrap();
            assert_eq!(p.verdict(), Some(expected), "{rate}: {p:?}");
        }
    }
}
