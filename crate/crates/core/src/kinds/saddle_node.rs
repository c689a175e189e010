use std::collections::BTreeMap;
use std::sync::Arc;

use super::{increasing_checks, BifurcationStrategy, ConjContext, ConjugacyCheck, StrategyError};
use crate::classify::Kind;
use crate::conjugacy::{
    admissible_samples, build_no_fixed_points, match_nu_by_escape, residual, Map1D, NormalFormMap, SeedKind, SliceMap,
};
use crate::jet::Jet2;
use crate::normalform::{Fit, NormalForm};
use crate::skeleton::{sn_branches, Branch, SkeletonError};

/// Escape reference point `X0` as a fraction of the trust radius in `x`.
pub const TRANSIT_FRACTION: f64 = 0.5;

pub struct SaddleNodeStrategy;

impl BifurcationStrategy for SaddleNodeStrategy {
    fn kind(&self) -> Kind {
        Kind::SaddleNode
    }

    fn branches(&self, j: &Jet2) -> Result<Vec<Branch>, SkeletonError> {
        let (lower, upper) = sn_branches(j)?;
        Ok(vec![lower, upper])
    }

    fn coefficients(&self, j: &Jet2) -> Result<BTreeMap<String, f64>, SkeletonError> {
        let (c2, c3, c4, c6) = (j.coeff(0, 1), j.coeff(2, 0), j.coeff(1, 1), j.coeff(3, 0));
        Ok(BTreeMap::from([
            ("c2".to_string(), c2),
            ("c3".to_string(), c3),
            ("c4".to_string(), c4),
            ("c6".to_string(), c6),
            ("z1".to_string(), (c2 * c6 - c3 * c4) / (2.0 * c3 * c3)),
        ]))
    }

    fn coordinate_scale(&self, j: &Jet2) -> f64 {
        -j.coeff(2, 0)
    }

    fn conjugacies(&self, ctx: &ConjContext) -> Result<Vec<ConjugacyCheck>, StrategyError> {
        let scale = self.coordinate_scale(ctx.jet);
        if ctx.mu > 0.0 {
            let fit = self.fit(ctx.spec, ctx.branches, ctx.leading, ctx.mu)?;
            return increasing_checks(ctx, Kind::SaddleNode, &fit, scale);
        }
        Ok(vec![transit(ctx, scale)?])
    }
}

/// Conjugacy across the bottleneck for `μ < 0`, anchored at `X0 ↦ Y0`
/// after matching `ν` by escape time.
fn transit(ctx: &ConjContext, scale: f64) -> Result<ConjugacyCheck, StrategyError> {
    let trust = ctx.spec.trust_x();
    let x0 = TRANSIT_FRACTION * trust;
    let y0 = x0 * scale;
    let a = ctx.leading.a0;
    let m = match_nu_by_escape(ctx.spec, x0, y0, ctx.mu, a)?;
    let f: Arc<dyn Map1D> = Arc::new(SliceMap::new(ctx.spec.clone(), ctx.mu, trust)?);
    let nf = NormalForm::new(Kind::SaddleNode, m.nu, a, 0.0)?;
    let g: Arc<dyn Map1D> = Arc::new(NormalFormMap::new(nf, 2.0 * scale * trust)?);
    let step = |map: &dyn Map1D, p: f64| map.eval(p).map(|q| p - q).ok_or(crate::conjugacy::ConjError::Eval(p));
    let source = (-x0, x0 + step(f.as_ref(), x0)?);
    let target = (-y0, y0 + step(g.as_ref(), y0)?);
    let h = build_no_fixed_points(f.clone(), g, source, target, x0, y0)?;
    let xs = admissible_samples(f.as_ref(), source.0, source.1, ctx.samples);
    let fit = Fit {
        mu: ctx.mu,
        nu: m.nu,
        a: Some(a),
        b: None,
        residual: m.phase_error(),
    };
    let mut check = ConjugacyCheck::from_residual("transit".into(), &fit, source, SeedKind::Blend, residual(&h, &xs));
    check.escape = Some(m);
    Ok(check)
}
