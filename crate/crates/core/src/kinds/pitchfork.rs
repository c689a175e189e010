use std::collections::BTreeMap;

use super::{increasing_checks, BifurcationStrategy, ConjContext, ConjugacyCheck, StrategyError};
use crate::classify::Kind;
use crate::jet::Jet2;
use crate::skeleton::{pf_branches, Branch, KCoeffs, SkeletonError};

pub struct PitchforkStrategy;

impl BifurcationStrategy for PitchforkStrategy {
    fn kind(&self) -> Kind {
        Kind::Pitchfork
    }

    fn branches(&self, j: &Jet2) -> Result<Vec<Branch>, SkeletonError> {
        let (trivial, lower, upper) = pf_branches(j)?;
        Ok(vec![trivial, lower, upper])
    }

    fn coefficients(&self, j: &Jet2) -> Result<BTreeMap<String, f64>, SkeletonError> {
        let k = KCoeffs::from_map_jet(j);
        let mut out: BTreeMap<String, f64> = ["c2", "c3", "c4", "c5", "c6", "c7", "c8"]
            .iter()
            .zip(k.as_vec())
            .map(|(n, v)| (n.to_string(), v))
            .collect();
        out.insert("z1".into(), k.z1());
        out.insert("L".into(), k.ell());
        out.insert("B".into(), k.b_coeff());
        out.insert("C".into(), k.c_coeff());
        Ok(out)
    }

    fn coordinate_scale(&self, j: &Jet2) -> f64 {
        (-j.coeff(3, 0)).sqrt()
    }

    fn conjugacies(&self, ctx: &ConjContext) -> Result<Vec<ConjugacyCheck>, StrategyError> {
        let mut fit = self.fit(ctx.spec, ctx.branches, ctx.leading, ctx.mu)?;
        // Below the bifurcation only ν is pinned; a and b do not touch the
        // multiplier at 0, so the leading values stand in.
        if fit.a.is_none() {
            fit.a = Some(ctx.leading.a0);
            fit.b = ctx.leading.b0;
        }
        increasing_checks(ctx, Kind::Pitchfork, &fit, self.coordinate_scale(ctx.jet))
    }
}
