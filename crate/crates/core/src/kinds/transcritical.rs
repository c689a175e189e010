use std::collections::BTreeMap;

use super::{increasing_checks, BifurcationStrategy, ConjContext, ConjugacyCheck, StrategyError};
use crate::classify::Kind;
use crate::jet::Jet2;
use crate::skeleton::{tc_branches, Branch, SkeletonError};

pub struct TranscriticalStrategy;

impl BifurcationStrategy for TranscriticalStrategy {
    fn kind(&self) -> Kind {
        Kind::Transcritical
    }

    fn branches(&self, j: &Jet2) -> Result<Vec<Branch>, SkeletonError> {
        let (trivial, upper) = tc_branches(j)?;
        Ok(vec![trivial, upper])
    }

    fn coefficients(&self, j: &Jet2) -> Result<BTreeMap<String, f64>, SkeletonError> {
        let names = [("c1", 2, 0), ("c2", 1, 1), ("c3", 3, 0), ("c4", 2, 1), ("c5", 1, 2)];
        Ok(names.iter().map(|&(n, i, k)| (n.to_string(), j.coeff(i, k))).collect())
    }

    fn coordinate_scale(&self, j: &Jet2) -> f64 {
        -j.coeff(2, 0)
    }

    fn conjugacies(&self, ctx: &ConjContext) -> Result<Vec<ConjugacyCheck>, StrategyError> {
        let fit = self.fit(ctx.spec, ctx.branches, ctx.leading, ctx.mu)?;
        increasing_checks(ctx, Kind::Transcritical, &fit, self.coordinate_scale(ctx.jet))
    }
}
