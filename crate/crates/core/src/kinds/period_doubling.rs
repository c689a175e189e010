use std::collections::BTreeMap;
use std::sync::Arc;

use super::{nf_fixed_points, BifurcationStrategy, ConjContext, ConjugacyCheck, MismatchProbe, StrategyError, MISMATCH_SHIFT};
use crate::classify::Kind;
use crate::conjugacy::{
    build_basin, build_basins, derivative_probe, residual, BasinConjugacy, Conjugacy, Iterate2, Map1D, NormalFormMap, PdLift,
    SeedKind, Side, SliceMap,
};
use crate::jet::Jet2;
use crate::normalform::{Fit, NfError, NormalForm};
use crate::skeleton::{self, pd_branch, pd_m_coeff, pd_second_iterate, pd_trivial_branch, Branch, BranchLabel, SkeletonError};

pub struct PeriodDoublingStrategy;

impl BifurcationStrategy for PeriodDoublingStrategy {
    fn kind(&self) -> Kind {
        Kind::PeriodDoubling
    }

    fn branches(&self, j: &Jet2) -> Result<Vec<Branch>, SkeletonError> {
        Ok(vec![pd_trivial_branch(j)?, pd_branch(j)?])
    }

    fn coefficients(&self, j: &Jet2) -> Result<BTreeMap<String, f64>, SkeletonError> {
        let s = pd_second_iterate(j)?;
        let mut out = BTreeMap::new();
        for (k, v) in s.b.iter().enumerate() {
            out.insert(format!("b{}", k + 1), *v);
        }
        for (k, v) in s.c.as_vec().iter().enumerate() {
            out.insert(format!("c{}", k + 2), *v);
        }
        out.insert("M".into(), pd_m_coeff(&s.b));
        Ok(out)
    }

    fn coordinate_scale(&self, j: &Jet2) -> f64 {
        let q = 3.0 * j.deriv(2, 0).powi(2) + 2.0 * j.deriv(3, 0);
        (q / 12.0).sqrt()
    }

    fn conjugacies(&self, ctx: &ConjContext) -> Result<Vec<ConjugacyCheck>, StrategyError> {
        let mut fit = self.fit(ctx.spec, ctx.branches, ctx.leading, ctx.mu)?;
        if fit.a.is_none() {
            // Only ν is pinned below the bifurcation.
            fit.a = Some(ctx.leading.a0);
        }
        let a = fit.a.unwrap_or_default();
        let scale = self.coordinate_scale(ctx.jet);
        let trust = ctx.spec.trust_x();
        let f: Arc<dyn Map1D> = Arc::new(SliceMap::new(ctx.spec.clone(), ctx.mu, trust)?);
        let f2: Arc<dyn Map1D> = Arc::new(Iterate2::new(f.clone())?);

        let mut xs = vec![0.0];
        if ctx.mu > 0.0 {
            let br = ctx
                .branches
                .iter()
                .find(|b| b.label == BranchLabel::PeriodTwoPair)
                .ok_or(NfError::BranchFailure { mu: ctx.mu, label: BranchLabel::PeriodTwoPair })?;
            let s = skeleton::newton_branch(ctx.spec, br, &[], &[ctx.mu])
                .pop()
                .filter(|s| s.valid)
                .ok_or(NfError::BranchFailure { mu: ctx.mu, label: BranchLabel::PeriodTwoPair })?;
            let p = s.partner.unwrap_or(f64::NAN);
            xs = vec![s.x.min(p), 0.0, s.x.max(p)];
        }

        let build = |a: f64| -> Result<(Arc<dyn Map1D>, Vec<f64>, Vec<BasinConjugacy>), StrategyError> {
            let nf = NormalForm::new(Kind::PeriodDoubling, fit.nu, a, 0.0)?;
            let g: Arc<dyn Map1D> = Arc::new(NormalFormMap::new(nf, 2.0 * scale * trust)?);
            let g2: Arc<dyn Map1D> = Arc::new(Iterate2::new(g.clone())?);
            let ys = nf_fixed_points(&nf);
            let basins = build_basins(f2.clone(), g2, &xs, &ys)?;
            Ok((g, ys, basins))
        };
        let (g, ys, basins) = build(a)?;
        let centre = xs.iter().position(|x| *x == 0.0).unwrap_or(0);

        let mut out = Vec::new();
        let piece = basins[centre]
            .piece(Side::Right)
            .cloned()
            .ok_or_else(|| StrategyError::Other("no interval to the right of 0".into()))?;
        let lift = PdLift::new(Arc::new(piece), f.clone(), g.clone())?;
        let tag = if basins[centre].attracting() { "attraction" } else { "repulsion" };
        let mut check = lift_check(format!("fixed-point {tag} (lift)"), &fit, &lift, ctx.samples, &basins[centre]);
        check.probe = derivative_probe(&lift, 0.0, 0.0).ok();
        out.push(check);

        if xs.len() == 3 {
            let upper = Arc::new(basins[2].clone());
            let lift = PdLift::new(upper, f.clone(), g)?;
            let mut check = lift_check("period-2 attraction (lift)".into(), &fit, &lift, ctx.samples, &basins[2]);
            check.probe = derivative_probe(&lift, xs[2], ys[2]).ok();
            let wrong = a + MISMATCH_SHIFT;
            check.mismatch = upper_basin(&f2, wrong, &fit, scale * trust, &xs).ok().and_then(|(gw, yw, bw)| {
                let lw = PdLift::new(Arc::new(bw), f.clone(), gw).ok()?;
                let probe = derivative_probe(&lw, xs[2], yw).ok()?;
                Some(MismatchProbe { a: wrong, probe })
            });
            out.push(check);
        }
        Ok(out)
    }
}

/// Only the basin of the upper period-2 point, built for normal form
/// parameter `a`.
fn upper_basin(
    f2: &Arc<dyn Map1D>,
    a: f64,
    fit: &Fit,
    bound: f64,
    xs: &[f64],
) -> Result<(Arc<dyn Map1D>, f64, BasinConjugacy), StrategyError> {
    let nf = NormalForm::new(Kind::PeriodDoubling, fit.nu, a, 0.0)?;
    let g: Arc<dyn Map1D> = Arc::new(NormalFormMap::new(nf, 2.0 * bound)?);
    let g2: Arc<dyn Map1D> = Arc::new(Iterate2::new(g.clone())?);
    let ys = nf_fixed_points(&nf);
    let (Some(&y), Some(&y0)) = (ys.get(2), ys.get(1)) else {
        return Err(StrategyError::Other("normal form has no period-2 orbit".into()));
    };
    let mut b = build_basin(f2.clone(), g2.clone(), xs[2], y, (xs[1], f2.domain().1), (y0, g2.domain().1), Side::Left)?;
    b.shrink_open_end(Side::Right);
    Ok((g, y, b))
}

fn lift_check(label: String, fit: &Fit, lift: &PdLift, samples: usize, basin: &BasinConjugacy) -> ConjugacyCheck {
    let xs = lift.samples(samples);
    let (lo, hi) = lift.source();
    let mut check = ConjugacyCheck::from_residual(label, fit, (lo, hi), SeedKind::Linearized, residual(lift, &xs));
    let (x, y) = basin.fixed_points();
    let (lf, lg) = basin.multipliers();
    check.fixed_point = Some([x, y]);
    check.multipliers = Some([lf, lg]);
    check
}
