//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bifurcate_core::classify::{classify, Kind, DEFAULT_TOL};
use bifurcate_core::conjugacy::{escape_data, match_nu_by_escape, ProbeVerdict};
use bifurcate_core::expr::MapSpec;
use bifurcate_core::jet::Jet2;
use bifurcate_core::kinds::{BifurcationStrategy, ConjContext, ConjugacyCheck, Registry, TRANSIT_FRACTION};
use bifurcate_core::normalform::{leading_coefficients, nf_nontrivial_points, takens_alpha, Leading, NormalForm};
use bifurcate_core::oracle::{isolate_fixed_points, slope};
use bifurcate_core::skeleton::{
    newton_branch, pd_m_coeff, pd_second_iterate, tc_branches_variant, Branch, BranchLabel, KCoeffs, TcVariant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TIME_LIMIT: Duration = Duration::from_secs(10);

const XEXP: &str = "x*exp(-x) + mu";
const LOGISTIC_TC: &str = "(1 + mu)*x*(1 - x)";
const PF_MAP: &str = "x + mu*x - x^3 + x^4";
const LOGISTIC_PD: &str = "(-1 - mu)*x - (3 + mu)*x^2";
const MAPS: [&str; 4] = [XEXP, LOGISTIC_TC, PF_MAP, LOGISTIC_PD];

/// A map in normal-form orientation with everything the strategies need.
struct Case {
    spec: MapSpec,
    jet: Jet2,
    strategy: Arc<dyn BifurcationStrategy>,
    branches: Vec<Branch>,
    leading: Leading,
}

fn case(src: &str) -> Result<Case, String> {
    let raw = MapSpec::parse_with(src, &[]).map_err(|e| e.to_string())?;
    let c = classify(&raw, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let strategy = Registry::builtin()
        .for_kind(c.kind)
        .ok_or_else(|| format!("{src}: no strategy for {}", c.kind))?;
    let spec = c.normalize_spec(&raw);
    let jet = spec.jet().map_err(|e| e.to_string())?;
    let branches = strategy.branches(&jet).map_err(|e| e.to_string())?;
    let leading = strategy.leading(&jet).map_err(|e| e.to_string())?;
    Ok(Case { spec, jet, strategy, branches, leading })
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what} = {got}, expected {want} within {tol:e}"))
    }
}

fn branch<'a>(c: &'a Case, label: BranchLabel) -> Result<&'a Branch, String> {
    c.branches.iter().find(|b| b.label == label).ok_or_else(|| format!("no {label} branch"))
}

/// Distance from the series prediction to the nearest oracle root.
fn series_error(c: &Case, b: &Branch, mu: f64, iterate: usize) -> Result<f64, String> {
    let pred = b.predict(mu).ok_or("no prediction")?;
    let w = 0.5 * pred.abs().max(1e-12);
    let roots = isolate_fixed_points(|x| c.spec.eval(x, mu).ok(), pred - w, pred + w, 256, iterate).roots;
    roots
        .iter()
        .map(|r| (r - pred).abs())
        .min_by(f64::total_cmp)
        .ok_or_else(|| format!("no oracle root near {pred} at mu = {mu}"))
}

fn m_scales() -> Vec<f64> {
    (4..=9).map(|k| 2f64.powi(-k)).collect()
}

fn c1_self_consistency() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst = 0.0f64;
    let mut signs = Vec::new();
    for kind in [Kind::SaddleNode, Kind::Transcritical, Kind::Pitchfork, Kind::PeriodDoubling] {
        for _ in 0..250 {
            let a: f64 = rng.gen_range(-2.0..2.0);
            let b: f64 = rng.gen_range(-2.0..2.0);
            let spec = NormalForm::family_spec(kind, a, b).map_err(|e| e.to_string())?;
            let cl = classify(&spec, DEFAULT_TOL).map_err(|e| e.to_string())?;
            if cl.kind != kind || cl.flip_x || cl.flip_mu {
                return Err(format!("{kind} draw a = {a}, b = {b} classified as {} (flips {} {})", cl.kind, cl.flip_x, cl.flip_mu));
            }
            let l = leading_coefficients(&spec.jet().map_err(|e| e.to_string())?, kind).map_err(|e| e.to_string())?;
            if l.nu_prime_0.abs() != 1.0 {
                return Err(format!("{kind}: nu'(0) = {}", l.nu_prime_0));
            }
            worst = worst.max((l.a0 - a).abs());
            if kind == Kind::Pitchfork {
                worst = worst.max((l.b0.unwrap_or(f64::NAN) - b).abs());
            }
            if worst > 1e-9 || worst.is_nan() {
                return Err(format!("{kind} draw a = {a}, b = {b}: recovered {:?}, error {worst:e}", l));
            }
        }
        let l = leading_coefficients(&NormalForm::family_spec(kind, 0.0, 0.0).unwrap().jet().unwrap(), kind).unwrap();
        signs.push(format!("{kind} {:+}", l.nu_prime_0));
    }
    Ok(format!("1000 draws, max |error| {worst:.1e}, nu'(0): {}", signs.join(", ")))
}

fn c2_saddle_node() -> Result<String, String> {
    let c = case(XEXP)?;
    if c.strategy.kind() != Kind::SaddleNode {
        return Err(format!("classified as {}", c.strategy.kind()));
    }
    close("nu'(0)", c.leading.nu_prime_0, 1.0, 1e-12)?;
    close("a0", c.leading.a0, 0.5, 1e-12)?;
    let mut slopes = Vec::new();
    for (label, sign) in [(BranchLabel::Lower, -1.0), (BranchLabel::Upper, 1.0)] {
        let b = branch(&c, label)?;
        let s = b.location_series.coeffs();
        close(&format!("{label} m-coefficient"), s.get(1).copied().unwrap_or(f64::NAN), sign, 1e-12)?;
        close(&format!("{label} m^2-coefficient"), s.get(2).copied().unwrap_or(f64::NAN), 0.25, 1e-12)?;
        let ms = m_scales();
        let errs: Vec<f64> = ms.iter().map(|m| series_error(&c, b, m * m, 1)).collect::<Result<_, _>>()?;
        let s = slope(&ms, &errs).ok_or("slope needs four scales")?.slope;
        if s < 2.8 {
            return Err(format!("{label} branch slope {s} < 2.8, errors {errs:?}"));
        }
        slopes.push(format!("{label} {s:.3}"));
    }
    Ok(format!("nu'(0) = 1, a0 = 0.5, series slopes {}", slopes.join(", ")))
}

fn c3_transcritical() -> Result<String, String> {
    let c = case(LOGISTIC_TC)?;
    if c.strategy.kind() != Kind::Transcritical {
        return Err(format!("classified as {}", c.strategy.kind()));
    }
    let up = branch(&c, BranchLabel::Upper)?;
    let loc = up.location_series.coeffs();
    close("x mu-coefficient", loc[1], 1.0, 1e-12)?;
    close("x mu^2-coefficient", loc[2], -1.0, 1e-12)?;
    let d = up.multiplier_series.coeffs();
    close("D1 constant", d[0], 1.0, 1e-12)?;
    close("D1 mu-coefficient", d[1], -1.0, 1e-12)?;
    close("D1 mu^2-coefficient", d[2], 0.0, 1e-12)?;
    close("a0", c.leading.a0, 0.0, 1e-12)?;
    let grid = [1e-4, 1e-3, 5e-3, 1e-2, 3e-2];
    let triv = branch(&c, BranchLabel::Trivial)?;
    let mut worst = 0.0f64;
    for s in newton_branch(&c.spec, up, &[triv], &grid) {
        if !s.valid {
            return Err(format!("Newton failed at mu = {}", s.mu));
        }
        worst = worst.max((s.multiplier - (1.0 - s.mu)).abs());
    }
    if worst > 1e-12 {
        return Err(format!("multiplier 1 - mu missed by {worst:e}"));
    }
    // The f_xμ form of the μ² coefficient is off by an O(μ²) term; its series
    // error against oracle roots converges one order slower.
    let ms = m_scales();
    let slope_for = |variant: TcVariant| -> Result<f64, String> {
        let (_, b) = tc_branches_variant(&c.jet, variant).map_err(|e| e.to_string())?;
        let errs: Vec<f64> = ms.iter().map(|&mu| series_error(&c, &b, mu, 1)).collect::<Result<_, _>>()?;
        Ok(slope(&ms, &errs).ok_or("slope needs four scales")?.slope)
    };
    let second = slope_for(TcVariant::MixedSecond)?;
    let first = slope_for(TcVariant::MixedFirst)?;
    if second < 2.8 || first >= 2.8 {
        return Err(format!("series slopes do not discriminate: f_xmumu {second}, f_xmu {first}"));
    }
    Ok(format!(
        "series mu - mu^2, D1 = 1 - mu, a0 = 0, multiplier error {worst:.1e}; slopes f_xmumu {second:.3} vs f_xmu {first:.3}"
    ))
}

fn c4_pitchfork() -> Result<String, String> {
    let c = case(PF_MAP)?;
    if c.strategy.kind() != Kind::Pitchfork {
        return Err(format!("classified as {}", c.strategy.kind()));
    }
    close("a0", c.leading.a0, 1.0, 1e-12)?;
    close("b0", c.leading.b0.unwrap_or(f64::NAN), -1.0, 1e-12)?;
    let fit = c.strategy.fit(&c.spec, &c.branches, &c.leading, 1e-3).map_err(|e| e.to_string())?;
    let (a, b) = (fit.a.unwrap_or(f64::NAN), fit.b.unwrap_or(f64::NAN));
    close("a(1e-3)", a, 1.0, 0.05)?;
    close("b(1e-3)", b, -1.0, 0.05)?;
    Ok(format!("a0 = 1, b0 = -1; at mu = 1e-3 a = {a:.6}, b = {b:.6}"))
}

/// Period-two multiplier at `mu` from oracle roots of `f²` and exact derivatives.
fn period_two_multiplier(c: &Case, mu: f64) -> Result<f64, String> {
    let r = 4.0 * mu.sqrt();
    let roots = isolate_fixed_points(|x| c.spec.eval(x, mu).ok(), 0.1 * r / 4.0, r, 512, 2).roots;
    let x = *roots.first().ok_or_else(|| format!("no period-two point at mu = {mu}"))?;
    let y = c.spec.eval(x, mu).map_err(|e| e.to_string())?;
    let d = |p: f64| c.spec.eval_dx(p, mu).map(|d| d.d).map_err(|e| e.to_string());
    Ok(d(x)? * d(y)?)
}

fn c5_period_doubling() -> Result<String, String> {
    let c = case(LOGISTIC_PD)?;
    if c.strategy.kind() != Kind::PeriodDoubling {
        return Err(format!("classified as {}", c.strategy.kind()));
    }
    close("a0", c.leading.a0, 1.25, 1e-12)?;
    close("nu'(0)", c.leading.nu_prime_0, 1.0, 1e-12)?;
    let s = pd_second_iterate(&c.jet).map_err(|e| e.to_string())?;
    // f² = x + x G(x, μ): read G off the composed jet.
    let composed = c.jet.compose_x(&c.jet).map_err(|e| e.to_string())?;
    let g = KCoeffs::from_map_jet(&composed).as_vec();
    let expected = [2.0, -18.0, -3.0, 1.0, -27.0, -30.0, 0.0];
    for (k, ((closed, comp), want)) in s.c.as_vec().iter().zip(g).zip(expected).enumerate() {
        close(&format!("c{} (closed form)", k + 2), *closed, want, 1e-11)?;
        close(&format!("c{} (composed jet)", k + 2), comp, want, 1e-11)?;
    }
    let m = pd_m_coeff(&s.b);
    close("M", m, -1.0, 1e-12)?;
    let b2 = s.b[1];
    let ms = m_scales();
    let rem: Vec<f64> = ms
        .iter()
        .map(|&m| period_two_multiplier(&c, m * m).map(|d| d - 1.0 - 4.0 * b2 * m * m))
        .collect::<Result<_, _>>()?;
    let sl = slope(&ms, &rem).ok_or("slope needs four scales")?.slope;
    let ratio = rem.last().unwrap() / ms.last().unwrap().powi(4);
    if sl < 3.8 {
        return Err(format!("remainder slope {sl} < 3.8"));
    }
    close("remainder / m^4", ratio, m, 1e-3)?;
    Ok(format!("a0 = 1.25, c = {expected:?}, M = {m}; remainder slope {sl:.3}, remainder/m^4 = {ratio:.6}"))
}

fn multiplier_sets(f: impl Fn(f64) -> Option<f64>, df: impl Fn(f64) -> Option<f64>, r: f64, iterate: usize) -> Option<Vec<f64>> {
    isolate_fixed_points(&f, -r, r, 1024, iterate)
        .roots
        .into_iter()
        .map(|x| {
            let (mut y, mut m) = (x, 1.0);
            for _ in 0..iterate {
                m *= df(y)?;
                y = f(y)?;
            }
            Some(m)
        })
        .collect()
}

fn c6_multipliers() -> Result<String, String> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for src in MAPS {
        let c = case(src)?;
        let kind = c.strategy.kind();
        let iterate = if kind == Kind::PeriodDoubling { 2 } else { 1 };
        for mu in [1e-3, 1e-2] {
            let fit = c.strategy.fit(&c.spec, &c.branches, &c.leading, mu).map_err(|e| format!("{src}: {e}"))?;
            let nf = NormalForm::new(kind, fit.nu, fit.a.unwrap_or(0.0), fit.b.unwrap_or(0.0)).map_err(|e| e.to_string())?;
            let r = 4.0 * mu.sqrt();
            let map = multiplier_sets(|x| c.spec.eval(x, mu).ok(), |x| c.spec.eval_dx(x, mu).ok().map(|d| d.d), r, iterate);
            let far = nf_nontrivial_points(&nf).map(|(a, b)| a.abs().max(b.abs())).unwrap_or(0.0);
            let rn = (4.0 * far).max(4.0 * fit.nu.abs().sqrt());
            let norm = multiplier_sets(|y| Some(nf.eval(y)), |y| Some(nf.deriv(y)), rn, iterate);
            let (Some(map), Some(norm)) = (map, norm) else {
                return Err(format!("{src} mu = {mu}: evaluation failed"));
            };
            if map.len() != norm.len() || map.is_empty() {
                return Err(format!("{src} mu = {mu}: map multipliers {map:?}, normal form {norm:?}"));
            }
            for (a, b) in map.iter().zip(&norm) {
                worst = worst.max((a - b).abs());
                count += 1;
            }
        }
    }
    if worst > 1e-10 {
        return Err(format!("worst multiplier mismatch {worst:e}"));
    }
    Ok(format!("{count} multiplier pairs, worst mismatch {worst:.1e}"))
}

fn conjugacies(src: &str, mu: f64) -> Result<Vec<ConjugacyCheck>, String> {
    let c = case(src)?;
    let ctx = ConjContext {
        spec: &c.spec,
        jet: &c.jet,
        branches: &c.branches,
        leading: &c.leading,
        mu,
        samples: 1000,
    };
    c.strategy.conjugacies(&ctx).map_err(|e| format!("{src} mu = {mu}: {e}"))
}

fn build_all() -> Result<Vec<(String, ConjugacyCheck)>, String> {
    let mut out = Vec::new();
    for (src, mu) in MAPS.iter().map(|s| (*s, 0.01)).chain([(XEXP, -0.01)]) {
        out.extend(conjugacies(src, mu)?.into_iter().map(|k| (src.to_string(), k)));
    }
    Ok(out)
}

fn c7_residuals(all: &[(String, ConjugacyCheck)]) -> Result<String, String> {
    let mut worst = 0.0f64;
    for (src, k) in all {
        if k.samples != 1000 || k.failures > 0 || !(k.residual_sup <= 1e-7) || !k.monotone {
            return Err(format!(
                "{src} '{}' at mu = {}: residual {:e}, {} samples, {} failures, monotone {}",
                k.label, k.mu, k.residual_sup, k.samples, k.failures, k.monotone
            ));
        }
        worst = worst.max(k.residual_sup);
    }
    let expected = 2 + 1 + 2 + 3 + 2;
    if all.len() != expected {
        return Err(format!("{} conjugacies built, expected {expected}", all.len()));
    }
    Ok(format!("{} conjugacies x 1000 samples, worst residual {worst:.1e}", all.len()))
}

fn c8_probes(all: &[(String, ConjugacyCheck)]) -> Result<String, String> {
    let mut probed = 0;
    let mut mismatched = Vec::new();
    for (src, k) in all {
        let Some(p) = &k.probe else {
            if k.label == "transit" {
                continue;
            }
            return Err(format!("{src} '{}': no probe", k.label));
        };
        for s in p.left.iter().chain(&p.right) {
            if s.verdict != ProbeVerdict::Converges || !(s.spread <= 1e-3) {
                return Err(format!("{src} '{}': verdict {:?}, spread {:e}", k.label, s.verdict, s.spread));
            }
        }
        probed += 1;
        if let Some(w) = &k.mismatch {
            for s in w.probe.left.iter().chain(&w.probe.right) {
                if s.verdict == ProbeVerdict::Converges {
                    return Err(format!("{src} '{}' with a = {}: probe still converges", k.label, w.a));
                }
            }
            mismatched.push((src.clone(), w.probe.verdict()));
        }
    }
    for src in MAPS {
        if !mismatched.iter().any(|(s, _)| s == src) {
            return Err(format!("{src}: no mismatch probe"));
        }
    }
    let v: Vec<String> = mismatched.iter().map(|(_, v)| format!("{v:?}")).collect();
    Ok(format!("{probed} probes converge; {} mismatch probes: {}", mismatched.len(), v.join(", ")))
}

fn c9_escape() -> Result<String, String> {
    let hand = MapSpec::parse_with("x + mu - x^2", &[]).map_err(|e| e.to_string())?;
    let d = escape_data(|x| hand.eval(x, -0.25).ok(), 0.5).map_err(|e| e.to_string())?;
    if d.n != 3 {
        return Err(format!("hand-checked case gives n = {}, expected 3", d.n));
    }
    let c = case(XEXP)?;
    let x0 = TRANSIT_FRACTION * c.spec.trust_x();
    let y0 = x0 * c.strategy.coordinate_scale(&c.jet);
    let mut worst = 0.0f64;
    let mut ns = Vec::new();
    for mu in [-0.04, -0.02, -0.01, -0.005, -0.002] {
        let m = match_nu_by_escape(&c.spec, x0, y0, mu, c.leading.a0).map_err(|e| format!("mu = {mu}: {e}"))?;
        if m.map.n != m.normal_form.n {
            return Err(format!("mu = {mu}: escape counts {} vs {}", m.map.n, m.normal_form.n));
        }
        worst = worst.max(m.phase_error());
        ns.push(m.map.n);
    }
    if worst > 1e-10 {
        return Err(format!("phase error {worst:e}"));
    }
    Ok(format!("hand case n = 3; counts {ns:?}, worst phase error {worst:.1e}"))
}

fn c10_takens() -> Result<String, String> {
    let mut out = Vec::new();
    for src in [XEXP, LOGISTIC_TC] {
        let c = case(src)?;
        let alpha = takens_alpha(&c.jet, 2).map_err(|e| e.to_string())?;
        close(&format!("{src}: alpha2 - a0"), alpha - c.leading.a0, 0.0, 1e-13)?;
        out.push(format!("{src}: alpha2 = {alpha}"));
    }
    Ok(out.join("; "))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Result<String, String>| {
        let t = Instant::now();
        let mut r = f();
        let dt = t.elapsed();
        if r.is_ok() && dt > TIME_LIMIT {
            r = Err(format!("took {dt:?}, limit {TIME_LIMIT:?}"));
        }
        match r {
            Ok(d) => println!("PASS  {n:>2} {name} [{:.2}s]: {d}", dt.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("FAIL  {n:>2} {name} [{:.2}s]: {e}", dt.as_secs_f64());
            }
        }
    };
    report(1, "normal-form self-consistency", &mut c1_self_consistency);
    report(2, "saddle-node derived values", &mut c2_saddle_node);
    report(3, "transcritical derived values", &mut c3_transcritical);
    report(4, "pitchfork derived values", &mut c4_pitchfork);
    report(5, "period-doubling derived values", &mut c5_period_doubling);
    report(6, "multiplier equivalence", &mut c6_multipliers);

    // Criterion 7 builds every conjugacy (its time includes the build);
    // criterion 8 probes the same objects.
    let built: std::cell::RefCell<Option<Vec<(String, ConjugacyCheck)>>> = Default::default();
    report(7, "conjugacy identity", &mut || {
        let all = build_all()?;
        let r = c7_residuals(&all);
        *built.borrow_mut() = Some(all);
        r
    });
    report(8, "differentiability dichotomy", &mut || match built.borrow().as_deref() {
        Some(all) => c8_probes(all),
        None => Err("conjugacies were not built".into()),
    });
    report(9, "escape-time matching", &mut c9_escape);
    report(10, "takens link", &mut c10_takens);

    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all 10 criteria passed");
        ExitCode::SUCCESS
    }
}
