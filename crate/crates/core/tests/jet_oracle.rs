use bifurcate_core::expr::MapSpec;
use bifurcate_core::jet::Jet2;
use bifurcate_core::oracle::{fd_derivative, isolate_fixed_points};
use proptest::prelude::*;

fn spec(src: &str) -> MapSpec {
    MapSpec::parse_with(src, &[]).unwrap()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomial_jets_are_exact(cs in prop::collection::vec(-5i32..=5, 10)) {
        let monomials = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (4, 0), (1, 3)];
        let src = monomials
            .iter()
            .zip(&cs)
            .map(|((i, j), c)| format!("({c})*x^{i}*mu^{j}"))
            .collect::<Vec<_>>()
            .join(" + ");
        let jet = spec(&src).jet().unwrap();
        for ((i, j), c) in monomials.iter().zip(&cs) {
            prop_assert_eq!(jet.coeff(*i, *j), *c as f64, "coefficient x^{} mu^{}", i, j);
        }
        prop_assert_eq!(jet.coeff(5, 0), 0.0);
    }
}

#[test]
fn product_obeys_leibniz_rule() {
    let f = spec("exp(x - 2*mu) + sin(x*mu)").jet().unwrap();
    let g = spec("cos(x) + mu/(1 + x)").jet().unwrap();
    let fg = spec("(exp(x - 2*mu) + sin(x*mu))*(cos(x) + mu/(1 + x))").jet().unwrap();
    let d = fg.degree();
    for n in 0..=d {
        for j in 0..=n {
            let i = n - j;
            let mut sum = 0.0;
            for a in 0..=i {
                for b in 0..=j {
                    sum += binom(i, a) * binom(j, b) * f.deriv(a, b) * g.deriv(i - a, j - b);
                }
            }
            assert!(close(fg.deriv(i, j), sum, 1e-11), "d^{i}x d^{j}mu: {} vs {sum}", fg.deriv(i, j));
        }
    }
}

#[test]
fn composition_matches_substituted_expression() {
    let outer = spec("x + mu*x - x^2 + sinh(x)*mu").jet().unwrap();
    let inner = spec("x*exp(-x) + mu*x").jet().unwrap();
    let direct = spec("(x*exp(-x) + mu*x) + mu*(x*exp(-x) + mu*x) - (x*exp(-x) + mu*x)^2 + sinh(x*exp(-x) + mu*x)*mu")
        .jet()
        .unwrap();
    let composed = outer.compose_x(&inner).unwrap();
    for ((i, j), c) in direct.terms() {
        assert!(close(composed.coeff(i, j), c, 1e-12), "x^{i} mu^{j}: {} vs {c}", composed.coeff(i, j));
    }
}

#[test]
fn composition_rejects_offset_inner() {
    let outer = Jet2::var_x(4);
    let inner = Jet2::var_x(4).add_constant(0.1);
    assert!(outer.compose_x(&inner).is_err());
}

fn fd(s: &MapSpec, i: usize, j: usize) -> f64 {
    fd_derivative(|x, mu| s.eval(x, mu).ok(), 0.0, 0.0, i, j).unwrap().value
}

#[test]
fn finite_differences_of_reference_maps() {
    assert!((fd(&spec("x + mu - x^2"), 2, 0) + 2.0).abs() < 1e-6);
    assert!((fd(&spec("x*exp(-x)"), 3, 0) - 3.0).abs() < 1e-4);
    assert!((fd(&spec("(1 + mu)*x*(1 - x)"), 1, 1) - 1.0).abs() < 1e-7);
}

fn sorted_roots(s: &MapSpec, mu: f64, r: f64, iterate: usize) -> Vec<f64> {
    let mut v = isolate_fixed_points(|x| s.eval(x, mu).ok(), -r, r, 1024, iterate).roots;
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn saddle_node_roots() {
    let roots = sorted_roots(&spec("x + mu - x^2"), 0.04, 0.5, 1);
    assert_eq!(roots.len(), 2);
    assert!((roots[0] + 0.2).abs() < 1e-12 && (roots[1] - 0.2).abs() < 1e-12, "{roots:?}");
}

#[test]
fn pitchfork_roots() {
    let roots = sorted_roots(&spec("x + mu*x - x^3"), 0.01, 0.5, 1);
    assert_eq!(roots.len(), 3, "{roots:?}");
    for (r, want) in roots.iter().zip([-0.1, 0.0, 0.1]) {
        assert!((r - want).abs() < 1e-12, "{roots:?}");
    }
}

#[test]
fn logistic_period_two_pair() {
    let s = spec("(-1 - mu)*x - (3 + mu)*x^2");
    let mu = 0.01;
    let roots = sorted_roots(&s, mu, 0.3, 2);
    let cycle: Vec<f64> = roots.iter().copied().filter(|x| (s.eval(*x, mu).unwrap() - x).abs() > 1e-9).collect();
    assert_eq!(cycle.len(), 2, "{roots:?}");
    let (p, q) = (cycle[0], cycle[1]);
    assert!((s.eval(p, mu).unwrap() - q).abs() < 1e-12);
    assert!((s.eval(q, mu).unwrap() - p).abs() < 1e-12);
    // Closed form of the logistic 2-cycle at r = 3 + mu, shifted by 1 - 1/r.
    let r = 3.0 + mu;
    let half = ((r + 1.0) * (r - 3.0)).sqrt() / (2.0 * r);
    let centre = (r + 1.0) / (2.0 * r) - (1.0 - 1.0 / r);
    assert!((p - (centre - half)).abs() < 1e-12 && (q - (centre + half)).abs() < 1e-12, "{p} {q}");
}
