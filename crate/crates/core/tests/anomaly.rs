use holostring::anomaly::*;
use holostring::exactlin::{int, rat, Rational};
use holostring::vertexalg::{FreeSystemSpec, Statistics};
use proptest::prelude::*;

fn pr(c: Rational, i: i64, j: i64, s: u32) -> ParamRational {
    ParamRational::with_sum_power(c, i, j, s)
}

fn table() -> Vec<(ParamRational, Rational)> {
    vec![
        (pr(int(1), 2, 1, 4), rat(1, 12)),
        (pr(int(1), 1, 1, 3), rat(3, 8)),
        (pr(int(1), 2, 0, 3), rat(1, 8)),
        (pr(int(1), 1, 0, 2), rat(1, 2)),
    ]
}

#[test]
fn t_integral_table() {
    for (f, want) in table() {
        let t = t_integral(&f);
        assert!(t.is_l_independent(), "{f}: {:?}", t.l_dependent);
        assert!(t.is_finite());
        assert_eq!(t.limit().unwrap(), want, "{f}");
    }
}

fn quad(f: &ParamRational, ell: f64, upper: f64) -> f64 {
    // split at a few decades so the peak near t ~ ℓ is resolved
    let cuts = [ell, 1e-2, 1e-1, upper];
    cuts.windows(2)
        .map(|w| quadrature::double_exponential::integrate(|t| f.eval(ell, t), w[0], w[1], 1e-12).integral)
        .sum()
}

#[test]
fn float_quadrature_matches_exact_antiderivative() {
    let (ell, upper) = (1e-3, 1.0);
    let mut integrands: Vec<ParamRational> = table().into_iter().map(|(f, _)| f).collect();
    for term in BracketTerm::ALL {
        let r = bracket_term(term).unwrap();
        integrands.push(r.integrand);
        integrands.extend(r.higher.into_iter().map(|(_, f)| f));
    }
    integrands.push(pr(int(3), -1, 2, 3));
    integrands.push(pr(int(1), 0, -2, 1));
    for f in integrands {
        let exact = t_integral(&f).exact_value(ell, upper);
        let numeric = quad(&f, ell, upper);
        let rel = (exact - numeric).abs() / numeric.abs().max(1e-300);
        assert!(rel < 1e-6, "{f}: exact {exact} vs quadrature {numeric}");
    }
}

#[test]
fn divergent_and_l_dependent_are_flagged() {
    let div = t_integral_limit(&ParamRational::monomial(int(1), 0, -2));
    assert!(matches!(div, Err(AnomalyError::Divergent(_))));
    let log = t_integral_limit(&ParamRational::monomial(int(1), 0, -1));
    assert!(matches!(log, Err(AnomalyError::Divergent(_))));
    let dep = t_integral(&ParamRational::constant(int(1)));
    assert!(!dep.is_l_independent());
    assert!(matches!(dep.limit(), Err(AnomalyError::LDependent(_))));
    // ∫ ℓ/(t(ℓ+t)) = log(2L/(L+ℓ)) → log 2
    let two = t_integral(&pr(int(1), 1, -1, 1));
    assert_eq!(two.log2_coefficient, int(1));
    assert!(matches!(two.limit(), Err(AnomalyError::Transcendental(_))));
}

#[test]
fn gaussian_moment_examples() {
    let tau = ParamRational::tau();
    let inv = tau.recip().unwrap();
    let m = gaussian_moment(0, 0, &tau);
    assert_eq!(m.four_pi_power, 1);
    assert_eq!(m.value, inv);
    assert!(gaussian_moment(1, 2, &tau).value.is_zero());
    let m3 = gaussian_moment(3, 3, &tau);
    assert_eq!(m3.value, inv.pow(4).scale(&int(6 * 64)));
}

fn polar_moment(a: u32, tau: f64) -> f64 {
    // ∫ r^{2a} e^{-τr²/4} 2π r dr
    let f = |r: f64| 2.0 * std::f64::consts::PI * r.powi(2 * a as i32 + 1) * (-tau * r * r / 4.0).exp();
    quadrature::double_exponential::integrate(f, 0.0, 60.0, 1e-12).integral
}

#[test]
fn gaussian_moment_against_polar_quadrature() {
    let one = ParamRational::constant(int(1));
    for a in 0..5 {
        let m = gaussian_moment(a, a, &one);
        let exact = m.value.eval(1.0, 1.0) * 4.0 * std::f64::consts::PI;
        let numeric = polar_moment(a, 1.0);
        assert!((exact - numeric).abs() / numeric < 1e-9, "a={a}: {exact} vs {numeric}");
    }
}

#[test]
fn kernel_derivatives_follow_product_rule() {
    let k = HeatKernelFactor::heat_kernel().d_w();
    // -∂_ξ (ℓ^{-1} e^{-|ξ|²/4ℓ}) = (ξ̄/4ℓ²) e^{…}
    assert_eq!(k.poly.len(), 1);
    assert_eq!(k.poly[&(0, 1)], ParamRational::monomial(rat(1, 4), -2, 0));
    let p = HeatKernelFactor::propagator().d_zbar();
    assert_eq!(p.poly[&(0, 0)], ParamRational::monomial(rat(1, 2), 0, -2));
    assert_eq!(p.poly[&(1, 1)], ParamRational::monomial(rat(-1, 8), 0, -3));
}

#[test]
fn bracket_terms_signed_values() {
    let want = [rat(1, 12), rat(-3, 8), rat(-1, 8), rat(1, 2)];
    for (t, w) in BracketTerm::ALL.into_iter().zip(want) {
        let r = bracket_term(t).unwrap();
        assert_eq!(r.limit, w, "{t:?}");
        assert!(!r.higher.is_empty());
    }
    let i = bracket_term(BracketTerm::I).unwrap();
    assert_eq!(i.integrand, pr(int(1), 2, 1, 4));
}

#[test]
fn wheel_examples() {
    let g = wheel_coefficient(WheelSpec {
        edge: Edge::BetaGamma { weight: 0 },
        terms: TermSelection::Only(BracketTerm::I),
    })
    .unwrap();
    assert_eq!(g, rat(1, 12));
    let full_g = wheel_coefficient(WheelSpec::full(Edge::BetaGamma { weight: 0 })).unwrap();
    assert_eq!(full_g, rat(1, 12));
    let f = wheel_coefficient(WheelSpec::full(Edge::Bc)).unwrap();
    assert_eq!(f, rat(-13, 12));
    assert_eq!(&f / &g, int(-13));
}

#[test]
fn wheel_ratio_matches_central_charges() {
    let f = wheel_coefficient(WheelSpec::full(Edge::Bc)).unwrap();
    let g = wheel_coefficient(WheelSpec::full(Edge::BetaGamma { weight: 0 })).unwrap();
    let c_bc = FreeSystemSpec::bc().central_charge();
    let c_bg = FreeSystemSpec::beta_gamma(1).central_charge();
    assert_eq!(&f / &g, c_bc / c_bg);
    for n in 0..=3u32 {
        let w = wheel_coefficient(WheelSpec::full(Edge::BetaGamma { weight: n })).unwrap();
        let ratio = &w / &g;
        let k = n as i64;
        assert_eq!(ratio, int(6 * k * k + 6 * k + 1), "n={n}");
        let c = FreeSystemSpec::weighted_pair(k, Statistics::Bosonic).central_charge();
        assert_eq!(ratio, c / int(2));
    }
}

#[test]
fn obstruction_examples() {
    assert_eq!(obstruction_coefficient(13).unwrap(), int(0));
    assert_eq!(obstruction_coefficient(1).unwrap(), int(-12));
    assert_eq!(obstruction_coefficient(26).unwrap(), int(13));
    assert!(obstruction_coefficient(0).is_err());
    let r = obstruction(13).unwrap();
    assert_eq!(r.total, int(0));
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["f"], "-13/12");
}

#[test]
fn tadpole_vanishes_and_diagnostic_does_not() {
    assert_eq!(tadpole_weight(), int(0));
    for n in 0..=3 {
        assert!(tadpole_diagonal(n, false).value.is_zero());
        assert_eq!(tadpole_weight_for(n).unwrap(), int(0));
    }
    let d = tadpole_diagonal(0, true);
    assert!(!d.value.is_zero());
    assert_eq!(d.four_pi_power, -1);
}

#[test]
fn wheel_report_json() {
    let r = wheel_report(WheelSpec::full(Edge::Bc)).unwrap();
    assert!(r.l_independent);
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["coefficient"], "-13/12");
    assert_eq!(v["terms"].as_array().unwrap().len(), 4);
    assert_eq!(v["terms"][0]["integrand"], "(1/1·ℓ^2·t)/(ℓ+t)^4");
}

proptest! {
    #[test]
    fn moments_vanish_off_diagonal(a in 0u32..6, b in 0u32..6) {
        let m = gaussian_moment(a, b, &ParamRational::tau());
        prop_assert_eq!(m.value.is_zero(), a != b);
    }

    #[test]
    fn param_rational_field_axioms(i in -2i64..3, j in -2i64..3, s in 0u32..4, c in 1i64..5) {
        let x = pr(int(c), i, j, s);
        let y = ParamRational::tau();
        prop_assert_eq!(x.mul(&y).mul(&y.recip().unwrap()), x.clone());
        prop_assert!(x.sub(&x).is_zero());
        let (l, t) = (0.7, 1.9);
        prop_assert!((x.add(&y).eval(l, t) - x.eval(l, t) - y.eval(l, t)).abs() < 1e-9);
    }

    #[test]
    fn t_integral_is_linear(a in -3i64..4, b in -3i64..4) {
        let (f, g) = (pr(int(1), 2, 1, 4), pr(int(1), 1, 0, 2));
        let h = f.scale(&int(a)).add(&g.scale(&int(b)));
        let lhs = t_integral_limit(&h).unwrap();
        prop_assert_eq!(lhs, int(a) * rat(1, 12) + int(b) * rat(1, 2));
    }
}
