//! Invariants checked over generated and gridded inputs.

use proptest::prelude::*;
use qmoment::determinacy::{
    check_condition_b, check_condition_c, check_thm3_mj, classify_prop1, classify_thm2, erlang_rule, qexp_rule,
    Criterion, Status,
};
use qmoment::lattice::{
    cdf, cdf_lattice, eval_lattice, lattice_equiv, q_derivative, to_discrete, DensityForm, QDensity,
};
use qmoment::moments::{classical_moment, psi_eval, q_moment};
use qmoment::qcore::{euler_product, euler_series, improper_q_integral, jackson_integral, q_number};
use qmoment::witness::{alpha_max, build_witness, verify_moment_equality};
use qmoment::zoo::{hyper_exponential, q_erlang, q_exponential, s_function, s_lower_bound, NamedDistribution};
use qmoment::{Decimal, PrecisionContext, QParam};
use rug::ops::Pow;
use rug::{Float, Rational};

fn d(x: f64) -> Decimal {
    Decimal::from_f64(x).unwrap()
}

fn qp(x: f64) -> QParam {
    QParam::new(x).unwrap()
}

fn rel(a: &Float, b: &Float) -> Float {
    let diff = Float::with_val(a.prec(), a - b).abs();
    if b.is_zero() {
        diff
    } else {
        diff / Float::with_val(a.prec(), b.abs_ref())
    }
}

/// q in (0.2, 0.9) on a grid of hundredths, so that it is an exact short decimal.
fn q_strategy() -> impl Strategy<Value = QParam> {
    (20u32..=90).prop_map(|c| QParam::parse(&format!("0.{c:02}")).unwrap())
}

/// Lattice values `v_j` on `j ∈ [-len+1, 0]` (index 0 is `j = -len+1`).
fn table_strategy() -> impl Strategy<Value = (QParam, Vec<Rational>)> {
    (q_strategy(), prop::collection::vec(0u32..1000, 12..40)).prop_map(|(q, raw)| {
        let values = raw.into_iter().map(|v| Rational::from((v, 100u32))).collect();
        (q, values)
    })
}

fn zoo_all(q: &QParam) -> Vec<NamedDistribution> {
    vec![
        q_exponential(&d(1.0), q).unwrap(),
        q_erlang(&d(2.0), 3, q).unwrap(),
        hyper_exponential(&d(1.0), &d(1.0), &d(0.4), q).unwrap(),
    ]
}

#[test]
fn euler_identity_on_grid() {
    let ctx = PrecisionContext::new(40).unwrap();
    let bound = Float::with_val(ctx.prec(), ctx.tol() * 10u32);
    for q in [0.3, 0.5, 0.9] {
        for t in [-5.0, 0.1, 1.0, 10.0, 100.0] {
            let t = d(t).value(&ctx);
            let p = euler_product(&t, &qp(q), &ctx).unwrap();
            let s = euler_series(&t, &qp(q), &ctx).unwrap();
            assert!(rel(&s, &p) <= bound, "q = {q}, t = {t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn euler_identity_for_positive_t(q in q_strategy(), t in 0.0f64..500.0) {
        let ctx = PrecisionContext::new(30).unwrap();
        let t = ctx.real(t);
        let p = euler_product(&t, &q, &ctx).unwrap();
        let s = euler_series(&t, &q, &ctx).unwrap();
        prop_assert!(rel(&s, &p) <= Float::with_val(ctx.prec(), ctx.tol() * 10u32));
    }

    #[test]
    fn q_number_recovers_one_minus_q_power(q in q_strategy(), n in 0u64..200) {
        let ctx = PrecisionContext::new(40).unwrap();
        let lhs = q_number(n, &q, &ctx) * q.one_minus(&ctx);
        let rhs = Float::with_val(ctx.prec(), 1 - q.pow(n as i64, &ctx));
        let err = Float::with_val(ctx.prec(), &lhs - &rhs).abs();
        prop_assert!(err <= Float::with_val(ctx.prec(), ctx.tol() * rhs.abs()));
    }

    #[test]
    fn jackson_integral_is_linear(q in q_strategy(), alpha in -5.0f64..5.0, beta in -5.0f64..5.0, b in 0.5f64..20.0) {
        let ctx = PrecisionContext::new(30).unwrap();
        let (a_, b_) = (ctx.real(alpha), ctx.real(beta));
        let zero = ctx.real(0);
        let upper = ctx.real(b);
        let f = |t: &Float| Ok(Float::with_val(t.prec(), t.square_ref()));
        let g = |t: &Float| Ok(Float::with_val(t.prec(), -t).exp());
        let combined = jackson_integral(
            |t: &Float| Ok(Float::with_val(t.prec(), t.square_ref()) * &a_ + Float::with_val(t.prec(), -t).exp() * &b_),
            &zero, &upper, &q, &ctx).unwrap();
        let separate = jackson_integral(f, &zero, &upper, &q, &ctx).unwrap() * &a_
            + jackson_integral(g, &zero, &upper, &q, &ctx).unwrap() * &b_;
        let scale = Float::with_val(ctx.prec(), separate.abs_ref()).max(&ctx.real(1));
        let err = Float::with_val(ctx.prec(), &combined - &separate).abs();
        prop_assert!(err <= Float::with_val(ctx.prec(), ctx.tol() * 4u32) * scale);
    }

    #[test]
    fn extra_digits_barely_move_moments(q in q_strategy(), n in 0u32..8) {
        let digits = 30;
        let lo = PrecisionContext::new(digits).unwrap();
        let hi = PrecisionContext::new(digits + 20).unwrap();
        let f = q_exponential(&d(1.0), &q).unwrap().q_density;
        let a = q_moment(&f, n, &lo).unwrap().value;
        let b = q_moment(&f, n, &hi).unwrap().value;
        prop_assert!(rel(&Float::with_val(hi.prec(), &a), &b) < hi.pow10(-(digits as i32) + 12));
    }

    #[test]
    fn cdf_is_monotone_on_tables((q, values) in table_strategy()) {
        let ctx = PrecisionContext::new(30).unwrap();
        let j_min = -(values.len() as i64) + 1;
        let f = QDensity::table(q, j_min, values, false).unwrap();
        for j in j_min - 2..=2 {
            prop_assert!(cdf_lattice(&f, j, &ctx).unwrap() >= cdf_lattice(&f, j + 1, &ctx).unwrap());
        }
    }

    #[test]
    fn composite_equals_base_off_the_sublattice((q, values) in table_strategy(), m in 1u32..4, alpha in 0.01f64..1.0) {
        let ctx = PrecisionContext::new(30).unwrap();
        let j_min = -(values.len() as i64) + 1;
        let base = QDensity::table(q, j_min, values, false).unwrap();
        let g = QDensity::composite(base.clone(), m, ctx.real(alpha)).unwrap();
        for j in j_min - 5..=5 {
            let on_sublattice = j <= 0 && j % i64::from(m) == 0;
            if !on_sublattice {
                prop_assert_eq!(eval_lattice(&g, j, &ctx).unwrap(), eval_lattice(&base, j, &ctx).unwrap());
            }
        }
    }

    #[test]
    fn truncating_above_one_lowers_every_moment((q, values) in table_strategy(), n in 0u32..10) {
        let ctx = PrecisionContext::new(30).unwrap();
        let j_min = -(values.len() as i64) + 1;
        let full = QDensity::table(q.clone(), j_min, values.clone(), false).unwrap();
        // keep only t ≤ 1, that is j ≥ 0
        let kept = QDensity::table(q, 0, vec![values.last().unwrap().clone()], false).unwrap();
        prop_assert!(q_moment(&kept, n, &ctx).unwrap().value <= q_moment(&full, n, &ctx).unwrap().value);
    }

    #[test]
    fn m_one_lower_bound_is_condition_c((q, values) in table_strategy()) {
        let ctx = PrecisionContext::new(30).unwrap();
        let j_min = -(values.len() as i64) + 1;
        let f = QDensity::table(q, j_min, values, false).unwrap();
        prop_assert_eq!(
            check_thm3_mj(&f, 1, 10, &ctx).unwrap().status,
            check_condition_c(&f, 10, &ctx).unwrap().status
        );
    }

    #[test]
    fn growth_classifiers_never_both_fire((q, values) in table_strategy()) {
        let ctx = PrecisionContext::new(30).unwrap();
        let j_min = -(values.len() as i64) + 1;
        let f = QDensity::table(q, j_min, values, false).unwrap();
        let p1 = classify_prop1(&f, 12, &ctx).unwrap().status;
        let t2 = classify_thm2(&f, 12, 10, &ctx).unwrap().status;
        prop_assert!(!(p1 == Status::Determinate && t2 == Status::Indeterminate));
    }

    #[test]
    fn closed_form_rules_are_pure(lc in 1u32..500, q in q_strategy(), r in 1u32..8) {
        let lambda = Decimal::parse(&format!("{}.{:02}", lc / 100, lc % 100)).unwrap();
        prop_assert_eq!(erlang_rule(&lambda, r, &q).unwrap(), erlang_rule(&lambda, r, &q).unwrap());
        prop_assert_eq!(qexp_rule(&lambda, &q).unwrap(), qexp_rule(&lambda, &q).unwrap());
    }

    #[test]
    fn erlang_rule_is_monotone_in_stages(lc in 1u32..5000, q in q_strategy(), r in 1u32..12) {
        let lambda = Decimal::parse(&format!("{}.{:02}", lc / 100, lc % 100)).unwrap();
        if erlang_rule(&lambda, r, &q).unwrap().status == Status::Indeterminate {
            prop_assert_eq!(erlang_rule(&lambda, r + 1, &q).unwrap().status, Status::Indeterminate);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn witness_structure(m in 1u32..3, frac in 0.05f64..1.0) {
        let ctx = PrecisionContext::new(120).unwrap();
        let q = qp(0.5);
        let top = 40 * m + 4;
        let values: Vec<Rational> = (0..=top)
            .rev()
            .map(|j| if j % m == 0 {
                let k = j / m;
                Rational::from(q.exact().pow(m * k * (k + 1) / 2))
            } else {
                Rational::new()
            })
            .collect();
        let f = QDensity::table(q, -i64::from(top), values, false).unwrap();
        let a_max = alpha_max(&f, m, 40, &ctx).unwrap();
        let alpha = Float::with_val(ctx.prec(), &a_max * ctx.real(frac));
        let pair = build_witness(&f, m, &alpha, 40, &ctx).unwrap();
        prop_assert!(pair.distinct);
        prop_assert!(!lattice_equiv(&f, &pair.witness, (-5, 5), &ctx.pow10(-100), &ctx).unwrap());
        for j in pair.window.0..=pair.window.1 {
            let b = eval_lattice(&f, j, &ctx).unwrap();
            let g = eval_lattice(&pair.witness, j, &ctx).unwrap();
            prop_assert!(g >= Float::with_val(ctx.prec(), -ctx.tol()));
            let mi = i64::from(m);
            if j <= 0 && j % mi == 0 {
                let k = -j / mi;
                if k % 2 == 0 {
                    prop_assert!(g >= b);
                } else {
                    prop_assert!(g <= b);
                }
            } else {
                prop_assert_eq!(g, b);
            }
        }
        let pair = verify_moment_equality(pair, 8, &ctx).unwrap();
        for r in &pair.residuals {
            prop_assert!(r.series_residual < 1e-10 && r.direct_residual < 1e-10);
        }
    }
}

#[test]
fn zoo_lattice_values_round_trip_through_the_cdf() {
    let ctx = PrecisionContext::new(40).unwrap();
    for q in [qp(0.3), qp(0.7)] {
        for z in zoo_all(&q) {
            let f = &z.q_density;
            for j in -20..=20 {
                let t = q.pow(j, &ctx);
                let back = q_derivative(|x: &Float| cdf(f, x, &ctx), &t, &q, &ctx).unwrap();
                let direct = eval_lattice(f, j, &ctx).unwrap();
                // F(t)/(t(1-q)) is the size of the difference quotient's parts.
                let big_f = cdf(f, &t, &ctx).unwrap();
                let parts = Float::with_val(ctx.prec(), &big_f / Float::with_val(ctx.prec(), &t * q.one_minus(&ctx)));
                let scale = parts.max(&direct);
                let err = Float::with_val(ctx.prec(), &back - &direct).abs();
                assert!(err <= Float::with_val(ctx.prec(), ctx.tol() * 8u32) * scale, "{} j = {j}", z.name);
            }
        }
    }
}

#[test]
fn lattice_masses_match_the_improper_integral() {
    let ctx = PrecisionContext::new(40).unwrap();
    for z in zoo_all(&qp(0.5)) {
        let dist = to_discrete(&z.q_density, &ctx).unwrap();
        let sum = dist.pmf().iter().fold(ctx.real(0), |acc, (_, p)| acc + p);
        assert_eq!(&sum, dist.total());
        let DensityForm::Callable(f) = z.q_density.form() else { unreachable!() };
        let integral = improper_q_integral(|t| f(t, &ctx), z.q_density.q(), &ctx).unwrap();
        assert!(rel(&integral, &sum) <= Float::with_val(ctx.prec(), ctx.tol() * 4u32), "{}", z.name);
        assert!(Float::with_val(ctx.prec(), sum - 1u32).abs() <= ctx.normalization_tol());
    }
}

#[test]
fn normalized_densities_have_unit_zeroth_moment() {
    for digits in [20, 40] {
        let ctx = PrecisionContext::new(digits).unwrap();
        for z in zoo_all(&qp(0.6)) {
            let m0 = q_moment(&z.q_density, 0, &ctx).unwrap().value;
            assert!(Float::with_val(ctx.prec(), m0 - 1u32).abs() <= ctx.normalization_tol(), "{}", z.name);
        }
    }
}

#[test]
fn psi_identity_for_every_zoo_density() {
    let ctx = PrecisionContext::new(40).unwrap();
    for z in zoo_all(&qp(0.3)) {
        for n in 0..=10u32 {
            let m = q_moment(&z.q_density, n, &ctx).unwrap().value;
            let psi = psi_eval(&z.q_density, n + 1, &ctx).unwrap() * z.q_density.q().one_minus(&ctx);
            let err = Float::with_val(ctx.prec(), &m - &psi).abs();
            assert!(err <= Float::with_val(ctx.prec(), ctx.tol() * 4u32) * &m, "{} n = {n}", z.name);
        }
    }
}

#[test]
fn bridge_inequality_up_to_order_ten() {
    let ctx = PrecisionContext::new(30).unwrap();
    let slack = Float::with_val(ctx.prec(), ctx.tol() * 10u32) + 1u32;
    let q = qp(0.5);
    for z in [q_exponential(&d(1.0), &q).unwrap(), hyper_exponential(&d(1.0), &d(1.0), &d(0.4), &q).unwrap()] {
        let rho = z.classical_pdf.as_ref().unwrap();
        for n in [9u32, 10] {
            let mq = q_moment(&z.q_density, n, &ctx).unwrap().value;
            let bound = classical_moment(rho, n, &ctx).unwrap() * q.pow(-i64::from(n), &ctx) * &slack;
            assert!(mq <= bound, "{} n = {n}", z.name);
        }
    }
}

#[test]
fn lattice_classifiers_never_contradict_the_exponential_rule() {
    let ctx = PrecisionContext::new(30).unwrap();
    for lambda in [0.1, 0.5, 1.0, 2.0, 10.0] {
        for q in [0.3, 0.5, 0.8] {
            let z = q_exponential(&d(lambda), &qp(q)).unwrap();
            let rule = qexp_rule(&d(lambda), &qp(q)).unwrap().status;
            for v in [
                check_condition_b(&z.q_density, 40, &ctx).unwrap(),
                check_condition_c(&z.q_density, 40, &ctx).unwrap(),
            ] {
                let contradiction = matches!(
                    (v.status, rule),
                    (Status::Determinate, Status::Indeterminate) | (Status::Indeterminate, Status::Determinate)
                );
                assert!(!contradiction, "λ = {lambda}, q = {q}: {:?} vs rule {rule:?}", v.criterion);
            }
        }
    }
}

#[test]
fn known_verdicts_hold_for_the_closed_form_rules() {
    for lambda in [0.1, 0.5, 1.0, 2.0, 10.0] {
        for q in [0.3, 0.5, 0.8] {
            let q = qp(q);
            let mut dists = vec![q_exponential(&d(lambda), &q).unwrap()];
            for r in [1, 2, 5] {
                dists.push(q_erlang(&d(lambda), r, &q).unwrap());
            }
            for z in dists {
                for (criterion, expected) in &z.known_verdicts {
                    let got = match criterion {
                        Criterion::QexpRule => qexp_rule(&d(lambda), &q).unwrap().status,
                        Criterion::ErlangRule => {
                            let r: u32 = z.params["r"].parse().unwrap();
                            erlang_rule(&d(lambda), r, &q).unwrap().status
                        }
                        other => panic!("unexpected criterion {other:?}"),
                    };
                    assert_eq!(got, *expected, "{} {:?}", z.name, z.params);
                }
            }
        }
    }
}

#[test]
fn s_function_lower_bound_and_stable_constant() {
    let ctx = PrecisionContext::new(30).unwrap();
    for q in [qp(0.3), qp(0.5), qp(0.8)] {
        let mut per_decade = Vec::new();
        for k in 0..=60 {
            let a = ctx.real(10).pow(Float::with_val(ctx.prec(), k) / 10u32);
            let s = s_function(&a, &q, &ctx).unwrap();
            assert!(s >= s_lower_bound(&a, &q, &ctx), "q = {q}, a = {a}");
            if k % 10 == 0 && k > 0 {
                let ln1a = Float::with_val(ctx.prec(), &a + 1u32).ln();
                per_decade.push((s * &a / ln1a).to_f64());
            }
        }
        let last = &per_decade[per_decade.len() - 2..];
        assert!((last[0] / last[1] - 1.0).abs() < 0.05, "q = {q}: {per_decade:?}");
    }
}
