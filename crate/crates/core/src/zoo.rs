//! Named distributions with closed-form q-densities and, where available, classical
//! densities, distribution functions and moments.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rug::ops::Pow;
use rug::{Float, Rational};

use crate::classical::{ClassicalCdf, ClassicalPdf, RealFn};
use crate::determinacy::{Criterion, Status};
use crate::error::{Error, Result};
use crate::lattice::{q_density_of_classical, QDensity};
use crate::precision::{Decimal, PrecisionContext, QParam};
use crate::qcore::{e_q, q_factorial};
use crate::series::{sum_series, Reference};
use crate::special::{log_gamma, regularized_gamma};

/// Registry names accepted by [`build`].
pub const NAMES: [&str; 3] = ["q-exponential", "q-erlang", "hyper-exponential"];

/// `ln μ_n` in closed form.
pub type LnMoment = Arc<dyn Fn(u32, &PrecisionContext) -> Result<Float> + Send + Sync>;

#[derive(Clone)]
pub struct NamedDistribution {
    pub name: &'static str,
    pub params: BTreeMap<String, String>,
    pub q_density: QDensity,
    pub classical_pdf: Option<ClassicalPdf>,
    pub classical_cdf: Option<ClassicalCdf>,
    pub ln_moment: Option<LnMoment>,
    pub known_verdicts: Vec<(Criterion, Status)>,
    /// Classical (Stieltjes) moment determinacy, when known.
    pub classical_determinate: Option<bool>,
}

impl fmt::Debug for NamedDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NamedDistribution")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("q", &self.q_density.q())
            .field("known_verdicts", &self.known_verdicts)
            .finish()
    }
}

impl NamedDistribution {
    /// `μ_n` from the closed form.
    pub fn moment(&self, n: u32, ctx: &PrecisionContext) -> Option<Result<Float>> {
        self.ln_moment.as_ref().map(|m| m(n, ctx).map(Float::exp))
    }
}

fn require_positive(name: &str, x: &Decimal) -> Result<()> {
    if !x.is_positive() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {x}"
        )));
    }
    Ok(())
}

/// `S(a) = Σ_{j≥0} q^j / (1 + a q^j)`, for `a ≥ 0`.
pub fn s_function(a: &Float, q: &QParam, ctx: &PrecisionContext) -> Result<Float> {
    if *a < 0 {
        return Err(Error::Domain(format!("S(a) needs a ≥ 0, got {a}")));
    }
    let prec = ctx.prec();
    let qv = q.value(ctx);
    let mut qj = ctx.real(1);
    let s = sum_series(
        |_| {
            let t = Float::with_val(prec, &qj / (Float::with_val(prec, a * &qj) + 1u32));
            qj *= &qv;
            Ok(t)
        },
        Reference::Partial,
        false,
        ctx,
        "S(a)",
    )?;
    Ok(s.value)
}

/// `1/(1+a) + q/(1-q) · ln(1+a)/a`, a lower bound for [`s_function`] on `a > 0`.
pub fn s_lower_bound(a: &Float, q: &QParam, ctx: &PrecisionContext) -> Float {
    let prec = ctx.prec();
    let a1 = Float::with_val(prec, a + 1u32);
    let first = Float::with_val(prec, a1.recip_ref());
    let ratio = q.value(ctx) / q.one_minus(ctx);
    first + ratio * a1.ln() / a
}

/// `f(t) = λ e_q(-λt)`, with `F(t) = 1 - e_q(-λt)` and
/// `ρ(t) = λ(1-q) e_q(-λt) S(λ(1-q)t)`.
pub fn q_exponential(lambda: &Decimal, q: &QParam) -> Result<NamedDistribution> {
    require_positive("lambda", lambda)?;
    let l = lambda.clone();
    let qc = q.clone();
    let density: RealFn = Arc::new(move |t, ctx| {
        let x = Float::with_val(ctx.prec(), t * l.value(ctx));
        Ok(e_q(&-x, &qc, ctx)? * l.value(ctx))
    });
    let survival = {
        let (l, qc) = (lambda.clone(), q.clone());
        move |t: &Float, ctx: &PrecisionContext| {
            let x = Float::with_val(ctx.prec(), t * l.value(ctx));
            e_q(&-x, &qc, ctx)
        }
    };
    let surv: RealFn = Arc::new(survival.clone());
    let cdf: RealFn = Arc::new(move |t, ctx| Ok(1 - survival(t, ctx)?));
    let pdf: RealFn = {
        let (l, qc) = (lambda.clone(), q.clone());
        Arc::new(move |t, ctx| {
            let scale = l.value(ctx) * qc.one_minus(ctx);
            let e = e_q(&-Float::with_val(ctx.prec(), t * l.value(ctx)), &qc, ctx)?;
            let s = s_function(&Float::with_val(ctx.prec(), &scale * t), &qc, ctx)?;
            Ok(scale * e * s)
        })
    };
    let rule = if Rational::from(1 - q.exact()) * lambda.exact() > 1 {
        Status::Determinate
    } else {
        Status::Indeterminate
    };
    Ok(NamedDistribution {
        name: "q-exponential",
        params: BTreeMap::from([("lambda".to_string(), lambda.to_string())]),
        q_density: QDensity::callable(q.clone(), density, true),
        classical_pdf: Some(ClassicalPdf::new(pdf)),
        classical_cdf: Some(ClassicalCdf::with_survival(cdf, surv)),
        ln_moment: None,
        known_verdicts: vec![(Criterion::QexpRule, rule)],
        classical_determinate: Some(false),
    })
}

/// `f_r(t) = q^{r(r-1)/2} λ^r t^{r-1} e_q(-λt) / [r-1]_q!`.
pub fn q_erlang(lambda: &Decimal, r: u32, q: &QParam) -> Result<NamedDistribution> {
    require_positive("lambda", lambda)?;
    if r == 0 {
        return Err(Error::InvalidParameter(
            "r must be a positive integer".into(),
        ));
    }
    let l = lambda.clone();
    let qc = q.clone();
    let density: RealFn = Arc::new(move |t, ctx| {
        let prec = ctx.prec();
        let lv = l.value(ctx);
        let coeff = qc.pow(i64::from(r * (r - 1) / 2), ctx) * Float::with_val(prec, (&lv).pow(r))
            / q_factorial(u64::from(r - 1), &qc, ctx);
        let e = e_q(&-Float::with_val(prec, t * &lv), &qc, ctx)?;
        Ok(coeff * Float::with_val(prec, t.pow(r - 1)) * e)
    });
    let value = Rational::from(q.exact().pow(r)) * Rational::from(1 - q.exact()) * lambda.exact();
    let rule = if value <= 1 {
        Status::Indeterminate
    } else {
        Status::Determinate
    };
    Ok(NamedDistribution {
        name: "q-erlang",
        params: BTreeMap::from([
            ("lambda".to_string(), lambda.to_string()),
            ("r".to_string(), r.to_string()),
        ]),
        q_density: QDensity::callable(q.clone(), density, true),
        classical_pdf: None,
        classical_cdf: None,
        ln_moment: None,
        known_verdicts: vec![(Criterion::ErlangRule, rule)],
        classical_determinate: None,
    })
}

/// `ρ(t) = γ β^{-α/γ} / Γ(α/γ) · t^{α-1} exp(-t^γ/β)` with its q-density on the lattice of
/// `q`.
pub fn hyper_exponential(
    alpha: &Decimal,
    beta: &Decimal,
    gamma: &Decimal,
    q: &QParam,
) -> Result<NamedDistribution> {
    require_positive("alpha", alpha)?;
    require_positive("beta", beta)?;
    require_positive("gamma", gamma)?;
    let (a, b, g) = (alpha.clone(), beta.clone(), gamma.clone());
    let ln_pdf: RealFn = Arc::new(move |t, ctx| {
        let prec = ctx.prec();
        if *t <= 0 {
            return Err(Error::Domain(format!("density vanishes at t = {t}")));
        }
        let (av, bv, gv) = (a.value(ctx), b.value(ctx), g.value(ctx));
        let shape = Float::with_val(prec, &av / &gv);
        let ln_t = Float::with_val(prec, t.ln_ref());
        let tg = Float::with_val(prec, &ln_t * &gv).exp();
        let ln_norm = Float::with_val(prec, gv.ln_ref())
            - Float::with_val(prec, bv.ln_ref()) * &shape
            - log_gamma(&shape, ctx)?;
        Ok(ln_norm + (av - 1u32) * ln_t - tg / bv)
    });
    let incomplete = {
        let (a, b, g) = (alpha.clone(), beta.clone(), gamma.clone());
        move |t: &Float, ctx: &PrecisionContext| -> Result<(Float, Float)> {
            let prec = ctx.prec();
            if *t <= 0 {
                return Ok((ctx.real(0), ctx.real(1)));
            }
            let gv = g.value(ctx);
            let shape = Float::with_val(prec, a.value(ctx) / &gv);
            let x = (Float::with_val(prec, t.ln_ref()) * gv).exp() / b.value(ctx);
            regularized_gamma(&shape, &x, ctx)
        }
    };
    let lower = incomplete.clone();
    let cdf: RealFn = Arc::new(move |t, ctx| Ok(lower(t, ctx)?.0));
    let surv: RealFn = Arc::new(move |t, ctx| Ok(incomplete(t, ctx)?.1));
    let classical_cdf = ClassicalCdf::with_survival(cdf, surv);
    let ln_moment: LnMoment = {
        let (a, b, g) = (alpha.clone(), beta.clone(), gamma.clone());
        Arc::new(move |n, ctx| {
            let prec = ctx.prec();
            let (av, bv, gv) = (a.value(ctx), b.value(ctx), g.value(ctx));
            let shape = Float::with_val(prec, &av / &gv);
            let shifted = Float::with_val(prec, av + n) / &gv;
            Ok(
                Float::with_val(prec, bv.ln_ref()) * n / gv + log_gamma(&shifted, ctx)?
                    - log_gamma(&shape, ctx)?,
            )
        })
    };
    let classical_determinate = *gamma.exact() >= (1, 2);
    Ok(NamedDistribution {
        name: "hyper-exponential",
        params: BTreeMap::from([
            ("alpha".to_string(), alpha.to_string()),
            ("beta".to_string(), beta.to_string()),
            ("gamma".to_string(), gamma.to_string()),
        ]),
        q_density: q_density_of_classical(classical_cdf.clone(), q.clone()),
        classical_pdf: Some(ClassicalPdf::from_ln_pdf(ln_pdf)),
        classical_cdf: Some(classical_cdf),
        ln_moment: Some(ln_moment),
        known_verdicts: vec![(Criterion::Prop4Bridge, Status::Determinate)],
        classical_determinate: Some(classical_determinate),
    })
}

/// Parses `key=value` strings into a map; duplicate or malformed entries are rejected.
pub fn parse_params<S: AsRef<str>>(items: &[S]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for item in items {
        let item = item.as_ref();
        let (k, v) = item.split_once('=').ok_or_else(|| {
            Error::Parse(format!("parameter `{item}` is not of the form key=value"))
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse(format!("parameter `{item}` has an empty key")));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("parameter `{k}` given twice")));
        }
    }
    Ok(out)
}

fn take(params: &mut BTreeMap<String, String>, name: &str, key: &str) -> Result<String> {
    params
        .remove(key)
        .ok_or_else(|| Error::InvalidParameter(format!("{name} needs parameter `{key}`")))
}

fn take_decimal(params: &mut BTreeMap<String, String>, name: &str, key: &str) -> Result<Decimal> {
    Decimal::parse(&take(params, name, key)?)
}

/// Builds a registered distribution from `key=value` parameters.
pub fn build(
    name: &str,
    params: &BTreeMap<String, String>,
    q: &QParam,
) -> Result<NamedDistribution> {
    let mut p = params.clone();
    let dist = match name {
        "q-exponential" => q_exponential(&take_decimal(&mut p, name, "lambda")?, q)?,
        "q-erlang" => {
            let lambda = take_decimal(&mut p, name, "lambda")?;
            let r_text = take(&mut p, name, "r")?;
            let r = r_text.parse::<u32>().map_err(|_| {
                Error::Parse(format!("r must be a positive integer, got `{r_text}`"))
            })?;
            q_erlang(&lambda, r, q)?
        }
        "hyper-exponential" => {
            let alpha = take_decimal(&mut p, name, "alpha")?;
            let beta = take_decimal(&mut p, name, "beta")?;
            let gamma = take_decimal(&mut p, name, "gamma")?;
            hyper_exponential(&alpha, &beta, &gamma, q)?
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown distribution `{other}`; known: {}",
                NAMES.join(", ")
            )))
        }
    };
    if let Some(extra) = p.keys().next() {
        return Err(Error::InvalidParameter(format!(
            "{name} does not take parameter `{extra}`"
        )));
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::eval_lattice;
    use crate::moments::{classical_moment, q_moment};
    use crate::quadrature::integrate_half_line;

    fn d(x: f64) -> Decimal {
        Decimal::from_f64(x).unwrap()
    }

    #[test]
    fn q_exponential_density_at_zero_is_lambda() {
        let ctx = PrecisionContext::new(30).unwrap();
        let z = q_exponential(&d(3.0), &QParam::new(0.5).unwrap()).unwrap();
        let v = eval_lattice(&z.q_density, 200, &ctx).unwrap();
        assert!((v.to_f64() - 3.0).abs() < 1e-25);
    }

    #[test]
    fn q_exponential_is_normalized() {
        let ctx = PrecisionContext::new(50).unwrap();
        let z = q_exponential(&d(1.0), &QParam::new(0.5).unwrap()).unwrap();
        let m = q_moment(&z.q_density, 0, &ctx).unwrap().value;
        assert!(Float::with_val(ctx.prec(), m - 1u32).abs() < 1e-30);
    }

    #[test]
    fn q_exponential_pdf_integrates_to_one() {
        let ctx = PrecisionContext::new(30).unwrap();
        let z = q_exponential(&d(1.0), &QParam::new(0.5).unwrap()).unwrap();
        let rho = z.classical_pdf.unwrap();
        let total = integrate_half_line(&|t: &Float| rho.pdf(t, &ctx), &ctx).unwrap();
        assert!(Float::with_val(ctx.prec(), total - 1u32).abs() < 1e-20);
    }

    #[test]
    fn q_exponential_pdf_is_derivative_of_cdf() {
        let ctx = PrecisionContext::new(45).unwrap();
        let z = q_exponential(&d(1.0), &QParam::new(0.5).unwrap()).unwrap();
        let (rho, big_f) = (z.classical_pdf.unwrap(), z.classical_cdf.unwrap());
        let h = ctx.pow10(-16);
        for t in [0.1, 1.0, 10.0] {
            let t = ctx.real(t);
            let up = big_f
                .cdf(&Float::with_val(ctx.prec(), &t + &h), &ctx)
                .unwrap();
            let down = big_f
                .cdf(&Float::with_val(ctx.prec(), &t - &h), &ctx)
                .unwrap();
            let num = (up - down) / Float::with_val(ctx.prec(), &h * 2u32);
            let exact = rho.pdf(&t, &ctx).unwrap();
            let rel = ((num - &exact) / exact).abs();
            assert!(rel < ctx.pow10(-15), "t = {t}: {rel}");
        }
    }

    #[test]
    fn erlang_r1_is_q_exponential() {
        let ctx = PrecisionContext::new(40).unwrap();
        let q = QParam::new(0.3).unwrap();
        let e = q_erlang(&d(2.0), 1, &q).unwrap();
        let x = q_exponential(&d(2.0), &q).unwrap();
        for j in -10..10 {
            assert_eq!(
                eval_lattice(&e.q_density, j, &ctx).unwrap(),
                eval_lattice(&x.q_density, j, &ctx).unwrap()
            );
        }
    }

    #[test]
    fn erlang_is_normalized_and_vanishes_at_zero() {
        let ctx = PrecisionContext::new(50).unwrap();
        let z = q_erlang(&d(1.0), 3, &QParam::new(0.5).unwrap()).unwrap();
        let m = q_moment(&z.q_density, 0, &ctx).unwrap().value;
        assert!(Float::with_val(ctx.prec(), m - 1u32).abs() < 1e-25);
        assert!(eval_lattice(&z.q_density, 300, &ctx).unwrap() < 1e-80);
    }

    #[test]
    fn hyper_exponential_reduces_to_exponential() {
        let ctx = PrecisionContext::new(30).unwrap();
        let q = QParam::new(0.5).unwrap();
        let z = hyper_exponential(&d(1.0), &d(1.0), &d(1.0), &q).unwrap();
        assert_eq!(z.moment(0, &ctx).unwrap().unwrap(), 1);
        for (n, fact) in [(1u32, 1.0), (3, 6.0), (6, 720.0)] {
            let m = z.moment(n, &ctx).unwrap().unwrap();
            assert!((m.to_f64() / fact - 1.0).abs() < 1e-25);
        }
        let rho = z.classical_pdf.unwrap();
        let v = rho.pdf(&ctx.real(2), &ctx).unwrap();
        assert!((v.to_f64() - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(z.classical_determinate, Some(true));
    }

    #[test]
    fn hyper_exponential_quadrature_matches_closed_form() {
        let ctx = PrecisionContext::new(30).unwrap();
        let z = hyper_exponential(&d(1.0), &d(1.0), &d(0.4), &QParam::new(0.5).unwrap()).unwrap();
        let rho = z.classical_pdf.as_ref().unwrap();
        for n in [0u32, 2, 5] {
            let quad = classical_moment(rho, n, &ctx).unwrap();
            let exact = z.moment(n, &ctx).unwrap().unwrap();
            let rel = Float::with_val(ctx.prec(), &quad / &exact) - 1u32;
            assert!(rel.clone().abs() < 1e-20, "n = {n}: {rel}");
        }
        assert_eq!(z.classical_determinate, Some(false));
    }

    #[test]
    fn s_function_bound_holds() {
        let ctx = PrecisionContext::new(30).unwrap();
        let q = QParam::new(0.5).unwrap();
        for k in 0..=6 {
            let a = ctx.real(10).pow(k);
            let s = s_function(&a, &q, &ctx).unwrap();
            assert!(s >= s_lower_bound(&a, &q, &ctx));
        }
        assert_eq!(s_function(&ctx.real(0), &q, &ctx).unwrap().to_f64(), 2.0);
    }

    #[test]
    fn registry_parses_and_rejects() {
        let q = QParam::new(0.5).unwrap();
        let p = parse_params(&["lambda=1", "r=3"]).unwrap();
        assert_eq!(build("q-erlang", &p, &q).unwrap().name, "q-erlang");
        assert!(matches!(
            build("q-exponential", &p, &q),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            build("cauchy", &p, &q),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(parse_params(&["lambda"]), Err(Error::Parse(_))));
        assert!(matches!(
            parse_params(&["a=1", "a=2"]),
            Err(Error::Parse(_))
        ));
        let bad = parse_params(&["lambda=-1"]).unwrap();
        assert!(matches!(
            build("q-exponential", &bad, &q),
            Err(Error::InvalidParameter(_))
        ));
        let h = parse_params(&["alpha=1", "beta=1", "gamma=0.4"]).unwrap();
        assert_eq!(
            build("hyper-exponential", &h, &q).unwrap().params["gamma"],
            "0.4"
        );
    }
}
