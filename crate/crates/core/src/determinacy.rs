//! Classifiers for q-moment (in)determinacy.
//!
//! Asymptotic conditions can only be observed on a finite window, so every classifier
//! except the two closed-form threshold rules reports `finite-evidence` together with
//! the window it looked at, and falls back to `Inconclusive` rather than guessing.

use rayon::prelude::*;
use rug::{Float, Rational};
use serde::Serialize;

use crate::classical::ClassicalPdf;
use crate::error::{Error, Result};
use crate::lattice::{eval_lattice, QDensity};
use crate::moments::growth_rate;
use crate::precision::{format_rational, Decimal, PrecisionContext, QParam};
use crate::quadrature::integrate_range;

/// Width of the band around the critical growth rate, as a fraction of `ln(1/q)`.
pub const GROWTH_MARGIN: (u32, u32) = (1, 20);

/// Relative safety margin on `q0` for the classical bridge.
pub const BRIDGE_MARGIN: (u32, u32) = (1, 20);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Determinate,
    Indeterminate,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Criterion {
    #[serde(rename = "condition-B")]
    ConditionB,
    #[serde(rename = "condition-C")]
    ConditionC,
    #[serde(rename = "prop1-A")]
    Prop1A,
    #[serde(rename = "thm2-logconcave")]
    Thm2LogConcave,
    #[serde(rename = "thm3-mj")]
    Thm3Mj,
    #[serde(rename = "prop4-bridge")]
    Prop4Bridge,
    #[serde(rename = "erlang-rule")]
    ErlangRule,
    #[serde(rename = "qexp-rule")]
    QexpRule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofStrength {
    ExactRule,
    FiniteEvidence,
}

/// The index range a finite-evidence verdict examined.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Window {
    pub index: &'static str,
    pub lo: i64,
    pub hi: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Evidence {
    pub name: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub criterion: Criterion,
    pub proof_strength: ProofStrength,
    pub window: Option<Window>,
    pub evidence: Vec<Evidence>,
}

impl Verdict {
    fn finite(status: Status, criterion: Criterion, window: Window) -> Self {
        Self {
            status,
            criterion,
            proof_strength: ProofStrength::FiniteEvidence,
            window: Some(window),
            evidence: Vec::new(),
        }
    }

    fn exact(status: Status, criterion: Criterion) -> Self {
        Self {
            status,
            criterion,
            proof_strength: ProofStrength::ExactRule,
            window: None,
            evidence: Vec::new(),
        }
    }

    fn with(mut self, name: &str, value: impl Into<String>) -> Self {
        self.evidence.push(Evidence {
            name: name.to_string(),
            value: value.into(),
        });
        self
    }

    pub fn evidence_value(&self, name: &str) -> Option<&str> {
        self.evidence
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.value.as_str())
    }
}

fn require_window(big_j: u32) -> Result<()> {
    if big_j < 10 {
        return Err(Error::InvalidParameter(format!(
            "window J must be at least 10, got {big_j}"
        )));
    }
    Ok(())
}

/// `r_j = f(q^{-mj}) / q^{mj(j+1)/2}` for `j = 0..=J`.
fn ratios(f: &QDensity, m: u32, big_j: u32, ctx: &PrecisionContext) -> Result<Vec<Float>> {
    let q = f.q();
    let m = i64::from(m);
    (0..=i64::from(big_j))
        .map(|j| Ok(eval_lattice(f, -m * j, ctx)? / q.pow(m * j * (j + 1) / 2, ctx)))
        .collect()
}

fn min_of(xs: &[Float]) -> Float {
    xs.iter()
        .skip(1)
        .fold(xs[0].clone(), |a, b| if *b < a { b.clone() } else { a })
}

/// Condition (B): `f(q^{-j}) = o(q^{j(j+1)/2})`, observed as a strictly decreasing ratio
/// over the last `J/2` points ending below `10^(-digits/4)`.
pub fn check_condition_b(f: &QDensity, big_j: u32, ctx: &PrecisionContext) -> Result<Verdict> {
    require_window(big_j)?;
    let r = ratios(f, 1, big_j, ctx)?;
    let start = (big_j - big_j / 2) as usize;
    let decreasing = r[start..]
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0].is_zero() && w[1].is_zero()));
    let last = &r[big_j as usize];
    let threshold = ctx.pow10(-(ctx.digits() as i32 / 4));
    let status = if decreasing && *last < threshold {
        Status::Determinate
    } else {
        Status::Inconclusive
    };
    let window = Window {
        index: "j",
        lo: 0,
        hi: i64::from(big_j),
    };
    Ok(Verdict::finite(status, Criterion::ConditionB, window)
        .with("r_J", ctx.format(last))
        .with("threshold", ctx.format(&threshold))
        .with("strictly_decreasing_tail", decreasing.to_string()))
}

fn lower_bound_verdict(
    f: &QDensity,
    m: u32,
    big_j: u32,
    criterion: Criterion,
    ctx: &PrecisionContext,
) -> Result<Verdict> {
    require_window(big_j)?;
    let r = ratios(f, m, big_j, ctx)?;
    let half = (big_j / 2) as usize;
    let c_hat = min_of(&r);
    let first_min = min_of(&r[..half]);
    let last_min = min_of(&r[big_j as usize - half..]);
    let half_c = Float::with_val(ctx.prec(), &c_hat / 2u32);
    let bounded = last_min >= half_c;
    let no_trend = last_min >= Float::with_val(ctx.prec(), &first_min * 0.5f64);
    let status = if c_hat > 0 && bounded && no_trend {
        Status::Indeterminate
    } else {
        Status::Inconclusive
    };
    let window = Window {
        index: "j",
        lo: 0,
        hi: i64::from(big_j),
    };
    Ok(Verdict::finite(status, criterion, window)
        .with("m", m.to_string())
        .with("C_hat", ctx.format(&c_hat))
        .with("first_half_min", ctx.format(&first_min))
        .with("last_half_min", ctx.format(&last_min)))
}

/// Condition (C): `f(q^{-j}) ≥ C q^{j(j+1)/2}` with a stable positive lower bound.
pub fn check_condition_c(f: &QDensity, big_j: u32, ctx: &PrecisionContext) -> Result<Verdict> {
    lower_bound_verdict(f, 1, big_j, Criterion::ConditionC, ctx)
}

/// Condition (mj): `f(q^{-mj}) ≥ C q^{mj(j+1)/2}` on the sublattice of step `m`.
pub fn check_thm3_mj(f: &QDensity, m: u32, big_j: u32, ctx: &PrecisionContext) -> Result<Verdict> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    lower_bound_verdict(f, m, big_j, Criterion::Thm3Mj, ctx)
}

fn growth_band(q: &QParam, ctx: &PrecisionContext) -> (Float, Float) {
    let ln_inv = q.ln_inv(ctx);
    let critical = Float::with_val(ctx.prec(), &ln_inv / 2u32);
    let margin = ln_inv * Rational::from(GROWTH_MARGIN);
    (critical, margin)
}

/// Growth below `ln(1/q)/2` (outside the margin band) is evidence of determinacy.
pub fn classify_prop1(f: &QDensity, n_max: u32, ctx: &PrecisionContext) -> Result<Verdict> {
    let g = growth_rate(f, n_max, ctx)?;
    let (critical, margin) = growth_band(f.q(), ctx);
    let status = if g.a_hat < Float::with_val(ctx.prec(), &critical - &margin) {
        Status::Determinate
    } else {
        Status::Inconclusive
    };
    let window = Window {
        index: "n",
        lo: i64::from(n_max / 2),
        hi: i64::from(n_max),
    };
    Ok(Verdict::finite(status, Criterion::Prop1A, window)
        .with("A_hat", ctx.format(&g.a_hat))
        .with("critical", ctx.format(&critical))
        .with("margin", ctx.format(&margin)))
}

/// Every `j ∈ 0..=J` where `f(q^{-j-1}) f(q^{-j+1}) ≤ f(q^{-j})²` fails.
pub fn log_concavity_violations(
    f: &QDensity,
    big_j: u32,
    ctx: &PrecisionContext,
) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    let slack = Float::with_val(ctx.prec(), ctx.tol() * 4u32) + 1u32;
    for j in 0..=i64::from(big_j) {
        let left = eval_lattice(f, -j + 1, ctx)?;
        let mid = eval_lattice(f, -j, ctx)?;
        let right = eval_lattice(f, -j - 1, ctx)?;
        let lhs = left * right;
        let rhs = Float::with_val(ctx.prec(), mid.square_ref()) * &slack;
        if lhs > rhs {
            out.push(j);
        }
    }
    Ok(out)
}

/// Log-concave lattice values with growth above `ln(1/q)/2` (outside the margin band)
/// are evidence of indeterminacy.
pub fn classify_thm2(
    f: &QDensity,
    n_max: u32,
    big_j: u32,
    ctx: &PrecisionContext,
) -> Result<Verdict> {
    let violations = log_concavity_violations(f, big_j, ctx)?;
    let g = growth_rate(f, n_max, ctx)?;
    let (critical, margin) = growth_band(f.q(), ctx);
    let above = g.a_hat > Float::with_val(ctx.prec(), &critical + &margin);
    let status = if violations.is_empty() && above {
        Status::Indeterminate
    } else {
        Status::Inconclusive
    };
    let window = Window {
        index: "n",
        lo: i64::from(n_max / 2),
        hi: i64::from(n_max),
    };
    let mut v = Verdict::finite(status, Criterion::Thm2LogConcave, window)
        .with("A_hat", ctx.format(&g.a_hat))
        .with("critical", ctx.format(&critical))
        .with("margin", ctx.format(&margin))
        .with("log_concave_window_J", big_j.to_string());
    if !violations.is_empty() {
        let js: Vec<String> = violations.iter().map(i64::to_string).collect();
        v = v.with("log_concavity_violated_at_j", js.join(","));
    }
    Ok(v)
}

/// Result of the classical-to-q bridge.
#[derive(Clone, Debug)]
pub struct BridgeReport {
    pub l_hat: Float,
    pub q0: Float,
    pub all_q: bool,
    pub verdict: Verdict,
}

/// `L_hat = max_{n ∈ [n_max/2, n_max]} ln μ_n / n²` and `q0 = exp(-2 L_hat)`, from the
/// logarithms of the classical moments.
pub fn classify_prop4_log<M>(
    ln_mu: M,
    n_max: u32,
    q: &QParam,
    ctx: &PrecisionContext,
) -> Result<BridgeReport>
where
    M: Fn(u32) -> Result<Float> + Sync,
{
    if n_max < 8 {
        return Err(Error::InvalidParameter(format!(
            "bridge window needs n_max ≥ 8, got {n_max}"
        )));
    }
    let lo = n_max / 2;
    let ratios: Vec<Float> = (lo..=n_max)
        .into_par_iter()
        .map(|n| Ok(ln_mu(n)? / (u64::from(n) * u64::from(n))))
        .collect::<Result<_>>()?;
    let l_hat = ratios
        .into_iter()
        .reduce(|a, b| a.max(&b))
        .expect("non-empty window");
    let all_q = l_hat <= 0;
    let q0 = if all_q {
        ctx.real(1)
    } else {
        Float::with_val(ctx.prec(), &l_hat * -2i32).exp()
    };
    let limit = Float::with_val(ctx.prec(), &q0 * (1 - Rational::from(BRIDGE_MARGIN)));
    let status = if all_q || q.value(ctx) < limit {
        Status::Determinate
    } else {
        Status::Inconclusive
    };
    let window = Window {
        index: "n",
        lo: i64::from(lo),
        hi: i64::from(n_max),
    };
    let verdict = Verdict::finite(status, Criterion::Prop4Bridge, window)
        .with("L_hat", ctx.format(&l_hat))
        .with("q0", ctx.format(&q0))
        .with("q", q.to_string())
        .with("determinate_for_all_q", all_q.to_string());
    Ok(BridgeReport {
        l_hat,
        q0,
        all_q,
        verdict,
    })
}

/// [`classify_prop4_log`] from the moments themselves.
pub fn classify_prop4<M>(
    mu: M,
    n_max: u32,
    q: &QParam,
    ctx: &PrecisionContext,
) -> Result<BridgeReport>
where
    M: Fn(u32) -> Result<Float> + Sync,
{
    classify_prop4_log(
        |n| {
            let m = mu(n)?;
            if m <= 0 {
                return Err(Error::Domain(format!("moment {n} is not positive")));
            }
            Ok(m.ln())
        },
        n_max,
        q,
        ctx,
    )
}

/// Erlang threshold as stated: indeterminate iff `q^r (1-q) λ ≤ 1`.
pub fn erlang_rule(lambda: &Decimal, r: u32, q: &QParam) -> Result<Verdict> {
    if !lambda.is_positive() || r == 0 {
        return Err(Error::InvalidParameter(format!(
            "erlang rule needs λ > 0 and r ≥ 1, got λ = {lambda}, r = {r}"
        )));
    }
    use rug::ops::Pow;
    let qr = Rational::from(q.exact().pow(r));
    let value = qr * Rational::from(1 - q.exact()) * lambda.exact();
    let status = if value <= 1 {
        Status::Indeterminate
    } else {
        Status::Determinate
    };
    Ok(Verdict::exact(status, Criterion::ErlangRule)
        .with("q^r(1-q)lambda", format_rational(&value, 40))
        .with("r", r.to_string()))
}

/// q-exponential threshold: determinate iff `λ(1-q) > 1`.
pub fn qexp_rule(lambda: &Decimal, q: &QParam) -> Result<Verdict> {
    if !lambda.is_positive() {
        return Err(Error::InvalidParameter(format!(
            "qexp rule needs λ > 0, got {lambda}"
        )));
    }
    let value = Rational::from(1 - q.exact()) * lambda.exact();
    let status = if value > 1 {
        Status::Determinate
    } else {
        Status::Indeterminate
    };
    Ok(
        Verdict::exact(status, Criterion::QexpRule)
            .with("lambda(1-q)", format_rational(&value, 40)),
    )
}

/// A grid point where the two closed-form rules at `r = 1` give different verdicts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleDisagreement {
    pub lambda: String,
    pub q: String,
    pub erlang: Status,
    pub qexp: Status,
}

/// Compares `erlang_rule(λ, 1, q)` with `qexp_rule(λ, q)` over a grid and lists every
/// disagreement.
pub fn rule_consistency(lambdas: &[Decimal], qs: &[QParam]) -> Result<Vec<RuleDisagreement>> {
    let mut out = Vec::new();
    for lambda in lambdas {
        for q in qs {
            let e = erlang_rule(lambda, 1, q)?.status;
            let x = qexp_rule(lambda, q)?.status;
            if e != x {
                out.push(RuleDisagreement {
                    lambda: lambda.to_string(),
                    q: q.to_string(),
                    erlang: e,
                    qexp: x,
                });
            }
        }
    }
    Ok(out)
}

/// Truncated Krein integral and the growth constant fitted on the same range.
#[derive(Clone, Debug)]
pub struct KreinResult {
    pub value: Float,
    pub c_fit: Float,
}

const KREIN_SAMPLES_PER_DECADE: u32 = 10;

/// `∫_{t0}^{T} -ln ρ(t²) / (1 + t²) dt` and `max -ln ρ(t²) / ln² t` over log-spaced sample
/// points in `(max(t0, 1), T]`.
pub fn krein_integral(
    rho: &ClassicalPdf,
    t0: &Float,
    big_t: &Float,
    ctx: &PrecisionContext,
) -> Result<KreinResult> {
    if *t0 <= 0 || t0 > big_t {
        return Err(Error::InvalidParameter(format!(
            "Krein range needs 0 < t0 ≤ T, got [{t0}, {big_t}]"
        )));
    }
    let integrand = |t: &Float| -> Result<Float> {
        let t2 = Float::with_val(ctx.prec(), t.square_ref());
        let l = rho.ln_pdf(&t2, ctx)?;
        Ok(-l / (t2 + 1u32))
    };
    let value = integrate_range(&integrand, t0, big_t, ctx)?;
    let c_fit = growth_constant(rho, t0, big_t, ctx)?;
    Ok(KreinResult { value, c_fit })
}

fn growth_constant(
    rho: &ClassicalPdf,
    lo: &Float,
    hi: &Float,
    ctx: &PrecisionContext,
) -> Result<Float> {
    let prec = ctx.prec();
    let start = Float::with_val(prec, lo.clone().max(&ctx.real(1)).log10());
    let end = Float::with_val(prec, hi.log10_ref());
    let mut best = ctx.real(0);
    if end <= start {
        return Ok(best);
    }
    let span = Float::with_val(prec, &end - &start);
    let count = ((span.to_f64() * f64::from(KREIN_SAMPLES_PER_DECADE)).ceil() as u32).max(1);
    for i in 1..=count {
        let e = Float::with_val(prec, &span * i) / count + &start;
        let t = ctx.real(10).pow_f(&e);
        let t2 = Float::with_val(prec, t.square_ref());
        let ln_t = t.ln();
        let c = -rho.ln_pdf(&t2, ctx)? / ln_t.square();
        if c > best {
            best = c;
        }
    }
    Ok(best)
}

trait PowF {
    fn pow_f(self, e: &Float) -> Float;
}

impl PowF for Float {
    fn pow_f(self, e: &Float) -> Float {
        use rug::ops::Pow;
        self.pow(e)
    }
}

/// Partial Krein integrals at a sequence of upper limits, with per-decade growth
/// constants and increment ratios.
#[derive(Clone, Debug)]
pub struct KreinEvidence {
    pub t0: Float,
    /// `(T, ∫_{t0}^{T})`.
    pub partials: Vec<(Float, Float)>,
    /// `I(T_{k+1}) - I(T_k)`.
    pub increments: Vec<Float>,
    /// `increment_k / increment_{k+1}`.
    pub shrink_ratios: Vec<Float>,
    /// Mean integrand over `[T_k, T_{k+1}]`, which tends to a positive constant when the
    /// integral diverges linearly.
    pub mean_integrand: Vec<Float>,
    /// `(T_k, T_{k+1}, c_fit on that range)`.
    pub c_fit_by_range: Vec<(Float, Float, Float)>,
    /// `(max - min) / max` of the per-range growth constants.
    pub c_fit_spread: Float,
}

impl KreinEvidence {
    /// Every increment is at least `factor` times the next.
    pub fn cauchy_like(&self, factor: f64) -> bool {
        !self.shrink_ratios.is_empty() && self.shrink_ratios.iter().all(|r| *r >= factor)
    }
}

pub fn krein_evidence(
    rho: &ClassicalPdf,
    t0: &Float,
    limits: &[Float],
    ctx: &PrecisionContext,
) -> Result<KreinEvidence> {
    let prec = ctx.prec();
    if limits.is_empty() {
        return Err(Error::InvalidParameter(
            "Krein evidence needs at least one upper limit".into(),
        ));
    }
    if limits.windows(2).any(|w| w[0] >= w[1]) || limits[0] < *t0 {
        return Err(Error::InvalidParameter(
            "Krein upper limits must increase from t0".into(),
        ));
    }
    let first = krein_integral(rho, t0, &limits[0], ctx)?;
    let mut partials = vec![(limits[0].clone(), first.value.clone())];
    let mut increments = Vec::new();
    let mut mean_integrand = Vec::new();
    let mut c_fit_by_range = Vec::new();
    for w in limits.windows(2) {
        let piece = krein_integral(rho, &w[0], &w[1], ctx)?;
        let prev = partials.last().expect("non-empty").1.clone();
        partials.push((w[1].clone(), Float::with_val(prec, &prev + &piece.value)));
        mean_integrand.push(Float::with_val(
            prec,
            &piece.value / Float::with_val(prec, &w[1] - &w[0]),
        ));
        increments.push(piece.value);
        c_fit_by_range.push((w[0].clone(), w[1].clone(), piece.c_fit));
    }
    let shrink_ratios = increments
        .windows(2)
        .map(|w| Float::with_val(prec, &w[0] / &w[1]))
        .collect();
    let c_fit_spread = if c_fit_by_range.is_empty() {
        ctx.real(0)
    } else {
        let cs: Vec<&Float> = c_fit_by_range.iter().map(|c| &c.2).collect();
        let max = cs
            .iter()
            .fold(ctx.real(0), |a, b| if **b > a { (*b).clone() } else { a });
        let min = cs
            .iter()
            .skip(1)
            .fold(cs[0].clone(), |a, b| if **b < a { (*b).clone() } else { a });
        if max.is_zero() {
            ctx.real(0)
        } else {
            (max.clone() - min) / max
        }
    };
    Ok(KreinEvidence {
        t0: t0.clone(),
        partials,
        increments,
        shrink_ratios,
        mean_integrand,
        c_fit_by_range,
        c_fit_spread,
    })
}
