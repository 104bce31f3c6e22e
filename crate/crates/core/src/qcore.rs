//! q-series primitives: q-numbers, shifted factorials, `e_q`, both sides of Euler's
//! product/series identity, its two-sided growth estimate, and Jackson integrals.

use rug::Float;

use crate::error::{Error, Result};
use crate::precision::{PrecisionContext, QParam};
use crate::series::{bilateral_sum, product_until, sum_series, BilateralSum, Reference};

pub use crate::special::log_gamma;

/// `[n]_q = (1 - q^n) / (1 - q) = 1 + q + … + q^{n-1}`.
pub fn q_number(n: u64, q: &QParam, ctx: &PrecisionContext) -> Float {
    if n == 0 {
        return ctx.real(0);
    }
    let qn = q.pow(n as i64, ctx);
    Float::with_val(ctx.prec(), 1 - qn) / q.one_minus(ctx)
}

/// `[n]_q! = [1]_q [2]_q … [n]_q`, with `[0]_q! = 1`.
pub fn q_factorial(n: u64, q: &QParam, ctx: &PrecisionContext) -> Float {
    (1..=n).fold(ctx.real(1), |acc, k| acc * q_number(k, q, ctx))
}

/// Length of a shifted factorial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PochhammerOrder {
    Finite(u64),
    Infinite,
}

/// `(a; q)_j = ∏_{s<j} (1 - a q^s)`; the infinite product stops once the factors are
/// within `tol` of one.
pub fn q_pochhammer(
    a: &Float,
    q: &QParam,
    order: PochhammerOrder,
    ctx: &PrecisionContext,
) -> Result<Float> {
    let qv = q.value(ctx);
    let mut aq = Float::with_val(ctx.prec(), a);
    match order {
        PochhammerOrder::Finite(j) => {
            let mut p = ctx.real(1);
            for _ in 0..j {
                p *= Float::with_val(ctx.prec(), 1 - &aq);
                aq *= &qv;
            }
            Ok(p)
        }
        PochhammerOrder::Infinite => product_until(
            |_| {
                let f = Float::with_val(ctx.prec(), 1 - &aq);
                aq *= &qv;
                Ok(f)
            },
            ctx,
            "q-Pochhammer product",
        ),
    }
}

/// `(q^m; q^m)_j`, the normaliser of the Euler coefficients.
pub(crate) fn q_power_pochhammer(m: u32, j: u64, q: &QParam, ctx: &PrecisionContext) -> Float {
    let qm = q.pow(i64::from(m), ctx);
    let mut p = ctx.real(1);
    let mut power = qm.clone();
    for _ in 0..j {
        p *= Float::with_val(ctx.prec(), 1 - &power);
        power *= &qm;
    }
    p
}

/// The q-exponential `e_q(t) = ∏_{j≥0} (1 - t(1-q) q^j)^{-1}`.
///
/// A factor within `tol²` of zero is reported as [`Error::Pole`].
pub fn e_q(t: &Float, q: &QParam, ctx: &PrecisionContext) -> Result<Float> {
    let prec = ctx.prec();
    let qv = q.value(ctx);
    let mut x = Float::with_val(prec, t * q.one_minus(ctx));
    let pole_tol = Float::with_val(prec, ctx.tol().square_ref());
    let denom = product_until(
        |k| {
            let f = Float::with_val(prec, 1 - &x);
            if Float::with_val(prec, f.abs_ref()) < pole_tol {
                return Err(Error::Pole { index: k });
            }
            x *= &qv;
            Ok(f)
        },
        ctx,
        "e_q product",
    )?;
    Ok(denom.recip())
}

/// Product side of Euler's identity, `∏_{j≥0} (1 + q^j t)`.
pub fn euler_product(t: &Float, q: &QParam, ctx: &PrecisionContext) -> Result<Float> {
    let prec = ctx.prec();
    let qv = q.value(ctx);
    let mut x = Float::with_val(prec, t);
    let mut hit_zero = false;
    let p = product_until(
        |_| {
            let f = Float::with_val(prec, 1 + &x);
            hit_zero |= f.is_zero();
            x *= &qv;
            Ok(f)
        },
        ctx,
        "Euler product",
    )?;
    Ok(if hit_zero { ctx.real(0) } else { p })
}

/// Series side of Euler's identity, `Σ_{j≥0} q^{j(j-1)/2} t^j / (q;q)_j`.
///
/// For negative `t` the terms alternate and cancel; the sum is then carried out with
/// extra digits covering the size of the largest term (estimated in double precision
/// first) and rounded back.
pub fn euler_series(t: &Float, q: &QParam, ctx: &PrecisionContext) -> Result<Float> {
    let extra = if *t < 0 {
        peak_log10_euler_term(t.to_f64(), q.to_f64())
            .max(0.0)
            .ceil() as u32
            + 5
    } else {
        0
    };
    let work = ctx.with_digits(ctx.digits() + extra)?;
    let prec = work.prec();
    let qv = q.value(&work);
    let tw = Float::with_val(prec, t);
    let mut term = work.real(1);
    let mut q_pow = work.real(1); // q^j
    let reference = if extra > 0 {
        Reference::MaxTerm
    } else {
        Reference::Partial
    };
    let s = sum_series(
        |j| {
            if j > 0 {
                // term_j = term_{j-1} · q^{j-1} t / (1 - q^j)
                let num = Float::with_val(prec, &q_pow * &tw);
                q_pow *= &qv;
                let den = Float::with_val(prec, 1 - &q_pow);
                term *= num;
                term /= den;
            }
            Ok(term.clone())
        },
        reference,
        false,
        &work,
        "Euler series",
    )?;
    Ok(Float::with_val(ctx.prec(), &s.value))
}

fn peak_log10_euler_term(t: f64, q: f64) -> f64 {
    let mut log_term = 0.0f64;
    let mut best = 0.0f64;
    let lt = t.abs().ln();
    let lq = q.ln();
    let mut qj = 1.0f64; // q^j
    for j in 0..100_000u32 {
        // log term_{j+1} = log term_j + j ln q + ln|t| - ln(1 - q^{j+1})
        let next_qj = qj * q;
        log_term += f64::from(j) * lq + lt - (1.0 - next_qj).ln();
        qj = next_qj;
        best = best.max(log_term);
        if log_term < best - 50.0 {
            break;
        }
    }
    best / std::f64::consts::LN_10
}

/// Central function of the two-sided estimate of `∏(1 + q^j t)`:
/// `exp{ ln²t / (2 ln(1/q)) + (ln t)/2 }`, for `t ≥ 1`.
pub fn zeng_estimate(t: &Float, q: &QParam, ctx: &PrecisionContext) -> Result<Float> {
    if *t < 1 {
        return Err(Error::Domain(format!("zeng_estimate needs t ≥ 1, got {t}")));
    }
    let prec = ctx.prec();
    let ln_t = Float::with_val(prec, t.ln_ref());
    let quad = Float::with_val(prec, ln_t.square_ref()) / (2u32 * q.ln_inv(ctx));
    Ok((quad + ln_t / 2u32).exp())
}

/// Jackson integral `∫_a^b f d_q t` with `∫_0^x f d_q t = x(1-q) Σ_{j≥0} f(x q^j) q^j`.
pub fn jackson_integral<F>(
    f: F,
    a: &Float,
    b: &Float,
    q: &QParam,
    ctx: &PrecisionContext,
) -> Result<Float>
where
    F: Fn(&Float) -> Result<Float>,
{
    if *a < 0 || a > b {
        return Err(Error::Domain(format!(
            "Jackson integral needs 0 ≤ a ≤ b, got a = {a}, b = {b}"
        )));
    }
    if a == b {
        return Ok(ctx.real(0));
    }
    let upper = jackson_from_zero(&f, b, q, ctx)?;
    let lower = jackson_from_zero(&f, a, q, ctx)?;
    Ok(upper - lower)
}

pub(crate) fn jackson_from_zero<F>(
    f: &F,
    x: &Float,
    q: &QParam,
    ctx: &PrecisionContext,
) -> Result<Float>
where
    F: Fn(&Float) -> Result<Float>,
{
    if x.is_zero() {
        return Ok(ctx.real(0));
    }
    let prec = ctx.prec();
    let qv = q.value(ctx);
    let mut point = Float::with_val(prec, x);
    let mut weight = ctx.real(1);
    let s = sum_series(
        |k| {
            if k > 0 {
                point *= &qv;
                weight *= &qv;
            }
            Ok(f(&point)? * &weight)
        },
        Reference::Partial,
        false,
        ctx,
        "Jackson integral",
    )?;
    Ok(s.value * x * q.one_minus(ctx))
}

/// Improper Jackson integral `∫_0^∞ f d_q t = (1-q) Σ_{j∈ℤ} f(q^j) q^j`.
pub fn improper_q_integral<F>(f: F, q: &QParam, ctx: &PrecisionContext) -> Result<Float>
where
    F: Fn(&Float) -> Result<Float>,
{
    Ok(improper_q_sum(|j| f(&q.pow(j, ctx)), q, None, ctx)?.value)
}

/// Bilateral lattice sum of `(1-q) f(q^j) q^j`, where `lattice_value(j) = f(q^j)`.
pub(crate) fn improper_q_sum<F>(
    lattice_value: F,
    q: &QParam,
    support: Option<(i64, i64)>,
    ctx: &PrecisionContext,
) -> Result<BilateralSum>
where
    F: Fn(i64) -> Result<Float>,
{
    let one_minus = q.one_minus(ctx);
    bilateral_sum(
        |j| Ok(lattice_value(j)? * q.pow(j, ctx) * &one_minus),
        support,
        ctx,
        "improper q-integral",
    )
}

/// `ln(1/q) / 2`, the critical growth rate of `ln m_q(n) / n²`.
pub fn critical_growth(q: &QParam, ctx: &PrecisionContext) -> Float {
    q.ln_inv(ctx) / 2u32
}
