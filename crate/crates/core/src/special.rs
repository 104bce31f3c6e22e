//! Log-gamma and the regularized incomplete gamma function at working precision.

use std::sync::Mutex;

use rug::float::Constant;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::precision::PrecisionContext;
use crate::series::{sum_series, Reference};

static BERNOULLI: Mutex<Vec<Rational>> = Mutex::new(Vec::new());

/// Bernoulli number `B_n` (with `B_1 = -1/2`), memoized.
pub fn bernoulli(n: usize) -> Rational {
    let mut table = BERNOULLI.lock().unwrap_or_else(|e| e.into_inner());
    if table.is_empty() {
        table.push(Rational::from(1));
    }
    while table.len() <= n {
        // B_m = -1/(m+1) Σ_{k<m} C(m+1, k) B_k
        let m = table.len();
        let mut acc = Rational::new();
        let mut binom = Integer::from(1);
        for (k, b) in table.iter().enumerate() {
            acc += Rational::from(&binom * b.numer()) / b.denom();
            binom *= (m + 1 - k) as u32;
            binom /= (k + 1) as u32;
        }
        table.push(-acc / Rational::from(m as u32 + 1));
    }
    table[n].clone()
}

/// `ln Γ(x)` for `x > 0`.
///
/// Shifts the argument up to `y ≥ (digits + 12) / 2` with the recurrence
/// `Γ(x) = Γ(x + N) / (x (x+1) … (x+N-1))` and sums the Stirling series there.
pub fn log_gamma(x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if *x <= 0 || x.is_nan() {
        return Err(Error::Domain(format!("log_gamma needs x > 0, got {x}")));
    }
    let prec = ctx.prec();
    let threshold = f64::from(ctx.digits() + 12) / 2.0;
    let mut y = Float::with_val(prec, x);
    let mut shift_product = ctx.real(1);
    if y < threshold {
        let n = (threshold - y.to_f64()).ceil() as u32;
        for _ in 0..n {
            shift_product *= &y;
            y += 1u32;
        }
    }
    let mut result = stirling(&y, ctx)?;
    if shift_product != 1 {
        result -= shift_product.ln();
    }
    Ok(result)
}

fn stirling(y: &Float, ctx: &PrecisionContext) -> Result<Float> {
    let prec = ctx.prec();
    let ln_y = Float::with_val(prec, y.ln_ref());
    let half_ln_2pi = {
        let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
        two_pi.ln() / 2u32
    };
    let mut base = Float::with_val(prec, y - 0.5f64) * &ln_y;
    base -= y;
    base += &half_ln_2pi;

    // Σ B_{2k} / (2k (2k-1) y^{2k-1}); asymptotic, so stop at full working precision
    // or at the smallest term, whichever comes first.
    let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32)));
    let y2 = Float::with_val(prec, y * y);
    let mut y_pow = Float::with_val(prec, y);
    let mut prev_abs: Option<Float> = None;
    let scale = Float::with_val(prec, base.abs_ref()).max(&ctx.real(1));
    for k in 1..ctx.max_terms() {
        let b = bernoulli(2 * k);
        let denom = Integer::from(2 * k) * Integer::from(2 * k - 1);
        let coeff = Float::with_val(prec, &b / Rational::from(denom));
        let term = coeff / &y_pow;
        let abs = Float::with_val(prec, term.abs_ref());
        if let Some(p) = &prev_abs {
            if abs > *p {
                break;
            }
        }
        base += &term;
        if abs < Float::with_val(prec, &eps * &scale) {
            return Ok(base);
        }
        prev_abs = Some(abs);
        y_pow *= &y2;
    }
    Ok(base)
}

/// Regularized incomplete gamma pair `(P(a,x), Q(a,x))`, `P + Q = 1`.
///
/// The power series gives `P` for `x < a + 1`; a Lentz continued fraction gives `Q`
/// otherwise. The complementary value is `1 -` the computed one, so whichever of the two
/// is small is always accurate to working precision.
pub fn regularized_gamma(a: &Float, x: &Float, ctx: &PrecisionContext) -> Result<(Float, Float)> {
    if *a <= 0 {
        return Err(Error::Domain(format!(
            "incomplete gamma needs a > 0, got {a}"
        )));
    }
    if *x < 0 {
        return Err(Error::Domain(format!(
            "incomplete gamma needs x ≥ 0, got {x}"
        )));
    }
    let prec = ctx.prec();
    if x.is_zero() {
        return Ok((ctx.real(0), ctx.real(1)));
    }
    let ln_x = Float::with_val(prec, x.ln_ref());
    if *x < Float::with_val(prec, a + 1u32) {
        // P = x^a e^{-x} / Γ(a+1) Σ_k x^k / ((a+1)…(a+k))
        let mut term = ctx.real(1);
        let s = sum_series(
            |k| {
                if k > 0 {
                    term *= x;
                    term /= Float::with_val(prec, a + k as u32);
                }
                Ok(term.clone())
            },
            Reference::Partial,
            false,
            ctx,
            "incomplete gamma series",
        )?;
        let a1 = Float::with_val(prec, a + 1u32);
        let log_pref = Float::with_val(prec, a * &ln_x) - x - log_gamma(&a1, ctx)?;
        let p = log_pref.exp() * s.value;
        let q = Float::with_val(prec, 1 - &p);
        Ok((p, q))
    } else {
        let cf = gamma_continued_fraction(a, x, ctx)?;
        let log_pref = Float::with_val(prec, a * &ln_x) - x - log_gamma(a, ctx)?;
        let q = log_pref.exp() * cf;
        let p = Float::with_val(prec, 1 - &q);
        Ok((p, q))
    }
}

fn gamma_continued_fraction(a: &Float, x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    let prec = ctx.prec();
    let tiny = Float::with_val(prec, Float::i_exp(1, -(4 * prec as i32)));
    let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32 - 8)));
    let mut b = Float::with_val(prec, x + 1u32) - a;
    let mut c = Float::with_val(prec, 1 / &tiny);
    let mut d = Float::with_val(prec, 1 / &b);
    let mut h = d.clone();
    for i in 1..ctx.max_terms() {
        let i_f = ctx.real(i as u32);
        let an = -Float::with_val(prec, &i_f * (Float::with_val(prec, &i_f - a)));
        b += 2u32;
        d = Float::with_val(prec, &an * &d) + &b;
        if Float::with_val(prec, d.abs_ref()) < tiny {
            d.clone_from(&tiny);
        }
        c = Float::with_val(prec, &an / &c) + &b;
        if Float::with_val(prec, c.abs_ref()) < tiny {
            c.clone_from(&tiny);
        }
        d.recip_mut();
        let delta = Float::with_val(prec, &d * &c);
        h *= &delta;
        if Float::with_val(prec, &delta - 1u32).abs() < eps {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence {
        what: "incomplete gamma continued fraction",
        terms: ctx.max_terms(),
    })
}

/// `Γ(x)` through [`log_gamma`], for `x > 0`.
pub fn gamma(x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    Ok(log_gamma(x, ctx)?.exp())
}
