//! Gauss-Legendre quadrature at working precision on logarithmic decades.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rug::float::Constant;
use rug::Float;

use crate::error::{Error, Result};
use crate::precision::PrecisionContext;
use crate::series::StopRule;

const MIN_ORDER: usize = 16;
const MAX_ORDER: usize = 256;
const MAX_BISECTIONS: u32 = 6;
const MAX_DECADES: i32 = 4000;

type Rule = Arc<(Vec<Float>, Vec<Float>)>;

static RULES: Mutex<Option<HashMap<(usize, u32), Rule>>> = Mutex::new(None);

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
fn gauss_legendre(n: usize, prec: u32) -> Rule {
    let key = (n, prec);
    {
        let guard = RULES.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(rule) = guard.as_ref().and_then(|m| m.get(&key)) {
            return rule.clone();
        }
    }
    let rule = Arc::new(compute_rule(n, prec));
    let mut guard = RULES.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .get_or_insert_with(HashMap::new)
        .insert(key, rule.clone());
    rule
}

fn compute_rule(n: usize, prec: u32) -> (Vec<Float>, Vec<Float>) {
    let work = prec + 32;
    let pi = Float::with_val(work, Constant::Pi);
    let eps = Float::with_val(work, Float::i_exp(1, -(prec as i32) - 8));
    let mut nodes = vec![Float::new(prec); n];
    let mut weights = vec![Float::new(prec); n];
    for i in 0..n.div_ceil(2) {
        let guess = (i as f64 + 0.75) / (n as f64 + 0.5);
        let mut x = Float::with_val(work, &pi * guess).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, &x);
            let dx = Float::with_val(work, &p / &dp);
            x -= &dx;
            if dx.abs() < eps {
                break;
            }
        }
        let (_, dp) = legendre(n, &x);
        let x2 = Float::with_val(work, x.square_ref());
        let w = Float::with_val(work, 2u32) / (Float::with_val(work, 1 - x2) * dp.square());
        nodes[i] = Float::with_val(prec, &x);
        nodes[n - 1 - i] = Float::with_val(prec, -&x);
        weights[i] = Float::with_val(prec, &w);
        weights[n - 1 - i] = Float::with_val(prec, &w);
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: &Float) -> (Float, Float) {
    let prec = x.prec();
    let mut p0 = Float::with_val(prec, 1);
    let mut p1 = Float::with_val(prec, x);
    for k in 2..=n {
        let kf = k as u32;
        let a = Float::with_val(prec, x * &p1) * (2 * kf - 1);
        let b = Float::with_val(prec, &p0 * (kf - 1));
        let p2 = (a - b) / kf;
        p0 = std::mem::replace(&mut p1, p2);
    }
    let x2m1 = Float::with_val(prec, x.square_ref()) - 1u32;
    let d = (Float::with_val(prec, x * &p1) - &p0) * n as u32 / x2m1;
    (p1, d)
}

fn apply_rule<G>(g: &G, a: &Float, b: &Float, n: usize, ctx: &PrecisionContext) -> Result<Float>
where
    G: Fn(&Float) -> Result<Float>,
{
    let prec = ctx.prec();
    let rule = gauss_legendre(n, prec);
    let half = Float::with_val(prec, b - a) / 2u32;
    let mid = Float::with_val(prec, a + b) / 2u32;
    let mut acc = ctx.real(0);
    for (x, w) in rule.0.iter().zip(&rule.1) {
        let u = Float::with_val(prec, x * &half) + &mid;
        acc += g(&u)? * w;
    }
    Ok(acc * half)
}

/// `∫_a^b g`, doubling the rule order until two successive results agree to
/// `tol · max(|I|, scale)`, bisecting the interval when the largest order is not enough.
pub fn integrate<G>(
    g: &G,
    a: &Float,
    b: &Float,
    scale: &Float,
    ctx: &PrecisionContext,
) -> Result<Float>
where
    G: Fn(&Float) -> Result<Float>,
{
    integrate_depth(g, a, b, scale, ctx, 0)
}

fn integrate_depth<G>(
    g: &G,
    a: &Float,
    b: &Float,
    scale: &Float,
    ctx: &PrecisionContext,
    depth: u32,
) -> Result<Float>
where
    G: Fn(&Float) -> Result<Float>,
{
    let prec = ctx.prec();
    let mut order = MIN_ORDER;
    let mut prev = apply_rule(g, a, b, order, ctx)?;
    while order < MAX_ORDER {
        order *= 2;
        let next = apply_rule(g, a, b, order, ctx)?;
        let size = Float::with_val(prec, next.abs_ref()).max(scale);
        let bound = Float::with_val(prec, ctx.tol() * &size);
        if Float::with_val(prec, &next - &prev).abs() <= bound {
            return Ok(next);
        }
        prev = next;
    }
    if depth >= MAX_BISECTIONS {
        return Err(Error::NonConvergence {
            what: "Gauss-Legendre quadrature",
            terms: MAX_ORDER,
        });
    }
    let mid = Float::with_val(prec, a + b) / 2u32;
    let left = integrate_depth(g, a, &mid, scale, ctx, depth + 1)?;
    let right = integrate_depth(g, &mid, b, scale, ctx, depth + 1)?;
    Ok(left + right)
}

/// `∫_{10^k}^{10^{k+1}} h(t) dt` computed in `u = ln t`.
fn decade<H>(h: &H, k: i32, scale: &Float, ctx: &PrecisionContext) -> Result<Float>
where
    H: Fn(&Float) -> Result<Float>,
{
    let prec = ctx.prec();
    let ln10 = Float::with_val(prec, 10u32).ln();
    let a = Float::with_val(prec, &ln10 * k);
    let b = Float::with_val(prec, &ln10 * (k + 1));
    log_interval(h, &a, &b, scale, ctx)
}

fn log_interval<H>(
    h: &H,
    a: &Float,
    b: &Float,
    scale: &Float,
    ctx: &PrecisionContext,
) -> Result<Float>
where
    H: Fn(&Float) -> Result<Float>,
{
    let in_u = |u: &Float| -> Result<Float> {
        let t = Float::with_val(u.prec(), u.exp_ref());
        let v = h(&t)?;
        Ok(v * t)
    };
    integrate(&in_u, a, b, scale, ctx)
}

/// `∫_0^∞ h(t) dt` as a sum over decades `[10^k, 10^{k+1}]`, swept upward from `k = 0`
/// and downward from `k = -1` until each side's contributions stop under the series rule.
pub fn integrate_half_line<H>(h: &H, ctx: &PrecisionContext) -> Result<Float>
where
    H: Fn(&Float) -> Result<Float>,
{
    let prec = ctx.prec();
    let mut total = ctx.real(0);
    for (start, dir) in [(0i32, 1i32), (-1, -1)] {
        let mut rule = StopRule::new(ctx);
        let mut k = start;
        loop {
            let scale = Float::with_val(prec, total.abs_ref());
            let piece = decade(h, k, &scale, ctx)?;
            total += &piece;
            let reference = Float::with_val(prec, total.abs_ref());
            if rule.observe(
                &Float::with_val(prec, piece.abs_ref()),
                &reference,
                ctx.tol(),
            ) {
                break;
            }
            k += dir;
            if k.abs() > MAX_DECADES {
                return Err(Error::NonConvergence {
                    what: "decade quadrature",
                    terms: MAX_DECADES as usize,
                });
            }
        }
    }
    Ok(total)
}

/// `∫_a^b h(t) dt` for `0 < a ≤ b`, split at powers of ten.
pub fn integrate_range<H>(h: &H, a: &Float, b: &Float, ctx: &PrecisionContext) -> Result<Float>
where
    H: Fn(&Float) -> Result<Float>,
{
    if *a <= 0 || a > b {
        return Err(Error::Domain(format!(
            "quadrature range needs 0 < a ≤ b, got [{a}, {b}]"
        )));
    }
    let prec = ctx.prec();
    let ln10 = Float::with_val(prec, 10u32).ln();
    let ua = Float::with_val(prec, a.ln_ref());
    let ub = Float::with_val(prec, b.ln_ref());
    let mut total = ctx.real(0);
    let mut lo = ua.clone();
    while lo < ub {
        let next_k = Float::with_val(prec, &lo / &ln10).floor() + 1u32;
        let hi = Float::with_val(prec, &next_k * &ln10).min(&ub);
        let scale = Float::with_val(prec, total.abs_ref());
        total += log_interval(h, &lo, &hi, &scale, ctx)?;
        lo = hi;
    }
    Ok(total)
}
