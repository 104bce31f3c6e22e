//! Truncation rules shared by every infinite sum and product in the crate.
//!
//! A series stops once [`K_STOP`] consecutive terms are below `tol` times a reference
//! magnitude *and* the geometric extrapolation of the remaining tail is below the same
//! bound. The second condition keeps slowly decaying geometric tails (q close to 1)
//! from being cut while they still carry more than `tol` of the sum.

use std::collections::HashMap;

use rug::Float;

use crate::error::{Error, Result};
use crate::precision::PrecisionContext;

pub const K_STOP: usize = 8;

/// Running state of the stop rule for one side of a series.
pub(crate) struct StopRule {
    consecutive: usize,
    prev_abs: Option<Float>,
    tail: Float,
}

impl StopRule {
    pub(crate) fn new(ctx: &PrecisionContext) -> Self {
        Self {
            consecutive: 0,
            prev_abs: None,
            tail: ctx.real(0),
        }
    }

    /// Feeds the magnitude of the newest term; returns `true` once the side may stop.
    pub(crate) fn observe(&mut self, term_abs: &Float, reference: &Float, tol: &Float) -> bool {
        let bound = Float::with_val(term_abs.prec(), tol * reference);
        if *term_abs <= bound {
            self.consecutive += 1;
        } else {
            self.consecutive = 0;
        }
        self.tail = geometric_tail(term_abs, self.prev_abs.as_ref());
        self.prev_abs = Some(term_abs.clone());
        self.consecutive >= K_STOP && self.tail <= bound
    }

    /// Extrapolated magnitude of everything after the last observed term.
    pub(crate) fn tail(&self) -> &Float {
        &self.tail
    }
}

fn geometric_tail(term_abs: &Float, prev_abs: Option<&Float>) -> Float {
    let prec = term_abs.prec();
    if term_abs.is_zero() {
        return Float::with_val(prec, 0);
    }
    match prev_abs {
        Some(prev) if !prev.is_zero() => {
            let r = Float::with_val(prec, term_abs / prev);
            if r < 1 {
                let one_minus = Float::with_val(prec, 1 - &r);
                Float::with_val(prec, term_abs * &r) / one_minus
            } else {
                Float::with_val(prec, rug::float::Special::Infinity)
            }
        }
        _ => Float::with_val(prec, rug::float::Special::Infinity),
    }
}

/// What the stop rule compares terms against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Reference {
    /// The running partial sum (ordinary positive series).
    Partial,
    /// The largest term seen so far (alternating series that cancel to ~0).
    MaxTerm,
}

/// Result of a one-sided truncated series.
#[derive(Clone, Debug)]
pub struct SeriesSum {
    pub value: Float,
    pub terms: usize,
    pub tail_bound: Float,
    pub max_term: Float,
    pub partial_sums: Vec<Float>,
}

/// Sums `term(k)` for `k = 0, 1, 2, ...` until the stop rule fires.
pub(crate) fn sum_series<F>(
    mut term: F,
    reference: Reference,
    keep_partials: bool,
    ctx: &PrecisionContext,
    what: &'static str,
) -> Result<SeriesSum>
where
    F: FnMut(usize) -> Result<Float>,
{
    let prec = ctx.prec();
    let mut rule = StopRule::new(ctx);
    let mut sum = ctx.real(0);
    let mut max_term = ctx.real(0);
    let mut partials = Vec::new();
    for k in 0..ctx.max_terms() {
        let t = term(k)?;
        let abs = Float::with_val(prec, t.abs_ref());
        if abs > max_term {
            max_term.clone_from(&abs);
        }
        sum += &t;
        if keep_partials {
            partials.push(sum.clone());
        }
        let reference = match reference {
            Reference::Partial => Float::with_val(prec, sum.abs_ref()),
            Reference::MaxTerm => max_term.clone(),
        };
        if rule.observe(&abs, &reference, ctx.tol()) {
            return Ok(SeriesSum {
                value: sum,
                terms: k + 1,
                tail_bound: rule.tail().clone(),
                max_term,
                partial_sums: partials,
            });
        }
    }
    Err(Error::NonConvergence {
        what,
        terms: ctx.max_terms(),
    })
}

/// Multiplies `factor(k)` for `k = 0, 1, ...` until the factors are within `tol` of one
/// and the extrapolated remainder of `Σ|factor-1|` is too.
pub(crate) fn product_until<F>(
    mut factor: F,
    ctx: &PrecisionContext,
    what: &'static str,
) -> Result<Float>
where
    F: FnMut(usize) -> Result<Float>,
{
    let prec = ctx.prec();
    let mut product = ctx.real(1);
    let mut prev_dev: Option<Float> = None;
    let one = ctx.real(1);
    for k in 0..ctx.max_terms() {
        let f = factor(k)?;
        let dev = Float::with_val(prec, &f - &one).abs();
        product *= &f;
        if dev < *ctx.tol() {
            let tail = geometric_tail(&dev, prev_dev.as_ref());
            if tail < *ctx.tol() {
                return Ok(product);
            }
        }
        prev_dev = Some(dev);
    }
    Err(Error::NonConvergence {
        what,
        terms: ctx.max_terms(),
    })
}

/// A two-sided lattice sum `Σ_{j∈ℤ} term(j)`.
#[derive(Clone, Debug)]
pub struct BilateralSum {
    pub value: Float,
    pub terms_used: usize,
    pub tail_bound: Float,
    pub j_peak: i64,
    pub max_term: Float,
    /// Every evaluated term, ascending in `j`.
    pub terms: Vec<(i64, Float)>,
}

const PROBE_REACH: i64 = 64;

/// Sums a bilateral lattice series.
///
/// With `support = Some((lo, hi))` the terms are known to vanish outside `[lo, hi]` and
/// the finite sum is exact. Otherwise the largest term is located by probing
/// `0, ±1, ±2, ±4, …, ±64` and hill-climbing, and the sum expands outward from it, each
/// side under its own [`StopRule`] against the running total. The returned value is the
/// ascending-`j` sum of the retained terms.
pub(crate) fn bilateral_sum<F>(
    term: F,
    support: Option<(i64, i64)>,
    ctx: &PrecisionContext,
    what: &'static str,
) -> Result<BilateralSum>
where
    F: Fn(i64) -> Result<Float>,
{
    let prec = ctx.prec();
    if let Some((lo, hi)) = support {
        let mut terms = Vec::with_capacity((hi - lo + 1).max(0) as usize);
        for j in lo..=hi {
            terms.push((j, term(j)?));
        }
        return Ok(BilateralSum::from_terms(terms, ctx.real(0), ctx));
    }

    let mut memo: HashMap<i64, Float> = HashMap::new();
    let eval = |j: i64, memo: &mut HashMap<i64, Float>| -> Result<Float> {
        if let Some(v) = memo.get(&j) {
            return Ok(v.clone());
        }
        let v = term(j)?;
        memo.insert(j, v.clone());
        Ok(v)
    };

    // Locate the peak.
    let mut best_j = 0i64;
    let mut best = Float::with_val(prec, eval(0, &mut memo)?.abs_ref());
    let mut step = 1i64;
    while step <= PROBE_REACH {
        for j in [-step, step] {
            let a = Float::with_val(prec, eval(j, &mut memo)?.abs_ref());
            if a > best {
                best = a;
                best_j = j;
            }
        }
        step *= 2;
    }
    for dir in [-1i64, 1] {
        loop {
            let next = best_j + dir;
            let a = Float::with_val(prec, eval(next, &mut memo)?.abs_ref());
            if a > best {
                best = a;
                best_j = next;
            } else {
                break;
            }
        }
    }

    // Expand outward from the peak.
    let mut partial = eval(best_j, &mut memo)?;
    let mut kept = vec![(best_j, partial.clone())];
    let mut sides = [
        (best_j - 1, -1i64, StopRule::new(ctx), false, 0usize),
        (best_j + 1, 1i64, StopRule::new(ctx), false, 0usize),
    ];
    while sides.iter().any(|s| !s.3) {
        for side in sides.iter_mut().filter(|s| !s.3) {
            let (j, dir, rule, done, count) = side;
            let t = eval(*j, &mut memo)?;
            partial += &t;
            let abs = Float::with_val(prec, t.abs_ref());
            kept.push((*j, t));
            let reference = Float::with_val(prec, partial.abs_ref());
            *done = rule.observe(&abs, &reference, ctx.tol());
            *count += 1;
            *j += *dir;
            if !*done && *count >= ctx.max_terms() {
                return Err(Error::NonConvergence {
                    what,
                    terms: ctx.max_terms(),
                });
            }
        }
    }
    let tail = Float::with_val(prec, sides[0].2.tail() + sides[1].2.tail());
    kept.sort_by_key(|(j, _)| *j);
    let mut out = BilateralSum::from_terms(kept, tail, ctx);
    out.j_peak = best_j;
    Ok(out)
}

impl BilateralSum {
    /// Assembles the sum from terms already sorted by ascending `j`.
    pub(crate) fn from_terms(
        terms: Vec<(i64, Float)>,
        tail_bound: Float,
        ctx: &PrecisionContext,
    ) -> Self {
        finish(terms, tail_bound, ctx)
    }
}

fn finish(terms: Vec<(i64, Float)>, tail_bound: Float, ctx: &PrecisionContext) -> BilateralSum {
    let prec = ctx.prec();
    let mut value = ctx.real(0);
    let mut max_term = ctx.real(0);
    let mut j_peak = terms.first().map(|t| t.0).unwrap_or(0);
    for (j, t) in &terms {
        value += t;
        let a = Float::with_val(prec, t.abs_ref());
        if a > max_term {
            max_term = a;
            j_peak = *j;
        }
    }
    BilateralSum {
        value,
        terms_used: terms.len(),
        tail_bound,
        j_peak,
        max_term,
        terms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(30).unwrap()
    }

    #[test]
    fn geometric_series_reaches_tolerance() {
        let ctx = ctx();
        let half = ctx.real(0.5);
        let s = sum_series(
            |k| Ok(half.clone().pow(k as u32)),
            Reference::Partial,
            false,
            &ctx,
            "test",
        )
        .unwrap();
        let err = Float::with_val(ctx.prec(), &s.value - 2u32).abs();
        assert!(err < Float::with_val(ctx.prec(), ctx.tol() * 2u32));
    }

    #[test]
    fn zero_series_stops_immediately_after_window() {
        let ctx = ctx();
        let s = sum_series(|_| Ok(ctx.real(0)), Reference::Partial, false, &ctx, "zero").unwrap();
        assert!(s.value.is_zero());
        assert_eq!(s.terms, K_STOP);
    }

    #[test]
    fn constant_series_does_not_converge() {
        let ctx = ctx().with_max_terms(200).unwrap();
        let r = sum_series(
            |_| Ok(ctx.real(1)),
            Reference::Partial,
            false,
            &ctx,
            "const",
        );
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn bilateral_sum_of_gaussian_lattice_terms() {
        // Σ_j q^{j(j-1)/2} z^j around a peak far from zero, compared with a long
        // fixed-window sum.
        let ctx = ctx();
        let q = ctx.real(0.5);
        let term = |j: i64| -> Result<Float> {
            let e = (j * (j - 1)) / 2 - 30 * j;
            Ok(q.clone().pow(e))
        };
        let adaptive = bilateral_sum(term, None, &ctx, "gauss").unwrap();
        let fixed = bilateral_sum(term, Some((-200, 260)), &ctx, "gauss").unwrap();
        let rel = Float::with_val(ctx.prec(), &adaptive.value / &fixed.value) - 1u32;
        assert!(rel.abs() < Float::with_val(ctx.prec(), ctx.tol() * 4u32));
        assert!(adaptive.j_peak == 30 || adaptive.j_peak == 31);
    }

    #[test]
    fn products_converge_and_respect_cap() {
        let ctx = ctx();
        let q = ctx.real(0.5);
        // (q;q)_∞ at q = 1/2
        let p = product_until(|k| Ok(1 - q.clone().pow(k as u32 + 1)), &ctx, "poch").unwrap();
        let expect = Float::with_val(
            ctx.prec(),
            Float::parse("0.28878809508660242127889972192923078").unwrap(),
        );
        let rel = Float::with_val(ctx.prec(), &p / &expect) - 1u32;
        assert!(rel.abs() < Float::with_val(ctx.prec(), ctx.tol() * 2u32));
        let capped = ctx.clone().with_max_terms(64).unwrap();
        let r = product_until(|_| Ok(capped.real(2)), &capped, "divergent");
        assert!(r.is_err());
    }
}
