//! q-moments, the generating function ψ, growth-rate estimates and classical moments.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::Float;

use crate::classical::ClassicalPdf;
use crate::error::{Error, Result};
use crate::lattice::{eval_lattice, lattice_terms, DensityForm, QDensity};
use crate::precision::PrecisionContext;
use crate::quadrature::integrate_half_line;
use crate::series::{sum_series, Reference};
use crate::witness::perturbation_series;

/// The perturbation part of a composite density's moment, reported both ways.
#[derive(Clone, Debug)]
pub struct PerturbationPart {
    /// `α (1-q) Σ_k c_k q^{-mk(n+1)}` summed term by term.
    pub series: Float,
    /// The same quantity from the product form, which has an exactly vanishing factor.
    pub product: Float,
    /// Largest term of the series, the scale of its cancellation.
    pub max_term: Float,
}

/// `m_q(n; f)` with its truncation diagnostics.
#[derive(Clone, Debug)]
pub struct QMomentReport {
    pub n: u32,
    pub value: Float,
    pub terms_used: usize,
    pub tail_bound: Float,
    pub j_peak: i64,
    pub perturbation: Option<PerturbationPart>,
}

/// `m_q(n; f) = (1-q) Σ_{j∈ℤ} f(q^j) q^{j(n+1)}`.
///
/// For a composite density the value is the base moment plus the perturbation series;
/// the product form of the same perturbation is attached in [`QMomentReport::perturbation`].
pub fn q_moment(f: &QDensity, n: u32, ctx: &PrecisionContext) -> Result<QMomentReport> {
    let sum = lattice_terms(f, n, ctx)?;
    check_terms_nonnegative(f, n, &sum.terms, ctx)?;
    match f.form() {
        DensityForm::Composite(c) => {
            let base = q_moment(c.base(), n, ctx)?;
            let pert = perturbation_series(c.m(), n, f.q(), ctx)?;
            let scale = Float::with_val(ctx.prec(), c.alpha()) * f.q().one_minus(ctx);
            let series = Float::with_val(ctx.prec(), &pert.series * &scale);
            let max_term = Float::with_val(ctx.prec(), &pert.max_term * scale.abs());
            let value = Float::with_val(ctx.prec(), &base.value + &series);
            Ok(QMomentReport {
                n,
                value,
                terms_used: sum.terms_used,
                tail_bound: sum.tail_bound,
                j_peak: sum.j_peak,
                perturbation: Some(PerturbationPart {
                    series,
                    product: pert.product,
                    max_term,
                }),
            })
        }
        _ => Ok(QMomentReport {
            n,
            value: sum.value,
            terms_used: sum.terms_used,
            tail_bound: sum.tail_bound,
            j_peak: sum.j_peak,
            perturbation: None,
        }),
    }
}

/// The same lattice terms summed in one ascending pass, without splitting off the
/// perturbation of a composite density.
pub fn q_moment_direct(f: &QDensity, n: u32, ctx: &PrecisionContext) -> Result<Float> {
    Ok(lattice_terms(f, n, ctx)?.value)
}

fn check_terms_nonnegative(
    f: &QDensity,
    n: u32,
    terms: &[(i64, Float)],
    ctx: &PrecisionContext,
) -> Result<()> {
    for (j, t) in terms {
        if *t < 0 {
            let weight = f.q().pow(j * (i64::from(n) + 1), ctx) * f.q().one_minus(ctx);
            let value = Float::with_val(ctx.prec(), t / &weight);
            if value < Float::with_val(ctx.prec(), -ctx.tol()) {
                return Err(Error::NegativeDensity {
                    j: *j,
                    value: ctx.format(&value),
                });
            }
        }
    }
    Ok(())
}

/// `ψ(q^{-k}) = Σ_{j∈ℤ} f(q^{-j}) q^{-kj}`, summed as the two one-sided series
/// `j ≥ 0` and `j < 0`.
pub fn psi_eval(f: &QDensity, k: u32, ctx: &PrecisionContext) -> Result<Float> {
    if k == 0 {
        return Err(Error::InvalidParameter("psi_eval needs k ≥ 1".into()));
    }
    let q = f.q();
    let k = i64::from(k);
    // lattice index i = -j
    let term = |i: i64| -> Result<Float> { Ok(eval_lattice(f, i, ctx)? * q.pow(i * k, ctx)) };
    let growing = match f.lower_support() {
        Some(lo) => finite_sum((lo.min(0)..=0).rev(), &term, ctx)?,
        None => {
            sum_series(
                |s| term(-(s as i64)),
                Reference::Partial,
                false,
                ctx,
                "ψ series",
            )?
            .value
        }
    };
    let decaying = match f.upper_support() {
        Some(hi) => finite_sum(1..=hi.max(0), &term, ctx)?,
        None => {
            sum_series(
                |s| term(s as i64 + 1),
                Reference::Partial,
                false,
                ctx,
                "ψ series",
            )?
            .value
        }
    };
    Ok(growing + decaying)
}

fn finite_sum<I, T>(range: I, term: &T, ctx: &PrecisionContext) -> Result<Float>
where
    I: Iterator<Item = i64>,
    T: Fn(i64) -> Result<Float>,
{
    let mut acc = ctx.real(0);
    for i in range {
        acc += term(i)?;
    }
    Ok(acc)
}

/// Samples of `a_n = ln m_q(n) / n²` and the tail maximum used as a limsup proxy.
#[derive(Clone, Debug)]
pub struct GrowthEstimate {
    pub samples: Vec<(u32, Float)>,
    pub a_hat: Float,
    pub n_used: u32,
}

/// `a_n` for `n = 1..=n_max`; `a_hat` is the maximum over `n ∈ [n_max/2, n_max]`.
/// Orders with vanishing moment are left out of the samples.
pub fn growth_rate(f: &QDensity, n_max: u32, ctx: &PrecisionContext) -> Result<GrowthEstimate> {
    let moments: Vec<Result<(u32, Float)>> = (1..=n_max)
        .into_par_iter()
        .map(|n| Ok((n, q_moment(f, n, ctx)?.value)))
        .collect();
    let mut values = Vec::with_capacity(moments.len());
    for m in moments {
        values.push(m?);
    }
    growth_from_values(values, n_max, ctx)
}

/// Same estimate from already computed `(n, μ_n)` pairs.
pub fn growth_from_values(
    values: Vec<(u32, Float)>,
    n_max: u32,
    ctx: &PrecisionContext,
) -> Result<GrowthEstimate> {
    if n_max < 8 {
        return Err(Error::InvalidParameter(format!(
            "growth window needs n_max ≥ 8, got {n_max}"
        )));
    }
    let samples: Vec<(u32, Float)> = values
        .into_iter()
        .filter(|(_, m)| *m > 0)
        .map(|(n, m)| (n, m.ln() / (u64::from(n) * u64::from(n))))
        .collect();
    let a_hat = samples
        .iter()
        .filter(|(n, _)| *n >= n_max / 2)
        .map(|(_, a)| a.clone())
        .reduce(|a, b| a.max(&b))
        .ok_or_else(|| {
            Error::Domain("no positive moments in the upper half of the window".into())
        })?;
    Ok(GrowthEstimate {
        samples,
        a_hat: ctx.real(&a_hat),
        n_used: n_max,
    })
}

/// `μ_n = ∫_0^∞ t^n ρ(t) dt` by decade quadrature.
pub fn classical_moment(rho: &ClassicalPdf, n: u32, ctx: &PrecisionContext) -> Result<Float> {
    let h = |t: &Float| -> Result<Float> {
        let p = rho.pdf(t, ctx)?;
        if p.is_zero() {
            return Ok(p);
        }
        Ok(p * t.clone().pow(n))
    };
    integrate_half_line(&h, ctx)
}
