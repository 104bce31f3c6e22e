//! Pairs of distinct q-densities with identical q-moments.
//!
//! The witness adds `α c_k` at the lattice points `q^{-mk}`, where `c_k` are the
//! coefficients of `φ_m(z) = Σ_k c_k z^k = ∏_{j≥1} (1 - q^{mj} z)`. Every q-moment of the
//! perturbation is a multiple of `φ_m(q^{-m(n+1)})`, which vanishes because the product
//! has the factor `1 - q^{m(n+1)} q^{-m(n+1)} = 0`.

use rayon::prelude::*;
use rug::Float;

use crate::error::{Error, Result};
use crate::lattice::{eval_lattice, lattice_equiv_default, QDensity, DEFAULT_EQUIV_WINDOW};
use crate::moments::{q_moment, q_moment_direct};
use crate::precision::{PrecisionContext, QParam};
use crate::qcore::q_power_pochhammer;
use crate::series::{product_until, sum_series, Reference};

/// Digits of accepted cancellation residual.
pub const GUARD_DIGITS: u32 = 10;

/// Default window of odd-index constraints.
pub const DEFAULT_J: u32 = 40;

/// `c_k = (-1)^k q^{mk(k+1)/2} / (q^m; q^m)_k`.
pub fn euler_coeff(k: u64, m: u32, q: &QParam, ctx: &PrecisionContext) -> Float {
    let k_i = k as i64;
    let magnitude =
        q.pow(i64::from(m) * k_i * (k_i + 1) / 2, ctx) / q_power_pochhammer(m, k, q, ctx);
    if k % 2 == 1 {
        -magnitude
    } else {
        magnitude
    }
}

/// `Σ_k c_k q^{-mk(n+1)}` and the product form of the same value.
#[derive(Clone, Debug)]
pub struct PerturbationSeries {
    pub series: Float,
    pub product: Float,
    pub max_term: Float,
    pub partial_sums: Vec<Float>,
}

pub fn perturbation_series(
    m: u32,
    n: u32,
    q: &QParam,
    ctx: &PrecisionContext,
) -> Result<PerturbationSeries> {
    let shift = i64::from(m) * (i64::from(n) + 1);
    let s = sum_series(
        |k| Ok(euler_coeff(k as u64, m, q, ctx) * q.pow(-(k as i64) * shift, ctx)),
        Reference::MaxTerm,
        true,
        ctx,
        "perturbation series",
    )?;
    Ok(PerturbationSeries {
        series: s.value,
        product: phi_product(m, n, q, ctx)?,
        max_term: s.max_term,
        partial_sums: s.partial_sums,
    })
}

/// `∏_{j≥1} (1 - q^{m(j-n-1)})`: the exponent is formed in integers, so the factor at
/// `j = n + 1` is exactly zero.
fn phi_product(m: u32, n: u32, q: &QParam, ctx: &PrecisionContext) -> Result<Float> {
    let m = i64::from(m);
    let n = i64::from(n);
    product_until(
        |s| {
            let j = s as i64 + 1;
            Ok(1 - q.pow(m * (j - n - 1), ctx))
        },
        ctx,
        "φ_m product",
    )
}

/// `φ_m` at `z = q^{-m(n+1)}` in both forms.
#[derive(Clone, Debug)]
pub struct PhiAtLattice {
    pub product: Float,
    pub partial_sums: Vec<Float>,
    pub max_term: Float,
    /// `|S_final| / max_term`.
    pub relative_residual: Float,
}

/// Both forms of `φ_m(q^{-m(n+1)})`. Fails with [`Error::PrecisionExhausted`] when the
/// working precision cannot carry the cancellation of the series.
pub fn phi_m_at_lattice(
    m: u32,
    n: u32,
    q: &QParam,
    ctx: &PrecisionContext,
) -> Result<PhiAtLattice> {
    let required = required_digits(m, n, q);
    if ctx.digits() < required {
        return Err(Error::PrecisionExhausted {
            required,
            available: ctx.digits(),
        });
    }
    let s = perturbation_series(m, n, q, ctx)?;
    let relative_residual = Float::with_val(ctx.prec(), s.series.abs_ref()) / &s.max_term;
    Ok(PhiAtLattice {
        product: s.product,
        partial_sums: s.partial_sums,
        max_term: s.max_term,
        relative_residual,
    })
}

/// `30 + ⌈m (N+1)² log10(1/q) / 2⌉`.
pub fn required_digits(m: u32, n_max: u32, q: &QParam) -> u32 {
    let log10_inv_q = -q.to_f64().log10();
    let n1 = f64::from(n_max) + 1.0;
    30 + (0.5 * f64::from(m) * n1 * n1 * log10_inv_q).ceil() as u32
}

/// `min_{odd j ≤ J} f(q^{-mj}) (q^m;q^m)_j / q^{mj(j+1)/2}`, the largest `α` keeping
/// the witness non-negative at the constrained points.
pub fn alpha_max(f: &QDensity, m: u32, big_j: u32, ctx: &PrecisionContext) -> Result<Float> {
    if m == 0 || big_j == 0 {
        return Err(Error::InvalidParameter(
            "alpha_max needs m ≥ 1 and J ≥ 1".into(),
        ));
    }
    let q = f.q();
    let mut best: Option<Float> = None;
    for j in (1..=big_j).step_by(2) {
        let ji = i64::from(j);
        let fv = eval_lattice(f, -i64::from(m) * ji, ctx)?;
        let bound = fv * q_power_pochhammer(m, u64::from(j), q, ctx)
            / q.pow(i64::from(m) * ji * (ji + 1) / 2, ctx);
        best = Some(match best {
            Some(b) if b <= bound => b,
            _ => bound,
        });
    }
    let best = best.expect("J ≥ 1 gives at least one odd index");
    if best <= *ctx.tol() {
        return Err(Error::InfeasibleWitness(format!(
            "odd-index constraint leaves no room for α > 0 (bound {})",
            ctx.format(&best)
        )));
    }
    Ok(best)
}

/// Moment comparison at one order.
#[derive(Clone, Debug)]
pub struct MomentResidual {
    pub n: u32,
    pub base: Float,
    pub witness: Float,
    /// `|m_q(n; g) - m_q(n; f)|` over the largest perturbation term, series path.
    pub series_residual: Float,
    /// The same with `m_q(n; g)` summed directly over the merged lattice values.
    pub direct_residual: Float,
    /// Product form of the perturbation, exactly zero.
    pub product: Float,
}

/// A base density, its perturbed twin, and the evidence that their moments agree.
#[derive(Clone, Debug)]
pub struct WitnessPair {
    pub base: QDensity,
    pub m: u32,
    pub alpha: Float,
    pub alpha_max: Float,
    pub witness: QDensity,
    pub window: (i64, i64),
    pub distinct: bool,
    pub verified_to: Option<u32>,
    pub max_residual: Option<Float>,
    pub residuals: Vec<MomentResidual>,
}

/// Builds `g = f + α Σ_k c_k 1{q^{-mk}}` and checks `g ≥ 0` on `[-mJ, top]`.
pub fn build_witness(
    f: &QDensity,
    m: u32,
    alpha: &Float,
    big_j: u32,
    ctx: &PrecisionContext,
) -> Result<WitnessPair> {
    if *alpha <= 0 {
        return Err(Error::InvalidParameter(format!(
            "α must be positive, got {alpha}"
        )));
    }
    let a_max = alpha_max(f, m, big_j, ctx)?;
    let witness = QDensity::composite(f.clone(), m, ctx.real(alpha))?;
    let top = f.upper_support().unwrap_or(DEFAULT_EQUIV_WINDOW.1).max(0);
    let window = (-i64::from(m) * i64::from(big_j), top);
    for j in window.0..=window.1 {
        let g = eval_lattice(&witness, j, ctx)?;
        let base = eval_lattice(f, j, ctx)?;
        let slack = Float::with_val(ctx.prec(), ctx.tol() * base.abs());
        if g < -slack {
            return Err(Error::NegativeDensity {
                j,
                value: ctx.format(&g),
            });
        }
    }
    let distinct = !lattice_equiv_default(f, &witness, ctx)?;
    Ok(WitnessPair {
        base: f.clone(),
        m,
        alpha: ctx.real(alpha),
        alpha_max: a_max,
        witness,
        window,
        distinct,
        verified_to: None,
        max_residual: None,
        residuals: Vec::new(),
    })
}

/// Compares `m_q(n; g)` with `m_q(n; f)` for `n = 0..=N`.
pub fn verify_moment_equality(
    mut p: WitnessPair,
    n_max: u32,
    ctx: &PrecisionContext,
) -> Result<WitnessPair> {
    let q = p.base.q().clone();
    let required = required_digits(p.m, n_max, &q);
    if ctx.digits() < required {
        return Err(Error::PrecisionExhausted {
            required,
            available: ctx.digits(),
        });
    }
    let rows: Vec<Result<MomentResidual>> = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let base = q_moment(&p.base, n, ctx)?;
            let wit = q_moment(&p.witness, n, ctx)?;
            let direct = q_moment_direct(&p.witness, n, ctx)?;
            let pert = wit.perturbation.expect("witness is composite");
            let denom = if pert.max_term.is_zero() {
                ctx.real(1)
            } else {
                pert.max_term
            };
            let series_residual =
                Float::with_val(ctx.prec(), &wit.value - &base.value).abs() / &denom;
            let direct_residual = Float::with_val(ctx.prec(), &direct - &base.value).abs() / &denom;
            Ok(MomentResidual {
                n,
                base: base.value,
                witness: wit.value,
                series_residual,
                direct_residual,
                product: pert.product,
            })
        })
        .collect();
    let mut residuals = Vec::with_capacity(rows.len());
    for r in rows {
        residuals.push(r?);
    }
    let accept = ctx.pow10(-(GUARD_DIGITS as i32));
    let mut max_residual = ctx.real(0);
    for r in &residuals {
        let worst = if r.series_residual >= r.direct_residual {
            r.series_residual.clone()
        } else {
            r.direct_residual.clone()
        };
        if worst >= accept {
            return Err(Error::MomentMismatch {
                n: r.n,
                residual: ctx.format(&worst),
            });
        }
        if worst > max_residual {
            max_residual = worst;
        }
    }
    p.verified_to = Some(n_max);
    p.max_residual = Some(max_residual);
    p.residuals = residuals;
    Ok(p)
}
