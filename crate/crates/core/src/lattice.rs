//! q-densities seen through their values on the lattice `{q^j : j ∈ ℤ}`.
//!
//! Two densities that agree on the lattice have the same distribution function at
//! lattice points and the same q-moments, so a density is represented only by what it
//! does there: a closed-form callable, a finite table with a zero tail, or a lazily
//! evaluated base-plus-perturbation composite.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::classical::{ClassicalCdf, RealFn};
use crate::error::{Error, Result};
use crate::precision::{format_exact, parse_decimal, PrecisionContext, QParam};
use crate::series::{bilateral_sum, sum_series, BilateralSum, Reference};
use crate::witness::euler_coeff;

/// Default lattice window for equivalence checks.
pub const DEFAULT_EQUIV_WINDOW: (i64, i64) = (-40, 40);

/// Lattice values `f(q^j)` for `j_min ≤ j ≤ j_max`, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    j_min: i64,
    values: Vec<Rational>,
}

impl Table {
    pub fn new(j_min: i64, values: Vec<Rational>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "a density table needs at least one value".into(),
            ));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| v.cmp0().is_lt()) {
            return Err(Error::NegativeDensity {
                j: j_min + i as i64,
                value: v.to_f64().to_string(),
            });
        }
        Ok(Self { j_min, values })
    }

    pub fn j_min(&self) -> i64 {
        self.j_min
    }

    pub fn j_max(&self) -> i64 {
        self.j_min + self.values.len() as i64 - 1
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn get(&self, j: i64) -> Option<&Rational> {
        if j < self.j_min || j > self.j_max() {
            None
        } else {
            Some(&self.values[(j - self.j_min) as usize])
        }
    }
}

/// `g(q^{-mk}) = f(q^{-mk}) + α c_k` for `k ≥ 0`, `g = f` elsewhere on the lattice.
#[derive(Clone)]
pub struct Composite {
    base: Arc<QDensity>,
    m: u32,
    alpha: Float,
}

impl Composite {
    pub fn base(&self) -> &QDensity {
        &self.base
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn alpha(&self) -> &Float {
        &self.alpha
    }

    /// `k` with `j = -mk`, if `j` lies on the perturbed sublattice.
    pub fn sublattice_index(&self, j: i64) -> Option<u64> {
        let m = i64::from(self.m);
        (j <= 0 && j % m == 0).then(|| (-j / m) as u64)
    }
}

#[derive(Clone)]
pub enum DensityForm {
    Callable(RealFn),
    Table(Table),
    Composite(Composite),
}

/// A q-density: the deformation parameter, a lattice representation, and whether the
/// total lattice mass is claimed to be one.
#[derive(Clone)]
pub struct QDensity {
    q: QParam,
    form: DensityForm,
    normalized: bool,
}

impl fmt::Debug for QDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let form = match &self.form {
            DensityForm::Callable(_) => "Callable".to_string(),
            DensityForm::Table(t) => format!("Table[{}, {}]", t.j_min(), t.j_max()),
            DensityForm::Composite(c) => format!("Composite(m = {}, α = {})", c.m, c.alpha),
        };
        f.debug_struct("QDensity")
            .field("q", &self.q.to_string())
            .field("form", &form)
            .field("normalized", &self.normalized)
            .finish()
    }
}

impl QDensity {
    pub fn callable(q: QParam, f: RealFn, normalized: bool) -> Self {
        Self {
            q,
            form: DensityForm::Callable(f),
            normalized,
        }
    }

    pub fn table(q: QParam, j_min: i64, values: Vec<Rational>, normalized: bool) -> Result<Self> {
        Ok(Self::from_table(q, Table::new(j_min, values)?, normalized))
    }

    pub fn from_table(q: QParam, table: Table, normalized: bool) -> Self {
        Self {
            q,
            form: DensityForm::Table(table),
            normalized,
        }
    }

    /// The perturbed density of the moment-equality construction. Its total mass equals
    /// the base mass, so it inherits the normalization flag.
    pub fn composite(base: QDensity, m: u32, alpha: Float) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter(
                "perturbation step m must be positive".into(),
            ));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "perturbation size must be finite, got {alpha}"
            )));
        }
        Ok(Self {
            q: base.q.clone(),
            normalized: base.normalized,
            form: DensityForm::Composite(Composite {
                base: Arc::new(base),
                m,
                alpha,
            }),
        })
    }

    pub fn q(&self) -> &QParam {
        &self.q
    }

    pub fn form(&self) -> &DensityForm {
        &self.form
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Largest `j` at which the density may be non-zero, when bounded.
    pub fn upper_support(&self) -> Option<i64> {
        match &self.form {
            DensityForm::Callable(_) => None,
            DensityForm::Table(t) => Some(t.j_max()),
            DensityForm::Composite(c) => c.base.upper_support().map(|u| u.max(0)),
        }
    }

    /// Smallest `j` at which the density may be non-zero, when bounded.
    pub fn lower_support(&self) -> Option<i64> {
        match &self.form {
            DensityForm::Table(t) => Some(t.j_min()),
            _ => None,
        }
    }

    pub fn eval(&self, j: i64, ctx: &PrecisionContext) -> Result<Float> {
        eval_lattice(self, j, ctx)
    }

    /// Total lattice mass, `∫_0^∞ f d_q t`.
    pub fn mass(&self, ctx: &PrecisionContext) -> Result<Float> {
        Ok(lattice_terms(self, 0, ctx)?.value)
    }

    /// Verifies that the total mass is one within `10^(-digits/2)`.
    pub fn check_normalized(&self, ctx: &PrecisionContext) -> Result<Float> {
        let mass = self.mass(ctx)?;
        let dev = Float::with_val(ctx.prec(), &mass - 1u32).abs();
        if dev > ctx.normalization_tol() {
            return Err(Error::NotNormalized {
                mass: ctx.format(&mass),
            });
        }
        Ok(mass)
    }

    /// Parses the density-table file format.
    pub fn from_table_json(text: &str) -> Result<Self> {
        let file: TableFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("density table: {e}")))?;
        file.into_density()
    }

    /// Serializes a table density; every value is written exactly as held at working
    /// precision, so reading the file back reproduces the same lattice values.
    pub fn to_table_file(&self, ctx: &PrecisionContext) -> Result<TableFile> {
        let DensityForm::Table(t) = &self.form else {
            return Err(Error::InvalidParameter(
                "only table densities can be written as tables".into(),
            ));
        };
        Ok(TableFile {
            q: self.q.to_string(),
            j_min: t.j_min(),
            j_max: t.j_max(),
            values: t
                .values()
                .iter()
                .map(|v| format_exact(&ctx.real(v)))
                .collect(),
            normalized: self.normalized,
        })
    }
}

/// On-disk form of a table density. Values are decimal strings, index 0 at `j_min`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub q: String,
    pub j_min: i64,
    pub j_max: i64,
    pub values: Vec<String>,
    pub normalized: bool,
}

impl TableFile {
    pub fn into_density(self) -> Result<QDensity> {
        let q =
            QParam::parse(&self.q).map_err(|e| Error::Parse(format!("density table q: {e}")))?;
        if self.j_min > self.j_max {
            return Err(Error::Parse(format!(
                "density table has j_min = {} > j_max = {}",
                self.j_min, self.j_max
            )));
        }
        let expected = (self.j_max - self.j_min + 1) as usize;
        if self.values.len() != expected {
            return Err(Error::Parse(format!(
                "density table declares {expected} values but lists {}",
                self.values.len()
            )));
        }
        let values = self
            .values
            .iter()
            .map(|s| parse_decimal(s))
            .collect::<Result<Vec<_>>>()?;
        QDensity::table(q, self.j_min, values, self.normalized).map_err(|e| match e {
            Error::NegativeDensity { j, value } => Error::Parse(format!(
                "density table has negative value {value} at j = {j}"
            )),
            other => other,
        })
    }
}

/// `f(q^j)`.
pub fn eval_lattice(f: &QDensity, j: i64, ctx: &PrecisionContext) -> Result<Float> {
    match &f.form {
        DensityForm::Callable(g) => g(&f.q.pow(j, ctx), ctx),
        DensityForm::Table(t) => Ok(t.get(j).map_or_else(|| ctx.real(0), |v| ctx.real(v))),
        DensityForm::Composite(c) => {
            let base = eval_lattice(&c.base, j, ctx)?;
            match c.sublattice_index(j) {
                Some(k) => {
                    Ok(base
                        + Float::with_val(ctx.prec(), &c.alpha) * euler_coeff(k, c.m, &f.q, ctx))
                }
                None => Ok(base),
            }
        }
    }
}

/// The lattice terms `(1-q) f(q^j) q^{j(n+1)}` of the n-th q-moment, summed bilaterally.
///
/// For a composite density the base terms and the perturbation terms at `j = -mk` are
/// merged index by index.
pub fn lattice_terms(f: &QDensity, n: u32, ctx: &PrecisionContext) -> Result<BilateralSum> {
    let q = &f.q;
    let one_minus = q.one_minus(ctx);
    let weight = |j: i64| q.pow(j * (i64::from(n) + 1), ctx) * &one_minus;
    match &f.form {
        DensityForm::Table(t) => bilateral_sum(
            |j| Ok(eval_lattice(f, j, ctx)? * weight(j)),
            Some((t.j_min(), t.j_max())),
            ctx,
            "q-moment sum",
        ),
        DensityForm::Callable(_) => bilateral_sum(
            |j| Ok(eval_lattice(f, j, ctx)? * weight(j)),
            None,
            ctx,
            "q-moment sum",
        ),
        DensityForm::Composite(c) => {
            let base = lattice_terms(&c.base, n, ctx)?;
            let pert = perturbation_terms(c, n, q, ctx)?;
            let mut merged: BTreeMap<i64, Float> = base.terms.into_iter().collect();
            for (j, t) in pert.0 {
                match merged.get_mut(&j) {
                    Some(v) => *v += &t,
                    None => {
                        merged.insert(j, t);
                    }
                }
            }
            let tail = Float::with_val(ctx.prec(), &base.tail_bound + &pert.1);
            Ok(BilateralSum::from_terms(
                merged.into_iter().collect(),
                tail,
                ctx,
            ))
        }
    }
}

/// The terms `α (1-q) c_k q^{-mk(n+1)}` at `j = -mk`, with the series tail estimate.
fn perturbation_terms(
    c: &Composite,
    n: u32,
    q: &QParam,
    ctx: &PrecisionContext,
) -> Result<(Vec<(i64, Float)>, Float)> {
    let scale = Float::with_val(ctx.prec(), &c.alpha) * q.one_minus(ctx);
    let mut terms = Vec::new();
    let s = sum_series(
        |k| {
            let j = -(k as i64) * i64::from(c.m);
            let t =
                euler_coeff(k as u64, c.m, q, ctx) * q.pow(j * (i64::from(n) + 1), ctx) * &scale;
            terms.push((j, t.clone()));
            Ok(t)
        },
        Reference::MaxTerm,
        false,
        ctx,
        "perturbation series",
    )?;
    terms.reverse();
    Ok((terms, s.tail_bound))
}

/// `F(x) = ∫_0^x f d_q t`. Table and composite densities only have lattice values, so
/// for them `x` must be a lattice point.
pub fn cdf(f: &QDensity, x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if *x <= 0 {
        return Err(Error::Domain(format!("cdf needs x > 0, got {x}")));
    }
    match &f.form {
        DensityForm::Callable(g) => {
            crate::qcore::jackson_from_zero(&|t: &Float| g(t, ctx), x, &f.q, ctx)
        }
        _ => {
            let prec = ctx.prec();
            let ratio = Float::with_val(prec, x.ln_ref()) / f.q.value(ctx).ln();
            let j = ratio.round().to_f64() as i64;
            let back = Float::with_val(prec, x / f.q.pow(j, ctx)) - 1u32;
            if back.abs() > Float::with_val(prec, ctx.tol() * 8u32) {
                return Err(Error::Domain(format!("{x} is not a lattice point q^j")));
            }
            cdf_lattice(f, j, ctx)
        }
    }
}

/// `F(q^j) = (1-q) Σ_{i≥j} f(q^i) q^i`.
pub fn cdf_lattice(f: &QDensity, j: i64, ctx: &PrecisionContext) -> Result<Float> {
    let one_minus = f.q.one_minus(ctx);
    let term = |i: i64| -> Result<Float> { Ok(eval_lattice(f, i, ctx)? * f.q.pow(i, ctx)) };
    match f.upper_support() {
        Some(hi) => {
            let lo = f.lower_support().map_or(j, |l| l.max(j));
            let mut acc = ctx.real(0);
            for i in lo..=hi {
                acc += term(i)?;
            }
            Ok(acc * one_minus)
        }
        None => {
            let s = sum_series(
                |k| term(j + k as i64),
                Reference::Partial,
                false,
                ctx,
                "q-integral cdf",
            )?;
            Ok(s.value * one_minus)
        }
    }
}

/// `D_q F(t) = (F(t) - F(qt)) / (t(1-q))`.
pub fn q_derivative<F>(big_f: F, t: &Float, q: &QParam, ctx: &PrecisionContext) -> Result<Float>
where
    F: Fn(&Float) -> Result<Float>,
{
    if *t <= 0 {
        return Err(Error::Domain(format!("q-derivative needs t > 0, got {t}")));
    }
    let qt = Float::with_val(ctx.prec(), t * q.value(ctx));
    let num = big_f(t)? - big_f(&qt)?;
    Ok(num / (Float::with_val(ctx.prec(), t * q.one_minus(ctx))))
}

/// The lattice distribution `P{X = q^j} = f(q^j) q^j (1-q)`.
#[derive(Clone, Debug)]
pub struct LatticeDistribution {
    q: QParam,
    pmf: Vec<(i64, Float)>,
    total: Float,
}

impl LatticeDistribution {
    pub fn q(&self) -> &QParam {
        &self.q
    }

    /// `(j, p_j)` in ascending `j`; indices outside the list carry mass below the
    /// truncation tolerance.
    pub fn pmf(&self) -> &[(i64, Float)] {
        &self.pmf
    }

    pub fn total(&self) -> &Float {
        &self.total
    }

    pub fn mass_at(&self, j: i64) -> Option<&Float> {
        self.pmf
            .binary_search_by_key(&j, |(i, _)| *i)
            .ok()
            .map(|i| &self.pmf[i].1)
    }
}

/// The discrete distribution on the lattice; the masses are exactly the terms of the
/// improper q-integral of `f`.
pub fn to_discrete(f: &QDensity, ctx: &PrecisionContext) -> Result<LatticeDistribution> {
    let sum = lattice_terms(f, 0, ctx)?;
    let dev = Float::with_val(ctx.prec(), &sum.value - 1u32).abs();
    if dev > ctx.normalization_tol() {
        return Err(Error::NotNormalized {
            mass: ctx.format(&sum.value),
        });
    }
    for (j, p) in &sum.terms {
        if *p < 0 {
            return Err(Error::NegativeDensity {
                j: *j,
                value: ctx.format(p),
            });
        }
    }
    Ok(LatticeDistribution {
        q: f.q.clone(),
        pmf: sum.terms,
        total: sum.value,
    })
}

fn same_q(f: &QDensity, g: &QDensity) -> Result<()> {
    if f.q != g.q {
        return Err(Error::QMismatch {
            left: f.q.to_string(),
            right: g.q.to_string(),
        });
    }
    Ok(())
}

/// `|f(q^j) - g(q^j)| ≤ tol · max(1, |f(q^j)|)` for every `j` in the window.
pub fn lattice_equiv(
    f: &QDensity,
    g: &QDensity,
    window: (i64, i64),
    tol: &Float,
    ctx: &PrecisionContext,
) -> Result<bool> {
    same_q(f, g)?;
    let prec = ctx.prec();
    for j in window.0..=window.1 {
        let a = eval_lattice(f, j, ctx)?;
        let b = eval_lattice(g, j, ctx)?;
        let scale = Float::with_val(prec, a.abs_ref()).max(&ctx.real(1));
        if Float::with_val(prec, &a - &b).abs() > Float::with_val(prec, tol * &scale) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// [`lattice_equiv`] on `[-40, 40]` with tolerance `10^(15-digits)`.
pub fn lattice_equiv_default(f: &QDensity, g: &QDensity, ctx: &PrecisionContext) -> Result<bool> {
    let tol = ctx.pow10(15 - ctx.digits() as i32);
    lattice_equiv(f, g, DEFAULT_EQUIV_WINDOW, &tol, ctx)
}

/// The q-density of a classical distribution:
/// `f(q^j) = (F(q^j) - F(q^{j+1})) / (q^j (1-q))`.
pub fn q_density_of_classical(big_f: ClassicalCdf, q: QParam) -> QDensity {
    let qc = q.clone();
    let f: RealFn = Arc::new(move |t, ctx| {
        let qt = Float::with_val(ctx.prec(), t * qc.value(ctx));
        let mass = big_f.mass_between(&qt, t, ctx)?;
        Ok(mass / Float::with_val(ctx.prec(), t * qc.one_minus(ctx)))
    });
    QDensity::callable(q, f, true)
}

/// Freezes the lattice values of any density on `[lo, hi]` into a table.
pub fn tabulate(f: &QDensity, lo: i64, hi: i64, ctx: &PrecisionContext) -> Result<QDensity> {
    if lo > hi {
        return Err(Error::InvalidParameter(format!(
            "empty window [{lo}, {hi}]"
        )));
    }
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    for j in lo..=hi {
        let v = eval_lattice(f, j, ctx)?;
        let r = v
            .to_rational()
            .ok_or_else(|| Error::Domain(format!("non-finite value at j = {j}")))?;
        values.push(r);
    }
    QDensity::table(f.q.clone(), lo, values, f.normalized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::e_q;

    fn q_exp(lambda: f64, q: &QParam) -> QDensity {
        let lam = crate::precision::Decimal::from_f64(lambda).unwrap();
        let qc = q.clone();
        let f: RealFn = Arc::new(move |t, ctx| {
            let arg = -Float::with_val(ctx.prec(), t * lam.value(ctx));
            Ok(e_q(&arg, &qc, ctx)? * lam.value(ctx))
        });
        QDensity::callable(q.clone(), f, true)
    }

    fn point_mass(q: &QParam) -> QDensity {
        let v = Rational::from(1) / (1 - q.exact().clone());
        QDensity::table(q.clone(), 0, vec![v], true).unwrap()
    }

    #[test]
    fn table_lookup_and_zero_tail() {
        let ctx = PrecisionContext::new(30).unwrap();
        let q = QParam::new(0.5).unwrap();
        let f = QDensity::table(q, 0, vec![Rational::from(2)], false).unwrap();
        assert_eq!(eval_lattice(&f, 0, &ctx).unwrap(), 2);
        assert!(eval_lattice(&f, 1, &ctx).unwrap().is_zero());
        assert!(eval_lattice(&f, -7, &ctx).unwrap().is_zero());
    }

    #[test]
    fn table_rejects_negative_values() {
        let q = QParam::new(0.5).unwrap();
        let r = QDensity::table(q, 3, vec![Rational::from(1), Rational::from(-1)], false);
        assert!(matches!(r, Err(Error::NegativeDensity { j: 4, .. })));
    }

    #[test]
    fn composite_adds_alpha_at_origin() {
        let ctx = PrecisionContext::new(30).unwrap();
        let q = QParam::new(0.5).unwrap();
        let f = point_mass(&q);
        let g = QDensity::composite(f.clone(), 1, ctx.real(0.125)).unwrap();
        let d = eval_lattice(&g, 0, &ctx).unwrap() - eval_lattice(&f, 0, &ctx).unwrap();
        assert_eq!(d, 0.125);
        assert!(!lattice_equiv_default(&f, &g, &ctx).unwrap());
        assert!(lattice_equiv_default(&f, &f, &ctx).unwrap());
        // off the sublattice the two agree
        assert_eq!(
            eval_lattice(&g, 3, &ctx).unwrap(),
            eval_lattice(&f, 3, &ctx).unwrap()
        );
        let g2 = QDensity::composite(f.clone(), 2, ctx.real(0.125)).unwrap();
        assert_eq!(
            eval_lattice(&g2, -3, &ctx).unwrap(),
            eval_lattice(&f, -3, &ctx).unwrap()
        );
    }

    #[test]
    fn equivalence_is_window_scoped_and_q_checked() {
        let ctx = PrecisionContext::new(30).unwrap();
        let q = QParam::new(0.5).unwrap();
        let a = QDensity::table(
            q.clone(),
            0,
            vec![Rational::from(1), Rational::from(2)],
            false,
        )
        .unwrap();
        let b = QDensity::table(q, 0, vec![Rational::from(1), Rational::from(5)], false).unwrap();
        let tol = ctx.pow10(-15);
        assert!(lattice_equiv(&a, &b, (-3, 0), &tol, &ctx).unwrap());
        assert!(!lattice_equiv(&a, &b, (-3, 1), &tol, &ctx).unwrap());
        let c = point_mass(&QParam::new(0.3).unwrap());
        assert!(matches!(
            lattice_equiv(&a, &c, (0, 0), &tol, &ctx),
            Err(Error::QMismatch { .. })
        ));
    }

    #[test]
    fn q_exponential_cdf_is_one_minus_e_q() {
        let ctx = PrecisionContext::new(40).unwrap();
        let q = QParam::new(0.5).unwrap();
        let f = q_exp(1.0, &q);
        for x in [0.1, 1.0, 3.0, 16.0] {
            let xv = ctx.real(x);
            let got = cdf(&f, &xv, &ctx).unwrap();
            let expect = 1 - e_q(&Float::with_val(ctx.prec(), -&xv), &q, &ctx).unwrap();
            let err = Float::with_val(ctx.prec(), &got - &expect).abs();
            assert!(err < 1e-28, "x = {x}: {got} vs {expect}");
        }
        let far = cdf(&f, &ctx.real(1e6), &ctx).unwrap();
        assert!(Float::with_val(ctx.prec(), far - 1u32).abs() < 1e-28);
    }

    #[test]
    fn zero_density_has_zero_cdf_and_is_not_normalized() {
        let ctx = PrecisionContext::new(30).unwrap();
        let q = QParam::new(0.5).unwrap();
        let zero = QDensity::callable(q.clone(), Arc::new(|_, ctx| Ok(ctx.real(0))), true);
        assert!(cdf(&zero, &ctx.real(2), &ctx).unwrap().is_zero());
        let zero_table = QDensity::table(q, 0, vec![Rational::new()], true).unwrap();
        assert!(matches!(
            to_discrete(&zero_table, &ctx),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn q_derivative_of_simple_functions() {
        let ctx = PrecisionContext::new(30).unwrap();
        let q = QParam::new(0.5).unwrap();
        let t = ctx.real(3.7);
        assert!(q_derivative(|_| Ok(ctx.real(5)), &t, &q, &ctx)
            .unwrap()
            .is_zero());
        let d = q_derivative(|x: &Float| Ok(x.clone()), &t, &q, &ctx).unwrap();
        assert!(Float::with_val(ctx.prec(), d - 1u32).abs() < 1e-28);
    }

    #[test]
    fn table_round_trip_through_cdf() {
        let ctx = PrecisionContext::new(30).unwrap();
        let q = QParam::parse("0.3").unwrap();
        let values: Vec<Rational> = (0..7).map(|i| Rational::from((i * i + 1, 7))).collect();
        let f = QDensity::table(q.clone(), -3, values, false).unwrap();
        for j in -5..=5 {
            let big_f = |x: &Float| cdf(&f, x, &ctx);
            let d = q_derivative(big_f, &q.pow(j, &ctx), &q, &ctx).unwrap();
            let v = eval_lattice(&f, j, &ctx).unwrap();
            let err = Float::with_val(ctx.prec(), &d - &v).abs();
            assert!(
                err <= Float::with_val(ctx.prec(), ctx.tol() * 4u32) * v.max(&ctx.real(1)),
                "j = {j}"
            );
        }
    }

    #[test]
    fn point_mass_discrete_view() {
        let ctx = PrecisionContext::new(30).unwrap();
        let q = QParam::new(0.5).unwrap();
        let d = to_discrete(&point_mass(&q), &ctx).unwrap();
        assert_eq!(*d.mass_at(0).unwrap(), 1);
        assert_eq!(d.pmf().len(), 1);
    }

    #[test]
    fn q_exponential_masses_sum_to_one() {
        let ctx = PrecisionContext::new(50).unwrap();
        let q = QParam::new(0.5).unwrap();
        let f = q_exp(1.0, &q);
        let d = to_discrete(&f, &ctx).unwrap();
        let sum = d.pmf().iter().fold(ctx.real(0), |acc, (_, p)| acc + p);
        assert_eq!(sum, *d.total());
        assert!(Float::with_val(ctx.prec(), sum - 1u32).abs() < 1e-30);
        assert_eq!(f.mass(&ctx).unwrap(), *d.total());
    }

    #[test]
    fn uniform_classical_cdf_gives_unit_lattice_values() {
        let ctx = PrecisionContext::new(30).unwrap();
        let q = QParam::new(0.5).unwrap();
        let uniform = ClassicalCdf::new(Arc::new(|t, ctx| Ok(ctx.real(t).min(&ctx.real(1)))));
        let f = q_density_of_classical(uniform, q);
        for j in 0..10 {
            let v = eval_lattice(&f, j, &ctx).unwrap();
            assert!(
                Float::with_val(ctx.prec(), v - 1u32).abs() < 1e-28,
                "j = {j}"
            );
        }
        let zero = q_density_of_classical(
            ClassicalCdf::new(Arc::new(|_, ctx| Ok(ctx.real(0)))),
            QParam::new(0.5).unwrap(),
        );
        assert!(eval_lattice(&zero, -4, &ctx).unwrap().is_zero());
    }

    #[test]
    fn table_file_round_trip() {
        let ctx = PrecisionContext::new(40).unwrap();
        let q = QParam::parse("0.3").unwrap();
        let f = tabulate(&q_exp(2.0, &q), -5, 5, &ctx).unwrap();
        let file = f.to_table_file(&ctx).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let back = QDensity::from_table_json(&text).unwrap();
        for j in -6..=6 {
            assert_eq!(
                eval_lattice(&back, j, &ctx).unwrap(),
                eval_lattice(&f, j, &ctx).unwrap()
            );
        }
        assert_eq!(back.to_table_file(&ctx).unwrap(), file);
    }

    #[test]
    fn malformed_table_files_are_parse_errors() {
        for text in [
            "{",
            r#"{"q":"0.5","j_min":0,"j_max":1,"values":["1"],"normalized":false}"#,
            r#"{"q":"1.5","j_min":0,"j_max":0,"values":["1"],"normalized":false}"#,
            r#"{"q":"0.5","j_min":0,"j_max":0,"values":["-1"],"normalized":false}"#,
            r#"{"q":"0.5","j_min":0,"j_max":0,"values":["x"],"normalized":false}"#,
        ] {
            assert!(
                matches!(QDensity::from_table_json(text), Err(Error::Parse(_))),
                "{text}"
            );
        }
    }
}
