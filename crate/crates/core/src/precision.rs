//! Working precision and the deformation parameter `q`.
//!
//! Every real quantity in the crate is a [`rug::Float`] whose precision is set by a
//! [`PrecisionContext`]. Parameters supplied by users (q, λ, α, ...) are kept as exact
//! rationals parsed from their decimal spelling, so `0.3` means 3/10 and not the
//! nearest binary double.

use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Assign, Float, Integer, Rational};

use crate::error::{Error, Result};

const GUARD_BITS: u32 = 32;
const LOG2_10: f64 = std::f64::consts::LOG2_10;

pub const DEFAULT_DIGITS: u32 = 50;
pub const DEFAULT_MAX_TERMS: usize = 50_000;

/// Decimal digits of working precision, the series truncation cap and the relative
/// tolerance used by every stop rule.
#[derive(Clone, Debug)]
pub struct PrecisionContext {
    digits: u32,
    max_terms: usize,
    tol: Float,
}

impl PrecisionContext {
    /// Context with `digits` decimal digits and the default tolerance `10^(10-digits)`.
    pub fn new(digits: u32) -> Result<Self> {
        if digits < 15 {
            return Err(Error::InvalidParameter(format!(
                "digits must be at least 15, got {digits}"
            )));
        }
        let prec = bits_for(digits);
        let tol = Float::with_val(prec, 10).pow(10 - digits as i32);
        Ok(Self {
            digits,
            max_terms: DEFAULT_MAX_TERMS,
            tol,
        })
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> Result<Self> {
        if max_terms < 64 {
            return Err(Error::InvalidParameter(format!(
                "max_terms must be at least 64, got {max_terms}"
            )));
        }
        self.max_terms = max_terms;
        Ok(self)
    }

    pub fn with_tol(mut self, tol: &Float) -> Result<Self> {
        if !(*tol > 0 && *tol < 1) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must lie in (0, 1), got {tol}"
            )));
        }
        self.tol = Float::with_val(self.prec(), tol);
        Ok(self)
    }

    /// Same cap, new digit count, default tolerance for that digit count.
    pub fn with_digits(&self, digits: u32) -> Result<Self> {
        Self::new(digits)?.with_max_terms(self.max_terms)
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    pub fn tol(&self) -> &Float {
        &self.tol
    }

    /// Binary precision of every `Float` created under this context.
    pub fn prec(&self) -> u32 {
        bits_for(self.digits)
    }

    pub fn real<T>(&self, value: T) -> Float
    where
        Float: Assign<T>,
    {
        Float::with_val(self.prec(), value)
    }

    /// `10^(-digits/2)`, the tolerance for "sums to one".
    pub fn normalization_tol(&self) -> Float {
        let exp = -(self.digits as i32) / 2;
        self.real(10).pow(exp)
    }

    /// `10^exp` at working precision.
    pub fn pow10(&self, exp: i32) -> Float {
        self.real(10).pow(exp)
    }

    /// Formats a value with all significant digits of the context.
    pub fn format(&self, x: &Float) -> String {
        format_real(x, self.digits)
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self::new(DEFAULT_DIGITS).expect("default digits are valid")
    }
}

fn bits_for(digits: u32) -> u32 {
    (digits as f64 * LOG2_10).ceil() as u32 + GUARD_BITS
}

/// Decimal rendering with `digits` significant digits and trailing zeros dropped.
/// Zero renders as `"0"`.
pub fn format_real(x: &Float, digits: u32) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    trim_mantissa(&x.to_string_radix(10, Some(digits as usize)))
}

/// Shortest decimal rendering that parses back to exactly `x` at its own precision.
pub fn format_exact(x: &Float) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    trim_mantissa(&x.to_string_radix(10, None))
}

fn trim_mantissa(s: &str) -> String {
    let (mantissa, exponent) = match s.find('e') {
        Some(pos) => (&s[..pos], &s[pos..]),
        None => (s, ""),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    let exponent = if exponent == "e0" { "" } else { exponent };
    format!("{mantissa}{exponent}")
}

/// Decimal rendering of an exact rational: exact when the expansion terminates,
/// otherwise rounded to `digits` significant digits.
pub fn format_rational(r: &Rational, digits: u32) -> String {
    let mut den = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while den.is_divisible_u(2) {
        den /= 2u32;
        twos += 1;
    }
    while den.is_divisible_u(5) {
        den /= 5u32;
        fives += 1;
    }
    if den != 1 {
        return format_real(&Float::with_val(bits_for(digits), r), digits);
    }
    let scale = twos.max(fives);
    let scaled = (r.numer() * Integer::from(Integer::u_pow_u(10, scale))) / r.denom();
    let negative = scaled.cmp0().is_lt();
    let digits_str = Integer::from(scaled.abs_ref()).to_string();
    let scale = scale as usize;
    let body = if scale == 0 {
        digits_str
    } else if digits_str.len() > scale {
        let (int, frac) = digits_str.split_at(digits_str.len() - scale);
        format!("{int}.{frac}")
    } else {
        format!("0.{}{digits_str}", "0".repeat(scale - digits_str.len()))
    };
    let body = if body.contains('.') {
        body.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        body
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Parses a plain decimal literal (`-12.5e-3`, `0.3`, `7`) into an exact rational.
pub fn parse_decimal(s: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("not a decimal number: {s:?}"));
    let s = s.trim();
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(pos) => (&mantissa[..pos], &mantissa[pos + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer =
        Integer::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i64;
    let ten = Integer::from(10);
    let scale_abs = u32::try_from(scale.unsigned_abs()).map_err(|_| bad())?;
    let factor = ten.pow(scale_abs);
    Ok(if scale >= 0 {
        Rational::from(numer * factor)
    } else {
        Rational::from((numer, factor))
    })
}

/// Exact rational for the shortest decimal spelling of `x` (so `0.3` becomes 3/10).
pub fn exact_decimal(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite value {x}")));
    }
    parse_decimal(&format!("{x:e}"))
}

/// A real parameter given by decimal literal, kept exactly.
#[derive(Clone, Debug)]
pub struct Decimal {
    exact: Rational,
    repr: String,
}

impl Decimal {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(Self {
            exact: parse_decimal(s)?,
            repr: s.trim().to_string(),
        })
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        Ok(Self {
            exact: exact_decimal(x)?,
            repr: format!("{x}"),
        })
    }

    pub fn exact(&self) -> &Rational {
        &self.exact
    }

    pub fn value(&self, ctx: &PrecisionContext) -> Float {
        ctx.real(&self.exact)
    }

    pub fn to_f64(&self) -> f64 {
        self.exact.to_f64()
    }

    pub fn is_positive(&self) -> bool {
        self.exact.cmp0().is_gt()
    }
}

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        self.exact == other.exact
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.repr)
    }
}

/// The deformation parameter, `0 < q < 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct QParam(Decimal);

impl QParam {
    pub fn new(q: f64) -> Result<Self> {
        Self::from_decimal(Decimal::from_f64(q)?)
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::from_decimal(Decimal::parse(s)?)
    }

    fn from_decimal(d: Decimal) -> Result<Self> {
        if d.exact.cmp0().is_le() || d.exact >= 1 {
            return Err(Error::InvalidParameter(format!(
                "q must lie in (0, 1), got {d}"
            )));
        }
        Ok(Self(d))
    }

    pub fn exact(&self) -> &Rational {
        &self.0.exact
    }

    pub fn value(&self, ctx: &PrecisionContext) -> Float {
        self.0.value(ctx)
    }

    /// `q^k` for any integer `k`, correctly rounded from the exact rational
    /// whenever `|k|` is modest.
    pub fn pow(&self, k: i64, ctx: &PrecisionContext) -> Float {
        if k == 0 {
            return ctx.real(1);
        }
        if k.unsigned_abs() <= 64 {
            let e = k.unsigned_abs() as u32;
            let r = Rational::from(self.exact().pow(e));
            return if k > 0 {
                ctx.real(&r)
            } else {
                ctx.real(r.recip())
            };
        }
        let q = self.value(ctx);
        q.pow(k)
    }

    /// `1 - q`, computed exactly before rounding.
    pub fn one_minus(&self, ctx: &PrecisionContext) -> Float {
        ctx.real(Rational::from(1 - self.exact()))
    }

    /// `ln(1/q) > 0`.
    pub fn ln_inv(&self, ctx: &PrecisionContext) -> Float {
        -self.value(ctx).ln()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
}

impl fmt::Display for QParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
