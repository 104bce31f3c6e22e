//! Classical (Lebesgue) densities and distribution functions on `(0, ∞)`.

use std::fmt;
use std::sync::Arc;

use rug::Float;

use crate::error::{Error, Result};
use crate::precision::PrecisionContext;

/// A real function of one positive argument evaluated at a given precision.
pub type RealFn = Arc<dyn Fn(&Float, &PrecisionContext) -> Result<Float> + Send + Sync>;

/// A classical pdf, carried together with its logarithm so that densities far below the
/// floating-point exponent range can still be handled through `ln ρ`.
#[derive(Clone)]
pub struct ClassicalPdf {
    pdf: RealFn,
    ln_pdf: RealFn,
}

impl ClassicalPdf {
    /// From the pdf alone; `ln ρ` is taken numerically.
    pub fn new(pdf: RealFn) -> Self {
        let inner = pdf.clone();
        let ln_pdf: RealFn = Arc::new(move |t, ctx| {
            let v = inner(t, ctx)?;
            if v <= 0 {
                return Err(Error::Domain(format!("density vanishes at t = {t}")));
            }
            Ok(v.ln())
        });
        Self { pdf, ln_pdf }
    }

    /// From `ln ρ`; the pdf is its exponential.
    pub fn from_ln_pdf(ln_pdf: RealFn) -> Self {
        let inner = ln_pdf.clone();
        let pdf: RealFn = Arc::new(move |t, ctx| Ok(inner(t, ctx)?.exp()));
        Self { pdf, ln_pdf }
    }

    pub fn pdf(&self, t: &Float, ctx: &PrecisionContext) -> Result<Float> {
        (self.pdf)(t, ctx)
    }

    pub fn ln_pdf(&self, t: &Float, ctx: &PrecisionContext) -> Result<Float> {
        (self.ln_pdf)(t, ctx)
    }
}

impl fmt::Debug for ClassicalPdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClassicalPdf")
    }
}

/// A distribution function, optionally with its survival function `1 - F` computed
/// directly so that differences deep in the upper tail keep their relative accuracy.
#[derive(Clone)]
pub struct ClassicalCdf {
    cdf: RealFn,
    survival: Option<RealFn>,
}

impl ClassicalCdf {
    pub fn new(cdf: RealFn) -> Self {
        Self {
            cdf,
            survival: None,
        }
    }

    pub fn with_survival(cdf: RealFn, survival: RealFn) -> Self {
        Self {
            cdf,
            survival: Some(survival),
        }
    }

    pub fn cdf(&self, t: &Float, ctx: &PrecisionContext) -> Result<Float> {
        (self.cdf)(t, ctx)
    }

    pub fn survival(&self, t: &Float, ctx: &PrecisionContext) -> Result<Float> {
        match &self.survival {
            Some(s) => s(t, ctx),
            None => Ok(1 - self.cdf(t, ctx)?),
        }
    }

    /// `F(b) - F(a)`, through the survival function when `F(a) > 1/2`.
    pub fn mass_between(&self, a: &Float, b: &Float, ctx: &PrecisionContext) -> Result<Float> {
        let fa = self.cdf(a, ctx)?;
        if self.survival.is_some() && fa > 0.5 {
            Ok(self.survival(a, ctx)? - self.survival(b, ctx)?)
        } else {
            Ok(self.cdf(b, ctx)? - fa)
        }
    }
}

impl fmt::Debug for ClassicalCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClassicalCdf")
    }
}

/// The exponential law `ρ(t) = e^{-t}`, the classical comparator.
pub fn standard_exponential() -> (ClassicalPdf, ClassicalCdf) {
    let pdf = ClassicalPdf::from_ln_pdf(Arc::new(|t, ctx| Ok(-ctx.real(t))));
    let cdf = ClassicalCdf::with_survival(
        Arc::new(|t, ctx| Ok(-ctx.real(-t).exp_m1())),
        Arc::new(|t, ctx| Ok(ctx.real(-t).exp())),
    );
    (pdf, cdf)
}
