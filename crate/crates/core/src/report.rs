//! Machine-readable reports. Every number is a decimal string at working precision and
//! every map has a fixed key order, so identical inputs give byte-identical output.

use serde::Serialize;

use crate::determinacy::{RuleDisagreement, Verdict};
use crate::error::{Error, Result};
use crate::lattice::TableFile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// The settings a report was produced with.
#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub command: &'static str,
    pub source: String,
    pub q: String,
    pub digits: u32,
    pub n_max: u32,
    pub window: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub n: u32,
    pub value: String,
    pub tail_bound: String,
    pub terms_used: usize,
    pub j_peak: i64,
    /// `ln m_q(n) / n²`, absent for `n = 0` or a vanishing moment.
    pub a_n: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentsReport {
    pub run: RunInfo,
    pub rows: Vec<MomentRow>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub determinate: Vec<String>,
    pub indeterminate: Vec<String>,
    pub inconclusive: Vec<String>,
    /// Some criterion says determinate while another says indeterminate.
    pub conflict: bool,
    pub line: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyReport {
    pub run: RunInfo,
    pub verdicts: Vec<Verdict>,
    pub rule_disagreements: Vec<RuleDisagreement>,
    pub summary: Summary,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualRow {
    pub n: u32,
    pub base: String,
    pub witness: String,
    pub series_residual: String,
    pub direct_residual: String,
    pub product: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct LatticeValue {
    pub j: i64,
    pub base: String,
    pub witness: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub run: RunInfo,
    pub m: u32,
    pub alpha: String,
    pub alpha_max: String,
    pub required_digits: u32,
    pub distinct: bool,
    pub verified_to: u32,
    pub max_residual: String,
    pub residuals: Vec<ResidualRow>,
    pub lattice: Vec<LatticeValue>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KreinRow {
    pub t_lo: String,
    pub t_hi: String,
    pub partial: String,
    pub increment: String,
    pub shrink_ratio: Option<String>,
    pub c_fit: String,
    pub comparator_mean_integrand: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct KreinReport {
    pub run: RunInfo,
    pub density: String,
    pub t0: String,
    pub t_max: String,
    pub rows: Vec<KreinRow>,
    pub c_fit_spread: String,
    pub increments_shrink_3x: bool,
    pub c_fit_stable_5pct: bool,
    pub comparator_linear_divergence: bool,
    pub evidence: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExportReport {
    #[serde(flatten)]
    pub table: TableFile,
}

/// The serialized name of a unit enum value, such as a criterion or status.
pub fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|x| x.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// A report that renders as JSON or as a flat CSV table.
pub trait Render: Serialize {
    fn csv_table(&self) -> (Vec<&'static str>, Vec<Vec<String>>);

    fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => {
                let mut s =
                    serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => {
                let (header, rows) = self.csv_table();
                let mut w = csv::Writer::from_writer(Vec::new());
                let io = |e: csv::Error| Error::Io(e.to_string());
                w.write_record(&header).map_err(io)?;
                for row in rows {
                    w.write_record(&row).map_err(io)?;
                }
                let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
                String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
            }
        }
    }
}

impl Render for MomentsReport {
    fn csv_table(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.value.clone(),
                    r.tail_bound.clone(),
                    r.terms_used.to_string(),
                    r.j_peak.to_string(),
                    r.a_n.clone().unwrap_or_default(),
                ]
            })
            .collect();
        (
            vec!["n", "value", "tail_bound", "terms_used", "j_peak", "a_n"],
            rows,
        )
    }
}

impl Render for ClassifyReport {
    fn csv_table(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let rows = self
            .verdicts
            .iter()
            .map(|v| {
                let (lo, hi) = v
                    .window
                    .as_ref()
                    .map_or((String::new(), String::new()), |w| {
                        (w.lo.to_string(), w.hi.to_string())
                    });
                let evidence: Vec<String> = v
                    .evidence
                    .iter()
                    .map(|e| format!("{}={}", e.name, e.value))
                    .collect();
                vec![
                    label(&v.criterion),
                    label(&v.status),
                    label(&v.proof_strength),
                    lo,
                    hi,
                    evidence.join(";"),
                ]
            })
            .collect();
        (
            vec![
                "criterion",
                "status",
                "proof_strength",
                "window_lo",
                "window_hi",
                "evidence",
            ],
            rows,
        )
    }
}

impl Render for WitnessReport {
    fn csv_table(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let rows = self
            .residuals
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.base.clone(),
                    r.witness.clone(),
                    r.series_residual.clone(),
                    r.direct_residual.clone(),
                    r.product.clone(),
                ]
            })
            .collect();
        (
            vec![
                "n",
                "base",
                "witness",
                "series_residual",
                "direct_residual",
                "product",
            ],
            rows,
        )
    }
}

impl Render for KreinReport {
    fn csv_table(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.t_lo.clone(),
                    r.t_hi.clone(),
                    r.partial.clone(),
                    r.increment.clone(),
                    r.shrink_ratio.clone().unwrap_or_default(),
                    r.c_fit.clone(),
                    r.comparator_mean_integrand.clone(),
                ]
            })
            .collect();
        (
            vec![
                "t_lo",
                "t_hi",
                "partial",
                "increment",
                "shrink_ratio",
                "c_fit",
                "comparator_mean_integrand",
            ],
            rows,
        )
    }
}

impl Render for ExportReport {
    fn csv_table(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let rows = self
            .table
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(self.table.j_min + i as i64).to_string(), v.clone()])
            .collect();
        (vec!["j", "value"], rows)
    }
}
