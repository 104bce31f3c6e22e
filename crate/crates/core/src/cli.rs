//! Command-line front end: argument types, command runners and exit codes.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use rug::Float;

use crate::classical::{standard_exponential, ClassicalPdf};
use crate::determinacy::{
    check_condition_b, check_condition_c, check_thm3_mj, classify_prop1, classify_prop4_log,
    classify_thm2, erlang_rule, krein_evidence, krein_integral, qexp_rule, rule_consistency,
    Criterion, Status, Verdict,
};
use crate::error::{Error, Result};
use crate::lattice::{eval_lattice, tabulate, DensityForm, QDensity};
use crate::moments::q_moment;
use crate::precision::{Decimal, PrecisionContext, QParam};
use crate::report::{
    label, ClassifyReport, ExportReport, Format, KreinReport, KreinRow, LatticeValue, MomentRow,
    MomentsReport, Render, ResidualRow, RunInfo, Summary, WitnessReport,
};
use crate::witness::{alpha_max, build_witness, required_digits, verify_moment_equality};
use crate::zoo::{self, NamedDistribution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTATION: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_PRECISION: i32 = 5;

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::InvalidParameter(_) | Error::Io(_) | Error::QMismatch { .. } => {
            EXIT_INPUT
        }
        Error::InfeasibleWitness(_) => EXIT_INFEASIBLE,
        Error::PrecisionExhausted { .. } => EXIT_PRECISION,
        _ => EXIT_COMPUTATION,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qmoment",
    version,
    about = "q-moments, q-moment determinacy and equal-moment witnesses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate m_q(n) for n = 0..=n_max.
    Moments(CommonArgs),
    /// Run every applicable determinacy classifier.
    Classify(ClassifyArgs),
    /// Build an equal-moment witness and verify it.
    Witness(WitnessArgs),
    /// Krein integral evidence for a classical density.
    Krein(KreinArgs),
    /// Write the lattice values on [-window, window] as a density table.
    Export(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Deformation parameter in (0, 1); taken from the table when --input is given.
    #[arg(long)]
    pub q: Option<String>,
    /// Working precision in significant decimal digits.
    #[arg(long, default_value_t = 50)]
    pub digits: u32,
    /// Largest moment order.
    #[arg(long, default_value_t = 20)]
    pub n_max: u32,
    /// Lattice window J.
    #[arg(long, default_value_t = 40)]
    pub window: u32,
    /// Density table file.
    #[arg(long, conflicts_with = "zoo")]
    pub input: Option<PathBuf>,
    /// Named distribution.
    #[arg(long)]
    pub zoo: Option<String>,
    /// Distribution parameter as key=value.
    #[arg(long = "param")]
    pub params: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Largest classical moment order used by the bridge.
    #[arg(long, default_value_t = 12000)]
    pub bridge_n_max: u32,
    /// Largest sublattice step checked for the lower bound.
    #[arg(long, default_value_t = 3)]
    pub m_max: u32,
}

#[derive(Debug, Clone, Args)]
pub struct WitnessArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Sublattice step of the perturbation.
    #[arg(long, default_value_t = 1)]
    pub m: u32,
    /// Perturbation size; half of the feasible maximum when absent.
    #[arg(long)]
    pub alpha: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct KreinArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Rate of the q-exponential when no --zoo is given.
    #[arg(long, default_value = "1")]
    pub lambda: String,
    #[arg(long, default_value = "1")]
    pub t0: String,
    #[arg(long, default_value = "1e6")]
    pub t_max: String,
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Moments(c) | Command::Export(c) => c,
            Command::Classify(a) => &a.common,
            Command::Witness(a) => &a.common,
            Command::Krein(a) => &a.common,
        }
    }
}

/// Where a density came from.
enum Source {
    Table(QDensity),
    Zoo(NamedDistribution),
}

impl Source {
    fn density(&self) -> &QDensity {
        match self {
            Source::Table(d) => d,
            Source::Zoo(z) => &z.q_density,
        }
    }
}

struct Setup {
    ctx: PrecisionContext,
    q: QParam,
    source: Source,
    label: String,
}

fn parse_q(args: &CommonArgs) -> Result<Option<QParam>> {
    args.q.as_deref().map(QParam::parse).transpose()
}

fn setup(args: &CommonArgs) -> Result<Setup> {
    let ctx = PrecisionContext::new(args.digits)?;
    let q_flag = parse_q(args)?;
    let (source, label) = match (&args.input, &args.zoo) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let d = QDensity::from_table_json(&text)?;
            if let Some(q) = &q_flag {
                if q != d.q() {
                    return Err(Error::QMismatch {
                        left: q.to_string(),
                        right: d.q().to_string(),
                    });
                }
            }
            (Source::Table(d), format!("table:{}", path.display()))
        }
        (None, Some(name)) => {
            let q = q_flag
                .clone()
                .ok_or_else(|| Error::InvalidParameter("--zoo needs --q".into()))?;
            let params = zoo::parse_params(&args.params)?;
            let z = zoo::build(name, &params, &q)?;
            let pairs: Vec<String> = z.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let label = format!("zoo:{name}({})", pairs.join(","));
            (Source::Zoo(z), label)
        }
        (None, None) => {
            return Err(Error::InvalidParameter(
                "one of --input or --zoo is required".into(),
            ))
        }
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter(
                "--input and --zoo are exclusive".into(),
            ))
        }
    };
    let q = source.density().q().clone();
    Ok(Setup {
        ctx,
        q,
        source,
        label,
    })
}

fn run_info(command: &'static str, args: &CommonArgs, s: &Setup) -> RunInfo {
    RunInfo {
        command,
        source: s.label.clone(),
        q: s.q.to_string(),
        digits: args.digits,
        n_max: args.n_max,
        window: args.window,
    }
}

/// Runs a parsed command line and returns the rendered report.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Moments(args) => cmd_moments(args)?.render(args.format),
        Command::Classify(args) => cmd_classify(args)?.render(args.common.format),
        Command::Witness(args) => cmd_witness(args)?.render(args.common.format),
        Command::Krein(args) => cmd_krein(args)?.render(args.common.format),
        Command::Export(args) => cmd_export(args)?.render(args.format),
    }
}

pub fn cmd_moments(args: &CommonArgs) -> Result<MomentsReport> {
    let s = setup(args)?;
    let ctx = &s.ctx;
    let f = s.source.density();
    let rows = (0..=args.n_max)
        .into_par_iter()
        .map(|n| {
            let r = q_moment(f, n, ctx)?;
            let a_n = (n > 0 && r.value > 0).then(|| {
                ctx.format(
                    &(Float::with_val(ctx.prec(), r.value.ln_ref())
                        / (u64::from(n) * u64::from(n))),
                )
            });
            Ok(MomentRow {
                n,
                value: ctx.format(&r.value),
                tail_bound: ctx.format(&r.tail_bound),
                terms_used: r.terms_used,
                j_peak: r.j_peak,
                a_n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentsReport {
        run: run_info("moments", args, &s),
        rows,
    })
}

fn summarize(verdicts: &[Verdict]) -> Summary {
    let mut s = Summary::default();
    for v in verdicts {
        let name = label(&v.criterion);
        let name = match v.evidence_value("m") {
            Some(m) if v.criterion == Criterion::Thm3Mj => format!("{name}(m={m})"),
            _ => name,
        };
        match v.status {
            Status::Determinate => s.determinate.push(name),
            Status::Indeterminate => s.indeterminate.push(name),
            Status::Inconclusive => s.inconclusive.push(name),
        }
    }
    s.conflict = !s.determinate.is_empty() && !s.indeterminate.is_empty();
    let list = |v: &[String]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.join(", ")
        }
    };
    let overall = match (s.determinate.is_empty(), s.indeterminate.is_empty()) {
        (false, true) => "determinate",
        (true, false) => "indeterminate",
        (false, false) => "conflicting",
        (true, true) => "inconclusive",
    };
    s.line = format!(
        "{overall}: determinate [{}]; indeterminate [{}]; inconclusive [{}]",
        list(&s.determinate),
        list(&s.indeterminate),
        list(&s.inconclusive)
    );
    s
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<ClassifyReport> {
    let common = &args.common;
    let s = setup(common)?;
    let ctx = &s.ctx;
    let f = s.source.density();
    let j = common.window;
    let mut verdicts = vec![check_condition_b(f, j, ctx)?, check_condition_c(f, j, ctx)?];
    for m in 1..=args.m_max.max(1) {
        verdicts.push(check_thm3_mj(f, m, j, ctx)?);
    }
    verdicts.push(classify_prop1(f, common.n_max, ctx)?);
    verdicts.push(classify_thm2(f, common.n_max, j, ctx)?);
    let mut rule_disagreements = Vec::new();
    if let Source::Zoo(z) = &s.source {
        let lambda = z
            .params
            .get("lambda")
            .map(|l| Decimal::parse(l))
            .transpose()?;
        match (z.name, lambda) {
            ("q-exponential", Some(l)) => {
                verdicts.push(qexp_rule(&l, &s.q)?);
                rule_disagreements =
                    rule_consistency(std::slice::from_ref(&l), std::slice::from_ref(&s.q))?;
            }
            ("q-erlang", Some(l)) => {
                let r: u32 = z.params["r"]
                    .parse()
                    .map_err(|_| Error::Parse("r".into()))?;
                verdicts.push(erlang_rule(&l, r, &s.q)?);
                if r == 1 {
                    rule_disagreements =
                        rule_consistency(std::slice::from_ref(&l), std::slice::from_ref(&s.q))?;
                }
            }
            _ => {}
        }
        if let Some(ln_mu) = &z.ln_moment {
            let bridge = classify_prop4_log(|n| ln_mu(n, ctx), args.bridge_n_max, &s.q, ctx)?;
            verdicts.push(bridge.verdict);
        }
    }
    let summary = summarize(&verdicts);
    Ok(ClassifyReport {
        run: run_info("classify", common, &s),
        verdicts,
        rule_disagreements,
        summary,
    })
}

pub fn cmd_witness(args: &WitnessArgs) -> Result<WitnessReport> {
    let common = &args.common;
    let s = setup(common)?;
    let ctx = &s.ctx;
    let f = s.source.density();
    let m = args.m;
    let gate = check_thm3_mj(f, m, common.window, ctx)?;
    if gate.status != Status::Indeterminate {
        return Err(Error::InfeasibleWitness(format!(
            "the sublattice lower bound with m = {m} is not observed on the window (C_hat = {})",
            gate.evidence_value("C_hat").unwrap_or("?")
        )));
    }
    let required = required_digits(m, common.n_max, &s.q);
    if common.digits < required {
        return Err(Error::PrecisionExhausted {
            required,
            available: common.digits,
        });
    }
    let a_max = alpha_max(f, m, common.window, ctx)?;
    let alpha = match &args.alpha {
        Some(a) => Decimal::parse(a)?.value(ctx),
        None => Float::with_val(ctx.prec(), &a_max / 2u32),
    };
    let pair = build_witness(f, m, &alpha, common.window, ctx).map_err(|e| match e {
        Error::NegativeDensity { j, value } => Error::InfeasibleWitness(format!(
            "α = {} makes the witness negative at j = {j} ({value})",
            ctx.format(&alpha)
        )),
        other => other,
    })?;
    let pair = verify_moment_equality(pair, common.n_max, ctx)?;
    let residuals = pair
        .residuals
        .iter()
        .map(|r| ResidualRow {
            n: r.n,
            base: ctx.format(&r.base),
            witness: ctx.format(&r.witness),
            series_residual: ctx.format(&r.series_residual),
            direct_residual: ctx.format(&r.direct_residual),
            product: ctx.format(&r.product),
        })
        .collect();
    let lattice = (pair.window.0..=pair.window.1)
        .map(|j| {
            Ok(LatticeValue {
                j,
                base: ctx.format(&eval_lattice(&pair.base, j, ctx)?),
                witness: ctx.format(&eval_lattice(&pair.witness, j, ctx)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WitnessReport {
        run: run_info("witness", common, &s),
        m,
        alpha: ctx.format(&pair.alpha),
        alpha_max: ctx.format(&pair.alpha_max),
        required_digits: required,
        distinct: pair.distinct,
        verified_to: pair.verified_to.unwrap_or(common.n_max),
        max_residual: pair
            .max_residual
            .as_ref()
            .map(|r| ctx.format(r))
            .unwrap_or_default(),
        residuals,
        lattice,
    })
}

/// Upper limits `10^k ∈ (t0, t_max]` for `k ≥ 3`, closed by `t_max` itself.
fn krein_limits(t0: &Float, t_max: &Float, ctx: &PrecisionContext) -> Vec<Float> {
    let mut limits: Vec<Float> = (3..=300)
        .map(|k| ctx.pow10(k))
        .skip_while(|t| t <= t0)
        .take_while(|t| t <= t_max)
        .collect();
    if limits.last() != Some(t_max) {
        limits.push(t_max.clone());
    }
    limits
}

pub fn cmd_krein(args: &KreinArgs) -> Result<KreinReport> {
    let common = &args.common;
    let ctx = PrecisionContext::new(common.digits)?;
    let t0 = Decimal::parse(&args.t0)?.value(&ctx);
    let t_max = Decimal::parse(&args.t_max)?.value(&ctx);
    if t0 <= 0 || t_max < t0 {
        return Err(Error::InvalidParameter(format!(
            "Krein range needs 0 < t0 ≤ T, got t0 = {}, T = {}",
            args.t0, args.t_max
        )));
    }
    let (rho, density, s) = if common.zoo.is_some() {
        let s = setup(common)?;
        let Source::Zoo(z) = &s.source else {
            unreachable!()
        };
        let rho: ClassicalPdf = z.classical_pdf.clone().ok_or_else(|| {
            Error::InvalidParameter(format!("{} has no classical density", z.name))
        })?;
        let label = s.label.clone();
        (rho, label, s)
    } else {
        let q =
            parse_q(common)?.ok_or_else(|| Error::InvalidParameter("krein needs --q".into()))?;
        let lambda = Decimal::parse(&args.lambda)?;
        let z = zoo::q_exponential(&lambda, &q)?;
        let rho = z
            .classical_pdf
            .clone()
            .expect("q-exponential has a classical density");
        let label = format!("zoo:q-exponential(lambda={lambda})");
        let s = Setup {
            ctx: ctx.clone(),
            q,
            source: Source::Zoo(z),
            label: label.clone(),
        };
        (rho, label, s)
    };
    let limits = krein_limits(&t0, &t_max, &ctx);
    let ev = krein_evidence(&rho, &t0, &limits, &ctx)?;
    let (exp_rho, _) = standard_exponential();
    let cmp = krein_evidence(&exp_rho, &t0, &limits, &ctx)?;
    let mut rows = Vec::with_capacity(limits.len());
    let mut lo = t0.clone();
    for (i, (t, partial)) in ev.partials.iter().enumerate() {
        let increment = if i == 0 {
            partial.clone()
        } else {
            ev.increments[i - 1].clone()
        };
        let (c_fit, cmp_mean) = if i == 0 {
            let head = krein_integral(&rho, &t0, t, &ctx)?;
            let cmp_head = krein_integral(&exp_rho, &t0, t, &ctx)?;
            let width = Float::with_val(ctx.prec(), t - &t0);
            let mean = if width.is_zero() {
                ctx.real(0)
            } else {
                cmp_head.value / width
            };
            (head.c_fit, mean)
        } else {
            (
                ev.c_fit_by_range[i - 1].2.clone(),
                cmp.mean_integrand[i - 1].clone(),
            )
        };
        rows.push(KreinRow {
            t_lo: ctx.format(&lo),
            t_hi: ctx.format(t),
            partial: ctx.format(partial),
            increment: ctx.format(&increment),
            shrink_ratio: (i >= 2).then(|| ctx.format(&ev.shrink_ratios[i - 2])),
            c_fit: ctx.format(&c_fit),
            comparator_mean_integrand: ctx.format(&cmp_mean),
        });
        lo.clone_from(t);
    }
    let shrink = ev.cauchy_like(3.0);
    let stable = ev.c_fit_spread <= 0.05;
    let linear = !cmp.mean_integrand.is_empty()
        && cmp
            .mean_integrand
            .iter()
            .all(|m| (m.to_f64() - 1.0).abs() < 0.01);
    let evidence = match (shrink && stable, linear) {
        (true, true) => "partial integrals settle while the exponential comparator grows linearly",
        (true, false) => {
            "partial integrals settle; comparator did not show linear growth on this range"
        }
        (false, _) => "no convergence evidence on this range",
    };
    Ok(KreinReport {
        run: RunInfo {
            command: "krein",
            source: density.clone(),
            q: s.q.to_string(),
            digits: common.digits,
            n_max: common.n_max,
            window: common.window,
        },
        density,
        t0: ctx.format(&t0),
        t_max: ctx.format(&t_max),
        rows,
        c_fit_spread: ctx.format(&ev.c_fit_spread),
        increments_shrink_3x: shrink,
        c_fit_stable_5pct: stable,
        comparator_linear_divergence: linear,
        evidence: evidence.to_string(),
    })
}

pub fn cmd_export(args: &CommonArgs) -> Result<ExportReport> {
    let s = setup(args)?;
    let ctx = &s.ctx;
    let f = s.source.density();
    let table = match f.form() {
        DensityForm::Table(_) => f.clone(),
        _ => {
            let j = i64::from(args.window);
            tabulate(f, -j, j, ctx)?
        }
    };
    Ok(ExportReport {
        table: table.to_table_file(ctx)?,
    })
}
