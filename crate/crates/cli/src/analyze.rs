use std::fmt::Write as _;

use latcorr::inference::{InferenceError, InferenceReport, BOUNDARY_T};
use latcorr::{
    cox_snell_r2, cramers_v2, detectable_threshold, nagelkerke_r2, pearson_c, polychoric_two_step,
    u_total, ConfidenceInterval, ContingencyTable, Lambda, PolychoricConfig, Scale, SolveConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum CiChoice {
    #[default]
    Both,
    Simple,
    Fisher,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub lambdas: Vec<Lambda>,
    pub alpha: f64,
    pub ci: CiChoice,
    pub polychoric: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            lambdas: vec![Lambda::KL, Lambda::CRESSIE_READ, Lambda::PEARSON],
            alpha: 0.05,
            ci: CiChoice::Both,
            polychoric: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableInfo {
    pub r: usize,
    pub c: usize,
    pub n: u64,
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub degenerate: bool,
}

impl From<ConfidenceInterval> for Interval {
    fn from(ci: ConfidenceInterval) -> Self {
        Self {
            lo: ci.lower,
            hi: ci.upper,
            degenerate: ci.degenerate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma2 {
    pub d: f64,
    pub t: f64,
    pub rho: Option<f64>,
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaResult {
    pub lambda: f64,
    pub lambda_label: String,
    pub rho: f64,
    pub t: f64,
    pub divergence: f64,
    pub converged: bool,
    pub iterations: usize,
    pub sigma2: Sigma2,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci_simple: Option<Interval>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci_fisher: Option<Interval>,
    pub df: u32,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub cramers_v2: f64,
    pub u_total: Option<f64>,
    pub pearson_c: f64,
    pub cox_snell: f64,
    pub nagelkerke: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub polychoric_two_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub table: TableInfo,
    pub alpha: f64,
    pub results: Vec<LambdaResult>,
    pub baselines: Baselines,
    pub warnings: Vec<String>,
}

/// Runs every requested λ on one table.
pub fn analyze(
    table: &ContingencyTable,
    opts: &AnalyzeOptions,
) -> Result<AnalysisReport, CliError> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(CliError::Validation(format!(
            "alpha {} is outside (0, 1)",
            opts.alpha
        )));
    }
    let invalid = |e: &dyn std::fmt::Display| CliError::Validation(e.to_string());
    let pt = table.to_probabilities().map_err(|e| invalid(&e))?;
    let cfg = SolveConfig::default();
    let n = table.total();
    let df = ((pt.rows() - 1) * (pt.cols() - 1)) as u32;
    let mut warnings = Vec::new();

    if !pt.dropped_rows().is_empty() {
        warnings.push(format!("dropped empty rows {:?}", pt.dropped_rows()));
    }
    if !pt.dropped_cols().is_empty() {
        warnings.push(format!("dropped empty columns {:?}", pt.dropped_cols()));
    }
    let small = pt
        .cells()
        .filter(|&(_, _, _, q)| n as f64 * q < 5.0)
        .count();
    if small > 0 {
        warnings.push(format!(
            "{small} cells have expected count below 5; intervals may be unreliable"
        ));
    }

    let mut results = Vec::new();
    for &lambda in &opts.lambdas {
        let report = match InferenceReport::new(&pt, n, lambda, &cfg) {
            Ok(r) => r,
            Err(InferenceError::ZeroCellNegativeLambda(_, zeros)) => {
                warnings.push(format!(
                    "lambda = {lambda}: skipped, {zeros} zero cells with lambda < 0"
                ));
                continue;
            }
            Err(e) => return Err(invalid(&e)),
        };
        if !report.fit.converged {
            warnings.push(format!(
                "lambda = {lambda}: Newton iteration did not converge"
            ));
        }
        if report.fit.t < BOUNDARY_T {
            warnings.push(format!(
                "lambda = {lambda}: estimate on the boundary; intervals are on the t scale"
            ));
        }
        let simple = report
            .simple(opts.alpha, Scale::Rho)
            .map_err(|e| invalid(&e))?;
        let fisher = match report.fisher_z(opts.alpha) {
            Ok(ci) => ci,
            Err(InferenceError::BoundaryEstimate(_)) => ConfidenceInterval {
                degenerate: true,
                ..report
                    .simple(opts.alpha, Scale::T)
                    .map_err(|e| invalid(&e))?
            },
            Err(e) => return Err(invalid(&e)),
        };
        let threshold =
            detectable_threshold(opts.alpha, n, df, lambda, &cfg).map_err(|e| invalid(&e))?;
        let v = report.variances;
        results.push(LambdaResult {
            lambda: lambda.value(),
            lambda_label: lambda.to_string(),
            rho: report.fit.rho,
            t: report.fit.t,
            divergence: report.fit.divergence,
            converged: report.fit.converged,
            iterations: report.fit.iterations,
            sigma2: Sigma2 {
                d: v.sigma2_d,
                t: v.sigma2_t,
                rho: v.sigma2_rho,
                z: v.sigma2_z,
            },
            ci_simple: (opts.ci != CiChoice::Fisher).then(|| simple.into()),
            ci_fisher: (opts.ci != CiChoice::Simple).then(|| fisher.into()),
            df,
            threshold,
        });
    }

    let polychoric = if opts.polychoric {
        match polychoric_two_step(&pt, &PolychoricConfig::default()) {
            Ok(est) => {
                if est.at_boundary {
                    warnings.push("polychoric estimate sits on the search bracket".into());
                }
                Some(est.rho)
            }
            Err(e) => {
                warnings.push(format!("polychoric: {e}"));
                None
            }
        }
    } else {
        None
    };

    Ok(AnalysisReport {
        table: TableInfo {
            r: table.rows(),
            c: table.cols(),
            n,
            counts: table.to_grid(),
        },
        alpha: opts.alpha,
        results,
        baselines: Baselines {
            cramers_v2: cramers_v2(&pt),
            u_total: u_total(&pt).ok(),
            pearson_c: pearson_c(&pt),
            cox_snell: cox_snell_r2(&pt),
            nagelkerke: nagelkerke_r2(&pt).ok(),
            polychoric_two_step: polychoric,
        },
        warnings,
    })
}

fn interval(ci: &Option<Interval>) -> String {
    match ci {
        Some(ci) => {
            let mark = if ci.degenerate { "*" } else { "" };
            format!("({:.4}, {:.4}){mark}", ci.lo, ci.hi)
        }
        None => "-".into(),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

/// Four-decimal table for terminals.
pub fn render_human(report: &AnalysisReport) -> String {
    let mut s = String::new();
    let t = &report.table;
    let level = 100.0 * (1.0 - report.alpha);
    let _ = writeln!(s, "table {} x {}, n = {}", t.r, t.c, t.n);
    let _ = writeln!(
        s,
        "{:>6}  {:>7}  {:>7}  {:>7}  {:>18}  {:>18}  {:>9}",
        "lambda",
        "rho",
        "t",
        "D",
        format!("simple {level}%"),
        format!("fisher z {level}%"),
        "threshold"
    );
    for r in &report.results {
        let _ = writeln!(
            s,
            "{:>6}  {:>7.4}  {:>7.4}  {:>7.4}  {:>18}  {:>18}  {:>9.4}",
            r.lambda_label,
            r.rho,
            r.t,
            r.divergence,
            interval(&r.ci_simple),
            interval(&r.ci_fisher),
            r.threshold
        );
    }
    let b = &report.baselines;
    let _ = write!(
        s,
        "cramers_v2 {:.4}  u_total {}  pearson_c {:.4}  cox_snell {:.4}  nagelkerke {}",
        b.cramers_v2,
        opt(b.u_total),
        b.pearson_c,
        b.cox_snell,
        opt(b.nagelkerke)
    );
    if let Some(p) = b.polychoric_two_step {
        let _ = write!(s, "  polychoric {p:.4}");
    }
    s.push('\n');
    if report.results.iter().any(|r| {
        r.ci_simple.is_some_and(|c| c.degenerate) || r.ci_fisher.is_some_and(|c| c.degenerate)
    }) {
        s.push_str("* interval on the t scale (boundary estimate)\n");
    }
    s
}
