//! Delta-method asymptotics, confidence intervals and detectable-correlation
//! thresholds.
//!
//! With `σ²_D = ∇D_λ(p)ᵀ (diag(p) − ppᵀ) ∇D_λ(p)` the per-observation
//! variance of the plug-in divergence, the estimators satisfy
//!
//! ```text
//! σ²_t = σ²_D / I'_λ(t)²          (t = ρ²)
//! σ²_ρ = σ²_t / (4 t)
//! σ²_z = σ²_ρ / (1 − t)²          (z = artanh ρ)
//! ```
//!
//! and every variance is divided by `n` to form an interval.

use serde::Serialize;
use thiserror::Error;

use crate::divergence::{power_divergence, DivergenceError, Lambda};
use crate::numerics::{chi2_quantile, std_normal_quantile, NumericsError};
use crate::solver::{i_prime, solve_divergence, solve_t, SolveConfig, SolveResult, SolverError};
use crate::sum::compensated;
use crate::tables::ProbabilityTable;

/// Estimates with `t̂` below this are treated as lying on the boundary, where
/// the ρ- and z-scale variances are undefined.
pub const BOUNDARY_T: f64 = 1e-10;

/// Expected counts below this trigger the small-cell warning.
pub const SMALL_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("lambda = {0} < 0 needs strictly positive cells, found {1} zero cells")]
    ZeroCellNegativeLambda(f64, usize),
    #[error("estimate t = {0:e} is on the boundary; rho and z scale variances are undefined")]
    BoundaryEstimate(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

/// Row-major gradient of `D_λ` with respect to the cell probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gradient(pub Vec<f64>);

fn check_cells(pt: &ProbabilityTable, lambda: Lambda) -> Result<(), InferenceError> {
    let zeros = pt.zero_cells();
    if lambda.requires_positive_cells() && zeros > 0 {
        return Err(InferenceError::ZeroCellNegativeLambda(
            lambda.value(),
            zeros,
        ));
    }
    Ok(())
}

/// Gradient `∂D_λ/∂p_st` with margins treated as functions of `p`:
///
/// ```text
/// (1/λ) x_st^λ − 1/(λ+1) Σ_i (p_it/p_·t) x_it^λ − 1/(λ+1) Σ_j (p_sj/p_s·) x_sj^λ
/// ```
///
/// with `x_ij = p_ij / (p_i· p_·j)`. At λ = 0 the divergent constant is
/// dropped, giving `log x_st`; at λ = -1 likewise
/// `−1/x_st − Σ_i p_i· log x_it − Σ_j p_·j log x_sj`. Constant shifts do not
/// affect [`sigma2_d`]. Entries of zero cells at λ = 0 are set to 0; they carry
/// no weight in the multinomial covariance.
pub fn grad_d(pt: &ProbabilityTable, lambda: Lambda) -> Result<Gradient, InferenceError> {
    check_cells(pt, lambda)?;
    let (r, c) = (pt.rows(), pt.cols());
    let rm = pt.row_margins();
    let cm = pt.col_margins();
    let x = |i: usize, j: usize| pt.get(i, j) / (rm[i] * cm[j]);

    let g = if lambda.is_kl() {
        pt.cells()
            .map(|(_, _, p, q)| if p > 0.0 { (p / q).ln() } else { 0.0 })
            .collect()
    } else if lambda.is_reverse_kl() {
        let col_terms: Vec<f64> = (0..c)
            .map(|j| compensated((0..r).map(|i| rm[i] * x(i, j).ln())))
            .collect();
        let row_terms: Vec<f64> = (0..r)
            .map(|i| compensated((0..c).map(|j| cm[j] * x(i, j).ln())))
            .collect();
        pt.cells()
            .map(|(i, j, _, _)| -1.0 / x(i, j) - col_terms[j] - row_terms[i])
            .collect()
    } else {
        let l = lambda.value();
        let pow = |i: usize, j: usize| {
            let p = pt.get(i, j);
            if p == 0.0 {
                0.0
            } else {
                x(i, j).powf(l)
            }
        };
        let col_terms: Vec<f64> = (0..c)
            .map(|j| compensated((0..r).map(|i| pt.get(i, j) / cm[j] * pow(i, j))))
            .collect();
        let row_terms: Vec<f64> = (0..r)
            .map(|i| compensated((0..c).map(|j| pt.get(i, j) / rm[i] * pow(i, j))))
            .collect();
        pt.cells()
            .map(|(i, j, _, _)| pow(i, j) / l - (col_terms[j] + row_terms[i]) / (l + 1.0))
            .collect()
    };
    Ok(Gradient(g))
}

/// Gradient shifted by a constant so that it stays O(1) as λ approaches 0
/// or -1: every `x^λ` is replaced by `x^λ − 1`.
fn centered_gradient(pt: &ProbabilityTable, lambda: Lambda) -> Result<Vec<f64>, InferenceError> {
    if lambda.is_kl() || lambda.is_reverse_kl() {
        return grad_d(pt, lambda).map(|g| g.0);
    }
    check_cells(pt, lambda)?;
    let (r, c) = (pt.rows(), pt.cols());
    let rm = pt.row_margins();
    let cm = pt.col_margins();
    let l = lambda.value();
    let pow_m1 = |i: usize, j: usize| {
        let p = pt.get(i, j);
        if p == 0.0 {
            -1.0
        } else {
            (l * (p / (rm[i] * cm[j])).ln()).exp_m1()
        }
    };
    let col_terms: Vec<f64> = (0..c)
        .map(|j| compensated((0..r).map(|i| pt.get(i, j) / cm[j] * pow_m1(i, j))))
        .collect();
    let row_terms: Vec<f64> = (0..r)
        .map(|i| compensated((0..c).map(|j| pt.get(i, j) / rm[i] * pow_m1(i, j))))
        .collect();
    Ok(pt
        .cells()
        .map(|(i, j, _, _)| pow_m1(i, j) / l - (col_terms[j] + row_terms[i]) / (l + 1.0))
        .collect())
}

/// `gᵀ (diag(p) − ppᵀ) g`, evaluated as `Σ p_k (g_k − ḡ)²` with
/// `ḡ = Σ p_k g_k`. Cells with `p_k = 0` are skipped.
pub fn multinomial_quadratic_form(p: &[f64], g: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), g.len());
    let weighted = || p.iter().zip(g).filter(|(&pk, _)| pk > 0.0);
    let mean = compensated(weighted().map(|(&pk, &gk)| pk * gk));
    compensated(weighted().map(|(&pk, &gk)| pk * (gk - mean) * (gk - mean))).max(0.0)
}

/// Per-observation asymptotic variance `σ²_D` of the plug-in divergence.
pub fn sigma2_d(pt: &ProbabilityTable, lambda: Lambda) -> Result<f64, InferenceError> {
    let g = centered_gradient(pt, lambda)?;
    Ok(multinomial_quadratic_form(pt.flatten(), &g))
}

/// Per-observation variances on the divergence, `t`, `ρ` and `z` scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticVariances {
    pub sigma2_d: f64,
    pub sigma2_t: f64,
    /// `None` when the estimate is on the boundary (`t̂ < 1e-10`).
    pub sigma2_rho: Option<f64>,
    pub sigma2_z: Option<f64>,
}

impl AsymptoticVariances {
    fn at(sigma2_d: f64, t: f64, lambda: Lambda) -> Result<Self, InferenceError> {
        let slope = i_prime(t, lambda)?;
        let sigma2_t = sigma2_d / (slope * slope);
        let (sigma2_rho, sigma2_z) = if t < BOUNDARY_T {
            (None, None)
        } else {
            let s_rho = sigma2_t / (4.0 * t);
            (Some(s_rho), Some(s_rho / ((1.0 - t) * (1.0 - t))))
        };
        Ok(Self {
            sigma2_d,
            sigma2_t,
            sigma2_rho,
            sigma2_z,
        })
    }

    /// `(σ²_ρ, σ²_z)`, or [`InferenceError::BoundaryEstimate`].
    pub fn rho_scale(&self, t: f64) -> Result<(f64, f64), InferenceError> {
        match (self.sigma2_rho, self.sigma2_z) {
            (Some(r), Some(z)) => Ok((r, z)),
            _ => Err(InferenceError::BoundaryEstimate(t)),
        }
    }
}

/// Variances at the table's own estimate `t̂_(λ)`.
pub fn asymptotic_variances(
    pt: &ProbabilityTable,
    lambda: Lambda,
    cfg: &SolveConfig,
) -> Result<AsymptoticVariances, InferenceError> {
    let d = power_divergence(pt, lambda)?.value;
    let fit = solve_divergence(d, lambda, cfg)?;
    AsymptoticVariances::at(sigma2_d(pt, lambda)?, fit.t, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    SimpleT,
    SimpleRho,
    FisherZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    T,
    Rho,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage `1 − α`.
    pub level: f64,
    pub method: CiMethod,
    /// Set when a ρ-scale interval was requested at a boundary estimate and
    /// the t-scale interval was returned instead.
    pub degenerate: bool,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

fn clip_unit(x: f64) -> f64 {
    x.clamp(0.0, BELOW_ONE)
}

fn normal_critical(alpha: f64) -> Result<f64, InferenceError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(InferenceError::InvalidArgument("alpha must lie in (0, 1)"));
    }
    Ok(std_normal_quantile(1.0 - alpha / 2.0)?)
}

/// Everything the intervals need for one table and one λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InferenceReport {
    pub lambda: Lambda,
    pub n: u64,
    pub fit: SolveResult,
    pub variances: AsymptoticVariances,
    /// Some expected count `n p_i· p_·j` is below 5.
    pub small_cells: bool,
}

impl InferenceReport {
    pub fn new(
        pt: &ProbabilityTable,
        n: u64,
        lambda: Lambda,
        cfg: &SolveConfig,
    ) -> Result<Self, InferenceError> {
        if n == 0 {
            return Err(InferenceError::InvalidArgument("n must be at least 1"));
        }
        check_cells(pt, lambda)?;
        let d = power_divergence(pt, lambda)?.value;
        let fit = solve_divergence(d, lambda, cfg)?;
        let variances = AsymptoticVariances::at(sigma2_d(pt, lambda)?, fit.t, lambda)?;
        let small_cells = pt
            .cells()
            .any(|(_, _, _, q)| n as f64 * q < SMALL_EXPECTED_COUNT);
        Ok(Self {
            lambda,
            n,
            fit,
            variances,
            small_cells,
        })
    }

    pub fn is_boundary(&self) -> bool {
        self.fit.t < BOUNDARY_T
    }

    /// `t̂ ± z_{α/2} √(σ²_t/n)` or `ρ̂ ± z_{α/2} √(σ²_ρ/n)`, clipped to
    /// `[0, 1)`. A ρ-scale request at a boundary estimate falls back to the
    /// t scale with `degenerate = true`.
    pub fn simple(&self, alpha: f64, scale: Scale) -> Result<ConfidenceInterval, InferenceError> {
        let z = normal_critical(alpha)?;
        let n = self.n as f64;
        let t_interval = |degenerate| {
            let half = z * (self.variances.sigma2_t / n).sqrt();
            ConfidenceInterval {
                lower: clip_unit(self.fit.t - half),
                upper: clip_unit(self.fit.t + half),
                level: 1.0 - alpha,
                method: CiMethod::SimpleT,
                degenerate,
            }
        };
        match scale {
            Scale::T => Ok(t_interval(false)),
            Scale::Rho => match self.variances.rho_scale(self.fit.t) {
                Ok((s_rho, _)) => {
                    let half = z * (s_rho / n).sqrt();
                    Ok(ConfidenceInterval {
                        lower: clip_unit(self.fit.rho - half),
                        upper: clip_unit(self.fit.rho + half),
                        level: 1.0 - alpha,
                        method: CiMethod::SimpleRho,
                        degenerate: false,
                    })
                }
                Err(_) => Ok(t_interval(true)),
            },
        }
    }

    /// Interval for `ρ` from `artanh ρ̂ ± z_{α/2} √(σ²_z/n)`, mapped back with
    /// `tanh` and clipped to `[0, 1)`.
    pub fn fisher_z(&self, alpha: f64) -> Result<ConfidenceInterval, InferenceError> {
        let z = normal_critical(alpha)?;
        let (lo, hi) = self.fisher_z_unclipped(z)?;
        Ok(ConfidenceInterval {
            lower: clip_unit(lo),
            upper: clip_unit(hi),
            level: 1.0 - alpha,
            method: CiMethod::FisherZ,
            degenerate: false,
        })
    }

    /// Back-transformed bounds before clipping; always inside (-1, 1).
    pub fn fisher_z_bounds(&self, alpha: f64) -> Result<(f64, f64), InferenceError> {
        let z = normal_critical(alpha)?;
        self.fisher_z_unclipped(z)
    }

    fn fisher_z_unclipped(&self, z: f64) -> Result<(f64, f64), InferenceError> {
        if self.fit.rho >= 1.0 - 1e-9 {
            return Err(InferenceError::BoundaryEstimate(self.fit.t));
        }
        let (_, s_z) = self.variances.rho_scale(self.fit.t)?;
        let centre = self.fit.rho.atanh();
        let half = z * (s_z / self.n as f64).sqrt();
        Ok(((centre - half).tanh(), (centre + half).tanh()))
    }
}

/// Simple-method interval for one table.
pub fn ci_simple(
    pt: &ProbabilityTable,
    n: u64,
    lambda: Lambda,
    alpha: f64,
    scale: Scale,
    cfg: &SolveConfig,
) -> Result<ConfidenceInterval, InferenceError> {
    InferenceReport::new(pt, n, lambda, cfg)?.simple(alpha, scale)
}

/// Fisher's z interval for one table.
pub fn ci_fisher_z(
    pt: &ProbabilityTable,
    n: u64,
    lambda: Lambda,
    alpha: f64,
    cfg: &SolveConfig,
) -> Result<ConfidenceInterval, InferenceError> {
    InferenceReport::new(pt, n, lambda, cfg)?.fisher_z(alpha)
}

/// Smallest `ρ_(λ)` whose divergence reaches the independence test's
/// critical value: `D = χ²_{α,df} / (2n)`, inverted by Newton's method.
pub fn detectable_threshold(
    alpha: f64,
    n: u64,
    df: u32,
    lambda: Lambda,
    cfg: &SolveConfig,
) -> Result<f64, InferenceError> {
    if n == 0 {
        return Err(InferenceError::InvalidArgument("n must be at least 1"));
    }
    let d = chi2_quantile(alpha, df)? / (2.0 * n as f64);
    Ok(solve_t(d, lambda, cfg)?.rho)
}
