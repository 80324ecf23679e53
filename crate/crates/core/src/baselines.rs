//! Classical association measures used for comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::{kl_divergence, margin_entropy, pearson_divergence};
use crate::numerics::{rect_unchecked, std_normal_quantile, NumericsError};
use crate::sum::compensated;
use crate::tables::ProbabilityTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("margins carry no information (entropy sum is zero)")]
    DegenerateMargins,
    #[error("polychoric maximization did not converge in {0} iterations")]
    NonConvergence(usize),
    #[error("invalid polychoric configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Cramér's `V² = χ² / (n min(r−1, c−1)) = 2 I_P / min(r−1, c−1)`.
pub fn cramers_v2(pt: &ProbabilityTable) -> f64 {
    let k = (pt.rows().min(pt.cols()) - 1) as f64;
    (2.0 * pearson_divergence(pt).value / k).min(1.0)
}

/// Symmetric uncertainty coefficient `2 I_KL / (H(X) + H(Y))`.
pub fn u_total(pt: &ProbabilityTable) -> Result<f64, BaselineError> {
    let h = margin_entropy(pt.row_margins()) + margin_entropy(pt.col_margins());
    if h <= 0.0 {
        return Err(BaselineError::DegenerateMargins);
    }
    Ok((2.0 * kl_divergence(pt).value / h).min(1.0))
}

/// Pearson's contingency coefficient `√(χ² / (χ² + n))`. With
/// `χ² = 2n I_P` the sample size cancels.
pub fn pearson_c(pt: &ProbabilityTable) -> f64 {
    let x = 2.0 * pearson_divergence(pt).value;
    (x / (x + 1.0)).sqrt()
}

/// Cox–Snell `R² = 1 − exp(−2 I_KL)`.
pub fn cox_snell_r2(pt: &ProbabilityTable) -> f64 {
    -(-2.0 * kl_divergence(pt).value).exp_m1()
}

/// Nagelkerke's rescaling of [`cox_snell_r2`] by its maximum
/// `1 − exp(−2 min(H(X), H(Y)))`.
pub fn nagelkerke_r2(pt: &ProbabilityTable) -> Result<f64, BaselineError> {
    let h = margin_entropy(pt.row_margins()).min(margin_entropy(pt.col_margins()));
    let max = -(-2.0 * h).exp_m1();
    if max <= 0.0 {
        return Err(BaselineError::DegenerateMargins);
    }
    Ok((cox_snell_r2(pt) / max).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolychoricConfig {
    pub rho_bracket: (f64, f64),
    /// Absolute tolerance on ρ.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PolychoricConfig {
    fn default() -> Self {
        Self {
            rho_bracket: (-1.0 + 1e-6, 1.0 - 1e-6),
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl PolychoricConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let (lo, hi) = self.rho_bracket;
        if !(lo > -1.0 && hi < 1.0 && lo < hi) {
            return Err(BaselineError::InvalidConfig(
                "bracket must be an interval strictly inside (-1, 1)",
            ));
        }
        if !(self.tol > 0.0) {
            return Err(BaselineError::InvalidConfig("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(BaselineError::InvalidConfig("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolychoricEstimate {
    pub rho: f64,
    /// The maximizer sits against an end of the search bracket.
    pub at_boundary: bool,
    pub converged: bool,
    /// `Σ p_ij log π_ij(ρ)` at the maximizer, per observation.
    pub log_likelihood: f64,
    pub iterations: usize,
}

/// Thresholds `Φ⁻¹` of the cumulative margin, with ±∞ at the ends. The
/// smaller of the two tails is inverted to keep precision near 1.
fn thresholds(margin: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let k = margin.len();
    let mut out = Vec::with_capacity(k + 1);
    out.push(f64::NEG_INFINITY);
    for cut in 1..k {
        let lower = compensated(margin[..cut].iter().copied());
        let upper = compensated(margin[cut..].iter().copied());
        out.push(if lower <= upper {
            std_normal_quantile(lower)?
        } else {
            -std_normal_quantile(upper)?
        });
    }
    out.push(f64::INFINITY);
    Ok(out)
}

fn log_likelihood(pt: &ProbabilityTable, a: &[f64], b: &[f64], rho: f64) -> f64 {
    compensated(
        pt.cells()
            .filter(|&(_, _, p, _)| p > 0.0)
            .map(|(i, j, p, _)| {
                let pi = rect_unchecked(a[i], a[i + 1], b[j], b[j + 1], rho);
                p * pi.max(f64::MIN_POSITIVE).ln()
            }),
    )
}

/// Two-step polychoric correlation.
///
/// Thresholds are fixed at the normal quantiles of the cumulative margins,
/// then the multinomial log-likelihood is maximized over ρ by Brent's
/// golden-section/parabolic search on `cfg.rho_bracket`.
pub fn polychoric_two_step(
    pt: &ProbabilityTable,
    cfg: &PolychoricConfig,
) -> Result<PolychoricEstimate, BaselineError> {
    cfg.validate()?;
    let a = thresholds(pt.row_margins())?;
    let b = thresholds(pt.col_margins())?;
    let (lo, hi) = cfg.rho_bracket;
    let best = brent_max(
        |rho| log_likelihood(pt, &a, &b, rho),
        lo,
        hi,
        cfg.tol,
        cfg.max_iter,
    );
    if !best.converged {
        return Err(BaselineError::NonConvergence(best.iterations));
    }
    let edge = 1e-6;
    Ok(PolychoricEstimate {
        rho: best.x,
        at_boundary: best.x - lo < edge || hi - best.x < edge,
        converged: true,
        log_likelihood: best.fx,
        iterations: best.iterations,
    })
}

struct Maximum {
    x: f64,
    fx: f64,
    iterations: usize,
    converged: bool,
}

/// Brent's derivative-free maximization of a unimodal `f` on `[a, b]`.
fn brent_max<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Maximum {
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let eps = f64::EPSILON.sqrt();
    let mut x = a + golden * (b - a);
    let (mut w, mut v) = (x, x);
    // Minimize the negated function.
    let mut fx = -f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);

    for iter in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = eps * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Maximum {
                x,
                fx: -fx,
                iterations: iter,
                converged: true,
            };
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            let mut r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            r = e;
            e = d;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = -f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Maximum {
        x,
        fx: -fx,
        iterations: max_iter,
        converged: false,
    }
}
