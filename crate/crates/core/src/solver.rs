//! Inversion of the divergence–correlation relation.
//!
//! Under bivariate normality the power divergence of a table relates to the
//! squared latent correlation `t = ρ²` through
//!
//! ```text
//! I_λ(t) = [(1 − t)^(−λ/2) (1 − λ² t)^(−1/2) − 1] / (λ(λ + 1)),
//! ```
//!
//! which is strictly increasing on `[0, 1)` for every λ ∈ [-1, 1]. Given an
//! observed divergence `D`, [`solve_t`] finds the unique `t` with
//! `I_λ(t) = D` by safeguarded Newton iteration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::{power_divergence, DivergenceError, Lambda};
use crate::tables::ProbabilityTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("t = {0} is outside [0, 1)")]
    TOutOfRange(f64),
    #[error("divergence {0} is not a finite nonnegative number")]
    NonFiniteInput(f64),
    #[error("closed form only exists for lambda in {{0, 1}}, got {0}")]
    UnsupportedLambda(f64),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Stop when `|t_{k+1} − t_k| < delta`.
    pub delta: f64,
    /// Iterates are confined to `[0, 1 − epsilon]`.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            delta: 1e-8,
            epsilon: 1e-12,
            max_iter: 100,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SolverError::InvalidConfig("delta must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1e-3) {
            return Err(SolverError::InvalidConfig("epsilon must lie in (0, 1e-3)"));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveResult {
    /// Squared correlation `ρ²_(λ)`.
    pub t: f64,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|I_λ(t) − D|` at the returned `t`.
    pub residual: f64,
    /// The divergence that was inverted.
    pub divergence: f64,
}

fn check_t(t: f64) -> Result<(), SolverError> {
    if (0.0..1.0).contains(&t) {
        Ok(())
    } else {
        Err(SolverError::TOutOfRange(t))
    }
}

/// `log S_λ(t)` with `S_λ(t) = (1 − t)^(−λ/2) (1 − λ² t)^(−1/2)`.
fn log_s(t: f64, l: f64) -> f64 {
    -0.5 * l * (-t).ln_1p() - 0.5 * (-l * l * t).ln_1p()
}

fn i_unchecked(t: f64, lambda: Lambda) -> f64 {
    if lambda.is_kl() {
        -0.5 * (-t).ln_1p()
    } else if lambda.is_reverse_kl() {
        0.5 * (-t).ln_1p() + t / (1.0 - t)
    } else {
        let l = lambda.value();
        log_s(t, l).exp_m1() / (l * (l + 1.0))
    }
}

fn i_prime_unchecked(t: f64, lambda: Lambda) -> f64 {
    if lambda.is_kl() {
        0.5 / (1.0 - t)
    } else if lambda.is_reverse_kl() {
        (1.0 + t) / (2.0 * (1.0 - t) * (1.0 - t))
    } else {
        let l = lambda.value();
        log_s(t, l).exp() / (2.0 * (l + 1.0)) * (1.0 / (1.0 - t) + l / (1.0 - l * l * t))
    }
}

/// `I_λ(t)`, the divergence implied by squared latent correlation `t`.
pub fn i_of_t(t: f64, lambda: Lambda) -> Result<f64, SolverError> {
    check_t(t)?;
    Ok(i_unchecked(t, lambda))
}

/// Derivative of [`i_of_t`] with respect to `t`; strictly positive.
pub fn i_prime(t: f64, lambda: Lambda) -> Result<f64, SolverError> {
    check_t(t)?;
    Ok(i_prime_unchecked(t, lambda))
}

/// Starting value `t₀ = 2D − (3λ² − λ + 2) D²` from the quadratic expansion
/// of `I_λ`, clamped to `[0, 1 − epsilon]`.
pub fn initial_t(d: f64, lambda: Lambda, epsilon: f64) -> f64 {
    let l = lambda.value();
    let t0 = 2.0 * d - (3.0 * l * l - l + 2.0) * d * d;
    t0.clamp(0.0, 1.0 - epsilon)
}

/// Solves `I_λ(t) = d` for `t ∈ [0, 1)`.
///
/// Newton iteration from [`initial_t`] on `[0, 1 − epsilon]`. Since `I_λ` is
/// increasing, every evaluated iterate tightens a bracket around the root; a
/// Newton step that would leave the bracket is replaced by bisection. Stops
/// when the step falls below `cfg.delta` or the residual below
/// `1e-12 (1 + d)`. Running out of iterations, or a root beyond
/// `1 − epsilon`, is reported through `converged = false`.
pub fn solve_t(d: f64, lambda: Lambda, cfg: &SolveConfig) -> Result<SolveResult, SolverError> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(SolverError::NonFiniteInput(d));
    }
    cfg.validate()?;
    let tol = 1e-12 * (1.0 + d);
    let top = 1.0 - cfg.epsilon;
    let done = |t: f64, iterations: usize, converged: bool| SolveResult {
        t,
        rho: t.sqrt(),
        iterations,
        converged,
        residual: (i_unchecked(t, lambda) - d).abs(),
        divergence: d,
    };
    if d == 0.0 {
        return Ok(done(0.0, 0, true));
    }
    if i_unchecked(top, lambda) < d {
        // Root lies beyond the search interval.
        return Ok(done(top, 0, false));
    }

    let (mut lo, mut hi) = (0.0, top);
    let mut t = initial_t(d, lambda, cfg.epsilon);
    for k in 1..=cfg.max_iter {
        let f = i_unchecked(t, lambda) - d;
        if f.abs() < tol {
            return Ok(done(t, k - 1, true));
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - f / i_prime_unchecked(t, lambda);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - t).abs();
        t = next;
        if step < cfg.delta {
            return Ok(done(t, k, true));
        }
    }
    Ok(done(t, cfg.max_iter, false))
}

/// Exact inversion at λ = 0 (`ρ² = 1 − e^{−2D}`) and λ = 1
/// (`ρ² = 1 − 1/(2D + 1)`). Returns `ρ`.
pub fn rho_closed_form(d: f64, lambda: Lambda) -> Result<f64, SolverError> {
    closed_form_t(d, lambda).map(f64::sqrt)
}

fn closed_form_t(d: f64, lambda: Lambda) -> Result<f64, SolverError> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(SolverError::NonFiniteInput(d));
    }
    if lambda.is_kl() {
        Ok(-(-2.0 * d).exp_m1())
    } else if lambda.value() == 1.0 {
        Ok(2.0 * d / (2.0 * d + 1.0))
    } else {
        Err(SolverError::UnsupportedLambda(lambda.value()))
    }
}

/// The measure `ρ_(λ)` of a table: power divergence followed by inversion.
///
/// λ = 0 and λ = 1 use the closed forms; debug builds cross-check them
/// against the Newton solution.
pub fn rho_lambda(
    pt: &ProbabilityTable,
    lambda: Lambda,
    cfg: &SolveConfig,
) -> Result<SolveResult, SolverError> {
    let d = power_divergence(pt, lambda)?.value;
    solve_divergence(d, lambda, cfg)
}

pub(crate) fn solve_divergence(
    d: f64,
    lambda: Lambda,
    cfg: &SolveConfig,
) -> Result<SolveResult, SolverError> {
    match closed_form_t(d, lambda) {
        Ok(t) => {
            let t = t.min(1.0 - cfg.epsilon);
            #[cfg(debug_assertions)]
            {
                let newton = solve_t(d, lambda, cfg)?;
                debug_assert!(
                    !newton.converged || (newton.t - t).abs() <= 1e-9,
                    "closed form {t} vs Newton {} at D = {d}",
                    newton.t
                );
            }
            Ok(SolveResult {
                t,
                rho: t.sqrt(),
                iterations: 0,
                converged: true,
                residual: (i_unchecked(t, lambda) - d).abs(),
                divergence: d,
            })
        }
        Err(SolverError::UnsupportedLambda(_)) => solve_t(d, lambda, cfg),
        Err(e) => Err(e),
    }
}
