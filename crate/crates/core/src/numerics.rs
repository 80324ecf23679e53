//! Special functions: univariate and bivariate normal probabilities and the
//! chi-squared quantile.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

const TWO_PI: f64 = 2.0 * PI;

/// Largest |rho| accepted by [`BvnParams::clamped`].
pub const RHO_LIMIT: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("{what} = {value} is outside its domain")]
    OutOfDomain { what: &'static str, value: f64 },
    #[error("rectangle bounds must be increasing: ({x_lo}, {x_hi}] x ({y_lo}, {y_hi}]")]
    InvalidRect {
        x_lo: f64,
        x_hi: f64,
        y_lo: f64,
        y_hi: f64,
    },
    #[error("correlation {0} must lie strictly inside (-1, 1)")]
    RhoOutOfRange(f64),
    #[error("chi-squared quantile did not converge for alpha = {alpha}, df = {df}")]
    NoConvergence { alpha: f64, df: u32 },
}

/// Correlation of a standard bivariate normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvnParams {
    rho: f64,
}

impl BvnParams {
    pub fn new(rho: f64) -> Result<Self, NumericsError> {
        if rho.is_finite() && rho.abs() < 1.0 {
            Ok(Self { rho })
        } else {
            Err(NumericsError::RhoOutOfRange(rho))
        }
    }

    /// Clamps `rho` into `[-RHO_LIMIT, RHO_LIMIT]`; the flag reports whether
    /// clamping happened.
    pub fn clamped(rho: f64) -> (Self, bool) {
        let c = rho.clamp(-RHO_LIMIT, RHO_LIMIT);
        (Self { rho: c }, c != rho)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / TWO_PI.sqrt()
}

/// Standard normal CDF Φ(x). Accepts ±∞.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail Φ(-x), accurate for large positive `x`.
fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Inverse of [`std_normal_cdf`] on (0, 1).
///
/// Acklam's rational approximation (relative error about 1e-9) followed by a
/// single Newton step against the erfc-based CDF.
pub fn std_normal_quantile(p: f64) -> Result<f64, NumericsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(NumericsError::OutOfDomain {
            what: "p",
            value: p,
        });
    }
    // 1 - p is exact for p >= 0.5, so reflect into the lower half.
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let x = acklam(p);
    let err = std_normal_cdf(x) - p;
    x - err / std_normal_pdf(x)
}

#[allow(clippy::excessive_precision)]
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

// Gauss-Legendre abscissae (negative half) and weights for 6, 12 and 20
// points, from Genz's TVPACK.
#[allow(clippy::excessive_precision)]
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];
#[allow(clippy::excessive_precision)]
const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];
#[allow(clippy::excessive_precision)]
const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

/// `P(X > h, Y > k)` for finite `h`, `k` and |r| < 1, following the
/// Drezner–Wesolowsky method as refined in Genz's BVND.
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    let abs_r = r.abs();
    let quad: &[(f64, f64)] = if abs_r < 0.3 {
        &GL6
    } else if abs_r < 0.75 {
        &GL12
    } else {
        &GL20
    };

    if abs_r < 0.925 {
        let hk = h * k;
        let mut bvn = 0.0;
        if abs_r > 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = r.asin();
            for &(w, x) in quad {
                for sign in [1.0, -1.0] {
                    let sn = (asr * (sign * x + 1.0) / 2.0).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr / (2.0 * TWO_PI);
        }
        return bvn + std_normal_sf(h) * std_normal_sf(k);
    }

    let (h, k) = if r < 0.0 { (h, -k) } else { (h, k) };
    let hk = h * k;
    let mut bvn = 0.0;
    let a_s = (1.0 - r) * (1.0 + r);
    let mut a = a_s.sqrt();
    let b_s = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    let asr = -(b_s / a_s + hk) / 2.0;
    if asr > -100.0 {
        bvn = a
            * asr.exp()
            * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
    }
    if -hk < 100.0 {
        let b = b_s.sqrt();
        bvn -= (-hk / 2.0).exp()
            * TWO_PI.sqrt()
            * std_normal_sf(b / a)
            * b
            * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
    }
    a /= 2.0;
    for &(w, x) in quad {
        for sign in [1.0, -1.0] {
            let xs = (a * (sign * x + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            let asr = -(b_s / xs + hk) / 2.0;
            if asr > -100.0 {
                bvn += a
                    * w
                    * asr.exp()
                    * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                        - (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
    }
    bvn = -bvn / TWO_PI;
    if r > 0.0 {
        bvn + std_normal_sf(h.max(k))
    } else {
        -bvn + (std_normal_sf(h) - std_normal_sf(k)).max(0.0)
    }
}

/// Lower-orthant probability `P(X ≤ h, Y ≤ k)` of the standard bivariate
/// normal with correlation `rho`. Bounds may be infinite.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return std_normal_cdf(k);
    }
    if k == f64::INFINITY {
        return std_normal_cdf(h);
    }
    bvn_upper(-h, -k, rho)
}

/// Probability of the rectangle `(x_lo, x_hi] × (y_lo, y_hi]` under the
/// standard bivariate normal with correlation `rho`.
///
/// Rectangles lying mostly in the upper half are reflected through the
/// origin first, so the four orthant values being differenced stay small.
pub fn bvn_rect_prob(
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    rho: f64,
) -> Result<f64, NumericsError> {
    if !(x_lo < x_hi && y_lo < y_hi) {
        return Err(NumericsError::InvalidRect {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        });
    }
    let params = BvnParams::new(rho)?;
    Ok(rect_unchecked(x_lo, x_hi, y_lo, y_hi, params.rho()))
}

pub(crate) fn rect_unchecked(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, rho: f64) -> f64 {
    let mx = std_normal_cdf(x_lo) + std_normal_cdf(x_hi);
    let my = std_normal_cdf(y_lo) + std_normal_cdf(y_hi);
    let (x_lo, x_hi, y_lo, y_hi) = if mx + my > 2.0 {
        (-x_hi, -x_lo, -y_hi, -y_lo)
    } else {
        (x_lo, x_hi, y_lo, y_hi)
    };
    let corners = (bvn_cdf(x_hi, y_hi, rho) + bvn_cdf(x_lo, y_lo, rho))
        - (bvn_cdf(x_lo, y_hi, rho) + bvn_cdf(x_hi, y_lo, rho));
    debug_assert!(corners >= -1e-12, "rectangle probability {corners}");
    corners.clamp(0.0, 1.0)
}

/// Regularized lower incomplete gamma `P(a, x)` and its complement `Q(a, x)`.
pub(crate) fn regularized_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefix = -x + a * x.ln() - libm::lgamma(a);
    if x < a + 1.0 {
        // Series for P.
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = sum * log_prefix.exp();
        (p, 1.0 - p)
    } else {
        // Modified Lentz continued fraction for Q.
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-17 {
                break;
            }
        }
        let q = log_prefix.exp() * h;
        (1.0 - q, q)
    }
}

/// Upper-tail chi-squared quantile: the `x` with `P(χ²_df > x) = alpha`.
pub fn chi2_quantile(alpha: f64, df: u32) -> Result<f64, NumericsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(NumericsError::OutOfDomain {
            what: "alpha",
            value: alpha,
        });
    }
    if df == 0 {
        return Err(NumericsError::OutOfDomain {
            what: "df",
            value: 0.0,
        });
    }
    let a = f64::from(df) / 2.0;
    // Work with whichever tail is smaller to keep the residual well scaled.
    let upper = alpha <= 0.5;
    let target = if upper { alpha } else { 1.0 - alpha };
    let residual = |x: f64| {
        let (p, q) = regularized_gamma(a, x / 2.0);
        if upper {
            target - q
        } else {
            p - target
        }
    };
    // residual is increasing in x in both branches.
    let density = |x: f64| ((a - 1.0) * x.ln() - x / 2.0 - a * 2f64.ln() - libm::lgamma(a)).exp();

    // Wilson-Hilferty start.
    let z = -lower_quantile(alpha.min(1.0 - alpha)) * if upper { 1.0 } else { -1.0 };
    let v = 2.0 / (9.0 * f64::from(df));
    let mut x = (f64::from(df) * (1.0 - v + z * v.sqrt()).powi(3)).max(1e-8);

    let mut lo = 0.0;
    let mut hi = x.max(1.0);
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(NumericsError::NoConvergence { alpha, df });
        }
    }
    for _ in 0..200 {
        let f = residual(x);
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let mut next = x - f / density(x);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(NumericsError::NoConvergence { alpha, df })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_limits_and_centre() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn quantile_domain() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        for p in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(
                std_normal_quantile(p),
                Err(NumericsError::OutOfDomain { .. })
            ));
        }
    }

    #[test]
    fn quantile_inverts_cdf_in_both_tails() {
        for &p in &[1e-300, 1e-20, 1e-8, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-12] {
            let x = std_normal_quantile(p).unwrap();
            let back = std_normal_cdf(x);
            assert!(
                (back - p).abs() <= 1e-10 && (back - p).abs() <= 1e-12 * p.max(1e-300) * 1e3,
                "p={p} x={x} back={back}"
            );
        }
    }

    #[test]
    fn full_plane_and_quadrants() {
        let inf = f64::INFINITY;
        assert!((bvn_rect_prob(-inf, inf, -inf, inf, 0.7).unwrap() - 1.0).abs() < 1e-15);
        assert!((bvn_rect_prob(-inf, 0.0, -inf, 0.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rect_argument_errors() {
        assert!(matches!(
            bvn_rect_prob(1.0, 0.0, 0.0, 1.0, 0.1),
            Err(NumericsError::InvalidRect { .. })
        ));
        assert!(matches!(
            bvn_rect_prob(0.0, 1.0, 0.0, 1.0, 1.0),
            Err(NumericsError::RhoOutOfRange(_))
        ));
    }

    #[test]
    fn negative_high_correlation_matches_reflection() {
        // P(X<=h, Y<=k; -r) = Φ(h) - P(X<=h, Y<=-k; r)
        for &(h, k) in &[(0.3, -0.2), (-1.5, 1.0), (2.0, 2.5), (-0.7, -0.4)] {
            for &r in &[0.93, 0.97, 0.999] {
                let lhs = bvn_cdf(h, k, -r);
                let rhs = std_normal_cdf(h) - bvn_cdf(h, -k, r);
                assert!(
                    (lhs - rhs).abs() < 1e-13,
                    "h={h} k={k} r={r}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn clamped_params_report_clamping() {
        let (p, clamped) = BvnParams::clamped(1.0);
        assert!(clamped);
        assert_eq!(p.rho(), RHO_LIMIT);
        let (p, clamped) = BvnParams::clamped(0.3);
        assert!(!clamped);
        assert_eq!(p.rho(), 0.3);
    }

    #[test]
    fn chi2_exponential_median() {
        let x = chi2_quantile(0.5, 2).unwrap();
        assert!((x - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn chi2_domain() {
        assert!(chi2_quantile(0.0, 2).is_err());
        assert!(chi2_quantile(1.0, 2).is_err());
        assert!(chi2_quantile(0.05, 0).is_err());
    }
}
