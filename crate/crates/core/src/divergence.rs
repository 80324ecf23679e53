//! Power divergence of a probability table from its independence
//! counterpart `{p_i· p_·j}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sum::compensated;
use crate::tables::ProbabilityTable;

/// Distance from 0 or -1 below which the analytic limits are used.
pub const LIMIT_BAND: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivergenceError {
    #[error("lambda = {0} is outside [-1, 1]")]
    InvalidLambda(f64),
    #[error("reverse-KL divergence (lambda = -1) is undefined with {0} zero cells")]
    ZeroCellAtReverseKL(usize),
    #[error("cannot parse lambda from {0:?}")]
    Unparsable(String),
}

/// Power-divergence index λ ∈ [-1, 1].
/// Deserializes from a number or from a token accepted by [`FromStr`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "LambdaRepr", into = "f64")]
pub struct Lambda(f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum LambdaRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<LambdaRepr> for Lambda {
    type Error = DivergenceError;

    fn try_from(repr: LambdaRepr) -> Result<Self, Self::Error> {
        match repr {
            LambdaRepr::Number(v) => Self::new(v),
            LambdaRepr::Text(s) => s.parse(),
        }
    }
}

/// Decimals, or fractions `a/b` such as `2/3` and `-1/2`, which are
/// evaluated in floating point so that `2/3` equals [`Lambda::CRESSIE_READ`].
impl FromStr for Lambda {
    type Err = DivergenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || DivergenceError::Unparsable(s.to_string());
        let value = match s.split_once('/') {
            Some((num, den)) => {
                let num: f64 = num.trim().parse().map_err(|_| bad())?;
                let den: f64 = den.trim().parse().map_err(|_| bad())?;
                num / den
            }
            None => s.parse().map_err(|_| bad())?,
        };
        Self::new(value)
    }
}

impl Lambda {
    pub const REVERSE_KL: Lambda = Lambda(-1.0);
    pub const FREEMAN_TUKEY: Lambda = Lambda(-0.5);
    pub const KL: Lambda = Lambda(0.0);
    pub const CRESSIE_READ: Lambda = Lambda(2.0 / 3.0);
    pub const PEARSON: Lambda = Lambda(1.0);

    pub fn new(value: f64) -> Result<Self, DivergenceError> {
        if value.is_finite() && (-1.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(DivergenceError::InvalidLambda(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Within [`LIMIT_BAND`] of 0: handled as the Kullback–Leibler limit.
    pub fn is_kl(self) -> bool {
        self.0.abs() < LIMIT_BAND
    }

    /// Within [`LIMIT_BAND`] of -1: handled as the reverse-KL limit.
    pub fn is_reverse_kl(self) -> bool {
        (self.0 + 1.0).abs() < LIMIT_BAND
    }

    /// Negative λ make the divergence sensitive to (or undefined at) zero cells.
    pub fn requires_positive_cells(self) -> bool {
        self.0 < 0.0
    }
}

impl TryFrom<f64> for Lambda {
    type Error = DivergenceError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Lambda> for f64 {
    fn from(l: Lambda) -> f64 {
        l.0
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let named = [
            (-1.0, "-1"),
            (-0.5, "-1/2"),
            (0.0, "0"),
            (2.0 / 3.0, "2/3"),
            (1.0, "1"),
        ];
        match named.iter().find(|(v, _)| *v == self.0) {
            Some((_, s)) => f.write_str(s),
            None => write!(f, "{}", self.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceValue {
    pub value: f64,
    pub lambda: Lambda,
    pub zero_cells: usize,
}

/// `D_λ = Σ p_ij [(p_ij / (p_i· p_·j))^λ − 1] / (λ(λ+1))`, with the KL and
/// reverse-KL limits at λ = 0 and λ = -1. Zero cells contribute nothing for
/// λ > -1.
pub fn power_divergence(
    pt: &ProbabilityTable,
    lambda: Lambda,
) -> Result<DivergenceValue, DivergenceError> {
    let zero_cells = pt.zero_cells();
    let value = if lambda.is_kl() {
        kl_sum(pt)
    } else if lambda.is_reverse_kl() {
        if zero_cells > 0 {
            return Err(DivergenceError::ZeroCellAtReverseKL(zero_cells));
        }
        compensated(pt.cells().map(|(_, _, p, q)| q * (q / p).ln()))
    } else {
        let l = lambda.value();
        let sum = compensated(pt.cells().map(|(_, _, p, q)| {
            if p == 0.0 {
                0.0
            } else {
                p * (l * (p / q).ln()).exp_m1()
            }
        }));
        sum / (l * (l + 1.0))
    };
    Ok(DivergenceValue {
        value: value.max(0.0),
        lambda,
        zero_cells,
    })
}

fn kl_sum(pt: &ProbabilityTable) -> f64 {
    compensated(
        pt.cells()
            .filter(|&(_, _, p, _)| p > 0.0)
            .map(|(_, _, p, q)| p * (p / q).ln()),
    )
}

/// Kullback–Leibler divergence `Σ p log(p / (p_i· p_·j))`.
pub fn kl_divergence(pt: &ProbabilityTable) -> DivergenceValue {
    DivergenceValue {
        value: kl_sum(pt).max(0.0),
        lambda: Lambda::KL,
        zero_cells: pt.zero_cells(),
    }
}

/// Pearson divergence `½ Σ (p − p_i· p_·j)² / (p_i· p_·j)`.
pub fn pearson_divergence(pt: &ProbabilityTable) -> DivergenceValue {
    let value = 0.5 * compensated(pt.cells().map(|(_, _, p, q)| (p - q) * (p - q) / q));
    DivergenceValue {
        value,
        lambda: Lambda::PEARSON,
        zero_cells: pt.zero_cells(),
    }
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn margin_entropy(margin: &[f64]) -> f64 {
    -compensated(margin.iter().filter(|&&m| m > 0.0).map(|&m| m * m.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> ProbabilityTable {
        ProbabilityTable::from_probabilities(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap()
    }

    #[test]
    fn lambda_domain() {
        assert!(Lambda::new(1.0001).is_err());
        assert!(Lambda::new(-1.0).is_ok());
        assert!(Lambda::new(f64::NAN).is_err());
        assert!(Lambda::new(1e-10).unwrap().is_kl());
        assert!(Lambda::new(-1.0 + 1e-10).unwrap().is_reverse_kl());
        assert_eq!(Lambda::CRESSIE_READ.to_string(), "2/3");
        assert_eq!(Lambda::new(0.3).unwrap().to_string(), "0.3");
    }

    #[test]
    fn lambda_tokens() {
        assert_eq!("2/3".parse::<Lambda>().unwrap(), Lambda::CRESSIE_READ);
        assert_eq!(" -1/2".parse::<Lambda>().unwrap(), Lambda::FREEMAN_TUKEY);
        assert_eq!("0.25".parse::<Lambda>().unwrap().value(), 0.25);
        assert!(matches!(
            "x".parse::<Lambda>(),
            Err(DivergenceError::Unparsable(_))
        ));
        assert!(matches!(
            "3/2".parse::<Lambda>(),
            Err(DivergenceError::InvalidLambda(_))
        ));
        assert!("1/0".parse::<Lambda>().is_err());
        let v: Vec<Lambda> = serde_json::from_str(r#"[0, "2/3", -0.5]"#).unwrap();
        assert_eq!(v[1], Lambda::CRESSIE_READ);
    }

    #[test]
    fn example_table_values() {
        let pt = example();
        let p1 = power_divergence(&pt, Lambda::PEARSON).unwrap().value;
        assert!((p1 - 0.18).abs() < 1e-15);
        let kl = 0.8 * 1.6f64.ln() + 0.2 * 0.4f64.ln();
        let p0 = power_divergence(&pt, Lambda::KL).unwrap().value;
        assert!((p0 - kl).abs() < 1e-15);
        assert!((kl - 0.192745).abs() < 1e-6);
        assert!((pearson_divergence(&pt).value - 0.18).abs() < 1e-15);
    }

    #[test]
    fn independence_gives_zero_for_every_lambda() {
        let pt =
            ProbabilityTable::from_probabilities(&[vec![0.06, 0.09, 0.15], vec![0.14, 0.21, 0.35]])
                .unwrap();
        for l in [-1.0, -0.5, 0.0, 0.3, 2.0 / 3.0, 1.0] {
            let d = power_divergence(&pt, Lambda::new(l).unwrap()).unwrap();
            assert!(d.value.abs() < 1e-15, "lambda {l}: {}", d.value);
        }
    }

    #[test]
    fn reverse_kl_rejects_zero_cells() {
        let pt = ProbabilityTable::from_probabilities(&[vec![0.5, 0.0], vec![0.25, 0.25]]).unwrap();
        assert_eq!(
            power_divergence(&pt, Lambda::REVERSE_KL),
            Err(DivergenceError::ZeroCellAtReverseKL(1))
        );
        // Slightly above -1 the zero cell simply contributes nothing.
        let d = power_divergence(&pt, Lambda::FREEMAN_TUKEY).unwrap();
        assert!(d.value.is_finite() && d.value > 0.0);
        assert_eq!(d.zero_cells, 1);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(margin_entropy(&[1.0, 0.0]), 0.0);
        assert!((margin_entropy(&[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
    }
}
