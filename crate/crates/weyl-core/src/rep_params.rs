//! Parameters `(N, n, nu)` of an irreducible unitary representation of SO°(N,1),
//! their series classification, and the scalar invariants that enter the
//! Sobolev norms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};

/// Tolerance used when deciding which admissible set contains `nu`.
pub const EPS_CLASS: f64 = 1e-9;

/// Sign of a discrete-series representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

/// The family an irreducible unitary representation belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum SeriesClass {
    Principal,
    Complementary { j: usize },
    Endpoint { j: usize },
    Discrete { sign: Sign, p: i64 },
    Trivial,
}

/// Representation parameters. Construct with [`RepSpec::new`] or
/// [`RepSpec::discrete`]; the series is derived and cached.
#[derive(Clone, Debug, PartialEq)]
pub struct RepSpec {
    dim: usize,
    n: Vec<i64>,
    nu: Complex64,
    series: SeriesClass,
}

fn check_tuple(dim: usize, n: &[i64]) -> Result<()> {
    if dim < 3 {
        return Err(WeylError::InvalidN(dim));
    }
    let expected = (dim - 1) / 2;
    let bad = |reason: &str| WeylError::InvalidTuple {
        dim,
        n: n.to_vec(),
        reason: reason.to_string(),
    };
    if n.len() != expected {
        return Err(bad(&format!("expected {expected} entries")));
    }
    if dim % 2 == 0 {
        if n.first().is_some_and(|&v| v < 0) {
            return Err(bad("need 0 <= n_1"));
        }
        if n.windows(2).any(|w| w[0] > w[1]) {
            return Err(bad("need n_1 <= ... <= n_{k-1}"));
        }
    } else {
        if n.len() >= 2 && n[0].abs() > n[1] {
            return Err(bad("need |n_1| <= n_2"));
        }
        if n.len() >= 2 && n[1..].windows(2).any(|w| w[0] > w[1]) {
            return Err(bad("need n_2 <= ... <= n_k"));
        }
    }
    Ok(())
}

/// Classifies `(N, n, nu)` into its series. Where an end-point value also
/// matches a discrete-series value, the end-point class is returned; use
/// [`RepSpec::discrete`] to select the discrete interpretation explicitly.
pub fn classify(dim: usize, n: &[i64], nu: Complex64) -> Result<SeriesClass> {
    check_tuple(dim, n)?;
    let invalid = || WeylError::InvalidNu {
        dim,
        n: n.to_vec(),
        re: nu.re,
        im: nu.im,
    };
    let half_dim = (dim as f64 - 1.0) / 2.0;
    let all_zero = n.iter().all(|&v| v == 0);
    if all_zero && nu.im.abs() <= EPS_CLASS && (nu.re - half_dim).abs() <= EPS_CLASS {
        return Ok(SeriesClass::Trivial);
    }
    if nu.re.abs() <= EPS_CLASS && nu.im >= -EPS_CLASS {
        return Ok(SeriesClass::Principal);
    }
    if nu.im.abs() > EPS_CLASS || nu.re < 0.0 {
        return Err(invalid());
    }
    let x = nu.re;
    if dim % 2 == 0 {
        let j = n.iter().take_while(|&&v| v == 0).count() + 1;
        let end = j as f64 - 0.5;
        if (x - end).abs() <= EPS_CLASS {
            return Ok(SeriesClass::Endpoint { j });
        }
        if x > 0.0 && x < end {
            return Ok(SeriesClass::Complementary { j });
        }
        if let Some(&n1) = n.first() {
            let p = (x + 0.5).round();
            if n1 > 0 && (x + 0.5 - p).abs() <= EPS_CLASS && p >= 1.0 && p as i64 <= n1 {
                return Ok(SeriesClass::Discrete {
                    sign: Sign::Plus,
                    p: p as i64,
                });
            }
        }
        Err(invalid())
    } else {
        if n[0] != 0 {
            return Err(invalid());
        }
        let j = n.iter().take_while(|&&v| v == 0).count();
        let end = j as f64;
        if (x - end).abs() <= EPS_CLASS {
            return Ok(SeriesClass::Endpoint { j });
        }
        if x > 0.0 && x < end {
            return Ok(SeriesClass::Complementary { j });
        }
        Err(invalid())
    }
}

impl RepSpec {
    pub fn new(dim: usize, n: Vec<i64>, nu: Complex64) -> Result<Self> {
        let series = classify(dim, &n, nu)?;
        Ok(Self { dim, n, nu, series })
    }

    /// Discrete-series representation `D^{±}` with `nu = p - 1/2`.
    pub fn discrete(dim: usize, n: Vec<i64>, p: i64, sign: Sign) -> Result<Self> {
        check_tuple(dim, &n)?;
        let nu = Complex64::new(p as f64 - 0.5, 0.0);
        if dim % 2 == 1 || n.first().map_or(true, |&n1| n1 <= 0 || p < 1 || p > n1) {
            return Err(WeylError::InvalidNu {
                dim,
                n,
                re: nu.re,
                im: nu.im,
            });
        }
        Ok(Self {
            dim,
            n,
            nu,
            series: SeriesClass::Discrete { sign, p },
        })
    }

    /// The dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `k = floor(N/2)`, the length of every `m` tuple.
    pub fn k(&self) -> usize {
        self.dim / 2
    }

    pub fn is_even(&self) -> bool {
        self.dim % 2 == 0
    }

    pub fn n(&self) -> &[i64] {
        &self.n
    }

    pub fn nu(&self) -> Complex64 {
        self.nu
    }

    pub fn series(&self) -> SeriesClass {
        self.series
    }

    pub fn is_trivial(&self) -> bool {
        self.series == SeriesClass::Trivial
    }

    /// Max-norm of `n`.
    pub fn n_ceil(&self) -> i64 {
        self.n.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    /// `nu^2`, which is real for every admissible `nu`.
    pub fn nu_squared(&self) -> f64 {
        let sq = self.nu * self.nu;
        debug_assert!(sq.im.abs() < 1e-12, "nu^2 should be real");
        sq.re
    }

    /// Whether `m` satisfies the branching inequalities against `n`, plus the
    /// `|m_1| >= p` restriction of the discrete series.
    pub fn m_condition(&self, m: &[i64]) -> bool {
        let k = self.k();
        if m.len() != k {
            return false;
        }
        let n = &self.n;
        let ok = if self.is_even() {
            // |m_1| <= n_1 <= m_2 <= ... <= n_{k-1} <= m_k
            let mut ok = m[0].abs() <= n[0];
            for i in 0..k - 1 {
                ok &= n[i] <= m[i + 1];
                if i + 1 < k - 1 {
                    ok &= m[i + 1] <= n[i + 1];
                }
            }
            ok
        } else {
            // |n_1| <= m_1 <= n_2 <= m_2 <= ... <= n_k <= m_k
            let mut ok = n[0].abs() <= m[0];
            for i in 1..k {
                ok &= m[i - 1] <= n[i] && n[i] <= m[i];
            }
            ok
        };
        ok && match self.series {
            SeriesClass::Discrete { sign: Sign::Plus, p } => m[0] >= p,
            SeriesClass::Discrete { sign: Sign::Minus, p } => -m[0] >= p,
            _ => true,
        }
    }
}

/// The scalar by which the Casimir operator of SO°(N,1) acts.
pub fn casimir_scalar(spec: &RepSpec) -> f64 {
    let half = (spec.dim as f64 - 1.0) / 2.0;
    let shift = if spec.is_even() { 1 } else { 2 };
    let tail: f64 = spec
        .n
        .iter()
        .enumerate()
        .map(|(idx, &ni)| {
            let i = idx as i64 + 1;
            (ni * (ni + 2 * i - shift)) as f64
        })
        .sum();
    -spec.nu_squared() + half * half - tail
}

/// The scalar `q(m)` of the SO(N) Casimir on the K-type `m`.
pub fn compact_casimir_scalar(spec: &RepSpec, m: &[i64]) -> Result<f64> {
    if !spec.m_condition(m) {
        return Err(WeylError::InvalidM {
            m: m.to_vec(),
            reason: "branching inequalities against n fail".into(),
        });
    }
    Ok(q_unchecked(spec.is_even(), m))
}

pub(crate) fn q_unchecked(even: bool, m: &[i64]) -> f64 {
    let shift = if even { 2 } else { 1 };
    m.iter()
        .enumerate()
        .map(|(idx, &mi)| {
            let i = idx as i64 + 1;
            (mi * (mi + 2 * i - shift)) as f64
        })
        .sum()
}

/// `1 + Q(m) = 1 + mu + 2 q(m)`, the eigenvalue of `1 + Laplacian` on `u(m, lambda)`.
pub fn laplace_eigenvalue(spec: &RepSpec, m: &[i64]) -> Result<f64> {
    let value = 1.0 + casimir_scalar(spec) + 2.0 * compact_casimir_scalar(spec, m)?;
    if value <= 0.0 {
        return Err(WeylError::NonPositiveEigenvalue {
            m: m.to_vec(),
            value,
        });
    }
    Ok(value)
}

/// `-nu^2 + ((N-1)/2)^2`.
pub fn nu_tilde(spec: &RepSpec) -> f64 {
    let half = (spec.dim as f64 - 1.0) / 2.0;
    -spec.nu_squared() + half * half
}

/// True when every entry of `n` except the last vanishes.
pub fn admits_m_invariants(spec: &RepSpec) -> bool {
    let len = spec.n.len();
    spec.n.iter().take(len.saturating_sub(1)).all(|&v| v == 0)
}

#[derive(Serialize, Deserialize)]
struct NuJson {
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct RepSpecJson {
    #[serde(rename = "N")]
    dim: usize,
    n: Vec<i64>,
    nu: NuJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    discrete: Option<Sign>,
}

impl Serialize for RepSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let discrete = match self.series {
            SeriesClass::Discrete { sign, .. } => Some(sign),
            _ => None,
        };
        RepSpecJson {
            dim: self.dim,
            n: self.n.clone(),
            nu: NuJson {
                re: self.nu.re,
                im: self.nu.im,
            },
            discrete,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RepSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RepSpecJson::deserialize(deserializer)?;
        let nu = Complex64::new(raw.nu.re, raw.nu.im);
        let built = match raw.discrete {
            Some(sign) => {
                let p = (raw.nu.re + 0.5).round() as i64;
                if (raw.nu.re + 0.5 - p as f64).abs() > EPS_CLASS || raw.nu.im.abs() > EPS_CLASS {
                    Err(WeylError::InvalidNu {
                        dim: raw.dim,
                        n: raw.n.clone(),
                        re: raw.nu.re,
                        im: raw.nu.im,
                    })
                } else {
                    RepSpec::discrete(raw.dim, raw.n, p, sign)
                }
            }
            None => RepSpec::new(raw.dim, raw.n, nu),
        };
        built.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(3, &[0], c(0.0, 2.0)).unwrap(), SeriesClass::Principal);
        assert_eq!(
            classify(3, &[0], c(0.5, 0.0)).unwrap(),
            SeriesClass::Complementary { j: 1 }
        );
        assert_eq!(
            classify(4, &[2], c(1.5, 0.0)).unwrap(),
            SeriesClass::Discrete { sign: Sign::Plus, p: 2 }
        );
        assert_eq!(classify(4, &[2], c(0.5, 0.0)).unwrap(), SeriesClass::Endpoint { j: 1 });
        assert_eq!(classify(3, &[0], c(1.0, 0.0)).unwrap(), SeriesClass::Trivial);
        assert_eq!(classify(5, &[0, 0], c(2.0, 0.0)).unwrap(), SeriesClass::Trivial);
        assert_eq!(classify(5, &[0, 2], c(1.0, 0.0)).unwrap(), SeriesClass::Endpoint { j: 1 });
        assert_eq!(classify(6, &[0, 3], c(1.2, 0.0)).unwrap(), SeriesClass::Complementary { j: 2 });
        assert_eq!(classify(3, &[0], c(0.0, 0.0)).unwrap(), SeriesClass::Principal);
    }

    #[test]
    fn classification_errors() {
        assert!(matches!(classify(2, &[], c(0.0, 1.0)), Err(WeylError::InvalidN(2))));
        assert!(matches!(classify(4, &[2], c(0.7, 0.0)), Err(WeylError::InvalidNu { .. })));
        assert!(matches!(classify(3, &[1], c(0.5, 0.0)), Err(WeylError::InvalidNu { .. })));
        assert!(matches!(classify(3, &[0], c(1.0, 1.0)), Err(WeylError::InvalidNu { .. })));
        assert!(matches!(classify(6, &[3, 1], c(0.0, 1.0)), Err(WeylError::InvalidTuple { .. })));
        assert!(matches!(classify(5, &[2, 1], c(0.0, 1.0)), Err(WeylError::InvalidTuple { .. })));
        assert!(classify(5, &[-1, 1], c(0.0, 1.0)).is_ok());
    }

    #[test]
    fn scalar_examples() {
        let s = RepSpec::new(3, vec![0], c(0.0, 0.0)).unwrap();
        assert_eq!(casimir_scalar(&s), 1.0);
        assert_eq!(nu_tilde(&s), 1.0);
        assert_eq!(laplace_eigenvalue(&s, &[0]).unwrap(), 2.0);
        assert_eq!(laplace_eigenvalue(&s, &[3]).unwrap(), 26.0);
        assert_eq!(compact_casimir_scalar(&s, &[1]).unwrap(), 2.0);
        let s = RepSpec::new(3, vec![0], c(0.0, 1.0)).unwrap();
        assert_eq!(casimir_scalar(&s), 2.0);
        assert_eq!(nu_tilde(&s), 2.0);
        let s = RepSpec::new(4, vec![0], c(0.0, 0.0)).unwrap();
        assert_eq!(casimir_scalar(&s), 2.25);
        assert_eq!(laplace_eigenvalue(&s, &[0, 0]).unwrap(), 3.25);
        // 0*(0+0) + 2*(2+2)
        assert_eq!(compact_casimir_scalar(&s, &[0, 2]).unwrap(), 8.0);
        let s = RepSpec::new(5, vec![0, 0], c(0.0, 0.0)).unwrap();
        assert_eq!(nu_tilde(&s), 4.0);
    }

    #[test]
    fn m_invariant_shape() {
        let s = RepSpec::new(5, vec![0, 3], c(0.0, 1.0)).unwrap();
        assert!(admits_m_invariants(&s));
        let s = RepSpec::new(5, vec![1, 3], c(0.0, 1.0)).unwrap();
        assert!(!admits_m_invariants(&s));
        let s = RepSpec::new(3, vec![0], c(0.0, 1.0)).unwrap();
        assert!(admits_m_invariants(&s));
    }

    #[test]
    fn json_round_trip() {
        let s = RepSpec::discrete(4, vec![2], 1, Sign::Minus).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: RepSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        let back: RepSpec = serde_json::from_str(r#"{"N":3,"n":[0],"nu":{"re":0.0,"im":2.0}}"#).unwrap();
        assert_eq!(back.series(), SeriesClass::Principal);
    }
}
