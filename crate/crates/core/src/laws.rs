//! Scalar laws used as spectra of `Y` and as moment sources.
//!
//! Text form (the CLI mini-language): `mp:<λ>`, `sc`, `bernoulli`,
//! `point:<c>`, `uniform:<a>:<b>`, `cauchy`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freemoments::{
    bernoulli_pm1_moments, mp_moments, point_mass_moments, semicircle_moments, uniform_moments,
    MomentSequence,
};
use crate::spectra::{semicircle_cdf, MpLaw};

/// Serialized as its mini-language string, e.g. `"uniform:0:1"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Law {
    /// Uniform on `{−1, 1}`.
    BernoulliPm1,
    Uniform { a: f64, b: f64 },
    /// Standard Cauchy, location 0 and scale 1.
    Cauchy,
    Point { c: f64 },
    MarchenkoPastur { lambda: f64 },
    /// Unit-variance semicircle on `[−2, 2]`.
    Semicircle,
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Law::Uniform { a, b } if !(a.is_finite() && b.is_finite() && a < b) => Err(
                Error::InvalidArgument(format!("uniform law needs finite a < b, got ({a}, {b})")),
            ),
            Law::Point { c } if !c.is_finite() => {
                Err(Error::InvalidArgument(format!("point mass at {c}")))
            }
            Law::MarchenkoPastur { lambda } => MpLaw::new(lambda).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// `m[1..=k]`. The Cauchy law has no moments.
    pub fn moments(&self, k: usize) -> Result<MomentSequence> {
        self.validate()?;
        match *self {
            Law::BernoulliPm1 => Ok(bernoulli_pm1_moments(k)),
            Law::Uniform { a, b } => Ok(uniform_moments(a, b, k)),
            Law::Point { c } => Ok(point_mass_moments(c, k)),
            Law::MarchenkoPastur { lambda } => mp_moments(lambda, k),
            Law::Semicircle => Ok(semicircle_moments(k)),
            Law::Cauchy => Err(Error::InvalidArgument(
                "the Cauchy law has no finite moments".into(),
            )),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match *self {
            Law::Uniform { a, .. } => a >= 0.0,
            Law::Point { c } => c >= 0.0,
            Law::MarchenkoPastur { .. } => true,
            Law::BernoulliPm1 | Law::Cauchy | Law::Semicircle => false,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Law::BernoulliPm1 => {
                if x < -1.0 {
                    0.0
                } else if x < 1.0 {
                    0.5
                } else {
                    1.0
                }
            }
            Law::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Law::Cauchy => 0.5 + x.atan() / PI,
            Law::Point { c } => {
                if x < c {
                    0.0
                } else {
                    1.0
                }
            }
            Law::MarchenkoPastur { lambda } => MpLaw::new(lambda).map_or(f64::NAN, |l| l.cdf(x)),
            Law::Semicircle => semicircle_cdf(x),
        }
    }

    /// `inf{x : F(x) ≥ p}` for `p ∈ (0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Law::BernoulliPm1 => {
                if p <= 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            Law::Uniform { a, b } => a + (b - a) * p,
            Law::Cauchy => (PI * (p - 0.5)).tan(),
            Law::Point { c } => c,
            Law::MarchenkoPastur { lambda } => {
                let Ok(l) = MpLaw::new(lambda) else {
                    return f64::NAN;
                };
                if p <= l.atom_at_zero() {
                    return 0.0;
                }
                bisect_quantile(|x| l.cdf(x), l.lambda_minus(), l.lambda_plus(), p)
            }
            Law::Semicircle => bisect_quantile(semicircle_cdf, -2.0, 2.0, p),
        }
    }

    /// One i.i.d. draw. Only the scalar laws of `Y` support direct sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            Law::BernoulliPm1 => Ok(if rng.random::<bool>() { 1.0 } else { -1.0 }),
            Law::Uniform { a, b } => Ok(a + (b - a) * rng.random::<f64>()),
            Law::Cauchy => {
                let num: f64 = StandardNormal.sample(rng);
                let den: f64 = StandardNormal.sample(rng);
                Ok(num / den)
            }
            Law::Point { c } => Ok(c),
            Law::MarchenkoPastur { .. } | Law::Semicircle => Err(Error::InvalidConfig(format!(
                "i.i.d. sampling from {self} is not supported; use diag_quantile"
            ))),
        }
    }
}

fn bisect_quantile<F: Fn(f64) -> f64>(cdf: F, lo: f64, hi: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    hi
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Law::BernoulliPm1 => f.write_str("bernoulli"),
            Law::Uniform { a, b } => write!(f, "uniform:{a}:{b}"),
            Law::Cauchy => f.write_str("cauchy"),
            Law::Point { c } => write!(f, "point:{c}"),
            Law::MarchenkoPastur { lambda } => write!(f, "mp:{lambda}"),
            Law::Semicircle => f.write_str("sc"),
        }
    }
}

impl FromStr for Law {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {t:?} in law {s:?}")))
        };
        let law = match parts.as_slice() {
            ["bernoulli"] => Law::BernoulliPm1,
            ["sc"] => Law::Semicircle,
            ["cauchy"] => Law::Cauchy,
            ["mp", l] => Law::MarchenkoPastur { lambda: num(l)? },
            ["point", c] => Law::Point { c: num(c)? },
            ["uniform", a, b] => Law::Uniform {
                a: num(a)?,
                b: num(b)?,
            },
            _ => {
                return Err(Error::Parse(format!(
                    "unknown law {s:?}; expected mp:<λ>, sc, bernoulli, point:<c>, uniform:<a>:<b> or cauchy"
                )))
            }
        };
        law.validate()?;
        Ok(law)
    }
}

impl TryFrom<String> for Law {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Law> for String {
    fn from(law: Law) -> String {
        law.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn mini_language_round_trips() {
        for s in ["mp:0.5", "sc", "bernoulli", "point:2.5", "uniform:-1:3", "cauchy"] {
            let law: Law = s.parse().unwrap();
            assert_eq!(law.to_string(), s);
        }
        for bad in ["mp", "mp:-1", "uniform:2:1", "gauss", "point:x"] {
            assert!(bad.parse::<Law>().is_err(), "{bad}");
        }
    }

    #[test]
    fn quantiles_invert_cdfs() {
        let laws = [
            Law::Uniform { a: -1.0, b: 3.0 },
            Law::Cauchy,
            Law::MarchenkoPastur { lambda: 0.5 },
            Law::MarchenkoPastur { lambda: 2.0 },
            Law::Semicircle,
        ];
        for law in laws {
            for p in [0.1, 0.37, 0.5, 0.8, 0.99] {
                let x = law.quantile(p);
                assert!((law.cdf(x) - p).abs() < 1e-9 || (law.cdf(x) >= p), "{law} p={p}");
            }
        }
        assert_eq!(Law::MarchenkoPastur { lambda: 2.0 }.quantile(0.3), 0.0);
        assert_eq!(Law::BernoulliPm1.quantile(0.5), -1.0);
        assert_eq!(Law::BernoulliPm1.quantile(0.51), 1.0);
    }

    #[test]
    fn sample_means() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        let n = 200_000;
        let mean = |law: Law, rng: &mut rand_chacha::ChaCha20Rng| {
            (0..n).map(|_| law.sample(rng).unwrap()).sum::<f64>() / n as f64
        };
        assert!(mean(Law::BernoulliPm1, &mut rng).abs() < 0.01);
        assert!((mean(Law::Uniform { a: 0.0, b: 1.0 }, &mut rng) - 0.5).abs() < 0.005);
        let tail = (0..n)
            .filter(|_| Law::Cauchy.sample(&mut rng).unwrap().abs() > 10.0)
            .count() as f64
            / n as f64;
        let expected = 1.0 - 2.0 / PI * 10f64.atan();
        assert!((tail - expected).abs() < 4.0 * (expected / n as f64).sqrt());
        assert!(Law::Semicircle.sample(&mut rng).is_err());
    }

    #[test]
    fn serde_uses_text_form() {
        let law = Law::Uniform { a: 0.0, b: 1.0 };
        let js = serde_json::to_string(&law).unwrap();
        assert_eq!(js, "\"uniform:0:1\"");
        assert_eq!(serde_json::from_str::<Law>(&js).unwrap(), law);
        assert!(serde_json::from_str::<Law>("\"mp:0\"").is_err());
    }

    #[test]
    fn moments_by_law() {
        assert!(Law::Cauchy.moments(2).is_err());
        assert_eq!(Law::Uniform { a: 0.0, b: 1.0 }.moments(2).unwrap().as_slice(), &[0.5, 1.0 / 3.0]);
        assert_eq!(Law::Semicircle.moments(4).unwrap().as_slice(), &[0.0, 1.0, 0.0, 2.0]);
    }
}
