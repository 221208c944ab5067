//! Noise mechanisms deciding whether a person reports a random corpus term.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `t ~ U[0,1)`, fires when `t < noise_level`.
    UniformThreshold,
    /// `t ~ N(0,1)`, fires when `t < noise_level`.
    NormalThreshold,
    /// `t ~ Laplace(0, 1/ε)`, fires when `t > noise_level`.
    LaplaceDp,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [
        NoiseKind::UniformThreshold,
        NoiseKind::NormalThreshold,
        NoiseKind::LaplaceDp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::UniformThreshold => "uniform_threshold",
            NoiseKind::NormalThreshold => "normal_threshold",
            NoiseKind::LaplaceDp => "laplace_dp",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown noise mechanism {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMechanism {
    kind: NoiseKind,
    noise_level: f64,
    epsilon: Option<f64>,
}

impl NoiseMechanism {
    /// Validates the parameters. `epsilon` is required (and must be
    /// positive) for [`NoiseKind::LaplaceDp`] and ignored otherwise.
    pub fn new(kind: NoiseKind, noise_level: f64, epsilon: Option<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise_level) {
            return Err(Error::Config(format!("noise_level {noise_level} outside [0, 1]")));
        }
        let epsilon = match kind {
            NoiseKind::LaplaceDp => match epsilon {
                Some(e) if e > 0.0 && e.is_finite() => Some(e),
                Some(e) => return Err(Error::Config(format!("epsilon must be positive, got {e}"))),
                None => return Err(Error::Config("laplace_dp requires epsilon".into())),
            },
            _ => None,
        };
        Ok(NoiseMechanism {
            kind,
            noise_level,
            epsilon,
        })
    }

    pub fn uniform(noise_level: f64) -> Result<Self> {
        Self::new(NoiseKind::UniformThreshold, noise_level, None)
    }

    pub fn normal(noise_level: f64) -> Result<Self> {
        Self::new(NoiseKind::NormalThreshold, noise_level, None)
    }

    pub fn laplace(noise_level: f64, epsilon: f64) -> Result<Self> {
        Self::new(NoiseKind::LaplaceDp, noise_level, Some(epsilon))
    }

    /// Noise never fires.
    pub fn off() -> Self {
        NoiseMechanism {
            kind: NoiseKind::UniformThreshold,
            noise_level: 0.0,
            epsilon: None,
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// Draws the mechanism's test statistic and reports whether it fires.
    pub fn fires<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        match self.kind {
            NoiseKind::UniformThreshold => rng.random::<f64>() < self.noise_level,
            NoiseKind::NormalThreshold => {
                let t: f64 = StandardNormal.sample(rng);
                t < self.noise_level
            }
            NoiseKind::LaplaceDp => {
                let scale = 1.0 / self.epsilon.expect("validated at construction");
                sample_laplace(rng, scale) > self.noise_level
            }
        }
    }

    /// Exact probability that [`fires`](Self::fires) returns true.
    pub fn fire_probability(&self) -> f64 {
        match self.kind {
            NoiseKind::UniformThreshold => self.noise_level,
            NoiseKind::NormalThreshold => standard_normal_cdf(self.noise_level),
            NoiseKind::LaplaceDp => {
                let eps = self.epsilon.expect("validated at construction");
                // noise_level >= 0, so only the upper tail matters
                0.5 * (-eps * self.noise_level).exp()
            }
        }
    }
}

/// Inverse-CDF draw from the zero-mean Laplace distribution with scale `b`.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    let u = rng.random::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Φ(x) via the complementary error function.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

// Numerical Recipes erfc (Chebyshev fit), relative error < 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.265_512_23
            + t * (1.000_023_68
                + t * (0.374_091_96
                    + t * (0.096_784_18
                        + t * (-0.186_288_06
                            + t * (0.278_868_07
                                + t * (-1.135_203_98
                                    + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}
