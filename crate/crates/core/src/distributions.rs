//! Random-variate kernels and Gaussian log densities.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, SlimError};
use crate::linalg::cholesky_jittered;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Gamma draw with shape/rate parameterization.
#[inline]
pub(crate) fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters are validated by the caller")
        .sample(rng)
}

#[inline]
pub(crate) fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    Beta::new(a, b)
        .expect("beta parameters are validated by the caller")
        .sample(rng)
}

#[inline]
pub(crate) fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Inverse Gaussian draw with mean `mu` and shape `lam`.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mu: f64, lam: f64, rng: &mut R) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) || !(lam > 0.0 && lam.is_finite()) {
        return Err(SlimError::InvalidArgument(format!(
            "inverse Gaussian needs mu > 0 and lam > 0, got ({mu}, {lam})"
        )));
    }
    Ok(inverse_gaussian(mu, lam, rng))
}

/// Transformation-with-rejection sampler, written without the cancellation
/// of the textbook root: `x = 2μλ / (2λ + μy + sqrt(μ²y² + 4μλy))`.
#[inline]
pub(crate) fn inverse_gaussian<R: Rng + ?Sized>(mu: f64, lam: f64, rng: &mut R) -> f64 {
    let n: f64 = normal(rng);
    let y = n * n;
    let my = mu * y;
    let s = (my * my + 4.0 * mu * lam * y).sqrt();
    let x = 2.0 * mu * lam / (2.0 * lam + my + s);
    if rng.random::<f64>() * (mu + x) <= mu {
        x
    } else {
        mu * mu / x
    }
}

/// Heavy-tailed signal distributions expressed as Gaussian scale mixtures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeavyTailed {
    /// Density `λ/2·exp(−λ|z|)`: `z | υ ~ N(0, υ)`, `υ ~ Exponential(rate λ²/2)`.
    Laplace { lambda: f64 },
    /// `z | υ ~ N(0, υσ²)`, `1/υ ~ Gamma(θ/2, rate θ/2)`.
    StudentT { theta: f64, sigma2: f64 },
}

impl HeavyTailed {
    pub const CAUCHY: HeavyTailed = HeavyTailed::StudentT {
        theta: 1.0,
        sigma2: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            HeavyTailed::Laplace { lambda } => lambda > 0.0 && lambda.is_finite(),
            HeavyTailed::StudentT { theta, sigma2 } => {
                theta > 0.0 && sigma2 > 0.0 && theta.is_finite() && sigma2.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SlimError::InvalidArgument(format!(
                "invalid heavy-tailed parameters {self:?}"
            )))
        }
    }

    /// Draw the conditional variance of `z` from the mixing prior.
    #[inline]
    pub fn sample_variance<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            HeavyTailed::Laplace { lambda } => {
                let e: f64 = rng.sample(rand_distr::Exp1);
                2.0 * e / (lambda * lambda)
            }
            HeavyTailed::StudentT { theta, sigma2 } => {
                sigma2 / gamma(rng, theta / 2.0, theta / 2.0)
            }
        }
    }

    /// Marginal variance, infinite when `θ ≤ 2`.
    pub fn variance(&self) -> f64 {
        match *self {
            HeavyTailed::Laplace { lambda } => 2.0 / (lambda * lambda),
            HeavyTailed::StudentT { theta, sigma2 } if theta > 2.0 => {
                sigma2 * theta / (theta - 2.0)
            }
            HeavyTailed::StudentT { .. } => f64::INFINITY,
        }
    }
}

/// Two-stage draw: mixing variance from its prior, then a Gaussian.
pub fn sample_heavy_tailed<R: Rng + ?Sized>(kind: HeavyTailed, rng: &mut R) -> Result<f64> {
    kind.validate()?;
    let v = kind.sample_variance(rng);
    Ok(v.sqrt() * normal(rng))
}

pub const GG_SHAPE_MIN: f64 = 0.5;
pub const GG_SHAPE_MAX: f64 = 2.0;

/// Zero-mean, unit-variance generalized Gaussian with density
/// `∝ exp(−|x/a|^shape)`. `shape = 2` is the standard normal.
pub fn sample_generalized_gaussian<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    if !(GG_SHAPE_MIN..=GG_SHAPE_MAX).contains(&shape) {
        return Err(SlimError::InvalidArgument(format!(
            "generalized Gaussian shape {shape} outside [{GG_SHAPE_MIN}, {GG_SHAPE_MAX}]"
        )));
    }
    let scale = (0.5 * (ln_gamma(1.0 / shape) - ln_gamma(3.0 / shape))).exp();
    let g = gamma(rng, 1.0 / shape, 1.0);
    let mag = scale * g.powf(1.0 / shape);
    Ok(if rng.random::<bool>() { mag } else { -mag })
}

/// Default random shape: uniform over `[0.5, 0.8] ∪ [1.2, 2)`.
pub fn random_gg_shape<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u = rng.random_range(0.0..1.1);
    if u < 0.3 {
        0.5 + u
    } else {
        1.2 + (u - 0.3)
    }
}

/// Covariance argument for [`log_gaussian`].
#[derive(Clone, Copy, Debug)]
pub enum Covariance<'a> {
    Diagonal(&'a [f64]),
    Full(&'a DMatrix<f64>),
}

/// Exact multivariate normal log density. The full case goes through a
/// Cholesky factor, with the jitter policy of [`cholesky_jittered`].
pub fn log_gaussian(x: &[f64], mean: &[f64], cov: Covariance<'_>) -> Result<f64> {
    let d = x.len();
    if mean.len() != d {
        return Err(SlimError::Dimension(format!(
            "x has {d} entries, mean {}",
            mean.len()
        )));
    }
    match cov {
        Covariance::Diagonal(v) => {
            if v.len() != d {
                return Err(SlimError::Dimension("diagonal covariance length".into()));
            }
            if v.iter().any(|&s| !(s > 0.0)) {
                return Err(SlimError::NotPositiveDefinite {
                    context: "diagonal covariance",
                });
            }
            let mut acc = -0.5 * d as f64 * LN_2PI;
            for i in 0..d {
                let r = x[i] - mean[i];
                acc -= 0.5 * (v[i].ln() + r * r / v[i]);
            }
            Ok(acc)
        }
        Covariance::Full(s) => {
            if s.nrows() != d || s.ncols() != d {
                return Err(SlimError::Dimension("full covariance shape".into()));
            }
            let chol = cholesky_jittered(s.clone(), "log_gaussian")?;
            let r = DVector::from_iterator(d, x.iter().zip(mean).map(|(a, b)| a - b));
            let l = chol.l();
            let w = l
                .solve_lower_triangular(&r)
                .ok_or(SlimError::NotPositiveDefinite {
                    context: "log_gaussian",
                })?;
            let logdet: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            Ok(-0.5 * (d as f64 * LN_2PI + logdet + w.norm_squared()))
        }
    }
}

/// Allocation-free log density for small dense covariances stored row-major
/// in `cov` (overwritten by its Cholesky factor). `r = x − mean` is
/// overwritten. Returns `None` if the matrix is not positive definite.
#[inline]
pub(crate) fn log_gaussian_in_place(r: &mut [f64], cov: &mut [f64]) -> Option<f64> {
    let d = r.len();
    let mut logdet = 0.0;
    for j in 0..d {
        let mut s = cov[j * d + j];
        for k in 0..j {
            s -= cov[j * d + k] * cov[j * d + k];
        }
        if !(s > 0.0) {
            return None;
        }
        let ljj = s.sqrt();
        cov[j * d + j] = ljj;
        logdet += ljj.ln();
        for i in j + 1..d {
            let mut t = cov[i * d + j];
            for k in 0..j {
                t -= cov[i * d + k] * cov[j * d + k];
            }
            cov[i * d + j] = t / ljj;
        }
    }
    let mut quad = 0.0;
    for i in 0..d {
        let mut t = r[i];
        for k in 0..i {
            t -= cov[i * d + k] * r[k];
        }
        t /= cov[i * d + i];
        r[i] = t;
        quad += t * t;
    }
    Some(-0.5 * (d as f64 * LN_2PI + quad) - logdet)
}

/// `ln Σ exp(v)` without overflow. Returns `-inf` only for an empty slice or
/// all `-inf` entries.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
