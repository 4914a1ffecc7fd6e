//! Shot (loss severity) distributions and their Laplace transforms.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{require_positive, Error, Result};
use crate::quadrature::{Integral, Quadrature};
use crate::special::lambert_w;

/// Default absolute tolerance of quadrature-backed transforms.
pub const LAPLACE_TOL: f64 = 1e-10;
const ORACLE_TOL: f64 = 1e-13;
// Standard-normal mass beyond this many deviations is below 1e-300.
const LOG_SPACE_HALF_WIDTH: f64 = 38.0;

/// Distribution of a single catastrophe loss amount.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeverityModel {
    Exponential { rate: f64 },
    LogNormal { mu: f64, sigma: f64 },
    /// Lomax form: `F(x) = 1 - (scale / (scale + x))^shape`.
    Pareto { shape: f64, scale: f64 },
}

impl SeverityModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        require_positive("rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(crate::error::invalid("mu", "must be finite"));
        }
        require_positive("sigma", sigma)?;
        Ok(Self::LogNormal { mu, sigma })
    }

    pub fn pareto(shape: f64, scale: f64) -> Result<Self> {
        require_positive("shape", shape)?;
        require_positive("scale", scale)?;
        Ok(Self::Pareto { shape, scale })
    }

    /// Re-checks the parameter invariants (useful for literals built by hand).
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Exponential { rate } => Self::exponential(rate).map(|_| ()),
            Self::LogNormal { mu, sigma } => Self::log_normal(mu, sigma).map(|_| ()),
            Self::Pareto { shape, scale } => Self::pareto(shape, scale).map(|_| ()),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            Self::Exponential { rate } => Some(1.0 / rate),
            Self::LogNormal { mu, sigma } => Some((mu + 0.5 * sigma * sigma).exp()),
            Self::Pareto { shape, scale } => (shape > 1.0).then(|| scale / (shape - 1.0)),
        }
    }

    pub fn has_finite_variance(&self) -> bool {
        match *self {
            Self::Pareto { shape, .. } => shape > 2.0,
            _ => true,
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::Domain(format!("severity cdf needs x >= 0, got {x}")));
        }
        Ok(match *self {
            Self::Exponential { rate } => -(-rate * x).exp_m1(),
            Self::LogNormal { mu, sigma } => {
                if x == 0.0 {
                    0.0
                } else {
                    0.5 * erfc(-(x.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
                }
            }
            Self::Pareto { shape, scale } => 1.0 - (scale / (scale + x)).powf(shape),
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => rate * (-rate * x).exp(),
            Self::LogNormal { mu, sigma } => {
                if x == 0.0 {
                    return 0.0;
                }
                let z = (x.ln() - mu) / sigma;
                (-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::Pareto { shape, scale } => {
                shape / scale * (scale / (scale + x)).powf(shape + 1.0)
            }
        }
    }

    /// One i.i.d. shot.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            Self::LogNormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
            Self::Pareto { shape, scale } => {
                // u in (0, 1]
                let u = 1.0 - rng.random::<f64>();
                scale * (u.powf(-1.0 / shape) - 1.0)
            }
        }
    }

    /// `φ(u) = E[exp(-u Y)]`.
    ///
    /// Exponential is exact. Log-normal uses the Lambert-W saddlepoint
    /// approximation
    /// `φ(u) ≈ exp(-(W² + 2W) / (2σ²)) / sqrt(1 + W)`, `W = W(σ² u e^μ)`.
    /// Pareto integrates `exp(-u Q(w))` over `w ∈ (0, 1]`, where
    /// `Q(w) = b (w^{-1/a} - 1)` is the survival-quantile map.
    pub fn laplace(&self, u: f64) -> Result<f64> {
        self.laplace_with_tol(u, LAPLACE_TOL)
    }

    pub fn laplace_with_tol(&self, u: f64, tol: f64) -> Result<f64> {
        check_laplace_arg(u)?;
        if u == 0.0 {
            return Ok(1.0);
        }
        match *self {
            Self::Exponential { rate } => Ok(rate / (rate + u)),
            Self::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                let w = lambert_w(s2 * u * mu.exp())?;
                Ok((-(w * w + 2.0 * w) / (2.0 * s2)).exp() / (1.0 + w).sqrt())
            }
            Self::Pareto { shape, scale } => {
                let integrand = |w: f64| {
                    if w <= 0.0 {
                        return 0.0;
                    }
                    (-u * scale * (w.powf(-1.0 / shape) - 1.0)).exp()
                };
                Ok(Quadrature::new(tol).integrate(integrand, 0.0, 1.0)?.value)
            }
        }
    }

    /// Brute-force `∫₀^∞ e^{-ux} f(x) dx` against the density, with its
    /// error estimate. The log-normal is integrated in log space.
    pub fn laplace_oracle(&self, u: f64) -> Result<Integral> {
        self.laplace_oracle_with_tol(u, ORACLE_TOL)
    }

    pub fn laplace_oracle_with_tol(&self, u: f64, tol: f64) -> Result<Integral> {
        check_laplace_arg(u)?;
        let q = Quadrature::new(tol);
        match *self {
            Self::Exponential { rate } => {
                let scale = 1.0 / rate;
                q.integrate_to_infinity(
                    |y| {
                        let x = scale * y;
                        (-u * x).exp() * self.pdf(x) * scale
                    },
                    0.0,
                )
            }
            Self::Pareto { scale, .. } => q.integrate_to_infinity(
                |y| {
                    let x = scale * y;
                    (-u * x).exp() * self.pdf(x) * scale
                },
                0.0,
            ),
            Self::LogNormal { mu, sigma } => {
                let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
                let f = |z: f64| (-u * (mu + sigma * z).exp() - 0.5 * z * z).exp() * norm;
                let left = q.integrate(f, -LOG_SPACE_HALF_WIDTH, 0.0)?;
                let right = q.integrate(f, 0.0, LOG_SPACE_HALF_WIDTH)?;
                Ok(Integral {
                    value: left.value + right.value,
                    error: left.error + right.error,
                    intervals: left.intervals + right.intervals,
                })
            }
        }
    }
}

fn check_laplace_arg(u: f64) -> Result<()> {
    if u.is_nan() || u < 0.0 {
        return Err(Error::Domain(format!(
            "Laplace transform needs u >= 0, got {u}"
        )));
    }
    Ok(())
}
