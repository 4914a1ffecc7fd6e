//! Compound-Poisson aggregate CDF on a rounding lattice.
//!
//! Severity mass is rounded to the nearest lattice point `j h`. The lattice
//! step is adjusted per evaluation so that the threshold `d` sits exactly on
//! a half-cell boundary `(K + 1/2) h`, which makes the lattice CDF at `d`
//! second-order accurate in `h`.

use crate::error::{invalid, require_non_negative, require_positive, Error, Result};
use crate::severity::SeverityModel;

/// Successive halvings must agree to this absolute tolerance.
pub const PANJER_TOLERANCE: f64 = 1e-4;
const MAX_LATTICE_POINTS: usize = 40_000;
const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanjerResult {
    pub value: f64,
    /// Lattice step of the accepted evaluation.
    pub grid_step: f64,
    /// Difference to the previous (coarser) evaluation.
    pub change: f64,
    pub halvings: usize,
}

/// A rounding lattice fitted to a threshold.
#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    pub(crate) step: f64,
    /// Masses at `0, h, ..., K h`; `K h < d < (K + 1) h`.
    pub(crate) masses: Vec<f64>,
}

impl Lattice {
    pub(crate) fn fit(severity: &SeverityModel, d: f64, nominal_step: f64) -> Result<Self> {
        let k = (d / nominal_step - 0.5).round().max(0.0);
        if k as usize >= MAX_LATTICE_POINTS {
            return Err(Error::NonConvergence(format!(
                "lattice for d = {d} at step {nominal_step} needs {k} points"
            )));
        }
        let k = k as usize;
        let step = d / (k as f64 + 0.5);
        let mut masses = Vec::with_capacity(k + 1);
        let mut prev = 0.0;
        for j in 0..=k {
            let upper = severity.cdf((j as f64 + 0.5) * step)?;
            masses.push(upper - prev);
            prev = upper;
        }
        Ok(Self { step, masses })
    }
}

/// Panjer recursion for a Poisson(`lambda_t`) claim count; returns
/// `P(S ≤ d)` on the fitted lattice.
fn panjer_on_lattice(lambda_t: f64, lattice: &Lattice) -> Result<f64> {
    let f = &lattice.masses;
    let exponent = lambda_t * (1.0 - f[0]);
    if exponent > MAX_EXPONENT {
        return Err(Error::Unsupported(format!(
            "expected claim count {lambda_t} too large for the recursion"
        )));
    }
    let k_max = f.len() - 1;
    let mut g = Vec::with_capacity(k_max + 1);
    g.push((-exponent).exp());
    for k in 1..=k_max {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * f[j] * g[k - j];
        }
        g.push(lambda_t / k as f64 * acc);
    }
    Ok(g.iter().sum::<f64>().min(1.0))
}

/// `P(L_t ≤ d)` for a compound Poisson loss (`α = 0`) with constant
/// arrival rate, refining `grid_step` by halving until two successive
/// evaluations differ by less than [`PANJER_TOLERANCE`].
pub fn panjer_cdf(
    lambda_n: f64,
    severity: &SeverityModel,
    t: f64,
    d: f64,
    grid_step: f64,
) -> Result<PanjerResult> {
    require_non_negative("lambda_n", lambda_n)?;
    require_non_negative("t", t)?;
    require_positive("grid_step", grid_step)?;
    if !(d.is_finite() && d >= 0.0) {
        return Err(invalid("d", format!("must be finite and >= 0, got {d}")));
    }
    let lambda_t = lambda_n * t;
    if lambda_t == 0.0 {
        return Ok(PanjerResult {
            value: 1.0,
            grid_step,
            change: 0.0,
            halvings: 0,
        });
    }
    if d == 0.0 {
        // No mass below zero: only the no-claim event remains.
        return Ok(PanjerResult {
            value: (-lambda_t).exp(),
            grid_step,
            change: 0.0,
            halvings: 0,
        });
    }
    let mut step = grid_step;
    let mut prev = panjer_on_lattice(lambda_t, &Lattice::fit(severity, d, step)?)?;
    let mut halvings = 0;
    loop {
        step *= 0.5;
        halvings += 1;
        let lattice = Lattice::fit(severity, d, step).map_err(|_| {
            Error::NonConvergence(format!(
                "Panjer CDF did not settle to {PANJER_TOLERANCE} before the lattice limit (last value {prev})"
            ))
        })?;
        let value = panjer_on_lattice(lambda_t, &lattice)?;
        let change = (value - prev).abs();
        if change < PANJER_TOLERANCE {
            return Ok(PanjerResult {
                value,
                grid_step: lattice.step,
                change,
                halvings,
            });
        }
        prev = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Second oracle: for exponential shots the aggregate CDF is a Poisson
    /// mixture of Erlang CDFs.
    fn compound_exponential_cdf(lambda_t: f64, beta: f64, d: f64) -> f64 {
        let mut total = 0.0;
        let mut pois = (-lambda_t).exp();
        for n in 0..200 {
            if n > 0 {
                pois *= lambda_t / n as f64;
            }
            // Erlang(n, beta) CDF at d
            let erlang = if n == 0 {
                1.0
            } else {
                let mut term = (-beta * d).exp();
                let mut tail = term;
                for k in 1..n {
                    term *= beta * d / k as f64;
                    tail += term;
                }
                1.0 - tail
            };
            total += pois * erlang;
        }
        total
    }

    #[test]
    fn trivial_cases() {
        let sev = SeverityModel::exponential(1.0).unwrap();
        assert_eq!(panjer_cdf(0.0, &sev, 5.0, 1.0, 0.1).unwrap().value, 1.0);
        assert_eq!(panjer_cdf(1.0, &sev, 0.0, 1.0, 0.1).unwrap().value, 1.0);
        assert!(panjer_cdf(1.0, &sev, 1.0, 1.0, 0.0).is_err());
        assert!(panjer_cdf(-1.0, &sev, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn below_smallest_shot_is_no_claim_probability() {
        // Shots of about 600; nothing lands in the first lattice cells.
        let sev = SeverityModel::log_normal(6.387, 0.153).unwrap();
        let r = panjer_cdf(1.0, &sev, 1.0, 100.0, 10.0).unwrap();
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn matches_erlang_mixture() {
        let sev = SeverityModel::exponential(1.0).unwrap();
        let exact = compound_exponential_cdf(1.0, 1.0, 1.0);
        let r = panjer_cdf(1.0, &sev, 1.0, 1.0, 0.05).unwrap();
        assert!((r.value - exact).abs() < 1e-3, "{} vs {exact}", r.value);
        assert!(r.change < PANJER_TOLERANCE);

        for &(lt, beta, d) in &[(0.5, 2.0, 0.3), (3.0, 1.0, 4.0), (2.0, 0.5, 1.0)] {
            let sev = SeverityModel::exponential(beta).unwrap();
            let r = panjer_cdf(lt, &sev, 1.0, d, 0.1).unwrap();
            let exact = compound_exponential_cdf(lt, beta, d);
            assert!((r.value - exact).abs() < 1e-3, "{lt} {beta} {d}");
        }
    }

    #[test]
    fn lattice_places_threshold_mid_cell() {
        let sev = SeverityModel::exponential(1.0).unwrap();
        let lat = Lattice::fit(&sev, 1.0, 0.3).unwrap();
        let k = lat.masses.len() - 1;
        assert!(((k as f64 + 0.5) * lat.step - 1.0).abs() < 1e-15);
        let total: f64 = lat.masses.iter().sum();
        assert!((total - sev.cdf(1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn reports_non_convergence() {
        // Extremely fine target relative to the threshold hits the lattice cap.
        let sev = SeverityModel::exponential(1.0).unwrap();
        let err = panjer_cdf(1.0, &sev, 1.0, 1e6, 1.0).unwrap_err();
        assert!(matches!(err, Error::NonConvergence(_)));
    }
}
