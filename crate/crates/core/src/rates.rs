//! CIR short rate `dr = γ (θ - r) dt + σ √r dW`: closed-form discount bond
//! and exact (noncentral chi-square) path sampling.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{invalid, require_non_negative, require_positive, Error, Result};
use crate::par::{map_indexed, Execution};
use crate::rng::{substream, Purpose};
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    pub r0: f64,
    pub gamma_r: f64,
    pub theta_cir: f64,
    pub sigma: f64,
}

impl CirParams {
    pub fn new(r0: f64, gamma_r: f64, theta_cir: f64, sigma: f64) -> Result<Self> {
        require_non_negative("r0", r0)?;
        require_positive("gamma_r", gamma_r)?;
        require_non_negative("theta_cir", theta_cir)?;
        require_positive("sigma", sigma)?;
        Ok(Self {
            r0,
            gamma_r,
            theta_cir,
            sigma,
        })
    }

    /// US treasury calibration used by the reference parameter set.
    pub fn reference() -> Self {
        Self {
            r0: 0.0204,
            gamma_r: 0.0884,
            theta_cir: 0.0204,
            sigma: 0.0477,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.r0, self.gamma_r, self.theta_cir, self.sigma).map(|_| ())
    }

    /// `h = sqrt(γ² + 2σ²)`.
    pub fn h(&self) -> f64 {
        self.gamma_r.hypot(std::f64::consts::SQRT_2 * self.sigma)
    }

    /// Degrees of freedom `4γθ/σ²` of the transition law.
    pub fn degrees_of_freedom(&self) -> f64 {
        4.0 * self.gamma_r * self.theta_cir / (self.sigma * self.sigma)
    }

    /// Whether `2γθ > σ²`, i.e. zero is unattainable.
    pub fn feller(&self) -> bool {
        2.0 * self.gamma_r * self.theta_cir > self.sigma * self.sigma
    }

    /// `(A_t(T), B_t(T))` with `Q_t(T) = exp(A - B r_t)`.
    ///
    /// Evaluated after dividing numerator and denominator by `e^{h(T-t)}`;
    /// `h - γ = 2σ² / (h + γ)` keeps the small-σ limit accurate.
    pub fn affine_coefficients(&self, tau: f64) -> (f64, f64) {
        if tau == 0.0 {
            return (0.0, 0.0);
        }
        let g = self.gamma_r;
        let s2 = self.sigma * self.sigma;
        let h = self.h();
        let h_minus_g = 2.0 * s2 / (h + g);
        let decay = (-h * tau).exp();
        let denom = h_minus_g * decay + (h + g);
        let one_minus_decay = -(-h * tau).exp_m1();
        let log_ratio = (h_minus_g * one_minus_decay / denom).ln_1p() - 0.5 * h_minus_g * tau;
        let a = 2.0 * g * self.theta_cir / s2 * log_ratio;
        let b = 2.0 * one_minus_decay / denom;
        (a, b)
    }
}

/// Closed-form zero-coupon bond `Q_t(T) = exp(A_t(T) - B_t(T) r_t)`.
pub fn bond_price(p: &CirParams, r_t: f64, t: f64, maturity: f64) -> Result<f64> {
    if t > maturity {
        return Err(Error::Domain(format!(
            "valuation time {t} after maturity {maturity}"
        )));
    }
    require_non_negative("t", t)?;
    require_non_negative("r_t", r_t)?;
    let (a, b) = p.affine_coefficients(maturity - t);
    Ok((a - b * r_t).exp())
}

#[derive(Debug, Clone, Copy)]
struct Step {
    /// `σ² (1 - e^{-γ Δ}) / (4γ)`
    scale: f64,
    decay: f64,
}

/// Exact CIR sampler on a fixed time grid.
#[derive(Debug, Clone)]
pub struct CirPathSampler {
    params: CirParams,
    grid: Vec<f64>,
    steps: Vec<Step>,
    df: f64,
    /// `χ²_{df-1}` when `df > 1` (normal-plus-chi-square decomposition).
    chi_rest: Option<ChiSquared<f64>>,
}

impl CirPathSampler {
    pub fn new(params: CirParams, grid: Vec<f64>) -> Result<Self> {
        params.validate()?;
        if grid.first() != Some(&0.0) {
            return Err(invalid("grid", "must start at 0"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(invalid("grid", "must be strictly increasing and finite"));
        }
        let g = params.gamma_r;
        let steps = grid
            .windows(2)
            .map(|w| {
                let dt = w[1] - w[0];
                Step {
                    scale: params.sigma * params.sigma * -(-g * dt).exp_m1() / (4.0 * g),
                    decay: (-g * dt).exp(),
                }
            })
            .collect();
        let df = params.degrees_of_freedom();
        let chi_rest = if df > 1.0 {
            Some(ChiSquared::new(df - 1.0).map_err(|e| invalid("sigma", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            params,
            grid,
            steps,
            df,
            chi_rest,
        })
    }

    /// Uniform grid on `[0, horizon]` with at least `steps_per_year` steps per year.
    pub fn uniform(params: CirParams, horizon: f64, steps_per_year: usize) -> Result<Self> {
        Self::new(params, uniform_grid(horizon, steps_per_year)?)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn chi_square<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
        if k <= 0.0 {
            return 0.0;
        }
        // Gamma(k/2, 2) is chi-square(k); k > 0 checked above.
        Gamma::new(0.5 * k, 2.0)
            .expect("positive shape")
            .sample(rng)
    }

    fn transition<R: Rng + ?Sized>(&self, step: Step, r: f64, rng: &mut R) -> f64 {
        let nc = r * step.decay / step.scale;
        let x = match &self.chi_rest {
            Some(chi) => {
                let z: f64 = StandardNormal.sample(rng);
                let shifted = z + nc.sqrt();
                shifted * shifted + chi.sample(rng)
            }
            None => {
                let n = if nc > 0.0 {
                    Poisson::new(0.5 * nc).expect("positive mean").sample(rng)
                } else {
                    0.0
                };
                Self::chi_square(self.df + 2.0 * n, rng)
            }
        };
        step.scale * x
    }

    /// Rates on the grid, starting from `r0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.len());
        let mut r = self.params.r0;
        out.push(r);
        for &step in &self.steps {
            r = self.transition(step, r, rng);
            out.push(r);
        }
        out
    }

    /// An antithetic pair: the normal component of each transition is
    /// mirrored and the chi-square remainder shared. Below one degree of
    /// freedom there is no normal component and the pair is independent.
    pub fn sample_antithetic<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let Some(chi) = &self.chi_rest else {
            let a = self.sample(rng);
            let b = self.sample(rng);
            return (a, b);
        };
        let n = self.grid.len();
        let (mut up, mut down) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let (mut ru, mut rd) = (self.params.r0, self.params.r0);
        up.push(ru);
        down.push(rd);
        for &step in &self.steps {
            let z: f64 = StandardNormal.sample(rng);
            let rest = chi.sample(rng);
            let su = z + (ru * step.decay / step.scale).sqrt();
            let sd = -z + (rd * step.decay / step.scale).sqrt();
            ru = step.scale * (su * su + rest);
            rd = step.scale * (sd * sd + rest);
            up.push(ru);
            down.push(rd);
        }
        (up, down)
    }

    /// Trapezoidal `∫ r ds` from 0 to every grid point.
    pub fn cumulative_integral(&self, rates: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(rates.len());
        out.push(0.0);
        for (w, r) in self.grid.windows(2).zip(rates.windows(2)) {
            acc += 0.5 * (w[1] - w[0]) * (r[0] + r[1]);
            out.push(acc);
        }
        out
    }
}

pub(crate) fn uniform_grid(horizon: f64, steps_per_year: usize) -> Result<Vec<f64>> {
    require_positive("horizon", horizon)?;
    if steps_per_year == 0 {
        return Err(invalid("steps_per_year", "must be positive"));
    }
    let n = ((horizon * steps_per_year as f64).ceil() as usize).max(1);
    Ok((0..=n).map(|k| horizon * k as f64 / n as f64).collect())
}

/// Exact rates on `grid` (which must start at 0).
pub fn simulate_rate_path<R: Rng + ?Sized>(
    p: &CirParams,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(CirPathSampler::new(*p, grid.to_vec())?.sample(rng))
}

/// Monte Carlo `E[exp(-∫₀^T r ds)]` with a trapezoidal time integral.
pub fn mc_discount(
    p: &CirParams,
    maturity: f64,
    n_paths: usize,
    steps_per_year: usize,
    seed: u64,
    antithetic: bool,
    execution: Execution,
) -> Result<Estimate> {
    Ok(mc_discount_curve(p, &[maturity], n_paths, steps_per_year, seed, antithetic, execution)?[0])
}

/// [`mc_discount`] for several maturities from the same paths. The grid
/// uses `steps_per_year` uniform steps with each maturity inserted.
///
/// With `antithetic`, `n_paths / 2` antithetic pairs are drawn and each pair
/// average is one sample.
pub fn mc_discount_curve(
    p: &CirParams,
    maturities: &[f64],
    n_paths: usize,
    steps_per_year: usize,
    seed: u64,
    antithetic: bool,
    execution: Execution,
) -> Result<Vec<Estimate>> {
    if maturities.is_empty() {
        return Ok(Vec::new());
    }
    let horizon = maturities.iter().copied().fold(0.0, f64::max);
    if maturities.iter().any(|&m| !(m.is_finite() && m >= 0.0)) {
        return Err(invalid("maturity", "must be finite and >= 0"));
    }
    if horizon == 0.0 {
        return Ok(maturities.iter().map(|_| Estimate::exact(1.0)).collect());
    }
    let mut grid = uniform_grid(horizon, steps_per_year)?;
    grid.extend(maturities.iter().copied().filter(|&m| m > 0.0));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * horizon);
    let index: Vec<usize> = maturities
        .iter()
        .map(|&m| {
            grid.iter()
                .position(|&g| (g - m).abs() <= 1e-12 * horizon)
                .unwrap_or(0)
        })
        .collect();
    let sampler = CirPathSampler::new(*p, grid)?;
    let samples = if antithetic { n_paths / 2 } else { n_paths };
    if samples < 2 {
        return Err(invalid("n_paths", "too few paths"));
    }
    let per_path: Vec<Vec<f64>> = map_indexed(samples, execution, |i| {
        let mut rng = substream(seed, Purpose::Rate, i as u64);
        if antithetic {
            let (a, b) = sampler.sample_antithetic(&mut rng);
            let ia = sampler.cumulative_integral(&a);
            let ib = sampler.cumulative_integral(&b);
            index
                .iter()
                .map(|&k| 0.5 * ((-ia[k]).exp() + (-ib[k]).exp()))
                .collect()
        } else {
            let r = sampler.sample(&mut rng);
            let integral = sampler.cumulative_integral(&r);
            index.iter().map(|&k| (-integral[k]).exp()).collect()
        }
    });
    Ok((0..maturities.len())
        .map(|j| {
            if maturities[j] == 0.0 {
                return Estimate::exact(1.0);
            }
            let xs: Vec<f64> = per_path.iter().map(|v| v[j]).collect();
            Estimate::from_samples(&xs)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_checks() {
        assert!(CirParams::new(-0.01, 0.1, 0.02, 0.05).is_err());
        assert!(CirParams::new(0.01, 0.0, 0.02, 0.05).is_err());
        assert!(CirParams::new(0.01, 0.1, 0.02, 0.0).is_err());
        let p = CirParams::reference();
        assert!(p.h() > p.gamma_r);
        assert!(p.feller());
        assert!(2.0 * p.gamma_r * p.theta_cir > p.sigma * p.sigma);
    }

    #[test]
    fn bond_at_maturity_is_one() {
        let p = CirParams::reference();
        assert_eq!(bond_price(&p, 0.05, 2.0, 2.0).unwrap(), 1.0);
        assert!(bond_price(&p, 0.05, 2.5, 2.0).is_err());
    }

    #[test]
    fn printed_formula_agrees_with_stable_form() {
        // A and B exactly as usually printed, evaluated directly.
        let p = CirParams::reference();
        let (g, th, s) = (p.gamma_r, p.theta_cir, p.sigma);
        let h = (g * g + 2.0 * s * s).sqrt();
        for &tau in &[0.1, 1.0, 3.0, 10.0, 30.0] {
            let e = (h * tau).exp();
            let denom = h - g + e * (h + g);
            let a = 2.0 * g * th / (s * s) * (2.0 * h * (0.5 * (g + h) * tau).exp() / denom).ln();
            let b = 2.0 * (e - 1.0) / denom;
            let (a2, b2) = p.affine_coefficients(tau);
            assert!((a - a2).abs() < 1e-12 * a.abs().max(1e-3), "tau={tau}");
            assert!((b - b2).abs() < 1e-13 * b.abs());
        }
    }

    #[test]
    fn small_sigma_limit() {
        let p = CirParams::new(0.03, 0.5, 0.02, 1e-6).unwrap();
        let t = 3.0;
        let integral = p.theta_cir * t + (p.r0 - p.theta_cir) * (1.0 - (-p.gamma_r * t).exp()) / p.gamma_r;
        let q = bond_price(&p, p.r0, 0.0, t).unwrap();
        assert!((q - (-integral).exp()).abs() < 1e-4);
    }

    #[test]
    fn bond_monotone() {
        let p = CirParams::reference();
        let mut prev = 1.0;
        for k in 1..=100 {
            let q = bond_price(&p, p.r0, 0.0, 0.1 * k as f64).unwrap();
            assert!(q < prev && q > 0.0);
            prev = q;
        }
        let mut prev = 1.0;
        for k in 0..50 {
            let q = bond_price(&p, 0.002 * k as f64, 1.0, 4.0).unwrap();
            assert!(q <= prev && q > 0.0 && q <= 1.0);
            prev = q;
        }
    }

    #[test]
    fn single_point_grid() {
        let p = CirParams::reference();
        let mut rng = substream(0, Purpose::Rate, 0);
        assert_eq!(simulate_rate_path(&p, &[0.0], &mut rng).unwrap(), vec![p.r0]);
        assert!(simulate_rate_path(&p, &[0.5, 1.0], &mut rng).is_err());
    }

    #[test]
    fn stationary_mean() {
        let p = CirParams::reference();
        let xs: Vec<f64> = (0..10_000)
            .map(|i| {
                let mut rng = substream(21, Purpose::Rate, i);
                simulate_rate_path(&p, &[0.0, 200.0], &mut rng).unwrap()[1]
            })
            .collect();
        let e = Estimate::from_samples(&xs);
        // Mean at t is θ + (r0 - θ) e^{-γ t}; here r0 = θ.
        assert!(e.agrees_with_value(p.theta_cir, 3.0), "{e:?}");
    }

    #[test]
    fn transition_moments_low_df() {
        // df < 1 exercises the Poisson-mixture branch.
        let p = CirParams::new(0.04, 0.5, 0.01, 0.3).unwrap();
        assert!(p.degrees_of_freedom() < 1.0);
        let dt = 0.5;
        let xs: Vec<f64> = (0..50_000)
            .map(|i| {
                let mut rng = substream(22, Purpose::Rate, i);
                simulate_rate_path(&p, &[0.0, dt], &mut rng).unwrap()[1]
            })
            .collect();
        assert!(xs.iter().all(|&x| x >= 0.0));
        let e = Estimate::from_samples(&xs);
        let decay = (-p.gamma_r * dt).exp();
        let mean = p.theta_cir + (p.r0 - p.theta_cir) * decay;
        assert!(e.agrees_with_value(mean, 3.0), "{e:?} vs {mean}");
    }

    #[test]
    fn feller_paths_stay_positive() {
        let p = CirParams::reference();
        let sampler = CirPathSampler::uniform(p, 3.0, 1024).unwrap();
        for i in 0..200 {
            let mut rng = substream(23, Purpose::Rate, i);
            let path = sampler.sample(&mut rng);
            assert!(path.iter().all(|&r| r > 0.0));
        }
    }

    #[test]
    fn degenerate_discounts() {
        let zero = CirParams::new(0.0, 0.5, 0.0, 0.1).unwrap();
        let e = mc_discount(&zero, 2.0, 1000, 64, 1, false, Execution::Parallel).unwrap();
        assert_eq!(e.value, 1.0);

        let flat = CirParams::new(0.02, 1e4, 0.02, 1e-8).unwrap();
        let e = mc_discount(&flat, 3.0, 1000, 64, 1, false, Execution::Parallel).unwrap();
        assert!((e.value - (-0.06f64).exp()).abs() < 1e-4, "{e:?}");
    }

    #[test]
    fn closed_form_vs_mc_short() {
        let p = CirParams::reference();
        let est = mc_discount(&p, 1.0, 20_000, 128, 5, false, Execution::Parallel).unwrap();
        let q = bond_price(&p, p.r0, 0.0, 1.0).unwrap();
        assert!(est.agrees_with_value(q, 3.0), "{est:?} vs {q}");
    }

    #[test]
    fn antithetic_reduces_se() {
        let p = CirParams::reference();
        let plain = mc_discount(&p, 3.0, 20_000, 64, 6, false, Execution::Parallel).unwrap();
        let anti = mc_discount(&p, 3.0, 20_000, 64, 6, true, Execution::Parallel).unwrap();
        assert!(anti.std_error <= plain.std_error, "{anti:?} vs {plain:?}");
        let q = bond_price(&p, p.r0, 0.0, 3.0).unwrap();
        assert!(anti.agrees_with_value(q, 3.0));
    }
}
