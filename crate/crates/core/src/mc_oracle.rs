//! Direct Monte Carlo of the Cox-triggered bond: loss path, trigger level
//! and short-rate path drawn from independent substreams per path index.

use crate::error::{invalid, require_non_negative, Result};
use crate::loss_process::simulate_indexed_path;
use crate::model2::Model2State;
use crate::par::{map_indexed, Execution};
use crate::rates::{uniform_grid, CirPathSampler};
use crate::rng::{substream, Purpose};
use crate::stats::Estimate;

pub const MIN_PATHS: usize = 1000;
pub const MIN_STEPS_PER_YEAR: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    /// Uniform steps per year for the trapezoidal `∫ r ds`.
    pub steps_per_year: usize,
    pub seed: u64,
    /// Pair each loss path with an antithetic pair of rate paths.
    pub antithetic: bool,
    pub execution: Execution,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            steps_per_year: 256,
            seed: 1,
            antithetic: false,
            execution: Execution::Parallel,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(invalid(
                "n_paths",
                format!("need at least {MIN_PATHS}, got {}", self.n_paths),
            ));
        }
        if self.steps_per_year < MIN_STEPS_PER_YEAR {
            return Err(invalid(
                "steps_per_year",
                format!("need at least {MIN_STEPS_PER_YEAR}, got {}", self.steps_per_year),
            ));
        }
        Ok(())
    }
}

/// `E[P e^{-∫₀^T r ds} 1_{τ > T}]`. Triggered paths pay nothing, so their
/// rate path is never drawn.
pub fn mc_price_m2(state: &Model2State, config: &McConfig) -> Result<Estimate> {
    config.validate()?;
    let tm = state.contract.maturity;
    let principal = state.contract.principal;
    let sampler = CirPathSampler::new(state.rates, uniform_grid(tm, config.steps_per_year)?)?;
    let last = sampler.grid().len() - 1;
    let samples: Vec<Result<f64>> = map_indexed(config.n_paths, config.execution, |i| {
        let path = simulate_indexed_path(&state.spec, tm, config.seed, i as u64)?;
        let mut trigger_rng = substream(config.seed, Purpose::Trigger, i as u64);
        if !state.simulate_trigger(&path, &mut trigger_rng).survives(tm) {
            return Ok(0.0);
        }
        let mut rate_rng = substream(config.seed, Purpose::Rate, i as u64);
        let discount = if config.antithetic {
            let (a, b) = sampler.sample_antithetic(&mut rate_rng);
            let ia = sampler.cumulative_integral(&a)[last];
            let ib = sampler.cumulative_integral(&b)[last];
            0.5 * ((-ia).exp() + (-ib).exp())
        } else {
            let r = sampler.sample(&mut rate_rng);
            (-sampler.cumulative_integral(&r)[last]).exp()
        };
        Ok(principal * discount)
    });
    let samples = samples.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&samples))
}

/// Empirical `P(τ > u)` on `u_grid` from common paths, with binomial SE.
pub fn mc_survival(state: &Model2State, u_grid: &[f64], config: &McConfig) -> Result<Vec<Estimate>> {
    config.validate()?;
    for &u in u_grid {
        require_non_negative("u", u)?;
    }
    let horizon = u_grid.iter().copied().fold(0.0, f64::max);
    if horizon == 0.0 {
        return Ok(u_grid.iter().map(|_| Estimate::exact(1.0)).collect());
    }
    let flags: Vec<Result<Vec<bool>>> = map_indexed(config.n_paths, config.execution, |i| {
        let path = simulate_indexed_path(&state.spec, horizon, config.seed, i as u64)?;
        let mut rng = substream(config.seed, Purpose::Trigger, i as u64);
        let trigger = state.simulate_trigger(&path, &mut rng);
        Ok(u_grid.iter().map(|&u| trigger.survives(u)).collect())
    });
    let mut counts = vec![0usize; u_grid.len()];
    for f in flags {
        for (c, alive) in counts.iter_mut().zip(f?) {
            *c += alive as usize;
        }
    }
    Ok(u_grid
        .iter()
        .zip(counts)
        .map(|(&u, c)| {
            if u == 0.0 {
                Estimate::exact(1.0)
            } else {
                Estimate::proportion(c, config.n_paths)
            }
        })
        .collect())
}
