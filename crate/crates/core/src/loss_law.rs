//! Providers of `Ψ(t) = P(L_t ≤ D)` for a fixed threshold `D`.

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::loss_process::{aggregate_cdf_mc_grid, ShotNoiseSpec};
use crate::panjer::Lattice;
use crate::par::Execution;
use crate::quadrature::Quadrature;
use crate::severity::SeverityModel;

/// Law of the aggregate loss at a fixed threshold, as a function of time.
pub trait LossLaw: Sync {
    fn psi(&self, t: f64) -> f64;

    /// Standard error of `psi(t)`; zero for deterministic providers.
    fn std_error(&self, _t: f64) -> f64 {
        0.0
    }

    /// `∫_a^b Ψ(s) ds`.
    fn psi_integral(&self, a: f64, b: f64) -> Result<f64> {
        Ok(Quadrature::new(1e-12).integrate(|s| self.psi(s), a, b)?.value)
    }
}

impl<F: Fn(f64) -> f64 + Sync> LossLaw for F {
    fn psi(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Compound-Poisson `Ψ` on the rounding lattice used by
/// [`panjer_cdf`](crate::panjer::panjer_cdf):
/// `Ψ(t) = Σ_n P(N_t = n) · P(S_n ≤ D)` with the n-fold lattice convolutions
/// precomputed, so evaluation at any `t ≤ t_max` is exact in `t`.
#[derive(Debug, Clone)]
pub struct LatticePsi {
    lambda_n: f64,
    t_max: f64,
    /// `P(S_n ≤ D)` for `n = 0, 1, ...`
    convolution_cdf: Vec<f64>,
    step: f64,
}

impl LatticePsi {
    pub fn new(
        lambda_n: f64,
        severity: &SeverityModel,
        d: f64,
        grid_step: f64,
        t_max: f64,
    ) -> Result<Self> {
        require_non_negative("lambda_n", lambda_n)?;
        require_positive("d", d)?;
        require_positive("grid_step", grid_step)?;
        require_positive("t_max", t_max)?;
        let mean_count = lambda_n * t_max;
        if mean_count > 700.0 {
            return Err(Error::Unsupported(format!(
                "expected claim count {mean_count} too large"
            )));
        }
        let lattice = Lattice::fit(severity, d, grid_step)?;
        let f = &lattice.masses;
        let mut pmf = vec![0.0; f.len()];
        pmf[0] = 1.0;
        let mut convolution_cdf = vec![1.0];
        // Poisson weight of the last term at the largest mean count; beyond
        // the mode the remaining tail is below pois * m / (n + 1 - m).
        let mut pois = (-mean_count).exp();
        let mut n = 0usize;
        let tail_small = |n: usize, pois: f64| {
            let n1 = n as f64 + 1.0;
            n1 > mean_count && pois * mean_count / (n1 - mean_count) < 1e-16
        };
        while !tail_small(n, pois) && *convolution_cdf.last().unwrap() > 1e-300 {
            n += 1;
            let mut next = vec![0.0; f.len()];
            for (k, slot) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..=k {
                    acc += f[j] * pmf[k - j];
                }
                *slot = acc;
            }
            pmf = next;
            convolution_cdf.push(pmf.iter().sum());
            pois *= mean_count / n as f64;
            if n > 10_000 {
                return Err(Error::NonConvergence("Poisson truncation".into()));
            }
        }
        Ok(Self {
            lambda_n,
            t_max,
            convolution_cdf,
            step: lattice.step,
        })
    }

    pub fn lattice_step(&self) -> f64 {
        self.step
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }
}

impl LossLaw for LatticePsi {
    fn psi(&self, t: f64) -> f64 {
        let m = self.lambda_n * t.max(0.0);
        let mut pois = (-m).exp();
        let mut total = pois * self.convolution_cdf[0];
        for (n, g) in self.convolution_cdf.iter().enumerate().skip(1) {
            pois *= m / n as f64;
            total += pois * g;
        }
        total.min(1.0)
    }
}

/// Monte Carlo `Ψ` on a uniform time grid (common paths, so the table is
/// non-increasing in `t`), linearly interpolated in between.
#[derive(Debug, Clone)]
pub struct TabulatedPsi {
    times: Vec<f64>,
    values: Vec<f64>,
    std_errors: Vec<f64>,
}

impl TabulatedPsi {
    pub fn monte_carlo(
        spec: &ShotNoiseSpec,
        d: f64,
        t_max: f64,
        nodes: usize,
        n_paths: usize,
        seed: u64,
        execution: Execution,
    ) -> Result<Self> {
        require_positive("t_max", t_max)?;
        let nodes = nodes.max(2);
        let times: Vec<f64> = (0..nodes)
            .map(|k| t_max * k as f64 / (nodes - 1) as f64)
            .collect();
        let est = aggregate_cdf_mc_grid(spec, &times, d, n_paths, seed, execution)?;
        Ok(Self {
            values: est.iter().map(|e| e.value).collect(),
            std_errors: est.iter().map(|e| e.std_error).collect(),
            times,
        })
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.times.len() - 1;
        if t <= 0.0 {
            return (0, 0.0);
        }
        if t >= self.times[last] {
            return (last - 1, 1.0);
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        (k, w)
    }
}

impl LossLaw for TabulatedPsi {
    fn psi(&self, t: f64) -> f64 {
        let (k, w) = self.locate(t);
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    fn std_error(&self, t: f64) -> f64 {
        let (k, w) = self.locate(t);
        (1.0 - w) * self.std_errors[k] + w * self.std_errors[k + 1]
    }
}
