//! Aggregate catastrophe losses: Poisson arrivals, i.i.d. shots and the
//! Markovian shot-noise `L_t = Σ_{θ_i ≤ t} y_i e^{α (t - θ_i)}`.
//!
//! Paths are stored event by event; `L` is closed form between events, so no
//! time discretization is involved anywhere.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, require_non_negative, Error, Result};
use crate::par::{map_indexed, Execution};
use crate::rng::{substream, Purpose};
use crate::severity::SeverityModel;
use crate::stats::Estimate;

/// Claim-arrival intensity `λ^N(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Intensity {
    Constant(f64),
    /// `rates[k]` applies on `[starts[k], starts[k + 1])`; `starts[0] = 0`
    /// and the last rate extends to infinity.
    Piecewise { starts: Vec<f64>, rates: Vec<f64> },
}

impl Intensity {
    pub fn constant(rate: f64) -> Result<Self> {
        require_non_negative("lambda_n", rate)?;
        Ok(Self::Constant(rate))
    }

    pub fn piecewise(starts: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let s = Self::Piecewise { starts, rates };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant(r) => require_non_negative("lambda_n", *r),
            Self::Piecewise { starts, rates } => {
                if starts.is_empty() || starts.len() != rates.len() {
                    return Err(invalid(
                        "lambda_n",
                        "piecewise intensity needs matching, non-empty starts and rates",
                    ));
                }
                if starts[0] != 0.0 {
                    return Err(invalid("lambda_n", "first piece must start at 0"));
                }
                if starts.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return Err(invalid("lambda_n", "piece starts must be strictly increasing"));
                }
                for &r in rates {
                    if !r.is_finite() {
                        return Err(Error::UnboundedIntensity(format!("rate {r}")));
                    }
                    require_non_negative("lambda_n", r)?;
                }
                Ok(())
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Self::Constant(r) => *r,
            Self::Piecewise { starts, rates } => {
                let k = starts.partition_point(|&s| s <= t).saturating_sub(1);
                rates[k]
            }
        }
    }

    /// Supremum of the intensity over `[0, horizon]`.
    pub fn bound(&self, horizon: f64) -> f64 {
        match self {
            Self::Constant(r) => *r,
            Self::Piecewise { starts, rates } => starts
                .iter()
                .zip(rates)
                .filter(|(&s, _)| s <= horizon)
                .map(|(_, &r)| r)
                .fold(0.0, f64::max),
        }
    }

    /// `∫_a^b λ^N(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.segments(a, b)
            .iter()
            .map(|&(lo, hi, r)| r * (hi - lo))
            .sum()
    }

    /// Pieces of constant intensity covering `[a, b]` as `(lo, hi, rate)`.
    pub fn segments(&self, a: f64, b: f64) -> Vec<(f64, f64, f64)> {
        match self {
            Self::Constant(r) => vec![(a, b, *r)],
            Self::Piecewise { starts, rates } => {
                let mut out = Vec::new();
                for k in 0..starts.len() {
                    let lo = starts[k].max(a);
                    let hi = starts.get(k + 1).copied().unwrap_or(f64::INFINITY).min(b);
                    if hi > lo {
                        out.push((lo, hi, rates[k]));
                    }
                }
                out
            }
        }
    }
}

/// Shot-noise loss model with impulse `H(t, x) = x e^{α t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotNoiseSpec {
    pub intensity: Intensity,
    /// Growth rate `α ≥ 0`; `α = 0` is a compound Poisson process.
    pub alpha: f64,
    pub severity: SeverityModel,
}

impl ShotNoiseSpec {
    pub fn new(intensity: Intensity, alpha: f64, severity: SeverityModel) -> Result<Self> {
        intensity.validate()?;
        require_non_negative("alpha", alpha)?;
        severity.validate()?;
        Ok(Self {
            intensity,
            alpha,
            severity,
        })
    }

    pub fn homogeneous(lambda_n: f64, alpha: f64, severity: SeverityModel) -> Result<Self> {
        Self::new(Intensity::constant(lambda_n)?, alpha, severity)
    }

    /// Reference loss parameters: `λ^N = 0.5`, `α = 0.8`,
    /// log-normal shots with `μ = 6.387`, `σ = 0.153`.
    pub fn reference() -> Self {
        Self {
            intensity: Intensity::Constant(0.5),
            alpha: 0.8,
            severity: SeverityModel::LogNormal {
                mu: 6.387,
                sigma: 0.153,
            },
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEvent {
    pub theta: f64,
    pub y: f64,
}

/// A realized loss path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPath {
    pub horizon: f64,
    pub events: Vec<LossEvent>,
}

impl LossPath {
    pub fn new(horizon: f64, events: Vec<LossEvent>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid("horizon", format!("must be > 0, got {horizon}")));
        }
        let mut prev = 0.0;
        for e in &events {
            if !(e.theta > prev) || e.theta > horizon {
                return Err(invalid(
                    "events",
                    format!("event times must be strictly increasing in (0, {horizon}]"),
                ));
            }
            if !(e.y.is_finite() && e.y >= 0.0) {
                return Err(invalid("events", format!("shot must be >= 0, got {}", e.y)));
            }
            prev = e.theta;
        }
        Ok(Self { horizon, events })
    }

    pub fn empty(horizon: f64) -> Self {
        Self {
            horizon,
            events: Vec::new(),
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain(format!(
                "t = {t} outside path horizon [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `L_t` (right-continuous).
    pub fn evaluate(&self, spec: &ShotNoiseSpec, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.loss_at(spec.alpha, t))
    }

    /// `L_{t-}`, the value just before any event at `t`.
    pub fn evaluate_before(&self, spec: &ShotNoiseSpec, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.sum_events(spec.alpha, t, |theta| theta < t))
    }

    pub(crate) fn loss_at(&self, alpha: f64, t: f64) -> f64 {
        self.sum_events(alpha, t, |theta| theta <= t)
    }

    fn sum_events(&self, alpha: f64, t: f64, include: impl Fn(f64) -> bool) -> f64 {
        let mut total = 0.0;
        for e in self.events.iter().take_while(|e| include(e.theta)) {
            if alpha == 0.0 {
                total += e.y;
            } else {
                total += e.y * (alpha * (t - e.theta)).exp();
            }
        }
        total
    }

    pub fn event_count_until(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.theta <= t)
    }

    /// CSV with header `theta,y`, 10 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,y\n");
        for e in &self.events {
            let _ = writeln!(out, "{},{}", fmt_sig(e.theta), fmt_sig(e.y));
        }
        out
    }

    pub fn from_csv(horizon: f64, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "theta,y" => {}
            other => return Err(Error::Parse(format!("expected header `theta,y`, got {other:?}"))),
        }
        let mut events = Vec::new();
        for (n, line) in lines.enumerate() {
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("row {}: expected two fields", n + 1)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)))
            };
            events.push(LossEvent {
                theta: parse(a)?,
                y: parse(b)?,
            });
        }
        Self::new(horizon, events)
    }
}

/// Formats with 10 significant digits in plain decimal notation.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (9 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        trimmed.to_string()
    } else {
        s
    }
}

/// Poisson arrival times on `(0, horizon]`.
///
/// Constant intensity uses exponential gaps; a piecewise intensity is
/// thinned against its supremum on the horizon.
pub fn simulate_arrivals<R: Rng + ?Sized>(
    intensity: &Intensity,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    intensity.validate()?;
    match intensity {
        Intensity::Constant(rate) => homogeneous_arrivals(*rate, horizon, rng),
        Intensity::Piecewise { .. } => {
            let bound = intensity.bound(horizon);
            simulate_arrivals_thinned(|t| intensity.at(t), bound, horizon, rng)
        }
    }
}

fn homogeneous_arrivals<R: Rng + ?Sized>(rate: f64, horizon: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid("horizon", format!("must be > 0, got {horizon}")));
    }
    let mut times = Vec::new();
    if rate == 0.0 {
        return Ok(times);
    }
    let mut t = 0.0;
    loop {
        let gap: f64 = Exp1.sample(rng);
        t += gap / rate;
        if t > horizon {
            return Ok(times);
        }
        times.push(t);
    }
}

/// Lewis–Shedler thinning of a rate function against a declared bound.
/// A rate above the bound (or a non-finite bound) is rejected.
pub fn simulate_arrivals_thinned<R, F>(
    rate: F,
    bound: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    if !bound.is_finite() || bound < 0.0 {
        return Err(Error::UnboundedIntensity(format!("bound {bound}")));
    }
    let candidates = homogeneous_arrivals(bound, horizon, rng)?;
    let mut times = Vec::with_capacity(candidates.len());
    for t in candidates {
        let r = rate(t);
        if !(r.is_finite() && r >= 0.0 && r <= bound) {
            return Err(Error::UnboundedIntensity(format!(
                "rate {r} at t = {t} exceeds bound {bound}"
            )));
        }
        if rng.random::<f64>() * bound < r {
            times.push(t);
        }
    }
    Ok(times)
}

/// Arrivals from `simulate_arrivals` with i.i.d. shots drawn afterwards from
/// the same stream, so shots are independent of the arrival times.
pub fn simulate_path<R: Rng + ?Sized>(
    spec: &ShotNoiseSpec,
    horizon: f64,
    rng: &mut R,
) -> Result<LossPath> {
    let times = simulate_arrivals(&spec.intensity, horizon, rng)?;
    let events = times
        .into_iter()
        .map(|theta| LossEvent {
            theta,
            y: spec.severity.sample(rng),
        })
        .collect();
    Ok(LossPath { horizon, events })
}

/// The path used for index `path_index` under `seed` by every Monte Carlo
/// routine in this crate.
pub fn simulate_indexed_path(
    spec: &ShotNoiseSpec,
    horizon: f64,
    seed: u64,
    path_index: u64,
) -> Result<LossPath> {
    let mut rng = substream(seed, Purpose::Loss, path_index);
    simulate_path(spec, horizon, &mut rng)
}

/// Monte Carlo estimate of `Ψ(t, D) = P(L_t ≤ D)` with binomial standard error.
pub fn aggregate_cdf_mc(
    spec: &ShotNoiseSpec,
    t: f64,
    d: f64,
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<Estimate> {
    Ok(aggregate_cdf_mc_grid(spec, &[t], d, n_paths, seed, execution)?[0])
}

/// `Ψ(t_k, D)` for every `t_k` in `times`, evaluated on common paths, which
/// keeps the estimates non-increasing in `t`.
pub fn aggregate_cdf_mc_grid(
    spec: &ShotNoiseSpec,
    times: &[f64],
    d: f64,
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<Estimate>> {
    if !(d > 0.0) {
        return Err(invalid("d", format!("threshold must be > 0, got {d}")));
    }
    if n_paths == 0 {
        return Err(invalid("n_paths", "must be positive"));
    }
    if times.iter().any(|&t| !(t.is_finite() && t >= 0.0)) {
        return Err(Error::Domain("times must be finite and >= 0".into()));
    }
    let horizon = times.iter().copied().fold(0.0, f64::max);
    if horizon == 0.0 {
        return Ok(times.iter().map(|_| Estimate::exact(1.0)).collect());
    }
    let per_path: Vec<Result<Vec<bool>>> = map_indexed(n_paths, execution, |i| {
        let mut rng = substream(seed, Purpose::LossCdf, i as u64);
        let path = simulate_path(spec, horizon, &mut rng)?;
        Ok(times.iter().map(|&t| path.loss_at(spec.alpha, t) <= d).collect())
    });
    let mut counts = vec![0usize; times.len()];
    for flags in per_path {
        for (c, ok) in counts.iter_mut().zip(flags?) {
            *c += ok as usize;
        }
    }
    Ok(times
        .iter()
        .zip(counts)
        .map(|(&t, c)| {
            if t == 0.0 {
                Estimate::exact(1.0)
            } else {
                Estimate::proportion(c, n_paths)
            }
        })
        .collect())
}
