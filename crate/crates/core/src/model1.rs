//! CAT bond whose trigger is covered by a sequence of event times `θ_i`:
//! `τ = θ_i` on `{L_{θ_{i-1}} ≤ D < L_{θ_i}}`, with the loss `L` independent
//! of the event times and a constant short rate.
//!
//! All pricers take the law `Ψ(t) = P(L_t ≤ D)` as a [`LossLaw`], so the
//! error of the loss-distribution step stays visible to the caller.

use rand::Rng;

use crate::contract::CatBondContract;
use crate::error::{invalid, require_non_negative, Error, Result};
use crate::loss_law::LossLaw;
use crate::loss_process::{simulate_arrivals, simulate_path, Intensity, ShotNoiseSpec};
use crate::model2::TriggerTime;
use crate::par::{map_indexed, Execution};
use crate::quadrature::Quadrature;
use crate::rng::{substream, Purpose};
use crate::stats::Estimate;

/// The i-sum stops once `P(N_T ≥ i)` drops below this.
pub const TRUNCATION_TAIL: f64 = 1e-6;
const MAX_TERMS: usize = 10_000;
const TABLE_CELLS: usize = 2048;

/// Event times covering the trigger.
#[derive(Debug, Clone, PartialEq)]
pub enum Arrivals {
    /// Jump times of a Poisson process: totally inaccessible trigger.
    Poisson { rate: f64 },
    /// Known times: predictable trigger.
    Deterministic { times: Vec<f64> },
}

impl Arrivals {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Poisson { rate } => require_non_negative("arrival_rate", *rate),
            Self::Deterministic { times } => {
                let mut prev = 0.0;
                for &t in times {
                    if !(t.is_finite() && t > prev) {
                        return Err(invalid(
                            "arrival_times",
                            "must be finite, positive and strictly increasing",
                        ));
                    }
                    prev = t;
                }
                Ok(())
            }
        }
    }

    /// Event times in `(0, horizon]`.
    pub fn sample<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Self::Poisson { rate } => simulate_arrivals(&Intensity::Constant(*rate), horizon, rng),
            Self::Deterministic { times } => {
                Ok(times.iter().copied().take_while(|&t| t <= horizon).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model1Spec {
    pub arrivals: Arrivals,
    /// Loss process observed at the event times; simulated on its own clock.
    pub loss: ShotNoiseSpec,
    pub contract: CatBondContract,
    /// Constant short rate `r ≥ 0`.
    pub rate: f64,
}

impl Model1Spec {
    pub fn new(
        arrivals: Arrivals,
        loss: ShotNoiseSpec,
        contract: CatBondContract,
        rate: f64,
    ) -> Result<Self> {
        arrivals.validate()?;
        let loss = ShotNoiseSpec::new(loss.intensity, loss.alpha, loss.severity)?;
        contract.validate()?;
        require_non_negative("rate", rate)?;
        Ok(Self {
            arrivals,
            loss,
            contract,
            rate,
        })
    }

    fn riskless(&self) -> f64 {
        self.contract.principal * (-self.rate * self.contract.maturity).exp()
    }
}

/// Breakdown of a Model 1 price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model1Price {
    pub total: Estimate,
    /// `P e^{-rT} (1 - E[A^p_T])`.
    pub survival_leg: Estimate,
    /// `δ P E[∫₀^T e^{-rs} dA^p_s]`.
    pub recovery_leg: Estimate,
    /// Number of terms `i` kept in the sum.
    pub terms: usize,
}

impl Model1Price {
    fn from_legs(survival: &[f64], recovery: &[f64], terms: usize) -> Self {
        let total: Vec<f64> = survival.iter().zip(recovery).map(|(a, b)| a + b).collect();
        Self {
            total: Estimate::from_samples(&total),
            survival_leg: Estimate::from_samples(survival),
            recovery_leg: Estimate::from_samples(recovery),
            terms,
        }
    }

    fn exact(survival: f64, recovery: f64, terms: usize) -> Self {
        Self {
            total: Estimate::exact(survival + recovery),
            survival_leg: Estimate::exact(survival),
            recovery_leg: Estimate::exact(recovery),
            terms,
        }
    }
}

/// `Z_t = 1 - Σ_{θ_i ≤ t} (Ψ(θ_{i-1}) - Ψ(θ_i))` with `θ_0 = 0`.
///
/// An increase of `Ψ` between consecutive event times beyond three standard
/// errors of the provider is rejected.
pub fn azema_z<L: LossLaw + ?Sized>(thetas: &[f64], law: &L, t: f64) -> Result<f64> {
    require_non_negative("t", t)?;
    let mut z = 1.0;
    let mut prev_t = 0.0;
    let mut prev = law.psi(0.0);
    for &theta in thetas.iter().take_while(|&&th| th <= t) {
        let psi = law.psi(theta);
        let slack = 3.0 * (law.std_error(theta) + law.std_error(prev_t)) + 1e-12;
        if psi > prev + slack {
            return Err(Error::NonMonotonePsi(format!(
                "Ψ({theta}) = {psi} exceeds Ψ({prev_t}) = {prev}"
            )));
        }
        z -= prev - psi;
        prev = psi;
        prev_t = theta;
    }
    Ok(z)
}

/// Event times and a loss path drawn from `rng`; the trigger is the first
/// event time up to maturity at which `L > D`.
pub fn simulate_trigger_m1<R: Rng + ?Sized>(spec: &Model1Spec, rng: &mut R) -> Result<TriggerTime> {
    let tm = spec.contract.maturity;
    let thetas = spec.arrivals.sample(tm, rng)?;
    let path = simulate_path(&spec.loss, tm, rng)?;
    for theta in thetas {
        if path.loss_at(spec.loss.alpha, theta) > spec.contract.threshold {
            return Ok(TriggerTime::At(theta));
        }
    }
    Ok(TriggerTime::BeyondHorizon)
}

/// Direct payoff Monte Carlo
/// `E[P e^{-rT} 1_{τ > T} + δ P e^{-rτ} 1_{τ ≤ T}]`.
pub fn mc_price_m1(
    spec: &Model1Spec,
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<Estimate> {
    check_paths(n_paths)?;
    let p = spec.contract.principal;
    let samples: Vec<Result<f64>> = map_indexed(n_paths, execution, |i| {
        let mut rng = substream(seed, Purpose::Trigger, i as u64);
        Ok(match simulate_trigger_m1(spec, &mut rng)? {
            TriggerTime::BeyondHorizon => spec.riskless(),
            TriggerTime::At(tau) => spec.contract.recovery * p * (-spec.rate * tau).exp(),
        })
    });
    let samples = samples.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&samples))
}

/// Empirical `P(τ > u)` from [`simulate_trigger_m1`] (same streams as
/// [`mc_price_m1`]).
pub fn mc_trigger_survival_m1(
    spec: &Model1Spec,
    u: f64,
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<Estimate> {
    check_paths(n_paths)?;
    require_non_negative("u", u)?;
    let alive: Vec<Result<bool>> = map_indexed(n_paths, execution, |i| {
        let mut rng = substream(seed, Purpose::Trigger, i as u64);
        Ok(simulate_trigger_m1(spec, &mut rng)?.survives(u))
    });
    let mut count = 0;
    for a in alive {
        count += a? as usize;
    }
    Ok(Estimate::proportion(count, n_paths))
}

/// `E[Z_u]` over event-time paths (exact for deterministic times).
pub fn mean_azema_z<L: LossLaw + ?Sized>(
    spec: &Model1Spec,
    law: &L,
    u: f64,
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<Estimate> {
    if let Arrivals::Deterministic { times } = &spec.arrivals {
        return Ok(Estimate::exact(azema_z(times, law, u)?));
    }
    check_paths(n_paths)?;
    let zs: Vec<Result<f64>> = map_indexed(n_paths, execution, |i| {
        let mut rng = substream(seed, Purpose::Arrivals, i as u64);
        let thetas = spec.arrivals.sample(u.max(f64::MIN_POSITIVE), &mut rng)?;
        azema_z(&thetas, law, u)
    });
    let zs = zs.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&zs))
}

/// Number of terms `m` such that `P(N_T ≥ m) < TRUNCATION_TAIL`.
fn truncation_index(mean: f64) -> Result<usize> {
    let mut pmf = (-mean).exp();
    let mut cdf = 0.0;
    for i in 1..=MAX_TERMS {
        cdf += pmf;
        pmf *= mean / i as f64;
        // P(N ≥ i) = 1 - P(N ≤ i - 1)
        if 1.0 - cdf < TRUNCATION_TAIL {
            return Ok(i);
        }
    }
    Err(Error::NonConvergence(format!(
        "i-sum truncation needs more than {MAX_TERMS} terms at mean count {mean}"
    )))
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(invalid("n_paths", "need at least 2 paths"));
    }
    Ok(())
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn gauss_legendre5(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    h * GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS)
        .map(|(x, w)| w * f(c + h * x))
        .sum::<f64>()
}

/// Cumulative `∫₀^x Ψ` and `∫₀^x e^{-rs} Ψ(s) ds` on a uniform grid, with
/// 5-point Gauss–Legendre on partial cells.
struct PsiTable<'a, L: LossLaw + ?Sized> {
    law: &'a L,
    rate: f64,
    step: f64,
    plain: Vec<f64>,
    discounted: Vec<f64>,
}

impl<'a, L: LossLaw + ?Sized> PsiTable<'a, L> {
    fn new(law: &'a L, rate: f64, horizon: f64) -> Self {
        let step = horizon / TABLE_CELLS as f64;
        let mut plain = vec![0.0; TABLE_CELLS + 1];
        let mut discounted = vec![0.0; TABLE_CELLS + 1];
        for k in 0..TABLE_CELLS {
            let (a, b) = (k as f64 * step, (k + 1) as f64 * step);
            plain[k + 1] = plain[k] + gauss_legendre5(|s| law.psi(s), a, b);
            discounted[k + 1] =
                discounted[k] + gauss_legendre5(|s| (-rate * s).exp() * law.psi(s), a, b);
        }
        Self {
            law,
            rate,
            step,
            plain,
            discounted,
        }
    }

    /// `(∫₀^x Ψ, ∫₀^x e^{-rs} Ψ)`.
    fn cumulative(&self, x: f64) -> (f64, f64) {
        let k = ((x / self.step) as usize).min(TABLE_CELLS);
        let lo = k as f64 * self.step;
        if x <= lo {
            return (self.plain[k], self.discounted[k]);
        }
        let law = self.law;
        let rate = self.rate;
        (
            self.plain[k] + gauss_legendre5(|s| law.psi(s), lo, x),
            self.discounted[k] + gauss_legendre5(|s| (-rate * s).exp() * law.psi(s), lo, x),
        )
    }
}

/// `∫_a^b e^{-rs} ds`.
fn discount_integral(rate: f64, a: f64, b: f64) -> f64 {
    if rate == 0.0 {
        b - a
    } else {
        (-rate * a).exp() * -(-rate * (b - a)).exp_m1() / rate
    }
}

fn poisson_rate(spec: &Model1Spec) -> Result<f64> {
    match spec.arrivals {
        Arrivals::Poisson { rate } => Ok(rate),
        Arrivals::Deterministic { .. } => Err(Error::Unsupported(
            "this pricer needs Poisson event times".into(),
        )),
    }
}

/// `V_0(T) = P e^{-rT} (1 - Σ_i ∫₀^T E[Q^i(s)] ds) + δ P Σ_i ∫₀^T e^{-rs} E[Q^i(s)] ds`
/// with `Q^i(s) = (Ψ(θ_{i-1}) - Ψ(s)) λ 1_{θ_{i-1} ≤ s < θ_i}`, by Monte
/// Carlo over event-time paths.
///
/// The i-sum is truncated at [`TRUNCATION_TAIL`], or at `max_terms` if that
/// is smaller.
pub fn price_inaccessible<L: LossLaw + ?Sized>(
    spec: &Model1Spec,
    law: &L,
    n_paths: usize,
    seed: u64,
    execution: Execution,
    max_terms: Option<usize>,
) -> Result<Model1Price> {
    let lambda = poisson_rate(spec)?;
    check_paths(n_paths)?;
    let tm = spec.contract.maturity;
    let riskless = spec.riskless();
    if lambda == 0.0 {
        return Ok(Model1Price::exact(riskless, 0.0, 0));
    }
    let mut terms = truncation_index(lambda * tm)?;
    if let Some(m) = max_terms {
        terms = terms.min(m.max(1));
    }
    let table = PsiTable::new(law, spec.rate, tm);
    let delta_p = spec.contract.recovery * spec.contract.principal;
    let legs: Vec<Result<(f64, f64)>> = map_indexed(n_paths, execution, |i| {
        let mut rng = substream(seed, Purpose::Arrivals, i as u64);
        let thetas = spec.arrivals.sample(tm, &mut rng)?;
        let mut compensator = 0.0;
        let mut discounted = 0.0;
        let mut a = 0.0;
        let (mut int_a, mut disc_a) = (0.0, 0.0);
        for k in 0..terms {
            let b = thetas.get(k).copied().unwrap_or(tm);
            let psi_a = law.psi(a);
            let (int_b, disc_b) = table.cumulative(b);
            compensator += lambda * (psi_a * (b - a) - (int_b - int_a));
            discounted += lambda * (psi_a * discount_integral(spec.rate, a, b) - (disc_b - disc_a));
            if k >= thetas.len() {
                break;
            }
            a = b;
            int_a = int_b;
            disc_a = disc_b;
        }
        Ok((riskless * (1.0 - compensator), delta_p * discounted))
    });
    let (mut survival, mut recovery) = (Vec::with_capacity(n_paths), Vec::with_capacity(n_paths));
    for l in legs {
        let (s, r) = l?;
        survival.push(s);
        recovery.push(r);
    }
    Ok(Model1Price::from_legs(&survival, &recovery, terms))
}

/// The two-stopping-time price: only the first event time can trigger,
/// `V_0 = P e^{-rT} (1 - ∫₀^T E[(1 - Ψ(s)) λ 1_{s < θ_1}] ds) + δ P ∫₀^T e^{-rs} E[...] ds`,
/// by Monte Carlo over `θ_1` (the same draws as [`price_inaccessible`]).
pub fn price_two_stopping_times<L: LossLaw + ?Sized>(
    spec: &Model1Spec,
    law: &L,
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<Model1Price> {
    let lambda = poisson_rate(spec)?;
    check_paths(n_paths)?;
    let tm = spec.contract.maturity;
    let riskless = spec.riskless();
    if lambda == 0.0 {
        return Ok(Model1Price::exact(riskless, 0.0, 1));
    }
    let table = PsiTable::new(law, spec.rate, tm);
    let delta_p = spec.contract.recovery * spec.contract.principal;
    let legs: Vec<Result<(f64, f64)>> = map_indexed(n_paths, execution, |i| {
        let mut rng = substream(seed, Purpose::Arrivals, i as u64);
        let first = spec.arrivals.sample(tm, &mut rng)?.first().copied().unwrap_or(tm);
        let (int_psi, disc_psi) = table.cumulative(first);
        let compensator = lambda * (first - int_psi);
        let discounted = lambda * (discount_integral(spec.rate, 0.0, first) - disc_psi);
        Ok((riskless * (1.0 - compensator), delta_p * discounted))
    });
    let (mut survival, mut recovery) = (Vec::with_capacity(n_paths), Vec::with_capacity(n_paths));
    for l in legs {
        let (s, r) = l?;
        survival.push(s);
        recovery.push(r);
    }
    Ok(Model1Price::from_legs(&survival, &recovery, 1))
}

/// [`price_two_stopping_times`] with `E[1_{s < θ_1}] = e^{-λs}` integrated
/// by adaptive quadrature instead of sampled.
pub fn two_stopping_times_exact<L: LossLaw + ?Sized>(spec: &Model1Spec, law: &L) -> Result<f64> {
    let lambda = poisson_rate(spec)?;
    let tm = spec.contract.maturity;
    let q = Quadrature::new(1e-12);
    let r = spec.rate;
    let survival = q
        .integrate(|s| (1.0 - law.psi(s)) * (-lambda * s).exp(), 0.0, tm)?
        .value;
    let discounted = q
        .integrate(|s| (1.0 - law.psi(s)) * (-(lambda + r) * s).exp(), 0.0, tm)?
        .value;
    let delta_p = spec.contract.recovery * spec.contract.principal;
    Ok(spec.riskless() * (1.0 - lambda * survival) + delta_p * lambda * discounted)
}

/// Predictable trigger at zero rate: `V_0 = P (δ + (1 - δ) E[Z_T])` with
/// `E[Z_T] = Ψ(θ_m)`, `θ_m` the last event time up to maturity.
pub fn price_predictable<L: LossLaw + ?Sized>(spec: &Model1Spec, law: &L) -> Result<Estimate> {
    let Arrivals::Deterministic { times } = &spec.arrivals else {
        return Err(Error::Unsupported(
            "the predictable pricer needs deterministic event times".into(),
        ));
    };
    if spec.rate != 0.0 {
        return Err(Error::Unsupported(
            "the predictable closed form holds at zero rate only; use mc_price_m1".into(),
        ));
    }
    let tm = spec.contract.maturity;
    let z = azema_z(times, law, tm)?;
    let last = times.iter().copied().rfind(|&t| t <= tm).unwrap_or(0.0);
    let p = spec.contract.principal;
    let delta = spec.contract.recovery;
    Ok(Estimate {
        value: p * (delta + (1.0 - delta) * z),
        std_error: p * (1.0 - delta) * law.std_error(last),
        samples: 0,
    })
}
