//! Cox-triggered CAT bond on a Markovian shot-noise loss.
//!
//! The trigger is `τ = inf{t : L_t / D > Θ}` with `Θ` a unit exponential
//! independent of everything else, so `P(τ > t | F_t) = Z_t = e^{-L_t/D}`.
//! Prices are zero-recovery (`δ = 0`).

use std::cell::Cell;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::contract::CatBondContract;
use crate::error::{invalid, require_non_negative, Error, Result};
use crate::loss_process::{fmt_sig, Intensity, LossPath, ShotNoiseSpec};
use crate::quadrature::Quadrature;
use crate::rates::{bond_price, CirParams};
use crate::severity::SeverityModel;

/// Absolute tolerance on the time integrals in the price exponent.
pub const EXPONENT_TOL: f64 = 1e-10;

/// How `φ` is evaluated inside the price exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplaceMethod {
    /// [`SeverityModel::laplace`]: exact, Lambert-W or quadrature by family.
    #[default]
    Closed,
    /// [`SeverityModel::laplace_oracle`] against the density.
    Quadrature,
}

/// Trigger time relative to a simulation horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TriggerTime {
    At(f64),
    BeyondHorizon,
}

impl TriggerTime {
    /// `τ > t`.
    pub fn survives(&self, t: f64) -> bool {
        match *self {
            Self::At(tau) => tau > t,
            Self::BeyondHorizon => true,
        }
    }

    pub fn time(&self) -> Option<f64> {
        match *self {
            Self::At(tau) => Some(tau),
            Self::BeyondHorizon => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model2State {
    pub spec: ShotNoiseSpec,
    pub contract: CatBondContract,
    pub rates: CirParams,
    pub laplace: LaplaceMethod,
}

impl Model2State {
    pub fn new(spec: ShotNoiseSpec, contract: CatBondContract, rates: CirParams) -> Result<Self> {
        let spec = ShotNoiseSpec::new(spec.intensity, spec.alpha, spec.severity)?;
        contract.validate()?;
        rates.validate()?;
        if contract.recovery != 0.0 {
            return Err(Error::Unsupported(
                "the shot-noise pricer covers zero recovery only; use the Model 1 pricers for δ > 0"
                    .into(),
            ));
        }
        if let SeverityModel::Pareto { shape, .. } = spec.severity {
            if shape <= 2.0 {
                return Err(invalid(
                    "severity.shape",
                    format!("Pareto shape must exceed 2 (finite variance), got {shape}"),
                ));
            }
        }
        Ok(Self {
            spec,
            contract,
            rates,
            laplace: LaplaceMethod::Closed,
        })
    }

    /// The worked-example set: `D = 10⁴`, `T = 3`, unit principal.
    pub fn reference() -> Self {
        Self {
            spec: ShotNoiseSpec::reference(),
            contract: CatBondContract::reference(),
            rates: CirParams::reference(),
            laplace: LaplaceMethod::Closed,
        }
    }

    pub fn with_laplace(mut self, laplace: LaplaceMethod) -> Self {
        self.laplace = laplace;
        self
    }

    pub fn with_contract(&self, contract: CatBondContract) -> Result<Self> {
        Ok(Self::new(self.spec.clone(), contract, self.rates)?.with_laplace(self.laplace))
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        self.with_contract(self.contract.with_threshold(threshold)?)
    }

    pub fn with_maturity(&self, maturity: f64) -> Result<Self> {
        self.with_contract(self.contract.with_maturity(maturity)?)
    }

    fn d(&self) -> f64 {
        self.contract.threshold
    }

    fn maturity(&self) -> f64 {
        self.contract.maturity
    }

    fn phi(&self, u: f64) -> Result<f64> {
        match self.laplace {
            LaplaceMethod::Closed => self.spec.severity.laplace(u),
            LaplaceMethod::Quadrature => Ok(self.spec.severity.laplace_oracle(u)?.value),
        }
    }

    /// `∫_a^b λ^N(s) (φ(e^{α(end - s)} / D) - 1) ds`.
    ///
    /// Constant intensity integrates in `v = end - s` with the configured
    /// `φ`; a piecewise intensity integrates each piece against the
    /// density-quadrature `φ`.
    fn log_survival_between(&self, a: f64, b: f64, end: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let alpha = self.spec.alpha;
        let d = self.d();
        if alpha == 0.0 {
            let phi = self.phi(1.0 / d)?;
            return Ok(self.spec.intensity.integral(a, b) * (phi - 1.0));
        }
        let quad = Quadrature::new(EXPONENT_TOL);
        let failure = Cell::new(None);
        let guarded = |r: Result<f64>| match r {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        };
        let total = match &self.spec.intensity {
            Intensity::Constant(rate) => {
                if *rate == 0.0 {
                    return Ok(0.0);
                }
                let integral = quad.integrate(
                    |v| guarded(self.phi((alpha * v).exp() / d)) - 1.0,
                    end - b,
                    end - a,
                );
                rate * first_error(integral, &failure)?
            }
            intensity @ Intensity::Piecewise { .. } => {
                let severity = self.spec.severity;
                let mut total = 0.0;
                for (lo, hi, rate) in intensity.segments(a, b) {
                    if rate == 0.0 {
                        continue;
                    }
                    let integral = quad.integrate(
                        |s| {
                            let u = (alpha * (end - s)).exp() / d;
                            guarded(severity.laplace_oracle(u).map(|i| i.value)) - 1.0
                        },
                        lo,
                        hi,
                    );
                    total += rate * first_error(integral, &failure)?;
                }
                total
            }
        };
        Ok(total)
    }

    /// `c(u) = P(τ > u) = E[e^{-L_u / D}]`.
    pub fn survival_c(&self, u: f64) -> Result<f64> {
        require_non_negative("u", u)?;
        Ok(self.log_survival_between(0.0, u, u)?.exp())
    }

    /// Trigger time for a given exponential level `Θ`: the first time
    /// `L_t > D Θ` on `[0, path.horizon]`, continuous growth included.
    pub fn trigger_for_level(&self, path: &LossPath, level: f64) -> TriggerTime {
        let barrier = self.d() * level;
        let alpha = self.spec.alpha;
        let mut loss = 0.0;
        let mut last = 0.0;
        let crossing_after = |loss: f64, from: f64| -> Option<f64> {
            if alpha > 0.0 && loss > 0.0 {
                Some(from + (barrier / loss).ln() / alpha)
            } else {
                None
            }
        };
        for e in &path.events {
            if let Some(t) = crossing_after(loss, last) {
                if t < e.theta {
                    return TriggerTime::At(t.max(last));
                }
            }
            loss = loss * (alpha * (e.theta - last)).exp() + e.y;
            last = e.theta;
            if loss > barrier {
                return TriggerTime::At(e.theta);
            }
        }
        match crossing_after(loss, last) {
            Some(t) if t <= path.horizon => TriggerTime::At(t.max(last)),
            _ => TriggerTime::BeyondHorizon,
        }
    }

    /// Draws `Θ` from `rng` and applies [`Self::trigger_for_level`].
    pub fn simulate_trigger<R: Rng + ?Sized>(&self, path: &LossPath, rng: &mut R) -> TriggerTime {
        self.trigger_for_level(path, sample_trigger_level(rng))
    }

    /// Jump part of the intensity, `λ^N(t) (1 - φ(1/D))`.
    pub fn jump_intensity(&self, t: f64) -> Result<f64> {
        require_non_negative("t", t)?;
        Ok(self.spec.intensity.at(t) * (1.0 - self.phi(1.0 / self.d())?))
    }

    /// Intensity `λ_t` of `τ` given `L_t = loss`: the jump part plus the
    /// drift `α L_t / D` of the continuous growth between events.
    pub fn intensity_rate(&self, t: f64, loss: f64) -> Result<f64> {
        require_non_negative("loss", loss)?;
        Ok(self.jump_intensity(t)? + self.spec.alpha * loss / self.d())
    }

    /// Density of the dual predictable projection, `Z_{t-} λ_t`, where
    /// `loss` is `L_{t-}`.
    pub fn dual_projection_increment(&self, t: f64, loss: f64) -> Result<f64> {
        Ok((-loss / self.d()).exp() * self.intensity_rate(t, loss)?)
    }

    /// `A^{p,F}_t` along a realized path.
    pub fn dual_projection(&self, path: &LossPath, t: f64) -> Result<f64> {
        if !(0.0..=path.horizon).contains(&t) {
            return Err(Error::Domain(format!(
                "t = {t} outside path horizon [0, {}]",
                path.horizon
            )));
        }
        let d = self.d();
        let alpha = self.spec.alpha;
        let jump_factor = 1.0 - self.phi(1.0 / d)?;
        let quad = Quadrature::new(1e-12);
        let mut total = 0.0;
        let mut start = 0.0;
        let mut loss = 0.0;
        let mut events = path.events.iter().take_while(|e| e.theta <= t).peekable();
        loop {
            let end = events.peek().map_or(t, |e| e.theta);
            if end > start {
                let l0 = loss;
                let z = |s: f64| (-l0 * (alpha * (s - start)).exp() / d).exp();
                for (lo, hi, rate) in self.spec.intensity.segments(start, end) {
                    if rate > 0.0 && jump_factor > 0.0 {
                        total += rate * jump_factor * quad.integrate(z, lo, hi)?.value;
                    }
                }
                // ∫ Z α L / D ds is the continuous decrease of Z.
                total += z(start) - z(end);
            }
            match events.next() {
                Some(e) => {
                    loss = loss * (alpha * (e.theta - start)).exp() + e.y;
                    start = e.theta;
                }
                None => break,
            }
        }
        Ok(total)
    }

    /// `Q_t(T)` under the CIR model at short rate `r_t`.
    pub fn discount_factor(&self, t: f64, r_t: f64) -> Result<f64> {
        bond_price(&self.rates, r_t, t, self.maturity())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t.is_finite() && t >= 0.0 && t <= self.maturity()) {
            return Err(Error::Domain(format!(
                "valuation time {t} outside [0, {}]",
                self.maturity()
            )));
        }
        Ok(())
    }

    /// `Ṽ_t(T) = P exp(∫_t^T λ^N(s)(φ(e^{α(T-s)}/D) - 1) ds - (e^{α(T-t)} - 1) L_t / D) Q_t(T)`.
    pub fn pre_trigger_price(&self, t: f64, loss: f64, r_t: f64) -> Result<f64> {
        self.check_time(t)?;
        require_non_negative("loss", loss)?;
        let q = self.discount_factor(t, r_t)?;
        let exponent = self.pre_trigger_exponent(t, loss)?;
        Ok(self.contract.principal * exponent.exp() * q)
    }

    fn pre_trigger_exponent(&self, t: f64, loss: f64) -> Result<f64> {
        let tm = self.maturity();
        let growth = (self.spec.alpha * (tm - t)).exp_m1();
        Ok(self.log_survival_between(t, tm, tm)? - growth * loss / self.d())
    }

    /// `V_t(T) = 1_{t < τ} Ṽ_t(T)`.
    pub fn price(&self, t: f64, loss: f64, r_t: f64, survived: bool) -> Result<f64> {
        let v = self.pre_trigger_price(t, loss, r_t)?;
        Ok(if survived { v } else { 0.0 })
    }

    /// `V_0(T)` with `L_0 = 0` and `r_0` from the rate parameters.
    pub fn price_at_origin(&self) -> Result<f64> {
        self.pre_trigger_price(0.0, 0.0, self.rates.r0)
    }

    /// `Ṽ_θ / Ṽ_{θ-} - 1 = exp(-y (e^{α(T-θ)} - 1) / D) - 1`.
    pub fn relative_jump(&self, theta: f64, y: f64) -> Result<f64> {
        self.check_time(theta)?;
        require_non_negative("y", y)?;
        let growth = (self.spec.alpha * (self.maturity() - theta)).exp_m1();
        Ok((-y * growth / self.d()).exp_m1())
    }

    /// `ΔṼ_θ` given the price `v_before` just before the event.
    pub fn jump_size(&self, theta: f64, y: f64, v_before: f64) -> Result<f64> {
        Ok(v_before * self.relative_jump(theta, y)?)
    }

    /// Prices along `path` at the grid times, with the short rate `rates[k]`
    /// at `grid[k]`, and every event up to maturity as an exact jump
    /// (rates interpolated linearly at event times).
    pub fn price_path(
        &self,
        path: &LossPath,
        grid: &[f64],
        rates: &[f64],
        trigger: TriggerTime,
    ) -> Result<PricePath> {
        let tm = self.maturity();
        if path.horizon < tm {
            return Err(invalid(
                "path",
                format!("horizon {} shorter than maturity {tm}", path.horizon),
            ));
        }
        if grid.len() != rates.len() || grid.is_empty() {
            return Err(invalid("rates", "need one short rate per grid time"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid", "must be strictly increasing"));
        }
        let alpha = self.spec.alpha;
        let mut points = Vec::with_capacity(grid.len());
        for (&t, &r) in grid.iter().zip(rates) {
            let loss = path.loss_at(alpha, t);
            let pre = self.pre_trigger_price(t, loss, r)?;
            points.push(PricePoint {
                t,
                loss,
                price: if trigger.survives(t) { pre } else { 0.0 },
                pre_trigger_price: pre,
                discount: self.discount_factor(t, r)?,
            });
        }
        let rate_at = |t: f64| {
            let k = grid.partition_point(|&g| g <= t);
            if k == 0 {
                rates[0]
            } else if k == grid.len() {
                rates[k - 1]
            } else {
                let w = (t - grid[k - 1]) / (grid[k] - grid[k - 1]);
                (1.0 - w) * rates[k - 1] + w * rates[k]
            }
        };
        let mut jumps = Vec::new();
        for e in path.events.iter().take_while(|e| e.theta <= tm) {
            let r = rate_at(e.theta);
            let loss_before = path.evaluate_before(&self.spec, e.theta)?;
            let loss_after = path.loss_at(alpha, e.theta);
            let price_before = self.pre_trigger_price(e.theta, loss_before, r)?;
            let price_after = self.pre_trigger_price(e.theta, loss_after, r)?;
            jumps.push(PriceJump {
                theta: e.theta,
                y: e.y,
                loss_before,
                loss_after,
                price_before,
                price_after,
                jump: self.jump_size(e.theta, e.y, price_before)?,
                relative_jump: self.relative_jump(e.theta, e.y)?,
            });
        }
        Ok(PricePath {
            points,
            jumps,
            trigger,
        })
    }
}

/// The unit-exponential level `Θ` of the Cox construction.
pub fn sample_trigger_level<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

fn first_error(
    integral: Result<crate::quadrature::Integral>,
    failure: &Cell<Option<Error>>,
) -> Result<f64> {
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(integral?.value)
}

/// `0, step, 2 step, ...` up to and including `horizon`.
pub fn uniform_time_grid(horizon: f64, step: f64) -> Result<Vec<f64>> {
    crate::error::require_positive("horizon", horizon)?;
    crate::error::require_positive("step", step)?;
    let n = (horizon / step - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    grid.push(horizon);
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePoint {
    pub t: f64,
    pub loss: f64,
    pub price: f64,
    pub pre_trigger_price: f64,
    pub discount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceJump {
    pub theta: f64,
    pub y: f64,
    pub loss_before: f64,
    pub loss_after: f64,
    pub price_before: f64,
    pub price_after: f64,
    /// `ΔṼ_θ` from the jump formula.
    pub jump: f64,
    pub relative_jump: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    pub points: Vec<PricePoint>,
    pub jumps: Vec<PriceJump>,
    pub trigger: TriggerTime,
}

impl PricePath {
    /// Header `t,loss,price,pre_trigger_price,discount`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,loss,price,pre_trigger_price,discount\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_sig(p.t),
                fmt_sig(p.loss),
                fmt_sig(p.price),
                fmt_sig(p.pre_trigger_price),
                fmt_sig(p.discount)
            );
        }
        out
    }

    /// Header `theta,y,price_before,price_after,jump,relative_jump`.
    pub fn jumps_csv(&self) -> String {
        let mut out = String::from("theta,y,price_before,price_after,jump,relative_jump\n");
        for j in &self.jumps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_sig(j.theta),
                fmt_sig(j.y),
                fmt_sig(j.price_before),
                fmt_sig(j.price_after),
                fmt_sig(j.jump),
                fmt_sig(j.relative_jump)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_process::{simulate_path, LossEvent};
    use crate::rng::{substream, Purpose};
    use proptest::prelude::*;

    fn state_with(spec: ShotNoiseSpec) -> Model2State {
        Model2State::new(spec, CatBondContract::reference(), CirParams::reference()).unwrap()
    }

    fn exponential_spec(lambda: f64, alpha: f64, beta: f64) -> ShotNoiseSpec {
        ShotNoiseSpec::homogeneous(lambda, alpha, SeverityModel::exponential(beta).unwrap())
            .unwrap()
    }

    #[test]
    fn rejects_out_of_scope_states() {
        let mut c = CatBondContract::reference();
        c.recovery = 0.3;
        let r = Model2State::new(ShotNoiseSpec::reference(), c, CirParams::reference());
        assert!(matches!(r, Err(Error::Unsupported(_))));
        let heavy = ShotNoiseSpec::homogeneous(0.5, 0.8, SeverityModel::pareto(1.5, 100.0).unwrap())
            .unwrap();
        assert!(Model2State::new(heavy, CatBondContract::reference(), CirParams::reference())
            .is_err());
    }

    #[test]
    fn survival_trivial_cases() {
        let s = Model2State::reference();
        assert_eq!(s.survival_c(0.0).unwrap(), 1.0);
        assert!(s.survival_c(-1.0).is_err());
        let quiet = state_with(ShotNoiseSpec::reference().with_intensity_rate(0.0));
        for u in [0.5, 1.0, 3.0] {
            assert_eq!(quiet.survival_c(u).unwrap(), 1.0);
        }
    }

    #[test]
    fn survival_matches_exponential_closed_form() {
        // ∫₀^u (β / (β + e^{αv}/D) - 1) dv = -(1/α) ln((β + e^{αu}/D) / (β + 1/D))
        let (lambda, alpha, beta) = (0.7, 0.6, 0.002);
        let s = state_with(exponential_spec(lambda, alpha, beta));
        let d = s.contract.threshold;
        for u in [0.5, 1.0, 2.0, 3.0] {
            let exact = ((beta + 1.0 / d) / (beta + (alpha * u).exp() / d)).powf(lambda / alpha);
            let c = s.survival_c(u).unwrap();
            assert!((c - exact).abs() < 1e-10, "u={u}: {c} vs {exact}");
        }
    }

    #[test]
    fn survival_at_alpha_zero_is_poisson_thinning() {
        let s = state_with(ShotNoiseSpec::reference().with_alpha(0.0));
        let phi = s.spec.severity.laplace(1e-4).unwrap();
        let c = s.survival_c(2.0).unwrap();
        assert!((c - (-0.5 * 2.0 * (1.0 - phi)).exp()).abs() < 1e-15);
    }

    #[test]
    fn piecewise_intensity_uses_double_quadrature() {
        let base = ShotNoiseSpec::reference();
        let flat = ShotNoiseSpec::new(
            Intensity::piecewise(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap(),
            base.alpha,
            base.severity,
        )
        .unwrap();
        let a = state_with(flat).survival_c(2.5).unwrap();
        let b = state_with(base)
            .with_laplace(LaplaceMethod::Quadrature)
            .survival_c(2.5)
            .unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn lambert_and_quadrature_prices_agree() {
        let closed = Model2State::reference();
        let quad = closed.clone().with_laplace(LaplaceMethod::Quadrature);
        let a = closed.price_at_origin().unwrap();
        let b = quad.price_at_origin().unwrap();
        assert!((a - b).abs() < 2e-4, "{a} vs {b}");
    }

    #[test]
    fn price_boundary_values() {
        let s = Model2State::reference();
        let tm = s.contract.maturity;
        assert_eq!(s.pre_trigger_price(tm, 5000.0, 0.03).unwrap(), 1.0);
        assert!(s.pre_trigger_price(tm + 0.1, 0.0, 0.03).is_err());
        assert_eq!(s.price(1.0, 100.0, 0.02, false).unwrap(), 0.0);

        let q = s.discount_factor(0.5, 0.02).unwrap();
        let riskless = s.with_threshold(1e300).unwrap();
        let v = riskless.pre_trigger_price(0.5, 3000.0, 0.02).unwrap();
        assert!((v - q).abs() < 1e-12, "{v} vs {q}");

        let quiet = state_with(ShotNoiseSpec::reference().with_intensity_rate(0.0));
        assert_eq!(quiet.pre_trigger_price(0.5, 0.0, 0.02).unwrap(), q);

        // t = 0 with L_0 = 0: survival-adjusted discount bond
        let v0 = s.price_at_origin().unwrap();
        let expect = s.survival_c(tm).unwrap() * s.discount_factor(0.0, s.rates.r0).unwrap();
        assert!((v0 - expect).abs() < 1e-12);
    }

    #[test]
    fn reported_jump_ratios() {
        let s = Model2State::reference();
        let r1 = s.relative_jump(1.104, 601.8668).unwrap();
        let r2 = s.relative_jump(1.971, 582.0399).unwrap();
        assert!((r1 + 0.19309152).abs() < 0.005, "{r1}");
        assert!((r2 + 0.07092837).abs() < 0.005, "{r2}");
        assert_eq!(s.with_alpha_zero().relative_jump(1.104, 601.8668).unwrap(), 0.0);
    }

    #[test]
    fn monotone_in_threshold_and_maturity() {
        let s = Model2State::reference();
        let mut prev = 0.0;
        for d in [5000.0, 9000.0, 15000.0, 20000.0] {
            let v = s.with_threshold(d).unwrap().price_at_origin().unwrap();
            assert!(v >= prev, "D={d}");
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for k in 1..=10 {
            let v = s.with_maturity(0.5 * k as f64).unwrap().price_at_origin().unwrap();
            assert!(v <= prev, "T={}", 0.5 * k as f64);
            prev = v;
        }
    }

    #[test]
    fn increases_between_events_with_frozen_rates() {
        let s = Model2State::reference();
        let loss = 1200.0;
        let mut prev = 0.0;
        for k in 0..=30 {
            let t = 1.0 + k as f64 * 0.05;
            let v = s.pre_trigger_price(t, loss * (0.8 * (t - 1.0)).exp(), 0.02).unwrap()
                / s.discount_factor(t, 0.02).unwrap();
            assert!(v > prev, "t={t}");
            prev = v;
        }
    }

    #[test]
    fn trigger_scan() {
        let s = Model2State::reference();
        let path = LossPath::new(
            3.0,
            vec![
                LossEvent { theta: 1.0, y: 600.0 },
                LossEvent { theta: 2.0, y: 600.0 },
            ],
        )
        .unwrap();
        assert_eq!(s.trigger_for_level(&path, 1e6), TriggerTime::BeyondHorizon);
        // Jump straight over the barrier at the first event.
        assert_eq!(s.trigger_for_level(&path, 0.01), TriggerTime::At(1.0));
        // Continuous growth from 600 at t=1 reaches 0.1 D = 1000 at 1 + ln(5/3)/0.8.
        let expected = 1.0 + (1000.0f64 / 600.0).ln() / 0.8;
        match s.trigger_for_level(&path, 0.1) {
            TriggerTime::At(t) => assert!((t - expected).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        // α = 0: only event times can trigger.
        let cp = s.with_alpha_zero();
        assert_eq!(cp.trigger_for_level(&path, 0.1), TriggerTime::At(2.0));
        assert_eq!(cp.trigger_for_level(&path, 0.12), TriggerTime::BeyondHorizon);
    }

    #[test]
    fn dual_projection_pieces() {
        let s = Model2State::reference();
        let d = s.contract.threshold;
        let empty = LossPath::empty(3.0);
        let a = s.dual_projection(&empty, 2.0).unwrap();
        let rate = s.jump_intensity(0.0).unwrap();
        assert!((a - 2.0 * rate).abs() < 1e-12);
        assert_eq!(s.dual_projection_increment(0.3, 0.0).unwrap(), rate);
        // Exponential severity gives the exact jump rate.
        let e = state_with(exponential_spec(0.5, 0.8, 0.002));
        let exact = 0.5 * (1.0 / d) / (0.002 + 1.0 / d);
        assert!((e.jump_intensity(1.0).unwrap() - exact).abs() < 1e-15);
        assert!(s.with_threshold(1e300).unwrap().jump_intensity(0.0).unwrap() < 1e-250);
        // Non-decreasing along a path.
        let mut rng = substream(5, Purpose::Loss, 0);
        let path = simulate_path(&s.spec, 3.0, &mut rng).unwrap();
        let mut prev = 0.0;
        for k in 0..=30 {
            let v = s.dual_projection(&path, 0.1 * k as f64).unwrap();
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn continuity_at_alpha_zero() {
        let s = Model2State::reference().with_alpha_zero();
        let mut rng = substream(9, Purpose::Loss, 0);
        let path = simulate_path(&s.spec, 3.0, &mut rng).unwrap();
        let grid = uniform_time_grid(3.0, 0.1).unwrap();
        let rates = vec![0.02; grid.len()];
        let pp = s.price_path(&path, &grid, &rates, TriggerTime::BeyondHorizon).unwrap();
        for j in &pp.jumps {
            assert_eq!(j.price_after - j.price_before, 0.0);
            assert_eq!(j.jump, 0.0);
        }
    }

    #[test]
    fn price_path_csv_layout() {
        let s = Model2State::reference();
        let path = LossPath::new(3.0, vec![LossEvent { theta: 1.104, y: 601.8668 }]).unwrap();
        let grid = uniform_time_grid(3.0, 0.5).unwrap();
        assert_eq!(grid, vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        let rates = vec![0.0204; grid.len()];
        let pp = s.price_path(&path, &grid, &rates, TriggerTime::At(2.2)).unwrap();
        let csv = pp.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,loss,price,pre_trigger_price,discount"));
        assert_eq!(lines.count(), grid.len());
        assert_eq!(pp.points[5].price, 0.0);
        assert!(pp.points[4].price > 0.0);
        assert_eq!(pp.jumps.len(), 1);
        assert!(pp.jumps_csv().starts_with("theta,y,price_before"));
        assert!(s.price_path(&path, &grid, &rates[1..], TriggerTime::BeyondHorizon).is_err());
    }

    impl Model2State {
        fn with_alpha_zero(&self) -> Self {
            Self {
                spec: self.spec.with_alpha(0.0),
                ..self.clone()
            }
        }
    }

    impl ShotNoiseSpec {
        fn with_intensity_rate(&self, rate: f64) -> Self {
            Self {
                intensity: Intensity::Constant(rate),
                ..self.clone()
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jumps_match_formula(seed in 0u64..10_000, alpha in 0.0f64..1.5, d in 2e3f64..5e4) {
            let s = Model2State::reference().with_threshold(d).unwrap();
            let s = Model2State { spec: s.spec.with_alpha(alpha), ..s };
            let mut rng = substream(seed, Purpose::Loss, 0);
            let path = simulate_path(&s.spec, 3.0, &mut rng).unwrap();
            for e in &path.events {
                let before = path.evaluate_before(&s.spec, e.theta).unwrap();
                let after = path.evaluate(&s.spec, e.theta).unwrap();
                let vb = s.pre_trigger_price(e.theta, before, 0.02).unwrap();
                let va = s.pre_trigger_price(e.theta, after, 0.02).unwrap();
                let jump = s.jump_size(e.theta, e.y, vb).unwrap();
                prop_assert!(jump <= 0.0);
                prop_assert!(((va - vb) - jump).abs() <= 1e-12 * vb);
            }
        }

        #[test]
        fn price_within_riskless_bound(t in 0.0f64..3.0, loss in 0.0f64..3e4, r in 0.0f64..0.1) {
            let s = Model2State::reference();
            let v = s.pre_trigger_price(t, loss, r).unwrap();
            let q = s.discount_factor(t, r).unwrap();
            prop_assert!(v >= 0.0 && v <= q * s.contract.principal);
        }
    }
}
