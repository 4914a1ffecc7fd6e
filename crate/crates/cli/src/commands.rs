//! The five commands. Each returns its files in memory; [`crate::run`]
//! writes them out.

use std::fmt::Write as _;

use catbond_core::loss_law::{LatticePsi, LossLaw, TabulatedPsi};
use catbond_core::loss_process::{fmt_sig, simulate_indexed_path, Intensity, LossPath};
use catbond_core::mc_oracle::{mc_price_m2, mc_survival};
use catbond_core::model1::{
    azema_z, mc_price_m1, mc_trigger_survival_m1, mean_azema_z, price_inaccessible,
    price_predictable, price_two_stopping_times, two_stopping_times_exact, Arrivals, Model1Spec,
};
use catbond_core::model2::{
    sample_trigger_level, uniform_time_grid, Model2State, PricePath, TriggerTime,
};
use catbond_core::par::{map_indexed, Execution};
use catbond_core::rates::{bond_price, mc_discount_curve, CirPathSampler};
use catbond_core::rng::{substream, Purpose};
use catbond_core::severity::SeverityModel;
use catbond_core::stats::Estimate;

use crate::config::{ModelKind, ScenarioConfig};
use crate::svg::{line_chart, Series};
use crate::CliError;

/// `(θ, y, published relative price drop)` for two loss events under
/// [`Model2State::reference`].
pub const REPORTED_JUMPS: [(f64, f64, f64); 2] =
    [(1.104, 601.8668, 0.19309152), (1.971, 582.0399, 0.07092837)];
const CHECK_PATHS: u64 = 1000;
const PSI_NODES: usize = 301;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    /// `(relative path, contents)`
    pub files: Vec<(String, String)>,
    pub summary: String,
    /// Asserted properties that did not hold.
    pub failures: Vec<String>,
}

impl Output {
    fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn nest(&mut self, dir: &str, other: Output) {
        for (name, contents) in other.files {
            self.files.push((format!("{dir}/{name}"), contents));
        }
        self.failures
            .extend(other.failures.into_iter().map(|f| format!("{dir}: {f}")));
        let _ = writeln!(self.summary, "[{dir}]");
        self.summary.push_str(&other.summary);
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }
}

/// One seeded draw: loss path, trigger level and short-rate path on the
/// price grid.
struct Scenario {
    path: LossPath,
    level: f64,
    grid: Vec<f64>,
    rates: Vec<f64>,
}

impl Scenario {
    fn draw(state: &Model2State, cfg: &ScenarioConfig) -> Result<Self, CliError> {
        let tm = state.contract.maturity;
        let path = simulate_indexed_path(&state.spec, tm, cfg.seed, 0)?;
        let level = sample_trigger_level(&mut substream(cfg.seed, Purpose::Trigger, 0));
        let grid = uniform_time_grid(tm, cfg.grid_step)?;
        let sampler = CirPathSampler::new(state.rates, grid.clone())?;
        let rates = sampler.sample(&mut substream(cfg.seed, Purpose::Rate, 0));
        Ok(Self {
            path,
            level,
            grid,
            rates,
        })
    }

    fn price(&self, state: &Model2State) -> Result<PricePath, CliError> {
        let trigger = state.trigger_for_level(&self.path, self.level);
        Ok(state.price_path(&self.path, &self.grid, &self.rates, trigger)?)
    }
}

/// Rows `t,loss,price,jump_flag` with the pre-trigger price; the flag marks
/// grid intervals `(t_{k-1}, t_k]` containing a price jump.
fn flagged_csv(pp: &PricePath) -> String {
    let mut out = String::from("t,loss,price,jump_flag\n");
    let jump_times: Vec<f64> = pp
        .jumps
        .iter()
        .filter(|j| j.relative_jump != 0.0)
        .map(|j| j.theta)
        .collect();
    let mut prev = f64::NEG_INFINITY;
    for p in &pp.points {
        let flag = jump_times.iter().any(|&th| th > prev && th <= p.t);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_sig(p.t),
            fmt_sig(p.loss),
            fmt_sig(p.pre_trigger_price),
            flag as u8
        );
        prev = p.t;
    }
    out
}

fn price_jumps_only(pp: &PricePath) -> PricePath {
    PricePath {
        points: Vec::new(),
        jumps: pp
            .jumps
            .iter()
            .copied()
            .filter(|j| j.relative_jump != 0.0)
            .collect(),
        trigger: pp.trigger,
    }
}

fn jump_failures(pp: &PricePath, out: &mut Vec<String>) {
    for j in &pp.jumps {
        let observed = j.price_after - j.price_before;
        if (observed - j.jump).abs() > 1e-12 * j.price_before {
            out.push(format!(
                "price jump at {} is {observed}, formula gives {}",
                j.theta, j.jump
            ));
        }
    }
}

fn price_series(label: &str, pp: &PricePath, pre_trigger: bool) -> Series {
    Series {
        label: label.into(),
        points: pp
            .points
            .iter()
            .map(|p| (p.t, if pre_trigger { p.pre_trigger_price } else { p.price }))
            .collect(),
    }
}

fn describe_trigger(t: TriggerTime) -> String {
    match t {
        TriggerTime::At(tau) => format!("trigger at t = {}", fmt_sig(tau)),
        TriggerTime::BeyondHorizon => "no trigger before maturity".into(),
    }
}

pub fn price_path(cfg: &ScenarioConfig) -> Result<Output, CliError> {
    let state = cfg.model2()?;
    let scenario = Scenario::draw(&state, cfg)?;
    let pp = scenario.price(&state)?;
    let mut out = Output::default();
    jump_failures(&pp, &mut out.failures);
    let jumps = price_jumps_only(&pp);
    out.file("price_path.csv", flagged_csv(&pp));
    out.file("price_path_full.csv", pp.to_csv());
    out.file("jumps.csv", jumps.jumps_csv());
    out.file("loss_events.csv", scenario.path.to_csv());
    out.file(
        "price_path.svg",
        line_chart(
            "CAT bond price along one loss path",
            "t (years)",
            "price",
            &[
                price_series("pre-trigger price", &pp, true),
                price_series("price", &pp, false),
            ],
        ),
    );
    out.file(
        "loss_path.svg",
        line_chart(
            "Aggregate loss",
            "t (years)",
            "loss",
            &[Series {
                label: "L_t".into(),
                points: pp.points.iter().map(|p| (p.t, p.loss)).collect(),
            }],
        ),
    );
    let s = &mut out.summary;
    let _ = writeln!(s, "V_0 = {}", fmt_sig(pp.points[0].pre_trigger_price));
    let _ = writeln!(
        s,
        "{} loss events before maturity, {} price jumps; {}",
        pp.jumps.len(),
        jumps.jumps.len(),
        describe_trigger(pp.trigger)
    );
    for j in &jumps.jumps {
        let _ = writeln!(
            s,
            "  event at t = {}, shot {}: price moves by {}%",
            fmt_sig(j.theta),
            fmt_sig(j.y),
            fmt_sig(100.0 * j.relative_jump)
        );
    }
    Ok(out)
}

pub fn threshold_sweep(cfg: &ScenarioConfig) -> Result<Output, CliError> {
    let state = cfg.model2()?;
    let scenario = Scenario::draw(&state, cfg)?;
    let mut curves = Vec::with_capacity(cfg.sweep_thresholds.len());
    for &d in &cfg.sweep_thresholds {
        let s = state.with_threshold(d).map_err(|e| CliError::Config(e.to_string()))?;
        curves.push((d, scenario.price(&s)?));
    }
    let mut out = Output::default();
    let mut csv = String::from("threshold,t,loss,pre_trigger_price,price\n");
    for (d, pp) in &curves {
        for p in &pp.points {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                fmt_sig(*d),
                fmt_sig(p.t),
                fmt_sig(p.loss),
                fmt_sig(p.pre_trigger_price),
                fmt_sig(p.price)
            );
        }
    }
    out.file("threshold_sweep.csv", csv);
    let mut order: Vec<usize> = (0..curves.len()).collect();
    order.sort_by(|&a, &b| curves[a].0.total_cmp(&curves[b].0));
    for w in order.windows(2) {
        let (lo, hi) = (&curves[w[0]], &curves[w[1]]);
        for (a, b) in lo.1.points.iter().zip(&hi.1.points) {
            if b.pre_trigger_price < a.pre_trigger_price || b.price < a.price {
                out.failures.push(format!(
                    "price at t = {} decreases from D = {} to D = {}",
                    a.t, lo.0, hi.0
                ));
                break;
            }
        }
    }
    let series: Vec<Series> = curves
        .iter()
        .map(|(d, pp)| price_series(&format!("D = {}", fmt_sig(*d)), pp, true))
        .collect();
    out.file(
        "threshold_sweep.svg",
        line_chart("Pre-trigger price by threshold", "t (years)", "price", &series),
    );
    for (d, pp) in &curves {
        let _ = writeln!(
            out.summary,
            "D = {}: V_0 = {}, {}",
            fmt_sig(*d),
            fmt_sig(pp.points[0].pre_trigger_price),
            describe_trigger(pp.trigger)
        );
    }
    Ok(out)
}

/// Closed-form `V_0(T; D)` on the surface grid, row-major in maturity.
fn surface_values(cfg: &ScenarioConfig) -> Result<Vec<f64>, CliError> {
    let state = cfg.model2()?;
    let nd = cfg.surface_thresholds.len();
    let cells = cfg.surface_maturities.len() * nd;
    let values: Vec<Result<f64, CliError>> = map_indexed(cells, Execution::Parallel, |k| {
        let contract = state
            .contract
            .with_maturity(cfg.surface_maturities[k / nd])
            .and_then(|c| c.with_threshold(cfg.surface_thresholds[k % nd]))
            .map_err(|e| CliError::Config(e.to_string()))?;
        let s = state
            .with_contract(contract)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(s.price_at_origin()?)
    });
    values.into_iter().collect()
}

/// Adjacent pairs violating "non-increasing in T, non-decreasing in D".
fn surface_violations(cfg: &ScenarioConfig, values: &[f64]) -> Vec<String> {
    let nd = cfg.surface_thresholds.len();
    let sorted = |xs: &[f64]| {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        idx
    };
    let ti = sorted(&cfg.surface_maturities);
    let di = sorted(&cfg.surface_thresholds);
    let mut bad = Vec::new();
    for &t in &ti {
        for w in di.windows(2) {
            if values[t * nd + w[1]] < values[t * nd + w[0]] {
                bad.push(format!(
                    "T = {}: price decreases from D = {} to D = {}",
                    cfg.surface_maturities[t], cfg.surface_thresholds[w[0]], cfg.surface_thresholds[w[1]]
                ));
            }
        }
    }
    for &d in &di {
        for w in ti.windows(2) {
            if values[w[1] * nd + d] > values[w[0] * nd + d] {
                bad.push(format!(
                    "D = {}: price increases from T = {} to T = {}",
                    cfg.surface_thresholds[d], cfg.surface_maturities[w[0]], cfg.surface_maturities[w[1]]
                ));
            }
        }
    }
    bad
}

pub fn surface(cfg: &ScenarioConfig) -> Result<Output, CliError> {
    let values = surface_values(cfg)?;
    let nd = cfg.surface_thresholds.len();
    let mut csv = String::from("maturity,threshold,price\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{}",
            fmt_sig(cfg.surface_maturities[k / nd]),
            fmt_sig(cfg.surface_thresholds[k % nd]),
            fmt_sig(*v)
        );
    }
    let mut out = Output::default();
    out.file("surface.csv", csv);
    out.failures = surface_violations(cfg, &values);
    let _ = writeln!(
        out.summary,
        "{} x {} surface, prices in [{}, {}]",
        cfg.surface_maturities.len(),
        nd,
        fmt_sig(values.iter().copied().fold(f64::INFINITY, f64::min)),
        fmt_sig(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    );
    Ok(out)
}

pub fn scenarios(cfg: &ScenarioConfig, n: usize) -> Result<Output, CliError> {
    if n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    let runs: Vec<Result<Output, CliError>> = map_indexed(n, Execution::Parallel, |k| {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(k as u64);
        let mut out = price_path(&c)?;
        let sweep = threshold_sweep(&c)?;
        out.files.extend(sweep.files);
        out.failures.extend(sweep.failures);
        out.summary.push_str(&sweep.summary);

        // Same path and level, losses no longer growing between events.
        let state = c.model2()?;
        let cpp = Model2State::new(state.spec.with_alpha(0.0), state.contract, state.rates)?;
        let scenario = Scenario::draw(&state, &c)?;
        let shot = scenario.price(&state)?;
        let flat = scenario.price(&cpp)?;
        out.file("cpp_price_path.csv", flagged_csv(&flat));
        out.file(
            "shot_noise_vs_cpp.svg",
            line_chart(
                "Shot noise vs compound Poisson",
                "t (years)",
                "pre-trigger price",
                &[
                    price_series("shot noise", &shot, true),
                    price_series("compound Poisson", &flat, true),
                ],
            ),
        );
        Ok(out)
    });
    let mut out = Output::default();
    for (k, r) in runs.into_iter().enumerate() {
        out.nest(&format!("scenario_{k}"), r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value_a: f64,
    pub value_b: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, a: f64, b: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value_a: a,
            value_b: b,
            tolerance,
            pass: (a - b).abs() <= tolerance,
        }
    }
}

pub fn report_csv(checks: &[Check]) -> String {
    let mut out = String::from("check,value_a,value_b,tolerance,pass\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.name, c.value_a, c.value_b, c.tolerance, c.pass
        );
    }
    out
}

/// Log-spaced points on `[lo, hi]`.
fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn laplace_checks(cfg: &ScenarioConfig) -> Result<Vec<Check>, CliError> {
    let grid = log_grid(1e-6, 1e-2, 41);
    let (mu, sigma) = (cfg.severity_mu, cfg.severity_sigma);
    let lognormal = SeverityModel::log_normal(mu, sigma)?;
    let mut worst = 0.0f64;
    for &u in &grid {
        let approx = lognormal.laplace(u)?;
        let oracle = lognormal.laplace_oracle(u)?.value;
        worst = worst.max(((approx - oracle) / oracle).abs());
    }
    let exponential = SeverityModel::exponential(cfg.severity_rate)?;
    let mut exp_worst = 0.0f64;
    for &u in &grid {
        let closed = exponential.laplace(u)?;
        exp_worst = exp_worst.max((closed - exponential.laplace_oracle(u)?.value).abs());
    }
    let pareto = SeverityModel::pareto(cfg.severity_shape, cfg.severity_scale)?;
    let mut halving = 0.0f64;
    for &u in &grid {
        let coarse = pareto.laplace_with_tol(u, 1e-10)?;
        let fine = pareto.laplace_with_tol(u, 5e-11)?;
        halving = halving.max((coarse - fine).abs());
    }
    Ok(vec![
        Check::new(
            "laplace_lognormal_max_rel_error",
            worst,
            0.0,
            cfg.validate_laplace_tolerance,
        ),
        Check::new("laplace_exponential_max_abs_error", exp_worst, 0.0, 1e-12),
        Check::new("laplace_pareto_tolerance_halving", halving, 0.0, 1e-8),
    ])
}

fn model2_checks(cfg: &ScenarioConfig, execution: Execution) -> Result<Vec<Check>, CliError> {
    let k = cfg.validate_sigmas;
    let state = cfg.model2()?;
    let mc = cfg.mc(execution)?;
    let tm = state.contract.maturity;
    let mut checks = Vec::new();

    let closed = state.price_at_origin()?;
    let sim = mc_price_m2(&state, &mc)?;
    checks.push(Check::new("price_vs_mc", closed, sim.value, k * sim.std_error));

    let reference = Model2State::reference();
    for (i, (theta, y, reported)) in REPORTED_JUMPS.iter().enumerate() {
        let ratio = -reference.relative_jump(*theta, *y)?;
        checks.push(Check::new(
            format!("jump_ratio_{}", i + 1),
            ratio,
            *reported,
            cfg.validate_jump_tolerance,
        ));
    }

    let grid = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let exp_state = Model2State::new(
        catbond_core::loss_process::ShotNoiseSpec::new(
            state.spec.intensity.clone(),
            state.spec.alpha,
            SeverityModel::exponential(1.0 / state.spec.severity.mean().unwrap_or(600.0))?,
        )?,
        state.contract,
        state.rates,
    )?;
    for (label, s) in [("survival", &state), ("survival_exponential", &exp_state)] {
        let est = mc_survival(s, &grid, &mc)?;
        for (u, e) in grid.iter().zip(est) {
            checks.push(Check::new(
                format!("{label}_u{u}"),
                s.survival_c(*u)?,
                e.value,
                k * e.std_error,
            ));
        }
    }

    let maturities = [1.0, 2.0, 3.0];
    let discounts = mc_discount_curve(
        &state.rates,
        &maturities,
        mc.n_paths,
        mc.steps_per_year,
        mc.seed,
        mc.antithetic,
        execution,
    )?;
    for (t, e) in maturities.iter().zip(discounts) {
        checks.push(Check::new(
            format!("cir_bond_T{t}"),
            bond_price(&state.rates, state.rates.r0, 0.0, *t)?,
            e.value,
            k * e.std_error,
        ));
    }

    let cpp = Model2State::new(state.spec.with_alpha(0.0), state.contract, state.rates)?;
    let ends = [0.0, tm];
    let flat_rates = [state.rates.r0; 2];
    let worst_jumps: Vec<Result<(f64, f64), CliError>> =
        map_indexed(CHECK_PATHS as usize, execution, |i| {
            let path = simulate_indexed_path(&state.spec, tm, mc.seed, i as u64)?;
            let flat = cpp.price_path(&path, &ends, &flat_rates, TriggerTime::BeyondHorizon)?;
            let shot = state.price_path(&path, &ends, &flat_rates, TriggerTime::BeyondHorizon)?;
            let continuity = flat
                .jumps
                .iter()
                .map(|j| (j.price_after - j.price_before).abs())
                .fold(0.0, f64::max);
            let consistency = shot
                .jumps
                .iter()
                .map(|j| ((j.price_after - j.price_before) - j.jump).abs() / j.price_before)
                .fold(0.0, f64::max);
            Ok((continuity, consistency))
        });
    let (mut continuity, mut consistency) = (0.0f64, 0.0f64);
    for w in worst_jumps {
        let (a, b) = w?;
        continuity = continuity.max(a);
        consistency = consistency.max(b);
    }
    checks.push(Check::new("continuity_alpha0_max_jump", continuity, 0.0, 1e-12));
    checks.push(Check::new("jump_formula_max_rel_error", consistency, 0.0, 1e-12));

    let values = surface_values(cfg)?;
    let violations = surface_violations(cfg, &values).len() as f64;
    checks.push(Check::new("surface_monotone_violations", violations, 0.0, 0.0));

    checks.extend(laplace_checks(cfg)?);
    Ok(checks)
}

fn psi_law(spec: &Model1Spec, cfg: &ScenarioConfig, execution: Execution) -> Result<Box<dyn LossLaw>, CliError> {
    let d = spec.contract.threshold;
    let tm = spec.contract.maturity;
    Ok(match (&spec.loss.intensity, spec.loss.alpha) {
        (Intensity::Constant(rate), 0.0) => Box::new(LatticePsi::new(
            *rate,
            &spec.loss.severity,
            d,
            cfg.psi_grid_step,
            tm,
        )?),
        _ => Box::new(TabulatedPsi::monte_carlo(
            &spec.loss,
            d,
            tm,
            PSI_NODES,
            cfg.mc_paths,
            cfg.seed,
            execution,
        )?),
    })
}

fn agreement(name: &str, a: &Estimate, b: &Estimate, k: f64) -> Check {
    Check::new(name, a.value, b.value, k * a.combined_se(b))
}

fn model1_checks(cfg: &ScenarioConfig, execution: Execution) -> Result<Vec<Check>, CliError> {
    let k = cfg.validate_sigmas;
    let spec = cfg.model1()?;
    let law = psi_law(&spec, cfg, execution)?;
    let law = law.as_ref();
    let n = cfg.mc_paths;
    let seed = cfg.seed;
    let tm = spec.contract.maturity;
    let mut checks = Vec::new();
    let payoff = mc_price_m1(&spec, n, seed, execution)?;
    match &spec.arrivals {
        Arrivals::Poisson { .. } => {
            let general = price_inaccessible(&spec, law, n, seed, execution, None)?;
            checks.push(agreement("inaccessible_vs_mc", &general.total, &payoff, k));
            let lo = spec.contract.recovery * spec.contract.principal * (-spec.rate * tm).exp();
            let hi = spec.contract.principal * (-spec.rate * tm).exp();
            let v = general.total.value;
            checks.push(Check::new(
                "inaccessible_within_bounds",
                v,
                v.clamp(lo, hi),
                k * general.total.std_error,
            ));
            let first_only = price_inaccessible(&spec, law, n, seed, execution, Some(1))?;
            let two_time = price_two_stopping_times(&spec, law, n, seed, execution)?;
            checks.push(agreement("two_time_collapse", &first_only.total, &two_time.total, 1.0));
            let exact = two_stopping_times_exact(&spec, law)?;
            checks.push(Check::new(
                "two_time_vs_quadrature",
                exact,
                first_only.total.value,
                k * first_only.total.std_error,
            ));
        }
        Arrivals::Deterministic { times } => {
            if spec.rate == 0.0 {
                let closed = price_predictable(&spec, law)?;
                checks.push(agreement("predictable_vs_mc", &closed, &payoff, k));
            }
            let z = azema_z(times, law, tm)?;
            let last = times.iter().copied().rfind(|&t| t <= tm);
            checks.push(Check::new(
                "telescoping",
                z,
                last.map_or(1.0, |t| law.psi(t)),
                1e-15,
            ));
        }
    }
    for u in [0.5 * tm, tm] {
        let direct = mc_trigger_survival_m1(&spec, u, n, seed, execution)?;
        let via_z = mean_azema_z(&spec, law, u, n, seed, execution)?;
        checks.push(agreement(&format!("immersion_u{u}"), &direct, &via_z, k));
    }
    Ok(checks)
}

pub fn validate(cfg: &ScenarioConfig, execution: Execution) -> Result<Output, CliError> {
    let checks = match cfg.model {
        ModelKind::Model2 => model2_checks(cfg, execution)?,
        ModelKind::Model1 => model1_checks(cfg, execution)?,
    };
    let mut out = Output::default();
    out.file("validate.csv", report_csv(&checks));
    for c in &checks {
        let _ = writeln!(
            out.summary,
            "{} {}: {} vs {} (tolerance {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value_a,
            c.value_b,
            c.tolerance
        );
        if !c.pass {
            out.failures.push(format!("check {} failed", c.name));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            mc_paths: 2000,
            mc_steps_per_year: 64,
            grid_step: 0.05,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn price_path_files_and_flags() {
        let out = price_path(&small()).unwrap();
        assert!(out.failures.is_empty());
        let csv = out.get("price_path.csv").unwrap();
        assert!(csv.starts_with("t,loss,price,jump_flag\n"));
        let flags = csv.lines().skip(1).filter(|l| l.ends_with(",1")).count();
        let jumps = out.get("jumps.csv").unwrap().lines().count() - 1;
        assert!(flags <= jumps);
        assert!(out.get("price_path.svg").unwrap().contains("<svg"));
    }

    #[test]
    fn compound_poisson_path_has_no_price_jumps() {
        let cfg = ScenarioConfig {
            alpha: 0.0,
            lambda: 3.0,
            ..small()
        };
        let out = price_path(&cfg).unwrap();
        assert_eq!(out.get("jumps.csv").unwrap().lines().count(), 1);
        let events = out.get("loss_events.csv").unwrap().lines().count() - 1;
        assert!(events > 0);
    }

    #[test]
    fn quiet_path_is_smooth() {
        let cfg = ScenarioConfig {
            lambda: 0.0,
            ..small()
        };
        let out = price_path(&cfg).unwrap();
        assert!(out.get("price_path.csv").unwrap().lines().skip(1).all(|l| l.ends_with(",0")));
    }

    #[test]
    fn sweep_orders_curves_and_detects_low_threshold_trigger() {
        let cfg = ScenarioConfig {
            sweep_thresholds: vec![20000.0, 5000.0, 9000.0, 15000.0, 5000.0, 1.0],
            lambda: 2.0,
            ..small()
        };
        let out = threshold_sweep(&cfg).unwrap();
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        // D = 1 is below any shot: triggered at the first event.
        let csv = out.get("threshold_sweep.csv").unwrap();
        let tiny: Vec<&str> = csv.lines().filter(|l| l.starts_with("1,")).collect();
        assert_eq!(tiny.last().unwrap().rsplit(',').next(), Some("0"));
    }

    #[test]
    fn surface_is_monotone() {
        let out = surface(&small()).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.get("surface.csv").unwrap().lines().count(), 101);
    }

    #[test]
    fn single_scenario_matches_price_path() {
        let cfg = small();
        let one = scenarios(&cfg, 1).unwrap();
        let direct = price_path(&cfg).unwrap();
        assert_eq!(
            one.get("scenario_0/price_path.csv"),
            direct.get("price_path.csv")
        );
        let two = scenarios(&cfg, 2).unwrap();
        assert_ne!(
            two.get("scenario_0/loss_events.csv"),
            two.get("scenario_1/loss_events.csv")
        );
    }

    #[test]
    fn zero_sigmas_fail_statistical_checks() {
        let cfg = ScenarioConfig {
            validate_sigmas: 0.0,
            ..small()
        };
        let out = validate(&cfg, Execution::Parallel).unwrap();
        assert!(!out.failures.is_empty());
        assert!(out.failures.iter().any(|f| f.contains("price_vs_mc")));
    }
}
