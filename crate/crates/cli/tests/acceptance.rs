//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the report reads top to bottom; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use catbond_cli::commands::{self, REPORTED_JUMPS};
use catbond_cli::{with_threads, ScenarioConfig};
use catbond_core::contract::CatBondContract;
use catbond_core::loss_law::{LatticePsi, LossLaw};
use catbond_core::loss_process::{simulate_indexed_path, ShotNoiseSpec};
use catbond_core::mc_oracle::{mc_price_m2, mc_survival, McConfig};
use catbond_core::model1::{
    azema_z, mc_price_m1, price_inaccessible, price_predictable, price_two_stopping_times,
    two_stopping_times_exact, Arrivals, Model1Spec,
};
use catbond_core::model2::{Model2State, TriggerTime};
use catbond_core::par::{map_indexed, Execution};
use catbond_core::rates::{bond_price, mc_discount_curve};
use catbond_core::severity::SeverityModel;

const PATHS: usize = 100_000;
const SIGMAS: f64 = 3.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mc_config() -> McConfig {
    McConfig {
        n_paths: PATHS,
        steps_per_year: 256,
        seed: 1,
        antithetic: false,
        execution: Execution::Parallel,
    }
}

fn closed_form_vs_mc() -> Outcome {
    let state = Model2State::reference();
    let start = Instant::now();
    let closed = state.price_at_origin().map_err(|e| e.to_string())?;
    let mc = mc_price_m2(&state, &mc_config()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let diff = (closed - mc.value).abs();
    verdict(
        diff <= SIGMAS * mc.std_error && secs <= 120.0,
        format!(
            "V_0 = {closed:.6}, MC = {:.6} +- {:.6}, |diff| = {:.2} SE, {secs:.1} s",
            mc.value,
            mc.std_error,
            diff / mc.std_error
        ),
    )
}

fn jump_ratios() -> Outcome {
    let state = Model2State::reference();
    let mut ok = true;
    let mut parts = Vec::new();
    for (theta, y, reported) in REPORTED_JUMPS {
        let r = -state.relative_jump(theta, y).map_err(|e| e.to_string())?;
        ok &= (r - reported).abs() <= 0.005;
        parts.push(format!("{:.4}% vs {:.6}%", 100.0 * r, 100.0 * reported));
    }
    verdict(ok, parts.join(", "))
}

fn survival_law() -> Outcome {
    let lognormal = Model2State::reference();
    let mean = lognormal.spec.severity.mean().ok_or("no mean")?;
    let exp_spec = ShotNoiseSpec::new(
        lognormal.spec.intensity.clone(),
        lognormal.spec.alpha,
        SeverityModel::exponential(1.0 / mean).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let exponential = Model2State::new(exp_spec, lognormal.contract, lognormal.rates)
        .map_err(|e| e.to_string())?;
    let grid = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let mut worst = 0.0f64;
    for state in [&exponential, &lognormal] {
        let est = mc_survival(state, &grid, &mc_config()).map_err(|e| e.to_string())?;
        for (u, e) in grid.iter().zip(est) {
            let c = state.survival_c(*u).map_err(|e| e.to_string())?;
            worst = worst.max((c - e.value).abs() / e.std_error);
        }
    }
    verdict(
        worst <= SIGMAS,
        format!("12 points, worst |c(u) - MC| = {worst:.2} SE"),
    )
}

fn cir_closed_form() -> Outcome {
    let p = Model2State::reference().rates;
    let maturities = [1.0, 2.0, 3.0];
    let est = mc_discount_curve(&p, &maturities, PATHS, 256, 1, false, Execution::Parallel)
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (t, e) in maturities.iter().zip(est) {
        let closed = bond_price(&p, p.r0, 0.0, *t).map_err(|e| e.to_string())?;
        worst = worst.max((closed - e.value).abs() / e.std_error);
    }
    verdict(
        worst <= SIGMAS,
        format!("T = 1, 2, 3, worst |P(0,T) - MC| = {worst:.2} SE"),
    )
}

fn continuity_at_zero_alpha() -> Outcome {
    let reference = Model2State::reference();
    let state = Model2State::new(
        reference.spec.with_alpha(0.0),
        reference.contract,
        reference.rates,
    )
    .map_err(|e| e.to_string())?;
    let tm = state.contract.maturity;
    let r0 = state.rates.r0;
    let jumps: Vec<Result<(usize, f64), String>> = map_indexed(1000, Execution::Parallel, |i| {
        let path = simulate_indexed_path(&state.spec, tm, 7, i as u64).map_err(|e| e.to_string())?;
        let pp = state
            .price_path(&path, &[0.0, tm], &[r0, r0], TriggerTime::BeyondHorizon)
            .map_err(|e| e.to_string())?;
        let max = pp
            .jumps
            .iter()
            .map(|j| (j.price_after - j.price_before).abs())
            .fold(0.0, f64::max);
        Ok((pp.jumps.len(), max))
    });
    let (mut events, mut worst) = (0, 0.0f64);
    for j in jumps {
        let (n, m) = j?;
        events += n;
        worst = worst.max(m);
    }
    verdict(
        worst <= 1e-12 && events > 0,
        format!("1000 paths, {events} loss events, max |price jump| = {worst:e}"),
    )
}

fn monotone_surface() -> Outcome {
    let cfg = ScenarioConfig::default();
    let out = commands::surface(&cfg).map_err(|e| e.to_string())?;
    let cells = out.get("surface.csv").map_or(0, |c| c.lines().count() - 1);
    verdict(
        out.failures.is_empty() && cells == 100,
        format!("{cells} cells, {} violations", out.failures.len()),
    )
}

const D1: f64 = 2.0;

fn m1_spec(arrivals: Arrivals, recovery: f64, rate: f64) -> Result<Model1Spec, String> {
    let sev = SeverityModel::exponential(1.0).map_err(|e| e.to_string())?;
    let loss = ShotNoiseSpec::homogeneous(1.0, 0.0, sev).map_err(|e| e.to_string())?;
    let contract = CatBondContract::new(1.0, recovery, D1, 3.0).map_err(|e| e.to_string())?;
    Model1Spec::new(arrivals, loss, contract, rate).map_err(|e| e.to_string())
}

fn m1_law() -> Result<LatticePsi, String> {
    let sev = SeverityModel::exponential(1.0).map_err(|e| e.to_string())?;
    LatticePsi::new(1.0, &sev, D1, 0.005, 3.0).map_err(|e| e.to_string())
}

fn model1_agreement() -> Outcome {
    let law = m1_law()?;
    let poisson = m1_spec(Arrivals::Poisson { rate: 1.0 }, 0.4, 0.03)?;
    let general = price_inaccessible(&poisson, &law, PATHS, 1, Execution::Parallel, None)
        .map_err(|e| e.to_string())?
        .total;
    let payoff = mc_price_m1(&poisson, PATHS, 1, Execution::Parallel).map_err(|e| e.to_string())?;
    let z1 = (general.value - payoff.value).abs() / general.combined_se(&payoff);

    let times = vec![1.0, 2.0, 3.0];
    let fixed = m1_spec(Arrivals::Deterministic { times: times.clone() }, 0.25, 0.0)?;
    let closed = price_predictable(&fixed, &law).map_err(|e| e.to_string())?;
    let payoff2 = mc_price_m1(&fixed, PATHS, 1, Execution::Parallel).map_err(|e| e.to_string())?;
    let z2 = (closed.value - payoff2.value).abs() / closed.combined_se(&payoff2);

    let mut telescoping = 0.0f64;
    for t in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        let z = azema_z(&times, &law, t).map_err(|e| e.to_string())?;
        let last = times.iter().copied().rfind(|&s| s <= t);
        telescoping = telescoping.max((z - last.map_or(1.0, |s| law.psi(s))).abs());
    }
    verdict(
        z1 <= SIGMAS && z2 <= SIGMAS && telescoping <= 1e-15,
        format!(
            "inaccessible {z1:.2} SE, predictable {z2:.2} SE, telescoping error {telescoping:e}"
        ),
    )
}

fn two_time_collapse() -> Outcome {
    let law = m1_law()?;
    let spec = m1_spec(Arrivals::Poisson { rate: 1.0 }, 0.4, 0.03)?;
    let general = price_inaccessible(&spec, &law, PATHS, 1, Execution::Parallel, Some(1))
        .map_err(|e| e.to_string())?
        .total;
    let special = price_two_stopping_times(&spec, &law, PATHS, 1, Execution::Parallel)
        .map_err(|e| e.to_string())?
        .total;
    let exact = two_stopping_times_exact(&spec, &law).map_err(|e| e.to_string())?;
    let gap = (general.value - special.value).abs();
    let combined = general.combined_se(&special);
    let z = (exact - special.value).abs() / special.std_error;
    verdict(
        gap <= combined && z <= SIGMAS,
        format!(
            "general {:.6} vs two-time {:.6} (gap {gap:e}, combined SE {combined:.2e}); quadrature {exact:.6} at {z:.2} SE",
            general.value, special.value
        ),
    )
}

fn laplace_accuracy() -> Outcome {
    let grid: Vec<f64> = (0..=40).map(|k| 10f64.powf(-6.0 + k as f64 / 10.0)).collect();
    let ln = SeverityModel::log_normal(6.387, 0.153).map_err(|e| e.to_string())?;
    let ex = SeverityModel::exponential(1.0 / 600.0).map_err(|e| e.to_string())?;
    let pa = SeverityModel::pareto(3.0, 1200.0).map_err(|e| e.to_string())?;
    let (mut rel, mut abs, mut halving) = (0.0f64, 0.0f64, 0.0f64);
    for &u in &grid {
        let oracle = ln.laplace_oracle(u).map_err(|e| e.to_string())?.value;
        rel = rel.max((ln.laplace(u).map_err(|e| e.to_string())? / oracle - 1.0).abs());
        let quad = ex.laplace_oracle(u).map_err(|e| e.to_string())?.value;
        abs = abs.max((ex.laplace(u).map_err(|e| e.to_string())? - quad).abs());
        let coarse = pa.laplace_with_tol(u, 1e-10).map_err(|e| e.to_string())?;
        let fine = pa.laplace_with_tol(u, 5e-11).map_err(|e| e.to_string())?;
        halving = halving.max((coarse - fine).abs());
    }
    verdict(
        rel <= 0.01 && abs <= 1e-12 && halving <= 1e-8,
        format!("log-normal rel {rel:.2e}, exponential abs {abs:.2e}, Pareto halving {halving:.2e}"),
    )
}

fn determinism() -> Outcome {
    let cfg = ScenarioConfig::default();
    let report = |threads, execution| -> Result<String, String> {
        let out = with_threads(Some(threads), || commands::validate(&cfg, execution))
            .map_err(|e| e.to_string())?
            .map_err(|e| e.to_string())?;
        Ok(out.get("validate.csv").unwrap_or_default().to_owned())
    };
    let a = report(1, Execution::Parallel)?;
    let b = report(1, Execution::Parallel)?;
    let c = report(4, Execution::Parallel)?;
    let d = report(4, Execution::Sequential)?;
    let rows = a.lines().count().saturating_sub(1);
    verdict(
        rows > 0 && a == b && a == c && a == d,
        format!(
            "{rows} checks; repeat run {}, 1 vs 4 threads {}, sequential {}",
            same(&a, &b),
            same(&a, &c),
            same(&a, &d)
        ),
    )
}

fn same(a: &str, b: &str) -> &'static str {
    if a == b {
        "identical"
    } else {
        "DIFFERENT"
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("closed-form price vs Monte Carlo", closed_form_vs_mc),
        ("reported jump ratios", jump_ratios),
        ("trigger survival law", survival_law),
        ("CIR bond price vs Monte Carlo", cir_closed_form),
        ("continuity at alpha = 0", continuity_at_zero_alpha),
        ("monotone price surface", monotone_surface),
        ("model 1 estimator agreement", model1_agreement),
        ("two-stopping-time collapse", two_time_collapse),
        ("Laplace transform accuracy", laplace_accuracy),
        ("deterministic validate report", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (status, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {status} {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
