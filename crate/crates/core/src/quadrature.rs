//! Adaptive Gauss–Kronrod (10/21 point) quadrature with interval bisection.
//!
//! The error estimate for each panel is the QUADPACK rescaling of the
//! Gauss/Kronrod difference. Panels are bisected in order of their error
//! estimate until the global estimate meets the tolerance, or until the
//! remaining error is at the floating-point floor of the integrand.

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_478_871,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
    /// Number of panels in the final partition.
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut kronrod = WGK[10] * f_center;
    let mut gauss = 0.0;
    let mut abs_k = kronrod.abs();
    let mut fv = [0.0f64; 20];

    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }

    let value = kronrod * half;
    let abs_value = abs_k * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_value > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_value);
    }
    Panel {
        a,
        b,
        value,
        error,
        abs_value,
    }
}

/// Adaptive integrator settings. The target is
/// `max(abs_tol, rel_tol * |I|)` on the total error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::new(1e-10)
    }
}

impl Quadrature {
    pub fn new(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: 0.0,
            max_intervals: 4000,
        }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }

    /// Integrates `f` over the finite interval `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Integral> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!(
                "finite bounds required, got [{a}, {b}]"
            )));
        }
        if a == b {
            return Ok(Integral {
                value: 0.0,
                error: 0.0,
                intervals: 0,
            });
        }
        let mut panels = vec![gk21(&f, a, b)];
        loop {
            let value: f64 = panels.iter().map(|p| p.value).sum();
            let error: f64 = panels.iter().map(|p| p.error).sum();
            let abs_value: f64 = panels.iter().map(|p| p.abs_value).sum();
            // Error cannot be pushed below the rounding floor of the panel sums.
            let floor = 100.0 * f64::EPSILON * abs_value;
            let target = self.abs_tol.max(self.rel_tol * value.abs()).max(floor);
            if !value.is_finite() {
                return Err(Error::Quadrature {
                    estimate: value,
                    error,
                    intervals: panels.len(),
                });
            }
            if error <= target {
                return Ok(Integral {
                    value,
                    error,
                    intervals: panels.len(),
                });
            }
            let (worst, _) = panels
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, p)| {
                    if p.error > acc.1 {
                        (i, p.error)
                    } else {
                        acc
                    }
                });
            let p = panels[worst];
            let mid = 0.5 * (p.a + p.b);
            let exhausted = panels.len() >= self.max_intervals
                || mid <= p.a
                || mid >= p.b
                || (p.b - p.a).abs() <= 1e3 * f64::EPSILON * p.a.abs().max(p.b.abs());
            if exhausted {
                return Err(Error::Quadrature {
                    estimate: value,
                    error,
                    intervals: panels.len(),
                });
            }
            panels[worst] = gk21(&f, p.a, mid);
            panels.push(gk21(&f, mid, p.b));
        }
    }

    /// Integrates `f` over `[a, ∞)` through the map `x = a + s / (1 - s)`.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> Result<Integral> {
        let mapped = |s: f64| {
            let one_minus = 1.0 - s;
            let x = a + s / one_minus;
            let y = f(x);
            if y == 0.0 {
                0.0
            } else {
                y / (one_minus * one_minus)
            }
        };
        self.integrate(mapped, 0.0, 1.0)
    }
}

/// Shorthand for [`Quadrature::integrate`] with an absolute tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<Integral> {
    Quadrature::new(abs_tol).integrate(f, a, b)
}
