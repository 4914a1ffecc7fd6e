use crate::par::pairwise_sum;

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            samples: 0,
        }
    }

    /// Sample mean and `s / sqrt(n)`, both with pairwise summation.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                value: f64::NAN,
                std_error: f64::NAN,
                samples: 0,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        if n == 1 {
            return Self {
                value: mean,
                std_error: 0.0,
                samples: 1,
            };
        }
        let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / (n as f64 - 1.0);
        Self {
            value: mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        }
    }

    /// Binomial proportion with standard error `sqrt(p (1 - p) / n)`.
    pub fn proportion(successes: usize, n: usize) -> Self {
        let p = successes as f64 / n as f64;
        Self {
            value: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            samples: n,
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            std_error: self.std_error * factor.abs(),
            samples: self.samples,
        }
    }

    /// Whether `other` lies within `k` combined standard errors.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.combined_se(other)
    }

    pub fn agrees_with_value(&self, value: f64, k: f64) -> bool {
        (self.value - value).abs() <= k * self.std_error
    }

    pub fn combined_se(&self, other: &Estimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}
