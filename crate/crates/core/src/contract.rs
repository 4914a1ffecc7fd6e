//! Zero-coupon CAT bond terms.

use crate::error::{invalid, require_positive, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatBondContract {
    pub principal: f64,
    /// Fraction `δ ∈ [0, 1)` of the principal paid if the trigger occurs.
    pub recovery: f64,
    /// Loss threshold `D`.
    pub threshold: f64,
    /// Maturity `T` in years.
    pub maturity: f64,
}

impl CatBondContract {
    pub fn new(principal: f64, recovery: f64, threshold: f64, maturity: f64) -> Result<Self> {
        let c = Self {
            principal,
            recovery,
            threshold,
            maturity,
        };
        c.validate()?;
        Ok(c)
    }

    /// Unit principal, no recovery, `D = 10⁴`, `T = 3`.
    pub fn reference() -> Self {
        Self {
            principal: 1.0,
            recovery: 0.0,
            threshold: 1e4,
            maturity: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("principal", self.principal)?;
        if !(0.0..1.0).contains(&self.recovery) {
            return Err(invalid(
                "recovery",
                format!("must lie in [0, 1), got {}", self.recovery),
            ));
        }
        require_positive("threshold", self.threshold)?;
        require_positive("maturity", self.maturity)?;
        Ok(())
    }

    pub fn with_threshold(self, threshold: f64) -> Result<Self> {
        Self::new(self.principal, self.recovery, threshold, self.maturity)
    }

    pub fn with_maturity(self, maturity: f64) -> Result<Self> {
        Self::new(self.principal, self.recovery, self.threshold, maturity)
    }
}
