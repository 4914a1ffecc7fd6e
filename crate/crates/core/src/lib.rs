//! Zero-coupon catastrophe bond pricing.

pub mod contract;
pub mod error;
pub mod loss_law;
pub mod loss_process;
pub mod mc_oracle;
pub mod model1;
pub mod model2;
pub mod panjer;
pub mod par;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod severity;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
