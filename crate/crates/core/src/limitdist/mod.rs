//! Limit-distribution engine: the exact univariate law of the inverse
//! Brownian energy ζ⁽¹⁾, Monte Carlo draws of its multivariate counterpart
//! ζ⁽ˢ⁾, critical-value tables for the sequential tests, and confidence
//! stripes for the log-eigenvalue display.

mod exact;
mod simulate;
mod table;

pub use exact::{zeta1_cdf, zeta1_mean, zeta1_pdf, zeta1_quantile};
pub use simulate::{simulate_zeta, NormKind, SimSettings, ZetaDraws};
pub use table::{confidence_stripe, ConfidenceStripe, CriticalValueTable, Provenance};
