//! Standard normal helpers.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn standard() -> Normal {
    Normal::standard()
}

/// `Φ⁻¹(p)`.
pub fn quantile(p: f64) -> f64 {
    standard().inverse_cdf(p)
}

/// `Φ(x)`.
pub fn cdf(x: f64) -> f64 {
    standard().cdf(x)
}

/// `φ(x)`.
pub fn pdf(x: f64) -> f64 {
    standard().pdf(x)
}
