//! Free-particle spreading from a localization: a packet confined to `x` has
//! momentum spread `ħ/x`, velocity spread `ħ/(x m)`, and after time `t` a
//! spatial spread `t (ħ/x)/m`. SI units throughout.

use thiserror::Error;

/// Reduced Planck constant, J·s (CODATA 2018, exact in the revised SI).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Unified atomic mass unit, kg (CODATA 2018).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{name} must be positive and finite, got {value}")]
pub struct SpreadError {
    pub name: &'static str,
    pub value: f64,
}

/// `t (ħ/x) / m` in meters, for `t` in seconds, `x` in meters, `m` in kg.
pub fn spread_estimate(t: f64, x: f64, m: f64) -> Result<f64, SpreadError> {
    for (name, value) in [("t", t), ("x", x), ("m", m)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(SpreadError { name, value });
        }
    }
    Ok(t * (HBAR / x) / m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_mass_halves_spread() {
        let a = spread_estimate(1e-3, 2e-9, 1e-26).unwrap();
        let b = spread_estimate(1e-3, 2e-9, 2e-26).unwrap();
        assert_eq!(a, 2.0 * b);
    }

    #[test]
    fn non_positive_inputs_rejected() {
        assert_eq!(
            spread_estimate(0.0, 1e-9, 1e-26),
            Err(SpreadError {
                name: "t",
                value: 0.0
            })
        );
        assert!(spread_estimate(1.0, -1e-9, 1e-26).is_err());
        assert!(spread_estimate(1.0, 1e-9, f64::NAN).is_err());
    }
}
