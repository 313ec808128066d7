//! Excitation normalization of a scalar regressor.
//!
//! The regressor is written as `ω = sgn(ω)·10^η`. The normalizing gain
//! `f(ω) = sgn(ω)·10^{−sat(η)}` saturates the decimal exponent from below at
//! `η_min`, so the normalized regressor `φ = ω·f(ω)` equals one whenever
//! `|ω| > 10^{η_min}` and `10^{η−η_min}` otherwise. Regressors of different
//! amplitudes therefore produce the same `φ` once they are above the floor.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Decimal exponent `η = log₁₀|ω|`, with a distinguished value for `ω = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DecimalExponent<T> {
    NegInfinity,
    Finite(T),
}

impl<T: Scalar> DecimalExponent<T> {
    /// Floating view; `NegInfinity` maps to `-inf`.
    pub fn value(self) -> T {
        match self {
            Self::NegInfinity => T::neg_infinity(),
            Self::Finite(eta) => eta,
        }
    }

    /// Strictly above the floor `eta_min`.
    pub fn exceeds(self, eta_min: T) -> bool {
        matches!(self, Self::Finite(eta) if eta > eta_min)
    }
}

/// Sign and decimal exponent of a regressor value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition<T> {
    /// `+1` for `ω ≥ 0`, `−1` otherwise.
    pub sign: T,
    pub eta: DecimalExponent<T>,
}

pub fn decompose<T: Scalar>(omega: T) -> Result<Decomposition<T>> {
    if !omega.is_finite() {
        return Err(Error::NonFiniteRegressor {
            value: omega.as_f64(),
        });
    }
    let sign = if omega >= T::zero() { T::one() } else { -T::one() };
    let eta = if omega == T::zero() {
        DecimalExponent::NegInfinity
    } else {
        DecimalExponent::Finite(omega.abs().log10())
    };
    Ok(Decomposition { sign, eta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizationConfig<T> {
    pub eta_min: T,
}

/// Result of normalizing one regressor value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalized<T> {
    pub eta: DecimalExponent<T>,
    /// Normalizing gain `f(ω)`.
    pub gain: T,
    /// Normalized regressor `φ ∈ [0, 1]`.
    pub phi: T,
}

impl<T: Scalar> NormalizationConfig<T> {
    pub fn new(eta_min: T) -> Result<Self> {
        if !eta_min.is_finite() {
            return Err(invalid("eta_min", "must be finite"));
        }
        Ok(Self { eta_min })
    }

    /// `sat(η)`: the exponent clamped from below at `η_min`.
    pub fn saturate(&self, eta: DecimalExponent<T>) -> T {
        match eta {
            DecimalExponent::Finite(e) if e > self.eta_min => e,
            _ => self.eta_min,
        }
    }

    /// The regressor magnitude at which `φ` saturates, `10^{η_min}`.
    pub fn floor_magnitude(&self) -> T {
        T::lit(10.0).powf(self.eta_min)
    }

    pub fn normalize(&self, omega: T) -> Result<Normalized<T>> {
        let Decomposition { sign, eta } = decompose(omega)?;
        let (gain, phi) = if eta.exceeds(self.eta_min) {
            // 10^{−η} = 1/|ω| on this branch; the reciprocal is exact to one
            // rounding, unlike powf(10, −log10|ω|).
            (sign / omega.abs(), T::one())
        } else {
            let scale = T::lit(10.0).powf(-self.eta_min);
            (sign * scale, (omega.abs() * scale).min(T::one()))
        };
        Ok(Normalized { eta, gain, phi })
    }

    /// Normalized regression `(Y, φ)` with `Y = y·f(ω)` and `φ = ω·f(ω)`.
    pub fn normalized_regression(&self, y: &[T], omega: T) -> Result<(Vec<T>, T)> {
        let n = self.normalize(omega)?;
        Ok((y.iter().map(|&v| v * n.gain).collect(), n.phi))
    }
}

/// Free-function form of [`NormalizationConfig::normalized_regression`].
pub fn normalized_regression<T: Scalar>(
    y: &[T],
    omega: T,
    cfg: &NormalizationConfig<T>,
) -> Result<(Vec<T>, T)> {
    cfg.normalized_regression(y, omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> NormalizationConfig<f64> {
        NormalizationConfig::new(-1.0).unwrap()
    }

    #[test]
    fn decompose_examples() {
        let d = decompose(100.0).unwrap();
        assert_eq!(d.sign, 1.0);
        assert_eq!(d.eta, DecimalExponent::Finite(2.0));

        let d = decompose(-0.01).unwrap();
        assert_eq!(d.sign, -1.0);
        assert_eq!(d.eta, DecimalExponent::Finite(-2.0));

        let d = decompose(0.0).unwrap();
        assert_eq!(d.sign, 1.0);
        assert_eq!(d.eta, DecimalExponent::NegInfinity);
    }

    #[test]
    fn decompose_rejects_non_finite() {
        assert!(decompose(f64::NAN).is_err());
        assert!(decompose(f64::INFINITY).is_err());
    }

    #[test]
    fn saturated_branch() {
        let (_, phi) = cfg().normalized_regression(&[1.0], 5.0).unwrap();
        assert_eq!(phi, 1.0);
    }

    #[test]
    fn below_floor_branch() {
        let (_, phi) = cfg().normalized_regression(&[1.0], 0.01).unwrap();
        assert!((phi - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_regressor() {
        let (y, phi) = cfg().normalized_regression(&[0.0], 0.0).unwrap();
        assert_eq!(phi, 0.0);
        assert_eq!(y, vec![0.0]);
        assert_eq!(cfg().saturate(DecimalExponent::NegInfinity), -1.0);
    }

    #[test]
    fn negative_regressor_identity() {
        let n = cfg().normalize(-0.5).unwrap();
        assert!((n.gain + 2.0).abs() < 1e-12);
        let (y, phi) = cfg().normalized_regression(&[-1.0], -0.5).unwrap();
        assert_eq!(phi, 1.0);
        assert!((y[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let c = NormalizationConfig::new(-1.0_f32).unwrap();
        assert_eq!(c.normalize(3.0_f32).unwrap().phi, 1.0);
        assert!((c.normalize(0.05_f32).unwrap().phi - 0.5).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn phi_in_unit_interval(w in -1e6f64..1e6, eta_min in -6.0f64..3.0) {
            let c = NormalizationConfig::new(eta_min).unwrap();
            let phi = c.normalize(w).unwrap().phi;
            prop_assert!((0.0..=1.0).contains(&phi));
        }

        #[test]
        fn phi_saturates_under_scaling(w in 0.1f64..1e5, sign in prop::bool::ANY) {
            let w = if sign { w } else { -w };
            let c = cfg();
            prop_assert_eq!(c.normalize(w).unwrap().phi, 1.0);
            prop_assert_eq!(c.normalize(10.0 * w).unwrap().phi, 1.0);
        }

        #[test]
        fn exact_regression_identity(w in -1e3f64..1e3, theta in -10.0f64..10.0) {
            let c = cfg();
            let y = w * theta;
            let (big_y, phi) = c.normalized_regression(&[y], w).unwrap();
            let expected = phi * theta;
            prop_assert!((big_y[0] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }

        #[test]
        fn phi_monotone_in_magnitude(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let c = cfg();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c.normalize(lo).unwrap().phi <= c.normalize(-hi).unwrap().phi);
        }
    }
}
