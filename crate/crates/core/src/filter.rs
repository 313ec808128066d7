//! Finite-window integral filter with exponential forgetting and resetting.
//!
//! Between resets the filter accumulates
//!
//! ```text
//! Ω(t) = ∫_{t_r}^{t} e^{−σ(τ−t_r)} φ²(τ) dτ
//! 𝓨(t) = ∫_{t_r}^{t} e^{−σ(τ−t_r)} Y(τ) φ(τ) dτ
//! ```
//!
//! where `t_r` is the most recent reset. Resets happen at every window
//! boundary `kT < T⁺` and once more at `T⁺`; afterwards the filter keeps
//! integrating on `[T⁺, t)` with no further resets. In differential form the
//! forgetting weight is carried as a state `e` with `ė = −σe`, `e(t_r) = 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Resetting at every window boundary (`t < T⁺`).
    Windowed,
    /// After the final reset at `T⁺`.
    PostFinal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterState<T> {
    /// Forgetting weight `e = e^{−σ(t − t_last_reset)}`.
    pub e: T,
    /// Filtered regressor `Ω`.
    pub omega: T,
    /// Filtered output `𝓨`.
    pub yf: Vec<T>,
    pub t_last_reset: T,
    pub regime: Regime,
}

/// Time derivatives of a [`FilterState`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterDerivatives<T> {
    pub de: T,
    pub domega: T,
    pub dyf: Vec<T>,
}

/// `ė = −σe`, `Ω̇ = eφ²`, `𝓨̇ = eYφ`.
pub fn filter_derivatives<T: Scalar>(
    state: &FilterState<T>,
    sigma: T,
    phi: T,
    y_norm: &[T],
) -> FilterDerivatives<T> {
    let mut out = vec![T::zero(); 2 + y_norm.len()];
    filter_rhs(sigma, state.e, phi, y_norm, &mut out);
    FilterDerivatives {
        de: out[0],
        domega: out[1],
        dyf: out[2..].to_vec(),
    }
}

/// Packed right-hand side: `out = [ė, Ω̇, 𝓨̇₁, …, 𝓨̇ₙ]`.
#[inline]
pub(crate) fn filter_rhs<T: Scalar>(sigma: T, e: T, phi: T, y_norm: &[T], out: &mut [T]) {
    out[0] = -sigma * e;
    out[1] = e * phi * phi;
    for (d, y) in out[2..].iter_mut().zip(y_norm) {
        *d = e * *y * phi;
    }
}

/// The set of admissible reset times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResetPlan<T> {
    times: Vec<T>,
    t_plus: T,
    tolerance: T,
}

impl<T: Scalar> ResetPlan<T> {
    /// `times` must be strictly increasing and end at `t_plus`; membership
    /// is tested with a tolerance of a millionth of `dt`.
    pub fn new(times: Vec<T>, t_plus: T, dt: T) -> Self {
        Self {
            times,
            t_plus,
            tolerance: dt * T::lit(1e-6),
        }
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn t_plus(&self) -> T {
        self.t_plus
    }

    pub fn contains(&self, t: T) -> bool {
        self.times.iter().any(|&e| (e - t).abs() <= self.tolerance)
    }

    pub fn is_final(&self, t: T) -> bool {
        (t - self.t_plus).abs() <= self.tolerance
    }
}

impl<T: Scalar> FilterState<T> {
    /// Fresh state at `t = 0`: `e = 1`, `Ω = 0`, `𝓨 = 0`, windowed regime.
    pub fn new(dim: usize) -> Self {
        Self {
            e: T::one(),
            omega: T::zero(),
            yf: vec![T::zero(); dim],
            t_last_reset: T::zero(),
            regime: Regime::Windowed,
        }
    }

    /// Zeroes the integrals at reset event `t`.
    pub fn apply_reset(&mut self, t: T, plan: &ResetPlan<T>) -> Result<()> {
        if self.regime == Regime::PostFinal {
            return Err(Error::ResetAfterFinal { t: t.as_f64() });
        }
        if !plan.contains(t) {
            return Err(Error::NotAResetEvent { t: t.as_f64() });
        }
        self.e = T::one();
        self.omega = T::zero();
        self.yf.iter_mut().for_each(|v| *v = T::zero());
        self.t_last_reset = t;
        if plan.is_final(t) {
            self.regime = Regime::PostFinal;
        }
        Ok(())
    }

    /// Upper bound on `Ω` in the current regime: `T` while windowed,
    /// `1/σ` after the final reset.
    pub fn omega_upper_bound(&self, window: T, sigma: T) -> T {
        match self.regime {
            Regime::Windowed => window,
            Regime::PostFinal => sigma.recip(),
        }
    }

    pub(crate) fn load(&mut self, packed: &[T]) {
        self.e = packed[0];
        self.omega = packed[1];
        self.yf.copy_from_slice(&packed[2..]);
    }

    pub(crate) fn store(&self, packed: &mut [T]) {
        packed[0] = self.e;
        packed[1] = self.omega;
        packed[2..].copy_from_slice(&self.yf);
    }
}

/// Value-returning form of [`FilterState::apply_reset`].
pub fn apply_reset<T: Scalar>(
    mut state: FilterState<T>,
    t: T,
    plan: &ResetPlan<T>,
) -> Result<FilterState<T>> {
    state.apply_reset(t, plan)?;
    Ok(state)
}
