//! Gradient estimation law `Θ̂̇ = −γΩ(ΩΘ̂ − 𝓨)`.
//!
//! With `Ω` and `𝓨` frozen over a step of length `h` the law is a linear ODE
//! with the exact solution
//!
//! ```text
//! Θ̂(t+h) = Θ̂(t)·m + (𝓨/Ω)·(1 − m),   m = e^{−γΩ²h}
//! ```
//!
//! which is unconditionally stable for the large adaptation rates the method
//! relies on (`γΩ²` reaches ~10⁵ s⁻¹).

use serde::Serialize;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorState<T> {
    pub theta_hat: Vec<T>,
}

impl<T: Scalar> EstimatorState<T> {
    pub fn new(theta_hat: Vec<T>) -> Self {
        Self { theta_hat }
    }

    /// Advances the estimate by `h` with `Ω`, `𝓨` held constant.
    pub fn step(&mut self, omega: T, yf: &[T], gamma: T, h: T) {
        if omega <= T::zero() {
            return;
        }
        // 1 − m via expm1 keeps precision when γΩ²h is tiny.
        let gain = -(-gamma * omega * omega * h).exp_m1();
        for (th, y) in self.theta_hat.iter_mut().zip(yf) {
            let target = *y / omega;
            *th = *th + (target - *th) * gain;
        }
    }
}

/// Value-returning form of [`EstimatorState::step`].
pub fn estimator_step<T: Scalar>(
    mut state: EstimatorState<T>,
    omega: T,
    yf: &[T],
    gamma: T,
    h: T,
) -> EstimatorState<T> {
    state.step(omega, yf, gamma, h);
    state
}

/// Continuous-time right-hand side of the law, for explicit integrators.
pub fn estimator_rhs<T: Scalar>(theta_hat: &[T], omega: T, yf: &[T], gamma: T, out: &mut [T]) {
    for ((d, th), y) in out.iter_mut().zip(theta_hat).zip(yf) {
        *d = -gamma * omega * (omega * *th - *y);
    }
}
