//! True regression signals: first-order regressor, piecewise-constant
//! parameters, held Gaussian measurement noise and the LRE output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::sim::{integrate_fixed, TimeGrid};

/// A single parameter jump `θᵢ` applied at time `tᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Jump<T> {
    pub time: T,
    pub delta: Vec<T>,
}

impl<T: Scalar> Jump<T> {
    pub fn new(time: T, delta: Vec<T>) -> Self {
        Self { time, delta }
    }

    /// Euclidean norm of the jump vector.
    pub fn magnitude(&self) -> T {
        norm(&self.delta)
    }
}

/// Piecewise-constant unknown parameters `Θ(t) = Θ₀ + Σ_{tᵢ ≤ t} θᵢ`.
///
/// Evaluation is right-continuous: at `t = tᵢ` the post-jump value is
/// returned.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSchedule<T> {
    theta0: Vec<T>,
    jumps: Vec<Jump<T>>,
}

impl<T: Scalar> ParameterSchedule<T> {
    pub fn new(theta0: Vec<T>, jumps: Vec<Jump<T>>) -> Result<Self> {
        if theta0.is_empty() {
            return Err(Error::InvalidSchedule("theta0 must be non-empty".into()));
        }
        if theta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSchedule("theta0 must be finite".into()));
        }
        for (i, jump) in jumps.iter().enumerate() {
            if jump.delta.len() != theta0.len() {
                return Err(Error::InvalidSchedule(format!(
                    "jump {i} has dimension {}, expected {}",
                    jump.delta.len(),
                    theta0.len()
                )));
            }
            if !jump.time.is_finite() || jump.time < T::zero() {
                return Err(Error::InvalidSchedule(format!(
                    "jump {i} time must be finite and non-negative"
                )));
            }
            if jump.delta.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSchedule(format!("jump {i} delta must be finite")));
            }
            if i > 0 && jump.time <= jumps[i - 1].time {
                return Err(Error::InvalidSchedule(format!(
                    "jump times must be strictly increasing (jump {i})"
                )));
            }
        }
        Ok(Self { theta0, jumps })
    }

    /// A schedule without jumps.
    pub fn constant(theta0: Vec<T>) -> Result<Self> {
        Self::new(theta0, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.theta0.len()
    }

    pub fn theta0(&self) -> &[T] {
        &self.theta0
    }

    pub fn jumps(&self) -> &[Jump<T>] {
        &self.jumps
    }

    /// Largest jump magnitude, or `None` without jumps.
    pub fn max_jump_magnitude(&self) -> Option<T> {
        self.jumps
            .iter()
            .map(Jump::magnitude)
            .fold(None, |acc, m| Some(acc.map_or(m, |a: T| a.max(m))))
    }

    /// Writes `Θ(t)` into `out`.
    pub fn eval_into(&self, t: T, out: &mut [T]) {
        out.copy_from_slice(&self.theta0);
        for jump in self.jumps.iter().take_while(|j| j.time <= t) {
            for (o, d) in out.iter_mut().zip(&jump.delta) {
                *o = *o + *d;
            }
        }
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.eval_into(t, &mut out);
        out
    }
}

/// `Θ(t)` for the given schedule.
pub fn schedule_eval<T: Scalar>(schedule: &ParameterSchedule<T>, t: T) -> Vec<T> {
    schedule.eval(t)
}

/// Input `u(t)` driving the first-order regressor model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InputSignal<T> {
    /// `u(t) = amplitude · e^{−rate·t}`.
    ExpDecay { amplitude: T, rate: T },
    /// Samples at `t = k·spacing`, linearly interpolated and held past the end.
    Sampled { spacing: T, values: Vec<T> },
}

impl<T: Scalar> InputSignal<T> {
    pub fn exp_decay(amplitude: T, rate: T) -> Self {
        Self::ExpDecay { amplitude, rate }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ExpDecay { amplitude, rate } => {
                if !amplitude.is_finite() || !rate.is_finite() {
                    return Err(invalid("regressor", "amplitude and rate must be finite"));
                }
            }
            Self::Sampled { spacing, values } => {
                if !(spacing.is_finite() && *spacing > T::zero()) {
                    return Err(invalid("regressor", "sample spacing must be positive"));
                }
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("regressor", "samples must be non-empty and finite"));
                }
            }
        }
        Ok(())
    }

    pub fn at(&self, t: T) -> T {
        match self {
            Self::ExpDecay { amplitude, rate } => *amplitude * (-*rate * t).exp(),
            Self::Sampled { spacing, values } => {
                let pos = (t / *spacing).max(T::zero());
                let k = pos.floor().to_usize().unwrap_or(usize::MAX);
                if k + 1 >= values.len() {
                    return values[values.len() - 1];
                }
                let frac = pos - T::from_index(k);
                values[k] + (values[k + 1] - values[k]) * frac
            }
        }
    }
}

/// Right-hand side of the first-order regressor model `ω̇ = −ω + u(t)`.
#[inline]
pub fn regressor_rate<T: Scalar>(omega: T, input: T) -> T {
    input - omega
}

/// Integrates `ω̇ = −ω + u`, `ω(0) = 0` on `grid` and returns the samples.
pub fn regressor_first_order<T: Scalar>(input: &InputSignal<T>, grid: TimeGrid<T>) -> Vec<T> {
    integrate_fixed(
        |t, x, dx| dx[0] = regressor_rate(x[0], input.at(t)),
        &[T::zero()],
        grid,
    )
    .into_iter()
    .map(|x| x[0])
    .collect()
}

/// Held Gaussian noise description.
///
/// Each sample is an independent draw with variance `power / sample_time`
/// multiplied by `scale`, held over one `sample_time` interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSpec<T> {
    pub power: T,
    pub sample_time: T,
    pub seed: u64,
    pub scale: T,
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn new(power: T, sample_time: T, seed: u64) -> Self {
        Self {
            power,
            sample_time,
            seed,
            scale: T::one(),
        }
    }

    pub fn with_scale(mut self, scale: T) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power.is_finite() && self.power >= T::zero()) {
            return Err(invalid("noise.power", "must be finite and >= 0"));
        }
        if !(self.sample_time.is_finite() && self.sample_time > T::zero()) {
            return Err(invalid("noise.sample_time", "must be > 0"));
        }
        if !self.scale.is_finite() {
            return Err(invalid("noise.scale", "must be finite"));
        }
        Ok(())
    }

    /// Standard deviation of one held sample before scaling.
    pub fn std_dev(&self) -> T {
        (self.power / self.sample_time).sqrt()
    }

    /// The first `count` held values of the sequence.
    pub fn held_values(&self, count: usize) -> Vec<T> {
        if self.power == T::zero() {
            return vec![T::zero(); count];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let gain = self.std_dev() * self.scale;
        (0..count)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z) * gain
            })
            .collect()
    }

    /// Index of the held sample active at time `t`.
    pub fn sample_index(&self, t: T) -> usize {
        // Small forward nudge so grid points sitting on a sample boundary
        // pick the new sample despite rounding in `t`.
        let pos = t / self.sample_time + T::lit(1e-9);
        pos.floor().max(T::zero()).to_usize().unwrap_or(usize::MAX)
    }
}

/// Noise realised at each time of `t_grid` (held between sample boundaries).
pub fn band_limited_noise<T: Scalar>(spec: &NoiseSpec<T>, t_grid: &[T]) -> Vec<T> {
    let count = t_grid
        .last()
        .map(|&t| spec.sample_index(t) + 1)
        .unwrap_or(0);
    let held = spec.held_values(count);
    t_grid.iter().map(|&t| held[spec.sample_index(t)]).collect()
}

/// `y = ω·Θ + w` componentwise.
pub fn lre_output<T: Scalar>(omega: T, theta: &[T], w: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); theta.len()];
    lre_output_into(omega, theta, w, &mut y);
    y
}

pub(crate) fn lre_output_into<T: Scalar>(omega: T, theta: &[T], w: &[T], out: &mut [T]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = omega * theta[i] + w.get(i).copied().unwrap_or_else(T::zero);
    }
}

pub(crate) fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt()
}
