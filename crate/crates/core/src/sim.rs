//! Fixed-step simulation of the coupled regressor / filter / estimator system.
//!
//! Smooth states (`ω`, `e`, `Ω`, `𝓨`) advance with classical RK4; the
//! estimate advances with the exact exponential step of
//! [`EstimatorState::step`](crate::estimator::EstimatorState::step) using the
//! filter outputs at the left end of each step. Parameter jumps, filter resets
//! and noise sample boundaries all sit on grid points, so no channel is ever
//! interpolated across a discontinuity.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::estimator::EstimatorState;
use crate::filter::{filter_rhs, FilterState, ResetPlan};
use crate::normalize::NormalizationConfig;
use crate::scalar::{grid_index, nearest_index, Scalar};
use crate::signals::{lre_output_into, norm, regressor_rate, InputSignal, NoiseSpec, ParameterSchedule};

/// Uniform grid `t_n = n·dt`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid<T> {
    pub dt: T,
    pub steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(dt: T, steps: usize) -> Self {
        Self { dt, steps }
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, n: usize) -> T {
        T::from_index(n) * self.dt
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }
}

/// Scratch buffers for one classical RK4 step.
struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Rk4<T> {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![T::zero(); n],
            k2: vec![T::zero(); n],
            k3: vec![T::zero(); n],
            k4: vec![T::zero(); n],
            tmp: vec![T::zero(); n],
        }
    }

    fn step<F>(&mut self, f: &mut F, t: T, x: &mut [T], h: T)
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        let half = h * T::lit(0.5);
        f(t, x, &mut self.k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + half * self.k1[i];
        }
        f(t + half, &self.tmp, &mut self.k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + half * self.k2[i];
        }
        f(t + half, &self.tmp, &mut self.k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        for i in 0..x.len() {
            x[i] = x[i] + sixth * (self.k1[i] + two * self.k2[i] + two * self.k3[i] + self.k4[i]);
        }
    }
}

/// Integrates `ẋ = f(t, x)` with fixed-step RK4 and returns the state at
/// every grid point (including `x0` at `t = 0`).
pub fn integrate_fixed<T, F>(mut f: F, x0: &[T], grid: TimeGrid<T>) -> Vec<Vec<T>>
where
    T: Scalar,
    F: FnMut(T, &[T], &mut [T]),
{
    let mut rk = Rk4::new(x0.len());
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(grid.len());
    out.push(x.clone());
    for n in 0..grid.steps {
        rk.step(&mut f, grid.time(n), &mut x, grid.dt);
        out.push(x.clone());
    }
    out
}

/// Regressor and output measurement noise; `None` means noise-free.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MeasurementNoise<T> {
    /// Added to the regressor before normalization.
    pub regressor: Option<NoiseSpec<T>>,
    /// Added to the output `y`; component `i` uses seed `seed + i`.
    pub output: Option<NoiseSpec<T>>,
}

impl<T: Scalar> MeasurementNoise<T> {
    pub fn none() -> Self {
        Self {
            regressor: None,
            output: None,
        }
    }

    pub fn is_noise_free(&self) -> bool {
        let silent = |s: &Option<NoiseSpec<T>>| {
            s.as_ref()
                .is_none_or(|n| n.power == T::zero() || n.scale == T::zero())
        };
        silent(&self.regressor) && silent(&self.output)
    }
}

/// All tunables of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig<T> {
    /// Time step (s).
    pub dt: T,
    /// Horizon (s).
    pub t_end: T,
    /// Declared end of the excitation interval (s).
    pub t_e: T,
    /// Filter window width `T` (s).
    pub window: T,
    /// Time `T⁺` at which window resetting stops (s).
    pub t_plus: T,
    /// Forgetting rate `σ` (1/s).
    pub sigma: T,
    /// Adaptation rate `γ`.
    pub gamma: T,
    /// Normalization floor `η_min`.
    pub eta_min: T,
    pub theta_hat0: Vec<T>,
    pub regressor: InputSignal<T>,
    pub noise: MeasurementNoise<T>,
}

/// Default forgetting rate `σ = 5/(2T)` for window width `T`.
pub fn default_sigma<T: Scalar>(window: T) -> T {
    T::lit(5.0) / (T::lit(2.0) * window)
}

impl<T: Scalar> SimConfig<T> {
    /// Configuration with the reference tunables (`η_min = −1`, `T = 0.5`,
    /// `T⁺ = 3`, `σ = 5/(2T)`, `γ = 10⁶`, `dt = 10⁻⁴`, `Θ̂(0) = 0`) over a
    /// 10 s horizon, with the excitation interval spanning the horizon.
    pub fn new(regressor: InputSignal<T>) -> Self {
        let window = T::lit(0.5);
        Self {
            dt: T::lit(1e-4),
            t_end: T::lit(10.0),
            t_e: T::lit(10.0),
            window,
            t_plus: T::lit(3.0),
            sigma: default_sigma(window),
            gamma: T::lit(1e6),
            eta_min: T::lit(-1.0),
            theta_hat0: vec![T::zero()],
            regressor,
            noise: MeasurementNoise::none(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        if !positive(self.dt) {
            return Err(invalid("dt", "must be > 0"));
        }
        if !positive(self.t_end) {
            return Err(invalid("t_end", "must be > 0"));
        }
        if !positive(self.window) {
            return Err(invalid("window", "must be > 0"));
        }
        if !(positive(self.t_plus) && self.t_plus < self.t_end) {
            return Err(invalid("t_plus", "must satisfy 0 < t_plus < t_end"));
        }
        if !(positive(self.t_e) && self.t_e <= self.t_end) {
            return Err(invalid("t_e", "must satisfy 0 < t_e <= t_end"));
        }
        if self.window >= self.t_e {
            return Err(invalid("window", "must be shorter than the excitation interval [0, t_e]"));
        }
        if !positive(self.sigma) {
            return Err(invalid("sigma", "must be > 0"));
        }
        if !positive(self.gamma) {
            return Err(invalid("gamma", "must be > 0"));
        }
        if !self.eta_min.is_finite() {
            return Err(invalid("eta_min", "must be finite"));
        }
        if self.theta_hat0.is_empty() || self.theta_hat0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("theta_hat0", "must be non-empty and finite"));
        }
        if grid_index(self.window, self.dt).is_none() {
            return Err(invalid("window", "must be an integer multiple of dt"));
        }
        if grid_index(self.t_plus, self.dt).is_none() {
            return Err(invalid("t_plus", "must be an integer multiple of dt"));
        }
        self.regressor.validate()?;
        for spec in [&self.noise.regressor, &self.noise.output].into_iter().flatten() {
            spec.validate()?;
            if grid_index(spec.sample_time, self.dt).is_none_or(|r| r == 0) {
                return Err(invalid("noise.sample_time", "must be an integer multiple of dt"));
            }
        }
        Ok(())
    }

    /// Checks the schedule against this configuration: matching dimension,
    /// jumps on grid points and strictly before `t_e`.
    pub fn validate_schedule(&self, schedule: &ParameterSchedule<T>) -> Result<()> {
        if schedule.dim() != self.theta_hat0.len() {
            return Err(invalid(
                "theta_hat0",
                format!(
                    "dimension {} does not match schedule dimension {}",
                    self.theta_hat0.len(),
                    schedule.dim()
                ),
            ));
        }
        for jump in schedule.jumps() {
            if jump.time >= self.t_e {
                return Err(Error::InvalidSchedule(format!(
                    "jump at t = {} is not before t_e = {}",
                    jump.time, self.t_e
                )));
            }
            if grid_index(jump.time, self.dt).is_none() {
                return Err(Error::InvalidSchedule(format!(
                    "jump at t = {} is not on the dt grid",
                    jump.time
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> TimeGrid<T> {
        let steps = (self.t_end / self.dt + T::lit(1e-9)).floor();
        TimeGrid::new(self.dt, steps.to_usize().unwrap_or(0))
    }

    pub fn steps_of(&self, t: T) -> usize {
        nearest_index(t, self.dt)
    }

    pub fn normalization(&self) -> NormalizationConfig<T> {
        NormalizationConfig { eta_min: self.eta_min }
    }

    pub fn reset_plan(&self) -> ResetPlan<T> {
        ResetPlan::new(event_times(self), self.t_plus, self.dt)
    }
}

/// Reset times `{kT : k ≥ 1, kT < T⁺} ∪ {T⁺}`, strictly increasing.
pub fn event_times<T: Scalar>(config: &SimConfig<T>) -> Vec<T> {
    let window_steps = config.steps_of(config.window).max(1);
    let final_step = config.steps_of(config.t_plus);
    let mut times: Vec<T> = (1..)
        .take_while(|k| k * window_steps < final_step)
        .map(|k| T::from_index(k) * config.window)
        .collect();
    times.push(config.t_plus);
    times
}

/// Pre-reset filter values captured at one reset event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResetRecord<T> {
    pub step: usize,
    pub t: T,
    pub omega_before: T,
    pub yf_before: Vec<T>,
}

/// Sampled channels of one run, all aligned to one uniform grid.
///
/// At a reset step the filter channels hold the post-reset (zeroed) values;
/// the values just before the reset are kept in [`Trajectory::resets`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub grid: TimeGrid<T>,
    pub t: Vec<T>,
    /// Measured regressor (true regressor plus regressor noise).
    pub omega: Vec<T>,
    /// Decimal exponent of the measured regressor (`-inf` at zero).
    pub eta: Vec<T>,
    pub phi: Vec<T>,
    /// Filtered regressor `Ω`.
    pub omega_filt: Vec<T>,
    /// Filtered output `𝓨`, one vector per component.
    pub y_filt: Vec<Vec<T>>,
    /// Measured output `y`, per component.
    pub y: Vec<Vec<T>>,
    /// Normalized output `Y = y·f(ω)`, per component.
    pub y_norm: Vec<Vec<T>>,
    pub theta_hat: Vec<Vec<T>>,
    pub theta: Vec<Vec<T>>,
    /// `‖Θ̂ − Θ‖`.
    pub err_norm: Vec<T>,
    pub resets: Vec<ResetRecord<T>>,
}

impl<T: Scalar> Trajectory<T> {
    fn with_capacity(grid: TimeGrid<T>, dim: usize) -> Self {
        let len = grid.len();
        let channel = || Vec::with_capacity(len);
        let vector = || (0..dim).map(|_| Vec::with_capacity(len)).collect::<Vec<_>>();
        Self {
            grid,
            t: channel(),
            omega: channel(),
            eta: channel(),
            phi: channel(),
            omega_filt: channel(),
            y_filt: vector(),
            y: vector(),
            y_norm: vector(),
            theta_hat: vector(),
            theta: vector(),
            err_norm: channel(),
            resets: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn dt(&self) -> T {
        self.grid.dt
    }

    /// Grid index nearest to `t`, if `t` lies on the grid's span.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let half = self.dt() * T::lit(0.5);
        if t < -half || t > self.t[self.len() - 1] + half {
            return None;
        }
        Some(nearest_index(t, self.dt()).min(self.len() - 1))
    }

    /// `Θ̂` at sample `n`.
    pub fn theta_hat_at(&self, n: usize) -> Vec<T> {
        self.theta_hat.iter().map(|c| c[n]).collect()
    }
}

/// Runs one simulation of the identification loop.
pub fn integrate_system<T: Scalar>(
    config: &SimConfig<T>,
    schedule: &ParameterSchedule<T>,
) -> Result<Trajectory<T>> {
    config.validate()?;
    config.validate_schedule(schedule)?;

    let dim = schedule.dim();
    let grid = config.grid();
    let norm_cfg = config.normalization();
    let plan = config.reset_plan();
    let reset_steps: Vec<usize> = plan.times().iter().map(|&t| config.steps_of(t)).collect();
    let jump_steps: Vec<usize> = schedule.jumps().iter().map(|j| config.steps_of(j.time)).collect();

    let regressor_noise = HeldNoise::new(config.noise.regressor.as_ref(), 1, grid, config.dt);
    let output_noise = HeldNoise::new(config.noise.output.as_ref(), dim, grid, config.dt);

    let mut traj = Trajectory::with_capacity(grid, dim);
    let mut filter = FilterState::new(dim);
    let mut estimator = EstimatorState::new(config.theta_hat0.clone());
    let mut theta = schedule.theta0().to_vec();
    let mut next_jump = 0;
    let mut next_reset = 0;

    // Packed state: [ω, e, Ω, 𝓨₁..𝓨ₙ].
    let mut x = vec![T::zero(); 3 + dim];
    filter.store(&mut x[1..]);
    let mut rk = Rk4::new(x.len());
    let mut w_out = vec![T::zero(); dim];
    let mut y = vec![T::zero(); dim];
    let mut stage_y = vec![T::zero(); dim];
    let mut stage_big_y = vec![T::zero(); dim];
    let mut x_prev = x.clone();
    let floor = norm_cfg.floor_magnitude();

    for n in 0..=grid.steps {
        let t = grid.time(n);

        if next_reset < reset_steps.len() && reset_steps[next_reset] == n {
            traj.resets.push(ResetRecord {
                step: n,
                t: plan.times()[next_reset],
                omega_before: filter.omega,
                yf_before: filter.yf.clone(),
            });
            filter.apply_reset(plan.times()[next_reset], &plan)?;
            filter.store(&mut x[1..]);
            next_reset += 1;
        }
        while next_jump < jump_steps.len() && jump_steps[next_jump] <= n {
            for (th, d) in theta.iter_mut().zip(&schedule.jumps()[next_jump].delta) {
                *th = *th + *d;
            }
            next_jump += 1;
        }

        let w_reg = regressor_noise.value(0, n);
        output_noise.fill(n, &mut w_out);
        let omega_meas = x[0] + w_reg;
        let normalized = norm_cfg.normalize(omega_meas).map_err(|_| Error::NonFinite {
            channel: "omega".into(),
            t: t.as_f64(),
        })?;
        lre_output_into(x[0], &theta, &w_out, &mut y);

        traj.t.push(t);
        traj.omega.push(omega_meas);
        traj.eta.push(normalized.eta.value());
        traj.phi.push(normalized.phi);
        traj.omega_filt.push(filter.omega);
        let mut err_sq = T::zero();
        for i in 0..dim {
            traj.y_filt[i].push(filter.yf[i]);
            traj.y[i].push(y[i]);
            traj.y_norm[i].push(y[i] * normalized.gain);
            traj.theta_hat[i].push(estimator.theta_hat[i]);
            traj.theta[i].push(theta[i]);
            let d = estimator.theta_hat[i] - theta[i];
            err_sq = err_sq + d * d;
        }
        traj.err_norm.push(err_sq.sqrt());

        if n == grid.steps {
            break;
        }

        estimator.step(filter.omega, &filter.yf, config.gamma, config.dt);

        let sigma = config.sigma;
        let mut rhs = |tau: T, s: &[T], ds: &mut [T]| {
            ds[0] = regressor_rate(s[0], config.regressor.at(tau));
            let (phi, gain) = match norm_cfg.normalize(s[0] + w_reg) {
                Ok(nz) => (nz.phi, nz.gain),
                Err(_) => (T::nan(), T::nan()),
            };
            lre_output_into(s[0], &theta, &w_out, &mut stage_y);
            for (b, v) in stage_big_y.iter_mut().zip(&stage_y) {
                *b = *v * gain;
            }
            filter_rhs(sigma, s[1], phi, &stage_big_y, &mut ds[1..]);
        };
        x_prev.copy_from_slice(&x);
        rk.step(&mut rhs, t, &mut x, config.dt);
        // φ has a derivative jump where |ω| crosses the floor; splitting the
        // step there keeps RK4 at full order.
        let crossing = saturation_crossing(config, floor, w_reg, t, x_prev[0], x[0]);
        if let Some(tau) = crossing {
            x.copy_from_slice(&x_prev);
            rk.step(&mut rhs, t, &mut x, tau);
            rk.step(&mut rhs, t + tau, &mut x, config.dt - tau);
        }
        filter.load(&x[1..]);

        let t_next = grid.time(n + 1);
        check_finite(&x, &estimator.theta_hat, t_next)?;
    }
    Ok(traj)
}

/// Offset within the step `[t, t + dt]` at which the measured regressor
/// magnitude crosses `floor`, if the endpoints lie on opposite sides.
fn saturation_crossing<T: Scalar>(config: &SimConfig<T>, floor: T, noise: T, t: T, w0: T, w1: T) -> Option<T> {
    let side = |w: T| (w + noise).abs() > floor;
    if side(w0) == side(w1) {
        return None;
    }
    // The regressor ODE is decoupled from the filter, so a scalar RK4 step of
    // length τ gives ω(t + τ) directly.
    let mut scalar = Rk4::new(1);
    let mut rate = |tau: T, s: &[T], ds: &mut [T]| ds[0] = regressor_rate(s[0], config.regressor.at(tau));
    let mut at = |tau: T| {
        let mut w = [w0];
        scalar.step(&mut rate, t, &mut w, tau);
        side(w[0])
    };
    let (mut lo, mut hi) = (T::zero(), config.dt);
    for _ in 0..60 {
        let mid = T::lit(0.5) * (lo + hi);
        if at(mid) == side(w0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = T::lit(0.5) * (lo + hi);
    (tau > T::zero() && tau < config.dt).then_some(tau)
}

fn check_finite<T: Scalar>(x: &[T], theta_hat: &[T], t: T) -> Result<()> {
    let bad = |channel: String| Err(Error::NonFinite {
        channel,
        t: t.as_f64(),
    });
    if !x[0].is_finite() {
        return bad("omega".into());
    }
    if !x[1].is_finite() {
        return bad("forgetting".into());
    }
    if !x[2].is_finite() {
        return bad("Omega".into());
    }
    for (i, v) in x[3..].iter().enumerate() {
        if !v.is_finite() {
            return bad(format!("Yf{}", i + 1));
        }
    }
    for (i, v) in theta_hat.iter().enumerate() {
        if !v.is_finite() {
            return bad(format!("theta_hat{}", i + 1));
        }
    }
    Ok(())
}

/// Noise samples indexed by grid step.
struct HeldNoise<T> {
    streams: Vec<Vec<T>>,
    steps_per_sample: usize,
}

impl<T: Scalar> HeldNoise<T> {
    fn new(spec: Option<&NoiseSpec<T>>, dim: usize, grid: TimeGrid<T>, dt: T) -> Self {
        match spec {
            None => Self {
                streams: Vec::new(),
                steps_per_sample: 1,
            },
            Some(spec) => {
                let steps_per_sample = nearest_index(spec.sample_time, dt).max(1);
                let count = grid.steps / steps_per_sample + 1;
                let streams = (0..dim)
                    .map(|i| {
                        let mut s = spec.clone();
                        s.seed = spec.seed.wrapping_add(i as u64);
                        s.held_values(count)
                    })
                    .collect();
                Self {
                    streams,
                    steps_per_sample,
                }
            }
        }
    }

    fn value(&self, component: usize, step: usize) -> T {
        self.streams
            .get(component)
            .map_or(T::zero(), |s| s[step / self.steps_per_sample])
    }

    fn fill(&self, step: usize, out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.value(i, step);
        }
    }
}

/// Euclidean norm of `Θ̂ − Θ` for two parameter vectors.
pub fn estimation_error<T: Scalar>(theta_hat: &[T], theta: &[T]) -> T {
    let diff: Vec<T> = theta_hat.iter().zip(theta).map(|(a, b)| *a - *b).collect();
    norm(&diff)
}
