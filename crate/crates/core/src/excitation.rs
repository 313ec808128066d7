//! Post-hoc excitation analysis of simulated trajectories.
//!
//! Computes finite-excitation levels, the times at which the regressor's
//! decimal exponent crosses the normalization floor, the assumption flags the
//! convergence guarantees rest on, and the data-driven bounds on the filtered
//! regressor `Ω` that the envelope checks consume.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::Regime;
use crate::normalize::decompose;
use crate::scalar::Scalar;
use crate::signals::ParameterSchedule;
use crate::sim::{SimConfig, Trajectory};

/// Trapezoid `∫ s²` over samples `i0..=i1`.
fn trapezoid_sq<T: Scalar>(samples: &[T], dt: T, i0: usize, i1: usize) -> T {
    if i1 <= i0 {
        return T::zero();
    }
    let half = T::lit(0.5);
    let inner = samples[i0 + 1..i1].iter().fold(T::zero(), |acc, v| acc + *v * *v);
    dt * (half * samples[i0] * samples[i0] + inner + half * samples[i1] * samples[i1])
}

/// `∫ signal²(τ) dτ` over `[start, end]` by trapezoid quadrature on the grid.
pub fn excitation_level<T: Scalar>(samples: &[T], dt: T, start: T, end: T) -> Result<T> {
    if !(start < end) {
        return Err(Error::EmptyInterval {
            start: start.as_f64(),
            end: end.as_f64(),
        });
    }
    let outside = || Error::OutsideGrid {
        start: start.as_f64(),
        end: end.as_f64(),
    };
    let half = dt * T::lit(0.5);
    let last = T::from_index(samples.len().saturating_sub(1)) * dt;
    if start < -half || end > last + half {
        return Err(outside());
    }
    let i0 = (start / dt).round().to_usize().ok_or_else(outside)?;
    let i1 = (end / dt).round().to_usize().ok_or_else(outside)?;
    if i1 <= i0 {
        return Err(Error::EmptyInterval {
            start: start.as_f64(),
            end: end.as_f64(),
        });
    }
    Ok(trapezoid_sq(samples, dt, i0, i1))
}

/// Times at which the regressor enters and finally leaves `η > η_min`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transitions<T> {
    /// First time with `η > η_min`.
    pub t_start: T,
    /// Last time with `η > η_min` (`T_j`).
    pub t_final: T,
    /// `η > η_min` still holds at the end of the record.
    pub persists_to_end: bool,
    /// `η > η_min` holds at every sample between the two crossings.
    pub contiguous: bool,
}

/// Locates `t_start` and `T_j`, refining each crossing linearly in `|ω|`
/// between the bracketing samples.
pub fn detect_transition_times<T: Scalar>(omega: &[T], dt: T, eta_min: T) -> Result<Transitions<T>> {
    let above = |w: T| decompose(w).map(|d| d.eta.exceeds(eta_min)).unwrap_or(false);
    let never = || Error::NeverExcited {
        eta_min: eta_min.as_f64(),
    };
    let first = omega.iter().position(|&w| above(w)).ok_or_else(never)?;
    let last = omega.iter().rposition(|&w| above(w)).ok_or_else(never)?;
    let level = T::lit(10.0).powf(eta_min);
    let crossing = |lo: usize| {
        let (a, b) = (omega[lo].abs(), omega[lo + 1].abs());
        let frac = if b != a { (level - a) / (b - a) } else { T::zero() };
        (T::from_index(lo) + frac.max(T::zero()).min(T::one())) * dt
    };
    let t_start = if first == 0 { T::zero() } else { crossing(first - 1) };
    let persists_to_end = last + 1 == omega.len();
    let t_final = if persists_to_end {
        T::from_index(last) * dt
    } else {
        crossing(last)
    };
    let contiguous = omega[first..=last].iter().all(|&w| above(w));
    Ok(Transitions {
        t_start,
        t_final,
        persists_to_end,
        contiguous,
    })
}

/// Tunables of the excitation analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisOptions<T> {
    /// Minimum `∫ω²` every sliding window of width `T` must reach for the
    /// continuity-of-excitation check.
    pub min_window_excitation: T,
}

impl<T: Scalar> Default for AnalysisOptions<T> {
    fn default() -> Self {
        Self {
            min_window_excitation: T::lit(1e-8),
        }
    }
}

/// Filter window `[start, end]` with its excitation level and `Ω` floor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowBound<T> {
    pub start: T,
    pub end: T,
    /// `Δ̄_k = ∫ φ²` over the window.
    pub level: T,
    /// `e^{−σ(end−start)}·Δ̄_k`.
    pub floor: T,
    /// `Ω` just before the reset at `end`.
    pub omega_end: T,
    /// First grid time at which `Ω` reaches `floor` (`T̄₀k`).
    pub t_floor: Option<T>,
    pub omega_at_t_floor: Option<T>,
    /// `Ω(end⁻) ≥ floor`.
    pub floor_ok: bool,
}

/// Filter value accumulated before one parameter jump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpBound<T> {
    pub time: T,
    pub delta_norm: T,
    /// `Ω` at the jump instant: the upper bound `Ω_1UB` on the pre-jump part
    /// of the filtered regressor for the rest of the integration span.
    pub omega_1ub: T,
    pub regime: Regime,
}

/// Runtime checks of the normalized and filtered regressor properties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropositionChecks {
    /// `φ ∈ [0, 1]` at every sample.
    pub phi_in_unit_interval: bool,
    /// `∫φ²` over `[0, t_e]` does not exceed the interval length.
    pub phi_energy_bounded: bool,
    /// Every window reaches its `Ω` floor before the next reset.
    pub window_floors_reached: bool,
    /// `Ω_LB ≤ Ω(t) ≤ Ω_UB` for every sample with `t ≥ t_e`.
    pub terminal_bounds_hold: bool,
}

/// Excitation summary for one regressor run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcitationReport<T> {
    /// `None` when the regressor never rises above the floor.
    pub transitions: Option<Transitions<T>>,
    /// `∫ω²` over `[0, t_e]`.
    pub alpha: T,
    /// `∫ω²` over `[T⁺, t_e]`.
    pub alpha_post: T,
    /// `Δ₂ = ∫φ²` over `[T⁺, t_e]`.
    pub delta_post: T,
    /// `η ≤ η_min` at every sample of `[T⁺, t_e]`.
    pub below_floor_post: bool,
    /// Smallest `∫ω²` over sliding windows of width `T` inside `[0, t_e]`.
    pub min_window_excitation: T,
    pub assumption1_ok: bool,
    pub assumption2_ok: bool,
    /// `Ω_UB = 1/σ`.
    pub omega_ub: T,
    /// `Ω_LB = Δ₂·e^{−σ(t_e−T⁺)}`.
    pub omega_lb: T,
    pub windows: Vec<WindowBound<T>>,
    pub jumps: Vec<JumpBound<T>>,
    pub propositions: PropositionChecks,
}

/// Builds the [`ExcitationReport`] of one simulated run.
pub fn analyze_regressor<T: Scalar>(
    config: &SimConfig<T>,
    schedule: &ParameterSchedule<T>,
    traj: &Trajectory<T>,
    opts: &AnalysisOptions<T>,
) -> Result<ExcitationReport<T>> {
    if traj.len() < 2 {
        return Err(Error::LengthMismatch("trajectory has fewer than two samples".into()));
    }
    let dt = traj.dt();
    let idx = |t: T| {
        traj.index_of(t).ok_or(Error::OutsideGrid {
            start: t.as_f64(),
            end: t.as_f64(),
        })
    };
    let i_te = idx(config.t_e)?;
    let i_plus = idx(config.t_plus)?;

    let transitions = match detect_transition_times(&traj.omega, dt, config.eta_min) {
        Ok(t) => Some(t),
        Err(Error::NeverExcited { .. }) => None,
        Err(e) => return Err(e),
    };

    let alpha = trapezoid_sq(&traj.omega, dt, 0, i_te);
    let alpha_post = trapezoid_sq(&traj.omega, dt, i_plus, i_te);
    let delta_post = trapezoid_sq(&traj.phi, dt, i_plus, i_te);
    let below_floor_post = i_te > i_plus && traj.eta[i_plus..=i_te].iter().all(|&e| e <= config.eta_min);

    let window_steps = config.steps_of(config.window).max(1);
    let min_window_excitation = sliding_min(&traj.omega, dt, window_steps, i_te);

    let sigma = config.sigma;
    let omega_ub = sigma.recip();
    let omega_lb = if i_te > i_plus {
        delta_post * (-sigma * (config.t_e - config.t_plus)).exp()
    } else {
        T::zero()
    };

    let windows = window_bounds(config, traj)?;
    let jumps = schedule
        .jumps()
        .iter()
        .map(|j| {
            let n = idx(j.time)?;
            Ok(JumpBound {
                time: j.time,
                delta_norm: j.magnitude(),
                omega_1ub: traj.omega_filt[n],
                regime: if j.time < config.t_plus {
                    Regime::Windowed
                } else {
                    Regime::PostFinal
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let slack = T::lit(1e-9);
    let propositions = PropositionChecks {
        phi_in_unit_interval: traj.phi.iter().all(|&p| p >= T::zero() && p <= T::one()),
        phi_energy_bounded: trapezoid_sq(&traj.phi, dt, 0, i_te) <= config.t_e * (T::one() + slack),
        window_floors_reached: windows.iter().all(|w| w.floor_ok),
        terminal_bounds_hold: traj.omega_filt[i_te..].iter().all(|&o| {
            o >= omega_lb * (T::one() - slack) && o <= omega_ub * (T::one() + slack)
        }),
    };

    let assumption1_ok = transitions.as_ref().is_some_and(|t| t.contiguous);
    Ok(ExcitationReport {
        transitions,
        alpha,
        alpha_post,
        delta_post,
        below_floor_post,
        min_window_excitation,
        assumption1_ok,
        assumption2_ok: min_window_excitation >= opts.min_window_excitation,
        omega_ub,
        omega_lb,
        windows,
        jumps,
        propositions,
    })
}

/// Minimum trapezoid `∫s²` over all windows of `width` steps inside `[0, last]`.
fn sliding_min<T: Scalar>(samples: &[T], dt: T, width: usize, last: usize) -> T {
    if last < width {
        return trapezoid_sq(samples, dt, 0, last);
    }
    // Cumulative trapezoid integral; window value is a difference of two
    // prefix entries.
    let half = T::lit(0.5) * dt;
    let mut prefix = Vec::with_capacity(last + 1);
    prefix.push(T::zero());
    for i in 1..=last {
        let a = samples[i - 1] * samples[i - 1];
        let b = samples[i] * samples[i];
        prefix.push(prefix[i - 1] + half * (a + b));
    }
    (width..=last)
        .map(|i| prefix[i] - prefix[i - width])
        .fold(T::infinity(), T::min)
}

fn window_bounds<T: Scalar>(config: &SimConfig<T>, traj: &Trajectory<T>) -> Result<Vec<WindowBound<T>>> {
    let dt = traj.dt();
    let mut windows = Vec::with_capacity(traj.resets.len());
    let mut start_step = 0usize;
    let mut start_t = T::zero();
    for reset in &traj.resets {
        let (i0, i1) = (start_step, reset.step);
        if i1 <= i0 {
            continue;
        }
        let level = trapezoid_sq(&traj.phi, dt, i0, i1);
        let floor = (-config.sigma * (reset.t - start_t)).exp() * level;
        let hit = if level > T::zero() {
            (i0..i1).find(|&n| traj.omega_filt[n] >= floor)
        } else {
            None
        };
        windows.push(WindowBound {
            start: start_t,
            end: reset.t,
            level,
            floor,
            omega_end: reset.omega_before,
            t_floor: hit.map(|n| traj.t[n]),
            omega_at_t_floor: hit.map(|n| traj.omega_filt[n]),
            floor_ok: reset.omega_before >= floor * (T::one() - T::lit(1e-9)),
        });
        start_step = reset.step;
        start_t = reset.t;
    }
    Ok(windows)
}

/// Flags combining the per-regressor reports of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionFlags<T> {
    /// Every regressor shows a single excitation block above the floor.
    pub assumption1_ok: bool,
    /// Every regressor keeps its sliding-window excitation above threshold.
    pub assumption2_ok: bool,
    /// `T⁺ ≤ min_j T_j`.
    pub assumption3_ok: bool,
    pub min_t_final: Option<T>,
}

pub fn check_assumptions<T: Scalar>(config: &SimConfig<T>, reports: &[ExcitationReport<T>]) -> AssumptionFlags<T> {
    let finals: Option<Vec<T>> = reports
        .iter()
        .map(|r| r.transitions.as_ref().map(|t| t.t_final))
        .collect();
    let min_t_final = finals
        .filter(|f| !f.is_empty())
        .map(|f| f.into_iter().fold(T::infinity(), T::min));
    AssumptionFlags {
        assumption1_ok: reports.iter().all(|r| r.assumption1_ok),
        assumption2_ok: reports.iter().all(|r| r.assumption2_ok),
        assumption3_ok: min_t_final.is_some_and(|m| config.t_plus <= m),
        min_t_final,
    }
}

/// Bounds on `Ω` shared by all regressors of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSet<T> {
    /// `Ω_UB = 1/σ`.
    pub omega_ub: T,
    /// `α_min = min_j ∫_{T⁺}^{t_e} ω_j²`.
    pub alpha_min: T,
    /// `Ω̄_LB = 10^{−2η_min}·α_min·e^{−σ(t_e−T⁺)}`.
    pub omega_bar_lb: T,
    /// Every regressor stays at or below the floor on `[T⁺, t_e]`, the
    /// condition under which `Ω̄_LB` bounds `Ω` from below.
    pub omega_bar_lb_valid: bool,
    /// `min_j Ω_LB,j`, always a valid lower bound for `t ≥ t_e`.
    pub omega_lb_uniform: T,
    /// `α_min = 0` or `Ω_LB = 0`: the lower bounds carry no information.
    pub degenerate: bool,
}

impl<T: Scalar> BoundSet<T> {
    /// Lower bound on `Ω(t)` for `t ≥ t_e` used by the terminal envelopes.
    pub fn terminal_floor(&self) -> T {
        if self.omega_bar_lb_valid {
            self.omega_bar_lb
        } else {
            self.omega_lb_uniform
        }
    }
}

pub fn theoretical_bounds<T: Scalar>(config: &SimConfig<T>, reports: &[ExcitationReport<T>]) -> BoundSet<T> {
    let alpha_min = reports.iter().map(|r| r.alpha_post).fold(T::infinity(), T::min);
    let alpha_min = if alpha_min.is_finite() { alpha_min } else { T::zero() };
    let decay = if config.t_e > config.t_plus {
        (-config.sigma * (config.t_e - config.t_plus)).exp()
    } else {
        T::zero()
    };
    let omega_bar_lb = T::lit(10.0).powf(-T::lit(2.0) * config.eta_min) * alpha_min * decay;
    let omega_lb_uniform = reports.iter().map(|r| r.omega_lb).fold(T::infinity(), T::min);
    let omega_lb_uniform = if omega_lb_uniform.is_finite() {
        omega_lb_uniform
    } else {
        T::zero()
    };
    BoundSet {
        omega_ub: config.sigma.recip(),
        alpha_min,
        omega_bar_lb,
        omega_bar_lb_valid: !reports.is_empty() && reports.iter().all(|r| r.below_floor_post),
        omega_lb_uniform,
        degenerate: alpha_min == T::zero() || omega_lb_uniform == T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::InputSignal;

    fn grid_signal(f: impl Fn(f64) -> f64, dt: f64, end: f64) -> Vec<f64> {
        let n = (end / dt).round() as usize;
        (0..=n).map(|k| f(k as f64 * dt)).collect()
    }

    #[test]
    fn level_of_unit_signal() {
        let s = grid_signal(|_| 1.0, 1e-3, 1.0);
        assert!((excitation_level(&s, 1e-3, 0.0, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn level_of_zero_signal() {
        let s = grid_signal(|_| 0.0, 1e-3, 1.0);
        assert_eq!(excitation_level(&s, 1e-3, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn level_against_antiderivative() {
        // ∫₀³ t²e^{−2t} dt with antiderivative −(t²/2 + t/2 + 1/4)e^{−2t}.
        let anti = |t: f64| -(t * t / 2.0 + t / 2.0 + 0.25) * (-2.0 * t).exp();
        let exact = anti(3.0) - anti(0.0);
        assert!((exact - 0.234_51).abs() < 1e-5);
        let s = grid_signal(|t| t * (-t).exp(), 1e-4, 3.0);
        assert!((excitation_level(&s, 1e-4, 0.0, 3.0).unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn level_rejects_empty_and_outside() {
        let s = grid_signal(|_| 1.0, 1e-3, 1.0);
        assert!(matches!(excitation_level(&s, 1e-3, 0.5, 0.5), Err(Error::EmptyInterval { .. })));
        assert!(matches!(excitation_level(&s, 1e-3, 0.5, 2.0), Err(Error::OutsideGrid { .. })));
    }

    #[test]
    fn transitions_of_closed_form_regressor() {
        let s = grid_signal(|t| t * (-t).exp(), 1e-4, 10.0);
        let tr = detect_transition_times(&s, 1e-4, -1.0).unwrap();
        assert!((tr.t_start - 0.111_83).abs() < 1e-4, "{}", tr.t_start);
        assert!((tr.t_final - 3.577_15).abs() < 1e-4, "{}", tr.t_final);
        assert!(tr.contiguous && !tr.persists_to_end);
    }

    #[test]
    fn never_excited_is_an_error() {
        let s = grid_signal(|_| 0.01, 1e-3, 1.0);
        assert!(matches!(detect_transition_times(&s, 1e-3, -1.0), Err(Error::NeverExcited { .. })));
    }

    #[test]
    fn constant_regressor_sets_every_flag() {
        let mut cfg = SimConfig::new(InputSignal::exp_decay(1.0, 1.0));
        cfg.t_end = 5.0;
        cfg.t_e = 5.0;
        let sched = ParameterSchedule::constant(vec![1.0]).unwrap();
        let mut traj = crate::sim::integrate_system(&cfg, &sched).unwrap();
        // Constant ω ≡ 1 on the grid, independent of the first-order model.
        traj.omega.iter_mut().for_each(|w| *w = 1.0);
        traj.eta.iter_mut().for_each(|e| *e = 0.0);
        let report = analyze_regressor(&cfg, &sched, &traj, &AnalysisOptions::default()).unwrap();
        let flags = check_assumptions(&cfg, std::slice::from_ref(&report));
        assert!(flags.assumption1_ok && flags.assumption2_ok && flags.assumption3_ok);
    }

    #[test]
    fn degenerate_bounds_are_flagged() {
        let cfg = SimConfig::new(InputSignal::exp_decay(1.0, 1.0));
        let report = ExcitationReport {
            transitions: None,
            alpha: 0.0,
            alpha_post: 0.0,
            delta_post: 0.0,
            below_floor_post: true,
            min_window_excitation: 0.0,
            assumption1_ok: false,
            assumption2_ok: false,
            omega_ub: 0.2,
            omega_lb: 0.0,
            windows: Vec::new(),
            jumps: Vec::new(),
            propositions: PropositionChecks {
                phi_in_unit_interval: true,
                phi_energy_bounded: true,
                window_floors_reached: true,
                terminal_bounds_hold: true,
            },
        };
        let b = theoretical_bounds(&cfg, &[report]);
        assert!(b.degenerate);
        assert_eq!(b.omega_ub, 0.2);
    }
}
