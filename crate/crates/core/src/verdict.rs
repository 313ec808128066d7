//! Boundedness verdicts for estimation-error trajectories.
//!
//! Each interval of a run is classified as bounded (IB), exponentially
//! bounded (IEB), globally exponentially stable (GES) or exponentially
//! ultimately bounded (EUB), with the fitted envelope parameters `κ`, `ρ`,
//! `R` of `‖Θ̃(t)‖ ≤ ρ‖Θ̃(τ₁)‖e^{−κ(t−τ₁)} + R`. Independently, the error is
//! checked pointwise against the closed-form Lyapunov envelopes built from
//! the excitation bounds.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::excitation::{BoundSet, ExcitationReport};
use crate::filter::Regime;
use crate::scalar::Scalar;
use crate::signals::ParameterSchedule;
use crate::sim::{event_times, SimConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundednessClass {
    #[serde(rename = "IB")]
    Ib,
    #[serde(rename = "IEB")]
    Ieb,
    #[serde(rename = "GES")]
    Ges,
    #[serde(rename = "EUB")]
    Eub,
    #[serde(rename = "unbounded")]
    Unbounded,
}

impl BoundednessClass {
    pub fn label(self) -> &'static str {
        match self {
            Self::Ib => "IB",
            Self::Ieb => "IEB",
            Self::Ges => "GES",
            Self::Eub => "EUB",
            Self::Unbounded => "unbounded",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "IB" => Some(Self::Ib),
            "IEB" => Some(Self::Ieb),
            "GES" => Some(Self::Ges),
            "EUB" => Some(Self::Eub),
            "UNBOUNDED" => Some(Self::Unbounded),
            _ => None,
        }
    }
}

impl fmt::Display for BoundednessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Classification thresholds.
///
/// `scale` is the absolute reference for the two absolute thresholds (the
/// rounding floor and the terminal convergence level); every other test is
/// relative to the error at the start of the interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds<T> {
    /// Largest admissible overshoot `ρ`.
    pub rho_max: T,
    /// IEB requires `e(τ₂) ≤ decay_ratio·e(τ₁)`.
    pub decay_ratio: T,
    /// Errors below `floor_rel·scale` count as converged to rounding level.
    pub floor_rel: T,
    /// GES requires `e(t_end) ≤ ges_eps·scale`.
    pub ges_eps: T,
    pub scale: T,
}

impl<T: Scalar> Default for Thresholds<T> {
    fn default() -> Self {
        Self {
            rho_max: T::lit(2.0),
            decay_ratio: T::lit(0.1),
            floor_rel: T::lit(1e-9),
            ges_eps: T::lit(1e-6),
            scale: T::one(),
        }
    }
}

impl<T: Scalar> Thresholds<T> {
    /// Defaults with `scale` set to the largest jump of `schedule` (or 1).
    pub fn for_schedule(schedule: &ParameterSchedule<T>) -> Self {
        Self {
            scale: schedule
                .max_jump_magnitude()
                .filter(|m| *m > T::zero())
                .unwrap_or_else(T::one),
            ..Self::default()
        }
    }

    fn floor(&self) -> T {
        self.floor_rel * self.scale
    }
}

/// Analysis interval `[start, end]`. Non-terminal intervals are half-open on
/// the right so that a jump at `end` belongs to the next interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval<T> {
    pub start: T,
    pub end: T,
    /// Runs from `T⁺` to the end of the record; GES/EUB apply.
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnvelopeKind {
    /// Window envelope with residual from earlier jumps in the window.
    WindowResidual,
    /// Window envelope without residual.
    Window,
    /// Terminal envelope with residual from jumps after `T⁺`.
    TerminalResidual,
    /// Terminal envelope without residual.
    Terminal,
}

impl EnvelopeKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::WindowResidual => "window+residual",
            Self::Window => "window",
            Self::TerminalResidual => "terminal+residual",
            Self::Terminal => "terminal",
        }
    }

    fn has_residual(self) -> bool {
        matches!(self, Self::WindowResidual | Self::TerminalResidual)
    }
}

/// Envelope `e^{−c·γΩ²(t−t₀)}·e(t₀) + gain·drive/Ω²`, with `c = 0.5` for the
/// checked bound and `c = 1` for the reported strong margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope<T> {
    pub kind: EnvelopeKind,
    pub t0: T,
    pub gamma: Option<T>,
    /// Decay level: `Ω(T̄₀k)` for window envelopes, `Ω̄_LB` for terminal ones.
    pub omega: Option<T>,
    /// `T` for window envelopes, `Ω_UB` for terminal ones.
    pub residual_gain: Option<T>,
    /// `Σ Ω_1UB·‖Θ₁‖` over the jumps feeding the residual.
    pub drive: Option<T>,
}

impl<T: Scalar> Envelope<T> {
    fn require(&self, value: Option<T>, parameter: &'static str) -> Result<T> {
        value.ok_or(Error::MissingEnvelopeParameter {
            envelope: self.kind.label(),
            parameter,
        })
    }

    /// Envelope value at `t` given the error `e0` at `t0`.
    pub fn eval(&self, t: T, e0: T, exponent: T) -> Result<T> {
        let gamma = self.require(self.gamma, "gamma")?;
        let omega = self.require(self.omega, "omega")?;
        let decay = (-exponent * gamma * omega * omega * (t - self.t0)).exp() * e0;
        if !self.kind.has_residual() {
            return Ok(decay);
        }
        let gain = self.require(self.residual_gain, "residual_gain")?;
        let drive = self.require(self.drive, "omega_1ub")?;
        Ok(decay + gain * drive / (omega * omega))
    }
}

/// Relative and absolute slack of the pointwise envelope test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeTolerance<T> {
    pub rel: T,
    pub abs: T,
}

impl<T: Scalar> Default for EnvelopeTolerance<T> {
    fn default() -> Self {
        Self {
            rel: T::lit(1e-6),
            abs: T::lit(1e-12),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeOutcome<T> {
    pub kind: EnvelopeKind,
    pub t0: T,
    pub pass: bool,
    /// `min_t (env(t)(1+rel) + abs − e(t))`; negative on failure.
    pub margin: T,
    pub first_violation: Option<T>,
    /// Same test with the full exponent `γΩ²`; reported only.
    pub strong_pass: bool,
    pub strong_margin: T,
}

/// Checks `samples` (starting at `envelope.t0`, spacing `dt`) against the
/// envelope.
pub fn envelope_check<T: Scalar>(
    samples: &[T],
    dt: T,
    envelope: &Envelope<T>,
    tol: &EnvelopeTolerance<T>,
) -> Result<EnvelopeOutcome<T>> {
    let Some(&e0) = samples.first() else {
        return Err(Error::EmptyInterval {
            start: envelope.t0.as_f64(),
            end: envelope.t0.as_f64(),
        });
    };
    let scan = |exponent: T| -> Result<(T, Option<T>)> {
        let mut margin = T::infinity();
        let mut first = None;
        for (i, &s) in samples.iter().enumerate() {
            let t = envelope.t0 + T::from_index(i) * dt;
            let env = envelope.eval(t, e0, exponent)?;
            let slack = env * (T::one() + tol.rel) + tol.abs - s;
            if !(slack >= T::zero()) && first.is_none() {
                first = Some(t);
            }
            margin = margin.min(slack);
        }
        Ok((margin, first))
    };
    let (margin, first_violation) = scan(T::lit(0.5))?;
    let (strong_margin, strong_violation) = scan(T::one())?;
    Ok(EnvelopeOutcome {
        kind: envelope.kind,
        t0: envelope.t0,
        pass: first_violation.is_none(),
        margin,
        first_violation,
        strong_pass: strong_violation.is_none(),
        strong_margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessVerdict<T> {
    pub interval: Interval<T>,
    pub class: BoundednessClass,
    /// Fitted decay rate (1/s); infinite when the error starts at rounding level.
    pub kappa: T,
    pub rho: T,
    pub r: T,
    pub envelopes: Vec<EnvelopeOutcome<T>>,
    pub diagnostic: Option<String>,
}

impl<T: Scalar> BoundednessVerdict<T> {
    /// All envelope checks attached to this interval passed.
    pub fn envelope_pass(&self) -> bool {
        self.envelopes.iter().all(|e| e.pass)
    }
}

struct Fit<T> {
    kappa: T,
    rho: T,
}

/// Exponential fit `s ≤ ρ·e1·e^{−κt}` over the samples above `floor`.
///
/// First tries the mean rate `ln(e1/e_last)/width` with the overshoot it
/// implies; when that overshoot exceeds `ρ_max`, falls back to the largest
/// `κ` admissible at `ρ = ρ_max`.
fn exponential_fit<T: Scalar>(samples: &[T], dt: T, floor: T, rho_max: T) -> Fit<T> {
    let e1 = samples[0];
    let n = samples.len() - 1;
    let above = || samples.iter().enumerate().skip(1).filter(|(_, s)| **s > floor);
    if n > 0 {
        let last = samples[n].max(floor);
        let width = T::from_index(n) * dt;
        let kappa = (e1 / last).ln() / width;
        let rho = above()
            .map(|(i, s)| *s * (kappa * T::from_index(i) * dt).exp() / e1)
            .fold(T::one(), T::max);
        if rho <= rho_max {
            return Fit { kappa, rho };
        }
    }
    let kappa = above()
        .map(|(i, s)| (rho_max * e1 / *s).ln() / (T::from_index(i) * dt))
        .fold(T::infinity(), T::min);
    Fit { kappa, rho: rho_max }
}

/// Classifies the error samples of one interval (first sample at
/// `interval.start`, spacing `dt`).
pub fn classify_interval<T: Scalar>(
    samples: &[T],
    dt: T,
    interval: &Interval<T>,
    th: &Thresholds<T>,
) -> BoundednessVerdict<T> {
    let verdict = |class, kappa, rho, r, diagnostic| BoundednessVerdict {
        interval: *interval,
        class,
        kappa,
        rho,
        r,
        envelopes: Vec::new(),
        diagnostic,
    };
    if samples.is_empty() {
        return verdict(
            BoundednessClass::Unbounded,
            T::nan(),
            T::nan(),
            T::nan(),
            Some("no samples in interval".into()),
        );
    }
    if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
        let t = interval.start + T::from_index(i) * dt;
        return verdict(
            BoundednessClass::Unbounded,
            T::nan(),
            T::nan(),
            T::infinity(),
            Some(format!("non-finite error at t = {t}")),
        );
    }

    let floor = th.floor();
    let e1 = samples[0];
    let last = samples[samples.len() - 1];
    let exp_class = if interval.terminal {
        BoundednessClass::Ges
    } else {
        BoundednessClass::Ieb
    };
    if samples.iter().all(|&s| s <= floor) {
        return verdict(exp_class, T::infinity(), T::one(), T::zero(), None);
    }

    if e1 > floor {
        let fit = exponential_fit(samples, dt, floor, th.rho_max);
        let decayed = if interval.terminal {
            last <= th.ges_eps * th.scale
        } else {
            last <= (th.decay_ratio * e1).max(floor)
        };
        if fit.kappa > T::zero() && decayed {
            return verdict(exp_class, fit.kappa, fit.rho, T::zero(), None);
        }
    }

    // Bounded form with residual: R covers the tail and any excess over ρ·e1.
    let sup = samples.iter().copied().fold(T::zero(), T::max);
    let r = last.max(sup - th.rho_max * e1).max(T::zero());
    let kappa = samples
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, s)| **s > r)
        .map(|(i, s)| (th.rho_max * e1 / (*s - r)).ln() / (T::from_index(i) * dt))
        .fold(T::infinity(), T::min);
    let class = if interval.terminal {
        BoundednessClass::Eub
    } else {
        BoundednessClass::Ib
    };
    verdict(class, kappa, th.rho_max, r, None)
}

/// Splits `[0, t_end]` at `0`, every reset before `T⁺`, every jump before
/// `T⁺`, and `T⁺`; the last interval `[T⁺, t_end]` is terminal.
pub fn partition_intervals<T: Scalar>(config: &SimConfig<T>, schedule: &ParameterSchedule<T>) -> Vec<Interval<T>> {
    let plus_step = config.steps_of(config.t_plus);
    let mut points: Vec<(usize, T)> = vec![(0, T::zero())];
    points.extend(event_times(config).into_iter().map(|t| (config.steps_of(t), t)));
    points.extend(
        schedule
            .jumps()
            .iter()
            .map(|j| (config.steps_of(j.time), j.time))
            .filter(|(s, _)| *s < plus_step),
    );
    points.sort_by_key(|(s, _)| *s);
    points.dedup_by_key(|(s, _)| *s);
    let mut intervals: Vec<Interval<T>> = points
        .windows(2)
        .map(|w| Interval {
            start: w[0].1,
            end: w[1].1,
            terminal: false,
        })
        .collect();
    intervals.push(Interval {
        start: config.t_plus,
        end: config.t_end,
        terminal: true,
    });
    intervals
}

fn last_reset_at_or_before<T: Scalar>(config: &SimConfig<T>, step: usize) -> usize {
    event_times(config)
        .into_iter()
        .map(|t| config.steps_of(t))
        .filter(|&s| s <= step)
        .max()
        .unwrap_or(0)
}

/// Expected class per interval: IB when a jump has entered the current
/// filter window before the interval starts, IEB otherwise; on the terminal
/// interval EUB when a jump falls in `(T⁺, t_e]`, GES otherwise.
pub fn predict_classes<T: Scalar>(
    config: &SimConfig<T>,
    schedule: &ParameterSchedule<T>,
    intervals: &[Interval<T>],
) -> Vec<BoundednessClass> {
    let jump_steps: Vec<usize> = schedule.jumps().iter().map(|j| config.steps_of(j.time)).collect();
    let plus = config.steps_of(config.t_plus);
    let te = config.steps_of(config.t_e);
    intervals
        .iter()
        .map(|iv| {
            if iv.terminal {
                if jump_steps.iter().any(|&s| s > plus && s <= te) {
                    BoundednessClass::Eub
                } else {
                    BoundednessClass::Ges
                }
            } else {
                let a = config.steps_of(iv.start);
                let k = last_reset_at_or_before(config, a);
                if jump_steps.iter().any(|&s| s > k && s <= a) {
                    BoundednessClass::Ib
                } else {
                    BoundednessClass::Ieb
                }
            }
        })
        .collect()
}

/// Options of [`verify_run`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions<T> {
    pub thresholds: Thresholds<T>,
    pub tolerance: EnvelopeTolerance<T>,
    /// Attach envelope checks; they only apply to noise-free runs.
    pub envelopes: bool,
}

impl<T: Scalar> VerifyOptions<T> {
    pub fn for_schedule(schedule: &ParameterSchedule<T>) -> Self {
        Self {
            thresholds: Thresholds::for_schedule(schedule),
            tolerance: EnvelopeTolerance::default(),
            envelopes: true,
        }
    }
}

fn sample_range<T: Scalar>(traj: &Trajectory<T>, iv: &Interval<T>) -> Result<(usize, usize)> {
    let outside = || Error::OutsideGrid {
        start: iv.start.as_f64(),
        end: iv.end.as_f64(),
    };
    let i0 = traj.index_of(iv.start).ok_or_else(outside)?;
    let i1 = traj.index_of(iv.end).ok_or_else(outside)?;
    if i1 <= i0 {
        return Err(Error::EmptyInterval {
            start: iv.start.as_f64(),
            end: iv.end.as_f64(),
        });
    }
    // Left limit at the right end of non-terminal intervals.
    Ok((i0, if iv.terminal { i1 } else { i1 - 1 }))
}

/// Classifies every interval of a run and attaches the applicable envelope
/// checks.
pub fn verify_run<T: Scalar>(
    config: &SimConfig<T>,
    schedule: &ParameterSchedule<T>,
    traj: &Trajectory<T>,
    report: &ExcitationReport<T>,
    bounds: &BoundSet<T>,
    opts: &VerifyOptions<T>,
) -> Result<Vec<BoundednessVerdict<T>>> {
    let dt = traj.dt();
    let with_envelopes = opts.envelopes && config.noise.is_noise_free();
    partition_intervals(config, schedule)
        .iter()
        .map(|iv| {
            let (i0, i1) = sample_range(traj, iv)?;
            let samples = &traj.err_norm[i0..=i1];
            let mut verdict = classify_interval(samples, dt, iv, &opts.thresholds);
            if with_envelopes && verdict.class != BoundednessClass::Unbounded {
                let env = if iv.terminal {
                    terminal_envelope(config, traj, report, bounds)?
                } else {
                    window_envelope(config, traj, report, iv, i1)?
                };
                if let Some((env, j0)) = env {
                    let outcome = envelope_check(&traj.err_norm[j0..=i1], dt, &env, &opts.tolerance)?;
                    verdict.envelopes.push(outcome);
                }
            }
            Ok(verdict)
        })
        .collect()
}

fn window_envelope<T: Scalar>(
    config: &SimConfig<T>,
    traj: &Trajectory<T>,
    report: &ExcitationReport<T>,
    iv: &Interval<T>,
    i1: usize,
) -> Result<Option<(Envelope<T>, usize)>> {
    let a = config.steps_of(iv.start);
    let Some(window) = report
        .windows
        .iter()
        .find(|w| config.steps_of(w.start) <= a && a < config.steps_of(w.end))
    else {
        return Ok(None);
    };
    let Some(t_floor) = window.t_floor else {
        return Ok(None);
    };
    let j0 = a.max(config.steps_of(t_floor));
    if j0 > i1 {
        return Ok(None);
    }
    let omega = traj.omega_filt[j0];
    if !(omega > T::zero()) {
        return Ok(None);
    }
    let k = config.steps_of(window.start);
    let drive = report
        .jumps
        .iter()
        .filter(|j| j.regime == Regime::Windowed)
        .filter(|j| {
            let s = config.steps_of(j.time);
            s > k && s <= a
        })
        .fold(T::zero(), |acc, j| acc + j.omega_1ub * j.delta_norm);
    let kind = if drive > T::zero() {
        EnvelopeKind::WindowResidual
    } else {
        EnvelopeKind::Window
    };
    Ok(Some((
        Envelope {
            kind,
            t0: traj.t[j0],
            gamma: Some(config.gamma),
            omega: Some(omega),
            residual_gain: Some(config.window),
            drive: Some(drive),
        },
        j0,
    )))
}

fn terminal_envelope<T: Scalar>(
    config: &SimConfig<T>,
    traj: &Trajectory<T>,
    report: &ExcitationReport<T>,
    bounds: &BoundSet<T>,
) -> Result<Option<(Envelope<T>, usize)>> {
    let floor = bounds.terminal_floor();
    if bounds.degenerate || !(floor > T::zero()) {
        return Ok(None);
    }
    let j0 = config.steps_of(config.t_e).min(traj.len() - 1);
    let post: Vec<_> = report.jumps.iter().filter(|j| j.regime == Regime::PostFinal).collect();
    let drive = post.iter().fold(T::zero(), |acc, j| acc + j.omega_1ub * j.delta_norm);
    Ok(Some((
        Envelope {
            kind: if post.is_empty() {
                EnvelopeKind::Terminal
            } else {
                EnvelopeKind::TerminalResidual
            },
            t0: traj.t[j0],
            gamma: Some(config.gamma),
            omega: Some(floor),
            residual_gain: Some(bounds.omega_ub),
            drive: Some(drive),
        },
        j0,
    )))
}

/// Expected class of one interval. An infinite `end` matches any terminal
/// interval starting at `start`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedRow<T> {
    pub start: T,
    pub end: T,
    pub class: BoundednessClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow<T> {
    pub start: T,
    pub end: T,
    pub expected: BoundednessClass,
    pub observed: BoundednessClass,
    pub matches: bool,
    pub kappa: T,
    pub rho: T,
    pub r: T,
    pub envelope_pass: bool,
    /// Smallest envelope margin over the interval, if any envelope applied.
    pub envelope_margin: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport<T> {
    pub rows: Vec<TableRow<T>>,
    pub matched: usize,
    pub total: usize,
}

impl<T> TableReport<T> {
    pub fn all_match(&self) -> bool {
        self.matched == self.total
    }
}

/// Row-by-row comparison of verdicts with expectations over the same
/// intervals.
pub fn table_report<T: Scalar>(
    verdicts: &[BoundednessVerdict<T>],
    expected: &[ExpectedRow<T>],
) -> Result<TableReport<T>> {
    if verdicts.len() != expected.len() {
        return Err(Error::IntervalMismatch {
            row: verdicts.len().min(expected.len()),
            reason: format!("{} verdicts against {} expected rows", verdicts.len(), expected.len()),
        });
    }
    let close = |a: T, b: T| (a - b).abs() <= T::lit(1e-9) * (T::one() + a.abs());
    let rows = verdicts
        .iter()
        .zip(expected)
        .enumerate()
        .map(|(row, (v, e))| {
            let iv = v.interval;
            let end_ok = if e.end.is_infinite() {
                iv.terminal
            } else {
                close(iv.end, e.end)
            };
            if !close(iv.start, e.start) || !end_ok {
                return Err(Error::IntervalMismatch {
                    row,
                    reason: format!(
                        "verdict covers [{}, {}], expectation covers [{}, {}]",
                        iv.start, iv.end, e.start, e.end
                    ),
                });
            }
            Ok(TableRow {
                start: iv.start,
                end: iv.end,
                expected: e.class,
                observed: v.class,
                matches: v.class == e.class,
                kappa: v.kappa,
                rho: v.rho,
                r: v.r,
                envelope_pass: v.envelope_pass(),
                envelope_margin: v.envelopes.iter().map(|o| o.margin).reduce(T::min),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let matched = rows.iter().filter(|r| r.matches).count();
    Ok(TableReport {
        total: rows.len(),
        matched,
        rows,
    })
}

impl<T: Scalar> fmt::Display for TableReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>8} {:>8}  {:<9} {:<9} {:<5} {:>12} {:>6} {:>11}  {:<8} {:>11}",
            "start", "end", "expected", "observed", "match", "kappa", "rho", "R", "envelope", "margin"
        )?;
        for r in &self.rows {
            let margin = r.envelope_margin.map_or_else(|| "-".to_string(), |m| format!("{m:.3e}"));
            let env = match (r.envelope_margin, r.envelope_pass) {
                (None, _) => "-",
                (Some(_), true) => "pass",
                (Some(_), false) => "FAIL",
            };
            writeln!(
                f,
                "{:>8.4} {:>8.4}  {:<9} {:<9} {:<5} {:>12.4e} {:>6.3} {:>11.3e}  {:<8} {:>11}",
                r.start,
                r.end,
                r.expected.label(),
                r.observed.label(),
                if r.matches { "yes" } else { "NO" },
                r.kappa,
                r.rho,
                r.r,
                env,
                margin
            )?;
        }
        write!(f, "matched {}/{}", self.matched, self.total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::Jump;
    use proptest::prelude::*;

    fn sampled(f: impl Fn(f64) -> f64, dt: f64, end: f64) -> Vec<f64> {
        let n = (end / dt).round() as usize;
        (0..=n).map(|k| f(k as f64 * dt)).collect()
    }

    fn unit() -> Interval<f64> {
        Interval {
            start: 0.0,
            end: 1.0,
            terminal: false,
        }
    }

    #[test]
    fn pure_exponential_is_ieb() {
        let s = sampled(|t| (-10.0 * t).exp(), 1e-3, 1.0);
        let v = classify_interval(&s, 1e-3, &unit(), &Thresholds::default());
        assert_eq!(v.class, BoundednessClass::Ieb);
        assert!((v.kappa - 10.0).abs() < 0.05, "{}", v.kappa);
        assert_eq!(v.r, 0.0);
    }

    #[test]
    fn exponential_with_offset_is_ib() {
        let s = sampled(|t| 0.5 * (-10.0 * t).exp() + 0.3, 1e-3, 1.0);
        let v = classify_interval(&s, 1e-3, &unit(), &Thresholds::default());
        assert_eq!(v.class, BoundednessClass::Ib);
        assert!((v.r - 0.3).abs() < 1e-3, "{}", v.r);
    }

    #[test]
    fn non_finite_is_unbounded() {
        let v = classify_interval(&[1.0, f64::NAN, 0.5], 0.1, &unit(), &Thresholds::default());
        assert_eq!(v.class, BoundednessClass::Unbounded);
        assert!(v.diagnostic.unwrap().contains("0.1"));
    }

    #[test]
    fn rounding_level_error_is_converged() {
        let s = vec![2e-15, 1e-15, 3e-15, 2e-15];
        let v = classify_interval(&s, 0.1, &unit(), &Thresholds::default());
        assert_eq!(v.class, BoundednessClass::Ieb);
        let term = Interval { terminal: true, ..unit() };
        assert_eq!(classify_interval(&s, 0.1, &term, &Thresholds::default()).class, BoundednessClass::Ges);
    }

    #[test]
    fn terminal_offset_is_eub() {
        let s = sampled(|t| (-3.0 * t).exp() + 1e-3, 1e-2, 5.0);
        let term = Interval {
            start: 0.0,
            end: 5.0,
            terminal: true,
        };
        let v = classify_interval(&s, 1e-2, &term, &Thresholds::default());
        assert_eq!(v.class, BoundednessClass::Eub);
        assert!(v.r >= 1e-3);
    }

    fn terminal_envelope(omega: f64) -> Envelope<f64> {
        Envelope {
            kind: EnvelopeKind::Terminal,
            t0: 0.0,
            gamma: Some(1e6),
            omega: Some(omega),
            residual_gain: None,
            drive: None,
        }
    }

    #[test]
    fn half_envelope_passes() {
        let env = Envelope {
            kind: EnvelopeKind::WindowResidual,
            residual_gain: Some(0.5),
            drive: Some(1e-3),
            ..terminal_envelope(0.05)
        };
        // e(t0) is read from the samples, so the residual term is what the
        // halved trajectory stays strictly below.
        let s: Vec<f64> = (0..1000)
            .map(|i| 0.5 * env.eval(i as f64 * 1e-3, 1.0, 0.5).unwrap())
            .collect();
        let out = envelope_check(&s, 1e-3, &env, &EnvelopeTolerance::default()).unwrap();
        assert!(out.pass);
        assert!(out.margin > 0.09, "{}", out.margin);
    }

    #[test]
    fn single_excursion_is_located() {
        let env = terminal_envelope(0.002);
        let mut s: Vec<f64> = (0..1000)
            .map(|i| 0.5 * env.eval(i as f64 * 1e-3, 1.0, 0.5).unwrap())
            .collect();
        s[400] = 1.0;
        let out = envelope_check(&s, 1e-3, &env, &EnvelopeTolerance::default()).unwrap();
        assert!(!out.pass);
        assert!((out.first_violation.unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn missing_parameter_names_the_bound() {
        let env = Envelope {
            kind: EnvelopeKind::WindowResidual,
            drive: None,
            residual_gain: Some(0.5),
            ..terminal_envelope(0.1)
        };
        let err = envelope_check(&[1.0, 0.5], 0.1, &env, &EnvelopeTolerance::default()).unwrap_err();
        assert_eq!(
            err,
            Error::MissingEnvelopeParameter {
                envelope: "window+residual",
                parameter: "omega_1ub"
            }
        );
    }

    fn reference_schedule() -> ParameterSchedule<f64> {
        ParameterSchedule::new(
            vec![1.0],
            vec![
                Jump::new(0.25, vec![0.5]),
                Jump::new(1.05, vec![0.5]),
                Jump::new(1.45, vec![-0.5]),
                Jump::new(2.25, vec![0.5]),
                Jump::new(2.75, vec![-0.5]),
            ],
        )
        .unwrap()
    }

    fn reference_config() -> SimConfig<f64> {
        let mut cfg = SimConfig::new(crate::signals::InputSignal::exp_decay(1.0, 1.0));
        cfg.t_e = 3.5;
        cfg
    }

    #[test]
    fn reference_partition_has_twelve_rows() {
        let iv = partition_intervals(&reference_config(), &reference_schedule());
        let starts: Vec<f64> = iv.iter().map(|i| i.start).collect();
        assert_eq!(
            starts,
            vec![0.0, 0.25, 0.5, 1.0, 1.05, 1.45, 1.5, 2.0, 2.25, 2.5, 2.75, 3.0]
        );
        assert!(iv[11].terminal && iv[11].end == 10.0);
    }

    #[test]
    fn reference_prediction() {
        use BoundednessClass::*;
        let cfg = reference_config();
        let sched = reference_schedule();
        let iv = partition_intervals(&cfg, &sched);
        assert_eq!(
            predict_classes(&cfg, &sched, &iv),
            vec![Ieb, Ib, Ieb, Ieb, Ib, Ib, Ieb, Ieb, Ib, Ieb, Ib, Ges]
        );
    }

    #[test]
    fn jump_after_final_reset_predicts_eub() {
        let cfg = reference_config();
        let sched = ParameterSchedule::new(vec![1.0], vec![Jump::new(3.2, vec![1.0])]).unwrap();
        let iv = partition_intervals(&cfg, &sched);
        assert_eq!(*predict_classes(&cfg, &sched, &iv).last().unwrap(), BoundednessClass::Eub);
    }

    #[test]
    fn empty_table() {
        let r = table_report::<f64>(&[], &[]).unwrap();
        assert_eq!((r.matched, r.total), (0, 0));
        assert!(r.all_match());
    }

    #[test]
    fn table_length_mismatch() {
        let v = classify_interval(&[1.0, 0.01], 0.1, &unit(), &Thresholds::default());
        assert!(matches!(table_report(&[v], &[]), Err(Error::IntervalMismatch { .. })));
    }

    #[test]
    fn table_interval_mismatch() {
        let v = classify_interval(&[1.0, 0.01], 0.1, &unit(), &Thresholds::default());
        let e = ExpectedRow {
            start: 0.0,
            end: 0.5,
            class: BoundednessClass::Ieb,
        };
        assert!(matches!(table_report(&[v], &[e]), Err(Error::IntervalMismatch { row: 0, .. })));
    }

    fn bound_holds(v: &BoundednessVerdict<f64>, s: &[f64], dt: f64, floor: f64) -> bool {
        s.iter().enumerate().all(|(i, &x)| {
            let t = i as f64 * dt;
            let decay = if v.kappa.is_infinite() { 0.0 } else { (-v.kappa * t).exp() };
            x <= v.rho * s[0] * decay * (1.0 + 1e-9) + v.r + floor
        })
    }

    proptest! {
        #[test]
        fn scale_invariant(
            rate in 0.1f64..50.0, offset in 0.0f64..0.5, amp in 0.1f64..2.0, c in 1e-3f64..1e3,
        ) {
            let s = sampled(|t| amp * (-rate * t).exp() + offset, 1e-2, 1.0);
            let scaled: Vec<f64> = s.iter().map(|v| v * c).collect();
            let th = Thresholds::default();
            let th_c = Thresholds { scale: c, ..th };
            let a = classify_interval(&s, 1e-2, &unit(), &th);
            let b = classify_interval(&scaled, 1e-2, &unit(), &th_c);
            prop_assert_eq!(a.class, b.class);
        }

        #[test]
        fn ieb_implies_ib_bound(rate in 0.1f64..50.0, offset in 0.0f64..0.5, amp in 0.1f64..2.0) {
            let s = sampled(|t| amp * (-rate * t).exp() + offset, 1e-2, 1.0);
            let th = Thresholds::default();
            let v = classify_interval(&s, 1e-2, &unit(), &th);
            prop_assert!(bound_holds(&v, &s, 1e-2, th.floor()));
            if v.class == BoundednessClass::Ieb {
                prop_assert!(v.kappa > 0.0);
                prop_assert_eq!(v.r, 0.0);
            }
        }
    }
}
