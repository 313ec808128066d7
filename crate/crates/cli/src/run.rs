//! Experiment execution: simulation, analysis, verification and checks.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use pwc_ident::{
    analyze_regressor, check_assumptions, integrate_system, partition_intervals, predict_classes, table_report,
    theoretical_bounds, verify_run, AnalysisOptions, AssumptionFlags, BoundSet, BoundednessClass, BoundednessVerdict,
    ExcitationReport, ExpectedRow, Regime, SimConfig, TableReport, Trajectory, VerifyOptions,
};
use serde::Serialize;

use crate::config::{Experiment, Overrides};

/// One simulated regressor of an experiment.
#[derive(Debug, Clone)]
pub struct RegressorRun {
    pub name: String,
    pub config: SimConfig<f64>,
    pub trajectory: Trajectory<f64>,
}

/// Simulates every regressor of the experiment, one thread each.
pub fn simulate(exp: &Experiment) -> Result<Vec<RegressorRun>> {
    let configs = exp.configs();
    std::thread::scope(|scope| {
        let handles: Vec<_> = exp
            .regressors
            .iter()
            .zip(configs)
            .map(|(spec, config)| {
                scope.spawn(move || {
                    let trajectory = integrate_system(&config, &exp.schedule)
                        .with_context(|| format!("simulation of regressor `{}` failed", spec.name))?;
                    Ok(RegressorRun {
                        name: spec.name.clone(),
                        config,
                        trajectory,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| anyhow!("simulation thread panicked"))?)
            .collect()
    })
}

pub const CSV_PRECISION: usize = 16;

/// CSV header for a parameter vector of dimension `dim`.
pub fn csv_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "omega", "eta", "phi", "Omega"].iter().map(|s| s.to_string()).collect();
    for prefix in ["Yf", "theta_hat", "theta_true"] {
        h.extend((1..=dim).map(|i| format!("{prefix}{i}")));
    }
    h.push("err_norm".into());
    h
}

fn fmt_value(v: f64) -> String {
    format!("{v:.CSV_PRECISION$e}")
}

/// Writes one trajectory as `<dir>/<name>.csv`.
pub fn write_csv(dir: &Path, run: &RegressorRun) -> Result<PathBuf> {
    let path = dir.join(format!("{}.csv", run.name));
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot create {}", path.display()))?;
    let traj = &run.trajectory;
    w.write_record(csv_header(traj.dim()))?;
    let mut row = Vec::with_capacity(6 + 3 * traj.dim());
    for n in 0..traj.len() {
        row.clear();
        row.extend([traj.t[n], traj.omega[n], traj.eta[n], traj.phi[n], traj.omega_filt[n]].map(fmt_value));
        for channel in [&traj.y_filt, &traj.theta_hat, &traj.theta] {
            row.extend(channel.iter().map(|c| fmt_value(c[n])));
        }
        row.push(fmt_value(traj.err_norm[n]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedReport {
    pub name: String,
    pub report: ExcitationReport<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub experiment: String,
    pub t_plus: f64,
    pub regressors: Vec<NamedReport>,
    pub assumptions: AssumptionFlags<f64>,
    pub bounds: BoundSet<f64>,
}

pub fn analyze(exp: &Experiment, runs: &[RegressorRun]) -> Result<Analysis> {
    let opts = AnalysisOptions::default();
    let regressors = runs
        .iter()
        .map(|r| {
            let report = analyze_regressor(&r.config, &exp.schedule, &r.trajectory, &opts)
                .with_context(|| format!("analysis of regressor `{}` failed", r.name))?;
            Ok(NamedReport {
                name: r.name.clone(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<_> = regressors.iter().map(|r| r.report.clone()).collect();
    Ok(Analysis {
        experiment: exp.name.clone(),
        t_plus: exp.base.t_plus,
        assumptions: check_assumptions(&exp.base, &reports),
        bounds: theoretical_bounds(&exp.base, &reports),
        regressors,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment {}", self.experiment)?;
        writeln!(
            f,
            "{:<10} {:>9} {:>9} {:>8} {:>11} {:>11} {:>11} {:>11} {:>4} {:>4}",
            "regressor", "t_start", "T_j", "persists", "alpha", "alpha_post", "delta_post", "Omega_LB", "A1", "A2"
        )?;
        for r in &self.regressors {
            let tr = r.report.transitions.as_ref();
            writeln!(
                f,
                "{:<10} {:>9} {:>9} {:>8} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>4} {:>4}",
                r.name,
                opt(tr.map(|t| t.t_start)),
                opt(tr.map(|t| t.t_final)),
                tr.map_or("-", |t| if t.persists_to_end { "yes" } else { "no" }),
                r.report.alpha,
                r.report.alpha_post,
                r.report.delta_post,
                r.report.omega_lb,
                r.report.assumption1_ok,
                r.report.assumption2_ok,
            )?;
        }
        let a = &self.assumptions;
        writeln!(f, "assumption1 {}", a.assumption1_ok)?;
        writeln!(f, "assumption2 {}", a.assumption2_ok)?;
        writeln!(
            f,
            "assumption3 {} (T+ = {}, min T_j = {})",
            a.assumption3_ok,
            self.t_plus,
            opt(a.min_t_final)
        )?;
        let b = &self.bounds;
        writeln!(
            f,
            "bounds Omega_UB = {:.6e}, alpha_min = {:.6e}, Omega_bar_LB = {:.6e} (premise {}), Omega_LB = {:.6e}, degenerate = {}",
            b.omega_ub, b.alpha_min, b.omega_bar_lb, b.omega_bar_lb_valid, b.omega_lb_uniform, b.degenerate
        )?;
        for r in &self.regressors {
            let p = &r.report.propositions;
            writeln!(
                f,
                "regressor {}: phi in [0,1] {}, phi energy bounded {}, window floors reached {}, terminal Omega bounds {}",
                r.name, p.phi_in_unit_interval, p.phi_energy_bounded, p.window_floors_reached, p.terminal_bounds_hold
            )?;
            writeln!(
                f,
                "  {:>8} {:>8} {:>11} {:>11} {:>9} {:>11} {:>5}",
                "start", "end", "level", "floor", "T0k", "Omega_end", "ok"
            )?;
            for w in &r.report.windows {
                writeln!(
                    f,
                    "  {:>8.4} {:>8.4} {:>11.4e} {:>11.4e} {:>9} {:>11.4e} {:>5}",
                    w.start,
                    w.end,
                    w.level,
                    w.floor,
                    opt(w.t_floor),
                    w.omega_end,
                    w.floor_ok
                )?;
            }
            for j in &r.report.jumps {
                let regime = match j.regime {
                    Regime::Windowed => "windowed",
                    Regime::PostFinal => "post-final",
                };
                writeln!(
                    f,
                    "  jump t = {:.4}, |delta| = {:.4}, Omega_1UB = {:.6e} ({regime})",
                    j.time, j.delta_norm, j.omega_1ub
                )?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressorVerdicts {
    pub name: String,
    pub verdicts: Vec<BoundednessVerdict<f64>>,
    /// `"expected"` when compared with the config's rows, `"prediction"`
    /// otherwise.
    pub compared_with: &'static str,
    pub table: TableReport<f64>,
    pub ieb_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub experiment: String,
    pub regressors: Vec<RegressorVerdicts>,
}

pub fn verify(exp: &Experiment, runs: &[RegressorRun], analysis: &Analysis) -> Result<Verification> {
    let opts = VerifyOptions::for_schedule(&exp.schedule);
    let regressors = runs
        .iter()
        .zip(&analysis.regressors)
        .map(|(run, named)| {
            let verdicts = verify_run(
                &run.config,
                &exp.schedule,
                &run.trajectory,
                &named.report,
                &analysis.bounds,
                &opts,
            )
            .with_context(|| format!("verification of regressor `{}` failed", run.name))?;
            let (expected, compared_with) = if exp.expected.is_empty() {
                let intervals = partition_intervals(&run.config, &exp.schedule);
                let rows = predict_classes(&run.config, &exp.schedule, &intervals)
                    .into_iter()
                    .zip(&intervals)
                    .map(|(class, iv)| ExpectedRow {
                        start: iv.start,
                        end: iv.end,
                        class,
                    })
                    .collect();
                (rows, "prediction")
            } else {
                (exp.expected.clone(), "expected")
            };
            let table = table_report(&verdicts, &expected).with_context(|| format!("regressor `{}`", run.name))?;
            Ok(RegressorVerdicts {
                name: run.name.clone(),
                ieb_count: verdicts.iter().filter(|v| v.class == BoundednessClass::Ieb).count(),
                verdicts,
                compared_with,
                table,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Verification {
        experiment: exp.name.clone(),
        regressors,
    })
}

impl fmt::Display for Verification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment {}", self.experiment)?;
        for r in &self.regressors {
            writeln!(f, "regressor {} (compared with {})", r.name, r.compared_with)?;
            writeln!(f, "{}", r.table)?;
            writeln!(f, "IEB intervals {}", r.ieb_count)?;
            for v in &r.verdicts {
                if let Some(d) = &v.diagnostic {
                    writeln!(f, "  [{}, {}]: {d}", v.interval.start, v.interval.end)?;
                }
                for e in v.envelopes.iter().filter(|e| !e.pass) {
                    writeln!(
                        f,
                        "  envelope {} on [{}, {}] violated first at t = {}",
                        e.kind.label(),
                        v.interval.start,
                        v.interval.end,
                        opt(e.first_violation)
                    )?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn within(value: f64, target: f64, rel_tol: f64) -> bool {
    (value - target).abs() <= rel_tol * target.abs()
}

/// Checks that only need the excitation analysis.
pub fn analysis_checks(exp: &Experiment, analysis: &Analysis) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let checks = &exp.checks;
    if let Some(tt) = &checks.transition_times {
        for (i, r) in analysis.regressors.iter().enumerate() {
            let (Some(&target), Some(&tol)) = (tt.values.get(i), tt.rel_tol.get(i)) else {
                out.push(CheckOutcome::new(
                    format!("transition time {}", r.name),
                    false,
                    "no expected value configured",
                ));
                continue;
            };
            let found = r.report.transitions.as_ref().map(|t| t.t_final);
            out.push(CheckOutcome::new(
                format!("transition time {}", r.name),
                found.is_some_and(|v| within(v, target, tol)),
                format!("T_j = {} (expected {target} within {}%)", opt(found), tol * 100.0),
            ));
        }
    }
    if let Some(onset) = &checks.onset {
        // Latest rise: every regressor is above the floor from then on.
        let found = analysis
            .regressors
            .iter()
            .map(|r| r.report.transitions.as_ref().map(|t| t.t_start))
            .try_fold(f64::NEG_INFINITY, |acc, t| t.map(|t| acc.max(t)));
        out.push(CheckOutcome::new(
            "onset",
            found.is_some_and(|v| within(v, onset.value, onset.rel_tol)),
            format!(
                "t_start = {} (expected {} within {}%)",
                opt(found),
                onset.value,
                onset.rel_tol * 100.0
            ),
        ));
    }
    if let Some(a) = &checks.assumptions {
        let flags = &analysis.assumptions;
        for (name, expected, actual) in [
            ("assumption1", a.assumption1, flags.assumption1_ok),
            ("assumption2", a.assumption2, flags.assumption2_ok),
            ("assumption3", a.assumption3, flags.assumption3_ok),
        ] {
            if let Some(expected) = expected {
                out.push(CheckOutcome::new(
                    name,
                    expected == actual,
                    format!("{actual} (expected {expected})"),
                ));
            }
        }
    }
    out
}

/// Runtime invariants of one trajectory: `φ ∈ [0, 1]`, `0 ≤ Ω ≤ T` before
/// the final reset and `Ω ≤ 1/σ` after it, `Θ̂` frozen while `Ω = 0`.
pub fn invariant_check(run: &RegressorRun) -> CheckOutcome {
    let traj = &run.trajectory;
    let cfg = &run.config;
    let plus = cfg.steps_of(cfg.t_plus);
    let slack = 1.0 + 1e-12;
    let mut problems = Vec::new();
    if let Some(n) = traj.phi.iter().position(|p| !(0.0..=1.0).contains(p)) {
        problems.push(format!("phi outside [0, 1] at t = {}", traj.t[n]));
    }
    if let Some(n) = traj.omega_filt.iter().position(|o| *o < 0.0) {
        problems.push(format!("Omega negative at t = {}", traj.t[n]));
    }
    let over = traj.omega_filt.iter().enumerate().position(|(n, &o)| {
        let ub = if n < plus { cfg.window } else { 1.0 / cfg.sigma };
        o > ub * slack
    });
    if let Some(n) = over {
        problems.push(format!("Omega above its regime bound at t = {}", traj.t[n]));
    }
    let moved = (0..traj.len().saturating_sub(1))
        .find(|&n| traj.omega_filt[n] == 0.0 && traj.theta_hat.iter().any(|c| c[n + 1] != c[n]));
    if let Some(n) = moved {
        problems.push(format!("estimate moved while Omega = 0 at t = {}", traj.t[n]));
    }
    CheckOutcome::new(
        format!("invariants {}", run.name),
        problems.is_empty(),
        if problems.is_empty() {
            "phi in [0, 1], Omega within bounds, estimate frozen at Omega = 0".to_string()
        } else {
            problems.join("; ")
        },
    )
}

/// Checks on the verdicts and error trajectories.
pub fn verification_checks(
    exp: &Experiment,
    runs: &[RegressorRun],
    verification: &Verification,
    overrides: Overrides,
) -> Result<Vec<CheckOutcome>> {
    let checks = &exp.checks;
    let mut out: Vec<CheckOutcome> = runs.iter().map(invariant_check).collect();

    if checks.table.unwrap_or(!exp.expected.is_empty()) {
        for r in &verification.regressors {
            out.push(CheckOutcome::new(
                format!("table {}", r.name),
                r.table.all_match(),
                format!("{}/{} intervals match", r.table.matched, r.table.total),
            ));
        }
    }
    if checks.envelopes && exp.base.noise.is_noise_free() {
        for r in &verification.regressors {
            let outcomes: Vec<_> = r.verdicts.iter().flat_map(|v| &v.envelopes).collect();
            let failed = outcomes.iter().filter(|o| !o.pass).count();
            let strong = outcomes.iter().filter(|o| o.strong_pass).count();
            out.push(CheckOutcome::new(
                format!("envelopes {}", r.name),
                failed == 0,
                format!(
                    "{}/{} envelope checks pass ({} also pass with the full exponent)",
                    outcomes.len() - failed,
                    outcomes.len(),
                    strong
                ),
            ));
        }
    }
    if checks.no_unbounded {
        for r in &verification.regressors {
            let bad = r
                .verdicts
                .iter()
                .filter(|v| v.class == BoundednessClass::Unbounded)
                .count();
            out.push(CheckOutcome::new(
                format!("bounded {}", r.name),
                bad == 0,
                format!("{bad} unbounded intervals"),
            ));
        }
    }
    if let Some(k) = &checks.kappa_agreement {
        let rates: Vec<Option<f64>> = verification
            .regressors
            .iter()
            .map(|r| {
                r.verdicts
                    .iter()
                    .find(|v| (v.interval.start - k.start).abs() < 1e-9 && v.class == BoundednessClass::Ieb)
                    .map(|v| v.kappa)
                    .filter(|k| k.is_finite())
            })
            .collect();
        let found: Vec<f64> = rates.iter().flatten().copied().collect();
        let pass = found.len() == rates.len() && !found.is_empty() && {
            let lo = found.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = found.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (hi - lo) <= k.rel_tol * lo
        };
        out.push(CheckOutcome::new(
            "kappa agreement",
            pass,
            format!(
                "IEB rates on the interval from {}: [{}] (within {}%)",
                k.start,
                rates.iter().map(|r| opt(*r)).collect::<Vec<_>>().join(", "),
                k.rel_tol * 100.0
            ),
        ));
    }
    if let Some(tc) = &checks.terminal {
        for run in runs {
            let traj = &run.trajectory;
            let from = traj.index_of(tc.from).context("terminal.from outside the grid")?;
            let at = traj.index_of(tc.at).context("terminal.at outside the grid")?;
            // Rises below the rounding resolution of ‖Θ̂ − Θ‖ are not counted.
            let theta_norm = traj.theta.iter().map(|c| c[from].powi(2)).sum::<f64>().sqrt();
            let resolution = 16.0 * f64::EPSILON * theta_norm;
            let rising = (from..traj.len() - 1).find(|&n| traj.err_norm[n + 1] > traj.err_norm[n] + resolution);
            let value = traj.err_norm[at];
            out.push(CheckOutcome::new(
                format!("terminal {}", run.name),
                rising.is_none() && value <= tc.max,
                format!(
                    "error nonincreasing from t = {}: {}; error at t = {}: {value:.3e} (max {:.1e})",
                    tc.from,
                    rising.map_or_else(|| "yes".to_string(), |n| format!("no, rises at t = {}", traj.t[n])),
                    tc.at,
                    tc.max
                ),
            ));
        }
    }
    if let Some(m) = &checks.max_error {
        for run in runs {
            let traj = &run.trajectory;
            let i0 = traj.index_of(m.start).context("max_error.start outside the grid")?;
            let i1 = traj.index_of(m.end).context("max_error.end outside the grid")?;
            let sup = traj.err_norm[i0..=i1].iter().copied().fold(0.0, f64::max);
            out.push(CheckOutcome::new(
                format!("max error {}", run.name),
                sup <= m.bound,
                format!("sup on [{}, {}] = {sup:.4} (bound {})", m.start, m.end, m.bound),
            ));
        }
    }
    if let Some(reference) = &checks.more_ieb_than {
        let base = exp.resolve(reference, overrides).map_err(|e| anyhow!("{e}"))?;
        let base_runs = simulate(&base)?;
        let base_analysis = analyze(&base, &base_runs)?;
        let base_verification = verify(&base, &base_runs, &base_analysis)?;
        for (r, b) in verification.regressors.iter().zip(&base_verification.regressors) {
            out.push(CheckOutcome::new(
                format!("more IEB intervals {}", r.name),
                r.ieb_count > b.ieb_count,
                format!("{} IEB intervals against {} in {}", r.ieb_count, b.ieb_count, base.name),
            ));
        }
    }
    Ok(out)
}

/// Writes `text` and `json` renderings of a report under `dir`.
pub fn write_report<R: fmt::Display + Serialize>(dir: &Path, stem: &str, report: &R) -> Result<()> {
    let txt = dir.join(format!("{stem}.txt"));
    fs::write(&txt, format!("{report}\n")).with_context(|| format!("cannot write {}", txt.display()))?;
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, serde_json::to_string_pretty(report)?).with_context(|| format!("cannot write {}", json.display()))?;
    Ok(())
}

/// Check outcomes as a report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckList {
    pub checks: Vec<CheckOutcome>,
    pub all_pass: bool,
}

impl CheckList {
    pub fn new(checks: Vec<CheckOutcome>) -> Self {
        Self {
            all_pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

impl fmt::Display for CheckList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        write!(f, "{passed}/{} checks pass", self.checks.len())
    }
}
