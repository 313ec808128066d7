//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "exp-a"
//!
//! [simulation]
//! dt = 1e-4
//! t_end = 10.0
//! t_e = 3.5            # optional, defaults to t_end
//!
//! [method]
//! eta_min = -1.0
//! window = 0.5
//! t_plus = 3.0
//! sigma = 5.0          # optional, defaults to 5 / (2 * window)
//! gamma = 1e6
//! theta_hat0 = [0.0]
//!
//! [schedule]
//! theta0 = [1.0]
//! jumps = [[0.25, 0.5], [1.05, 0.5]]   # [time, delta...]
//!
//! [[regressor]]
//! name = "u1"
//! model = "first_order"
//! amplitude = 1.0
//! rate = 1.0
//! output_noise_scale = 1.0             # optional
//!
//! [noise.regressor]                    # optional, also [noise.output]
//! power = 1e-8
//! sample_time = 1e-4
//! seed = 23341
//!
//! [[expected]]                         # optional
//! interval = [0.0, 0.25]
//! class = "IEB"
//!
//! [checks]                             # optional
//! ```

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use pwc_ident::{
    default_sigma, BoundednessClass, Error as CoreError, ExpectedRow, InputSignal, Jump, MeasurementNoise, NoiseSpec,
    ParameterSchedule, SimConfig,
};
use serde::Deserialize;
use toml::Spanned;

/// Configs shipped with the binary, addressable by name.
pub const PRELOADED: &[(&str, &str)] = &[
    ("exp-a", include_str!("../configs/exp-a.toml")),
    ("exp-a-fast", include_str!("../configs/exp-a-fast.toml")),
    ("exp-b", include_str!("../configs/exp-b.toml")),
    ("exp-noise", include_str!("../configs/exp-noise.toml")),
];

pub fn preloaded(name: &str) -> Option<&'static str> {
    PRELOADED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// A configuration error, located at a line of the source when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.origin, line, self.message),
            None => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    simulation: RawSimulation,
    method: RawMethod,
    schedule: RawSchedule,
    regressor: Spanned<Vec<RawRegressor>>,
    noise: Option<RawNoise>,
    #[serde(default)]
    expected: Vec<RawExpected>,
    #[serde(default)]
    checks: Checks,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    dt: Spanned<f64>,
    t_end: Spanned<f64>,
    t_e: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    eta_min: Spanned<f64>,
    window: Spanned<f64>,
    t_plus: Spanned<f64>,
    sigma: Option<Spanned<f64>>,
    gamma: Spanned<f64>,
    theta_hat0: Spanned<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    theta0: Spanned<Vec<f64>>,
    #[serde(default)]
    jumps: Option<Spanned<Vec<Vec<f64>>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegressor {
    name: String,
    model: Spanned<String>,
    amplitude: f64,
    rate: f64,
    output_noise_scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    regressor: Option<RawNoiseSpec>,
    output: Option<RawNoiseSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoiseSpec {
    power: Spanned<f64>,
    sample_time: Spanned<f64>,
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExpected {
    interval: Spanned<Vec<f64>>,
    class: Spanned<String>,
}

/// Pass/fail checks evaluated by `analyze`, `verify` and `reproduce`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// Compare verdicts with the `[[expected]]` rows (default: when present).
    pub table: Option<bool>,
    /// Require every applicable envelope check to pass (noise-free runs).
    #[serde(default = "yes")]
    pub envelopes: bool,
    /// Fail if any interval is classified unbounded.
    #[serde(default = "yes")]
    pub no_unbounded: bool,
    /// Expected `T_j` per regressor with relative tolerances.
    pub transition_times: Option<ValueTolerances>,
    /// Expected onset time of the first regressor.
    pub onset: Option<ValueTolerance>,
    pub assumptions: Option<AssumptionExpectations>,
    /// Fitted IEB rates on the interval starting at `start` agree within
    /// relative `tolerance` across regressors.
    pub kappa_agreement: Option<KappaAgreement>,
    /// `‖Θ̃‖` nonincreasing from `from` on and at most `max` at `at`.
    pub terminal: Option<TerminalCheck>,
    /// `sup ‖Θ̃‖` over `[start, end]` at most `bound` for every regressor.
    pub max_error: Option<MaxError>,
    /// Strictly more IEB intervals than the named (or relative-path) config,
    /// per regressor.
    pub more_ieb_than: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct ValueTolerances {
    pub values: Vec<f64>,
    pub rel_tol: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct ValueTolerance {
    pub value: f64,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionExpectations {
    pub assumption1: Option<bool>,
    pub assumption2: Option<bool>,
    pub assumption3: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct KappaAgreement {
    pub start: f64,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalCheck {
    pub from: f64,
    pub at: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct MaxError {
    pub start: f64,
    pub end: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSpec {
    pub name: String,
    pub input: InputSignal<f64>,
    pub output_noise_scale: f64,
}

/// Fully validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    /// Shared tunables; `regressor` and the output noise scale are filled in
    /// per regressor by [`Experiment::configs`].
    pub base: SimConfig<f64>,
    pub schedule: ParameterSchedule<f64>,
    pub regressors: Vec<RegressorSpec>,
    pub expected: Vec<ExpectedRow<f64>>,
    pub checks: Checks,
    /// Directory for resolving relative references; `None` for preloaded configs.
    pub base_dir: Option<PathBuf>,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    /// Regressor noise uses `seed`, output noise `seed + 10000`.
    pub seed: Option<u64>,
}

impl Experiment {
    pub fn from_path(path: &Path, overrides: Overrides) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            origin: origin.clone(),
            line: None,
            message: e.to_string(),
        })?;
        let mut exp = Self::parse(&text, &origin, overrides)?;
        exp.base_dir = path.parent().map(Path::to_path_buf);
        Ok(exp)
    }

    pub fn preloaded(name: &str, overrides: Overrides) -> Result<Self, ConfigError> {
        let text = preloaded(name).ok_or_else(|| ConfigError {
            origin: name.to_string(),
            line: None,
            message: format!(
                "unknown experiment; available: {}",
                PRELOADED.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            ),
        })?;
        Self::parse(text, name, overrides)
    }

    pub fn parse(text: &str, origin: &str, overrides: Overrides) -> Result<Self, ConfigError> {
        let line_of = |span: Range<usize>| text[..span.start.min(text.len())].matches('\n').count() + 1;
        let fail = |span: Option<Range<usize>>, message: String| ConfigError {
            origin: origin.to_string(),
            line: span.map(line_of),
            message,
        };
        let raw: RawConfig = toml::from_str(text).map_err(|e| fail(e.span(), e.message().to_string()))?;

        let mut spans: HashMap<&'static str, Range<usize>> = HashMap::new();
        let mut take = |key: &'static str, v: &Spanned<f64>| {
            spans.insert(key, v.span());
            *v.get_ref()
        };
        let dt = take("dt", &raw.simulation.dt);
        let t_end = take("t_end", &raw.simulation.t_end);
        let t_e = raw.simulation.t_e.as_ref().map_or(t_end, |v| take("t_e", v));
        let eta_min = take("eta_min", &raw.method.eta_min);
        let window = take("window", &raw.method.window);
        let t_plus = take("t_plus", &raw.method.t_plus);
        let gamma = take("gamma", &raw.method.gamma);
        let sigma = raw
            .method
            .sigma
            .as_ref()
            .map_or_else(|| default_sigma(window), |v| take("sigma", v));
        spans.insert("theta_hat0", raw.method.theta_hat0.span());

        let noise_spec = |raw: &Option<RawNoiseSpec>, seed: Option<u64>, spans: &mut HashMap<_, _>| {
            raw.as_ref().map(|n| {
                spans.insert("noise.sample_time", n.sample_time.span());
                spans.insert("noise.power", n.power.span());
                NoiseSpec::new(*n.power.get_ref(), *n.sample_time.get_ref(), seed.unwrap_or(n.seed))
            })
        };
        let noise = match &raw.noise {
            None => MeasurementNoise::none(),
            Some(n) => MeasurementNoise {
                regressor: noise_spec(&n.regressor, overrides.seed, &mut spans),
                output: noise_spec(&n.output, overrides.seed.map(|s| s.wrapping_add(10_000)), &mut spans),
            },
        };

        let regressors = raw
            .regressor
            .get_ref()
            .iter()
            .map(|r| {
                if r.model.get_ref() != "first_order" {
                    return Err(fail(
                        Some(r.model.span()),
                        format!("unsupported regressor model `{}` (expected `first_order`)", r.model.get_ref()),
                    ));
                }
                Ok(RegressorSpec {
                    name: r.name.clone(),
                    input: InputSignal::exp_decay(r.amplitude, r.rate),
                    output_noise_scale: r.output_noise_scale.unwrap_or(1.0),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if regressors.is_empty() {
            return Err(fail(Some(raw.regressor.span()), "at least one [[regressor]] is required".into()));
        }
        let mut names: Vec<&str> = regressors.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(fail(Some(raw.regressor.span()), "regressor names must be unique".into()));
        }

        let jump_span = raw.schedule.jumps.as_ref().map(|j| j.span());
        let jumps = raw
            .schedule
            .jumps
            .as_ref()
            .map(|j| j.get_ref().as_slice())
            .unwrap_or_default()
            .iter()
            .map(|row| match row.split_first() {
                Some((&time, delta)) if !delta.is_empty() => Ok(Jump::new(time, delta.to_vec())),
                _ => Err(fail(jump_span.clone(), "each jump must be [time, delta...]".into())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let schedule = ParameterSchedule::new(raw.schedule.theta0.get_ref().clone(), jumps)
            .map_err(|e| fail(jump_span.clone().or(Some(raw.schedule.theta0.span())), e.to_string()))?;

        let mut base = SimConfig::new(regressors[0].input.clone());
        base.dt = overrides.dt.unwrap_or(dt);
        base.t_end = t_end;
        base.t_e = t_e;
        base.window = window;
        base.t_plus = t_plus;
        base.sigma = sigma;
        base.gamma = gamma;
        base.eta_min = eta_min;
        base.theta_hat0 = raw.method.theta_hat0.get_ref().clone();
        base.noise = noise;

        let core_error = |e: CoreError| match &e {
            CoreError::InvalidConfig { field, .. } => {
                let key = if *field == "dt" && overrides.dt.is_some() {
                    None
                } else {
                    spans.get(field).cloned()
                };
                fail(key, e.to_string())
            }
            CoreError::InvalidSchedule(_) => fail(jump_span.clone(), e.to_string()),
            _ => fail(None, e.to_string()),
        };
        base.validate().map_err(core_error)?;
        base.validate_schedule(&schedule).map_err(core_error)?;
        for r in &regressors {
            r.input.validate().map_err(|e| fail(Some(raw.regressor.span()), e.to_string()))?;
        }

        let expected = raw
            .expected
            .iter()
            .map(|row| {
                let iv = row.interval.get_ref();
                if iv.len() != 2 || !(iv[0] < iv[1]) {
                    return Err(fail(Some(row.interval.span()), "interval must be [start, end] with start < end".into()));
                }
                let class = BoundednessClass::parse(row.class.get_ref()).ok_or_else(|| {
                    fail(
                        Some(row.class.span()),
                        format!("unknown class `{}` (IB, IEB, GES, EUB)", row.class.get_ref()),
                    )
                })?;
                Ok(ExpectedRow {
                    start: iv[0],
                    end: iv[1],
                    class,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Self {
            name: raw.name.unwrap_or_else(|| origin.to_string()),
            base,
            schedule,
            regressors,
            expected,
            checks: raw.checks,
            base_dir: None,
        })
    }

    /// One simulation config per regressor.
    pub fn configs(&self) -> Vec<SimConfig<f64>> {
        self.regressors
            .iter()
            .map(|r| {
                let mut cfg = self.base.clone();
                cfg.regressor = r.input.clone();
                if let Some(out) = cfg.noise.output.take() {
                    cfg.noise.output = Some(out.clone().with_scale(out.scale * r.output_noise_scale));
                }
                cfg
            })
            .collect()
    }

    /// Resolves a reference to another experiment: a preloaded name, or a
    /// path relative to this config's directory.
    pub fn resolve(&self, reference: &str, overrides: Overrides) -> Result<Self, ConfigError> {
        if preloaded(reference).is_some() {
            return Self::preloaded(reference, overrides);
        }
        let path = match &self.base_dir {
            Some(dir) => dir.join(reference),
            None => PathBuf::from(reference),
        };
        Self::from_path(&path, overrides)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preloaded_configs_parse() {
        for (name, _) in PRELOADED {
            let exp = Experiment::preloaded(name, Overrides::default()).unwrap();
            assert_eq!(exp.regressors.len(), 3, "{name}");
            assert_eq!(exp.name, *name);
        }
    }

    #[test]
    fn sigma_defaults_from_window() {
        let exp = Experiment::preloaded("exp-a-fast", Overrides::default()).unwrap();
        assert!((exp.base.sigma - 50.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_apply() {
        let exp = Experiment::preloaded(
            "exp-noise",
            Overrides {
                dt: Some(5e-5),
                seed: Some(7),
            },
        )
        .unwrap();
        assert_eq!(exp.base.dt, 5e-5);
        assert_eq!(exp.base.noise.regressor.as_ref().unwrap().seed, 7);
        assert_eq!(exp.base.noise.output.as_ref().unwrap().seed, 10_007);
    }

    #[test]
    fn output_noise_scales_per_regressor() {
        let exp = Experiment::preloaded("exp-noise", Overrides::default()).unwrap();
        let scales: Vec<f64> = exp
            .configs()
            .iter()
            .map(|c| c.noise.output.as_ref().unwrap().scale)
            .collect();
        assert_eq!(scales, vec![1.0, 10.0, 100.0]);
    }

    fn minimal(extra_method: &str) -> String {
        format!(
            "[simulation]\ndt = 1e-3\nt_end = 2.0\n\n[method]\neta_min = -1.0\nwindow = 0.5\nt_plus = 1.0\ngamma = 1e6\ntheta_hat0 = [0.0]\n{extra_method}\n[schedule]\ntheta0 = [1.0]\n\n[[regressor]]\nname = \"u\"\nmodel = \"first_order\"\namplitude = 1.0\nrate = 1.0\n"
        )
    }

    #[test]
    fn minimal_config_parses() {
        let exp = Experiment::parse(&minimal(""), "mem", Overrides::default()).unwrap();
        assert_eq!(exp.base.t_e, 2.0);
        assert!(exp.expected.is_empty());
    }

    #[test]
    fn invariant_violation_points_at_line() {
        let text = minimal("").replace("window = 0.5", "window = 0.0005005");
        let err = Experiment::parse(&text, "mem", Overrides::default()).unwrap_err();
        assert_eq!(err.line, Some(7), "{err}");
        assert!(err.to_string().contains("window"));
    }

    #[test]
    fn syntax_error_points_at_line() {
        let text = minimal("").replace("gamma = 1e6", "gamma = ");
        let err = Experiment::parse(&text, "mem", Overrides::default()).unwrap_err();
        assert_eq!(err.line, Some(9), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = Experiment::parse(&minimal("bogus = 1"), "mem", Overrides::default()).unwrap_err();
        assert!(err.message.contains("bogus"), "{err}");
    }

    #[test]
    fn unknown_model_is_rejected() {
        let text = minimal("").replace("first_order", "second_order");
        let err = Experiment::parse(&text, "mem", Overrides::default()).unwrap_err();
        assert!(err.message.contains("second_order"));
        assert_eq!(err.line, Some(17));
    }
}
