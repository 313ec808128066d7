//! Identification of piecewise-constant parameters in a scalar linear
//! regression `y = ωΘ` under finite excitation.
//!
//! The pipeline normalizes the regressor excitation, filters the normalized
//! regression over resetting windows with exponential forgetting, and drives
//! a gradient estimator from the filtered quantities. Analysis modules check
//! the excitation assumptions and classify the estimation error over each
//! interval of a run.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases name the usual double-precision instantiations.
//!
//! ```
//! use pwc_ident::{integrate_system, InputSignal, Jump, ParameterSchedule, SimConfig};
//!
//! let mut cfg = SimConfig::new(InputSignal::exp_decay(1.0, 1.0));
//! cfg.dt = 1e-3;
//! cfg.t_end = 2.0;
//! cfg.t_e = 2.0;
//! cfg.t_plus = 1.0;
//! let sched = ParameterSchedule::new(vec![1.0], vec![Jump::new(0.25, vec![0.5])])?;
//! let traj = integrate_system(&cfg, &sched)?;
//! assert!(*traj.err_norm.last().unwrap() < 1e-6);
//! # Ok::<(), pwc_ident::Error>(())
//! ```

pub mod error;
pub mod estimator;
pub mod excitation;
pub mod filter;
pub mod normalize;
pub mod scalar;
pub mod signals;
pub mod sim;
pub mod verdict;

pub use error::{Error, Result};
pub use estimator::{estimator_step, EstimatorState};
pub use excitation::{
    analyze_regressor, check_assumptions, detect_transition_times, excitation_level, theoretical_bounds,
    AnalysisOptions, AssumptionFlags, BoundSet, ExcitationReport, JumpBound, PropositionChecks, Transitions,
    WindowBound,
};
pub use filter::{apply_reset, filter_derivatives, FilterState, Regime, ResetPlan};
pub use normalize::{decompose, normalized_regression, DecimalExponent, NormalizationConfig, Normalized};
pub use scalar::Scalar;
pub use signals::{
    band_limited_noise, lre_output, regressor_first_order, schedule_eval, InputSignal, Jump, NoiseSpec,
    ParameterSchedule,
};
pub use sim::{
    default_sigma, estimation_error, event_times, integrate_fixed, integrate_system, MeasurementNoise, ResetRecord,
    SimConfig, TimeGrid, Trajectory,
};
pub use verdict::{
    classify_interval, envelope_check, partition_intervals, predict_classes, table_report, verify_run,
    BoundednessClass, BoundednessVerdict, Envelope, EnvelopeKind, EnvelopeOutcome, EnvelopeTolerance, ExpectedRow,
    Interval, TableReport, TableRow, Thresholds, VerifyOptions,
};

pub type SimConfigF64 = SimConfig<f64>;
pub type ParameterScheduleF64 = ParameterSchedule<f64>;
pub type TrajectoryF64 = Trajectory<f64>;
pub type ExcitationReportF64 = ExcitationReport<f64>;
pub type BoundednessVerdictF64 = BoundednessVerdict<f64>;

pub type SimConfigF32 = SimConfig<f32>;
pub type ParameterScheduleF32 = ParameterSchedule<f32>;
pub type TrajectoryF32 = Trajectory<f32>;
