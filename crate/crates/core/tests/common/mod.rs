//! Shared fixtures for the integration tests (included with `mod common`).
#![allow(dead_code)]

use pwc_ident::{InputSignal, Jump, ParameterSchedule, SimConfig};

pub const AMPLITUDES: [f64; 3] = [1.0, 10.0, 100.0];

pub fn reference_schedule() -> ParameterSchedule<f64> {
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

/// Reference tunables with `u = amplitude·e^{−rate·t}` and `t_e = 3.5`.
pub fn config(amplitude: f64, rate: f64, window: f64) -> SimConfig<f64> {
    let mut cfg = SimConfig::new(InputSignal::exp_decay(amplitude, rate));
    cfg.t_e = 3.5;
    cfg.window = window;
    cfg.sigma = pwc_ident::default_sigma(window);
    cfg
}

/// Root of `g` on `[lo, hi]` by bisection; `g(lo)` and `g(hi)` must differ in sign.
pub fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == (g_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
