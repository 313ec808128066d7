mod common;

use pwc_ident::{
    integrate_system, regressor_first_order, InputSignal, MeasurementNoise, NoiseSpec, ParameterSchedule, TimeGrid,
};

#[test]
fn unit_decay_input_gives_t_exp_minus_t() {
    let w = regressor_first_order(&InputSignal::exp_decay(1.0, 1.0), TimeGrid::new(1e-3, 3000));
    for (n, &v) in w.iter().enumerate().step_by(250) {
        let t = n as f64 * 1e-3;
        assert!((v - t * (-t).exp()).abs() < 1e-6, "t = {t}");
    }
    assert!((w[1000] - (-1.0_f64).exp()).abs() < 1e-6);
}

#[test]
fn regressor_is_linear_in_amplitude() {
    let grid = TimeGrid::new(1e-3, 2000);
    let one = regressor_first_order(&InputSignal::exp_decay(1.0, 1.0), grid);
    let hundred = regressor_first_order(&InputSignal::exp_decay(100.0, 1.0), grid);
    for (&a, &b) in one.iter().zip(&hundred) {
        assert!((100.0_f64 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn fast_decay_input_matches_closed_form() {
    // ω̇ = −ω + e^{−5t}, ω(0) = 0 ⇒ ω = (e^{−t} − e^{−5t})/4.
    let w = regressor_first_order(&InputSignal::exp_decay(1.0, 5.0), TimeGrid::new(1e-4, 30_000));
    let exact = |t: f64| ((-t).exp() - (-5.0 * t).exp()) / 4.0;
    let worst = w
        .iter()
        .enumerate()
        .map(|(n, v)| (v - exact(n as f64 * 1e-4)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn rk4_is_fourth_order() {
    let exact = (-1.0_f64).exp();
    let err = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        let w = regressor_first_order(&InputSignal::exp_decay(1.0, 1.0), TimeGrid::new(dt, steps));
        (w[steps] - exact).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((14.0..18.0).contains(&ratio), "{ratio}");
}

#[test]
fn seeded_runs_are_bit_identical() {
    let mut cfg = common::config(10.0, 1.0, 0.5);
    cfg.t_end = 4.0;
    cfg.noise = MeasurementNoise {
        regressor: Some(NoiseSpec::new(1e-8, 1e-4, 23341)),
        output: Some(NoiseSpec::new(1e-7, 1e-4, 33341)),
    };
    let sched = common::reference_schedule();
    let a = integrate_system(&cfg, &sched).unwrap();
    let b = integrate_system(&cfg, &sched).unwrap();
    assert_eq!(a, b);
}

#[test]
fn noise_has_configured_spread() {
    let v = NoiseSpec::new(1e-8, 1e-4, 23341).held_values(100_000);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((std - 0.01).abs() < 0.02 * 0.01, "{std}");
    assert!(mean.abs() < 5.0 * 0.01 / n.sqrt());
}

#[test]
fn distinct_seeds_are_uncorrelated() {
    let a = NoiseSpec::new(1e-8, 1e-4, 23341).held_values(100_000);
    let b = NoiseSpec::new(1e-8, 1e-4, 33341).held_values(100_000);
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((dot / (na * nb)).abs() < 0.02);
}

#[test]
fn noise_is_held_between_samples() {
    let mut cfg = common::config(1.0, 1.0, 0.5);
    cfg.t_end = 3.5;
    cfg.noise.regressor = Some(NoiseSpec::new(1e-8, 1e-3, 5));
    let sched = ParameterSchedule::constant(vec![1.0]).unwrap();
    let noisy = integrate_system(&cfg, &sched).unwrap();
    cfg.noise.regressor = None;
    let clean = integrate_system(&cfg, &sched).unwrap();
    let w: Vec<f64> = noisy.omega.iter().zip(&clean.omega).map(|(a, b)| a - b).collect();
    for block in w.chunks(10).take(100) {
        assert!(block.iter().all(|v| (v - block[0]).abs() < 1e-15));
    }
}
