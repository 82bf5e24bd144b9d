use basal_bolus::rng::stream;
use basal_bolus::sim::{fasting_equilibrium, fasting_screen, make_cohort, step, Inputs, PatientParams, PatientState};
use proptest::prelude::*;
use rand::Rng;

fn cohort() -> Vec<PatientParams> {
    make_cohort(10, 42).unwrap()
}

fn integrate(mut s: PatientState, p: &PatientParams, u: &Inputs, dt: f64, minutes: f64) -> PatientState {
    let n = (minutes / dt).round() as usize;
    for _ in 0..n {
        s = step(&s, p, u, dt).unwrap();
    }
    s
}

/// Post-meal state with insulin on board: every compartment is moving.
fn busy_state(p: &PatientParams) -> PatientState {
    let (eq, _) = fasting_equilibrium(p);
    PatientState { g: 160.0, x: 0.002, i: p.ib + 15.0, s1: 3.0, s2: 1.5, d1: 40.0, d2: 10.0, ..eq }
}

#[test]
fn fasting_equilibrium_is_a_fixed_point() {
    for p in cohort() {
        let (s0, u) = fasting_equilibrium(&p);
        let s1 = step(&s0, &p, &u, 1.0).unwrap();
        let worst = s0.to_array().iter().zip(s1.to_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }
}

#[test]
fn fasting_day_drifts_less_than_one_mgdl() {
    for p in cohort() {
        let (s0, u) = fasting_equilibrium(&p);
        let end = integrate(s0, &p, &u, 1.0, 1440.0);
        assert!((end.g - p.gb).abs() < 1.0, "drift {}", end.g - p.gb);
        fasting_screen(&p).unwrap();
    }
}

/// Glucose every 4 minutes over four hours, integrated with step `dt`.
fn glucose_path(s: PatientState, p: &PatientParams, u: &Inputs, dt: f64) -> Vec<f64> {
    let mut out = vec![s.g];
    let mut s = s;
    for _ in 0..60 {
        s = integrate(s, p, u, dt, 4.0);
        out.push(s.g);
    }
    out
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn rk4_halving_ratio_is_fourth_order() {
    for p in cohort() {
        let u = Inputs { meal_rate: 2.0, rapid_in: 0.05, ..fasting_equilibrium(&p).1 };
        let s = busy_state(&p);
        let (a, b, c) = (glucose_path(s, &p, &u, 1.0), glucose_path(s, &p, &u, 0.5), glucose_path(s, &p, &u, 0.25));
        let ratio = max_gap(&a, &b) / max_gap(&b, &c);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn compartments_stay_non_negative_under_stress() {
    let cohort = cohort();
    let mut rng = stream(2024, 0);
    for k in 0..10_000 {
        let p = &cohort[k % cohort.len()];
        let s = PatientState {
            g: rng.random_range(0.0..600.0),
            x: rng.random_range(-0.05..0.05),
            i: rng.random_range(0.0..500.0),
            s1: rng.random_range(0.0..30.0),
            s2: rng.random_range(0.0..30.0),
            l1: rng.random_range(0.0..60.0),
            l2: rng.random_range(0.0..60.0),
            d1: rng.random_range(0.0..150.0),
            d2: rng.random_range(0.0..150.0),
            t: 0.0,
        };
        let u =
            Inputs { meal_rate: rng.random_range(0.0..10.0), rapid_in: rng.random_range(0.0..25.0), long_in: rng.random_range(0.0..60.0) };
        let next = step(&s, p, &u, 1.0).unwrap();
        let y = next.to_array();
        assert!(y.iter().enumerate().all(|(j, v)| v.is_finite() && (j == 1 || *v >= 0.0)), "step {k}: {next:?}");
    }
}

#[test]
fn unbolused_meal_raises_glucose_for_an_hour() {
    let base = cohort()[0];
    let p = PatientParams { gb: 125.0, ..base };
    let (eq, _) = fasting_equilibrium(&p);
    let mut s = PatientState { d1: 50.0, ..eq };
    let mut prev = s.g;
    for minute in 0..60 {
        s = step(&s, &p, &Inputs::default(), 1.0).unwrap();
        assert!(s.g > prev, "minute {minute}: {} <= {prev}", s.g);
        prev = s.g;
    }
}

#[test]
fn single_bolus_is_fully_in_the_depot() {
    let p = cohort()[0];
    let (eq, u) = fasting_equilibrium(&p);
    // a 6 U impulse delivered over one minute
    let s = step(&eq, &p, &Inputs { rapid_in: 6.0, ..u }, 1.0).unwrap();
    assert!((s.s1 + s.s2 - 6.0).abs() < 0.1, "{}", s.s1 + s.s2);
    let mut prev = s.s1 + s.s2;
    let mut s = s;
    for _ in 0..300 {
        s = step(&s, &p, &u, 1.0).unwrap();
        assert!(s.s1 + s.s2 <= prev + 1e-12);
        prev = s.s1 + s.s2;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn insulin_lowers_glucose_relative_to_none(units in 1.0..15.0f64, idx in 0usize..10) {
        let p = make_cohort(10, 42).unwrap()[idx];
        let (eq, u) = fasting_equilibrium(&p);
        let mut with = step(&eq, &p, &Inputs { rapid_in: units, ..u }, 1.0).unwrap();
        let mut without = step(&eq, &p, &u, 1.0).unwrap();
        for _ in 0..180 {
            with = step(&with, &p, &u, 1.0).unwrap();
            without = step(&without, &p, &u, 1.0).unwrap();
        }
        prop_assert!(with.g < without.g);
    }
}
