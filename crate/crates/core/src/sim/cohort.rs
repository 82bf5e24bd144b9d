//! Seeded synthetic virtual-patient cohort.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{fasting_equilibrium, step, PatientParams};
use crate::error::{ensure, Error, Result};
use crate::rng::{self, streams};
use crate::MINUTES_PER_DAY;

/// Uniform sampling ranges, `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortRanges {
    pub body_weight: (f64, f64),
    pub gb: (f64, f64),
    pub p1: (f64, f64),
    pub p2: (f64, f64),
    pub p3: (f64, f64),
    pub n_clr: (f64, f64),
    pub t_max_rapid: (f64, f64),
    pub t_max_long: (f64, f64),
    pub t_max_gut: (f64, f64),
    pub f_carb: (f64, f64),
    pub vg: (f64, f64),
    pub vi: (f64, f64),
    /// Daily long-acting insulin that holds plasma insulin at Ib, U/kg/day.
    /// Ib itself is derived from this draw.
    pub basal_requirement: (f64, f64),
}

impl Default for CohortRanges {
    fn default() -> Self {
        Self {
            body_weight: (55.0, 95.0),
            gb: (110.0, 140.0),
            p1: (0.01, 0.03),
            p2: (0.01, 0.03),
            p3: (1e-5, 5e-5),
            n_clr: (0.1, 0.2),
            t_max_rapid: (40.0, 70.0),
            t_max_long: (500.0, 800.0),
            t_max_gut: (30.0, 60.0),
            f_carb: (0.8, 0.95),
            vg: (1.4, 1.8),
            vi: (110.0, 130.0),
            basal_requirement: (0.25, 0.5),
        }
    }
}

/// Maximum |G − Gb| tolerated over the 24 h fasting screen, mg/dL.
pub const SCREEN_TOLERANCE: f64 = 5.0;
const MAX_ATTEMPTS_PER_PATIENT: usize = 100;

pub fn sample_patient<R: Rng>(rng: &mut R, ranges: &CohortRanges) -> PatientParams {
    let mut u = |(lo, hi): (f64, f64)| rng.random_range(lo..hi);
    let body_weight = u(ranges.body_weight);
    let gb = u(ranges.gb);
    let p1 = u(ranges.p1);
    let p2 = u(ranges.p2);
    let p3 = u(ranges.p3);
    let n_clr = u(ranges.n_clr);
    let t_max_rapid = u(ranges.t_max_rapid);
    let t_max_long = u(ranges.t_max_long);
    let t_max_gut = u(ranges.t_max_gut);
    let f_carb = u(ranges.f_carb);
    let vg = u(ranges.vg);
    let vi = u(ranges.vi);
    let requirement = u(ranges.basal_requirement);
    // U/day -> steady plasma insulin
    let ib = requirement * body_weight / MINUTES_PER_DAY as f64 * 1e6 / (n_clr * vi * body_weight);
    PatientParams { body_weight, gb, ib, p1, p2, p3, n_clr, t_max_rapid, t_max_long, t_max_gut, f_carb, vg, vi, sensitivity_factor: 1.0 }
}

/// Simulates 24 h of fasting under the maintenance basal infusion and checks
/// that glucose stays within [`SCREEN_TOLERANCE`] of Gb.
pub fn fasting_screen(params: &PatientParams) -> Result<()> {
    params.validate()?;
    ensure((90.0..=160.0).contains(&params.gb), || format!("Gb {} outside [90, 160]", params.gb))?;
    let (mut state, inputs) = fasting_equilibrium(params);
    for _ in 0..MINUTES_PER_DAY {
        state = step(&state, params, &inputs, 1.0)?;
        let drift = (state.g - params.gb).abs();
        if drift >= SCREEN_TOLERANCE {
            return Err(Error::Screen(format!("fasting drift {drift:.3} mg/dL at t = {} min", state.t)));
        }
    }
    Ok(())
}

pub fn make_cohort(n: usize, seed: u64) -> Result<Vec<PatientParams>> {
    make_cohort_with(n, seed, &CohortRanges::default())
}

pub fn make_cohort_with(n: usize, seed: u64, ranges: &CohortRanges) -> Result<Vec<PatientParams>> {
    ensure(n >= 1, || "cohort size must be >= 1".into())?;
    let mut rng = rng::stream(seed, streams::COHORT);
    let mut cohort = Vec::with_capacity(n);
    for k in 0..n {
        let mut last_err = None;
        for _ in 0..MAX_ATTEMPTS_PER_PATIENT {
            let p = sample_patient(&mut rng, ranges);
            match fasting_screen(&p) {
                Ok(()) => {
                    cohort.push(p);
                    last_err = None;
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        if let Some(e) = last_err {
            return Err(Error::Screen(format!("patient {k}: no candidate passed after {MAX_ATTEMPTS_PER_PATIENT} draws ({e})")));
        }
    }
    Ok(cohort)
}

const COHORT_FILE_HEADER: &str = "\
# Virtual-patient cohort. One [[patients]] table per patient.
#   body_weight         kg
#   gb                  basal plasma glucose, mg/dL
#   ib                  basal plasma insulin, uU/mL
#   p1                  glucose effectiveness, 1/min
#   p2                  remote insulin action decay, 1/min
#   p3                  insulin action gain, mL/(uU*min^2)
#   n_clr               plasma insulin clearance, 1/min
#   t_max_rapid         rapid-acting SC absorption time constant, min
#   t_max_long          long-acting SC absorption time constant, min
#   t_max_gut           gut absorption time constant, min
#   f_carb              carbohydrate bioavailability, fraction
#   vg                  glucose distribution volume, dL/kg
#   vi                  insulin distribution volume, mL/kg
#   sensitivity_factor  multiplier on p3 (1.0 nominal)
";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortFile {
    pub seed: u64,
    pub patients: Vec<PatientParams>,
}

impl CohortFile {
    pub fn to_toml(&self) -> Result<String> {
        Ok(format!("{COHORT_FILE_HEADER}\n{}", toml::to_string(self)?))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: CohortFile = toml::from_str(text)?;
        ensure(!file.patients.is_empty(), || "cohort file has no patients".into())?;
        for p in &file.patients {
            p.validate()?;
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cohort_of_ten_passes_screen() {
        let c = make_cohort(10, 42).unwrap();
        assert_eq!(c.len(), 10);
        for p in &c {
            p.validate().unwrap();
            assert!((90.0..=160.0).contains(&p.gb));
            fasting_screen(p).unwrap();
        }
    }

    #[test]
    fn cohort_is_deterministic() {
        assert_eq!(make_cohort(1, 7).unwrap(), make_cohort(1, 7).unwrap());
        assert_ne!(make_cohort(1, 7).unwrap(), make_cohort(1, 8).unwrap());
        // prefix property: patient k does not depend on n
        assert_eq!(make_cohort(3, 7).unwrap()[..1], make_cohort(1, 7).unwrap()[..]);
    }

    #[test]
    fn empty_cohort_rejected() {
        assert!(make_cohort(0, 1).is_err());
    }

    #[test]
    fn basal_requirement_round_trips_through_ib() {
        let mut rng = rng::stream(3, 0);
        let ranges = CohortRanges { basal_requirement: (0.4, 0.4 + 1e-12), ..CohortRanges::default() };
        let p = sample_patient(&mut rng, &ranges);
        assert!((p.basal_requirement() - 0.4 * p.body_weight).abs() < 1e-6);
    }

    #[test]
    fn impossible_ranges_fail_the_screen() {
        let ranges = CohortRanges { gb: (170.0, 180.0), ..CohortRanges::default() };
        assert!(matches!(make_cohort_with(1, 1, &ranges), Err(Error::Screen(_))));
    }

    #[test]
    fn cohort_file_round_trip() {
        let file = CohortFile { seed: 42, patients: make_cohort(2, 42).unwrap() };
        let text = file.to_toml().unwrap();
        assert!(text.starts_with("# Virtual-patient cohort"));
        assert!(text.contains("sensitivity_factor"));
        assert_eq!(CohortFile::from_toml(&text).unwrap(), file);
    }
}
