//! Meal and disturbance scenarios.
//!
//! * A: fixed meals at 07:00, 13:00 and 19:00 with 50, 75 and 75 g.
//! * B: each meal is delayed by Normal(30, 5) min from its nominal time and
//!   its carbohydrate content is drawn from Normal(50, 5) / Normal(75, 7.5) /
//!   Normal(75, 7.5) g, truncated at zero.
//! * C: the meals of B (same seed, same draws) plus a 40% reduction in
//!   insulin sensitivity.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::{self, streams};
use crate::MINUTES_PER_DAY;

/// Nominal meal times (minutes after midnight) and carbohydrate means / stds.
pub const NOMINAL_MEALS: [NominalMeal; 3] = [
    NominalMeal { minute: 420.0, carbs: 50.0, carbs_std: 5.0 },
    NominalMeal { minute: 780.0, carbs: 75.0, carbs_std: 7.5 },
    NominalMeal { minute: 1140.0, carbs: 75.0, carbs_std: 7.5 },
];

pub const DELAY_MEAN_MIN: f64 = 30.0;
pub const DELAY_STD_MIN: f64 = 5.0;
pub const SCENARIO_C_REDUCTION: f64 = 0.4;

#[derive(Debug, Clone, Copy)]
pub struct NominalMeal {
    pub minute: f64,
    pub carbs: f64,
    pub carbs_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    A,
    B,
    C,
}

impl ScenarioId {
    pub fn sensitivity_reduction(self) -> f64 {
        match self {
            ScenarioId::A | ScenarioId::B => 0.0,
            ScenarioId::C => SCENARIO_C_REDUCTION,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioId::A => "A",
            ScenarioId::B => "B",
            ScenarioId::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(ScenarioId::A),
            "B" | "b" => Ok(ScenarioId::B),
            "C" | "c" => Ok(ScenarioId::C),
            other => Err(Error::InvalidArgument(format!("unknown scenario `{other}` (expected A, B or C)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealEvent {
    /// Minutes after midnight, in [0, 1440).
    pub t: f64,
    /// Carbohydrate content, g.
    pub carbs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealPlan {
    pub days: u32,
    /// `(day, meal)` pairs, three per day, sorted by day then time.
    pub events: Vec<(u32, MealEvent)>,
    pub scenario: ScenarioId,
    pub sensitivity_reduction: f64,
    /// Delay draws rejected because they pushed a meal past midnight.
    #[serde(default)]
    pub redraws: u32,
}

impl MealPlan {
    pub fn validate(&self) -> Result<()> {
        ensure(self.days >= 1, || "meal plan must cover at least one day".into())?;
        ensure(self.events.len() == 3 * self.days as usize, || {
            format!("expected {} meal events, found {}", 3 * self.days, self.events.len())
        })?;
        for day in 0..self.days {
            let todays: Vec<&MealEvent> = self.events.iter().filter(|(d, _)| *d == day).map(|(_, e)| e).collect();
            ensure(todays.len() == 3, || format!("day {day} has {} meals, expected 3", todays.len()))?;
            ensure(todays.windows(2).all(|w| w[0].t <= w[1].t), || format!("day {day} meals out of order"))?;
            for e in todays {
                ensure((0.0..MINUTES_PER_DAY as f64).contains(&e.t), || format!("meal time {} outside [0, 1440)", e.t))?;
                ensure(e.carbs.is_finite() && e.carbs >= 0.0, || format!("negative carbs {}", e.carbs))?;
            }
        }
        ensure((self.sensitivity_reduction - self.scenario.sensitivity_reduction()).abs() < 1e-12, || {
            format!("scenario {} requires sensitivity reduction {}", self.scenario, self.scenario.sensitivity_reduction())
        })?;
        Ok(())
    }

    /// Events of one calendar day.
    pub fn day(&self, day: u32) -> impl Iterator<Item = &MealEvent> {
        self.events.iter().filter(move |(d, _)| *d == day).map(|(_, e)| e)
    }

    /// Writes `day,t_min,carbs_g` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["day", "t_min", "carbs_g"])?;
        for (day, e) in &self.events {
            out.write_record([day.to_string(), e.t.to_string(), e.carbs.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a plan written by [`MealPlan::write_csv`]. The scenario decides
    /// the sensitivity reduction; the file only carries meals.
    pub fn read_csv<R: Read>(r: R, scenario: ScenarioId) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            day: u32,
            t_min: f64,
            carbs_g: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut events = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            events.push((row.day, MealEvent { t: row.t_min, carbs: row.carbs_g }));
        }
        events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.t.total_cmp(&b.1.t)));
        let days = events.iter().map(|(d, _)| d + 1).max().unwrap_or(0);
        let plan = MealPlan { days, events, scenario, sensitivity_reduction: scenario.sensitivity_reduction(), redraws: 0 };
        plan.validate()?;
        Ok(plan)
    }
}

fn check_days(days: u32) -> Result<()> {
    ensure(days >= 1, || "scenario needs days >= 1".into())
}

pub fn scenario_a(days: u32) -> Result<MealPlan> {
    check_days(days)?;
    let events = (0..days).flat_map(|d| NOMINAL_MEALS.iter().map(move |m| (d, MealEvent { t: m.minute, carbs: m.carbs }))).collect();
    Ok(MealPlan { days, events, scenario: ScenarioId::A, sensitivity_reduction: 0.0, redraws: 0 })
}

pub fn scenario_b(days: u32, seed: u64) -> Result<MealPlan> {
    check_days(days)?;
    let mut rng = rng::stream(seed, streams::MEALS);
    let delay = Normal::new(DELAY_MEAN_MIN, DELAY_STD_MIN).expect("valid normal");
    let mut redraws = 0;
    let mut events = Vec::with_capacity(3 * days as usize);
    for d in 0..days {
        let mut todays = Vec::with_capacity(3);
        for m in &NOMINAL_MEALS {
            let t = loop {
                let t = m.minute + delay.sample(&mut rng);
                if (0.0..MINUTES_PER_DAY as f64).contains(&t) {
                    break t;
                }
                redraws += 1;
            };
            let carbs = Normal::new(m.carbs, m.carbs_std).expect("valid normal").sample(&mut rng).max(0.0);
            todays.push(MealEvent { t, carbs });
        }
        todays.sort_by(|a, b| a.t.total_cmp(&b.t));
        events.extend(todays.into_iter().map(|e| (d, e)));
    }
    Ok(MealPlan { days, events, scenario: ScenarioId::B, sensitivity_reduction: 0.0, redraws })
}

pub fn scenario_c(days: u32, seed: u64) -> Result<MealPlan> {
    let b = scenario_b(days, seed)?;
    Ok(MealPlan { scenario: ScenarioId::C, sensitivity_reduction: SCENARIO_C_REDUCTION, ..b })
}

pub fn generate(scenario: ScenarioId, days: u32, seed: u64) -> Result<MealPlan> {
    match scenario {
        ScenarioId::A => scenario_a(days),
        ScenarioId::B => scenario_b(days, seed),
        ScenarioId::C => scenario_c(days, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_a_single_day() {
        let plan = scenario_a(1).unwrap();
        let got: Vec<(f64, f64)> = plan.events.iter().map(|(_, e)| (e.t, e.carbs)).collect();
        assert_eq!(got, vec![(420.0, 50.0), (780.0, 75.0), (1140.0, 75.0)]);
        assert_eq!(plan.sensitivity_reduction, 0.0);
    }

    #[test]
    fn scenario_a_repeats_every_day() {
        let plan = scenario_a(14).unwrap();
        assert_eq!(plan.events.len(), 42);
        let first: Vec<_> = plan.day(0).copied().collect();
        for d in 1..14 {
            assert_eq!(plan.day(d).copied().collect::<Vec<_>>(), first);
        }
        assert_eq!(plan, scenario_a(14).unwrap());
        plan.validate().unwrap();
    }

    #[test]
    fn zero_days_rejected() {
        assert!(scenario_a(0).is_err());
        assert!(scenario_b(0, 1).is_err());
        assert!(scenario_c(0, 1).is_err());
    }

    #[test]
    fn scenario_b_deterministic_and_valid() {
        let a = scenario_b(30, 7).unwrap();
        assert_eq!(a, scenario_b(30, 7).unwrap());
        assert_ne!(a.events, scenario_b(30, 8).unwrap().events);
        a.validate().unwrap();
        assert!(a.events.iter().all(|(_, e)| e.carbs >= 0.0));
    }

    #[test]
    fn scenario_b_breakfast_moments() {
        let plan = scenario_b(10_000, 2024).unwrap();
        let carbs: Vec<f64> = (0..10_000).map(|d| plan.day(d).next().unwrap().carbs).collect();
        let n = carbs.len() as f64;
        let mean = carbs.iter().sum::<f64>() / n;
        let sd = (carbs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 50.0).abs() < 0.5, "mean {mean}");
        assert!((sd - 5.0).abs() < 0.5, "sd {sd}");

        let delays: Vec<f64> = (0..10_000).map(|d| plan.day(d).nth(1).unwrap().t - 780.0).collect();
        let dm = delays.iter().sum::<f64>() / n;
        let ds = (delays.iter().map(|x| (x - dm).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((dm - 30.0).abs() < 0.3, "delay mean {dm}");
        assert!((ds - 5.0).abs() < 0.3, "delay sd {ds}");
    }

    #[test]
    fn scenario_c_reuses_b_meals() {
        let b = scenario_b(7, 99).unwrap();
        let c = scenario_c(7, 99).unwrap();
        assert_eq!(b.events, c.events);
        assert_eq!(c.events.len(), 21);
        assert_eq!(c.sensitivity_reduction, 0.4);
        assert_eq!(c.scenario, ScenarioId::C);
        c.validate().unwrap();
    }

    #[test]
    fn csv_round_trip() {
        let plan = scenario_b(3, 5).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("day,t_min,carbs_g\n"));
        let back = MealPlan::read_csv(buf.as_slice(), ScenarioId::B).unwrap();
        assert_eq!(back.events, plan.events);
    }

    #[test]
    fn csv_with_missing_meal_is_rejected() {
        let text = "day,t_min,carbs_g\n0,420,50\n0,780,75\n";
        assert!(MealPlan::read_csv(text.as_bytes(), ScenarioId::A).is_err());
    }
}
