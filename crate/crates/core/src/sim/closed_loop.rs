//! Minute-by-minute closed loop: simulator, meal schedule, and a controller
//! queried once per simulated minute.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::{apply_insulin_resistance, step_counted, Inputs, PatientParams, PatientState};
use crate::error::{ensure, Error, Result};
use crate::rng::{self, streams, SimRng};
use crate::scenario::MealPlan;
use crate::{MINUTES_PER_DAY, START_MINUTE_OF_DAY};

/// Carbohydrate of a meal is delivered at a constant rate over this window.
pub const MEAL_DURATION_MIN: u32 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoseKind {
    RapidBolus,
    LongBasal,
}

impl DoseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DoseKind::RapidBolus => "rapid_bolus",
            DoseKind::LongBasal => "long_basal",
        }
    }
}

impl FromStr for DoseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rapid_bolus" => Ok(DoseKind::RapidBolus),
            "long_basal" => Ok(DoseKind::LongBasal),
            other => Err(Error::InvalidArgument(format!("unknown dose kind `{other}`"))),
        }
    }
}

/// A dose requested by a controller for the current minute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dose {
    pub kind: DoseKind,
    pub amount: f64,
}

impl Dose {
    pub fn bolus(amount: f64) -> Self {
        Self { kind: DoseKind::RapidBolus, amount }
    }

    pub fn basal(amount: f64) -> Self {
        Self { kind: DoseKind::LongBasal, amount }
    }
}

/// A logged injection. Each dose is delivered over the one-minute step that
/// starts at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseEvent {
    pub t: f64,
    pub kind: DoseKind,
    pub amount: f64,
}

/// A meal pinned to absolute simulation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledMeal {
    pub start: u32,
    pub carbs: f64,
}

/// Meals of a plan converted to simulation minutes (minute 0 = 07:00, day 0).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MealSchedule {
    meals: Vec<ScheduledMeal>,
}

impl MealSchedule {
    /// Meal starts are rounded to the simulator's one-minute grid.
    pub fn from_plan(plan: &MealPlan, horizon_min: u32) -> Self {
        let mut meals: Vec<ScheduledMeal> = plan
            .events
            .iter()
            .filter_map(|(day, e)| {
                let abs = *day as f64 * MINUTES_PER_DAY as f64 + e.t - START_MINUTE_OF_DAY as f64;
                let start = abs.round();
                (start >= 0.0 && start < horizon_min as f64).then_some(ScheduledMeal { start: start as u32, carbs: e.carbs })
            })
            .collect();
        meals.sort_by_key(|m| m.start);
        Self { meals }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn meals(&self) -> &[ScheduledMeal] {
        &self.meals
    }

    /// Ingestion rate (g/min) during minute `t`.
    pub fn rate_at(&self, t: u32) -> f64 {
        self.meals.iter().filter(|m| m.start <= t && t < m.start + MEAL_DURATION_MIN).map(|m| m.carbs / MEAL_DURATION_MIN as f64).sum()
    }

    /// Total carbohydrate of meals starting in `[from, to)`.
    pub fn carbs_starting_in(&self, from: u32, to: u32) -> f64 {
        self.meals.iter().filter(|m| m.start >= from && m.start < to).map(|m| m.carbs).sum()
    }
}

/// Everything a controller may look at when deciding the current minute.
pub struct ControlContext<'a> {
    /// Minutes since the start of the run.
    pub t: u32,
    pub minute_of_day: u32,
    /// Current CGM reading, mg/dL.
    pub glucose: f64,
    pub state: &'a PatientState,
    pub params: &'a PatientParams,
    /// Readings at minutes `0..=t`.
    pub trace: &'a [f64],
    pub meals: &'a MealSchedule,
}

impl ControlContext<'_> {
    /// Carbohydrate of meals starting exactly this minute.
    pub fn meal_now(&self) -> f64 {
        self.meals.carbs_starting_in(self.t, self.t + 1)
    }
}

/// A dosing policy. Queried every simulated minute; returns the doses to
/// deliver this minute (usually none).
pub trait Controller {
    fn act(&mut self, ctx: &ControlContext<'_>, rng: &mut SimRng) -> Result<Vec<Dose>>;
}

impl<F> Controller for F
where
    F: FnMut(&ControlContext<'_>) -> Vec<Dose>,
{
    fn act(&mut self, ctx: &ControlContext<'_>, _rng: &mut SimRng) -> Result<Vec<Dose>> {
        Ok(self(ctx))
    }
}

/// A controller that never doses.
pub struct NoInsulin;

impl Controller for NoInsulin {
    fn act(&mut self, _ctx: &ControlContext<'_>, _rng: &mut SimRng) -> Result<Vec<Dose>> {
        Ok(Vec::new())
    }
}

/// One patient in the loop.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    params: PatientParams,
    state: PatientState,
    meals: MealSchedule,
    trace: Vec<f64>,
    doses: Vec<DoseEvent>,
    clamps: u64,
}

impl ClosedLoop {
    pub fn new(params: PatientParams, meals: MealSchedule, initial: PatientState) -> Result<Self> {
        params.validate()?;
        initial.check_finite()?;
        Ok(Self { params, state: initial, meals, trace: vec![initial.g], doses: Vec::new(), clamps: 0 })
    }

    pub fn minute(&self) -> u32 {
        (self.trace.len() - 1) as u32
    }

    pub fn minute_of_day(&self) -> u32 {
        (self.minute() + START_MINUTE_OF_DAY) % MINUTES_PER_DAY
    }

    pub fn glucose(&self) -> f64 {
        self.state.g
    }

    pub fn state(&self) -> &PatientState {
        &self.state
    }

    pub fn params(&self) -> &PatientParams {
        &self.params
    }

    pub fn meals(&self) -> &MealSchedule {
        &self.meals
    }

    /// Readings at minutes `0..=minute()`.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn doses(&self) -> &[DoseEvent] {
        &self.doses
    }

    pub fn clamp_count(&self) -> u64 {
        self.clamps
    }

    pub fn context(&self) -> ControlContext<'_> {
        ControlContext {
            t: self.minute(),
            minute_of_day: self.minute_of_day(),
            glucose: self.state.g,
            state: &self.state,
            params: &self.params,
            trace: &self.trace,
            meals: &self.meals,
        }
    }

    /// Delivers `doses` and advances one minute.
    pub fn advance(&mut self, doses: &[Dose]) -> Result<()> {
        let t = self.minute();
        let mut inputs = Inputs { meal_rate: self.meals.rate_at(t), ..Inputs::default() };
        for dose in doses {
            if !dose.amount.is_finite() || dose.amount < 0.0 {
                return Err(Error::NegativeDose { t: t as f64, amount: dose.amount });
            }
            if dose.amount == 0.0 {
                continue;
            }
            match dose.kind {
                DoseKind::RapidBolus => inputs.rapid_in += dose.amount,
                DoseKind::LongBasal => inputs.long_in += dose.amount,
            }
            self.doses.push(DoseEvent { t: t as f64, kind: dose.kind, amount: dose.amount });
        }
        let (next, clamped) =
            step_counted(&self.state, &self.params, &inputs, 1.0).map_err(|e| Error::Divergence { t: t as f64, reason: e.to_string() })?;
        self.clamps += clamped as u64;
        self.state = next;
        self.trace.push(next.g);
        Ok(())
    }

    /// Runs `minutes` minutes under `controller`.
    pub fn run<C: Controller + ?Sized>(&mut self, minutes: u32, controller: &mut C, rng: &mut SimRng) -> Result<()> {
        for _ in 0..minutes {
            let doses = controller.act(&self.context(), rng)?;
            self.advance(&doses)?;
        }
        Ok(())
    }

    /// Drops the reading taken after the last step so the trace covers
    /// minutes `0..minute()`.
    pub fn finish(mut self) -> SimOutput {
        self.trace.pop();
        SimOutput {
            trace: CgmTrace { samples: self.trace },
            doses: DoseLog { events: self.doses },
            meals: self.meals.meals,
            final_state: self.state,
            clamp_count: self.clamps,
        }
    }
}

/// Glucose at one-minute cadence; `samples[k]` is the reading at minute k.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CgmTrace {
    pub samples: Vec<f64>,
}

impl CgmTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_min", "glucose_mgdl"])?;
        for (t, g) in self.samples.iter().enumerate() {
            out.write_record([t.to_string(), g.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a trace; rows must be consecutive minutes starting at 0.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut samples = Vec::new();
        for (k, row) in rdr.deserialize::<(u64, f64)>().enumerate() {
            let (t, g) = row?;
            ensure(t == k as u64, || format!("trace row {k} has t_min {t}; expected consecutive minutes"))?;
            samples.push(g);
        }
        Ok(Self { samples })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DoseLog {
    pub events: Vec<DoseEvent>,
}

impl DoseLog {
    pub fn total(&self, kind: DoseKind) -> f64 {
        self.events.iter().filter(|e| e.kind == kind).map(|e| e.amount).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_min", "kind", "units"])?;
        for e in &self.events {
            out.write_record([e.t.to_string(), e.kind.as_str().to_string(), e.amount.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut events = Vec::new();
        for row in rdr.deserialize::<(f64, String, f64)>() {
            let (t, kind, amount) = row?;
            events.push(DoseEvent { t, kind: kind.parse()?, amount });
        }
        Ok(Self { events })
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: CgmTrace,
    pub doses: DoseLog,
    pub meals: Vec<ScheduledMeal>,
    pub final_state: PatientState,
    /// Compartments clamped at zero after RK4 overshoot.
    pub clamp_count: u64,
}

/// Runs `days` days from the protocol start (125 mg/dL, no insulin on board)
/// at 07:00 of day 0. The plan's sensitivity reduction is applied to
/// `params`. `seed` feeds the generator handed to the controller.
pub fn simulate<C: Controller + ?Sized>(
    params: &PatientParams,
    plan: &MealPlan,
    controller: &mut C,
    days: u32,
    seed: u64,
) -> Result<SimOutput> {
    simulate_from(params, plan, controller, days, seed, PatientState::protocol_start())
}

pub fn simulate_from<C: Controller + ?Sized>(
    params: &PatientParams,
    plan: &MealPlan,
    controller: &mut C,
    days: u32,
    seed: u64,
    initial: PatientState,
) -> Result<SimOutput> {
    ensure(days >= 1, || "simulation needs at least one day".into())?;
    ensure(plan.days >= days, || format!("meal plan covers {} days, simulation needs {days}", plan.days))?;
    let params = if plan.sensitivity_reduction > 0.0 { apply_insulin_resistance(params, plan.sensitivity_reduction)? } else { *params };
    let horizon = days * MINUTES_PER_DAY;
    let mut lp = ClosedLoop::new(params, MealSchedule::from_plan(plan, horizon), initial)?;
    let mut rng = rng::stream(seed, streams::SIMULATE);
    lp.run(horizon, controller, &mut rng)?;
    Ok(lp.finish())
}
