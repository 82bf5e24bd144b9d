//! Conventional multiple-daily-injection therapy: a fixed weight-based
//! long-acting dose at 07:00 and a standard bolus calculator at every meal,
//!
//! ```text
//! bolus = CHO/CR + (Gc − Gd)/CF − IOB,   clamped at 0.
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::SimRng;
use crate::sim::{ControlContext, Controller, Dose, PatientParams, PatientState};

/// Minute of day at which the daily long-acting injection is given.
pub const BASAL_MINUTE_OF_DAY: u32 = 420;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TherapySettings {
    /// Insulin-to-carbohydrate ratio, g/U.
    pub cr: f64,
    /// Correction factor, mg/dL per U.
    pub cf: f64,
    /// Target glucose, mg/dL.
    pub gd: f64,
    /// Daily long-acting dose, U/kg/day.
    pub basal_rate: f64,
}

impl TherapySettings {
    pub fn validate(&self) -> Result<()> {
        ensure(self.cr.is_finite() && self.cr > 0.0, || format!("CR must be > 0, got {}", self.cr))?;
        ensure(self.cf.is_finite() && self.cf > 0.0, || format!("CF must be > 0, got {}", self.cf))?;
        ensure((90.0..=140.0).contains(&self.gd), || format!("Gd must lie in [90, 140], got {}", self.gd))?;
        ensure(self.basal_rate.is_finite() && self.basal_rate > 0.0, || format!("basal rate must be > 0, got {}", self.basal_rate))?;
        Ok(())
    }
}

/// Clinical rules of thumb used to personalise [`TherapySettings`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TherapyRules {
    /// Estimated total daily dose, U/kg/day.
    pub tdd_per_kg: f64,
    /// CR = carb_rule / TDD ("500 rule").
    pub carb_rule: f64,
    /// CF = correction_rule / TDD ("1800 rule").
    pub correction_rule: f64,
    pub target: f64,
    pub basal_rate: f64,
}

impl Default for TherapyRules {
    fn default() -> Self {
        Self { tdd_per_kg: 0.55, carb_rule: 500.0, correction_rule: 1800.0, target: 120.0, basal_rate: 0.4 }
    }
}

impl TherapyRules {
    pub fn settings_for(&self, params: &PatientParams) -> Result<TherapySettings> {
        let tdd = self.tdd_per_kg * params.body_weight;
        let s = TherapySettings { cr: self.carb_rule / tdd, cf: self.correction_rule / tdd, gd: self.target, basal_rate: self.basal_rate };
        s.validate()?;
        Ok(s)
    }
}

/// Meal bolus in U. Negative raw values are clamped to zero.
pub fn bolus_calculator(cho: f64, gc: f64, settings: &TherapySettings, iob: f64) -> Result<f64> {
    for (name, v) in [("CHO", cho), ("Gc", gc), ("IOB", iob)] {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")));
        }
    }
    ensure(cho >= 0.0, || format!("CHO must be >= 0, got {cho}"))?;
    ensure(iob >= 0.0, || format!("IOB must be >= 0, got {iob}"))?;
    let raw = cho / settings.cr + (gc - settings.gd) / settings.cf - iob;
    Ok(raw.max(0.0))
}

/// Insulin on board: rapid-acting insulin still in the subcutaneous depot.
pub fn iob(state: &PatientState) -> f64 {
    state.rapid_depot()
}

/// Daily basal at 07:00 and a calculator bolus at the start of every meal.
#[derive(Debug, Clone)]
pub struct ConventionalController {
    settings: TherapySettings,
    daily_basal: f64,
}

impl ConventionalController {
    pub fn new(settings: TherapySettings, body_weight: f64) -> Result<Self> {
        settings.validate()?;
        ensure(body_weight > 0.0, || format!("body weight must be > 0, got {body_weight}"))?;
        Ok(Self { settings, daily_basal: settings.basal_rate * body_weight })
    }

    pub fn daily_basal(&self) -> f64 {
        self.daily_basal
    }

    pub fn settings(&self) -> &TherapySettings {
        &self.settings
    }

    /// Calculator bolus for a meal starting at the current minute, if any.
    pub fn meal_bolus(&self, ctx: &ControlContext<'_>) -> Result<Option<f64>> {
        let carbs = ctx.meal_now();
        if carbs <= 0.0 {
            return Ok(None);
        }
        bolus_calculator(carbs, ctx.glucose, &self.settings, iob(ctx.state)).map(Some)
    }
}

pub fn conventional_controller(settings: TherapySettings, body_weight: f64) -> Result<ConventionalController> {
    ConventionalController::new(settings, body_weight)
}

impl Controller for ConventionalController {
    fn act(&mut self, ctx: &ControlContext<'_>, _rng: &mut SimRng) -> Result<Vec<Dose>> {
        let mut doses = Vec::new();
        if ctx.minute_of_day == BASAL_MINUTE_OF_DAY {
            doses.push(Dose::basal(self.daily_basal));
        }
        if let Some(units) = self.meal_bolus(ctx)? {
            doses.push(Dose::bolus(units));
        }
        Ok(doses)
    }
}
