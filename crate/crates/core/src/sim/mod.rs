//! Glucose-insulin metabolic simulator.

mod closed_loop;
mod cohort;
mod model;

pub use closed_loop::{
    simulate, simulate_from, CgmTrace, ClosedLoop, ControlContext, Controller, Dose, DoseEvent, DoseKind, DoseLog, MealSchedule, NoInsulin,
    ScheduledMeal, SimOutput, MEAL_DURATION_MIN,
};
pub use cohort::{fasting_screen, make_cohort, make_cohort_with, sample_patient, CohortFile, CohortRanges, SCREEN_TOLERANCE};
pub use model::{
    apply_insulin_resistance, derivatives, fasting_equilibrium, step, step_counted, Inputs, PatientParams, PatientState, StateDerivative,
    N_STATES,
};

#[cfg(test)]
pub(crate) use model::tests::nominal as nominal_patient;
