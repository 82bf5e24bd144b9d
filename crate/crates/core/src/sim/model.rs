//! Bergman minimal model extended with two-compartment subcutaneous insulin
//! absorption (separate rapid-acting and long-acting channels) and
//! two-compartment gut absorption.
//!
//! ```text
//! dG/dt  = -(p1 + X)·G + p1·Gb + 1000·f_carb·D2 / (t_gut·Vg·BW)
//! dX/dt  = -p2·X + p3·sf·(I - Ib)
//! dI/dt  = -n_clr·I + 1e6·(S2/t_rapid + L2/t_long) / (Vi·BW)
//! dS1/dt = u_rapid - S1/t_rapid        dS2/dt = (S1 - S2)/t_rapid
//! dL1/dt = u_long  - L1/t_long         dL2/dt = (L1 - L2)/t_long
//! dD1/dt = meal    - D1/t_gut          dD2/dt = (D1 - D2)/t_gut
//! ```
//!
//! Units: G mg/dL, X 1/min, I µU/mL, depots in U, gut in g, time in min.
//! The net glucose clearance `p1 + X` is floored at zero so that a patient
//! starved of insulin drifts upward linearly instead of exponentially.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Micro-units per unit of insulin.
const MICRO_UNITS_PER_UNIT: f64 = 1e6;
/// Milligrams per gram of carbohydrate.
const MG_PER_G: f64 = 1000.0;

/// Physiology of one virtual patient. Serialized keys match the field names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatientParams {
    /// Body weight, kg.
    pub body_weight: f64,
    /// Basal plasma glucose, mg/dL.
    pub gb: f64,
    /// Basal plasma insulin, µU/mL.
    pub ib: f64,
    /// Glucose effectiveness, 1/min.
    pub p1: f64,
    /// Remote insulin action decay, 1/min.
    pub p2: f64,
    /// Insulin action gain, mL/(µU·min²).
    pub p3: f64,
    /// Plasma insulin clearance, 1/min.
    pub n_clr: f64,
    /// Rapid-acting subcutaneous absorption time constant, min.
    pub t_max_rapid: f64,
    /// Long-acting subcutaneous absorption time constant, min.
    pub t_max_long: f64,
    /// Gut absorption time constant, min.
    pub t_max_gut: f64,
    /// Carbohydrate bioavailability, fraction in (0, 1].
    pub f_carb: f64,
    /// Glucose distribution volume, dL/kg.
    pub vg: f64,
    /// Insulin distribution volume, mL/kg.
    pub vi: f64,
    /// Multiplier on p3; 1.0 is nominal, below 1 is insulin resistance.
    pub sensitivity_factor: f64,
}

impl PatientParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("body_weight", self.body_weight),
            ("gb", self.gb),
            ("p1", self.p1),
            ("p2", self.p2),
            ("p3", self.p3),
            ("n_clr", self.n_clr),
            ("t_max_rapid", self.t_max_rapid),
            ("t_max_long", self.t_max_long),
            ("t_max_gut", self.t_max_gut),
            ("vg", self.vg),
            ("vi", self.vi),
        ];
        for (name, v) in positive {
            ensure(v.is_finite() && v > 0.0, || format!("{name} must be finite and > 0, got {v}"))?;
        }
        ensure(self.ib.is_finite() && self.ib >= 0.0, || format!("ib must be finite and >= 0, got {}", self.ib))?;
        ensure(self.f_carb > 0.0 && self.f_carb <= 1.0, || format!("f_carb must lie in (0, 1], got {}", self.f_carb))?;
        ensure(self.sensitivity_factor > 0.0 && self.sensitivity_factor <= 1.0, || {
            format!("sensitivity_factor must lie in (0, 1], got {}", self.sensitivity_factor)
        })?;
        Ok(())
    }

    /// Long-acting infusion (U/min) that holds plasma insulin at `ib`.
    pub fn maintenance_long_rate(&self) -> f64 {
        self.n_clr * self.ib * self.vi * self.body_weight / MICRO_UNITS_PER_UNIT
    }

    /// Daily long-acting insulin (U/day) matching `ib` at steady state.
    pub fn basal_requirement(&self) -> f64 {
        self.maintenance_long_rate() * crate::MINUTES_PER_DAY as f64
    }
}

/// Returns a copy with `sensitivity_factor = 1 - reduction`.
///
/// Both glucose uptake and the suppression of endogenous production act
/// through X, so this one knob covers the insulin-resistance scenario.
pub fn apply_insulin_resistance(params: &PatientParams, reduction: f64) -> Result<PatientParams> {
    ensure((0.0..1.0).contains(&reduction), || format!("insulin-resistance reduction must lie in [0, 1), got {reduction}"))?;
    Ok(PatientParams { sensitivity_factor: 1.0 - reduction, ..*params })
}

pub const N_STATES: usize = 9;

pub(crate) const FIELD_NAMES: [&str; N_STATES] = ["G", "X", "I", "S1", "S2", "L1", "L2", "D1", "D2"];

/// Instantaneous ODE state. `x` is a relative action and may be negative;
/// every other compartment stays non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatientState {
    /// Plasma glucose, mg/dL.
    pub g: f64,
    /// Remote insulin action, 1/min.
    pub x: f64,
    /// Plasma insulin, µU/mL.
    pub i: f64,
    /// Rapid-acting depot, U.
    pub s1: f64,
    pub s2: f64,
    /// Long-acting depot, U.
    pub l1: f64,
    pub l2: f64,
    /// Gut carbohydrate, g.
    pub d1: f64,
    pub d2: f64,
    /// Simulation clock, min.
    pub t: f64,
}

impl PatientState {
    /// 125 mg/dL and no insulin anywhere: the closed-loop test protocol start.
    pub fn protocol_start() -> Self {
        Self::empty(125.0)
    }

    pub fn empty(g: f64) -> Self {
        Self { g, x: 0.0, i: 0.0, s1: 0.0, s2: 0.0, l1: 0.0, l2: 0.0, d1: 0.0, d2: 0.0, t: 0.0 }
    }

    pub fn to_array(&self) -> [f64; N_STATES] {
        [self.g, self.x, self.i, self.s1, self.s2, self.l1, self.l2, self.d1, self.d2]
    }

    pub fn from_array(y: [f64; N_STATES], t: f64) -> Self {
        Self { g: y[0], x: y[1], i: y[2], s1: y[3], s2: y[4], l1: y[5], l2: y[6], d1: y[7], d2: y[8], t }
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, v) in FIELD_NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(Error::NonFinite { field: name, t: self.t });
            }
        }
        if !self.t.is_finite() {
            return Err(Error::NonFinite { field: "t", t: self.t });
        }
        Ok(())
    }

    /// Undelivered rapid-acting insulin in the subcutaneous depot, U.
    pub fn rapid_depot(&self) -> f64 {
        self.s1 + self.s2
    }
}

/// Exogenous inputs held constant across one integration step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Inputs {
    /// Carbohydrate ingestion rate, g/min.
    pub meal_rate: f64,
    /// Rapid-acting insulin injection rate, U/min.
    pub rapid_in: f64,
    /// Long-acting insulin injection rate, U/min.
    pub long_in: f64,
}

impl Inputs {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("meal_rate", self.meal_rate), ("rapid_in", self.rapid_in), ("long_in", self.long_in)] {
            ensure(v.is_finite() && v >= 0.0, || format!("input {name} must be finite and >= 0, got {v}"))?;
        }
        Ok(())
    }
}

/// Time derivative of every state field; `dt` is the clock rate and always 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dy: [f64; N_STATES],
    pub dt: f64,
}

impl StateDerivative {
    pub fn dg(&self) -> f64 {
        self.dy[0]
    }
    pub fn dx(&self) -> f64 {
        self.dy[1]
    }
    pub fn di(&self) -> f64 {
        self.dy[2]
    }
}

fn rhs(y: &[f64; N_STATES], p: &PatientParams, u: &Inputs) -> [f64; N_STATES] {
    let [g, x, i, s1, s2, l1, l2, d1, d2] = *y;
    let bw = p.body_weight;
    let clearance = (p.p1 + x).max(0.0);
    let appearance = MG_PER_G * p.f_carb * d2 / (p.t_max_gut * p.vg * bw);
    let absorbed = MICRO_UNITS_PER_UNIT * (s2 / p.t_max_rapid + l2 / p.t_max_long) / (p.vi * bw);
    [
        -clearance * g + p.p1 * p.gb + appearance,
        -p.p2 * x + p.p3 * p.sensitivity_factor * (i - p.ib),
        -p.n_clr * i + absorbed,
        u.rapid_in - s1 / p.t_max_rapid,
        (s1 - s2) / p.t_max_rapid,
        u.long_in - l1 / p.t_max_long,
        (l1 - l2) / p.t_max_long,
        u.meal_rate - d1 / p.t_max_gut,
        (d1 - d2) / p.t_max_gut,
    ]
}

pub fn derivatives(state: &PatientState, params: &PatientParams, inputs: &Inputs) -> Result<StateDerivative> {
    state.check_finite()?;
    inputs.validate()?;
    Ok(StateDerivative { dy: rhs(&state.to_array(), params, inputs), dt: 1.0 })
}

/// One classical RK4 step.
pub fn step(state: &PatientState, params: &PatientParams, inputs: &Inputs, dt: f64) -> Result<PatientState> {
    step_counted(state, params, inputs, dt).map(|(s, _)| s)
}

/// Like [`step`], also returning how many compartments had to be clamped at 0.
pub fn step_counted(state: &PatientState, params: &PatientParams, inputs: &Inputs, dt: f64) -> Result<(PatientState, u32)> {
    ensure(dt.is_finite() && dt > 0.0, || format!("dt must be > 0, got {dt}"))?;
    state.check_finite()?;
    inputs.validate()?;

    let y = state.to_array();
    let axpy = |a: &[f64; N_STATES], h: f64, k: &[f64; N_STATES]| -> [f64; N_STATES] {
        let mut out = *a;
        out.iter_mut().zip(k).for_each(|(o, k)| *o += h * k);
        out
    };
    let k1 = rhs(&y, params, inputs);
    let k2 = rhs(&axpy(&y, 0.5 * dt, &k1), params, inputs);
    let k3 = rhs(&axpy(&y, 0.5 * dt, &k2), params, inputs);
    let k4 = rhs(&axpy(&y, dt, &k3), params, inputs);

    let mut next = y;
    let mut clamped = 0;
    for j in 0..N_STATES {
        next[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        if !next[j].is_finite() {
            return Err(Error::NonFinite { field: FIELD_NAMES[j], t: state.t + dt });
        }
        // X is a relative action and legitimately negative.
        if j != 1 && next[j] < 0.0 {
            next[j] = 0.0;
            clamped += 1;
        }
    }
    Ok((PatientState::from_array(next, state.t + dt), clamped))
}

/// Fasting steady state: G = Gb, X = 0, I = Ib, long-acting depots holding a
/// continuous maintenance infusion, and the inputs that keep it there.
pub fn fasting_equilibrium(params: &PatientParams) -> (PatientState, Inputs) {
    let rate = params.maintenance_long_rate();
    let depot = rate * params.t_max_long;
    let state = PatientState { g: params.gb, x: 0.0, i: params.ib, s1: 0.0, s2: 0.0, l1: depot, l2: depot, d1: 0.0, d2: 0.0, t: 0.0 };
    (state, Inputs { long_in: rate, ..Inputs::default() })
}
