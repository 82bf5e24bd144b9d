//! Agent inputs.
//!
//! Basal: the 00:00–07:00 fasting window before the decision, downsampled
//! to 15 minutes (28 readings) and divided by 400 mg/dL. Bolus: current BG
//! over 400, carbohydrate announced for the coming 15 minutes over 100 g, and
//! the 12 most recent delivered boluses (3 hours) over 25 U, oldest first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BG_SCALE: f64 = 400.0;
pub const CARB_SCALE: f64 = 100.0;
pub const BOLUS_UNIT_SCALE: f64 = 25.0;

pub const FASTING_WINDOW_MIN: u32 = 420;
pub const BASAL_STRIDE_MIN: u32 = 15;
pub const BASAL_OBS_DIM: usize = (FASTING_WINDOW_MIN / BASAL_STRIDE_MIN) as usize;

pub const BOLUS_CADENCE_MIN: u32 = 15;
pub const BOLUS_HISTORY: usize = 12;
pub const BOLUS_OBS_DIM: usize = 2 + BOLUS_HISTORY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Basal,
    Bolus,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Basal => "basal",
            AgentKind::Bolus => "bolus",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "basal" => Ok(AgentKind::Basal),
            "bolus" => Ok(AgentKind::Bolus),
            other => Err(Error::InvalidArgument(format!("unknown agent kind `{other}`"))),
        }
    }
}

/// Layout and normalization of one agent's observation; stored in
/// checkpoints so a loaded policy is fed exactly what it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub kind: AgentKind,
    pub dim: usize,
    pub bg_scale: f64,
    pub carb_scale: f64,
    pub unit_scale: f64,
    pub window_min: u32,
    pub stride_min: u32,
    pub history: usize,
}

impl ObservationSpec {
    pub fn basal() -> Self {
        Self {
            kind: AgentKind::Basal,
            dim: BASAL_OBS_DIM,
            bg_scale: BG_SCALE,
            carb_scale: CARB_SCALE,
            unit_scale: BOLUS_UNIT_SCALE,
            window_min: FASTING_WINDOW_MIN,
            stride_min: BASAL_STRIDE_MIN,
            history: 0,
        }
    }

    pub fn bolus() -> Self {
        Self {
            kind: AgentKind::Bolus,
            dim: BOLUS_OBS_DIM,
            bg_scale: BG_SCALE,
            carb_scale: CARB_SCALE,
            unit_scale: BOLUS_UNIT_SCALE,
            window_min: BOLUS_CADENCE_MIN * BOLUS_HISTORY as u32,
            stride_min: BOLUS_CADENCE_MIN,
            history: BOLUS_HISTORY,
        }
    }

    pub fn for_kind(kind: AgentKind) -> Self {
        match kind {
            AgentKind::Basal => Self::basal(),
            AgentKind::Bolus => Self::bolus(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if *self != Self::for_kind(self.kind) {
            return Err(Error::Checkpoint(format!("checkpoint was trained with a different {} observation layout", self.kind)));
        }
        Ok(())
    }
}

/// Basal observation at decision minute `t`; `trace` must hold readings up
/// to minute `t`. Minutes before the run are padded with `trace[0]` and the
/// result is flagged.
pub fn basal_observation(trace: &[f64], t: u32) -> Result<(Vec<f64>, bool)> {
    if trace.len() <= t as usize {
        return Err(Error::InvalidArgument(format!("basal observation at minute {t} needs {} readings, have {}", t + 1, trace.len())));
    }
    let start = t as i64 - FASTING_WINDOW_MIN as i64;
    let mut padded = false;
    let obs = (0..BASAL_OBS_DIM as i64)
        .map(|k| {
            let m = start + k * BASAL_STRIDE_MIN as i64;
            if m < 0 {
                padded = true;
                trace[0] / BG_SCALE
            } else {
                trace[m as usize] / BG_SCALE
            }
        })
        .collect();
    Ok((obs, padded))
}

/// Bolus observation from current BG, announced carbohydrate and the
/// delivered-dose history (oldest first, exactly 12 entries).
pub fn bolus_observation(bg: f64, announced_carbs: f64, history: &[f64]) -> Result<Vec<f64>> {
    if history.len() != BOLUS_HISTORY {
        return Err(Error::InvalidArgument(format!("bolus history needs {BOLUS_HISTORY} entries, got {}", history.len())));
    }
    let mut obs = Vec::with_capacity(BOLUS_OBS_DIM);
    obs.push(bg / BG_SCALE);
    obs.push(announced_carbs / CARB_SCALE);
    obs.extend(history.iter().map(|u| u / BOLUS_UNIT_SCALE));
    Ok(obs)
}

/// Either agent's observation.
pub enum ObservationInput<'a> {
    Basal { trace: &'a [f64], t: u32 },
    Bolus { bg: f64, announced_carbs: f64, history: &'a [f64] },
}

pub fn build_observation(kind: AgentKind, input: ObservationInput<'_>) -> Result<Vec<f64>> {
    match (kind, input) {
        (AgentKind::Basal, ObservationInput::Basal { trace, t }) => basal_observation(trace, t).map(|(o, _)| o),
        (AgentKind::Bolus, ObservationInput::Bolus { bg, announced_carbs, history }) => bolus_observation(bg, announced_carbs, history),
        (kind, _) => Err(Error::InvalidArgument(format!("history does not match agent kind {kind}"))),
    }
}
