//! Frozen, deterministic policies and the closed-loop controller built from
//! them.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::observation::{basal_observation, bolus_observation, AgentKind, ObservationSpec, BOLUS_CADENCE_MIN, BOLUS_HISTORY};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::sac::{deterministic_action, ActionScale, Checkpoint, Mlp, Sac};
use crate::sim::{ControlContext, Controller, Dose};
use crate::therapy::ConventionalController;
use crate::MINUTES_PER_DAY;

/// Doses below this many units are not injected.
pub const DEFAULT_DEAD_ZONE: f64 = 0.1;

/// Extra data stored with every trained checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub kind: AgentKind,
    pub observation: ObservationSpec,
    pub dead_zone: f64,
    pub scenario: String,
    pub episodes: usize,
}

impl CheckpointMeta {
    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        serde_json::from_value(c.header.meta.clone()).map_err(|e| Error::Checkpoint(format!("missing training metadata: {e}")))
    }
}

/// Squashed-mean actor with its action bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenPolicy {
    pub kind: AgentKind,
    pub dead_zone: f64,
    actor: Mlp,
    scale: ActionScale,
}

impl FrozenPolicy {
    pub fn from_agent(kind: AgentKind, agent: &Sac, dead_zone: f64) -> Self {
        Self { kind, dead_zone, actor: agent.params.actor.clone(), scale: agent.scale() }
    }

    pub fn from_checkpoint(c: &Checkpoint, expected: AgentKind) -> Result<Self> {
        let meta = CheckpointMeta::from_checkpoint(c)?;
        if meta.kind != expected {
            return Err(Error::Checkpoint(format!("expected a {expected} checkpoint, found {}", meta.kind)));
        }
        meta.observation.check()?;
        if c.header.obs_dim != meta.observation.dim || c.header.act_dim != 1 {
            return Err(Error::Checkpoint(format!("unexpected dims obs={} act={}", c.header.obs_dim, c.header.act_dim)));
        }
        let scale = ActionScale { low: c.header.config.action_low, high: c.header.config.action_high };
        Ok(Self { kind: meta.kind, dead_zone: meta.dead_zone, actor: c.params.actor.clone(), scale })
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    /// Action in units.
    pub fn act(&self, obs: &[f64]) -> Result<f64> {
        Ok(deterministic_action(&self.actor, obs, &self.scale)?.0[0])
    }
}

/// Basal agent once a day at 07:00; boluses either from a bolus agent every
/// 15 minutes or from the meal calculator.
pub struct RlController {
    basal: FrozenPolicy,
    bolus: Option<FrozenPolicy>,
    calculator: ConventionalController,
    history: VecDeque<f64>,
}

impl RlController {
    pub fn new(basal: FrozenPolicy, bolus: Option<FrozenPolicy>, calculator: ConventionalController) -> Result<Self> {
        if basal.kind != AgentKind::Basal {
            return Err(Error::InvalidArgument("basal slot needs a basal policy".into()));
        }
        if bolus.as_ref().is_some_and(|b| b.kind != AgentKind::Bolus) {
            return Err(Error::InvalidArgument("bolus slot needs a bolus policy".into()));
        }
        Ok(Self { basal, bolus, calculator, history: VecDeque::from(vec![0.0; BOLUS_HISTORY]) })
    }
}

impl Controller for RlController {
    fn act(&mut self, ctx: &ControlContext<'_>, _rng: &mut SimRng) -> Result<Vec<Dose>> {
        let mut doses = Vec::new();
        if ctx.t.is_multiple_of(MINUTES_PER_DAY) {
            let (obs, _) = basal_observation(ctx.trace, ctx.t)?;
            doses.push(Dose::basal(self.basal.act(&obs)?.max(0.0)));
        }
        match &self.bolus {
            Some(policy) if ctx.t.is_multiple_of(BOLUS_CADENCE_MIN) => {
                let carbs = ctx.meals.carbs_starting_in(ctx.t, ctx.t + BOLUS_CADENCE_MIN);
                let obs = bolus_observation(ctx.glucose, carbs, self.history.make_contiguous())?;
                let units = policy.act(&obs)?;
                let delivered = if units < policy.dead_zone { 0.0 } else { units };
                self.history.pop_front();
                self.history.push_back(delivered);
                if delivered > 0.0 {
                    doses.push(Dose::bolus(delivered));
                }
            }
            Some(_) => {}
            None => {
                if let Some(units) = self.calculator.meal_bolus(ctx)? {
                    doses.push(Dose::bolus(units));
                }
            }
        }
        Ok(doses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sac::SacConfig;
    use crate::scenario::scenario_a;
    use crate::sim::{nominal_patient, simulate, DoseKind};
    use crate::therapy::TherapyRules;

    fn policy(kind: AgentKind, high: f64) -> FrozenPolicy {
        let dim = ObservationSpec::for_kind(kind).dim;
        let cfg = SacConfig { hidden_sizes: vec![8], action_high: high, seed: 9, ..SacConfig::default() };
        FrozenPolicy::from_agent(kind, &Sac::new(dim, 1, cfg).unwrap(), DEFAULT_DEAD_ZONE)
    }

    fn calculator() -> ConventionalController {
        let p = nominal_patient();
        ConventionalController::new(TherapyRules::default().settings_for(&p).unwrap(), p.body_weight).unwrap()
    }

    #[test]
    fn dose_timing() {
        let p = nominal_patient();
        let plan = scenario_a(2).unwrap();
        let mut rl = RlController::new(policy(AgentKind::Basal, 60.0), Some(policy(AgentKind::Bolus, 25.0)), calculator()).unwrap();
        let out = simulate(&p, &plan, &mut rl, 2, 0).unwrap();
        let basal: Vec<f64> = out.doses.events.iter().filter(|d| d.kind == DoseKind::LongBasal).map(|d| d.t).collect();
        assert_eq!(basal, vec![0.0, 1440.0]);
        for d in out.doses.events.iter().filter(|d| d.kind == DoseKind::RapidBolus) {
            assert_eq!(d.t % 15.0, 0.0);
            assert!(d.amount >= DEFAULT_DEAD_ZONE);
        }

        let mut calc_only = RlController::new(policy(AgentKind::Basal, 60.0), None, calculator()).unwrap();
        let out = simulate(&p, &plan, &mut calc_only, 2, 0).unwrap();
        let bolus_times: Vec<f64> = out.doses.events.iter().filter(|d| d.kind == DoseKind::RapidBolus).map(|d| d.t).collect();
        let meal_times: Vec<f64> = out.meals.iter().map(|m| m.start as f64).collect();
        assert!(bolus_times.iter().all(|t| meal_times.contains(t)));
    }

    #[test]
    fn slots_are_checked() {
        assert!(RlController::new(policy(AgentKind::Bolus, 25.0), None, calculator()).is_err());
        assert!(RlController::new(policy(AgentKind::Basal, 60.0), Some(policy(AgentKind::Basal, 60.0)), calculator()).is_err());
    }

    #[test]
    fn frozen_policy_is_deterministic() {
        let p = policy(AgentKind::Basal, 60.0);
        let obs = vec![0.3; 28];
        let a = p.act(&obs).unwrap();
        assert_eq!(a, p.act(&obs).unwrap());
        assert!((0.0..=60.0).contains(&a));
    }
}
