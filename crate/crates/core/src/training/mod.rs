//! Two-stage curriculum: the basal agent learns with calculator boluses, then
//! it is frozen and the bolus agent learns in the same loop.
//!
//! An episode is one week from the protocol start. Patients are visited
//! round-robin, so a single policy pair serves the whole cohort. The first
//! `warmup_episodes` act uniformly at random; after that every decision is
//! followed by `updates_per_decision` gradient steps.

mod log;
mod observation;
mod policy;

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use log::{moving_average, Improvement, RewardLog, RewardRow};
pub use observation::{
    basal_observation, bolus_observation, build_observation, AgentKind, ObservationInput, ObservationSpec, BASAL_OBS_DIM, BG_SCALE,
    BOLUS_CADENCE_MIN, BOLUS_HISTORY, BOLUS_OBS_DIM, BOLUS_UNIT_SCALE, CARB_SCALE, FASTING_WINDOW_MIN,
};
pub use policy::{CheckpointMeta, FrozenPolicy, RlController, DEFAULT_DEAD_ZONE};

use crate::error::{ensure, Error, Result};
use crate::reward::{basal_daily_reward, bolus_step_reward, BolusRewardInput};
use crate::rng::{stream, streams, SimRng};
use crate::sac::{Checkpoint, ReplayBuffer, Sac, SacConfig, Transition};
use crate::scenario::{generate, MealPlan, ScenarioId};
use crate::sim::{apply_insulin_resistance, ClosedLoop, Dose, DoseEvent, MealSchedule, PatientParams, PatientState};
use crate::therapy::{ConventionalController, TherapyRules};
use crate::MINUTES_PER_DAY;

/// Settings of one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub episodes: usize,
    pub episode_days: u32,
    pub warmup_episodes: usize,
    pub updates_per_decision: usize,
    /// Multiplies rewards before they enter the replay buffer; logged
    /// rewards are unscaled.
    pub reward_scale: f64,
    pub sac: SacConfig,
}

impl StageConfig {
    pub fn basal_default() -> Self {
        Self {
            episodes: 2000,
            episode_days: 7,
            warmup_episodes: 10,
            updates_per_decision: 1,
            reward_scale: 1.0,
            sac: SacConfig { action_low: 0.0, action_high: 60.0, ..SacConfig::default() },
        }
    }

    pub fn bolus_default() -> Self {
        Self { sac: SacConfig { action_low: 0.0, action_high: 25.0, ..SacConfig::default() }, ..Self::basal_default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.sac.validate()?;
        ensure(self.episode_days >= 1, || "episode_days must be >= 1".into())?;
        ensure(self.reward_scale > 0.0 && self.reward_scale.is_finite(), || "reward_scale must be > 0".into())?;
        ensure(self.sac.action_low >= 0.0, || "insulin actions cannot be negative".into())
    }
}

impl Default for StageConfig {
    fn default() -> Self {
        Self::basal_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub scenario: ScenarioId,
    /// Seeds per-episode meal plans in the randomized scenarios.
    pub meal_seed: u64,
    pub dead_zone: f64,
    pub therapy: TherapyRules,
    pub basal: StageConfig,
    pub bolus: StageConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioId::A,
            meal_seed: 0,
            dead_zone: DEFAULT_DEAD_ZONE,
            therapy: TherapyRules::default(),
            basal: StageConfig::basal_default(),
            bolus: StageConfig::bolus_default(),
        }
    }
}

/// Acceptance-run cohort size.
pub const DESK_COHORT_SIZE: usize = 3;
pub const DESK_EPISODES: usize = 300;

impl TrainingConfig {
    /// Acceptance-run profile: 300 episodes per stage with smaller networks
    /// and batches so both stages fit a single-core budget. Basal rewards
    /// (up to ~445 a day) enter the replay buffer scaled to order one. The
    /// bolus policy starts at the dead-zone edge with a wide spread so "no
    /// injection" is explored from the first update.
    pub fn desk() -> Self {
        let mut cfg = Self::default();
        for stage in [&mut cfg.basal, &mut cfg.bolus] {
            stage.episodes = DESK_EPISODES;
            stage.sac.hidden_sizes = vec![64, 64];
            stage.sac.batch_size = 64;
        }
        cfg.basal.reward_scale = 0.01;
        cfg.bolus.sac.initial_action = Some(0.1);
        cfg.bolus.sac.initial_log_std = Some(-1.0);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.basal.validate()?;
        self.bolus.validate()?;
        ensure(self.dead_zone >= 0.0, || "dead_zone must be >= 0".into())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: RewardLog,
}

/// A training run that stopped early. `last_good` holds the agent as it was
/// before the failing episode.
#[derive(Debug, thiserror::Error)]
#[error("training aborted{}: {source}", episode.map(|e| format!(" in episode {e}")).unwrap_or_default())]
pub struct TrainError {
    pub source: Error,
    pub episode: Option<usize>,
    pub last_good: Option<Box<Checkpoint>>,
    pub log: RewardLog,
}

impl From<Error> for TrainError {
    fn from(source: Error) -> Self {
        Self { source, episode: None, last_good: None, log: RewardLog::default() }
    }
}

/// Everything recorded about one episode.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub reward: f64,
    pub trace: Vec<f64>,
    pub doses: Vec<DoseEvent>,
    /// Basal stage: one entry per day.
    pub daily_rewards: Vec<f64>,
    /// Bolus stage: one entry per 15-minute decision.
    pub bolus_steps: Vec<BolusRewardInput>,
    pub decisions: usize,
    pub updates: u64,
    pub critic_loss_sum: f64,
    pub actor_loss_sum: f64,
}

impl EpisodeRecord {
    fn new() -> Self {
        Self {
            reward: 0.0,
            trace: Vec::new(),
            doses: Vec::new(),
            daily_rewards: Vec::new(),
            bolus_steps: Vec::new(),
            decisions: 0,
            updates: 0,
            critic_loss_sum: 0.0,
            actor_loss_sum: 0.0,
        }
    }
}

/// Acting and learning side of the agent being trained.
pub struct Learner<'a> {
    pub agent: &'a mut Sac,
    pub replay: &'a mut ReplayBuffer,
    pub act_rng: &'a mut SimRng,
    pub update_rng: &'a mut SimRng,
    pub random_actions: bool,
    pub updates_per_decision: usize,
    pub reward_scale: f64,
}

impl Learner<'_> {
    /// `(units, normalized)`.
    fn choose(&mut self, obs: &[f64]) -> Result<(f64, f64)> {
        if self.random_actions {
            let a: f64 = self.act_rng.random_range(-1.0..=1.0);
            Ok((self.agent.scale().to_units(a), a))
        } else {
            let (units, norm, _) = self.agent.act(obs, self.act_rng)?;
            Ok((units[0], norm[0]))
        }
    }

    fn observe(&mut self, mut t: Transition, rec: &mut EpisodeRecord) -> Result<()> {
        t.r *= self.reward_scale;
        self.replay.push(&t)?;
        rec.decisions += 1;
        if self.random_actions || self.replay.len() < self.agent.config.batch_size {
            return Ok(());
        }
        for _ in 0..self.updates_per_decision {
            let batch = self.replay.sample(self.agent.config.batch_size, self.update_rng)?;
            let stats = self.agent.update(&batch, self.update_rng)?;
            rec.updates += 1;
            rec.critic_loss_sum += stats.critic_loss;
            rec.actor_loss_sum += stats.actor_loss;
        }
        Ok(())
    }
}

fn effective_params(params: &PatientParams, plan: &MealPlan) -> Result<PatientParams> {
    if plan.sensitivity_reduction > 0.0 {
        apply_insulin_resistance(params, plan.sensitivity_reduction)
    } else {
        Ok(*params)
    }
}

/// Week with the learning basal agent and calculator boluses. The action on
/// day d is rewarded with the fasting window that closes day d.
pub fn basal_episode(
    params: &PatientParams,
    plan: &MealPlan,
    days: u32,
    rules: &TherapyRules,
    learner: &mut Learner<'_>,
) -> Result<EpisodeRecord> {
    let calculator = ConventionalController::new(rules.settings_for(params)?, params.body_weight)?;
    let horizon = days * MINUTES_PER_DAY;
    let mut lp = ClosedLoop::new(effective_params(params, plan)?, MealSchedule::from_plan(plan, horizon), PatientState::protocol_start())?;
    let mut rec = EpisodeRecord::new();
    let mut pending: Option<(Vec<f64>, f64)> = None;
    for t in 0..horizon {
        let mut doses = Vec::new();
        if t % MINUTES_PER_DAY == 0 {
            let (obs, _) = basal_observation(lp.trace(), t)?;
            let (units, norm) = learner.choose(&obs)?;
            doses.push(Dose::basal(units.max(0.0)));
            pending = Some((obs, norm));
        }
        if let Some(units) = calculator.meal_bolus(&lp.context())? {
            doses.push(Dose::bolus(units));
        }
        lp.advance(&doses)?;

        let now = t + 1;
        if now % MINUTES_PER_DAY == 0 {
            let window = &lp.trace()[(now - FASTING_WINDOW_MIN) as usize..now as usize];
            let r = basal_daily_reward(window)?;
            rec.daily_rewards.push(r);
            rec.reward += r;
            let (s_next, _) = basal_observation(lp.trace(), now)?;
            let (s, a) = pending.take().expect("a basal decision opens every day");
            learner.observe(Transition { s, a: vec![a], r, s_next, done: now == horizon }, &mut rec)?;
        }
    }
    let out = lp.finish();
    rec.trace = out.trace.samples;
    rec.doses = out.doses.events;
    Ok(rec)
}

/// Week with the frozen basal policy and the learning bolus agent. The
/// decision at t is rewarded with its action term and the BG at t + 15.
pub fn bolus_episode(
    params: &PatientParams,
    plan: &MealPlan,
    days: u32,
    basal: &FrozenPolicy,
    dead_zone: f64,
    learner: &mut Learner<'_>,
) -> Result<EpisodeRecord> {
    let horizon = days * MINUTES_PER_DAY;
    let mut lp = ClosedLoop::new(effective_params(params, plan)?, MealSchedule::from_plan(plan, horizon), PatientState::protocol_start())?;
    let mut rec = EpisodeRecord::new();
    let mut history = VecDeque::from(vec![0.0; BOLUS_HISTORY]);
    let mut pending: Option<PendingBolus> = None;

    for t in 0..horizon {
        let mut doses = Vec::new();
        if t % MINUTES_PER_DAY == 0 {
            let (obs, _) = basal_observation(lp.trace(), t)?;
            doses.push(Dose::basal(basal.act(&obs)?.max(0.0)));
        }
        if t % BOLUS_CADENCE_MIN == 0 {
            let carbs = lp.meals().carbs_starting_in(t, t + BOLUS_CADENCE_MIN);
            let obs = bolus_observation(lp.glucose(), carbs, history.make_contiguous())?;
            if let Some(p) = pending.take() {
                close_bolus_step(p, lp.glucose(), obs.clone(), false, learner, &mut rec)?;
            }
            let (units, norm) = learner.choose(&obs)?;
            let delivered = if units < dead_zone { 0.0 } else { units };
            history.pop_front();
            history.push_back(delivered);
            if delivered > 0.0 {
                doses.push(Dose::bolus(delivered));
            }
            pending = Some((obs, norm, delivered, carbs));
        }
        lp.advance(&doses)?;
    }
    let carbs_after = lp.meals().carbs_starting_in(horizon, horizon + BOLUS_CADENCE_MIN);
    let s_end = bolus_observation(lp.glucose(), carbs_after, history.make_contiguous())?;
    if let Some(p) = pending.take() {
        close_bolus_step(p, lp.glucose(), s_end, true, learner, &mut rec)?;
    }
    let out = lp.finish();
    rec.trace = out.trace.samples;
    rec.doses = out.doses.events;
    Ok(rec)
}

/// (obs, normalized action, delivered units, announced carbs)
type PendingBolus = (Vec<f64>, f64, f64, f64);

fn close_bolus_step(
    pending: PendingBolus,
    bg: f64,
    s_next: Vec<f64>,
    done: bool,
    learner: &mut Learner<'_>,
    rec: &mut EpisodeRecord,
) -> Result<()> {
    let (s, a, delivered, carbs) = pending;
    let step = BolusRewardInput { bg, prev_meal: carbs, prev_action: delivered };
    let r = bolus_step_reward(&step);
    rec.bolus_steps.push(step);
    rec.reward += r;
    learner.observe(Transition { s, a: vec![a], r, s_next, done }, rec)
}

fn episode_plan(cfg: &TrainingConfig, days: u32, episode: usize) -> Result<MealPlan> {
    generate(cfg.scenario, days, cfg.meal_seed.wrapping_add(episode as u64))
}

fn make_checkpoint(kind: AgentKind, agent: &Sac, cfg: &TrainingConfig, episodes: usize) -> Result<Checkpoint> {
    let meta = CheckpointMeta {
        kind,
        observation: ObservationSpec::for_kind(kind),
        dead_zone: cfg.dead_zone,
        scenario: cfg.scenario.to_string(),
        episodes,
    };
    let meta = serde_json::to_value(meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(Checkpoint::new(kind.as_str(), agent.obs_dim, agent.act_dim, agent.config.clone(), agent.params.clone(), meta))
}

/// Called after every finished episode with its row and record.
pub type EpisodeHook<'a> = dyn FnMut(&RewardRow, &EpisodeRecord) + 'a;

fn run_stage(
    kind: AgentKind,
    cohort: &[PatientParams],
    cfg: &TrainingConfig,
    stage: &StageConfig,
    mut episode: impl FnMut(&PatientParams, &MealPlan, &mut Learner<'_>) -> Result<EpisodeRecord>,
    hook: &mut EpisodeHook<'_>,
) -> std::result::Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if cohort.is_empty() {
        return Err(Error::Empty("cohort").into());
    }
    let obs_dim = ObservationSpec::for_kind(kind).dim;
    let mut agent = Sac::new(obs_dim, 1, stage.sac.clone())?;
    let mut replay = ReplayBuffer::new(stage.sac.replay_capacity, obs_dim, 1)?;
    let seed = stage.sac.seed;
    let (mut act_rng, mut update_rng, mut warm_rng) =
        (stream(seed, streams::POLICY), stream(seed, streams::REPLAY), stream(seed, streams::WARMUP));
    let mut log = RewardLog::default();

    for e in 0..stage.episodes {
        let patient = e % cohort.len();
        let last_good = agent.params.clone();
        let warmup = e < stage.warmup_episodes;
        let result = episode_plan(cfg, stage.episode_days, e).and_then(|plan| {
            let mut learner = Learner {
                agent: &mut agent,
                replay: &mut replay,
                act_rng: if warmup { &mut warm_rng } else { &mut act_rng },
                update_rng: &mut update_rng,
                random_actions: warmup,
                updates_per_decision: stage.updates_per_decision,
                reward_scale: stage.reward_scale,
            };
            episode(&cohort[patient], &plan, &mut learner)
        });
        match result {
            Ok(rec) => {
                let n = rec.updates.max(1) as f64;
                let row = RewardRow {
                    episode: e,
                    patient,
                    reward: rec.reward,
                    warmup,
                    updates: rec.updates,
                    mean_critic_loss: rec.critic_loss_sum / n,
                    mean_actor_loss: rec.actor_loss_sum / n,
                };
                hook(&row, &rec);
                log.rows.push(row);
            }
            Err(source) => {
                agent.params = last_good;
                let last_good = make_checkpoint(kind, &agent, cfg, e).ok().map(Box::new);
                return Err(TrainError { source, episode: Some(e), last_good, log });
            }
        }
    }
    let checkpoint = make_checkpoint(kind, &agent, cfg, stage.episodes)?;
    Ok(TrainOutcome { checkpoint, log })
}

/// Stage one.
pub fn train_basal(cohort: &[PatientParams], cfg: &TrainingConfig) -> std::result::Result<TrainOutcome, TrainError> {
    train_basal_with(cohort, cfg, &mut |_, _| {})
}

pub fn train_basal_with(
    cohort: &[PatientParams],
    cfg: &TrainingConfig,
    hook: &mut EpisodeHook<'_>,
) -> std::result::Result<TrainOutcome, TrainError> {
    let days = cfg.basal.episode_days;
    run_stage(AgentKind::Basal, cohort, cfg, &cfg.basal, |p, plan, l| basal_episode(p, plan, days, &cfg.therapy, l), hook)
}

/// Stage two, on top of a trained basal checkpoint that stays frozen.
pub fn train_bolus(basal: &Checkpoint, cohort: &[PatientParams], cfg: &TrainingConfig) -> std::result::Result<TrainOutcome, TrainError> {
    train_bolus_with(basal, cohort, cfg, &mut |_, _| {})
}

pub fn train_bolus_with(
    basal: &Checkpoint,
    cohort: &[PatientParams],
    cfg: &TrainingConfig,
    hook: &mut EpisodeHook<'_>,
) -> std::result::Result<TrainOutcome, TrainError> {
    let frozen = FrozenPolicy::from_checkpoint(basal, AgentKind::Basal)?;
    let days = cfg.bolus.episode_days;
    let dead_zone = cfg.dead_zone;
    run_stage(AgentKind::Bolus, cohort, cfg, &cfg.bolus, |p, plan, l| bolus_episode(p, plan, days, &frozen, dead_zone, l), hook)
}
