//! Run configuration: one TOML file per run; flags and the output-dir
//! environment variable override it.

use std::path::{Path, PathBuf};

use basal_bolus::eval::EvalWindow;
use basal_bolus::scenario::ScenarioId;
use basal_bolus::therapy::TherapyRules;
use basal_bolus::training::{StageConfig, TrainingConfig, DEFAULT_DEAD_ZONE, DESK_COHORT_SIZE};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const OUTPUT_DIR_ENV: &str = "BASAL_BOLUS_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioId,
    pub cohort_size: usize,
    pub cohort_seed: u64,
    /// Seeds meal plans, network initialization, exploration and replay.
    pub run_seed: u64,
    pub days: u32,
    pub eval_window: EvalWindow,
    pub therapy: TherapyRules,
    pub dead_zone: f64,
    pub basal: StageConfig,
    pub bolus: StageConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            scenario: ScenarioId::A,
            cohort_size: 10,
            cohort_seed: 42,
            run_seed: 0,
            days: 14,
            eval_window: EvalWindow::default(),
            therapy: TherapyRules::default(),
            dead_zone: DEFAULT_DEAD_ZONE,
            basal: t.basal,
            bolus: t.bolus,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.cohort_size == 0 {
            return Err(CliError::Config("cohort_size must be >= 1".into()));
        }
        if self.days == 0 {
            return Err(CliError::Config("days must be >= 1".into()));
        }
        self.eval_window.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.eval_window.last_day > self.days {
            return Err(CliError::Config(format!(
                "eval_window ends on day {} but runs last {} days",
                self.eval_window.last_day, self.days
            )));
        }
        self.training().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// Training settings; `run_seed` seeds both stages and the meal plans.
    pub fn training(&self) -> TrainingConfig {
        let mut t = TrainingConfig {
            scenario: self.scenario,
            meal_seed: self.run_seed,
            dead_zone: self.dead_zone,
            therapy: self.therapy,
            basal: self.basal.clone(),
            bolus: self.bolus.clone(),
        };
        t.basal.sac.seed = self.run_seed;
        t.bolus.sac.seed = self.run_seed;
        t
    }

    /// Acceptance-run profile: 3 patients and the desk training settings.
    pub fn apply_desk(&mut self) {
        let desk = TrainingConfig::desk();
        self.cohort_size = DESK_COHORT_SIZE;
        self.basal = desk.basal;
        self.bolus = desk.bolus;
    }

    /// Output directory after the environment override.
    pub fn resolve_output_dir(&mut self, flag: Option<PathBuf>) {
        if let Some(dir) = flag {
            self.output_dir = dir;
        } else if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.output_dir = PathBuf::from(dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = RunConfig::from_toml("scenario = \"C\"\ncohort_size = 3\n[basal]\nepisodes = 5\n").unwrap();
        assert_eq!(cfg.scenario, ScenarioId::C);
        assert_eq!(cfg.basal.episodes, 5);
        assert_eq!(cfg.bolus.episodes, RunConfig::default().bolus.episodes);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for text in ["cohort_size = 0", "days = 0", "colour = 1", "days = 7", "[basal.sac]\ngamma = 1.5"] {
            let err = RunConfig::from_toml(text).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn run_seed_reaches_both_stages() {
        let cfg = RunConfig { run_seed: 77, ..RunConfig::default() };
        let t = cfg.training();
        assert_eq!((t.meal_seed, t.basal.sac.seed, t.bolus.sac.seed), (77, 77, 77));
    }

    #[test]
    fn desk_profile() {
        let mut cfg = RunConfig::default();
        cfg.apply_desk();
        assert_eq!(cfg.cohort_size, 3);
        assert_eq!((cfg.basal.episodes, cfg.bolus.episodes), (300, 300));
    }
}
