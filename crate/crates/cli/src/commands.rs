//! Subcommand bodies. Each one is a pure function of its config and
//! arguments; output files land under `cfg.output_dir`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use basal_bolus::eval::{
    compare_arms, cvga_point, glycemic_metrics, read_cvga_csv, render_cvga_svg, summarize_arm, write_cvga_csv, ArmReports, ComparisonTable,
    CvgaRecord,
};
use basal_bolus::sac::Checkpoint;
use basal_bolus::scenario::generate;
use basal_bolus::sim::{make_cohort, simulate, CohortFile, PatientParams, SimOutput};
use basal_bolus::therapy::ConventionalController;
use basal_bolus::training::{train_basal_with, train_bolus_with, AgentKind, FrozenPolicy, RewardLog, RlController, TrainOutcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const COHORT_FILE: &str = "cohort.toml";

pub fn checkpoint_path(dir: &Path, kind: AgentKind) -> PathBuf {
    dir.join(format!("{kind}.ckpt"))
}

pub fn reward_log_path(dir: &Path, kind: AgentKind) -> PathBuf {
    dir.join(format!("{kind}_rewards.csv"))
}

/// Which controller drives a simulated arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ArmKind {
    /// Bolus calculator plus fixed daily basal.
    Conventional,
    /// Trained basal and bolus agents.
    Rl,
    /// Trained basal agent with calculator boluses.
    RlBasal,
}

impl ArmKind {
    pub fn label(self) -> &'static str {
        match self {
            ArmKind::Conventional => "conventional",
            ArmKind::Rl => "rl",
            ArmKind::RlBasal => "rl-basal",
        }
    }
}

/// Arm plus the checkpoints it needs.
#[derive(Debug, Clone)]
pub struct Arm {
    pub kind: ArmKind,
    pub basal: Option<FrozenPolicy>,
    pub bolus: Option<FrozenPolicy>,
}

impl Arm {
    /// Loads checkpoints from the given paths, falling back to the run's
    /// output directory.
    pub fn load(kind: ArmKind, cfg: &RunConfig, basal: Option<&Path>, bolus: Option<&Path>) -> CliResult<Self> {
        let load = |k: AgentKind, p: Option<&Path>| -> CliResult<FrozenPolicy> {
            let path = p.map(Path::to_path_buf).unwrap_or_else(|| checkpoint_path(&cfg.output_dir, k));
            if !path.exists() {
                return Err(CliError::Config(format!("arm `{}` needs a {k} checkpoint; {} does not exist", kind.label(), path.display())));
            }
            let ckpt = Checkpoint::load(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            FrozenPolicy::from_checkpoint(&ckpt, k).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        };
        Ok(match kind {
            ArmKind::Conventional => Self { kind, basal: None, bolus: None },
            ArmKind::Rl => Self { kind, basal: Some(load(AgentKind::Basal, basal)?), bolus: Some(load(AgentKind::Bolus, bolus)?) },
            ArmKind::RlBasal => Self { kind, basal: Some(load(AgentKind::Basal, basal)?), bolus: None },
        })
    }

    fn run(&self, cfg: &RunConfig, patient: &PatientParams, id: usize) -> CliResult<SimOutput> {
        let plan = generate(cfg.scenario, cfg.days, meal_seed(cfg, id))?;
        let calculator = ConventionalController::new(cfg.therapy.settings_for(patient)?, patient.body_weight)?;
        let out = match &self.basal {
            None => {
                let mut c = calculator;
                simulate(patient, &plan, &mut c, cfg.days, cfg.run_seed)?
            }
            Some(basal) => {
                let mut c = RlController::new(basal.clone(), self.bolus.clone(), calculator)?;
                simulate(patient, &plan, &mut c, cfg.days, cfg.run_seed)?
            }
        };
        Ok(out)
    }
}

/// Meal plans differ across patients but not across arms.
pub fn meal_seed(cfg: &RunConfig, patient: usize) -> u64 {
    cfg.run_seed.wrapping_add(patient as u64)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(())
}

fn create_file(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot write {}", path.display()))?))
}

/// Cohort from a file, or generated from the config.
pub fn load_cohort(cfg: &RunConfig, file: Option<&Path>) -> CliResult<Vec<PatientParams>> {
    match file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Ok(CohortFile::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?.patients)
        }
        None => Ok(make_cohort(cfg.cohort_size, cfg.cohort_seed)?),
    }
}

pub fn cmd_cohort(cfg: &RunConfig) -> CliResult<PathBuf> {
    cfg.validate()?;
    let file = CohortFile { seed: cfg.cohort_seed, patients: make_cohort(cfg.cohort_size, cfg.cohort_seed)? };
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(COHORT_FILE);
    fs::write(&path, file.to_toml()?).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Runs every patient under one arm, in patient order regardless of the
/// thread count.
pub fn run_arm(cfg: &RunConfig, arm: &Arm, cohort: &[PatientParams]) -> CliResult<Vec<SimOutput>> {
    cohort.par_iter().enumerate().map(|(id, p)| arm.run(cfg, p, id)).collect()
}

pub fn cmd_simulate(cfg: &RunConfig, arm: &Arm, cohort: &[PatientParams]) -> CliResult<PathBuf> {
    cfg.validate()?;
    let outputs = run_arm(cfg, arm, cohort)?;
    let dir = cfg.output_dir.join("simulate").join(arm.kind.label());
    create_dir(&dir)?;
    for (id, out) in outputs.iter().enumerate() {
        out.trace.write_csv(create_file(&dir.join(format!("patient_{id:02}_trace.csv")))?)?;
        out.doses.write_csv(create_file(&dir.join(format!("patient_{id:02}_doses.csv")))?)?;
    }
    Ok(dir)
}

fn write_outcome(dir: &Path, kind: AgentKind, checkpoint: &Checkpoint, log: &RewardLog) -> CliResult<()> {
    create_dir(dir)?;
    checkpoint.save(&checkpoint_path(dir, kind))?;
    log.write_csv(create_file(&reward_log_path(dir, kind))?)?;
    Ok(())
}

fn progress(kind: AgentKind, every: usize) -> impl FnMut(&basal_bolus::training::RewardRow, &basal_bolus::training::EpisodeRecord) {
    move |row, _| {
        if every > 0 && (row.episode + 1) % every == 0 {
            eprintln!("{kind} episode {:>5}  patient {:>2}  reward {:>10.2}", row.episode + 1, row.patient, row.reward);
        }
    }
}

/// Trains one stage and writes `<stage>.ckpt` and `<stage>_rewards.csv`.
/// An aborted run leaves `<stage>.last_good.ckpt` and the partial log.
pub fn cmd_train(
    cfg: &RunConfig,
    kind: AgentKind,
    cohort: &[PatientParams],
    basal_checkpoint: Option<&Path>,
    progress_every: usize,
) -> CliResult<TrainOutcome> {
    cfg.validate()?;
    let training = cfg.training();
    let mut hook = progress(kind, progress_every);
    let result = match kind {
        AgentKind::Basal => train_basal_with(cohort, &training, &mut hook),
        AgentKind::Bolus => {
            let path = basal_checkpoint.map(Path::to_path_buf).unwrap_or_else(|| checkpoint_path(&cfg.output_dir, AgentKind::Basal));
            if !path.exists() {
                return Err(CliError::Config(format!("bolus training needs a basal checkpoint; {} does not exist", path.display())));
            }
            let basal = Checkpoint::load(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            FrozenPolicy::from_checkpoint(&basal, AgentKind::Basal).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            train_bolus_with(&basal, cohort, &training, &mut hook)
        }
    };
    match result {
        Ok(outcome) => {
            write_outcome(&cfg.output_dir, kind, &outcome.checkpoint, &outcome.log)?;
            Ok(outcome)
        }
        Err(e) => {
            create_dir(&cfg.output_dir)?;
            if let Some(good) = &e.last_good {
                good.save(&cfg.output_dir.join(format!("{kind}.last_good.ckpt")))?;
            }
            e.log.write_csv(create_file(&reward_log_path(&cfg.output_dir, kind))?)?;
            Err(CliError::TrainingAbort(Box::new(e)))
        }
    }
}

/// Files written by `evaluate`.
#[derive(Debug, Clone)]
pub struct EvaluationOutput {
    pub table: ComparisonTable,
    pub cvga: Vec<CvgaRecord>,
    pub dir: PathBuf,
}

fn arm_reports(cfg: &RunConfig, arm: &Arm, outputs: &[SimOutput]) -> CliResult<(ArmReports, Vec<CvgaRecord>)> {
    let mut patients = Vec::with_capacity(outputs.len());
    let mut cvga = Vec::with_capacity(outputs.len());
    for (id, out) in outputs.iter().enumerate() {
        patients.push((id as u32, glycemic_metrics(&out.trace, &out.doses, cfg.eval_window)?));
        let p = cvga_point(&out.trace, cfg.eval_window)?;
        cvga.push(CvgaRecord { patient_id: id as u32, arm: arm.kind.label().to_string(), x: p.x, y: p.y, zone: p.zone });
    }
    Ok((ArmReports { label: arm.kind.label().to_string(), patients }, cvga))
}

/// Metrics table for one arm, or the paired comparison of two, plus the
/// CVGA points and plot.
pub fn cmd_evaluate(cfg: &RunConfig, arm_a: &Arm, arm_b: Option<&Arm>, cohort: &[PatientParams]) -> CliResult<EvaluationOutput> {
    cfg.validate()?;
    let (reports_a, mut cvga) = arm_reports(cfg, arm_a, &run_arm(cfg, arm_a, cohort)?)?;
    let table = match arm_b {
        Some(b) => {
            let (reports_b, cvga_b) = arm_reports(cfg, b, &run_arm(cfg, b, cohort)?)?;
            cvga.extend(cvga_b);
            compare_arms(&reports_a, &reports_b)?
        }
        None => summarize_arm(&reports_a)?,
    };
    let dir = cfg.output_dir.join("evaluate");
    create_dir(&dir)?;
    table.write_csv(create_file(&dir.join("comparison.csv"))?)?;
    fs::write(dir.join("comparison.txt"), table.to_text()).context("cannot write comparison.txt")?;
    write_cvga_csv(&cvga, create_file(&dir.join("cvga.csv"))?)?;
    fs::write(dir.join("cvga.svg"), render_cvga_svg(&cvga, &format!("CVGA, scenario {}", cfg.scenario)))
        .context("cannot write cvga.svg")?;
    Ok(EvaluationOutput { table, cvga, dir })
}

pub fn cmd_inspect_checkpoint(path: &Path) -> CliResult<String> {
    let ckpt = Checkpoint::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(ckpt.describe())
}

/// Re-renders an SVG from a CVGA CSV.
pub fn cmd_plot_cvga(csv_path: &Path, svg_path: &Path, title: &str) -> CliResult<usize> {
    let file = File::open(csv_path).map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?;
    let records = read_cvga_csv(file)?;
    if let Some(parent) = svg_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(svg_path, render_cvga_svg(&records, title)).with_context(|| format!("cannot write {}", svg_path.display()))?;
    Ok(records.len())
}
