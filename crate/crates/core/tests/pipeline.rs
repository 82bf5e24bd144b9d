use basal_bolus::eval::{cvga_point, glycemic_metrics, EvalWindow};
use basal_bolus::sac::{Checkpoint, SacConfig};
use basal_bolus::scenario::{generate, ScenarioId};
use basal_bolus::sim::{make_cohort, simulate, DoseKind, PatientParams, SimOutput};
use basal_bolus::therapy::{ConventionalController, TherapyRules};
use basal_bolus::training::{train_basal, train_bolus, AgentKind, FrozenPolicy, RlController, StageConfig, TrainingConfig};

fn conventional(p: &PatientParams, scenario: ScenarioId, seed: u64) -> SimOutput {
    let rules = TherapyRules::default();
    let mut c = ConventionalController::new(rules.settings_for(p).unwrap(), p.body_weight).unwrap();
    let plan = generate(scenario, 14, seed).unwrap();
    simulate(p, &plan, &mut c, 14, seed).unwrap()
}

#[test]
fn conventional_therapy_lands_in_the_calibration_band() {
    let cohort = make_cohort(10, 42).unwrap();
    let tir: Vec<f64> = cohort
        .iter()
        .map(|p| {
            let out = conventional(p, ScenarioId::A, 0);
            glycemic_metrics(&out.trace, &out.doses, EvalWindow::default()).unwrap().pct_in_70_180
        })
        .collect();
    let mean = tir.iter().sum::<f64>() / tir.len() as f64;
    assert!((50.0..=85.0).contains(&mean), "population TIR {mean}");
}

#[test]
fn conventional_arm_dose_log_and_metrics_agree() {
    let p = make_cohort(1, 42).unwrap()[0];
    let out = conventional(&p, ScenarioId::A, 0);
    assert_eq!(out.trace.samples.len(), 14 * 1440);
    let basal: Vec<f64> = out.doses.events.iter().filter(|d| d.kind == DoseKind::LongBasal).map(|d| d.amount).collect();
    assert_eq!(basal.len(), 14);
    assert!(basal.iter().all(|&b| (b - 0.4 * p.body_weight).abs() < 1e-12));
    let m = glycemic_metrics(&out.trace, &out.doses, EvalWindow::default()).unwrap();
    assert!((m.avg_daily_basal - 0.4 * p.body_weight).abs() < 1e-9);
    assert!((m.pct_below_70 + m.pct_in_70_180 + m.pct_above_180 - 100.0).abs() < 1e-9);
    let c = cvga_point(&out.trace, EvalWindow::default()).unwrap();
    assert!((50.0..=110.0).contains(&c.x) && (110.0..=400.0).contains(&c.y));
}

#[test]
fn insulin_resistance_raises_hyperglycemia() {
    let cohort = make_cohort(4, 42).unwrap();
    let above = |s: ScenarioId| -> f64 {
        cohort
            .iter()
            .map(|p| {
                let out = conventional(p, s, 0);
                glycemic_metrics(&out.trace, &out.doses, EvalWindow::default()).unwrap().pct_above_180
            })
            .sum::<f64>()
    };
    assert!(above(ScenarioId::C) > above(ScenarioId::B));
}

#[test]
fn trained_checkpoints_survive_disk_and_drive_a_simulation() {
    let cohort = make_cohort(1, 42).unwrap();
    let stage = |high: f64| StageConfig {
        episodes: 2,
        episode_days: 1,
        warmup_episodes: 1,
        updates_per_decision: 1,
        reward_scale: 1.0,
        sac: SacConfig { hidden_sizes: vec![8], batch_size: 4, action_high: high, ..SacConfig::default() },
    };
    let cfg = TrainingConfig { basal: stage(60.0), bolus: stage(25.0), ..TrainingConfig::default() };
    let basal = train_basal(&cohort, &cfg).unwrap().checkpoint;
    let bolus = train_bolus(&basal, &cohort, &cfg).unwrap().checkpoint;

    let dir = tempfile::tempdir().unwrap();
    let (bp, op) = (dir.path().join("basal.ckpt"), dir.path().join("bolus.ckpt"));
    basal.save(&bp).unwrap();
    bolus.save(&op).unwrap();
    let basal = FrozenPolicy::from_checkpoint(&Checkpoint::load(&bp).unwrap(), AgentKind::Basal).unwrap();
    let bolus = FrozenPolicy::from_checkpoint(&Checkpoint::load(&op).unwrap(), AgentKind::Bolus).unwrap();

    let p = cohort[0];
    let calc = ConventionalController::new(TherapyRules::default().settings_for(&p).unwrap(), p.body_weight).unwrap();
    let mut rl = RlController::new(basal, Some(bolus), calc).unwrap();
    let out = simulate(&p, &generate(ScenarioId::A, 2, 0).unwrap(), &mut rl, 2, 0).unwrap();
    assert_eq!(out.trace.samples.len(), 2 * 1440);
    assert_eq!(out.doses.events.iter().filter(|d| d.kind == DoseKind::LongBasal).count(), 2);
}
