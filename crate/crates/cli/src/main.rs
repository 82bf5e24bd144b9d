use std::path::PathBuf;
use std::process::ExitCode;

use basal_bolus::scenario::ScenarioId;
use basal_bolus::training::AgentKind;
use basal_bolus_cli::{
    cmd_cohort, cmd_evaluate, cmd_inspect_checkpoint, cmd_plot_cvga, cmd_simulate, cmd_train, load_cohort, Arm, ArmKind, CliError,
    CliResult, RunConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "basal-bolus", version, about = "Closed-loop basal-bolus insulin dosing workbench")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides `output_dir` and the BASAL_BOLUS_OUTPUT_DIR variable.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    scenario: Option<ScenarioId>,
    #[arg(long, global = true)]
    cohort_size: Option<usize>,
    #[arg(long, global = true)]
    cohort_seed: Option<u64>,
    #[arg(long, global = true)]
    run_seed: Option<u64>,
    #[arg(long, global = true)]
    days: Option<u32>,
    /// Worker threads for patient rollouts; 1 runs everything on the main thread.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the virtual-patient cohort file.
    Cohort,
    /// Simulate every patient under one arm and write trace and dose CSVs.
    Simulate {
        #[arg(long, value_enum, default_value_t = ArmKind::Conventional)]
        arm: ArmKind,
        #[command(flatten)]
        sources: Sources,
    },
    /// Train one stage of the curriculum.
    Train {
        #[arg(value_enum)]
        stage: Stage,
        /// Acceptance-run profile: 3 patients, 300 episodes per stage.
        #[arg(long)]
        desk: bool,
        /// Episodes for this stage.
        #[arg(long)]
        episodes: Option<usize>,
        /// Print a progress line every N episodes (0 = quiet).
        #[arg(long, default_value_t = 10)]
        progress: usize,
        #[command(flatten)]
        sources: Sources,
    },
    /// Metrics for one arm, or a paired comparison of two, plus CVGA output.
    Evaluate {
        #[arg(long, value_enum, default_value_t = ArmKind::Conventional)]
        arm_a: ArmKind,
        #[arg(long, value_enum)]
        arm_b: Option<ArmKind>,
        #[command(flatten)]
        sources: Sources,
    },
    /// Print a checkpoint's header.
    InspectCheckpoint { path: PathBuf },
    /// Render an SVG from a CVGA CSV.
    PlotCvga {
        csv: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value = "CVGA")]
        title: String,
    },
}

#[derive(Args)]
struct Sources {
    /// Cohort file; generated from the config when omitted.
    #[arg(long)]
    cohort: Option<PathBuf>,
    /// Basal checkpoint; defaults to `<output_dir>/basal.ckpt`.
    #[arg(long)]
    basal: Option<PathBuf>,
    /// Bolus checkpoint; defaults to `<output_dir>/bolus.ckpt`.
    #[arg(long)]
    bolus: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Basal,
    Bolus,
}

impl From<Stage> for AgentKind {
    fn from(s: Stage) -> Self {
        match s {
            Stage::Basal => AgentKind::Basal,
            Stage::Bolus => AgentKind::Bolus,
        }
    }
}

fn load_config(g: &Global, desk: bool) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if desk {
        cfg.apply_desk();
    }
    cfg.resolve_output_dir(g.output_dir.clone());
    if let Some(s) = g.scenario {
        cfg.scenario = s;
    }
    if let Some(n) = g.cohort_size {
        cfg.cohort_size = n;
    }
    if let Some(s) = g.cohort_seed {
        cfg.cohort_seed = s;
    }
    if let Some(s) = g.run_seed {
        cfg.run_seed = s;
    }
    if let Some(d) = g.days {
        cfg.days = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    match cli.command {
        Command::Cohort => {
            let cfg = load_config(g, false)?;
            println!("{}", cmd_cohort(&cfg)?.display());
        }
        Command::Simulate { arm, sources } => {
            let cfg = load_config(g, false)?;
            let arm = Arm::load(arm, &cfg, sources.basal.as_deref(), sources.bolus.as_deref())?;
            let cohort = load_cohort(&cfg, sources.cohort.as_deref())?;
            println!("{}", cmd_simulate(&cfg, &arm, &cohort)?.display());
        }
        Command::Train { stage, desk, episodes, progress, sources } => {
            let mut cfg = load_config(g, desk)?;
            if let Some(n) = episodes {
                match stage {
                    Stage::Basal => cfg.basal.episodes = n,
                    Stage::Bolus => cfg.bolus.episodes = n,
                }
            }
            let cohort = load_cohort(&cfg, sources.cohort.as_deref())?;
            let out = cmd_train(&cfg, stage.into(), &cohort, sources.basal.as_deref(), progress)?;
            println!("{} episodes, checkpoint step {}", out.log.len(), out.checkpoint.params.step);
        }
        Command::Evaluate { arm_a, arm_b, sources } => {
            let cfg = load_config(g, false)?;
            let a = Arm::load(arm_a, &cfg, sources.basal.as_deref(), sources.bolus.as_deref())?;
            let b = arm_b.map(|k| Arm::load(k, &cfg, sources.basal.as_deref(), sources.bolus.as_deref())).transpose()?;
            let cohort = load_cohort(&cfg, sources.cohort.as_deref())?;
            let out = cmd_evaluate(&cfg, &a, b.as_ref(), &cohort)?;
            print!("{}", out.table.to_text());
        }
        Command::InspectCheckpoint { path } => print!("{}", cmd_inspect_checkpoint(&path)?),
        Command::PlotCvga { csv, out, title } => {
            let n = cmd_plot_cvga(&csv, &out, &title)?;
            println!("{n} points -> {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.global.threads.max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).use_current_thread().build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::TrainingAbort(t) = &e {
                eprintln!("  {} episodes logged; last good checkpoint saved: {}", t.log.len(), t.last_good.is_some());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
