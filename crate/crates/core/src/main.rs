use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mapf_egt::baselines::astar_plan;
use mapf_egt::bench::{
    ess_config, evaluate, learner_seed, report_csv, run_experiment, run_sweep, train_model, Algorithm, Axis,
    ExperimentConfig, MapSource, Model, RawConfig, SweepSpec,
};
use mapf_egt::egt::ess_test;
use mapf_egt::egt::TrainingStats;
use mapf_egt::gridworld::sample_initial;
use mapf_egt::seed::{self, stream};
use mapf_egt::{Error, Policy, Result};

#[derive(Parser)]
#[command(name = "mapf-egt", version, about = "Multi-agent path finding experiments on grid worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (1 = reproducible mode, 0 = all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra configuration entry, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random map and print it in the text map format
    GenMap(Common),
    /// Train the configured algorithm and write its policy snapshot
    Train(Common),
    /// Train (or load a policy) and evaluate; writes one CSV row
    Eval {
        #[command(flatten)]
        common: Common,
        /// Evaluate this policy snapshot instead of training
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Sweep over grid sizes
    SweepGrid(Common),
    /// Sweep over agent counts
    SweepAgents(Common),
    /// Train EGT, invade it, and report stability
    EssTest(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn load_raw(common: &Common) -> Result<RawConfig> {
    let mut raw = match &common.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    for pair in &common.set {
        raw.set_pair(pair)?;
    }
    if let Some(seed) = common.seed {
        raw.set("seed", &seed.to_string())?;
    }
    if let Some(threads) = common.threads {
        raw.set("threads", &threads.to_string())?;
    }
    Ok(raw)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenMap(common) => {
            let cfg = ExperimentConfig::from_raw(&load_raw(&common)?)?;
            if matches!(cfg.map, MapSource::File(_)) {
                return Err(Error::Config("gen-map needs generator settings, not map.file".into()));
            }
            write_out(common.out.as_deref(), &cfg.load_map()?.to_text())
        }
        Command::Train(common) => {
            let cfg = ExperimentConfig::from_raw(&load_raw(&common)?)?;
            let map = cfg.load_map()?;
            let trained = train_model(&cfg, &map)?;
            let text = match &trained.model {
                Model::Policy(policy) => policy.to_snapshot(&map),
                Model::Planner => {
                    let world = cfg.world(&map);
                    let mut rng = seed::rng_from(seed::derive(cfg.seed, &[stream::EVAL]), &[0, 0]);
                    let starts = sample_initial(&map, world.n_agents, &mut rng)?;
                    astar_plan(&map, &starts, world.horizon)?.export()
                }
            };
            write_out(common.out.as_deref(), &text)?;
            if let Some(out) = &common.out {
                if !trained.table_snapshot.is_empty() {
                    write_out(Some(&with_suffix(out, ".table")), &trained.table_snapshot)?;
                }
                let s = trained.stats;
                println!(
                    "algorithm={} episodes={} policy_updates={} goal_reaches={} train_time_s={:.3}",
                    cfg.algorithm, s.episodes_run, s.policy_updates, s.goal_reach_count, trained.train_time_s
                );
            }
            Ok(())
        }
        Command::Eval { common, policy } => {
            let cfg = ExperimentConfig::from_raw(&load_raw(&common)?)?;
            let outcome = match policy {
                Some(path) => {
                    let map = cfg.load_map()?;
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })?;
                    let model = Model::Policy(Policy::parse_snapshot(&text, &map)?);
                    evaluate(&cfg, &map, &model, &TrainingStats::default(), 0.0)
                }
                None => run_experiment(&cfg),
            };
            outcome.clone()?;
            write_out(common.out.as_deref(), &report_csv(cfg.algorithm, cfg.seed, &outcome, cfg.timings))
        }
        Command::SweepGrid(common) => {
            let raw = load_raw(&common)?;
            let spec = SweepSpec::from_raw(&raw, Axis::GridSize, &[20, 50, 100])?;
            sweep(&raw, &spec, common.out.as_deref())
        }
        Command::SweepAgents(common) => {
            let mut raw = load_raw(&common)?;
            let spec = SweepSpec::from_raw(&raw, Axis::Agents, &[2, 10, 50, 100])?;
            if !["map.file", "map.size", "map.width", "map.height"].iter().any(|k| raw.contains(k)) {
                raw.set("map.size", "100")?;
            }
            if !raw.contains("map.file") && !raw.contains("map.goals") {
                let most = spec.values.iter().copied().max().unwrap_or(1);
                raw.set("map.goals", &most.to_string())?;
            }
            sweep(&raw, &spec, common.out.as_deref())
        }
        Command::EssTest(common) => {
            let raw = load_raw(&common)?;
            let cfg = ExperimentConfig {
                algorithm: Algorithm::Egt,
                ..ExperimentConfig::from_raw(&raw)?
            };
            let ess = ess_config(&raw)?;
            let map = cfg.load_map()?;
            let r = ess_test(
                &map,
                cfg.world(&map),
                cfg.egt_params(&map),
                &ess,
                learner_seed(cfg.seed, Algorithm::Egt),
                cfg.threads,
            )?;
            let text = format!(
                "p_new={}\nextra_episodes={}\nargmax_agreement={:.6}\nfitness_before={:.6}\nfitness_after={:.6}\nis_ess={}\n",
                r.p_new, r.extra_episodes, r.argmax_agreement, r.fitness_before, r.fitness_after, r.is_ess
            );
            write_out(common.out.as_deref(), &text)
        }
    }
}

fn sweep(raw: &RawConfig, spec: &SweepSpec, out: Option<&Path>) -> Result<()> {
    let base = ExperimentConfig::from_raw(raw)?;
    let result = run_sweep(spec, &base)?;
    write_out(out, &result.csv)?;
    if let Some(out) = out {
        write_out(Some(&with_suffix(out, ".summary.csv")), &result.summary_csv)?;
    }
    Ok(())
}
