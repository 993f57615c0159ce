use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use noncoop::agent::train::write_curve_csv;
use noncoop::agent::{evaluate, reinforce_train, EvalSet, QuestionPlayer, RandomAgent};
use noncoop::game::{GameRecord, QuestionSpace, SceneConfig};
use noncoop::harness::{
    compute_corpus_stats, emit_plot_data, eval_metrics, run_experiment, write_game_log_file, Checkpoint,
    CorpusFormat, EvalMetrics, ExperimentConfig, StrategyKind,
};
use noncoop::rng::seeded;
use noncoop::theory::{lemma1_mc_check, phat_concentration_check, thm1_battery, InstanceLimits};
use noncoop::Error;
use noncoop_service::{load_checkpoint_dir, AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "noncoop", version, about = "Guessing games with partially non-cooperative answerers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play evaluation games and write them as a JSONL game log.
    Simulate(SimulateArgs),
    /// Pretrain and then reinforce a question-player; saves a checkpoint.
    Train(TrainArgs),
    /// Run the strategy sweep over NC rates and seeds; writes result and plot CSVs.
    Evaluate(EvaluateArgs),
    /// Corpus statistics of a game log or an external corpus.
    Stats(StatsArgs),
    /// Randomized checks of the cooperation-error bound and the concentration inequalities.
    VerifyTheory(TheoryArgs),
    /// Start the HTTP play service.
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
struct WorldArgs {
    /// Probability that a game's answerer is non-cooperative.
    #[arg(long = "p-nc", default_value_t = 0.5)]
    p_nc: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "scene-objects", default_value_t = 8)]
    scene_objects: usize,
    #[arg(long, default_value_t = noncoop::game::DEFAULT_MAX_ROUNDS)]
    rounds: usize,
}

impl WorldArgs {
    fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            p_nc_grid: vec![self.p_nc],
            seeds: vec![self.seed],
            scene: SceneConfig::with_objects(self.scene_objects),
            max_rounds: self.rounds,
            ..ExperimentConfig::default()
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    world: WorldArgs,
    /// Number of games.
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    /// `none` plays the pretrained player, `random` the uniform baseline.
    #[arg(long, default_value = "none")]
    reward: String,
    /// Play a saved player instead; its scene config and round cap win.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    world: WorldArgs,
    /// coop, object, mixed:<λ> or none.
    #[arg(long, default_value = "object")]
    reward: String,
    #[arg(long, default_value_t = 4000)]
    episodes: usize,
    #[arg(long = "eval-size", default_value_t = 1000)]
    eval_size: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Comma-separated NC rates [default: 0.3,0.5,0.7].
    #[arg(long = "p-nc", value_delimiter = ',')]
    p_nc: Option<Vec<f64>>,
    /// Comma-separated strategies: coop, object, mixed:<λ>, none, random
    /// [default: all five with mixed:0.5].
    #[arg(long, value_delimiter = ',')]
    reward: Option<Vec<String>>,
    /// Comma-separated run seeds [default: 0,1,2].
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long = "scene-objects")]
    scene_objects: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long = "eval-size")]
    eval_size: Option<usize>,
    /// Full experiment config as JSON; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads, 0 for all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// game-log or guesswhat-json.
    #[arg(long, default_value = "game-log")]
    format: String,
    /// Also write stats.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random instances for the bound battery.
    #[arg(long, default_value_t = 500)]
    instances: usize,
    /// Confidence parameter.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Also write battery.csv and summary.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// A checkpoint file; repeat for several. Ids are file stems.
    #[arg(long)]
    checkpoint: Vec<PathBuf>,
    /// Load every *.json checkpoint in this directory.
    #[arg(long = "checkpoint-dir")]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Round cap for every session; defaults to each checkpoint's own.
    #[arg(long)]
    rounds: Option<usize>,
    /// Append finished games to this JSONL file.
    #[arg(long)]
    log: Option<PathBuf>,
}

/// A failure with its exit status: 2 for configuration, 3 for data.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_data_error() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn data_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 3,
        message: message.into(),
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_sweep(a),
        Command::Stats(a) => stats(a),
        Command::VerifyTheory(a) => verify_theory(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| config_error(format!("cannot create {}: {e}", dir.display())))
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    print_line(&serde_json::to_string_pretty(value).map_err(Error::from)?)
}

/// Like `println!`, but a closed pipe ends output quietly instead of panicking.
fn print_line(line: &str) -> CliResult {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(data_error(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, text).map_err(|e| data_error(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct RunSummary {
    games: PathBuf,
    metrics: EvalMetrics,
}

fn simulate(a: SimulateArgs) -> CliResult {
    let mut cfg = a.world.experiment();
    let kind = StrategyKind::from_reward_flag(&a.reward)?;
    if kind.reward().is_some() {
        return Err(config_error("simulate plays untrained agents; use --reward none or random"));
    }
    let checkpoint = a.checkpoint.as_deref().map(Checkpoint::load).transpose()?;
    if let Some(ck) = &checkpoint {
        cfg.scene = ck.scene.clone();
        cfg.max_rounds = ck.max_rounds;
    }
    cfg.validate()?;
    if a.episodes == 0 {
        return Err(config_error("--episodes must be positive"));
    }
    let eval = EvalSet::draw(&cfg.env(a.world.p_nc), a.world.seed, a.episodes)?;
    let records: Vec<GameRecord> = match (&checkpoint, kind) {
        (Some(ck), _) => evaluate(&ck.player, &eval)?,
        (None, StrategyKind::Random) => evaluate(
            &RandomAgent {
                space: QuestionSpace::for_vocab(&cfg.scene.vocab()),
            },
            &eval,
        )?,
        (None, _) => evaluate(&cfg.pretrained_player(a.world.seed)?, &eval)?,
    };
    create_dir(&a.out)?;
    let games = a.out.join("games.jsonl");
    write_game_log_file(&games, &records)?;
    print_json(&RunSummary {
        games,
        metrics: eval_metrics(&records)?,
    })
}

#[derive(Serialize)]
struct TrainConfigRecord<'a> {
    experiment: &'a ExperimentConfig,
    strategy: StrategyKind,
}

#[derive(Serialize)]
struct TrainSummary {
    checkpoint: PathBuf,
    curve: PathBuf,
    train_nc_fraction: f64,
    metrics: EvalMetrics,
}

fn train(a: TrainArgs) -> CliResult {
    let mut cfg = a.world.experiment();
    cfg.rl.episodes = a.episodes;
    cfg.eval_size = a.eval_size;
    let kind = StrategyKind::from_reward_flag(&a.reward)?;
    if kind == StrategyKind::Random {
        return Err(config_error("the random baseline has nothing to train"));
    }
    cfg.strategies = vec![kind];
    cfg.validate()?;
    if a.episodes == 0 {
        return Err(config_error("--episodes must be positive"));
    }
    let seed = a.world.seed;
    let env = cfg.env(a.world.p_nc);
    let eval = EvalSet::draw(&env, seed, cfg.eval_size)?;
    let player: QuestionPlayer = cfg.pretrained_player(seed)?;
    let outcome = reinforce_train(&player, &env, &cfg.reinforce_config(kind, seed), Some(&eval))?;
    let metrics = eval_metrics(&evaluate(&outcome.player, &eval)?)?;
    let record = TrainConfigRecord {
        experiment: &cfg,
        strategy: kind,
    };
    let ck = Checkpoint::new(outcome.player, cfg.scene.clone(), cfg.max_rounds, &record, seed)?;
    create_dir(&a.out)?;
    let checkpoint = a.out.join("checkpoint.json");
    ck.save(&checkpoint)?;
    let curve = a.out.join("curve.csv");
    let file = std::fs::File::create(&curve).map_err(Error::from)?;
    write_curve_csv(&outcome.curve, file)?;
    print_json(&TrainSummary {
        checkpoint,
        curve,
        train_nc_fraction: outcome.nc_fraction,
        metrics,
    })
}

fn evaluate_sweep(a: EvaluateArgs) -> CliResult {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(grid) = a.p_nc {
        cfg.p_nc_grid = grid;
    }
    if let Some(seeds) = a.seed {
        cfg.seeds = seeds;
    }
    if let Some(rewards) = a.reward {
        cfg.strategies = rewards
            .iter()
            .map(|r| StrategyKind::from_reward_flag(r))
            .collect::<Result<_, _>>()?;
    }
    if let Some(n) = a.episodes {
        cfg.rl.episodes = n;
    }
    if let Some(n) = a.scene_objects {
        cfg.scene = SceneConfig::with_objects(n);
    }
    if let Some(n) = a.rounds {
        cfg.max_rounds = n;
    }
    if let Some(n) = a.eval_size {
        cfg.eval_size = n;
    }
    cfg.threads = a.threads;
    let table = run_experiment(&cfg)?;
    create_dir(&a.out)?;
    let results = a.out.join("results.csv");
    let file = std::fs::File::create(&results).map_err(Error::from)?;
    table.write_csv(file)?;
    let plots = emit_plot_data(&table, &a.out)?;
    write_json(&a.out.join("config.json"), &cfg)?;
    print_line(&results.display().to_string())?;
    for p in plots {
        print_line(&p.display().to_string())?;
    }
    Ok(())
}

fn stats(a: StatsArgs) -> CliResult {
    let format: CorpusFormat = a.format.parse()?;
    let stats = compute_corpus_stats(&a.corpus, format)?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_json(&dir.join("stats.json"), &stats)?;
    }
    print_json(&stats)
}

#[derive(Serialize)]
struct TheorySummary {
    instances: usize,
    bound_violations: usize,
    min_margin: f64,
    lemma_violation_freq: f64,
    lemma_bound: f64,
    lemma_passes: bool,
    nc_rate_violation_freq: f64,
    nc_rate_bound: f64,
    nc_rate_radius: f64,
    nc_rate_passes: bool,
}

fn verify_theory(a: TheoryArgs) -> CliResult {
    if a.instances == 0 {
        return Err(config_error("--instances must be positive"));
    }
    let mut rng = seeded(a.seed);
    let rows = thm1_battery(a.instances, &InstanceLimits::default(), a.delta, &mut rng)?;
    let lemma = lemma1_mc_check(
        0.3,
        0.1,
        200,
        2000,
        noncoop::theory::concentration::bernoulli_pair(0.5, 0.8),
        &mut rng,
    )?;
    let (phat, radius) = phat_concentration_check(0.3, 200, a.delta, 5000, &mut rng)?;
    let summary = TheorySummary {
        instances: rows.len(),
        bound_violations: rows.iter().filter(|r| !r.holds).count(),
        min_margin: rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min),
        lemma_violation_freq: lemma.violation_freq,
        lemma_bound: lemma.bound,
        lemma_passes: lemma.passes,
        nc_rate_violation_freq: phat.violation_freq,
        nc_rate_bound: phat.bound,
        nc_rate_radius: radius,
        nc_rate_passes: phat.passes,
    };
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let file = std::fs::File::create(dir.join("battery.csv")).map_err(Error::from)?;
        noncoop::theory::bounds::write_battery_csv(&rows, file)?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    print_json(&summary)?;
    if summary.bound_violations > 0 || !summary.lemma_passes || !summary.nc_rate_passes {
        return Err(Failure {
            code: 1,
            message: "a theory check failed".into(),
        });
    }
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult {
    let mut checkpoints = match &a.checkpoint_dir {
        Some(dir) => load_checkpoint_dir(dir)?,
        None => Default::default(),
    };
    for path in &a.checkpoint {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| config_error(format!("bad checkpoint path {}", path.display())))?;
        checkpoints.insert(id, Checkpoint::load(path)?);
    }
    if checkpoints.is_empty() {
        return Err(config_error("give --checkpoint or --checkpoint-dir"));
    }
    let state = AppState::new(
        checkpoints,
        ServiceConfig {
            max_rounds: a.rounds,
            log_path: a.log,
        },
    )
    .map_err(|e| config_error(e.to_string()))?;
    let state = Arc::new(state);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| config_error(e.to_string()))?;
    eprintln!(
        "serving {} on http://{}",
        state.checkpoint_ids().collect::<Vec<_>>().join(", "),
        a.addr
    );
    runtime
        .block_on(noncoop_service::serve(&a.addr, state))
        .map_err(|e| config_error(format!("{}: {e}", a.addr)))
}
