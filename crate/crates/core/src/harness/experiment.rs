//! The communication-strategy sweep: train each strategy at each NC rate and
//! evaluate all of them on one shared evaluation set.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::agent::{
    evaluate, pretrain_supervised, reinforce_train, Baseline, EvalSet, PretrainConfig, QuestionPlayer, RandomAgent,
    ReinforceConfig, RewardSpec, TrainEnv,
};
use crate::answerers::StrategyPool;
use crate::error::{Error, Result};
use crate::game::{CoopLabel, GameRecord, SceneConfig};
use crate::theory::{cer, oer, oer_conditional, LabeledSample};

/// A communication strategy compared in the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyKind {
    /// Uniform guesses.
    Random,
    /// Pretrained policy; only the cooperation classifier is trained.
    NoRl,
    CoopOnly,
    ObjectOnly,
    Mixed(f64),
}

impl StrategyKind {
    pub fn defaults() -> Vec<StrategyKind> {
        vec![
            StrategyKind::CoopOnly,
            StrategyKind::ObjectOnly,
            StrategyKind::Mixed(0.5),
            StrategyKind::NoRl,
            StrategyKind::Random,
        ]
    }

    pub fn reward(self) -> Option<RewardSpec> {
        match self {
            StrategyKind::CoopOnly => Some(RewardSpec::CoopOnly),
            StrategyKind::ObjectOnly => Some(RewardSpec::ObjectOnly),
            StrategyKind::Mixed(l) => Some(RewardSpec::Mixed(l)),
            StrategyKind::Random | StrategyKind::NoRl => None,
        }
    }

    /// Parse the command-line reward syntax: `coop`, `object`, `mixed:<λ>`,
    /// `none` or `random`.
    pub fn from_reward_flag(s: &str) -> Result<Self> {
        match s {
            "coop" => Ok(StrategyKind::CoopOnly),
            "object" => Ok(StrategyKind::ObjectOnly),
            "none" => Ok(StrategyKind::NoRl),
            "random" => Ok(StrategyKind::Random),
            _ => match s.strip_prefix("mixed:") {
                Some(l) => {
                    let l: f64 = l
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad mixing weight in {s:?}")))?;
                    RewardSpec::mixed(l)?;
                    Ok(StrategyKind::Mixed(l))
                }
                None => Err(Error::InvalidConfig(format!(
                    "unknown reward {s:?}; expected coop, object, mixed:<λ>, none or random"
                ))),
            },
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Random => f.write_str("random"),
            StrategyKind::NoRl => f.write_str("no_rl"),
            StrategyKind::CoopOnly => f.write_str("coop_only"),
            StrategyKind::ObjectOnly => f.write_str("object_only"),
            StrategyKind::Mixed(l) => write!(f, "mixed:{l}"),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StrategyKind::Random),
            "no_rl" => Ok(StrategyKind::NoRl),
            "coop_only" => Ok(StrategyKind::CoopOnly),
            "object_only" => Ok(StrategyKind::ObjectOnly),
            other => StrategyKind::from_reward_flag(other),
        }
    }
}

impl TryFrom<String> for StrategyKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StrategyKind> for String {
    fn from(k: StrategyKind) -> String {
        k.to_string()
    }
}

/// Reinforcement-learning settings shared by every trained strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlSettings {
    pub episodes: usize,
    pub epochs: usize,
    pub lr_policy: f64,
    pub lr_coop: f64,
    pub baseline: Baseline,
}

impl Default for RlSettings {
    fn default() -> Self {
        let d = ReinforceConfig::default();
        RlSettings {
            episodes: d.episodes,
            epochs: d.epochs,
            lr_policy: d.lr_policy,
            lr_coop: d.lr_coop,
            baseline: d.baseline,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub p_nc_grid: Vec<f64>,
    pub strategies: Vec<StrategyKind>,
    pub seeds: Vec<u64>,
    pub scene: SceneConfig,
    pub max_rounds: usize,
    pub lie_rate: f64,
    pub pretrain: PretrainConfig,
    pub rl: RlSettings,
    pub eval_size: usize,
    pub pool: StrategyPool,
    /// Worker threads; 0 uses the available parallelism. Results do not
    /// depend on it.
    #[serde(default)]
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p_nc_grid: vec![0.3, 0.5, 0.7],
            strategies: StrategyKind::defaults(),
            seeds: vec![0, 1, 2],
            scene: SceneConfig::with_objects(8),
            max_rounds: crate::game::DEFAULT_MAX_ROUNDS,
            lie_rate: crate::agent::DEFAULT_LIE_RATE,
            pretrain: PretrainConfig::default(),
            rl: RlSettings::default(),
            eval_size: 1000,
            pool: StrategyPool::scripted(),
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_nc_grid.is_empty() || self.p_nc_grid.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::InvalidConfig(
                "p_nc grid must be non-empty with values in (0, 1)".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("at least one strategy is required".into()));
        }
        if self.eval_size == 0 {
            return Err(Error::InvalidConfig("evaluation set must be non-empty".into()));
        }
        for s in &self.strategies {
            if let Some(r) = s.reward() {
                r.validate()?;
            }
        }
        self.scene.validate()
    }

    pub fn env(&self, p_nc: f64) -> TrainEnv {
        TrainEnv {
            pool: self.pool.clone(),
            ..TrainEnv::new(self.scene.clone(), p_nc, self.max_rounds)
        }
    }

    fn base_player(&self) -> Result<QuestionPlayer> {
        let mut p = QuestionPlayer::for_scenes(&self.scene, self.max_rounds)?;
        p.lie_rate = self.lie_rate;
        Ok(p)
    }

    /// The pretrained player shared by every strategy of run `seed`.
    pub fn pretrained_player(&self, seed: u64) -> Result<QuestionPlayer> {
        let mut player = self.base_player()?;
        let cfg = PretrainConfig {
            seed,
            ..self.pretrain.clone()
        };
        let env = TrainEnv::cooperative(self.scene.clone(), self.max_rounds);
        let out = pretrain_supervised(&player, &env, &cfg)?;
        player.policy = out.policy;
        player.guesser = out.guesser;
        Ok(player)
    }

    pub fn reinforce_config(&self, kind: StrategyKind, seed: u64) -> ReinforceConfig {
        ReinforceConfig {
            reward: kind.reward().unwrap_or(RewardSpec::ObjectOnly),
            episodes: self.rl.episodes,
            epochs: self.rl.epochs,
            lr_policy: if kind.reward().is_some() { self.rl.lr_policy } else { 0.0 },
            lr_coop: self.rl.lr_coop,
            lr_guesser: 0.0,
            baseline: self.rl.baseline,
            train_coop: true,
            train_guesser: false,
            seed,
        }
    }
}

/// Errors of one batch of evaluation games.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub n: usize,
    pub nc_fraction: f64,
    pub oer: f64,
    pub oer_cp: Option<f64>,
    pub oer_nc: Option<f64>,
    pub cer: f64,
}

pub fn eval_metrics(records: &[GameRecord]) -> Result<EvalMetrics> {
    let (s, objects, coop) = LabeledSample::from_records(records)?;
    let o = |x: usize| objects[x];
    Ok(EvalMetrics {
        n: s.m(),
        nc_fraction: crate::theory::p_hat(&s),
        oer: oer(&s, o),
        oer_cp: oer_conditional(&s, o, CoopLabel::Cooperative).ok(),
        oer_nc: oer_conditional(&s, o, CoopLabel::NonCooperative).ok(),
        cer: cer(&s, |x| coop[x]),
    })
}

/// One cell of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub p_nc: f64,
    pub pct_cooperative: f64,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub n_eval: usize,
    /// Realized NC fraction of the evaluation games.
    pub eval_nc_fraction: f64,
    /// Realized NC fraction of the training games; absent when untrained.
    pub train_episodes: usize,
    pub train_nc_fraction: Option<f64>,
    pub oer: f64,
    pub oer_cp: Option<f64>,
    pub oer_nc: Option<f64>,
    pub cer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
        Ok(ResultTable { rows })
    }

    pub fn cells(&self, p_nc: f64, strategy: StrategyKind) -> impl Iterator<Item = &ResultRow> {
        self.rows
            .iter()
            .filter(move |r| r.p_nc == p_nc && r.strategy == strategy)
    }
}

/// Mean of `metric` over the seeds of one cell.
pub fn seed_mean(table: &ResultTable, p_nc: f64, strategy: StrategyKind, metric: impl Fn(&ResultRow) -> Option<f64>) -> Option<f64> {
    let vals: Vec<f64> = table.cells(p_nc, strategy).filter_map(metric).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

struct Unit {
    grid: usize,
    seed: usize,
    strategy: usize,
}

fn cell_error(p_nc: f64, strategy: StrategyKind, seed: u64) -> impl FnOnce(Error) -> Error {
    move |e| Error::Cell {
        p_nc,
        strategy: strategy.to_string(),
        seed,
        source: Box::new(e),
    }
}

fn run_unit(
    cfg: &ExperimentConfig,
    pretrained: &QuestionPlayer,
    p_nc: f64,
    kind: StrategyKind,
    seed: u64,
) -> Result<ResultRow> {
    let env = cfg.env(p_nc);
    let eval = EvalSet::draw(&env, seed, cfg.eval_size)?;
    let (records, train_nc, episodes) = match kind {
        StrategyKind::Random => {
            let agent = RandomAgent {
                space: pretrained.space().clone(),
            };
            (evaluate(&agent, &eval)?, None, 0)
        }
        _ => {
            let rl = cfg.reinforce_config(kind, seed);
            let out = reinforce_train(pretrained, &env, &rl, None)?;
            (evaluate(&out.player, &eval)?, Some(out.nc_fraction), rl.episodes)
        }
    };
    let m = eval_metrics(&records)?;
    Ok(ResultRow {
        p_nc,
        pct_cooperative: ((1.0 - p_nc) * 1e6).round() / 1e4,
        strategy: kind,
        seed,
        n_eval: m.n,
        eval_nc_fraction: eval.nc_fraction(),
        train_episodes: episodes,
        train_nc_fraction: train_nc,
        oer: m.oer,
        oer_cp: m.oer_cp,
        oer_nc: m.oer_nc,
        cer: m.cer,
    })
}

fn parallel_map<T: Send + Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = if threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        threads
    }
    .min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                out.lock().expect("result slot lock")[i] = Some(r);
            });
        }
    });
    out.into_inner()
        .expect("result slot lock")
        .into_iter()
        .map(|r| r.expect("every unit ran"))
        .collect()
}

/// Run the whole sweep. Rows are ordered by grid point, strategy, then seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let pretrained: Vec<Result<QuestionPlayer>> = parallel_map(&cfg.seeds, cfg.threads, |&s| cfg.pretrained_player(s));
    let pretrained: Vec<QuestionPlayer> = pretrained.into_iter().collect::<Result<_>>()?;
    let mut units = Vec::new();
    for grid in 0..cfg.p_nc_grid.len() {
        for strategy in 0..cfg.strategies.len() {
            for seed in 0..cfg.seeds.len() {
                units.push(Unit { grid, seed, strategy });
            }
        }
    }
    let rows = parallel_map(&units, cfg.threads, |u| {
        let p_nc = cfg.p_nc_grid[u.grid];
        let kind = cfg.strategies[u.strategy];
        let seed = cfg.seeds[u.seed];
        run_unit(cfg, &pretrained[u.seed], p_nc, kind, seed).map_err(cell_error(p_nc, kind, seed))
    });
    Ok(ResultTable {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// `|f − p| ≤ 3·√(p(1 − p)/n)`
pub fn within_binomial_band(fraction: f64, p: f64, n: usize) -> bool {
    (fraction - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            p_nc_grid: vec![0.5],
            seeds: vec![3],
            scene: SceneConfig::with_objects(4),
            pretrain: PretrainConfig {
                n_games: 20,
                ..Default::default()
            },
            rl: RlSettings {
                episodes: 60,
                epochs: 2,
                ..Default::default()
            },
            eval_size: 60,
            threads: 2,
            ..Default::default()
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::defaults() {
            assert_eq!(k.to_string().parse::<StrategyKind>().unwrap(), k);
        }
        assert_eq!(StrategyKind::from_reward_flag("mixed:0.25").unwrap(), StrategyKind::Mixed(0.25));
        assert!(StrategyKind::from_reward_flag("mixed:2").is_err());
        assert!(StrategyKind::from_reward_flag("greedy").is_err());
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = tiny();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&ExperimentConfig { threads: 1, ..cfg }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 5);
        let mut csv_a = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        let back = ResultTable::read_csv(csv_a.as_slice()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn eval_set_is_shared_across_strategies() {
        let t = run_experiment(&tiny()).unwrap();
        let f = t.rows[0].eval_nc_fraction;
        assert!(t.rows.iter().all(|r| r.eval_nc_fraction == f));
    }

    #[test]
    fn invalid_grid_is_rejected() {
        let cfg = ExperimentConfig {
            p_nc_grid: vec![0.0],
            ..tiny()
        };
        assert!(matches!(run_experiment(&cfg), Err(Error::InvalidConfig(_))));
    }
}
