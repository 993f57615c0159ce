//! Supervised pretraining, REINFORCE fine-tuning and evaluation rollouts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::belief::{belief_update, information_gain, BeliefState};
use super::guesser::GuesserParams;
use super::player::{QuestionPlayer, Tracking};
use super::policy::{grad_log_prob, probabilities, PolicyInput, PolicyParams};
use super::reward::RewardSpec;
use crate::answerers::{sample_answerer, AnswerStrategy, StrategyPool};
use crate::error::{Error, Result};
use crate::game::{
    generate_scene, play_episode, run_episode, truth_answer, CoopLabel, DialogueTurn, GameRecord,
    QuestionAgent, Scene, SceneConfig,
};
use crate::rng::{derive_seed, seeded, stream};

/// Where training and evaluation scenes come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Random(SceneConfig),
    /// Drawn uniformly from a fixed list.
    Fixed(Vec<Scene>),
}

impl SceneSource {
    fn draw(&self, seed: u64) -> Result<Scene> {
        let mut rng = seeded(seed);
        match self {
            SceneSource::Random(cfg) => generate_scene(cfg, &mut rng),
            SceneSource::Fixed(scenes) if scenes.is_empty() => {
                Err(Error::InvalidConfig("empty fixed scene list".into()))
            }
            SceneSource::Fixed(scenes) => Ok(scenes[rng.gen_range(0..scenes.len())].clone()),
        }
    }
}

/// The simulated world a question-player is trained and evaluated in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainEnv {
    pub scenes: SceneSource,
    pub pool: StrategyPool,
    pub p_nc: f64,
    pub max_rounds: usize,
    /// Debug switch: every game is cooperative and `p_nc` is ignored.
    #[serde(default)]
    pub force_cooperative: bool,
}

/// One drawn game before it is played.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSpec {
    pub scene: Scene,
    pub answerer: AnswerStrategy,
    pub label: CoopLabel,
    pub seed: u64,
}

impl TrainEnv {
    pub fn new(scenes: SceneConfig, p_nc: f64, max_rounds: usize) -> Self {
        TrainEnv {
            scenes: SceneSource::Random(scenes),
            pool: StrategyPool::scripted(),
            p_nc,
            max_rounds,
            force_cooperative: false,
        }
    }

    pub fn cooperative(scenes: SceneConfig, max_rounds: usize) -> Self {
        TrainEnv {
            force_cooperative: true,
            ..TrainEnv::new(scenes, 0.5, max_rounds)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(Error::InvalidConfig("max_rounds must be at least 1".into()));
        }
        if let SceneSource::Random(cfg) = &self.scenes {
            cfg.validate()?;
        }
        if !self.force_cooperative && !(self.p_nc > 0.0 && self.p_nc < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "p_nc must lie in the open interval (0, 1), got {}",
                self.p_nc
            )));
        }
        Ok(())
    }

    fn draw_with(&self, seed: u64, index: u64, streams: [u64; 3]) -> Result<EpisodeSpec> {
        let scene = self.scenes.draw(derive_seed(seed, streams[0], index))?;
        let (answerer, label) = if self.force_cooperative {
            (AnswerStrategy::Cooperative, CoopLabel::Cooperative)
        } else {
            let mut rng = seeded(derive_seed(seed, streams[1], index));
            sample_answerer(self.p_nc, &self.pool, &mut rng)?
        };
        Ok(EpisodeSpec {
            scene,
            answerer,
            label,
            seed: derive_seed(seed, streams[2], index),
        })
    }

    /// The `index`-th training game of run `seed`.
    pub fn training_episode(&self, seed: u64, index: u64) -> Result<EpisodeSpec> {
        self.draw_with(seed, index, [stream::SCENE, stream::COOPERATION, stream::EPISODE])
    }

    /// The `index`-th evaluation game of run `seed`.
    pub fn eval_episode(&self, seed: u64, index: u64) -> Result<EpisodeSpec> {
        self.draw_with(
            seed,
            index,
            [stream::EVAL_SCENE, stream::EVAL_COOPERATION, stream::EVAL_EPISODE],
        )
    }
}

/// A fixed set of evaluation games, shared by every agent evaluated on it.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSet {
    pub max_rounds: usize,
    pub episodes: Vec<EpisodeSpec>,
}

impl EvalSet {
    pub fn draw(env: &TrainEnv, seed: u64, size: usize) -> Result<Self> {
        env.validate()?;
        let episodes = (0..size as u64)
            .map(|i| env.eval_episode(seed, i))
            .collect::<Result<_>>()?;
        Ok(EvalSet {
            max_rounds: env.max_rounds,
            episodes,
        })
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn nc_fraction(&self) -> f64 {
        let nc = self.episodes.iter().filter(|e| e.label.is_nc()).count();
        nc as f64 / self.episodes.len().max(1) as f64
    }
}

pub fn evaluate<A: QuestionAgent>(agent: &A, eval: &EvalSet) -> Result<Vec<GameRecord>> {
    eval.episodes
        .iter()
        .map(|e| run_episode(agent, &e.answerer, &e.scene, eval.max_rounds, e.seed))
        .collect()
}

/// Object and cooperation error of a batch of finished games.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchErrors {
    pub oer: f64,
    pub cer: f64,
}

pub fn batch_errors(records: &[GameRecord]) -> BatchErrors {
    let n = records.len().max(1) as f64;
    let wrong_obj = records.iter().filter(|r| r.object_correct() != Some(true)).count();
    let wrong_coop = records.iter().filter(|r| r.coop_correct() != Some(true)).count();
    BatchErrors {
        oer: wrong_obj as f64 / n,
        cer: wrong_coop as f64 / n,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub n_games: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            n_games: 200,
            epochs: 8,
            lr: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainOutcome {
    pub policy: PolicyParams,
    pub guesser: GuesserParams,
    /// Mean cross-entropy to the teacher before training and after each epoch.
    pub loss_history: Vec<f64>,
}

/// The teacher's choice: the question with the largest expected information
/// gain, lowest index on ties.
pub fn teacher_choice(player: &QuestionPlayer, belief: &BeliefState, scene: &Scene) -> usize {
    let gains: Vec<f64> = player
        .space()
        .questions()
        .iter()
        .map(|q| information_gain(belief, scene, q))
        .collect();
    super::belief::argmax(&gains)
}

fn imitation_loss(policy: &PolicyParams, data: &[(PolicyInput, usize)]) -> f64 {
    let total: f64 = data
        .iter()
        .map(|(input, k)| -probabilities(policy, input)[*k].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / data.len() as f64
}

/// Fit the policy to an information-gain teacher on cooperative self-play.
///
/// Games are played by the teacher against the cooperative oracle; the
/// policy is then fitted to the teacher's choices by full-batch gradient
/// descent on cross-entropy. The guesser is set to the belief argmax.
pub fn pretrain_supervised(
    player: &QuestionPlayer,
    env: &TrainEnv,
    cfg: &PretrainConfig,
) -> Result<PretrainOutcome> {
    if cfg.n_games == 0 {
        return Err(Error::InvalidConfig("pretraining needs at least one game".into()));
    }
    player.validate()?;
    let mut data = Vec::new();
    for i in 0..cfg.n_games as u64 {
        let scene = env.scenes.draw(derive_seed(cfg.seed, stream::PRETRAIN, i))?;
        player.layout.check_fits(&scene, env.max_rounds)?;
        let mut belief = BeliefState::uniform(scene.len(), player.lie_rate)?;
        let mut asked = vec![0u32; player.space().len()];
        for round in 1..=env.max_rounds {
            let input = PolicyInput::build(player.space(), &belief, &scene, round, env.max_rounds, &asked);
            let k = teacher_choice(player, &belief, &scene);
            let q = player.space().questions()[k];
            let a = truth_answer(&scene, scene.goal, &q);
            belief = belief_update(&belief, &scene, &q, a)?;
            asked[k] += 1;
            data.push((input, k));
        }
    }
    let mut policy = player.policy.clone();
    let mut loss_history = vec![imitation_loss(&policy, &data)];
    for _ in 0..cfg.epochs {
        let mut grad = vec![0.0; policy.theta.len()];
        for (input, k) in &data {
            for (g, d) in grad.iter_mut().zip(grad_log_prob(&policy, input, *k)) {
                *g += d;
            }
        }
        let scale = cfg.lr / data.len() as f64;
        for (t, g) in policy.theta.iter_mut().zip(&grad) {
            *t += scale * g;
        }
        loss_history.push(imitation_loss(&policy, &data));
    }
    Ok(PretrainOutcome {
        policy,
        guesser: GuesserParams::BeliefArgmax,
        loss_history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    None,
    /// Mean reward of all earlier episodes.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReinforceConfig {
    pub reward: RewardSpec,
    pub episodes: usize,
    /// Number of curve points; episodes are split evenly between them.
    pub epochs: usize,
    pub lr_policy: f64,
    pub lr_coop: f64,
    pub lr_guesser: f64,
    pub baseline: Baseline,
    pub train_coop: bool,
    pub train_guesser: bool,
    pub seed: u64,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        ReinforceConfig {
            reward: RewardSpec::ObjectOnly,
            episodes: 4000,
            epochs: 10,
            lr_policy: 0.05,
            lr_coop: 0.02,
            lr_guesser: 0.05,
            baseline: Baseline::Mean,
            train_coop: true,
            train_guesser: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    /// Mean training reward over the epoch; absent before training.
    pub mean_reward: Option<f64>,
    pub oer_eval: Option<f64>,
    pub cer_eval: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub player: QuestionPlayer,
    pub curve: Vec<CurvePoint>,
    /// Realized NC fraction of the training games.
    pub nc_fraction: f64,
}

/// Write a training curve as CSV.
pub fn write_curve_csv<W: std::io::Write>(curve: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "mean_reward", "oer_eval", "cer_eval"])?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in curve {
        w.write_record([
            p.epoch.to_string(),
            cell(p.mean_reward),
            cell(p.oer_eval),
            cell(p.cer_eval),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn eval_point(player: &QuestionPlayer, eval: Option<&EvalSet>, epoch: usize, mean_reward: Option<f64>) -> Result<CurvePoint> {
    let errors = match eval {
        Some(e) => Some(batch_errors(&evaluate(player, e)?)),
        None => None,
    };
    Ok(CurvePoint {
        epoch,
        mean_reward,
        oer_eval: errors.map(|e| e.oer),
        cer_eval: errors.map(|e| e.cer),
    })
}

/// Episodic REINFORCE on the terminal reward, with the cooperation
/// classifier (and optionally a linear guesser) trained on the same games.
pub fn reinforce_train(
    player: &QuestionPlayer,
    env: &TrainEnv,
    cfg: &ReinforceConfig,
    eval: Option<&EvalSet>,
) -> Result<TrainOutcome> {
    env.validate()?;
    cfg.reward.validate()?;
    if cfg.epochs == 0 {
        return Err(Error::InvalidConfig("at least one epoch is required".into()));
    }
    let mut player = player.clone();
    player.validate()?;
    let mut curve = vec![eval_point(&player, eval, 0, None)?];
    let mut reward_sum = 0.0;
    let mut nc = 0usize;
    let mut done = 0usize;
    for epoch in 1..=cfg.epochs {
        let end = cfg.episodes * epoch / cfg.epochs;
        let start = done;
        let mut epoch_reward = 0.0;
        while done < end {
            let spec = env.training_episode(cfg.seed, done as u64)?;
            let tracking = Tracking(&player);
            let (record, ep) = play_episode(&tracking, &spec.answerer, &spec.scene, env.max_rounds, spec.seed)?;
            let state = ep.state;
            let reward = cfg.reward.reward(&record)?;
            let baseline = match cfg.baseline {
                Baseline::None => 0.0,
                Baseline::Mean if done == 0 => 0.0,
                Baseline::Mean => reward_sum / done as f64,
            };
            let advantage = reward - baseline;
            let grad = state.grad.as_deref().unwrap_or(&[]);
            let abort = |player: &QuestionPlayer| Error::TrainingAborted {
                episode: done,
                episode_seed: spec.seed,
                param_norm: player.policy.norm(),
            };
            if grad.iter().any(|g| !g.is_finite()) || !advantage.is_finite() {
                return Err(abort(&player));
            }
            if cfg.lr_policy != 0.0 {
                for (t, g) in player.policy.theta.iter_mut().zip(grad) {
                    *t += cfg.lr_policy * advantage * g;
                }
            }
            if cfg.train_coop {
                let x = player.features(&state)?;
                player.coop.sgd_step(&x, record.coop_label, cfg.lr_coop)?;
            }
            if cfg.train_guesser {
                player.guesser.sgd_step(&state.belief, state.scene.goal, cfg.lr_guesser)?;
            }
            if !player.policy.is_finite() || !player.coop.is_finite() {
                return Err(abort(&player));
            }
            reward_sum += reward;
            epoch_reward += reward;
            nc += usize::from(record.coop_label.is_nc());
            done += 1;
        }
        let n = (end - start).max(1) as f64;
        curve.push(eval_point(&player, eval, epoch, Some(epoch_reward / n))?);
    }
    Ok(TrainOutcome {
        player,
        curve,
        nc_fraction: nc as f64 / cfg.episodes.max(1) as f64,
    })
}

/// Monte-Carlo REINFORCE estimate of `∇J(θ)` from `n` games with fixed
/// parameters. `baseline` is subtracted from every reward.
pub fn reinforce_gradient(
    player: &QuestionPlayer,
    env: &TrainEnv,
    reward: RewardSpec,
    n: usize,
    baseline: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    env.validate()?;
    let mut acc = vec![0.0; player.policy.theta.len()];
    let tracking = Tracking(player);
    for i in 0..n as u64 {
        let spec = env.training_episode(seed, i)?;
        let (record, ep) = play_episode(&tracking, &spec.answerer, &spec.scene, env.max_rounds, spec.seed)?;
        let adv = reward.reward(&record)? - baseline;
        for (a, g) in acc.iter_mut().zip(ep.state.grad.as_deref().unwrap_or(&[])) {
            *a += adv * g;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n.max(1) as f64);
    Ok(acc)
}

/// Mean reward of `n` games with fixed parameters.
pub fn mean_reward(player: &QuestionPlayer, env: &TrainEnv, reward: RewardSpec, n: usize, seed: u64) -> Result<f64> {
    env.validate()?;
    let mut total = 0.0;
    for i in 0..n as u64 {
        let spec = env.training_episode(seed, i)?;
        total += reward.reward(&run_episode(player, &spec.answerer, &spec.scene, env.max_rounds, spec.seed)?)?;
    }
    Ok(total / n.max(1) as f64)
}

/// Replay a record's dialogue through the question-player's belief model.
pub fn belief_trace(player: &QuestionPlayer, scene: &Scene, turns: &[DialogueTurn]) -> Result<Vec<BeliefState>> {
    let mut b = BeliefState::uniform(scene.len(), player.lie_rate)?;
    let mut trace = vec![b.clone()];
    for t in turns {
        b = belief_update(&b, scene, &t.question, t.answer)?;
        trace.push(b.clone());
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_env() -> TrainEnv {
        TrainEnv::new(SceneConfig::with_objects(4), 0.5, 5)
    }

    #[test]
    fn zero_learning_rate_keeps_theta() {
        let env = small_env();
        let mut player = QuestionPlayer::for_scenes(&SceneConfig::with_objects(4), 5).unwrap();
        player.policy.theta[3] = 0.7;
        let cfg = ReinforceConfig {
            episodes: 50,
            epochs: 2,
            lr_policy: 0.0,
            ..Default::default()
        };
        let out = reinforce_train(&player, &env, &cfg, None).unwrap();
        assert_eq!(out.player.policy, player.policy);
        assert_ne!(out.player.coop, player.coop);
        assert_eq!(out.curve.len(), 3);
    }

    #[test]
    fn pretraining_rejects_zero_games_and_descends() {
        let env = TrainEnv::cooperative(SceneConfig::with_objects(4), 5);
        let player = QuestionPlayer::for_scenes(&SceneConfig::with_objects(4), 5).unwrap();
        let cfg = PretrainConfig {
            n_games: 0,
            ..Default::default()
        };
        assert!(pretrain_supervised(&player, &env, &cfg).is_err());
        let out = pretrain_supervised(&player, &env, &PretrainConfig { n_games: 20, ..Default::default() }).unwrap();
        assert!(out.loss_history.last().unwrap() < &out.loss_history[0]);
        assert!(out.policy.gain_weight() > 0.0);
    }

    #[test]
    fn pretrained_player_beats_chance() {
        let cfg = SceneConfig::with_objects(4);
        let env = TrainEnv::cooperative(cfg.clone(), 5);
        let mut player = QuestionPlayer::for_scenes(&cfg, 5).unwrap();
        let out = pretrain_supervised(&player, &env, &PretrainConfig::default()).unwrap();
        player.policy = out.policy;
        let eval = EvalSet::draw(&env, 1, 300).unwrap();
        let e = batch_errors(&evaluate(&player, &eval).unwrap());
        assert!(e.oer < 0.75, "oer {}", e.oer);
    }

    #[test]
    fn object_reward_training_on_cooperative_games_improves() {
        let cfg = SceneConfig::with_objects(4);
        let env = TrainEnv::cooperative(cfg.clone(), 5);
        let player = QuestionPlayer::for_scenes(&cfg, 5).unwrap();
        let eval = EvalSet::draw(&env, 9, 500).unwrap();
        let rl = ReinforceConfig {
            episodes: 3000,
            epochs: 10,
            ..Default::default()
        };
        let out = reinforce_train(&player, &env, &rl, Some(&eval)).unwrap();
        let reward = |p: &CurvePoint| 1.0 - p.oer_eval.unwrap();
        let first = reward(&out.curve[0]);
        let last = reward(out.curve.last().unwrap());
        assert!(last > first, "eval reward {first} -> {last}");
        assert_eq!(out.nc_fraction, 0.0);
    }

    #[test]
    fn invalid_p_nc_is_rejected() {
        let env = TrainEnv::new(SceneConfig::default(), 1.0, 5);
        let player = QuestionPlayer::for_scenes(&SceneConfig::default(), 5).unwrap();
        assert!(matches!(
            reinforce_train(&player, &env, &ReinforceConfig::default(), None),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn diverging_training_aborts_with_diagnostics() {
        let env = small_env();
        let mut player = QuestionPlayer::for_scenes(&SceneConfig::with_objects(4), 5).unwrap();
        player.policy.theta[0] = f64::NAN;
        let cfg = ReinforceConfig {
            episodes: 5,
            epochs: 1,
            ..Default::default()
        };
        assert!(matches!(
            reinforce_train(&player, &env, &cfg, None),
            Err(Error::TrainingAborted { episode: 0, .. })
        ));
    }

    #[test]
    fn same_seed_same_training() {
        let env = small_env();
        let player = QuestionPlayer::for_scenes(&SceneConfig::with_objects(4), 5).unwrap();
        let cfg = ReinforceConfig {
            episodes: 40,
            epochs: 2,
            ..Default::default()
        };
        let a = reinforce_train(&player, &env, &cfg, None).unwrap();
        let b = reinforce_train(&player, &env, &cfg, None).unwrap();
        assert_eq!(a.player, b.player);
    }
}
