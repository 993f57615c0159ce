//! Exact expected reward by enumerating every dialogue of a tiny game.
//! Used as an oracle for the policy-gradient estimator.

use super::player::{EpisodeState, QuestionPlayer};
use super::policy::{grad_log_prob, probabilities};
use super::reward::RewardSpec;
use crate::answerers::{AnswerStrategy, BoundAnswerer, DecoyRule};
use crate::error::{Error, Result};
use crate::game::{CoopLabel, DialogueTurn, GameRecord, Scene};
use crate::rng::seeded;

/// Exact `J(θ)`, `∇J(θ)` and the per-coordinate second moment of the
/// REINFORCE term `(ρ − b)·∇log Pr(dialogue)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactObjective {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// `E[((ρ − b)·∂_i log Pr)²]` for the given baseline `b`.
    pub second_moment: Vec<f64>,
    pub dialogues: usize,
}

impl ExactObjective {
    /// Standard deviation of one REINFORCE sample, per coordinate.
    pub fn sample_sd(&self) -> Vec<f64> {
        self.second_moment
            .iter()
            .zip(&self.gradient)
            .map(|(m, g)| (m - g * g).max(0.0).sqrt())
            .collect()
    }
}

/// A weighted world: scenes, answer-players with their probabilities.
/// Probabilities over scenes and over answerers must each sum to 1.
#[derive(Clone, Debug)]
pub struct TinyWorld {
    pub scenes: Vec<(Scene, f64)>,
    pub answerers: Vec<(AnswerStrategy, f64)>,
    pub max_rounds: usize,
}

fn deterministic(strategy: &AnswerStrategy) -> bool {
    matches!(
        strategy,
        AnswerStrategy::Cooperative
            | AnswerStrategy::Spam(_)
            | AnswerStrategy::Contradict
            | AnswerStrategy::AlternateGoal(DecoyRule::Fixed(_))
    )
}

struct Walk<'a> {
    player: &'a QuestionPlayer,
    reward: RewardSpec,
    baseline: f64,
    scene: &'a Scene,
    answerer: &'a BoundAnswerer,
    label: CoopLabel,
    out: &'a mut ExactObjective,
}

impl Walk<'_> {
    fn visit(&mut self, state: &EpisodeState, prob: f64, score: &[f64]) -> Result<()> {
        let round = state.turns.len() + 1;
        if round > state.max_rounds {
            return self.leaf(state, prob, score);
        }
        let input = self.player.policy_input(state, round);
        let probs = probabilities(&self.player.policy, &input);
        let mut rng = seeded(0);
        for (k, &pk) in probs.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            let question = self.player.space().questions()[k];
            let answer = self.answerer.answer(self.scene, &state.turns, &question, &mut rng)?;
            let mut next = state.clone();
            next.pending = Some(k);
            self.player.observe(&mut next, &DialogueTurn { question, answer, round })?;
            let g = grad_log_prob(&self.player.policy, &input, k);
            let score: Vec<f64> = score.iter().zip(&g).map(|(a, b)| a + b).collect();
            self.visit(&next, prob * pk, &score)?;
        }
        Ok(())
    }

    fn leaf(&mut self, state: &EpisodeState, prob: f64, score: &[f64]) -> Result<()> {
        let record = GameRecord {
            scene: self.scene.clone(),
            turns: state.turns.clone(),
            coop_label: self.label,
            strategy_tag: self.answerer.tag(),
            object_guess: Some(self.player.object_guess(state)?),
            coop_guess: Some(self.player.coop_guess(state)?),
            seed: 0,
            notes: None,
        };
        let rho = self.reward.reward(&record)?;
        let adv = rho - self.baseline;
        self.out.value += prob * rho;
        for ((g, m), s) in self.out.gradient.iter_mut().zip(self.out.second_moment.iter_mut()).zip(score) {
            *g += prob * rho * s;
            *m += prob * (adv * s).powi(2);
        }
        self.out.dialogues += 1;
        Ok(())
    }
}

/// Enumerate all `K^R` dialogues of every (scene, answerer) pair. Only
/// deterministic answer-players are supported.
pub fn exact_objective(
    player: &QuestionPlayer,
    world: &TinyWorld,
    reward: RewardSpec,
    baseline: f64,
) -> Result<ExactObjective> {
    reward.validate()?;
    let total = |w: &mut dyn Iterator<Item = f64>| w.sum::<f64>();
    if (total(&mut world.scenes.iter().map(|s| s.1)) - 1.0).abs() > 1e-9
        || (total(&mut world.answerers.iter().map(|a| a.1)) - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidConfig("scene and answerer weights must each sum to 1".into()));
    }
    if let Some((s, _)) = world.answerers.iter().find(|(s, _)| !deterministic(s)) {
        return Err(Error::Precondition(format!("answer-player {s} is not deterministic")));
    }
    let n = player.policy.theta.len();
    let mut out = ExactObjective {
        value: 0.0,
        gradient: vec![0.0; n],
        second_moment: vec![0.0; n],
        dialogues: 0,
    };
    let mut rng = seeded(0);
    for (scene, ws) in &world.scenes {
        for (strategy, wa) in &world.answerers {
            let answerer = strategy.bind(scene, &mut rng)?;
            let start = player.start(scene, world.max_rounds)?;
            Walk {
                player,
                reward,
                baseline,
                scene,
                label: answerer.label(),
                answerer: &answerer,
                out: &mut out,
            }
            .visit(&start, ws * wa, &vec![0.0; n])?;
        }
    }
    Ok(out)
}
