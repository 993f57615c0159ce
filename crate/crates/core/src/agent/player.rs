use rand::Rng;
use serde::{Deserialize, Serialize};

use super::belief::{belief_update, BeliefState};
use super::features::{dialogue_features, DialogueFeatures, FeatureLayout};
use super::guesser::{classify_cooperation, guess_object, CoopClassifierParams, GuesserParams};
use super::policy::{grad_log_prob, select_question, PolicyInput, PolicyParams, SelectMode};
use crate::error::{Error, Result};
use crate::game::{
    AgentEpisode, CoopLabel, DialogueTurn, Question, QuestionAgent, QuestionSpace, Scene,
    SceneConfig, DEFAULT_MAX_ROUNDS,
};
use crate::rng::GameRng;

pub const DEFAULT_LIE_RATE: f64 = 0.05;

/// The question-player: communication policy, object guesser and
/// cooperation classifier over a fixed feature layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionPlayer {
    pub layout: FeatureLayout,
    pub policy: PolicyParams,
    pub guesser: GuesserParams,
    pub coop: CoopClassifierParams,
    pub lie_rate: f64,
    pub mode: SelectMode,
}

impl QuestionPlayer {
    /// Untrained player: uniform policy, argmax guesser, always-CP classifier.
    pub fn new(layout: FeatureLayout, lie_rate: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&lie_rate) {
            return Err(Error::InvalidConfig(format!(
                "lie rate must lie in [0, 0.5], got {lie_rate}"
            )));
        }
        Ok(QuestionPlayer {
            policy: PolicyParams::zeros(layout.space.len()),
            coop: CoopClassifierParams::zeros(layout.dim()),
            guesser: GuesserParams::BeliefArgmax,
            layout,
            lie_rate,
            mode: SelectMode::Sample,
        })
    }

    /// Player over the full question space of a scene configuration.
    pub fn for_scenes(cfg: &SceneConfig, max_rounds: usize) -> Result<Self> {
        cfg.validate()?;
        let layout = FeatureLayout::new(QuestionSpace::for_vocab(&cfg.vocab()), max_rounds, cfg.n_objects);
        QuestionPlayer::new(layout, DEFAULT_LIE_RATE)
    }

    pub fn space(&self) -> &QuestionSpace {
        &self.layout.space
    }

    pub fn with_mode(mut self, mode: SelectMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.policy.theta.len() != self.space().len() + super::policy::SHARED_FEATURES {
            return Err(Error::ModelShape {
                expected: self.space().len() + super::policy::SHARED_FEATURES,
                got: self.policy.theta.len(),
            });
        }
        if self.coop.weights.len() != self.layout.dim() {
            return Err(Error::ModelShape {
                expected: self.layout.dim(),
                got: self.coop.weights.len(),
            });
        }
        self.guesser.check_shape()
    }

    pub fn start(&self, scene: &Scene, max_rounds: usize) -> Result<EpisodeState> {
        self.validate()?;
        self.layout.check_fits(scene, max_rounds)?;
        let belief = BeliefState::uniform(scene.len(), self.lie_rate)?;
        Ok(EpisodeState {
            scene: scene.clone(),
            max_rounds,
            trace: vec![belief.clone()],
            belief,
            asked: vec![0; self.space().len()],
            turns: Vec::new(),
            pending: None,
            grad: None,
            log_prob: 0.0,
        })
    }

    /// Like [`start`](Self::start) but accumulating `Σ ∇ log π` for REINFORCE.
    pub fn start_tracking(&self, scene: &Scene, max_rounds: usize) -> Result<EpisodeState> {
        let mut s = self.start(scene, max_rounds)?;
        s.grad = Some(vec![0.0; self.policy.theta.len()]);
        Ok(s)
    }

    pub fn policy_input(&self, state: &EpisodeState, round: usize) -> PolicyInput {
        PolicyInput::build(
            self.space(),
            &state.belief,
            &state.scene,
            round,
            state.max_rounds,
            &state.asked,
        )
    }

    pub fn next_question(&self, state: &mut EpisodeState, round: usize, rng: &mut GameRng) -> Result<Question> {
        let expected = state.turns.len() + 1;
        if round != expected || round > state.max_rounds || state.pending.is_some() {
            return Err(Error::InvalidArgument(format!(
                "question for round {round} requested, next round is {expected}"
            )));
        }
        let input = self.policy_input(state, round);
        let choice = select_question(&self.policy, &input, self.mode, rng)?;
        if let Some(g) = state.grad.as_mut() {
            for (acc, d) in g.iter_mut().zip(grad_log_prob(&self.policy, &input, choice.index)) {
                *acc += d;
            }
        }
        state.log_prob += choice.log_prob;
        state.pending = Some(choice.index);
        Ok(self.space().questions()[choice.index])
    }

    pub fn observe(&self, state: &mut EpisodeState, turn: &DialogueTurn) -> Result<()> {
        if turn.round != state.turns.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "turn for round {} observed, expected round {}",
                turn.round,
                state.turns.len() + 1
            )));
        }
        if let Some(k) = state.pending.take() {
            state.asked[k] += 1;
        } else if let Some(k) = self.space().index_of(&turn.question) {
            state.asked[k] += 1;
        }
        state.belief = belief_update(&state.belief, &state.scene, &turn.question, turn.answer)?;
        state.trace.push(state.belief.clone());
        state.turns.push(*turn);
        Ok(())
    }

    pub fn features(&self, state: &EpisodeState) -> Result<DialogueFeatures> {
        dialogue_features(&self.layout, &state.scene, &state.turns, &state.trace)
    }

    pub fn object_guess(&self, state: &EpisodeState) -> Result<usize> {
        guess_object(&self.guesser, &state.belief)
    }

    pub fn coop_guess(&self, state: &EpisodeState) -> Result<CoopLabel> {
        classify_cooperation(&self.coop, &self.features(state)?)
    }
}

/// Everything the question-player remembers during one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub scene: Scene,
    pub max_rounds: usize,
    pub belief: BeliefState,
    /// Belief before the first turn and after each turn.
    pub trace: Vec<BeliefState>,
    pub asked: Vec<u32>,
    pub turns: Vec<DialogueTurn>,
    /// Index of the question awaiting an answer.
    pub pending: Option<usize>,
    #[serde(skip)]
    pub grad: Option<Vec<f64>>,
    /// Log-probability of all questions asked so far.
    pub log_prob: f64,
}

pub struct PlayerEpisode<'a> {
    pub player: &'a QuestionPlayer,
    pub state: EpisodeState,
}

fn check_transcript(state: &EpisodeState, turns: &[DialogueTurn]) -> Result<()> {
    if turns != state.turns.as_slice() {
        return Err(Error::InvalidArgument(
            "transcript differs from the observed turns".into(),
        ));
    }
    Ok(())
}

impl AgentEpisode for PlayerEpisode<'_> {
    fn ask(&mut self, round: usize, rng: &mut GameRng) -> Result<Question> {
        self.player.next_question(&mut self.state, round, rng)
    }

    fn observe(&mut self, turn: &DialogueTurn) -> Result<()> {
        self.player.observe(&mut self.state, turn)
    }

    fn guess_object(&self, turns: &[DialogueTurn]) -> Result<usize> {
        check_transcript(&self.state, turns)?;
        self.player.object_guess(&self.state)
    }

    fn guess_cooperation(&self, turns: &[DialogueTurn]) -> Result<CoopLabel> {
        check_transcript(&self.state, turns)?;
        self.player.coop_guess(&self.state)
    }
}

impl QuestionAgent for QuestionPlayer {
    type Episode<'a> = PlayerEpisode<'a>;

    fn begin<'a>(&'a self, scene: &Scene, max_rounds: usize) -> Result<PlayerEpisode<'a>> {
        Ok(PlayerEpisode {
            player: self,
            state: self.start(scene, max_rounds)?,
        })
    }
}

/// Variant that records the policy gradient of the questions it asks.
pub struct Tracking<'p>(pub &'p QuestionPlayer);

impl QuestionAgent for Tracking<'_> {
    type Episode<'a>
        = PlayerEpisode<'a>
    where
        Self: 'a;

    fn begin<'a>(&'a self, scene: &Scene, max_rounds: usize) -> Result<PlayerEpisode<'a>> {
        Ok(PlayerEpisode {
            player: self.0,
            state: self.0.start_tracking(scene, max_rounds)?,
        })
    }
}

/// Baseline that asks uniformly random questions and guesses uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomAgent {
    pub space: QuestionSpace,
}

pub struct RandomEpisode {
    space: QuestionSpace,
    n_objects: usize,
    guesses: Option<(usize, CoopLabel)>,
}

impl AgentEpisode for RandomEpisode {
    fn ask(&mut self, _round: usize, rng: &mut GameRng) -> Result<Question> {
        if self.guesses.is_none() {
            let object = rng.gen_range(0..self.n_objects);
            let coop = CoopLabel::from_nc(rng.gen_bool(0.5));
            self.guesses = Some((object, coop));
        }
        Ok(self.space.questions()[rng.gen_range(0..self.space.len())])
    }

    fn observe(&mut self, _turn: &DialogueTurn) -> Result<()> {
        Ok(())
    }

    fn guess_object(&self, _turns: &[DialogueTurn]) -> Result<usize> {
        Ok(self.guesses.map_or(0, |g| g.0))
    }

    fn guess_cooperation(&self, _turns: &[DialogueTurn]) -> Result<CoopLabel> {
        Ok(self.guesses.map_or(CoopLabel::Cooperative, |g| g.1))
    }
}

impl QuestionAgent for RandomAgent {
    type Episode<'a> = RandomEpisode;

    fn begin(&self, scene: &Scene, _max_rounds: usize) -> Result<RandomEpisode> {
        Ok(RandomEpisode {
            space: self.space.clone(),
            n_objects: scene.len(),
            guesses: None,
        })
    }
}

/// Default layout for a scene configuration at the default round cap.
pub fn default_layout(cfg: &SceneConfig) -> FeatureLayout {
    FeatureLayout::new(QuestionSpace::for_vocab(&cfg.vocab()), DEFAULT_MAX_ROUNDS, cfg.n_objects)
}
