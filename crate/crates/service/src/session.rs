//! One human-versus-agent game, independent of HTTP.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use noncoop::agent::EpisodeState;
use noncoop::game::{
    describe_value, generate_scene, render_question, Answer, Attribute, CoopLabel, DialogueTurn, GameRecord,
    Question, Scene,
};
use noncoop::harness::Checkpoint;
use noncoop::rng::{derive_seed, seeded, stream, GameRng};

use crate::error::ApiError;

/// What the human was asked to do.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Lead the agent away from the goal object.
    #[default]
    Deceive,
    Cooperate,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Deceive => "deceive",
            Role::Cooperate => "cooperate",
        }
    }

    pub fn label(self) -> CoopLabel {
        CoopLabel::from_nc(self == Role::Deceive)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub text: String,
    pub question: Question,
}

impl QuestionView {
    pub fn new(question: Question) -> Self {
        QuestionView {
            text: render_question(&question),
            question,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: usize,
    pub category: String,
    pub color: String,
    pub size: String,
    pub row: usize,
    pub col: usize,
    pub is_goal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneView {
    pub grid_size: usize,
    pub goal: usize,
    pub objects: Vec<ObjectView>,
}

impl SceneView {
    pub fn new(scene: &Scene, grid_size: usize) -> Self {
        SceneView {
            grid_size,
            goal: scene.goal,
            objects: scene
                .objects
                .iter()
                .enumerate()
                .map(|(i, o)| ObjectView {
                    id: o.id,
                    category: describe_value(Attribute::Category, o.category),
                    color: describe_value(Attribute::Color, o.color),
                    size: describe_value(Attribute::Size, o.size),
                    row: o.cell.0,
                    col: o.cell.1,
                    is_goal: i == scene.goal,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnView {
    pub round: usize,
    pub question: QuestionView,
    pub answer: Answer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub object_guess: usize,
    pub coop_guess: CoopLabel,
    pub goal: usize,
    pub object_correct: bool,
    /// The agent labelled the human non-cooperative.
    pub flagged_non_cooperative: bool,
    /// Deceivers win when the agent guesses the wrong object; cooperators
    /// win when it guesses right.
    pub human_won: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SessionState {
    AwaitingAnswer { round: usize, question: QuestionView },
    Finished { result: GameResult },
}

/// The JSON form of a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub checkpoint: String,
    pub role: Role,
    pub created_at: u64,
    pub max_rounds: usize,
    pub seed: u64,
    pub scene: SceneView,
    pub state: SessionState,
    pub transcript: Vec<TurnView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

pub struct Session {
    pub id: String,
    pub checkpoint_id: String,
    pub checkpoint: Arc<Checkpoint>,
    pub role: Role,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub seed: u64,
    pub max_rounds: usize,
    pub episode: EpisodeState,
    pub state: SessionState,
    pub notes: Option<String>,
    rng: GameRng,
}

impl Session {
    /// Draw the scene from `seed` and let the agent ask its first question.
    pub fn start(
        id: String,
        checkpoint_id: String,
        checkpoint: Arc<Checkpoint>,
        role: Role,
        seed: u64,
        max_rounds: usize,
        created_at: u64,
    ) -> Result<Self, ApiError> {
        let scene = generate_scene(&checkpoint.scene, &mut seeded(derive_seed(seed, stream::SCENE, 0)))?;
        let mut episode = checkpoint.player.start(&scene, max_rounds)?;
        let mut rng = seeded(derive_seed(seed, stream::EPISODE, 0));
        let question = checkpoint.player.next_question(&mut episode, 1, &mut rng)?;
        Ok(Session {
            id,
            checkpoint_id,
            checkpoint,
            role,
            created_at,
            seed,
            max_rounds,
            episode,
            state: SessionState::AwaitingAnswer {
                round: 1,
                question: QuestionView::new(question),
            },
            notes: None,
            rng,
        })
    }

    pub fn round(&self) -> Option<usize> {
        match &self.state {
            SessionState::AwaitingAnswer { round, .. } => Some(*round),
            SessionState::Finished { .. } => None,
        }
    }

    /// Apply the human's answer. Returns the finished game record when this
    /// was the last round.
    pub fn answer(
        &mut self,
        answer: Answer,
        expected_round: Option<usize>,
        notes: Option<String>,
    ) -> Result<Option<GameRecord>, ApiError> {
        let (round, question) = match &self.state {
            SessionState::AwaitingAnswer { round, question } => (*round, question.question),
            SessionState::Finished { .. } => {
                return Err(ApiError::Conflict(format!("session {} is finished", self.id)));
            }
        };
        if let Some(r) = expected_round {
            if r != round {
                return Err(ApiError::Conflict(format!(
                    "answer for round {r} posted, session is at round {round}"
                )));
            }
        }
        if notes.is_some() {
            self.notes = notes;
        }
        let player = &self.checkpoint.player;
        player.observe(&mut self.episode, &DialogueTurn { question, answer, round })?;
        if round < self.max_rounds {
            let next = player.next_question(&mut self.episode, round + 1, &mut self.rng)?;
            self.state = SessionState::AwaitingAnswer {
                round: round + 1,
                question: QuestionView::new(next),
            };
            return Ok(None);
        }
        let object_guess = player.object_guess(&self.episode)?;
        let coop_guess = player.coop_guess(&self.episode)?;
        let goal = self.episode.scene.goal;
        let object_correct = object_guess == goal;
        self.state = SessionState::Finished {
            result: GameResult {
                object_guess,
                coop_guess,
                goal,
                object_correct,
                flagged_non_cooperative: coop_guess.is_nc(),
                human_won: object_correct == (self.role == Role::Cooperate),
            },
        };
        Ok(Some(GameRecord {
            scene: self.episode.scene.clone(),
            turns: self.episode.turns.clone(),
            coop_label: self.role.label(),
            strategy_tag: format!("human_{}", self.role.name()),
            object_guess: Some(object_guess),
            coop_guess: Some(coop_guess),
            seed: self.seed,
            notes: self.notes.clone(),
        }))
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            checkpoint: self.checkpoint_id.clone(),
            role: self.role,
            created_at: self.created_at,
            max_rounds: self.max_rounds,
            seed: self.seed,
            scene: SceneView::new(&self.episode.scene, self.checkpoint.scene.grid_dim),
            state: self.state.clone(),
            transcript: self
                .episode
                .turns
                .iter()
                .map(|t| TurnView {
                    round: t.round,
                    question: QuestionView::new(t.question),
                    answer: t.answer,
                })
                .collect(),
            notes: self.notes.clone(),
        }
    }
}
