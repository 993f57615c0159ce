//! A desk-scale laboratory for the partially non-cooperative guessing game.
//!
//! - [`game`]: scenes, questions, answers and the episode loop.
//! - [`answerers`]: cooperative and non-cooperative answer-players.
//! - [`agent`]: the question-player and its training.
//! - [`theory`]: empirical estimators, bounds and brute-force oracles.
//! - [`harness`]: experiment sweeps, corpus statistics and checkpoints.

pub mod agent;
pub mod answerers;
pub mod error;
pub mod game;
pub mod harness;
pub mod rng;
pub mod theory;

pub use answerers::{AnswerStrategy, DecoyRule, FeatureMode, LearnedNcParams, StrategyPool};
pub use error::{Error, Party, Result};
pub use game::{
    generate_scene, render_question, run_episode, truth_answer, Answer, Attribute, CoopLabel, DialogueTurn,
    GameRecord, ObjectSpec, Question, QuestionSpace, Scene, SceneConfig,
};
pub use rng::{derive_seed, seeded, GameRng};
