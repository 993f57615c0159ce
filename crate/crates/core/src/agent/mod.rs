//! The question-player: belief tracking, communication policy, guessers and
//! training.

pub mod belief;
pub mod exact;
pub mod features;
pub mod guesser;
pub mod player;
pub mod policy;
pub mod reward;
pub mod train;

pub use belief::{belief_update, information_gain, BeliefState};
pub use exact::{exact_objective, ExactObjective, TinyWorld};
pub use features::{dialogue_features, extract_features, DialogueFeatures, FeatureLayout};
pub use guesser::{classify_cooperation, guess_object, CoopClassifierParams, GuesserParams};
pub use player::{EpisodeState, QuestionPlayer, RandomAgent, DEFAULT_LIE_RATE};
pub use policy::{select_question, PolicyInput, PolicyParams, SelectMode};
pub use reward::RewardSpec;
pub use train::{
    evaluate, pretrain_supervised, reinforce_gradient, reinforce_train, Baseline, CurvePoint, EvalSet,
    PretrainConfig, ReinforceConfig, SceneSource, TrainEnv, TrainOutcome,
};
