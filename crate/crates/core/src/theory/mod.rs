//! Estimators, bounds and brute-force oracles for the learning-theoretic
//! analysis of the game.

pub mod bounds;
pub mod concentration;
pub mod effectiveness;
pub mod hypothesis;
pub mod sample;

pub use bounds::{
    prop1_c_term, prop1_inequality_check, thm1_battery, thm1_empirical_check, triangle_inequality_check,
    vc_term_c_thm1, BatteryRow, BoundReport, InstanceLimits, Prop1Report,
};
pub use concentration::{lemma1_bound, lemma1_mc_check, phat_concentration_check, McCheck};
pub use effectiveness::{effectiveness_estimate, EffectivenessReport};
pub use hypothesis::{erm, sym_diff_class, vc_dimension_exact, FiniteHypothesisClass, OutputSpace};
pub use sample::{
    alpha_improvement, cer, coop_gap, oer, oer_conditional, p_hat, LabeledItem, LabeledSample, SampleSummary,
};
