//! Fixed-length dialogue features: the input of the cooperation classifier.

use serde::{Deserialize, Serialize};

use super::belief::BeliefState;
use crate::error::{Error, Result};
use crate::game::{Answer, DialogueTurn, GameRecord, QuestionSpace, Scene};

/// Summary slots at the tail of every feature vector.
pub mod summary {
    pub const YES_FRACTION: usize = 0;
    pub const NO_FRACTION: usize = 1;
    pub const NA_FRACTION: usize = 2;
    pub const ALL_IDENTICAL: usize = 3;
    pub const REPEAT_AGREEMENTS: usize = 4;
    pub const CONTRADICTIONS: usize = 5;
    pub const MIN_INCONSISTENCY: usize = 6;
    pub const FALLBACK: usize = 7;
    pub const LEN: usize = 8;
}

/// Dimensions that fix the feature vector length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub space: QuestionSpace,
    pub max_rounds: usize,
    pub max_objects: usize,
}

impl FeatureLayout {
    pub fn new(space: QuestionSpace, max_rounds: usize, max_objects: usize) -> Self {
        FeatureLayout {
            space,
            max_rounds,
            max_objects,
        }
    }

    fn round_width(&self) -> usize {
        self.space.len() + Answer::ALL.len()
    }

    pub fn belief_offset(&self) -> usize {
        1 + self.max_rounds * self.round_width()
    }

    pub fn entropy_offset(&self) -> usize {
        self.belief_offset() + self.max_objects
    }

    pub fn summary_offset(&self) -> usize {
        self.entropy_offset() + self.max_rounds + 1
    }

    pub fn dim(&self) -> usize {
        self.summary_offset() + summary::LEN
    }

    pub fn check_fits(&self, scene: &Scene, rounds: usize) -> Result<()> {
        if scene.len() > self.max_objects {
            return Err(Error::ConfigMismatch(format!(
                "scene has {} objects, layout allows {}",
                scene.len(),
                self.max_objects
            )));
        }
        if rounds > self.max_rounds {
            return Err(Error::ConfigMismatch(format!(
                "dialogue has {rounds} rounds, layout allows {}",
                self.max_rounds
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DialogueFeatures(pub Vec<f64>);

impl DialogueFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn summary(&self, layout: &FeatureLayout, slot: usize) -> f64 {
        self.0[layout.summary_offset() + slot]
    }
}

/// Pairs of turns that no single object could answer truthfully: the same
/// question answered both yes and no, or two values of one attribute both
/// answered yes.
pub fn count_contradictions(turns: &[DialogueTurn]) -> (usize, usize) {
    let mut contradictions = 0;
    let mut agreements = 0;
    for (i, a) in turns.iter().enumerate() {
        for b in &turns[i + 1..] {
            if a.answer == Answer::Na || b.answer == Answer::Na {
                continue;
            }
            if a.question == b.question {
                if a.answer == b.answer {
                    agreements += 1;
                } else {
                    contradictions += 1;
                }
            } else if a.question.attribute == b.question.attribute
                && a.question.value.is_some()
                && b.question.value.is_some()
                && a.answer == Answer::Yes
                && b.answer == Answer::Yes
            {
                contradictions += 1;
            }
        }
    }
    (contradictions, agreements)
}

/// Smallest number of answers contradicting the truth about any one object.
pub fn min_inconsistency(scene: &Scene, turns: &[DialogueTurn]) -> usize {
    scene
        .objects
        .iter()
        .map(|obj| {
            turns
                .iter()
                .filter(|t| match (t.answer, t.question.matches(obj, &scene.vocab)) {
                    (Answer::Yes, Some(m)) => !m,
                    (Answer::No, Some(m)) => m,
                    _ => false,
                })
                .count()
        })
        .min()
        .unwrap_or(0)
}

/// Features of a (possibly partial) dialogue. `trace` holds the belief before
/// the first turn and after every turn.
pub fn dialogue_features(
    layout: &FeatureLayout,
    scene: &Scene,
    turns: &[DialogueTurn],
    trace: &[BeliefState],
) -> Result<DialogueFeatures> {
    layout.check_fits(scene, turns.len())?;
    if trace.len() != turns.len() + 1 {
        return Err(Error::ConfigMismatch(format!(
            "belief trace has {} entries for {} turns",
            trace.len(),
            turns.len()
        )));
    }
    let mut x = vec![0.0; layout.dim()];
    x[0] = 1.0;
    let width = layout.round_width();
    let k = layout.space.len();
    for (r, t) in turns.iter().enumerate() {
        let base = 1 + r * width;
        if let Some(qi) = layout.space.index_of(&t.question) {
            x[base + qi] = 1.0;
        }
        x[base + k + t.answer.index()] = 1.0;
    }

    let last = trace.last().expect("trace is never empty");
    let mut sorted = last.probs.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let bo = layout.belief_offset();
    x[bo..bo + sorted.len()].copy_from_slice(&sorted);

    let eo = layout.entropy_offset();
    for r in 0..=layout.max_rounds {
        let b = trace.get(r).unwrap_or(last);
        x[eo + r] = b.entropy();
    }

    let so = layout.summary_offset();
    let n = turns.len().max(1) as f64;
    let mut counts = [0usize; 3];
    for t in turns {
        counts[t.answer.index()] += 1;
    }
    x[so + summary::YES_FRACTION] = counts[0] as f64 / n;
    x[so + summary::NO_FRACTION] = counts[1] as f64 / n;
    x[so + summary::NA_FRACTION] = counts[2] as f64 / n;
    let identical = !turns.is_empty() && counts.contains(&turns.len());
    x[so + summary::ALL_IDENTICAL] = if identical { 1.0 } else { 0.0 };
    let (contradictions, agreements) = count_contradictions(turns);
    x[so + summary::REPEAT_AGREEMENTS] = agreements as f64;
    x[so + summary::CONTRADICTIONS] = contradictions as f64;
    x[so + summary::MIN_INCONSISTENCY] = min_inconsistency(scene, turns) as f64;
    x[so + summary::FALLBACK] = if last.fallback { 1.0 } else { 0.0 };
    Ok(DialogueFeatures(x))
}

pub fn extract_features(
    layout: &FeatureLayout,
    record: &GameRecord,
    trace: &[BeliefState],
) -> Result<DialogueFeatures> {
    dialogue_features(layout, &record.scene, &record.turns, trace)
}
