//! Answer-players: the cooperative oracle, the scripted deception strategies
//! observed in human play (spamming, absolute contradiction, alternate goal)
//! and a learned linear-softmax non-cooperative answerer whose information
//! access is configurable.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    truth_answer, Answer, Attribute, CoopLabel, DialogueTurn, GameRecord, Question, Scene,
    CATEGORY_NAMES, COLOR_NAMES, MAX_GRID, SIZE_NAMES,
};
use crate::rng::{seeded, GameRng};

/// What a learned non-cooperative answerer is allowed to condition on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Goal object and the immediate question.
    QGoal,
    /// ... plus the dialogue history.
    QGoalHist,
    /// ... plus the whole scene.
    QGoalImg,
    /// Everything.
    All,
}

impl FeatureMode {
    pub const ALL_MODES: [FeatureMode; 4] = [
        FeatureMode::QGoal,
        FeatureMode::QGoalHist,
        FeatureMode::QGoalImg,
        FeatureMode::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::QGoal => "q_goal",
            FeatureMode::QGoalHist => "q_goal_hist",
            FeatureMode::QGoalImg => "q_goal_img",
            FeatureMode::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        FeatureMode::ALL_MODES.into_iter().find(|m| m.name() == s)
    }

    fn uses_history(self) -> bool {
        matches!(self, FeatureMode::QGoalHist | FeatureMode::All)
    }

    fn uses_scene(self) -> bool {
        matches!(self, FeatureMode::QGoalImg | FeatureMode::All)
    }

    /// Length of the answer-feature vector for this mode.
    pub fn dim(self) -> usize {
        let mut d = BASE_DIM;
        if self.uses_history() {
            d += HISTORY_DIM;
        }
        if self.uses_scene() {
            d += SCENE_DIM;
        }
        d
    }
}

const GOAL_ONE_HOT: usize = CATEGORY_NAMES.len() + COLOR_NAMES.len() + SIZE_NAMES.len() + 2 * MAX_GRID;
const BASE_DIM: usize = 1 + Attribute::ALL.len() + 2 + GOAL_ONE_HOT;
const HISTORY_DIM: usize = 9;
const SCENE_DIM: usize = 4;

/// Parameters of the learned answerer: a `3 × dim` weight matrix, row-major,
/// one row per answer in `Answer::ALL` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedNcParams {
    pub feature_mode: FeatureMode,
    pub weights: Vec<f64>,
}

impl LearnedNcParams {
    pub fn zeros(feature_mode: FeatureMode) -> Self {
        LearnedNcParams {
            feature_mode,
            weights: vec![0.0; 3 * feature_mode.dim()],
        }
    }

    pub fn check_shape(&self) -> Result<()> {
        let expected = 3 * self.feature_mode.dim();
        if self.weights.len() != expected {
            return Err(Error::ModelShape {
                expected,
                got: self.weights.len(),
            });
        }
        Ok(())
    }

    fn logits(&self, x: &[f64]) -> [f64; 3] {
        let d = x.len();
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.weights[k * d..(k + 1) * d]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum();
        }
        out
    }

    /// Answer distribution in `Answer::ALL` order.
    pub fn probabilities(
        &self,
        scene: &Scene,
        history: &[DialogueTurn],
        q: &Question,
    ) -> Result<[f64; 3]> {
        self.check_shape()?;
        let x = answer_features(self.feature_mode, scene, history, q);
        Ok(softmax3(self.logits(&x)))
    }
}

fn softmax3(z: [f64; 3]) -> [f64; 3] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

fn sample_index(probs: &[f64], rng: &mut GameRng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Hand-designed features for the learned answerer.
pub fn answer_features(
    mode: FeatureMode,
    scene: &Scene,
    history: &[DialogueTurn],
    q: &Question,
) -> Vec<f64> {
    let mut x = Vec::with_capacity(mode.dim());
    let goal = &scene.objects[scene.goal];
    x.push(1.0);
    for a in Attribute::ALL {
        x.push(if q.attribute == a { 1.0 } else { 0.0 });
    }
    let matched = q.matches(goal, &scene.vocab);
    x.push(if matched == Some(true) { 1.0 } else { 0.0 });
    x.push(if matched.is_none() { 1.0 } else { 0.0 });
    let blocks = [
        (goal.category, CATEGORY_NAMES.len()),
        (goal.color, COLOR_NAMES.len()),
        (goal.size, SIZE_NAMES.len()),
        (goal.cell.0, MAX_GRID),
        (goal.cell.1, MAX_GRID),
    ];
    for (value, width) in blocks {
        let start = x.len();
        x.resize(start + width, 0.0);
        if value < width {
            x[start + value] = 1.0;
        }
    }

    if mode.uses_history() {
        let n = history.len() as f64;
        let mut counts = [0.0; 3];
        for t in history {
            counts[t.answer.index()] += 1.0;
        }
        for c in counts {
            x.push(if n > 0.0 { c / n } else { 0.0 });
        }
        let mut last = [0.0; 3];
        if let Some(t) = history.last() {
            last[t.answer.index()] = 1.0;
        }
        x.extend_from_slice(&last);
        x.push(n / (n + 1.0));
        let previous = history.iter().rev().find(|t| t.question == *q);
        x.push(if previous.map(|t| t.answer) == Some(Answer::Yes) { 1.0 } else { 0.0 });
        x.push(if previous.map(|t| t.answer) == Some(Answer::No) { 1.0 } else { 0.0 });
    }

    if mode.uses_scene() {
        let n = scene.len() as f64;
        let matching = scene
            .objects
            .iter()
            .filter(|o| q.matches(o, &scene.vocab) == Some(true))
            .count() as f64;
        let goal_match = if matched == Some(true) { 1.0 } else { 0.0 };
        x.push(matching / n);
        x.push((matching - goal_match) / (n - 1.0));
        x.push(n / 10.0);
        let sharing = scene
            .objects
            .iter()
            .enumerate()
            .filter(|(i, o)| *i != scene.goal && o.attribute(q.attribute) == goal.attribute(q.attribute))
            .count() as f64;
        x.push(sharing / (n - 1.0));
    }
    debug_assert_eq!(x.len(), mode.dim());
    x
}

/// How an alternate-goal answerer picks its decoy at the start of an episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyRule {
    /// Uniform over the non-goal objects.
    Uniform,
    /// A fixed object index (must differ from the goal).
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerStrategy {
    Cooperative,
    Spam(Answer),
    Contradict,
    AlternateGoal(DecoyRule),
    LearnedNc(LearnedNcParams),
    MixtureNc(Vec<(AnswerStrategy, f64)>),
}

impl AnswerStrategy {
    /// A non-cooperative mixture; weights must be nonnegative and sum to 1.
    pub fn mixture(components: Vec<(AnswerStrategy, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("empty mixture".into()));
        }
        if components.iter().any(|(s, w)| *w < 0.0 || !w.is_finite() || !s.label().is_nc()) {
            return Err(Error::InvalidConfig(
                "mixture weights must be nonnegative and components non-cooperative".into(),
            ));
        }
        let total: f64 = components.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(AnswerStrategy::MixtureNc(components))
    }

    pub fn label(&self) -> CoopLabel {
        CoopLabel::from_nc(!matches!(self, AnswerStrategy::Cooperative))
    }

    /// Log tag. Mixtures report `mixture`; bound answerers report the
    /// component actually in play.
    pub fn tag(&self) -> String {
        match self {
            AnswerStrategy::Cooperative => "coop".into(),
            AnswerStrategy::Spam(a) => format!("spam_{}", a.token()),
            AnswerStrategy::Contradict => "contradict".into(),
            AnswerStrategy::AlternateGoal(_) => "altgoal".into(),
            AnswerStrategy::LearnedNc(p) => format!("learned_nc:{}", p.feature_mode.name()),
            AnswerStrategy::MixtureNc(_) => "mixture".into(),
        }
    }

    /// Resolve episode-level randomness (mixture component, decoy).
    pub fn bind(&self, scene: &Scene, rng: &mut GameRng) -> Result<BoundAnswerer> {
        match self {
            AnswerStrategy::MixtureNc(components) => {
                let weights: Vec<f64> = components.iter().map(|(_, w)| *w).collect();
                let i = sample_index(&weights, rng);
                components[i].0.bind(scene, rng)
            }
            AnswerStrategy::AlternateGoal(rule) => {
                let decoy = match *rule {
                    DecoyRule::Uniform => {
                        let k = rng.gen_range(0..scene.len() - 1);
                        if k >= scene.goal {
                            k + 1
                        } else {
                            k
                        }
                    }
                    DecoyRule::Fixed(d) => {
                        if d == scene.goal || d >= scene.len() {
                            return Err(Error::InvalidConfig(format!(
                                "decoy {d} must be a non-goal object of the scene"
                            )));
                        }
                        d
                    }
                };
                Ok(BoundAnswerer {
                    strategy: self.clone(),
                    decoy: Some(decoy),
                })
            }
            AnswerStrategy::LearnedNc(p) => {
                p.check_shape()?;
                Ok(BoundAnswerer {
                    strategy: self.clone(),
                    decoy: None,
                })
            }
            _ => Ok(BoundAnswerer {
                strategy: self.clone(),
                decoy: None,
            }),
        }
    }

    /// One-shot answer with a freshly bound strategy. Use [`AnswerStrategy::bind`]
    /// when the decoy must stay fixed over an episode.
    pub fn answer(
        &self,
        scene: &Scene,
        history: &[DialogueTurn],
        q: &Question,
        rng: &mut GameRng,
    ) -> Result<Answer> {
        self.bind(scene, rng)?.answer(scene, history, q, rng)
    }
}

impl fmt::Display for AnswerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// An answer strategy with its per-episode choices fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundAnswerer {
    strategy: AnswerStrategy,
    decoy: Option<usize>,
}

impl BoundAnswerer {
    pub fn strategy(&self) -> &AnswerStrategy {
        &self.strategy
    }

    pub fn decoy(&self) -> Option<usize> {
        self.decoy
    }

    pub fn label(&self) -> CoopLabel {
        self.strategy.label()
    }

    pub fn tag(&self) -> String {
        self.strategy.tag()
    }

    pub fn answer(
        &self,
        scene: &Scene,
        history: &[DialogueTurn],
        q: &Question,
        rng: &mut GameRng,
    ) -> Result<Answer> {
        Ok(match &self.strategy {
            AnswerStrategy::Cooperative => truth_answer(scene, scene.goal, q),
            AnswerStrategy::Spam(a) => *a,
            AnswerStrategy::Contradict => truth_answer(scene, scene.goal, q).negate(),
            AnswerStrategy::AlternateGoal(_) => {
                let decoy = self.decoy.expect("alternate-goal answerer bound without decoy");
                truth_answer(scene, decoy, q)
            }
            AnswerStrategy::LearnedNc(params) => {
                let probs = params.probabilities(scene, history, q)?;
                Answer::ALL[sample_index(&probs, rng)]
            }
            AnswerStrategy::MixtureNc(_) => unreachable!("mixtures are resolved by bind"),
        })
    }
}

/// The set of answer-players a game can draw from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyPool {
    non_cooperative: Vec<AnswerStrategy>,
    weights: Option<Vec<f64>>,
}

impl StrategyPool {
    /// A pool with the cooperative oracle and the given non-cooperative
    /// strategies, drawn uniformly.
    pub fn new(non_cooperative: Vec<AnswerStrategy>) -> Result<Self> {
        if non_cooperative.is_empty() {
            return Err(Error::InvalidConfig(
                "pool needs at least one non-cooperative strategy".into(),
            ));
        }
        if non_cooperative.iter().any(|s| !s.label().is_nc()) {
            return Err(Error::InvalidConfig(
                "pool must contain exactly one cooperative strategy".into(),
            ));
        }
        Ok(StrategyPool {
            non_cooperative,
            weights: None,
        })
    }

    pub fn weighted(components: Vec<(AnswerStrategy, f64)>) -> Result<Self> {
        // reuse mixture validation
        let AnswerStrategy::MixtureNc(components) = AnswerStrategy::mixture(components)? else {
            unreachable!()
        };
        let (strategies, weights) = components.into_iter().unzip();
        Ok(StrategyPool {
            non_cooperative: strategies,
            weights: Some(weights),
        })
    }

    /// Spam(yes), spam(no), contradiction and alternate goal, uniformly.
    pub fn scripted() -> Self {
        StrategyPool::new(vec![
            AnswerStrategy::Spam(Answer::Yes),
            AnswerStrategy::Spam(Answer::No),
            AnswerStrategy::Contradict,
            AnswerStrategy::AlternateGoal(DecoyRule::Uniform),
        ])
        .expect("scripted pool is valid")
    }

    pub fn non_cooperative(&self) -> &[AnswerStrategy] {
        &self.non_cooperative
    }
}

fn check_p_nc(p_nc: f64) -> Result<()> {
    if !(p_nc > 0.0 && p_nc < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "p_nc must lie in the open interval (0, 1), got {p_nc}"
        )));
    }
    Ok(())
}

/// Draw the cooperation type of a new game, then its answer-player.
pub fn sample_answerer(
    p_nc: f64,
    pool: &StrategyPool,
    rng: &mut GameRng,
) -> Result<(AnswerStrategy, CoopLabel)> {
    check_p_nc(p_nc)?;
    if !rng.gen_bool(p_nc) {
        return Ok((AnswerStrategy::Cooperative, CoopLabel::Cooperative));
    }
    let i = match &pool.weights {
        Some(w) => sample_index(w, rng),
        None => rng.gen_range(0..pool.non_cooperative.len()),
    };
    Ok((pool.non_cooperative[i].clone(), CoopLabel::NonCooperative))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitHyper {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for FitHyper {
    fn default() -> Self {
        FitHyper {
            lr: 0.5,
            epochs: 300,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnedNcFit {
    pub params: LearnedNcParams,
    /// Mean cross-entropy before training and after each epoch.
    pub loss_history: Vec<f64>,
}

struct AnswerExample {
    x: Vec<f64>,
    y: usize,
}

fn cross_entropy(params: &LearnedNcParams, data: &[AnswerExample]) -> f64 {
    let total: f64 = data
        .iter()
        .map(|ex| {
            let z = params.logits(&ex.x);
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - z[ex.y]
        })
        .sum();
    total / data.len() as f64
}

fn ce_gradient(params: &LearnedNcParams, data: &[AnswerExample]) -> Vec<f64> {
    let mut grad = vec![0.0; params.weights.len()];
    for ex in data {
        let d = ex.x.len();
        let p = softmax3(params.logits(&ex.x));
        for (k, pk) in p.iter().enumerate() {
            let coef = pk - if k == ex.y { 1.0 } else { 0.0 };
            for (g, v) in grad[k * d..(k + 1) * d].iter_mut().zip(&ex.x) {
                *g += coef * v;
            }
        }
    }
    let n = data.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    grad
}

/// Fit a learned non-cooperative answerer to the answers recorded in a corpus
/// of non-cooperative games, by full-batch gradient descent on cross-entropy.
///
/// Steps that would raise the loss are retried with a halved learning rate,
/// so the loss history is non-increasing.
pub fn fit_learned_nc(
    corpus: &[GameRecord],
    feature_mode: FeatureMode,
    hyper: &FitHyper,
) -> Result<LearnedNcFit> {
    if corpus.is_empty() {
        return Err(Error::InsufficientData("empty answerer corpus".into()));
    }
    if let Some(r) = corpus.iter().find(|r| !r.coop_label.is_nc()) {
        return Err(Error::InvalidRecord(format!(
            "answerer corpus must contain only NC games; game with seed {} is CP",
            r.seed
        )));
    }
    let data: Vec<AnswerExample> = corpus
        .iter()
        .flat_map(|r| {
            r.turns.iter().enumerate().map(move |(t, turn)| AnswerExample {
                x: answer_features(feature_mode, &r.scene, &r.turns[..t], &turn.question),
                y: turn.answer.index(),
            })
        })
        .collect();
    if data.is_empty() {
        return Err(Error::InsufficientData("answerer corpus has no turns".into()));
    }

    let mut rng = seeded(hyper.seed);
    let mut params = LearnedNcParams::zeros(feature_mode);
    for w in params.weights.iter_mut() {
        *w = rng.gen_range(-1e-3..1e-3);
    }
    let mut loss = cross_entropy(&params, &data);
    let mut history = vec![loss];
    let mut lr = hyper.lr;
    for _ in 0..hyper.epochs {
        let grad = ce_gradient(&params, &data);
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = LearnedNcParams {
                feature_mode,
                weights: params
                    .weights
                    .iter()
                    .zip(&grad)
                    .map(|(w, g)| w - lr * g)
                    .collect(),
            };
            let new_loss = cross_entropy(&candidate, &data);
            if new_loss <= loss {
                params = candidate;
                loss = new_loss;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        history.push(loss);
        if !accepted {
            break;
        }
    }
    Ok(LearnedNcFit {
        params,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_scene, ObjectSpec, SceneConfig};
    use crate::rng::seeded;

    fn scene3() -> Scene {
        let mk = |id, color| ObjectSpec {
            id,
            category: id,
            color,
            size: 0,
            cell: (0, id),
        };
        Scene::new(vec![mk(0, 0), mk(1, 1), mk(2, 2)], 0, SceneConfig::default().vocab()).unwrap()
    }

    #[test]
    fn spam_is_constant() {
        let mut rng = seeded(1);
        let scene = scene3();
        for q in [Question::new(Attribute::Color, 0), Question::new(Attribute::Row, 2)] {
            assert_eq!(
                AnswerStrategy::Spam(Answer::No).answer(&scene, &[], &q, &mut rng).unwrap(),
                Answer::No
            );
        }
    }

    #[test]
    fn contradict_negates_truth() {
        let mut rng = seeded(1);
        let scene = scene3();
        let q = Question::new(Attribute::Color, 0);
        assert_eq!(AnswerStrategy::Contradict.answer(&scene, &[], &q, &mut rng).unwrap(), Answer::No);
        let na = Question::oov(Attribute::Color);
        assert_eq!(AnswerStrategy::Contradict.answer(&scene, &[], &na, &mut rng).unwrap(), Answer::Na);
    }

    #[test]
    fn alternate_goal_answers_about_decoy() {
        let mut rng = seeded(1);
        let scene = scene3();
        let s = AnswerStrategy::AlternateGoal(DecoyRule::Fixed(2));
        let q = Question::new(Attribute::Color, 2);
        assert_eq!(s.answer(&scene, &[], &q, &mut rng).unwrap(), Answer::Yes);
        let bad = AnswerStrategy::AlternateGoal(DecoyRule::Fixed(0));
        assert!(bad.bind(&scene, &mut rng).is_err());
    }

    #[test]
    fn uniform_decoy_never_hits_goal() {
        let mut rng = seeded(5);
        let cfg = SceneConfig::with_objects(3);
        for _ in 0..500 {
            let scene = generate_scene(&cfg, &mut rng).unwrap();
            let b = AnswerStrategy::AlternateGoal(DecoyRule::Uniform)
                .bind(&scene, &mut rng)
                .unwrap();
            assert_ne!(b.decoy(), Some(scene.goal));
        }
    }

    #[test]
    fn p_nc_must_be_open_interval() {
        let pool = StrategyPool::scripted();
        let mut rng = seeded(0);
        assert!(sample_answerer(0.0, &pool, &mut rng).is_err());
        assert!(sample_answerer(1.0, &pool, &mut rng).is_err());
        assert!(sample_answerer(0.3, &pool, &mut rng).is_ok());
    }

    #[test]
    fn sampling_is_deterministic_and_calibrated() {
        let pool = StrategyPool::scripted();
        let a = sample_answerer(0.5, &pool, &mut seeded(9)).unwrap();
        let b = sample_answerer(0.5, &pool, &mut seeded(9)).unwrap();
        assert_eq!(a, b);

        let mut rng = seeded(10);
        let n = 100_000;
        let nc = (0..n)
            .filter(|_| sample_answerer(0.5, &pool, &mut rng).unwrap().1.is_nc())
            .count();
        assert!((nc as f64 / n as f64 - 0.5).abs() <= 0.01);
    }

    #[test]
    fn pool_rejects_cooperative_members() {
        assert!(StrategyPool::new(vec![AnswerStrategy::Cooperative]).is_err());
        assert!(StrategyPool::new(vec![]).is_err());
        assert!(AnswerStrategy::mixture(vec![(AnswerStrategy::Contradict, 0.4)]).is_err());
    }

    #[test]
    fn learned_shape_mismatch_is_an_error() {
        let mut p = LearnedNcParams::zeros(FeatureMode::All);
        p.weights.pop();
        let s = AnswerStrategy::LearnedNc(p);
        let mut rng = seeded(0);
        let err = s.answer(&scene3(), &[], &Question::new(Attribute::Color, 0), &mut rng);
        assert!(matches!(err, Err(Error::ModelShape { .. })));
    }

    #[test]
    fn feature_dims_match_modes() {
        let scene = scene3();
        let q = Question::new(Attribute::Size, 1);
        for mode in FeatureMode::ALL_MODES {
            assert_eq!(answer_features(mode, &scene, &[], &q).len(), mode.dim());
        }
    }

    #[test]
    fn tags() {
        assert_eq!(AnswerStrategy::Spam(Answer::Na).tag(), "spam_na");
        assert_eq!(
            AnswerStrategy::LearnedNc(LearnedNcParams::zeros(FeatureMode::QGoalHist)).tag(),
            "learned_nc:q_goal_hist"
        );
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            fit_learned_nc(&[], FeatureMode::QGoal, &FitHyper::default()),
            Err(Error::InsufficientData(_))
        ));
    }
}
