//! Finite-sample evidence that a non-cooperative answer-player is effective:
//! its induced object error barely depends on the question-player's policy.

use serde::{Deserialize, Serialize};

use crate::agent::{GuesserParams, QuestionPlayer};
use crate::answerers::AnswerStrategy;
use crate::error::{Error, Result};
use crate::game::{run_episode, Scene};
use crate::rng::{derive_seed, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDeviation {
    pub a: usize,
    pub b: usize,
    /// Mean over trials of `|ôer_a(o|NC) − ôer_b(o|NC)|`.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectivenessReport {
    /// Mean over trials of the largest pairwise deviation.
    pub epsilon_hat: f64,
    pub pairs: Vec<PairDeviation>,
    /// NC object error of each policy, averaged over trials.
    pub nc_errors: Vec<f64>,
    pub m: usize,
    pub trials: usize,
}

/// Play `m` games per trial of every policy (with guesser `o`) against the
/// non-cooperative `answerer`, on common scenes and seeds.
#[allow(clippy::too_many_arguments)]
pub fn effectiveness_estimate(
    answerer: &AnswerStrategy,
    policies: &[QuestionPlayer],
    o: &GuesserParams,
    scenes: impl Fn(u64) -> Result<Scene>,
    max_rounds: usize,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<EffectivenessReport> {
    if policies.len() < 2 {
        return Err(Error::Precondition("at least two policies are required".into()));
    }
    if m < 30 {
        return Err(Error::Precondition(format!("m must be at least 30, got {m}")));
    }
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is required".into()));
    }
    if !answerer.label().is_nc() {
        return Err(Error::Precondition("the answer-player must be non-cooperative".into()));
    }
    let players: Vec<QuestionPlayer> = policies
        .iter()
        .map(|p| QuestionPlayer {
            guesser: o.clone(),
            ..p.clone()
        })
        .collect();
    let k = players.len();
    let mut pair_sums = vec![0.0; k * k];
    let mut err_sums = vec![0.0; k];
    let mut max_sum = 0.0;
    for t in 0..trials {
        let mut errs = vec![0.0; k];
        for i in 0..m {
            let index = (t * m + i) as u64;
            let scene = scenes(derive_seed(seed, stream::EVAL_SCENE, index))?;
            let ep_seed = derive_seed(seed, stream::EVAL_EPISODE, index);
            for (e, p) in errs.iter_mut().zip(&players) {
                let rec = run_episode(p, answerer, &scene, max_rounds, ep_seed)?;
                if rec.object_correct() != Some(true) {
                    *e += 1.0;
                }
            }
        }
        errs.iter_mut().for_each(|e| *e /= m as f64);
        let mut worst: f64 = 0.0;
        for a in 0..k {
            err_sums[a] += errs[a];
            for b in a + 1..k {
                let d = (errs[a] - errs[b]).abs();
                pair_sums[a * k + b] += d;
                worst = worst.max(d);
            }
        }
        max_sum += worst;
    }
    let n = trials as f64;
    let pairs = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .map(|(a, b)| PairDeviation {
            a,
            b,
            deviation: pair_sums[a * k + b] / n,
        })
        .collect();
    Ok(EffectivenessReport {
        epsilon_hat: max_sum / n,
        pairs,
        nc_errors: err_sums.into_iter().map(|e| e / n).collect(),
        m,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_scene, Answer, SceneConfig};
    use crate::rng::seeded;

    #[test]
    fn identical_policies_do_not_deviate() {
        let cfg = SceneConfig::with_objects(4);
        let p = QuestionPlayer::for_scenes(&cfg, 5).unwrap();
        let scenes = |s: u64| generate_scene(&cfg, &mut seeded(s));
        let r = effectiveness_estimate(
            &AnswerStrategy::Spam(Answer::No),
            &[p.clone(), p],
            &GuesserParams::BeliefArgmax,
            scenes,
            5,
            40,
            2,
            7,
        )
        .unwrap();
        assert_eq!(r.epsilon_hat, 0.0);
    }

    #[test]
    fn preconditions() {
        let cfg = SceneConfig::with_objects(4);
        let p = QuestionPlayer::for_scenes(&cfg, 5).unwrap();
        let scenes = |s: u64| generate_scene(&cfg, &mut seeded(s));
        let o = GuesserParams::BeliefArgmax;
        let spam = AnswerStrategy::Spam(Answer::No);
        assert!(effectiveness_estimate(&spam, std::slice::from_ref(&p), &o, scenes, 5, 40, 1, 0).is_err());
        assert!(effectiveness_estimate(&spam, &[p.clone(), p.clone()], &o, scenes, 5, 10, 1, 0).is_err());
        assert!(effectiveness_estimate(&AnswerStrategy::Cooperative, &[p.clone(), p], &o, scenes, 5, 40, 1, 0).is_err());
    }
}
