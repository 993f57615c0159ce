//! The communication policy: a softmax over the finite question space.
//!
//! Each candidate question `k` is described by a feature vector
//! `ψ_k = [e_k, ig_k, ig_k · round/R, asked_k]` (a per-question bias, the
//! expected information gain under the current belief, the same gain scaled
//! by dialogue progress, and whether `k` was already asked). The logit of `k`
//! is `θ · ψ_k`, so the policy is determined by the real vector `θ` of length
//! `K + 3`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::belief::{argmax, information_gain, BeliefState};
use crate::error::{Error, Result};
use crate::game::{QuestionSpace, Scene};
use crate::rng::GameRng;

/// Shared (non-bias) features per question.
pub const SHARED_FEATURES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectMode {
    Sample,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub theta: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(n_questions: usize) -> Self {
        PolicyParams {
            theta: vec![0.0; n_questions + SHARED_FEATURES],
        }
    }

    pub fn n_questions(&self) -> usize {
        self.theta.len().saturating_sub(SHARED_FEATURES)
    }

    pub fn norm(&self) -> f64 {
        self.theta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }

    /// Weight on expected information gain.
    pub fn gain_weight(&self) -> f64 {
        self.theta[self.n_questions()]
    }
}

/// Question features at one decision point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuestionFeatures {
    pub gain: f64,
    pub late_gain: f64,
    pub asked: f64,
}

impl QuestionFeatures {
    fn shared(&self) -> [f64; SHARED_FEATURES] {
        [self.gain, self.late_gain, self.asked]
    }
}

/// Everything the policy conditions on when choosing the next question.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyInput {
    pub features: Vec<QuestionFeatures>,
}

impl PolicyInput {
    pub fn build(
        space: &QuestionSpace,
        belief: &BeliefState,
        scene: &Scene,
        round: usize,
        max_rounds: usize,
        asked: &[u32],
    ) -> Self {
        let progress = round as f64 / max_rounds as f64;
        let features = space
            .questions()
            .iter()
            .enumerate()
            .map(|(k, q)| {
                let gain = information_gain(belief, scene, q) / std::f64::consts::LN_2;
                QuestionFeatures {
                    gain,
                    late_gain: gain * progress,
                    asked: if asked.get(k).copied().unwrap_or(0) > 0 { 1.0 } else { 0.0 },
                }
            })
            .collect();
        PolicyInput { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Dense feature vector `ψ_k`.
    pub fn dense(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.len() + SHARED_FEATURES];
        v[k] = 1.0;
        v[self.len()..].copy_from_slice(&self.features[k].shared());
        v
    }
}

fn check_dims(params: &PolicyParams, input: &PolicyInput) -> Result<()> {
    if params.n_questions() != input.len() || params.theta.len() < SHARED_FEATURES {
        return Err(Error::ModelShape {
            expected: input.len() + SHARED_FEATURES,
            got: params.theta.len(),
        });
    }
    Ok(())
}

pub fn logits(params: &PolicyParams, input: &PolicyInput) -> Vec<f64> {
    let k_total = input.len();
    let shared = &params.theta[k_total..];
    input
        .features
        .iter()
        .enumerate()
        .map(|(k, f)| {
            params.theta[k] + f.shared().iter().zip(shared).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

pub fn probabilities(params: &PolicyParams, input: &PolicyInput) -> Vec<f64> {
    let z = logits(params, input);
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `∇_θ log π(k)` = `ψ_k − Σ_j π_j ψ_j`.
pub fn grad_log_prob(params: &PolicyParams, input: &PolicyInput, k: usize) -> Vec<f64> {
    let probs = probabilities(params, input);
    let n = input.len();
    let mut g = vec![0.0; n + SHARED_FEATURES];
    for (j, p) in probs.iter().enumerate() {
        g[j] -= p;
    }
    g[k] += 1.0;
    let mut mean_shared = [0.0; SHARED_FEATURES];
    for (p, f) in probs.iter().zip(&input.features) {
        for (m, x) in mean_shared.iter_mut().zip(f.shared()) {
            *m += p * x;
        }
    }
    let chosen = input.features[k].shared();
    for i in 0..SHARED_FEATURES {
        g[n + i] = chosen[i] - mean_shared[i];
    }
    g
}

/// A drawn question with its log-probability under the policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Choice {
    pub index: usize,
    pub log_prob: f64,
}

pub fn select_question(
    params: &PolicyParams,
    input: &PolicyInput,
    mode: SelectMode,
    rng: &mut GameRng,
) -> Result<Choice> {
    check_dims(params, input)?;
    let probs = probabilities(params, input);
    let index = match mode {
        SelectMode::Greedy => argmax(&logits(params, input)),
        SelectMode::Sample => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut idx = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    idx = i;
                    break;
                }
            }
            idx
        }
    };
    Ok(Choice {
        index,
        log_prob: probs[index].ln(),
    })
}
