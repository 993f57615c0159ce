//! The two hypotheses of the question-player: the object guesser and the
//! cooperation classifier.

use serde::{Deserialize, Serialize};

use super::belief::{argmax, BeliefState};
use super::features::DialogueFeatures;
use crate::error::{Error, Result};
use crate::game::CoopLabel;

/// Per-object features scored by a linear guesser: `[1, p_i, ln p_i]`.
pub const OBJECT_FEATURES: usize = 3;

const LOG_FLOOR: f64 = 1e-12;

fn object_features(p: f64) -> [f64; OBJECT_FEATURES] {
    [1.0, p, p.max(LOG_FLOOR).ln()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GuesserParams {
    BeliefArgmax,
    Linear { weights: Vec<f64> },
}

impl GuesserParams {
    pub fn check_shape(&self) -> Result<()> {
        match self {
            GuesserParams::BeliefArgmax => Ok(()),
            GuesserParams::Linear { weights } if weights.len() == OBJECT_FEATURES => Ok(()),
            GuesserParams::Linear { weights } => Err(Error::ModelShape {
                expected: OBJECT_FEATURES,
                got: weights.len(),
            }),
        }
    }

    /// Per-object scores; the guess is their argmax.
    pub fn scores(&self, b: &BeliefState) -> Result<Vec<f64>> {
        self.check_shape()?;
        Ok(match self {
            GuesserParams::BeliefArgmax => b.probs.clone(),
            GuesserParams::Linear { weights } => b
                .probs
                .iter()
                .map(|&p| object_features(p).iter().zip(weights).map(|(x, w)| x * w).sum())
                .collect(),
        })
    }

    /// One cross-entropy SGD step towards `target` (linear guessers only).
    pub fn sgd_step(&mut self, b: &BeliefState, target: usize, lr: f64) -> Result<()> {
        let scores = self.scores(b)?;
        let GuesserParams::Linear { weights } = self else {
            return Ok(());
        };
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let mut grad = [0.0; OBJECT_FEATURES];
        for (i, (&p, ei)) in b.probs.iter().zip(&e).enumerate() {
            let coef = if i == target { 1.0 } else { 0.0 } - ei / z;
            for (g, x) in grad.iter_mut().zip(object_features(p)) {
                *g += coef * x;
            }
        }
        for (w, g) in weights.iter_mut().zip(grad) {
            *w += lr * g;
        }
        Ok(())
    }
}

/// Most likely goal object, lowest index on ties.
pub fn guess_object(o: &GuesserParams, b: &BeliefState) -> Result<usize> {
    Ok(argmax(&o.scores(b)?))
}

/// Linear threshold classifier over dialogue features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoopClassifierParams {
    pub weights: Vec<f64>,
    pub threshold: f64,
}

impl CoopClassifierParams {
    pub fn zeros(dim: usize) -> Self {
        CoopClassifierParams {
            weights: vec![0.0; dim],
            threshold: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.threshold.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    fn check(&self, x: &DialogueFeatures) -> Result<()> {
        if x.len() != self.weights.len() {
            return Err(Error::ModelShape {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn margin(&self, x: &DialogueFeatures) -> Result<f64> {
        self.check(x)?;
        Ok(self.weights.iter().zip(x.as_slice()).map(|(w, v)| w * v).sum::<f64>() - self.threshold)
    }

    /// Logistic estimate of the probability that the answer-player is NC.
    pub fn nc_probability(&self, x: &DialogueFeatures) -> Result<f64> {
        Ok(sigmoid(self.margin(x)?))
    }

    /// One logistic-loss SGD step on `(x, z)`; the threshold stays fixed.
    pub fn sgd_step(&mut self, x: &DialogueFeatures, z: CoopLabel, lr: f64) -> Result<()> {
        let p = self.nc_probability(x)?;
        let y = if z.is_nc() { 1.0 } else { 0.0 };
        let coef = lr * (y - p);
        for (w, v) in self.weights.iter_mut().zip(x.as_slice()) {
            *w += coef * v;
        }
        Ok(())
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// NC iff `w · x > threshold`; the boundary itself is CP.
pub fn classify_cooperation(c: &CoopClassifierParams, x: &DialogueFeatures) -> Result<CoopLabel> {
    Ok(CoopLabel::from_nc(c.margin(x)? > 0.0))
}
