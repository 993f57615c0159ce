use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Answer, Question, Scene};

/// Posterior over which scene object is the goal.
///
/// Answers are modelled as noisy: with probability `lie_rate` the observed
/// answer disagrees with the truth about the goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub probs: Vec<f64>,
    pub lie_rate: f64,
    /// Set once evidence has ruled out every object (only possible with a
    /// zero lie rate); the posterior was reset to uniform. Sticky.
    pub fallback: bool,
}

impl BeliefState {
    pub fn uniform(n_objects: usize, lie_rate: f64) -> Result<Self> {
        if n_objects == 0 {
            return Err(Error::InvalidArgument("belief over zero objects".into()));
        }
        if !(0.0..=0.5).contains(&lie_rate) {
            return Err(Error::InvalidArgument(format!(
                "lie rate must lie in [0, 0.5], got {lie_rate}"
            )));
        }
        Ok(BeliefState {
            probs: vec![1.0 / n_objects as f64; n_objects],
            lie_rate,
            fallback: false,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    /// Most probable object, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Bayesian update of `b` after observing answer `a` to question `q`.
pub fn belief_update(b: &BeliefState, scene: &Scene, q: &Question, a: Answer) -> Result<BeliefState> {
    if b.len() != scene.len() {
        return Err(Error::InvalidArgument(format!(
            "belief over {} objects used with a scene of {}",
            b.len(),
            scene.len()
        )));
    }
    if a == Answer::Na || q.is_oov(&scene.vocab) {
        return Ok(b.clone());
    }
    let eps = b.lie_rate;
    let said_yes = a == Answer::Yes;
    let mut post: Vec<f64> = b
        .probs
        .iter()
        .zip(&scene.objects)
        .map(|(p, obj)| {
            let consistent = q.matches(obj, &scene.vocab) == Some(said_yes);
            p * if consistent { 1.0 - eps } else { eps }
        })
        .collect();
    let z: f64 = post.iter().sum();
    let mut fallback = b.fallback;
    if z > 0.0 {
        post.iter_mut().for_each(|p| *p /= z);
    } else {
        let u = 1.0 / post.len() as f64;
        post.iter_mut().for_each(|p| *p = u);
        fallback = true;
    }
    Ok(BeliefState {
        probs: post,
        lie_rate: eps,
        fallback,
    })
}

/// Expected entropy reduction (nats) from asking `q` under belief `b`.
pub fn information_gain(b: &BeliefState, scene: &Scene, q: &Question) -> f64 {
    if q.is_oov(&scene.vocab) {
        return 0.0;
    }
    let eps = b.lie_rate;
    let mut yes_mass = 0.0;
    let mut post_yes = Vec::with_capacity(b.len());
    let mut post_no = Vec::with_capacity(b.len());
    for (p, obj) in b.probs.iter().zip(&scene.objects) {
        let m = q.matches(obj, &scene.vocab) == Some(true);
        let l_yes = if m { 1.0 - eps } else { eps };
        post_yes.push(p * l_yes);
        post_no.push(p * (1.0 - l_yes));
        yes_mass += p * l_yes;
    }
    let no_mass = 1.0 - yes_mass;
    let h_cond = |post: &mut Vec<f64>, mass: f64| {
        if mass <= 0.0 {
            return 0.0;
        }
        post.iter_mut().for_each(|x| *x /= mass);
        mass * entropy(post)
    };
    let expected = h_cond(&mut post_yes, yes_mass) + h_cond(&mut post_no, no_mass);
    (b.entropy() - expected).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Attribute, ObjectSpec, SceneConfig};

    fn scene(colors: &[usize]) -> Scene {
        let objects = colors
            .iter()
            .enumerate()
            .map(|(id, &color)| ObjectSpec {
                id,
                category: 0,
                color,
                size: 0,
                cell: (0, 0),
            })
            .collect();
        Scene::new(objects, 0, SceneConfig::default().vocab()).unwrap()
    }

    #[test]
    fn indicator_likelihood_splits_mass() {
        let s = scene(&[0, 0, 1, 1]);
        let b = BeliefState::uniform(4, 0.0).unwrap();
        let post = belief_update(&b, &s, &Question::new(Attribute::Color, 0), Answer::Yes).unwrap();
        assert_eq!(post.probs, vec![0.5, 0.5, 0.0, 0.0]);
        assert!(!post.fallback);
    }

    #[test]
    fn half_lie_rate_is_uninformative() {
        let s = scene(&[0, 1, 2]);
        let b = BeliefState {
            probs: vec![0.5, 0.3, 0.2],
            lie_rate: 0.5,
            fallback: false,
        };
        for a in [Answer::Yes, Answer::No] {
            let post = belief_update(&b, &s, &Question::new(Attribute::Color, 1), a).unwrap();
            for (x, y) in post.probs.iter().zip(&b.probs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hand_computed_posterior() {
        // answer consistent only with the second object
        let s = scene(&[0, 1]);
        let b = BeliefState {
            probs: vec![0.8, 0.2],
            lie_rate: 0.1,
            fallback: false,
        };
        let post = belief_update(&b, &s, &Question::new(Attribute::Color, 1), Answer::Yes).unwrap();
        assert!((post.probs[0] - 0.3077).abs() < 1e-4);
        assert!((post.probs[1] - 0.6923).abs() < 1e-4);
    }

    #[test]
    fn na_leaves_belief_unchanged() {
        let s = scene(&[0, 1]);
        let b = BeliefState::uniform(2, 0.05).unwrap();
        let post = belief_update(&b, &s, &Question::new(Attribute::Color, 1), Answer::Na).unwrap();
        assert_eq!(post, b);
    }

    #[test]
    fn impossible_evidence_falls_back_to_uniform() {
        let s = scene(&[0, 0]);
        let b = BeliefState::uniform(2, 0.0).unwrap();
        let post = belief_update(&b, &s, &Question::new(Attribute::Color, 1), Answer::Yes).unwrap();
        assert!(post.fallback);
        assert_eq!(post.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn information_gain_of_a_perfect_split() {
        let s = scene(&[0, 0, 1, 1]);
        let b = BeliefState::uniform(4, 0.0).unwrap();
        let ig = information_gain(&b, &s, &Question::new(Attribute::Color, 0));
        assert!((ig - 2f64.ln()).abs() < 1e-12);
        let none = information_gain(&b, &s, &Question::new(Attribute::Color, 5));
        assert!(none.abs() < 1e-12);
    }
}
