//! Empirical estimators over labelled samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CoopLabel, GameRecord};

/// One example: an abstract point, its goal object and its cooperation label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledItem {
    pub x: usize,
    pub y: usize,
    pub z: CoopLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    items: Vec<LabeledItem>,
}

impl LabeledSample {
    pub fn new(items: Vec<LabeledItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InsufficientData("a sample needs at least one item".into()));
        }
        Ok(LabeledSample { items })
    }

    /// Sample whose point `i` is the `i`-th record, together with the
    /// recorded object and cooperation guesses as hypotheses over those
    /// points.
    pub fn from_records(records: &[GameRecord]) -> Result<(Self, Vec<usize>, Vec<CoopLabel>)> {
        let mut items = Vec::with_capacity(records.len());
        let mut objects = Vec::with_capacity(records.len());
        let mut coop = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let (Some(o), Some(c)) = (r.object_guess, r.coop_guess) else {
                return Err(Error::InvalidRecord(format!("record {i} has no guesses")));
            };
            items.push(LabeledItem {
                x: i,
                y: r.scene.goal,
                z: r.coop_label,
            });
            objects.push(o);
            coop.push(c);
        }
        Ok((LabeledSample::new(items)?, objects, coop))
    }

    pub fn items(&self) -> &[LabeledItem] {
        &self.items
    }

    pub fn m(&self) -> usize {
        self.items.len()
    }

    pub fn count(&self, which: CoopLabel) -> usize {
        self.items.iter().filter(|i| i.z == which).count()
    }

    pub fn has_both_labels(&self) -> bool {
        self.count(CoopLabel::Cooperative) > 0 && self.count(CoopLabel::NonCooperative) > 0
    }
}

/// Fraction of NC items.
pub fn p_hat(s: &LabeledSample) -> f64 {
    s.count(CoopLabel::NonCooperative) as f64 / s.m() as f64
}

/// Number of items whose object label `o` gets wrong, optionally restricted
/// to one cooperation label.
pub fn object_mistakes(s: &LabeledSample, o: impl Fn(usize) -> usize, which: Option<CoopLabel>) -> usize {
    s.items
        .iter()
        .filter(|i| which.is_none_or(|w| i.z == w) && o(i.x) != i.y)
        .count()
}

pub fn coop_mistakes(s: &LabeledSample, c: impl Fn(usize) -> CoopLabel) -> usize {
    s.items.iter().filter(|i| c(i.x) != i.z).count()
}

/// Object-identification error.
pub fn oer(s: &LabeledSample, o: impl Fn(usize) -> usize) -> f64 {
    object_mistakes(s, o, None) as f64 / s.m() as f64
}

/// Cooperation-identification error.
pub fn cer(s: &LabeledSample, c: impl Fn(usize) -> CoopLabel) -> f64 {
    coop_mistakes(s, c) as f64 / s.m() as f64
}

/// Object error on the items with cooperation label `which`.
pub fn oer_conditional(s: &LabeledSample, o: impl Fn(usize) -> usize, which: CoopLabel) -> Result<f64> {
    let n = s.count(which);
    if n == 0 {
        return Err(Error::UndefinedConditional(which));
    }
    Ok(object_mistakes(s, o, Some(which)) as f64 / n as f64)
}

/// Cooperation gap `p̂·oer(o|NC) − (1 − p̂)·oer(o|CP)`; negative when the
/// question-player does worse against cooperative answerers.
pub fn coop_gap(s: &LabeledSample, o: impl Fn(usize) -> usize) -> Result<f64> {
    let nc = oer_conditional(s, &o, CoopLabel::NonCooperative)?;
    let cp = oer_conditional(s, &o, CoopLabel::Cooperative)?;
    let p = p_hat(s);
    Ok(p * nc - (1.0 - p) * cp)
}

/// Empirical α of one policy over another: difference of mean object rewards.
pub fn alpha_improvement(j_star_hat: f64, j_hat: f64) -> f64 {
    j_star_hat - j_hat
}

/// The quantities of one sample under a pair of object hypotheses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub m: usize,
    pub p_hat: f64,
    pub oer_o: f64,
    pub oer_o_nc: f64,
    pub oer_o_cp: f64,
    pub oer_oprime: f64,
    pub gap_oprime: f64,
}

impl SampleSummary {
    pub fn compute(s: &LabeledSample, o: impl Fn(usize) -> usize, oprime: impl Fn(usize) -> usize) -> Result<Self> {
        Ok(SampleSummary {
            m: s.m(),
            p_hat: p_hat(s),
            oer_o: oer(s, &o),
            oer_o_nc: oer_conditional(s, &o, CoopLabel::NonCooperative)?,
            oer_o_cp: oer_conditional(s, &o, CoopLabel::Cooperative)?,
            oer_oprime: oer(s, &oprime),
            gap_oprime: coop_gap(s, &oprime)?,
        })
    }

    /// `p̂ + oer(o) − Δ(o′)`
    pub fn bound_value(&self) -> f64 {
        self.p_hat + self.oer_o - self.gap_oprime
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CoopLabel::{Cooperative as CP, NonCooperative as NC};

    fn sample(z: &[CoopLabel]) -> LabeledSample {
        LabeledSample::new(
            z.iter()
                .enumerate()
                .map(|(x, &z)| LabeledItem { x, y: 0, z })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn p_hat_examples() {
        assert_eq!(p_hat(&sample(&[NC, CP, NC, CP])), 0.5);
        assert_eq!(p_hat(&sample(&[CP, CP])), 0.0);
        assert_eq!(p_hat(&sample(&[NC, CP, CP, CP, NC])), 0.4);
    }

    #[test]
    fn oer_examples() {
        let s = sample(&[NC, CP, NC, CP]);
        assert_eq!(oer(&s, |_| 0), 0.0);
        assert_eq!(oer(&s, |_| 1), 1.0);
        assert_eq!(oer(&s, |x| usize::from(x == 2)), 0.25);
    }

    #[test]
    fn cer_of_constant_classifiers() {
        let s = sample(&[NC, CP, CP, CP, NC]);
        assert_eq!(cer(&s, |_| CP), p_hat(&s));
        assert!((cer(&s, |_| NC) - (1.0 - p_hat(&s))).abs() < 1e-15);
        assert_eq!(cer(&s, |x| s.items()[x].z), 0.0);
    }

    #[test]
    fn conditional_errors() {
        let s = sample(&[CP, CP, NC]);
        let o = |x: usize| usize::from(x == 2);
        assert_eq!(oer_conditional(&s, o, CP).unwrap(), 0.0);
        assert_eq!(oer_conditional(&s, o, NC).unwrap(), 1.0);
        let all_cp = sample(&[CP, CP]);
        assert!(matches!(
            oer_conditional(&all_cp, o, NC),
            Err(Error::UndefinedConditional(NC))
        ));
        assert!(coop_gap(&all_cp, o).is_err());
    }

    #[test]
    fn gap_arithmetic() {
        // p̂ = 0.5; 10 NC items with 8 wrong, 10 CP items with 4 wrong
        let mut items = Vec::new();
        for x in 0..20 {
            items.push(LabeledItem {
                x,
                y: 0,
                z: if x < 10 { NC } else { CP },
            });
        }
        let s = LabeledSample::new(items).unwrap();
        let o = |x: usize| usize::from(x < 8 || (10..14).contains(&x));
        assert!((coop_gap(&s, o).unwrap() - 0.2).abs() < 1e-12);
        let o = |x: usize| usize::from(x < 2 || (10..16).contains(&x));
        assert!((coop_gap(&s, o).unwrap() + 0.2).abs() < 1e-12);
        let o = |x: usize| usize::from(x < 3 || (10..13).contains(&x));
        assert!(coop_gap(&s, o).unwrap().abs() < 1e-12);
    }

    #[test]
    fn alpha_is_antisymmetric() {
        assert_eq!(alpha_improvement(0.5, 0.5), 0.0);
        assert!((alpha_improvement(0.7, 0.5) - 0.2).abs() < 1e-12);
        assert_eq!(alpha_improvement(0.3, 0.9), -alpha_improvement(0.9, 0.3));
    }

    #[test]
    fn empty_sample_is_rejected() {
        assert!(LabeledSample::new(Vec::new()).is_err());
    }
}
