//! The cooperation-error bound and its proof devices as checkable objects.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hypothesis::{
    erm, random_class, random_sample, sym_diff_class, vc_dimension_exact, FiniteHypothesisClass, OutputSpace,
    DEFAULT_VC_LIMIT,
};
use super::sample::{coop_mistakes, object_mistakes, p_hat, LabeledSample, SampleSummary};
use crate::error::{Error, Result};
use crate::game::CoopLabel;
use crate::rng::GameRng;

/// Generalization term `(4 + √(d ln(2em/d))) / (δ √(2m))`.
///
/// `δ = 1` is accepted as a boundary value.
pub fn vc_term_c_thm1(d: usize, m: usize, delta: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("VC dimension must be at least 1".into()));
    }
    if m < d {
        return Err(Error::InvalidArgument(format!(
            "sample size {m} is smaller than the VC dimension {d}"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("confidence must lie in (0, 1], got {delta}")));
    }
    let (d, m) = (d as f64, m as f64);
    let log_term = (d * (2.0 * std::f64::consts::E * m / d).ln()).sqrt();
    Ok((4.0 + log_term) / (delta * (2.0 * m).sqrt()))
}

/// Every scalar of the cooperation-error bound for one `(o, o′)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub o: usize,
    pub oprime: usize,
    pub p_hat: f64,
    pub oer_o: f64,
    pub oer_o_nc: f64,
    pub oer_o_cp: f64,
    pub delta_oprime: f64,
    pub cer_chat: f64,
    /// Absent when `d = 0` or `m < d`.
    #[serde(rename = "C_term")]
    pub c_term: Option<f64>,
    pub d: usize,
    pub delta_confidence: f64,
    pub m: usize,
    pub rhs: Option<f64>,
    pub empirical_rhs: f64,
    pub holds_empirical: bool,
}

/// Result of the deterministic bound check on one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thm1Check {
    pub chat: usize,
    pub reports: Vec<BoundReport>,
}

impl Thm1Check {
    pub fn violations(&self) -> usize {
        self.reports.iter().filter(|r| !r.holds_empirical).count()
    }
}

/// Check `ĉer(ĉ) ≤ p̂ + ôer(o) − Δ(o′)` for every ordered pair of `O`, where
/// `ĉ` is the empirical risk minimizer of `C`.
///
/// The verdict is decided on integer mistake counts (all terms share the
/// denominator `m`), so tight cases are not lost to rounding.
pub fn thm1_empirical_check(
    o_class: &FiniteHypothesisClass,
    c_class: &FiniteHypothesisClass,
    s: &LabeledSample,
    delta: f64,
) -> Result<Thm1Check> {
    if c_class.output() != OutputSpace::Cooperation {
        return Err(Error::Precondition("C must be a class of cooperation classifiers".into()));
    }
    if !c_class.contains_class(&sym_diff_class(o_class)) {
        return Err(Error::Precondition(
            "C does not contain the symmetric-difference class of O".into(),
        ));
    }
    if !s.has_both_labels() {
        return Err(Error::UndefinedConditional(if s.count(CoopLabel::NonCooperative) == 0 {
            CoopLabel::NonCooperative
        } else {
            CoopLabel::Cooperative
        }));
    }
    let chat = erm(c_class, s)?;
    let m = s.m();
    let chat_mistakes = coop_mistakes(s, c_class.coop_fn(chat));
    let cer_chat = chat_mistakes as f64 / m as f64;
    let d = match vc_dimension_exact(c_class, DEFAULT_VC_LIMIT) {
        Ok(d) => d,
        Err(Error::Infeasible { .. }) => (c_class.len() as f64).log2().floor() as usize,
        Err(e) => return Err(e),
    };
    let c_term = vc_term_c_thm1(d, m, delta).ok();
    let n_nc = s.count(CoopLabel::NonCooperative);
    let mut reports = Vec::with_capacity(o_class.len() * o_class.len());
    for i in 0..o_class.len() {
        let summary_o = SampleSummary::compute(s, o_class.object_fn(i), o_class.object_fn(i))?;
        let o_mistakes = object_mistakes(s, o_class.object_fn(i), None);
        for j in 0..o_class.len() {
            let op = o_class.object_fn(j);
            let gap = super::sample::coop_gap(s, &op)?;
            let nc_mistakes = object_mistakes(s, &op, Some(CoopLabel::NonCooperative));
            let cp_mistakes = object_mistakes(s, &op, Some(CoopLabel::Cooperative));
            // m·(p̂ + ôer(o) − Δ(o′)) in exact integers
            let scaled_rhs = n_nc as i64 + o_mistakes as i64 - nc_mistakes as i64 + cp_mistakes as i64;
            let empirical_rhs = p_hat(s) + summary_o.oer_o - gap;
            reports.push(BoundReport {
                o: i,
                oprime: j,
                p_hat: summary_o.p_hat,
                oer_o: summary_o.oer_o,
                oer_o_nc: summary_o.oer_o_nc,
                oer_o_cp: summary_o.oer_o_cp,
                delta_oprime: gap,
                cer_chat,
                c_term,
                d,
                delta_confidence: delta,
                m,
                rhs: c_term.map(|c| empirical_rhs + c),
                empirical_rhs,
                holds_empirical: chat_mistakes as i64 <= scaled_rhs,
            });
        }
    }
    Ok(Thm1Check { chat, reports })
}

/// `1[o′≠y] − 1[o≠y] ≤ 1[o≠o′] ≤ 1[o≠y] + 1[o′≠y]` at every point.
pub fn triangle_inequality_check(
    o: impl Fn(usize) -> usize,
    oprime: impl Fn(usize) -> usize,
    points: &[(usize, usize)],
) -> bool {
    points.iter().all(|&(x, y)| {
        let a = i32::from(o(x) != y);
        let b = i32::from(oprime(x) != y);
        let mid = i32::from(o(x) != oprime(x));
        b - a <= mid && mid <= a + b
    })
}

/// Sizes of randomly generated bound-check instances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceLimits {
    pub max_domain: usize,
    pub max_hypotheses: usize,
    pub max_m: usize,
    pub max_objects: usize,
    /// Extra random classifiers added on top of the symmetric-difference class.
    pub max_extra: usize,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        InstanceLimits {
            max_domain: 8,
            max_hypotheses: 6,
            max_m: 64,
            max_objects: 4,
            max_extra: 8,
        }
    }
}

/// A random `(O, C, S)` with `C ⊇ OΔO` and both labels present in `S`.
pub fn random_instance(
    limits: &InstanceLimits,
    rng: &mut GameRng,
) -> (FiniteHypothesisClass, FiniteHypothesisClass, LabeledSample) {
    let domain = rng.gen_range(1..=limits.max_domain);
    let n_objects = rng.gen_range(2..=limits.max_objects);
    let o = random_class(
        domain,
        OutputSpace::Objects(n_objects),
        rng.gen_range(1..=limits.max_hypotheses),
        rng,
    );
    let mut rows = sym_diff_class(&o).table().to_vec();
    let extra = random_class(domain, OutputSpace::Cooperation, rng.gen_range(0..=limits.max_extra), rng);
    rows.extend(extra.table().iter().cloned());
    let c = FiniteHypothesisClass::dedup(domain, OutputSpace::Cooperation, rows).expect("valid rows");
    let p_nc = rng.gen_range(0.05..0.95);
    loop {
        let m = rng.gen_range(2..=limits.max_m);
        let s = random_sample(domain, n_objects, p_nc, m, rng).expect("m ≥ 2");
        if s.has_both_labels() {
            return (o, c, s);
        }
    }
}

/// One row of a bound-check battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryRow {
    pub instance: usize,
    pub m: usize,
    pub p_hat: f64,
    /// `ĉer(ĉ)`
    pub lhs: f64,
    /// Smallest `p̂ + ôer(o) − Δ(o′)` over all pairs.
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

pub fn thm1_battery(n: usize, limits: &InstanceLimits, delta: f64, rng: &mut GameRng) -> Result<Vec<BatteryRow>> {
    (0..n)
        .map(|instance| {
            let (o, c, s) = random_instance(limits, rng);
            let check = thm1_empirical_check(&o, &c, &s, delta)?;
            let rhs = check
                .reports
                .iter()
                .map(|r| r.empirical_rhs)
                .fold(f64::INFINITY, f64::min);
            let lhs = check.reports[0].cer_chat;
            Ok(BatteryRow {
                instance,
                m: s.m(),
                p_hat: p_hat(&s),
                lhs,
                rhs,
                margin: rhs - lhs,
                holds: check.violations() == 0,
            })
        })
        .collect()
}

pub fn write_battery_csv<W: std::io::Write>(rows: &[BatteryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Concentration radius `(2m)^{-1/2} √(ln 6 − ln δ)` of the NC-rate estimate.
pub fn prop1_c_term(m: usize, delta: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("confidence must lie in (0, 1], got {delta}")));
    }
    Ok(((6f64.ln() - delta.ln()) / (2.0 * m as f64)).sqrt())
}

/// Comparison of the bound value between a baseline sample `S` and a sample
/// `T` from an improved policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub s: SampleSummary,
    pub t: SampleSummary,
    /// `p̂_T + ôer_T(o) − Δ_T(o′)`
    pub lhs: f64,
    /// `p̂_S + ôer_S(o) − Δ_S(o′) + 4C + ε`
    pub rhs: f64,
    pub c_term: f64,
    pub epsilon: f64,
    pub slack: f64,
    pub margin: f64,
    pub holds: bool,
    /// `ôer_T < ôer_S − ε` for both hypotheses.
    pub improvement_ok: bool,
    /// `|ôer_T(o|NC) − ôer_S(o|NC)| ≤ ε`
    pub effectiveness_ok: bool,
    /// `|p̂_T − p̂_S| < 2C`
    pub rate_ok: bool,
    /// Human-readable account of any failed assumption.
    pub diagnostics: Vec<String>,
}

impl Prop1Report {
    pub fn assumptions_hold(&self) -> bool {
        self.improvement_ok && self.effectiveness_ok && self.rate_ok
    }

    /// The inequality failed although every assumption held.
    pub fn is_theorem_failure(&self) -> bool {
        !self.holds && self.assumptions_hold()
    }
}

pub fn prop1_inequality_check(s: &SampleSummary, t: &SampleSummary, delta: f64, epsilon: f64) -> Result<Prop1Report> {
    if epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!("ε must be non-negative, got {epsilon}")));
    }
    let c = prop1_c_term(s.m.min(t.m), delta)?;
    let slack = 4.0 * c + epsilon;
    let lhs = t.bound_value();
    let rhs = s.bound_value() + slack;
    let improvement_ok = t.oer_o < s.oer_o - epsilon && t.oer_oprime < s.oer_oprime - epsilon;
    let effectiveness_ok = (t.oer_o_nc - s.oer_o_nc).abs() <= epsilon;
    let rate_ok = (t.p_hat - s.p_hat).abs() < 2.0 * c;
    let mut diagnostics = Vec::new();
    if !improvement_ok {
        diagnostics.push(format!(
            "improvement not realized: oer_T(o) = {:.4} vs oer_S(o) - eps = {:.4}; oer_T(o') = {:.4} vs {:.4}",
            t.oer_o,
            s.oer_o - epsilon,
            t.oer_oprime,
            s.oer_oprime - epsilon
        ));
    }
    if !effectiveness_ok {
        diagnostics.push(format!(
            "NC error moved by {:.4} > eps = {epsilon}",
            (t.oer_o_nc - s.oer_o_nc).abs()
        ));
    }
    if !rate_ok {
        diagnostics.push(format!(
            "NC rates differ by {:.4} >= 2C = {:.4}",
            (t.p_hat - s.p_hat).abs(),
            2.0 * c
        ));
    }
    Ok(Prop1Report {
        s: *s,
        t: *t,
        lhs,
        rhs,
        c_term: c,
        epsilon,
        slack,
        margin: rhs - lhs,
        holds: lhs <= rhs,
        improvement_ok,
        effectiveness_ok,
        rate_ok,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::theory::sample::LabeledItem;

    #[test]
    fn c_term_values() {
        assert!((vc_term_c_thm1(1, 2, 1.0).unwrap() - 2.772).abs() < 1e-3);
        assert!((vc_term_c_thm1(3, 1000, 0.1).unwrap() - 1.955).abs() < 1e-3);
        assert!(vc_term_c_thm1(3, 1_000_000_000, 0.1).unwrap() < 0.01);
        assert!(vc_term_c_thm1(3, 2, 0.1).is_err());
    }

    #[test]
    fn c_term_decreases_in_m() {
        let mut prev = f64::INFINITY;
        for m in [10, 100, 1000, 10_000] {
            let c = vc_term_c_thm1(3, m, 0.1).unwrap();
            assert!(c < prev);
            prev = c;
        }
    }

    #[test]
    fn triangle_exhaustive_three_labels() {
        for a in 0..3 {
            for b in 0..3 {
                for y in 0..3 {
                    assert!(triangle_inequality_check(|_| a, |_| b, &[(0, y)]));
                }
            }
        }
    }

    #[test]
    fn singleton_o_specializes() {
        let o = FiniteHypothesisClass::new(2, OutputSpace::Objects(2), vec![vec![0, 1]]).unwrap();
        let c = sym_diff_class(&o);
        let s = LabeledSample::new(vec![
            LabeledItem { x: 0, y: 1, z: CoopLabel::NonCooperative },
            LabeledItem { x: 1, y: 1, z: CoopLabel::Cooperative },
        ])
        .unwrap();
        let check = thm1_empirical_check(&o, &c, &s, 0.1).unwrap();
        assert_eq!(check.reports.len(), 1);
        let r = &check.reports[0];
        assert!(r.holds_empirical);
        assert_eq!(r.cer_chat, 0.5);
        assert!((r.empirical_rhs - (0.5 + 0.5 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn missing_containment_is_a_precondition_error() {
        let o = FiniteHypothesisClass::new(2, OutputSpace::Objects(2), vec![vec![0, 1], vec![1, 1]]).unwrap();
        let c = FiniteHypothesisClass::new(2, OutputSpace::Cooperation, vec![vec![0, 0]]).unwrap();
        let s = LabeledSample::new(vec![
            LabeledItem { x: 0, y: 1, z: CoopLabel::NonCooperative },
            LabeledItem { x: 1, y: 1, z: CoopLabel::Cooperative },
        ])
        .unwrap();
        assert!(matches!(thm1_empirical_check(&o, &c, &s, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn rhs_is_the_sum_of_its_parts() {
        let mut rng = seeded(4);
        let (o, c, s) = random_instance(&InstanceLimits::default(), &mut rng);
        for r in thm1_empirical_check(&o, &c, &s, 0.1).unwrap().reports {
            let parts = r.p_hat + r.oer_o - r.delta_oprime;
            assert!((r.empirical_rhs - parts).abs() <= 1e-12);
            if let (Some(rhs), Some(c)) = (r.rhs, r.c_term) {
                assert!((rhs - parts - c).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn prop1_c_values() {
        assert!((prop1_c_term(100, 0.3).unwrap() - 0.1224).abs() < 1e-4);
        assert!((prop1_c_term(50, 1.0).unwrap() - (6f64.ln() / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_hold_with_full_slack() {
        let s = SampleSummary {
            m: 100,
            p_hat: 0.4,
            oer_o: 0.3,
            oer_o_nc: 0.5,
            oer_o_cp: 1.0 / 6.0,
            oer_oprime: 0.3,
            gap_oprime: 0.1,
        };
        let r = prop1_inequality_check(&s, &s, 0.3, 0.05).unwrap();
        assert!(r.holds);
        assert!((r.margin - r.slack).abs() < 1e-12);
        assert!(!r.improvement_ok);
        assert!(!r.is_theorem_failure());
    }
}
