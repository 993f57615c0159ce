//! Monte-Carlo checks of the concentration inequalities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bounds::prop1_c_term;
use crate::error::{Error, Result};
use crate::rng::GameRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub violation_freq: f64,
    pub bound: f64,
    /// Standard error of `violation_freq`.
    pub mc_stderr: f64,
    pub trials: usize,
    /// `violation_freq ≤ bound + 3·mc_stderr`
    pub passes: bool,
}

impl McCheck {
    fn new(violations: usize, trials: usize, bound: f64) -> Self {
        let f = violations as f64 / trials as f64;
        let mc_stderr = (f * (1.0 - f) / trials as f64).sqrt();
        McCheck {
            violation_freq: f,
            bound,
            mc_stderr,
            trials,
            passes: f <= bound + 3.0 * mc_stderr,
        }
    }
}

/// `exp(−m(α − ε)²/2)`
pub fn lemma1_bound(alpha: f64, epsilon: f64, m: usize) -> Result<f64> {
    if alpha <= epsilon {
        return Err(Error::Precondition(format!(
            "the improvement α = {alpha} must exceed ε = {epsilon}"
        )));
    }
    Ok((-(m as f64) * (alpha - epsilon).powi(2) / 2.0).exp())
}

/// Frequency of `U ≥ −ε`, where `U` is the mean of `m` paired reward
/// differences `ρ_S − ρ_T`, against the Hoeffding bound.
pub fn lemma1_mc_check(
    alpha: f64,
    epsilon: f64,
    m: usize,
    trials: usize,
    mut reward_pair: impl FnMut(&mut GameRng) -> (f64, f64),
    rng: &mut GameRng,
) -> Result<McCheck> {
    let bound = lemma1_bound(alpha, epsilon, m)?;
    if m == 0 || trials == 0 {
        return Err(Error::InvalidArgument("m and trials must be positive".into()));
    }
    let mut violations = 0;
    for _ in 0..trials {
        let mut sum = 0.0;
        for _ in 0..m {
            let (rs, rt) = reward_pair(rng);
            sum += rs - rt;
        }
        if sum / m as f64 >= -epsilon {
            violations += 1;
        }
    }
    Ok(McCheck::new(violations, trials, bound))
}

/// Independent Bernoulli rewards with the given means.
pub fn bernoulli_pair(mean_s: f64, mean_t: f64) -> impl FnMut(&mut GameRng) -> (f64, f64) {
    move |rng| {
        (
            f64::from(u8::from(rng.gen_bool(mean_s))),
            f64::from(u8::from(rng.gen_bool(mean_t))),
        )
    }
}

/// Frequency of `|p̂ − p_NC| ≥ C` over samples of `m` Bernoulli labels,
/// against `δ/3`. Returns the check and `C`.
pub fn phat_concentration_check(
    p_nc: f64,
    m: usize,
    delta: f64,
    trials: usize,
    rng: &mut GameRng,
) -> Result<(McCheck, f64)> {
    if !(0.0..=1.0).contains(&p_nc) {
        return Err(Error::InvalidArgument(format!("p_nc must be a probability, got {p_nc}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("δ must lie in (0, 1), got {delta}")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let c = prop1_c_term(m, delta)?;
    let mut violations = 0;
    for _ in 0..trials {
        let nc = (0..m).filter(|_| rng.gen_bool(p_nc)).count();
        if (nc as f64 / m as f64 - p_nc).abs() >= c {
            violations += 1;
        }
    }
    Ok((McCheck::new(violations, trials, delta / 3.0), c))
}
