//! Exponential-weights learners.
//!
//! All four learners share one engine: cumulative loss estimates `L̂`, a
//! learning rate
//!
//! ```text
//! η_t = sqrt( ln N / (N² + Σ_{s<t} b_s) ),   b_s = Σ_i p_{s,i} ℓ̂²_{s,i}
//! ```
//!
//! and play `p_{t,i} ∝ exp(−η_t L̂_{t−1,i})`. The weights are recomputed from
//! `L̂` every round (the new `η_t` applies to the whole cumulative loss), so no
//! multiplicative weight vector is kept. They differ only in the loss
//! estimates they feed the engine:
//!
//! | kind         | estimate for an observed arm `i`     | sees             |
//! |--------------|--------------------------------------|------------------|
//! | `Exp3Res`    | `G_i ℓ_i` with resampled `G_i`       | observations     |
//! | `Exp3R`      | `ℓ_i / (p_i + (1 − p_i) r_t)`        | observations, r_t|
//! | `Exp3`       | `ℓ_i / p_i`, chosen arm only         | chosen loss      |
//! | `HedgeOracle`| `ℓ_i` for every arm                  | full loss row    |

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::estimators::{iw_estimate, resampled_estimate, sample_g};
use crate::rng::RngStream;
use crate::types::{ArmIndex, Feedback, ObservationRound, Policy, PolicyState, ProbabilityVector};

/// `sqrt(ln N / (N² + cum_second_moment))`.
pub fn adaptive_eta(state: &PolicyState, n_arms: usize) -> Result<f64> {
    if n_arms < 2 {
        return Err(invalid("n_arms", "must be >= 2"));
    }
    if !(state.cum_second_moment >= 0.0) {
        return Err(invalid("cum_second_moment", "must be >= 0"));
    }
    let n = n_arms as f64;
    Ok((n.ln() / (n * n + state.cum_second_moment)).sqrt())
}

/// Per-round output of an engine update.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundEstimates {
    /// `ℓ̂_{t,i}` for every arm.
    pub estimates: Vec<f64>,
    /// `b_t = Σ_i p_{t,i} ℓ̂²_{t,i}`.
    pub second_moment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpWeightsEngine {
    state: PolicyState,
    /// Constant added to the accumulated second moment inside the learning
    /// rate; `N²`, which dominates any single `b_t` of the resampled estimate.
    eta_floor_constant: f64,
}

impl ExpWeightsEngine {
    pub fn new(n_arms: usize) -> Result<Self> {
        Self::from_state(PolicyState::new(n_arms))
    }

    /// Resumes from a checkpointed state.
    pub fn from_state(state: PolicyState) -> Result<Self> {
        if state.n_arms < 2 {
            return Err(invalid("n_arms", "must be >= 2"));
        }
        state.validate()?;
        let n = state.n_arms as f64;
        Ok(Self {
            state,
            eta_floor_constant: n * n,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.state.n_arms
    }

    pub fn state(&self) -> &PolicyState {
        &self.state
    }

    pub fn eta(&self) -> f64 {
        let n = self.state.n_arms as f64;
        (n.ln() / (self.eta_floor_constant + self.state.cum_second_moment)).sqrt()
    }

    /// `p_i ∝ exp(−η (L̂_i − min_j L̂_j))`. The shift cancels in the
    /// normalization and keeps the largest weight at exactly 1. Weights that
    /// would underflow to 0 are floored at the smallest normal `f64`, so
    /// every arm keeps positive probability.
    pub fn distribution(&self) -> ProbabilityVector {
        let eta = self.eta();
        let losses = &self.state.cum_est_loss;
        let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = losses
            .iter()
            .map(|&l| (-eta * (l - min)).exp().max(f64::MIN_POSITIVE))
            .collect();
        let total: f64 = weights.iter().sum();
        ProbabilityVector::new(weights.into_iter().map(|w| w / total).collect())
            .expect("normalized exponential weights form a simplex")
    }

    fn check_dims(&self, p_used: &ProbabilityVector, n_round: usize) -> Result<()> {
        let n = self.n_arms();
        if p_used.len() != n {
            return Err(Error::DimensionMismatch {
                what: "distribution",
                expected: n,
                actual: p_used.len(),
            });
        }
        if n_round != n {
            return Err(Error::DimensionMismatch {
                what: "observation round",
                expected: n,
                actual: n_round,
            });
        }
        Ok(())
    }

    fn accumulate(&mut self, p_used: &ProbabilityVector, estimates: Vec<f64>) -> RoundEstimates {
        let mut second_moment = 0.0;
        for (i, &est) in estimates.iter().enumerate() {
            self.state.cum_est_loss[i] += est;
            second_moment += p_used[i] * est * est;
        }
        self.state.cum_second_moment += second_moment;
        self.state.round += 1;
        RoundEstimates {
            estimates,
            second_moment,
        }
    }

    /// Resampled estimates: `G_i ℓ_i` for every observed arm, 0 elsewhere.
    /// `G_i` is drawn only for observed arms since it is multiplied by zero
    /// otherwise.
    pub fn exp3res_update(
        &mut self,
        p_used: &ProbabilityVector,
        round: &ObservationRound,
        rng: &mut RngStream,
    ) -> Result<RoundEstimates> {
        self.check_dims(p_used, round.n_arms())?;
        let mut estimates = vec![0.0; self.n_arms()];
        for (i, est) in estimates.iter_mut().enumerate() {
            if let Some(loss) = round.revealed_loss(i) {
                let g = sample_g(round, ArmIndex(i), p_used[i], rng)?;
                *est = resampled_estimate(g, true, loss);
            }
        }
        Ok(self.accumulate(p_used, estimates))
    }

    /// Importance weighting with the true `r_t`.
    pub fn exp3r_update(
        &mut self,
        p_used: &ProbabilityVector,
        round: &ObservationRound,
        r_true: f64,
    ) -> Result<RoundEstimates> {
        self.check_dims(p_used, round.n_arms())?;
        let mut estimates = vec![0.0; self.n_arms()];
        for (i, est) in estimates.iter_mut().enumerate() {
            if let Some(loss) = round.revealed_loss(i) {
                *est = iw_estimate(true, loss, p_used[i], r_true)?;
            }
        }
        Ok(self.accumulate(p_used, estimates))
    }

    /// Bandit feedback only: `ℓ_{I_t} / p_{I_t}` for the chosen arm.
    pub fn exp3_update(
        &mut self,
        p_used: &ProbabilityVector,
        round: &ObservationRound,
    ) -> Result<RoundEstimates> {
        self.check_dims(p_used, round.n_arms())?;
        let chosen = round.chosen().0;
        let p = p_used[chosen];
        if p <= 0.0 {
            return Err(invalid("p_used", "the chosen arm had probability 0"));
        }
        let mut estimates = vec![0.0; self.n_arms()];
        estimates[chosen] = round.chosen_loss() / p;
        Ok(self.accumulate(p_used, estimates))
    }

    /// Full information: the true loss of every arm.
    pub fn hedge_update(
        &mut self,
        p_used: &ProbabilityVector,
        loss_row: &[f64],
    ) -> Result<RoundEstimates> {
        self.check_dims(p_used, loss_row.len())?;
        if let Some((arm, &value)) = loss_row
            .iter()
            .enumerate()
            .find(|(_, l)| !(0.0..=1.0).contains(*l))
        {
            return Err(Error::LossOutOfRange { arm, value });
        }
        Ok(self.accumulate(p_used, loss_row.to_vec()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKind {
    Exp3Res,
    Exp3R,
    Exp3,
    HedgeOracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Exp3Res,
        PolicyKind::Exp3R,
        PolicyKind::Exp3,
        PolicyKind::HedgeOracle,
    ];

    /// Stable short name, used in CSV output and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Exp3Res => "exp3res",
            PolicyKind::Exp3R => "exp3r",
            PolicyKind::Exp3 => "exp3",
            PolicyKind::HedgeOracle => "oracle",
        }
    }

    pub(crate) fn stream_tag(self) -> u64 {
        match self {
            PolicyKind::Exp3Res => 1,
            PolicyKind::Exp3R => 2,
            PolicyKind::Exp3 => 3,
            PolicyKind::HedgeOracle => 4,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid("policy", format!("unknown policy {s:?}")))
    }
}

/// A learner of a given kind, driven through the [`Policy`] interface.
#[derive(Debug, Clone)]
pub struct Learner {
    kind: PolicyKind,
    engine: ExpWeightsEngine,
    last: Option<RoundEstimates>,
}

impl Learner {
    pub fn new(kind: PolicyKind, n_arms: usize) -> Result<Self> {
        Ok(Self {
            kind,
            engine: ExpWeightsEngine::new(n_arms)?,
            last: None,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn engine(&self) -> &ExpWeightsEngine {
        &self.engine
    }

    /// Estimates produced by the most recent update.
    pub fn last_estimates(&self) -> Option<&RoundEstimates> {
        self.last.as_ref()
    }
}

impl Policy for Learner {
    fn n_arms(&self) -> usize {
        self.engine.n_arms()
    }

    fn eta(&self) -> f64 {
        self.engine.eta()
    }

    fn distribution(&self) -> ProbabilityVector {
        self.engine.distribution()
    }

    fn update(&mut self, fb: &Feedback<'_>, rng: &mut RngStream) -> Result<()> {
        let out = match self.kind {
            PolicyKind::Exp3Res => self.engine.exp3res_update(fb.p_used, fb.round, rng)?,
            PolicyKind::Exp3R => self.engine.exp3r_update(fb.p_used, fb.round, fb.r_true)?,
            PolicyKind::Exp3 => self.engine.exp3_update(fb.p_used, fb.round)?,
            PolicyKind::HedgeOracle => self.engine.hedge_update(fb.p_used, fb.loss_row)?,
        };
        self.last = Some(out);
        Ok(())
    }

    fn state(&self) -> &PolicyState {
        self.engine.state()
    }
}
