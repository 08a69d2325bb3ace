//! Domain types shared across the crate and the policy interface.
//!
//! Arms are 0-based here; the usual textbook notation `i ∈ {1, …, N}` maps to
//! `ArmIndex(i - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

/// Absolute tolerance on `|Σ p − 1|` for a probability vector.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArmIndex(pub usize);

impl ArmIndex {
    pub fn checked(index: usize, n_arms: usize) -> Result<Self> {
        if index < n_arms {
            Ok(Self(index))
        } else {
            Err(Error::ArmOutOfRange { index, n_arms })
        }
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// True iff every entry is `>= 0` and the entries sum to 1 within
/// [`SIMPLEX_TOLERANCE`]. NaN entries fail.
pub fn validate_simplex(v: &[f64]) -> bool {
    v.iter().all(|&x| x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if validate_simplex(&entries) {
            Ok(Self(entries))
        } else {
            Err(Error::NotASimplex)
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, arm: ArmIndex) -> f64 {
        self.0[arm.0]
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Draws an arm by walking the CDF in index order.
///
/// A uniform `u ∈ [0, 1)` selects the first arm whose cumulative mass exceeds
/// `u`, so ties and rounding resolve toward the lower index. If rounding leaves
/// `u` past the final cumulative sum, the last arm with positive mass is
/// returned.
pub fn sample_categorical(p: &ProbabilityVector, rng: &mut RngStream) -> ArmIndex {
    let u = rng.unit();
    let mut cum = 0.0;
    for (i, &pi) in p.as_slice().iter().enumerate() {
        cum += pi;
        if u < cum {
            return ArmIndex(i);
        }
    }
    let last = p
        .as_slice()
        .iter()
        .rposition(|&pi| pi > 0.0)
        .expect("a simplex has a positive entry");
    ArmIndex(last)
}

/// Sampling from an unchecked slice; rejects anything that is not a simplex.
pub fn sample_categorical_checked(p: &[f64], rng: &mut RngStream) -> Result<ArmIndex> {
    let p = ProbabilityVector::new(p.to_vec())?;
    Ok(sample_categorical(&p, rng))
}

/// Feedback realized in one round: the chosen arm and the losses it revealed.
///
/// `revealed[i]` is `Some(loss)` exactly when arm `i` was observed. The chosen
/// arm is always observed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRound {
    chosen: ArmIndex,
    revealed: Vec<Option<f64>>,
}

impl ObservationRound {
    /// Builds a round from an observation mask and the full loss row; only the
    /// observed entries of `loss_row` are kept.
    pub fn new(chosen: ArmIndex, observed: &[bool], loss_row: &[f64]) -> Result<Self> {
        let n = observed.len();
        if loss_row.len() != n {
            return Err(Error::DimensionMismatch {
                what: "loss row vs observation mask",
                expected: n,
                actual: loss_row.len(),
            });
        }
        if chosen.0 >= n {
            return Err(Error::ArmOutOfRange {
                index: chosen.0,
                n_arms: n,
            });
        }
        if !observed[chosen.0] {
            return Err(invalid("observed", "the chosen arm must be observed"));
        }
        let mut revealed = Vec::with_capacity(n);
        for (i, (&seen, &loss)) in observed.iter().zip(loss_row).enumerate() {
            if seen {
                if !(0.0..=1.0).contains(&loss) {
                    return Err(Error::LossOutOfRange {
                        arm: i,
                        value: loss,
                    });
                }
                revealed.push(Some(loss));
            } else {
                revealed.push(None);
            }
        }
        Ok(Self { chosen, revealed })
    }

    pub fn chosen(&self) -> ArmIndex {
        self.chosen
    }

    pub fn n_arms(&self) -> usize {
        self.revealed.len()
    }

    pub fn is_observed(&self, arm: usize) -> bool {
        self.revealed[arm].is_some()
    }

    pub fn observed_mask(&self) -> Vec<bool> {
        self.revealed.iter().map(Option::is_some).collect()
    }

    pub fn revealed_loss(&self, arm: usize) -> Option<f64> {
        self.revealed[arm]
    }

    pub fn chosen_loss(&self) -> f64 {
        self.revealed[self.chosen.0].expect("chosen arm is always observed")
    }

    pub fn observed_count(&self) -> usize {
        self.revealed.iter().filter(|r| r.is_some()).count()
    }
}

/// Learner state: cumulative loss estimates, the running sum of per-round
/// second moments `b_t = Σ_i p_{t,i} ℓ̂²_{t,i}`, and the round counter.
///
/// Serializes to the flat record `(n_arms, round, cum_est_loss, cum_second_moment)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub n_arms: usize,
    pub round: u64,
    pub cum_est_loss: Vec<f64>,
    pub cum_second_moment: f64,
}

impl PolicyState {
    pub fn new(n_arms: usize) -> Self {
        Self {
            n_arms,
            round: 0,
            cum_est_loss: vec![0.0; n_arms],
            cum_second_moment: 0.0,
        }
    }

    /// Checks a restored record for consistency.
    pub fn validate(&self) -> Result<()> {
        if self.cum_est_loss.len() != self.n_arms {
            return Err(Error::DimensionMismatch {
                what: "cum_est_loss",
                expected: self.n_arms,
                actual: self.cum_est_loss.len(),
            });
        }
        if self
            .cum_est_loss
            .iter()
            .any(|&l| !(l >= 0.0 && l.is_finite()))
        {
            return Err(invalid("cum_est_loss", "entries must be finite and >= 0"));
        }
        if !(self.cum_second_moment >= 0.0 && self.cum_second_moment.is_finite()) {
            return Err(invalid("cum_second_moment", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Everything a learner may be shown after acting in one round. Each policy
/// reads only what its feedback model allows.
#[derive(Debug, Clone, Copy)]
pub struct Feedback<'a> {
    /// The distribution the learner emitted this round.
    pub p_used: &'a ProbabilityVector,
    pub round: &'a ObservationRound,
    /// The environment's true `r_t`; only known-`r` baselines may read it.
    pub r_true: f64,
    /// The full loss row; only the full-information oracle may read it.
    pub loss_row: &'a [f64],
}

/// The interface the harness drives each round.
pub trait Policy {
    fn n_arms(&self) -> usize;

    /// Current learning rate.
    fn eta(&self) -> f64;

    /// Distribution to play this round.
    fn distribution(&self) -> ProbabilityVector;

    /// Incorporates one round of feedback. `rng` is the learner's private
    /// stream for any internal randomization.
    fn update(&mut self, feedback: &Feedback<'_>, rng: &mut RngStream) -> Result<()>;

    fn state(&self) -> &PolicyState;
}
