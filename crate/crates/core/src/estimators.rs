//! Loss estimates for side-observation feedback.
//!
//! When the observation probability `o = p + (1 − p) r` of an arm is known,
//! `O ℓ / o` is an unbiased estimate of its loss ([`iw_estimate`]). The
//! learner does not know `r`, so [`sample_g`] replaces `1 / o` by a variable
//! `G` built from the *realized* observation indicators of the other arms:
//! each indicator, OR-ed with a fresh `Bernoulli(p)` coin, is an independent
//! `Bernoulli(o)` copy, and `G` is the index of the first successful copy,
//! capped at `N − 1`. The estimate `G O ℓ` ([`resampled_estimate`]) is then
//! biased downward by exactly `ℓ (1 − o)^{N−1}`.
//!
//! `G` follows the geometric law with parameter `o` truncated at `N − 1`:
//!
//! ```text
//! P(G = m) = o (1 − o)^{m−1}   for 1 <= m <= N − 2
//! P(G = N − 1) = (1 − o)^{N−2}
//! ```

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::types::{ArmIndex, ObservationRound};

/// `o = p + (1 − p) r`, evaluated as `r + (1 − r) p` so that `r = 1` gives
/// exactly 1 and `r = 0` gives exactly `p`.
pub fn observation_probability(p: f64, r: f64) -> f64 {
    r + (1.0 - r) * p
}

/// Importance-weighted estimate `O ℓ / (p + (1 − p) r)` for a known `r`.
pub fn iw_estimate(observed: bool, loss: f64, p: f64, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&loss) {
        return Err(invalid("loss", format!("{loss} is outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&r) {
        return Err(invalid("p/r", "probabilities must lie in [0, 1]"));
    }
    let o = observation_probability(p, r);
    if o <= 0.0 {
        return Err(Error::ZeroObservationProbability);
    }
    Ok(if observed { loss / o } else { 0.0 })
}

/// Parameters of the truncated geometric law: success probability `o` and the
/// arm count `N`, which fixes the support `{1, …, N − 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGeomParams {
    o: f64,
    n_arms: usize,
}

impl TruncatedGeomParams {
    pub fn new(o: f64, n_arms: usize) -> Result<Self> {
        if !(o > 0.0 && o <= 1.0) {
            return Err(invalid("o", format!("{o} is outside (0, 1]")));
        }
        if n_arms < 2 {
            return Err(invalid("n_arms", "must be >= 2"));
        }
        Ok(Self { o, n_arms })
    }

    /// Parameters for an arm played with probability `p` when others are
    /// revealed with probability `r`.
    pub fn from_p_r(p: f64, r: f64, n_arms: usize) -> Result<Self> {
        Self::new(observation_probability(p, r), n_arms)
    }

    pub fn o(&self) -> f64 {
        self.o
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    /// Largest value of the support, `N − 1`.
    pub fn cap(&self) -> usize {
        self.n_arms - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GSample(usize);

impl GSample {
    pub fn new(value: usize, n_arms: usize) -> Result<Self> {
        if value >= 1 && value < n_arms {
            Ok(Self(value))
        } else {
            Err(invalid(
                "g",
                format!("{value} is outside [1, {}]", n_arms.saturating_sub(1)),
            ))
        }
    }

    pub fn value(self) -> usize {
        self.0
    }
}

/// Draws the resampled importance weight `G` for `target`.
///
/// The copies are the realized indicators of the arms other than the chosen
/// one and the target, visited in a uniformly random order (a lazy
/// Fisher–Yates pass over the excluded arms in ascending index order). Copy
/// `k` succeeds if the arm at position `k` was observed or a fresh
/// `Bernoulli(p_target)` coin comes up; the first success ends the draw, and
/// `N − 1` is returned when all `N − 2` copies fail. When `target` is the
/// chosen arm, `N − 1` arms are eligible and only the first `N − 2` are used.
///
/// The target's own indicator is never read, so `G` is independent of it.
pub fn sample_g(
    round: &ObservationRound,
    target: ArmIndex,
    p_target: f64,
    rng: &mut RngStream,
) -> Result<GSample> {
    let n = round.n_arms();
    if n < 2 {
        return Err(invalid("n_arms", "must be >= 2"));
    }
    if target.0 >= n {
        return Err(Error::ArmOutOfRange {
            index: target.0,
            n_arms: n,
        });
    }
    if !(0.0..=1.0).contains(&p_target) {
        return Err(invalid("p_target", format!("{p_target} is outside [0, 1]")));
    }
    let chosen = round.chosen().0;
    let mut pool: Vec<usize> = (0..n).filter(|&i| i != chosen && i != target.0).collect();
    let copies = n - 2;
    for k in 0..copies {
        let j = rng.index(k, pool.len());
        pool.swap(k, j);
        let side = round.is_observed(pool[k]);
        let coin = rng.bernoulli(p_target);
        if coin || side {
            return Ok(GSample(k + 1));
        }
    }
    Ok(GSample(n - 1))
}

/// `G · O · ℓ`.
pub fn resampled_estimate(g: GSample, observed: bool, loss: f64) -> f64 {
    if observed {
        g.0 as f64 * loss
    } else {
        0.0
    }
}

pub fn truncated_geometric_pmf(params: TruncatedGeomParams, m: usize) -> Result<f64> {
    let cap = params.cap();
    if m < 1 || m > cap {
        return Err(invalid(
            "m",
            format!("{m} is outside the support [1, {cap}]"),
        ));
    }
    let q = 1.0 - params.o;
    Ok(if m < cap {
        params.o * q.powi(m as i32 - 1)
    } else {
        q.powi(cap as i32 - 1)
    })
}

/// First two moments of `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
}

/// Closed-form moments:
///
/// ```text
/// E[G]  = 1/o − (1/o)(1 − o)^{N−1}
/// E[G²] = (2 − o)/o² + (1/o²)(1 − o)^{N−2} (o² + o − 2 + 2o(N − 2)(o − 1))
/// ```
pub fn moments_closed_form(params: TruncatedGeomParams) -> Moments {
    let o = params.o;
    let n = params.n_arms as f64;
    let q = 1.0 - o;
    let tail = q.powi(params.n_arms as i32 - 2);
    Moments {
        mean: (1.0 - tail * q) / o,
        second_moment: (2.0 - o) / (o * o)
            + tail * (o * o + o - 2.0 + 2.0 * o * (n - 2.0) * (o - 1.0)) / (o * o),
    }
}

/// Moments by direct summation over the pmf; the oracle for
/// [`moments_closed_form`].
pub fn moments_brute_force(params: TruncatedGeomParams) -> Moments {
    let mut mean = 0.0;
    let mut second_moment = 0.0;
    for m in 1..=params.cap() {
        let mass = truncated_geometric_pmf(params, m).expect("m is in the support");
        let m = m as f64;
        mean += m * mass;
        second_moment += m * m * mass;
    }
    Moments {
        mean,
        second_moment,
    }
}

/// `E[G O ℓ] = ℓ (1 − (1 − o)^{N−1})`, using the independence of `G` and `O`.
pub fn expected_resampled_estimate(o: f64, n_arms: usize, loss: f64) -> Result<f64> {
    let params = TruncatedGeomParams::new(o, n_arms)?;
    if !(0.0..=1.0).contains(&loss) {
        return Err(invalid("loss", format!("{loss} is outside [0, 1]")));
    }
    Ok(loss * (1.0 - (1.0 - params.o).powi(n_arms as i32 - 1)))
}

/// Worst-case downward bias of the resampled estimate at side-observation
/// rate `r`, and whether `r` clears the threshold `ln T / (2N − 2)` under
/// which the bias is at most `1/√T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasBound {
    /// `exp(−r (N − 1))`, which dominates `(1 − o)^{N−1}` for every `p`.
    pub bound: f64,
    pub assumption_holds: bool,
}

/// `ln T / (2N − 2)`.
pub fn side_observation_threshold(n_arms: usize, horizon: usize) -> f64 {
    (horizon as f64).ln() / (2.0 * n_arms as f64 - 2.0)
}

pub fn bias_bound(r: f64, n_arms: usize, horizon: usize) -> Result<BiasBound> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(invalid("r", format!("{r} is outside (0, 1]")));
    }
    if n_arms < 2 {
        return Err(invalid("n_arms", "must be >= 2"));
    }
    if horizon < 1 {
        return Err(invalid("horizon", "must be >= 1"));
    }
    Ok(BiasBound {
        bound: (-r * (n_arms as f64 - 1.0)).exp(),
        assumption_holds: r >= side_observation_threshold(n_arms, horizon),
    })
}
