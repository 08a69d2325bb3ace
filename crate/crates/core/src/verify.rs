//! Self-checks run by `bandit-lab verify`.
//!
//! Each suite compares an implementation against an independent route (a
//! closed form against direct summation, a sampler against its pmf, an
//! inequality against random inputs) and reports its worst deviation.
//! Monte Carlo tolerances sit at 3–4 standard errors.

use std::fmt;

use crate::env::sample_observations;
use crate::error::Result;
use crate::estimators::{
    bias_bound, moments_brute_force, moments_closed_form, observation_probability,
    resampled_estimate, sample_g, side_observation_threshold, truncated_geometric_pmf,
    TruncatedGeomParams,
};
use crate::harness::{lemma3_lhs_rhs, simulate, ExperimentSpec, Scenario};
use crate::policies::PolicyKind;
use crate::rng::{derive_stream_id, RngStream};
use crate::types::{sample_categorical, validate_simplex, ArmIndex, ProbabilityVector};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub n_arms: usize,
    pub horizon: usize,
    pub runs: usize,
    pub threads: Option<usize>,
    /// Relative perturbation applied to the closed-form second moment before
    /// it is compared; non-zero only to check that the suite can fail.
    pub lemma1_perturbation: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            n_arms: 50,
            horizon: 500,
            runs: 100,
            threads: None,
            lemma1_perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation, in the unit named by `unit`.
    pub worst: f64,
    pub limit: f64,
    pub unit: &'static str,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} worst {:.3e} (limit {:.3e}, {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.limit,
            self.unit
        )
    }
}

fn report(name: &'static str, worst: f64, limit: f64, unit: &'static str) -> SuiteReport {
    SuiteReport {
        name,
        passed: worst <= limit,
        worst,
        limit,
        unit,
    }
}

fn stream(opts: &VerifyOptions, suite: u64) -> RngStream {
    RngStream::new(opts.seed, derive_stream_id(&[0x7665_7269_6679, suite]))
}

/// Closed-form moments against direct summation, o ∈ {0.01, …, 1}, N ∈ {2, …, 64}.
pub fn lemma1_exactness(opts: &VerifyOptions) -> SuiteReport {
    let mut worst: f64 = 0.0;
    for k in 1..=100 {
        let o = k as f64 / 100.0;
        for n in 2..=64 {
            let params = TruncatedGeomParams::new(o, n).expect("grid is valid");
            let closed = moments_closed_form(params);
            let brute = moments_brute_force(params);
            let second = closed.second_moment * (1.0 + opts.lemma1_perturbation);
            let rel_mean = (closed.mean - brute.mean).abs() / brute.mean.abs();
            let rel_second = (second - brute.second_moment).abs() / brute.second_moment.abs();
            worst = worst.max(rel_mean).max(rel_second);
        }
    }
    report("lemma1_closed_form", worst, 1e-10, "relative error")
}

pub fn pmf_normalization(_: &VerifyOptions) -> SuiteReport {
    let mut worst: f64 = 0.0;
    for k in 1..=100 {
        let o = k as f64 / 100.0;
        for n in 2..=64 {
            let params = TruncatedGeomParams::new(o, n).expect("grid is valid");
            let total: f64 = (1..n)
                .map(|m| truncated_geometric_pmf(params, m).expect("in support"))
                .sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    report("pmf_normalization", worst, 1e-12, "absolute error")
}

/// One simulated round at rate `r` with a uniformly chosen arm.
fn simulated_round(n: usize, r: f64, rng: &mut RngStream) -> crate::types::ObservationRound {
    let chosen = ArmIndex(rng.index(0, n));
    sample_observations(chosen, r, &vec![0.5; n], rng).expect("valid round")
}

/// Empirical law of `G` against the truncated geometric pmf; worst deviation
/// in units of the per-mass standard error.
pub fn sample_g_fidelity(opts: &VerifyOptions) -> SuiteReport {
    const DRAWS: usize = 100_000;
    const MIN_EXPECTED: f64 = 10.0;
    let n = opts.n_arms;
    let mut rng = stream(opts, 1);
    let mut worst: f64 = 0.0;
    for &(p, r) in &[(0.02, 0.064), (0.2, 0.2), (0.9, 0.5)] {
        let params = TruncatedGeomParams::from_p_r(p, r, n).expect("valid parameters");
        let mut counts = vec![0usize; n];
        for _ in 0..DRAWS {
            let round = simulated_round(n, r, &mut rng);
            let g = sample_g(&round, ArmIndex(0), p, &mut rng).expect("valid draw");
            counts[g.value()] += 1;
        }
        // masses expected fewer than MIN_EXPECTED times are pooled into one
        // tail bin, where the normal approximation still holds
        let mut bins: Vec<(f64, usize)> = Vec::new();
        let mut tail = (0.0, 0);
        for m in 1..n {
            let q = truncated_geometric_pmf(params, m).expect("in support");
            if q * DRAWS as f64 >= MIN_EXPECTED {
                bins.push((q, counts[m]));
            } else {
                tail = (tail.0 + q, tail.1 + counts[m]);
            }
        }
        bins.push(tail);
        for (q, count) in bins {
            let freq = count as f64 / DRAWS as f64;
            let se = (q * (1.0 - q) / DRAWS as f64).sqrt();
            let dev = (freq - q).abs();
            let z = if se > 0.0 {
                dev / se
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
    }
    report("sample_g_pmf_fidelity", worst, 4.0, "standard errors")
}

/// Correlation between `G` and the target's own indicator.
pub fn g_independence(opts: &VerifyOptions) -> SuiteReport {
    const ROUNDS: usize = 100_000;
    let n = opts.n_arms;
    let (p, r) = (0.2, 0.2);
    let mut rng = stream(opts, 2);
    let (mut sg, mut so, mut sgo, mut sgg) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..ROUNDS {
        // the target is never the chosen arm, so its indicator is random
        let chosen = ArmIndex(rng.index(1, n));
        let round = sample_observations(chosen, r, &vec![0.5; n], &mut rng).expect("valid round");
        let g = sample_g(&round, ArmIndex(0), p, &mut rng)
            .expect("valid draw")
            .value() as f64;
        let o = f64::from(u8::from(round.is_observed(0)));
        sg += g;
        so += o;
        sgo += g * o;
        sgg += g * g;
    }
    let k = ROUNDS as f64;
    let (mg, mo) = (sg / k, so / k);
    let corr = (sgo / k - mg * mo) / ((sgg / k - mg * mg) * (mo * (1.0 - mo))).sqrt();
    report("g_independence", corr.abs(), 0.02, "|correlation|")
}

/// Analytic bias `ℓ (1 − o)^{N−1}` on a grid at the threshold rate, plus a
/// Monte Carlo one-step mean of the resampled estimate.
pub fn lemma2_sandwich(opts: &VerifyOptions) -> Result<SuiteReport> {
    let n = opts.n_arms;
    let horizon = opts.horizon;
    let r = side_observation_threshold(n, horizon);
    let bound = bias_bound(r, n, horizon)?;
    let inv_sqrt_t = 1.0 / (horizon as f64).sqrt();
    // worst is measured as excess over the allowed band (<= 0 passes)
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100 {
        let p = i as f64 / 99.0;
        let o = observation_probability(p, r);
        for j in 0..100 {
            let loss = j as f64 / 99.0;
            let bias = loss * (1.0 - o).powi(n as i32 - 1);
            worst = worst
                .max(-bias)
                .max(bias - bound.bound)
                .max(bound.bound - inv_sqrt_t - 1e-15);
        }
    }

    const REPLAYS: usize = 100_000;
    let mut rng = stream(opts, 3);
    let p = ProbabilityVector::uniform(n);
    for &loss in &[0.3, 1.0] {
        let row = vec![loss; n];
        let (mut s, mut ss) = (0.0, 0.0);
        for _ in 0..REPLAYS {
            let chosen = sample_categorical(&p, &mut rng);
            let round = sample_observations(chosen, r, &row, &mut rng)?;
            let est = if round.is_observed(0) {
                let g = sample_g(&round, ArmIndex(0), p[0], &mut rng)?;
                resampled_estimate(g, true, loss)
            } else {
                0.0
            };
            s += est;
            ss += est * est;
        }
        let k = REPLAYS as f64;
        let mean = s / k;
        let se = ((ss / k - mean * mean) / k).sqrt();
        let lower = loss - inv_sqrt_t - 3.0 * se;
        let upper = loss + 3.0 * se;
        worst = worst.max(lower - mean).max(mean - upper);
    }
    // a zero-loss cell gives exactly zero slack; report it as +0
    let worst = if worst <= 0.0 { 0.0 } else { worst };
    Ok(report(
        "lemma2_bias_sandwich",
        worst,
        0.0,
        "excess over band",
    ))
}

/// A random point of the simplex: normalized exponentials, occasionally
/// sharpened so some vectors are nearly degenerate.
pub(crate) fn random_simplex(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let sharpness = if rng.bernoulli(0.2) { 20.0 } else { 1.0 };
    let raw: Vec<f64> = (0..n)
        .map(|_| (-(1.0 - rng.unit()).ln()).powf(sharpness))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// `Σ_i p_i o_i (2 − o_i)/o_i² <= 2/r`, with `E[G²] <= (2 − o)/o²` checked
/// per arm against the closed form.
pub fn second_moment_bound(opts: &VerifyOptions) -> SuiteReport {
    let n = opts.n_arms;
    let mut rng = stream(opts, 4);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let p = random_simplex(n, &mut rng);
        for &r in &[0.064, 0.1, 0.5, 1.0] {
            let mut lhs = 0.0;
            for &pi in &p {
                let o = observation_probability(pi, r);
                let upper = (2.0 - o) / (o * o);
                lhs += pi * o * upper;
                let exact = moments_closed_form(TruncatedGeomParams::new(o, n).expect("o > 0"))
                    .second_moment;
                worst = worst.max(exact - upper - 1e-12 * upper);
            }
            worst = worst.max(lhs - 2.0 / r - 1e-12);
        }
    }
    report(
        "second_moment_bound",
        worst.max(0.0),
        0.0,
        "excess over bound",
    )
}

pub fn lemma3_fuzz(opts: &VerifyOptions) -> Result<SuiteReport> {
    let mut rng = stream(opts, 5);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let len = rng.index(1, 1001);
        let b: Vec<f64> = (0..len).map(|_| rng.uniform(0.0, 100.0)).collect();
        let (lhs, rhs) = lemma3_lhs_rhs(&b)?;
        worst = worst.max(lhs - rhs - 1e-12);
    }
    Ok(report(
        "lemma3_fuzz",
        worst.max(0.0),
        0.0,
        "excess of lhs over rhs",
    ))
}

/// A full experiment: every learning-rate sequence nonincreasing and every
/// emitted distribution a strictly positive simplex. Reports the count of
/// offending runs.
pub fn schedule_and_simplex(opts: &VerifyOptions) -> Result<SuiteReport> {
    let spec = ExperimentSpec {
        n_arms: opts.n_arms,
        horizon: opts.horizon,
        runs: opts.runs,
        scenario: Scenario::by_name("static006").expect("catalog scenario"),
        policies: PolicyKind::ALL.to_vec(),
        master_seed: opts.seed,
        threads: opts.threads,
    };
    let sim = simulate(&spec)?;
    let bad = sim
        .runs
        .iter()
        .flat_map(|(_, runs)| runs)
        .filter(|r| !r.eta_nonincreasing() || !r.distributions_positive)
        .count();
    // spot-check the simplex predicate on a fresh engine's output too
    let uniform_ok = validate_simplex(ProbabilityVector::uniform(opts.n_arms).as_slice());
    let bad = bad + usize::from(!uniform_ok);
    Ok(report(
        "eta_monotone_and_simplex",
        bad as f64,
        0.0,
        "offending runs",
    ))
}

/// Runs every suite in a fixed order.
pub fn run_all(opts: &VerifyOptions) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        lemma1_exactness(opts),
        pmf_normalization(opts),
        sample_g_fidelity(opts),
        g_independence(opts),
        lemma2_sandwich(opts)?,
        second_moment_bound(opts),
        lemma3_fuzz(opts)?,
        schedule_and_simplex(opts)?,
    ])
}
