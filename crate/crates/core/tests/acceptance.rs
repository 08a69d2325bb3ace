//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the report is always shown:
//! `cargo test -p bandit-lab --test acceptance`.

use std::process::Command;
use std::time::{Duration, Instant};

use bandit_lab::estimators::{
    bias_bound, moments_brute_force, moments_closed_form, observation_probability,
    resampled_estimate, sample_g, side_observation_threshold, truncated_geometric_pmf,
    TruncatedGeomParams,
};
use bandit_lab::harness::{
    lemma3_lhs_rhs, simulate, spearman, sweep_static_r, theorem_bound, ExperimentSpec, Scenario,
    Simulation, DEFAULT_SWEEP_GRID,
};
use bandit_lab::policies::PolicyKind;
use bandit_lab::rng::RngStream;
use bandit_lab::types::{ArmIndex, ObservationRound};

const N: usize = 50;
const T: usize = 500;
const RUNS: usize = 100;
const SEED: u64 = 2024;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn timed<F: FnOnce() -> Outcome>(limit: Duration, f: F) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    out.detail = format!("{}; {:.2?} (limit {:?})", out.detail, elapsed, limit);
    out.passed &= elapsed <= limit;
    out
}

/// A round at rate `r` with a uniformly drawn chosen arm; indicators drawn
/// here, independently of the crate's observation sampler.
fn simulated_round(r: f64, rng: &mut RngStream) -> ObservationRound {
    let chosen = rng.index(0, N);
    let observed: Vec<bool> = (0..N).map(|i| i == chosen || rng.unit() < r).collect();
    ObservationRound::new(ArmIndex(chosen), &observed, &[0.5; N]).unwrap()
}

fn ac1_lemma1_exactness() -> Outcome {
    timed(Duration::from_secs(1), || {
        let mut worst: f64 = 0.0;
        for k in 1..=100 {
            let o = k as f64 / 100.0;
            for n in 2..=64 {
                let p = TruncatedGeomParams::new(o, n).unwrap();
                let (c, b) = (moments_closed_form(p), moments_brute_force(p));
                worst = worst
                    .max((c.mean - b.mean).abs() / b.mean)
                    .max((c.second_moment - b.second_moment).abs() / b.second_moment);
            }
        }
        check(
            worst <= 1e-10,
            format!("worst relative error {worst:.3e} (<= 1e-10)"),
        )
    })
}

fn ac2_sampler_fidelity() -> Outcome {
    timed(Duration::from_secs(10), || {
        const DRAWS: usize = 100_000;
        let mut rng = RngStream::new(SEED, 21);
        let mut worst_z: f64 = 0.0;
        for &(p, r) in &[(0.02, 0.064), (0.2, 0.2), (0.9, 0.5)] {
            let params = TruncatedGeomParams::new(p + (1.0 - p) * r, N).unwrap();
            let mut counts = vec![0usize; N];
            for _ in 0..DRAWS {
                let round = simulated_round(r, &mut rng);
                counts[sample_g(&round, ArmIndex(0), p, &mut rng).unwrap().value()] += 1;
            }
            for m in 1..N {
                let q = truncated_geometric_pmf(params, m).unwrap();
                let tol = 4.0 * (q * (1.0 - q) / DRAWS as f64).sqrt();
                let dev = (counts[m] as f64 / DRAWS as f64 - q).abs();
                let z = if tol > 0.0 {
                    4.0 * dev / tol
                } else if dev == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst_z = worst_z.max(z);
            }
        }
        check(
            worst_z <= 4.0,
            format!("worst mass deviation {worst_z:.2} sigma (<= 4)"),
        )
    })
}

fn ac3_lemma2_sandwich() -> Outcome {
    timed(Duration::from_secs(10), || {
        let r = side_observation_threshold(N, T);
        let inv_sqrt_t = 1.0 / (T as f64).sqrt();
        let bound = bias_bound(r, N, T).unwrap();
        let mut ok = (r - 0.063414).abs() < 1e-6
            && bound.assumption_holds
            && (bound.bound - 0.04472).abs() < 1e-5
            && bound.bound <= inv_sqrt_t + 1e-15;
        let mut worst_bias: f64 = 0.0;
        for i in 0..100 {
            let p = i as f64 / 99.0;
            let o = observation_probability(p, r);
            for j in 0..100 {
                let loss = j as f64 / 99.0;
                let bias = loss * (1.0 - o).powi(N as i32 - 1);
                ok &= bias >= 0.0 && bias <= bound.bound;
                worst_bias = worst_bias.max(bias);
            }
        }

        // one-step replays under the uniform distribution, target arm 0
        const REPLAYS: usize = 100_000;
        let mut rng = RngStream::new(SEED, 31);
        let p0 = 1.0 / N as f64;
        let mut detail = String::new();
        for &loss in &[0.25, 1.0] {
            let (mut s, mut ss) = (0.0, 0.0);
            for _ in 0..REPLAYS {
                let chosen = rng.index(0, N);
                let observed: Vec<bool> = (0..N).map(|i| i == chosen || rng.unit() < r).collect();
                let round = ObservationRound::new(ArmIndex(chosen), &observed, &[loss; N]).unwrap();
                let est = if observed[0] {
                    resampled_estimate(
                        sample_g(&round, ArmIndex(0), p0, &mut rng).unwrap(),
                        true,
                        loss,
                    )
                } else {
                    0.0
                };
                s += est;
                ss += est * est;
            }
            let k = REPLAYS as f64;
            let mean = s / k;
            let se = ((ss / k - mean * mean) / k).sqrt();
            ok &= mean >= loss - 0.0448 - 3.0 * se && mean <= loss + 3.0 * se;
            detail.push_str(&format!(" l={loss}: mean {mean:.4} (se {se:.4});"));
        }
        check(
            ok,
            format!(
                "bound {:.6} <= 1/sqrt(T) {inv_sqrt_t:.6}, max grid bias {worst_bias:.5};{detail}",
                bound.bound
            ),
        )
    })
}

fn random_simplex(rng: &mut RngStream) -> Vec<f64> {
    let sharp = if rng.unit() < 0.2 { 20.0 } else { 1.0 };
    let raw: Vec<f64> = (0..N)
        .map(|_| (-(1.0 - rng.unit()).ln()).powf(sharp))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn ac4_second_moment_bound() -> Outcome {
    timed(Duration::from_secs(5), || {
        let mut rng = RngStream::new(SEED, 41);
        let mut worst_ratio: f64 = 0.0;
        let mut ok = true;
        for _ in 0..10_000 {
            let p = random_simplex(&mut rng);
            for &r in &[0.064, 0.1, 0.5, 1.0] {
                let lhs: f64 = p
                    .iter()
                    .map(|&pi| {
                        let o = pi + (1.0 - pi) * r;
                        pi * o * (2.0 - o) / (o * o)
                    })
                    .sum();
                ok &= lhs <= 2.0 / r + 1e-12;
                worst_ratio = worst_ratio.max(lhs * r / 2.0);
            }
        }
        check(ok, format!("max lhs / (2/r) = {worst_ratio:.4} (<= 1)"))
    })
}

fn ac5_lemma3_fuzz() -> Outcome {
    timed(Duration::from_secs(5), || {
        let mut rng = RngStream::new(SEED, 51);
        let mut ok = true;
        let mut worst_ratio: f64 = 0.0;
        for _ in 0..10_000 {
            let len = rng.index(1, 1001);
            let b: Vec<f64> = (0..len).map(|_| 100.0 * rng.unit()).collect();
            let (lhs, rhs) = lemma3_lhs_rhs(&b).unwrap();
            ok &= lhs <= rhs + 1e-12;
            worst_ratio = worst_ratio.max(lhs / rhs);
        }
        check(ok, format!("max lhs/rhs = {worst_ratio:.4} (<= 1)"))
    })
}

fn spec_for(scenario: Scenario) -> ExperimentSpec {
    ExperimentSpec {
        n_arms: N,
        horizon: T,
        runs: RUNS,
        scenario,
        policies: PolicyKind::ALL.to_vec(),
        master_seed: SEED,
        threads: None,
    }
}

fn ac6_schedule_monotone(sims: &[Simulation]) -> Outcome {
    let mut checked = 0usize;
    let mut bad = 0usize;
    for sim in sims {
        for (_, runs) in &sim.runs {
            for run in runs {
                checked += 1;
                if !run.eta.windows(2).all(|w| w[1] <= w[0]) {
                    bad += 1;
                }
            }
        }
    }
    check(
        bad == 0 && checked > 0,
        format!(
            "{bad} of {checked} runs (all policies, all catalog scenarios) with an increasing step"
        ),
    )
}

fn ac7_theorem_dominance() -> Outcome {
    timed(Duration::from_secs(120), || {
        let spec = ExperimentSpec {
            policies: vec![PolicyKind::Exp3Res],
            ..spec_for(Scenario::static_r(0.064))
        };
        let sim = simulate(&spec).unwrap();
        let bound = match theorem_bound(N, T, sim.rts.values()) {
            Some(b) => b,
            None => return check(false, "assumption unexpectedly violated at r = 0.064"),
        };
        let mean = sim.aggregate().final_mean(PolicyKind::Exp3Res).unwrap();
        check(
            (bound - 424.07).abs() < 0.01 && mean * 2.0 <= bound,
            format!(
                "Exp3-Res mean final regret {mean:.2}, bound {bound:.2}, margin {:.2}x (>= 2)",
                bound / mean
            ),
        )
    })
}

fn ac8_qualitative(sims: &[Simulation]) -> Vec<(String, Outcome)> {
    let final_mean = |label: &str, kind| {
        sims.iter()
            .find(|s| s.rts.label == label)
            .map(|s| s.aggregate().final_mean(kind).unwrap())
            .unwrap()
    };
    let mut out = Vec::new();

    let mut ok = true;
    let mut detail = String::new();
    for sim in sims {
        let agg = sim.aggregate();
        let oracle = agg.final_mean(PolicyKind::HedgeOracle).unwrap();
        let best_other = PolicyKind::ALL
            .iter()
            .filter(|&&k| k != PolicyKind::HedgeOracle)
            .map(|&k| agg.final_mean(k).unwrap())
            .fold(f64::INFINITY, f64::min);
        ok &= oracle <= best_other;
        detail.push_str(&format!(
            " {}: {oracle:.1} vs {best_other:.1};",
            sim.rts.label
        ));
    }
    out.push((
        "8a oracle lowest everywhere".into(),
        check(ok, format!("oracle vs best other:{detail}")),
    ));

    let (res, r) = (
        final_mean("static006", PolicyKind::Exp3Res),
        final_mean("static006", PolicyKind::Exp3R),
    );
    out.push((
        "8b exp3res ~ exp3r at r=0.06".into(),
        check(
            (res - r).abs() <= 0.25 * r,
            format!(
                "|{res:.2} - {r:.2}| = {:.2} (<= {:.2})",
                (res - r).abs(),
                0.25 * r
            ),
        ),
    ));

    let (res0, exp3) = (
        final_mean("static0", PolicyKind::Exp3Res),
        final_mean("static0", PolicyKind::Exp3),
    );
    out.push((
        "8d exp3res slightly worse than exp3 at r=0".into(),
        check(
            res0 >= exp3 && res0 <= 1.5 * exp3,
            format!("exp3res {res0:.2} in [{exp3:.2}, {:.2}]", 1.5 * exp3),
        ),
    ));

    let start = Instant::now();
    let rows = sweep_static_r(&spec_for(Scenario::static_r(0.0)), &DEFAULT_SWEEP_GRID).unwrap();
    let pick = |r: f64, k| {
        rows.iter()
            .find(|row| row.r == r && row.kind == k)
            .unwrap()
            .mean_final_regret
    };
    let (res1, oracle1) = (
        pick(1.0, PolicyKind::Exp3Res),
        pick(1.0, PolicyKind::HedgeOracle),
    );
    out.push((
        "8c exp3res ~ oracle at r=1".into(),
        check(
            res1 <= 1.25 * oracle1,
            format!("exp3res {res1:.2} <= 1.25 x oracle {:.2}", 1.25 * oracle1),
        ),
    ));
    let finals: Vec<f64> = DEFAULT_SWEEP_GRID
        .iter()
        .map(|&r| pick(r, PolicyKind::Exp3Res))
        .collect();
    let rho = spearman(&DEFAULT_SWEEP_GRID, &finals);
    out.push((
        "8e exp3res regret falls with r".into(),
        check(
            rho <= -0.8,
            format!(
                "spearman {rho:.3} (<= -0.8), finals {finals:.1?}; sweep {:.2?}",
                start.elapsed()
            ),
        ),
    ));
    out
}

fn ac9_cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bandit-lab");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("run{i}.csv"));
        let status = Command::new(bin)
            .args(["run", "--scenario", "static006", "--seed", "42", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        if !status.success() {
            return check(false, format!("invocation {i} exited with {status}"));
        }
        outputs.push(std::fs::read(&path).unwrap());
    }
    let lines = outputs[0].iter().filter(|&&b| b == b'\n').count();
    check(
        outputs[0] == outputs[1] && lines == 1 + 4 * T,
        format!(
            "{} bytes, {lines} lines, identical: {}",
            outputs[0].len(),
            outputs[0] == outputs[1]
        ),
    )
}

fn main() {
    let mut results: Vec<(String, Outcome)> = vec![
        ("1 lemma1 closed form exact".into(), ac1_lemma1_exactness()),
        ("2 sampler pmf fidelity".into(), ac2_sampler_fidelity()),
        ("3 bias sandwich".into(), ac3_lemma2_sandwich()),
        ("4 second-moment bound".into(), ac4_second_moment_bound()),
        ("5 lemma3 fuzz".into(), ac5_lemma3_fuzz()),
    ];

    let start = Instant::now();
    let sims: Vec<Simulation> = Scenario::catalog()
        .into_iter()
        .map(|s| simulate(&spec_for(s)).unwrap())
        .collect();
    let catalog_time = start.elapsed();

    results.push(("6 eta nonincreasing".into(), ac6_schedule_monotone(&sims)));
    results.push(("7 theorem bound dominance".into(), ac7_theorem_dominance()));
    let qualitative = ac8_qualitative(&sims);
    let total = start.elapsed();
    let within_budget = total <= Duration::from_secs(15 * 60);
    results.extend(qualitative);
    results.push((
        "8 runtime".into(),
        check(
            within_budget,
            format!("catalog {catalog_time:.2?}, catalog + sweep {total:.2?} (limit 15 min)"),
        ),
    ));
    results.push(("9 cli determinism".into(), ac9_cli_determinism()));

    let mut failed = 0;
    for (name, outcome) in &results {
        if !outcome.passed {
            failed += 1;
        }
        println!(
            "[{}] AC{name}: {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
