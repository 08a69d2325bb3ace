//! Episodes, experiments and regret accounting.
//!
//! One loss table is generated per master seed (stream 0) and shared by every
//! scenario, run and policy; one `r_t` sequence is generated per scenario
//! (stream 1) and shared by every run. Per-run randomness comes from three
//! derived streams:
//!
//! - *choice*: the uniform behind each arm draw, keyed by `(run, scenario)`;
//! - *observation*: side-observation coins, keyed by `(run, scenario)`;
//! - *learner*: internal draws of the learner, keyed by `(kind, run, scenario)`.
//!
//! The first two are shared across policies (common random numbers), and
//! observation sampling consumes exactly `N − 1` coins per round whatever the
//! chosen arm, so policies in the same run see aligned environments.
//!
//! Regret is empirical: incurred loss minus the loss of the best fixed arm in
//! hindsight on the realized table, computed for every prefix.

use rayon::prelude::*;

use crate::env::{
    gen_random_walk_losses, gen_rt_random_walk, gen_rt_static, gen_rt_uniform, sample_observations,
    LossTable, RtSequence, DEFAULT_LOSS_STEP,
};
use crate::error::{invalid, Error, Result};
use crate::estimators::side_observation_threshold;
use crate::policies::{Learner, PolicyKind};
use crate::rng::{derive_stream_id, label_hash, RngStream, LOSS_TABLE_STREAM, RT_SEQUENCE_STREAM};
use crate::types::{sample_categorical, ArmIndex, Feedback, Policy};

pub const DEFAULT_ARMS: usize = 50;
pub const DEFAULT_HORIZON: usize = 500;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_SWEEP_GRID: [f64; 6] = [0.02, 0.06, 0.1, 0.2, 0.5, 1.0];

const CHOICE_TAG: u64 = 0x63686f696365;
const OBSERVATION_TAG: u64 = 0x6f6273;

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    Static(f64),
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `step_bound = None` uses a tenth of the interval width.
    RandomWalk {
        lo: f64,
        hi: f64,
        step_bound: Option<f64>,
    },
}

/// A named recipe for the `r_t` sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub kind: ScenarioKind,
}

impl Scenario {
    pub const CATALOG_NAMES: [&'static str; 5] =
        ["static0", "static006", "uniform02", "rw01", "rw1"];

    pub fn by_name(name: &str) -> Option<Self> {
        let kind = match name {
            "static0" => ScenarioKind::Static(0.0),
            "static006" => ScenarioKind::Static(0.06),
            "uniform02" => ScenarioKind::Uniform { lo: 0.0, hi: 0.2 },
            "rw01" => ScenarioKind::RandomWalk {
                lo: 0.0,
                hi: 0.1,
                step_bound: None,
            },
            "rw1" => ScenarioKind::RandomWalk {
                lo: 0.0,
                hi: 1.0,
                step_bound: None,
            },
            _ => return None,
        };
        Some(Self {
            label: name.to_string(),
            kind,
        })
    }

    /// The five fixed scenarios, in catalog order.
    pub fn catalog() -> Vec<Self> {
        Self::CATALOG_NAMES
            .iter()
            .map(|n| Self::by_name(n).expect("catalog names resolve"))
            .collect()
    }

    /// Constant `r`, labelled `static:<r>`.
    pub fn static_r(r: f64) -> Self {
        Self {
            label: format!("static:{r}"),
            kind: ScenarioKind::Static(r),
        }
    }

    pub fn generate(&self, horizon: usize, master_seed: u64) -> Result<RtSequence> {
        let mut rng = RngStream::new(master_seed, RT_SEQUENCE_STREAM);
        let seq = match self.kind {
            ScenarioKind::Static(r) => gen_rt_static(horizon, r)?,
            ScenarioKind::Uniform { lo, hi } => gen_rt_uniform(horizon, lo, hi, &mut rng)?,
            ScenarioKind::RandomWalk { lo, hi, step_bound } => {
                gen_rt_random_walk(horizon, lo, hi, step_bound, &mut rng)?
            }
        };
        RtSequence::new(self.label.clone(), seq.values().to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n_arms: usize,
    pub horizon: usize,
    pub runs: usize,
    pub scenario: Scenario,
    pub policies: Vec<PolicyKind>,
    pub master_seed: u64,
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n_arms: DEFAULT_ARMS,
            horizon: DEFAULT_HORIZON,
            runs: DEFAULT_RUNS,
            scenario: Scenario::by_name("static006").expect("catalog scenario"),
            policies: PolicyKind::ALL.to_vec(),
            master_seed: 0,
            threads: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_arms < 2 {
            return Err(invalid("n_arms", "must be >= 2"));
        }
        if self.horizon < 1 {
            return Err(invalid("horizon", "must be >= 1"));
        }
        if self.runs < 1 {
            return Err(invalid("runs", "must be >= 1"));
        }
        if self.policies.is_empty() {
            return Err(invalid("policies", "at least one policy is required"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be >= 1"));
        }
        Ok(())
    }

    /// The shared loss table for this seed and geometry.
    pub fn generate_losses(&self) -> Result<LossTable> {
        let mut rng = RngStream::new(self.master_seed, LOSS_TABLE_STREAM);
        gen_random_walk_losses(self.horizon, self.n_arms, DEFAULT_LOSS_STEP, &mut rng)
    }
}

/// Per-round record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrajectory {
    pub chosen: Vec<ArmIndex>,
    /// `ℓ_{t, I_t}`.
    pub incurred: Vec<f64>,
    /// Incurred loss minus the best fixed arm's, per prefix. Not monotone and
    /// may dip below zero.
    pub cum_regret: Vec<f64>,
    /// Learning rate used at each round.
    pub eta: Vec<f64>,
    /// Whether every emitted distribution had strictly positive, finite entries.
    pub distributions_positive: bool,
}

impl RunTrajectory {
    pub fn final_regret(&self) -> f64 {
        *self.cum_regret.last().expect("trajectories are non-empty")
    }

    pub fn eta_nonincreasing(&self) -> bool {
        self.eta.windows(2).all(|w| w[1] <= w[0])
    }
}

/// The three per-run streams (see module docs).
#[derive(Debug, Clone)]
pub struct EpisodeStreams {
    pub choice: RngStream,
    pub observation: RngStream,
    pub learner: RngStream,
}

impl EpisodeStreams {
    pub fn derive(master_seed: u64, run: usize, scenario_label: &str, kind: PolicyKind) -> Self {
        let label = label_hash(scenario_label);
        let run = run as u64;
        Self {
            choice: RngStream::new(master_seed, derive_stream_id(&[CHOICE_TAG, run, label])),
            observation: RngStream::new(
                master_seed,
                derive_stream_id(&[OBSERVATION_TAG, run, label]),
            ),
            learner: RngStream::new(
                master_seed,
                derive_stream_id(&[kind.stream_tag(), run, label]),
            ),
        }
    }
}

/// `cum_regret[t] = Σ_{s<=t} incurred[s] − min_j Σ_{s<=t} ℓ_{s,j}`.
pub fn cumulative_regret(losses: &LossTable, incurred: &[f64]) -> Vec<f64> {
    let mut per_arm = vec![0.0; losses.n_arms()];
    let mut own = 0.0;
    incurred
        .iter()
        .enumerate()
        .map(|(t, &l)| {
            own += l;
            for (acc, &x) in per_arm.iter_mut().zip(losses.row(t)) {
                *acc += x;
            }
            own - per_arm.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Plays `policy` against a fixed loss table and `r_t` sequence.
pub fn run_policy<P: Policy>(
    policy: &mut P,
    losses: &LossTable,
    rts: &RtSequence,
    streams: &mut EpisodeStreams,
) -> Result<RunTrajectory> {
    let horizon = losses.horizon();
    if rts.len() != horizon {
        return Err(Error::DimensionMismatch {
            what: "r_t sequence vs loss table horizon",
            expected: horizon,
            actual: rts.len(),
        });
    }
    if policy.n_arms() != losses.n_arms() {
        return Err(Error::DimensionMismatch {
            what: "policy arms vs loss table arms",
            expected: losses.n_arms(),
            actual: policy.n_arms(),
        });
    }
    let mut chosen = Vec::with_capacity(horizon);
    let mut incurred = Vec::with_capacity(horizon);
    let mut eta = Vec::with_capacity(horizon);
    let mut distributions_positive = true;
    for t in 0..horizon {
        let row = losses.row(t);
        let r = rts.values()[t];
        eta.push(policy.eta());
        let p = policy.distribution();
        distributions_positive &= p.as_slice().iter().all(|&x| x > 0.0 && x.is_finite());
        let arm = sample_categorical(&p, &mut streams.choice);
        let round = sample_observations(arm, r, row, &mut streams.observation)?;
        let feedback = Feedback {
            p_used: &p,
            round: &round,
            r_true: r,
            loss_row: row,
        };
        policy.update(&feedback, &mut streams.learner)?;
        chosen.push(arm);
        incurred.push(row[arm.0]);
    }
    let cum_regret = cumulative_regret(losses, &incurred);
    Ok(RunTrajectory {
        chosen,
        incurred,
        cum_regret,
        eta,
        distributions_positive,
    })
}

/// One run of `kind`, with streams derived from the experiment's master seed.
pub fn run_episode(
    spec: &ExperimentSpec,
    kind: PolicyKind,
    losses: &LossTable,
    rts: &RtSequence,
    run: usize,
) -> Result<RunTrajectory> {
    if losses.n_arms() != spec.n_arms || losses.horizon() != spec.horizon {
        return Err(Error::DimensionMismatch {
            what: "loss table vs spec",
            expected: spec.n_arms * spec.horizon,
            actual: losses.n_arms() * losses.horizon(),
        });
    }
    let mut learner = Learner::new(kind, spec.n_arms)?;
    let mut streams = EpisodeStreams::derive(spec.master_seed, run, &rts.label, kind);
    run_policy(&mut learner, losses, rts, &mut streams)
}

/// All trajectories of an experiment, grouped by policy in the order the experiment lists them.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub losses: LossTable,
    pub rts: RtSequence,
    pub runs: Vec<(PolicyKind, Vec<RunTrajectory>)>,
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| invalid("threads", e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs every `(policy, run)` pair in parallel. Results are collected in
/// `(policy, run)` order, so the output does not depend on scheduling.
pub fn simulate(spec: &ExperimentSpec) -> Result<Simulation> {
    spec.validate()?;
    let losses = spec.generate_losses()?;
    let rts = spec.scenario.generate(spec.horizon, spec.master_seed)?;
    simulate_on(spec, losses, rts)
}

/// As [`simulate`], on a caller-supplied table and sequence.
pub fn simulate_on(
    spec: &ExperimentSpec,
    losses: LossTable,
    rts: RtSequence,
) -> Result<Simulation> {
    spec.validate()?;
    let jobs: Vec<(PolicyKind, usize)> = spec
        .policies
        .iter()
        .flat_map(|&k| (0..spec.runs).map(move |run| (k, run)))
        .collect();
    let trajectories: Vec<RunTrajectory> = with_pool(spec.threads, || {
        jobs.par_iter()
            .map(|&(kind, run)| run_episode(spec, kind, &losses, &rts, run))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut iter = trajectories.into_iter();
    let runs = spec
        .policies
        .iter()
        .map(|&k| (k, iter.by_ref().take(spec.runs).collect()))
        .collect();
    Ok(Simulation { losses, rts, runs })
}

/// Pointwise mean and (population) standard deviation of `cum_regret`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub kind: PolicyKind,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Final regret of each run, in run order.
    pub finals: Vec<f64>,
}

impl RegretCurve {
    pub fn from_runs(kind: PolicyKind, runs: &[RunTrajectory]) -> Self {
        let horizon = runs[0].cum_regret.len();
        let n = runs.len() as f64;
        let mut mean = vec![0.0; horizon];
        let mut std = vec![0.0; horizon];
        for t in 0..horizon {
            let m = runs.iter().map(|r| r.cum_regret[t]).sum::<f64>() / n;
            let var = runs
                .iter()
                .map(|r| (r.cum_regret[t] - m).powi(2))
                .sum::<f64>()
                / n;
            mean[t] = m;
            std[t] = var.sqrt();
        }
        Self {
            kind,
            mean,
            std,
            finals: runs.iter().map(RunTrajectory::final_regret).collect(),
        }
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("curves are non-empty")
    }

    pub fn final_std(&self) -> f64 {
        *self.std.last().expect("curves are non-empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub scenario: String,
    pub curves: Vec<RegretCurve>,
}

impl ExperimentResult {
    pub fn curve(&self, kind: PolicyKind) -> Option<&RegretCurve> {
        self.curves.iter().find(|c| c.kind == kind)
    }

    pub fn final_mean(&self, kind: PolicyKind) -> Option<f64> {
        self.curve(kind).map(RegretCurve::final_mean)
    }
}

impl Simulation {
    pub fn aggregate(&self) -> ExperimentResult {
        ExperimentResult {
            scenario: self.rts.label.clone(),
            curves: self
                .runs
                .iter()
                .map(|(k, runs)| RegretCurve::from_runs(*k, runs))
                .collect(),
        }
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    Ok(simulate(spec)?.aggregate())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub r: f64,
    pub kind: PolicyKind,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
}

/// Final regret for each constant `r` in `grid`, rows ordered by grid value
/// then by policy in the order the experiment lists them.
pub fn sweep_static_r(spec: &ExperimentSpec, grid: &[f64]) -> Result<Vec<SweepRow>> {
    if let Some(&bad) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(invalid("r_grid", format!("{bad} is outside [0, 1]")));
    }
    let mut rows = Vec::new();
    for &r in grid {
        let point = ExperimentSpec {
            scenario: Scenario::static_r(r),
            ..spec.clone()
        };
        let result = run_experiment(&point)?;
        rows.extend(result.curves.iter().map(|c| SweepRow {
            r,
            kind: c.kind,
            mean_final_regret: c.final_mean(),
            std_final_regret: c.final_std(),
        }));
    }
    Ok(rows)
}

/// Expected-regret bound of Exp3-Res,
/// `2 sqrt((N² + Σ_t 1/r_t) ln N) + sqrt(T)`, valid when every
/// `r_t >= ln T / (2N − 2)`. `None` when some round violates that (or has
/// `r_t = 0`, where the bound is infinite).
pub fn theorem_bound(n_arms: usize, horizon: usize, rts: &[f64]) -> Option<f64> {
    let threshold = side_observation_threshold(n_arms, horizon);
    if rts.iter().any(|&r| r < threshold || r <= 0.0) {
        return None;
    }
    let n = n_arms as f64;
    let inverse_sum: f64 = rts.iter().map(|r| 1.0 / r).sum();
    Some(2.0 * ((n * n + inverse_sum) * n.ln()).sqrt() + (horizon as f64).sqrt())
}

/// Both sides of `Σ_t b_t / sqrt(Σ_{s<=t} b_s) <= 2 sqrt(Σ_t b_t)` for
/// non-negative `b`; terms with an empty prefix sum count as 0.
pub fn lemma3_lhs_rhs(b: &[f64]) -> Result<(f64, f64)> {
    if let Some(&bad) = b.iter().find(|&&x| !(x >= 0.0)) {
        return Err(invalid("b", format!("entries must be >= 0, found {bad}")));
    }
    let mut prefix = 0.0;
    let mut lhs = 0.0;
    for &x in b {
        prefix += x;
        if prefix > 0.0 {
            lhs += x / prefix.sqrt();
        }
    }
    Ok((lhs, 2.0 * prefix.sqrt()))
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks). NaN when either
/// input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman inputs must have equal length");
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}
