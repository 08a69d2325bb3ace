//! The oblivious environment: loss tables, `r_t` sequences and per-round side
//! observations.
//!
//! Random walks (for losses and for drifting `r_t`) start uniformly inside
//! their interval and are clipped to the violated boundary whenever a step
//! leaves it. Generators are pure functions of their parameters and stream.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::types::{ArmIndex, ObservationRound};

/// Default half-width of the loss random-walk increments.
pub const DEFAULT_LOSS_STEP: f64 = 0.1;

/// `T × N` table of losses in `[0, 1]`, stored row-major (one row per round).
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    horizon: usize,
    n_arms: usize,
    values: Vec<f64>,
}

impl LossTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = rows.len();
        if horizon == 0 {
            return Err(invalid("horizon", "a loss table needs at least one round"));
        }
        let n_arms = rows[0].len();
        let mut values = Vec::with_capacity(horizon * n_arms);
        for row in rows {
            if row.len() != n_arms {
                return Err(Error::DimensionMismatch {
                    what: "loss table row",
                    expected: n_arms,
                    actual: row.len(),
                });
            }
            for (arm, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::LossOutOfRange { arm, value: v });
                }
            }
            values.extend(row);
        }
        Ok(Self {
            horizon,
            n_arms,
            values,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    /// Losses of every arm at round `t` (0-based).
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_arms..(t + 1) * self.n_arms]
    }

    pub fn get(&self, t: usize, arm: usize) -> f64 {
        self.values[t * self.n_arms + arm]
    }

    pub fn column(&self, arm: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.horizon).map(move |t| self.get(t, arm))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = (0..self.n_arms).map(|i| format!("arm_{i}")).collect();
        let rows = (0..self.horizon).map(|t| self.row(t).to_vec());
        write_table(path, &header, rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let (_, rows) = read_table(path)?;
        Self::from_rows(rows).map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

/// Per-round observation probabilities, tagged with the scenario label.
#[derive(Debug, Clone, PartialEq)]
pub struct RtSequence {
    pub label: String,
    values: Vec<f64>,
}

impl RtSequence {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|&&r| !(0.0..=1.0).contains(&r)) {
            return Err(invalid("r_t", format!("{bad} is outside [0, 1]")));
        }
        Ok(Self {
            label: label.into(),
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_table(
            path,
            &["r".to_string()],
            self.values.iter().map(|&r| vec![r]),
        )
    }

    pub fn read_csv(path: &Path, label: impl Into<String>) -> Result<Self> {
        let (header, rows) = read_table(path)?;
        if header.len() != 1 {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("expected one column, found {}", header.len()),
            });
        }
        Self::new(label, rows.into_iter().map(|r| r[0]).collect()).map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut buf = String::new();
    buf.push_str(&header.join(","));
    buf.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(format_f64).collect();
        buf.push_str(&cells.join(","));
        buf.push('\n');
    }
    write_atomically(path, buf.as_bytes())
}

/// Writes `bytes` to `path`, removing the file if the write fails part-way.
pub(crate) fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = File::create(path).map_err(io_err)?;
    if let Err(e) = file.write_all(bytes).and_then(|_| file.flush()) {
        drop(file);
        let _ = std::fs::remove_file(path);
        return Err(io_err(e));
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let ctx = |source| Error::Csv {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header: Vec<String> = reader
        .headers()
        .map_err(ctx)?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(ctx)?;
        let row = record
            .iter()
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|e| Error::Format {
                    path: path.display().to_string(),
                    reason: format!("bad number {cell:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub(crate) fn draw_increment(step_bound: f64, rng: &mut RngStream) -> f64 {
    rng.uniform(-step_bound, step_bound)
}

/// A clipped random walk of length `len` on `[lo, hi]`.
fn bounded_walk(len: usize, lo: f64, hi: f64, step_bound: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut x = rng.uniform(lo, hi);
    out.push(x);
    for _ in 1..len {
        x = (x + draw_increment(step_bound, rng)).clamp(lo, hi);
        out.push(x);
    }
    out
}

/// One independent clipped random walk per arm, each starting at a uniform
/// point of `[0, 1]`. Arms are generated in index order.
pub fn gen_random_walk_losses(
    horizon: usize,
    n_arms: usize,
    step_bound: f64,
    rng: &mut RngStream,
) -> Result<LossTable> {
    if horizon == 0 {
        return Err(invalid("horizon", "must be >= 1"));
    }
    if n_arms < 2 {
        return Err(invalid("n_arms", "must be >= 2"));
    }
    if !(0.0..=1.0).contains(&step_bound) {
        return Err(invalid("step_bound", "must lie in [0, 1]"));
    }
    let columns: Vec<Vec<f64>> = (0..n_arms)
        .map(|_| bounded_walk(horizon, 0.0, 1.0, step_bound, rng))
        .collect();
    let mut values = Vec::with_capacity(horizon * n_arms);
    for t in 0..horizon {
        values.extend(columns.iter().map(|c| c[t]));
    }
    Ok(LossTable {
        horizon,
        n_arms,
        values,
    })
}

pub fn gen_rt_static(horizon: usize, r: f64) -> Result<RtSequence> {
    if !(0.0..=1.0).contains(&r) {
        return Err(invalid("r", format!("{r} is outside [0, 1]")));
    }
    RtSequence::new(format!("static{r}"), vec![r; horizon])
}

/// I.i.d. `Uniform[lo, hi]` entries.
pub fn gen_rt_uniform(horizon: usize, lo: f64, hi: f64, rng: &mut RngStream) -> Result<RtSequence> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(invalid(
            "lo/hi",
            format!("need 0 <= lo <= hi <= 1, got [{lo}, {hi}]"),
        ));
    }
    let values = (0..horizon).map(|_| rng.uniform(lo, hi)).collect();
    RtSequence::new(format!("uniform[{lo},{hi}]"), values)
}

/// Clipped random walk on `[lo, hi]`. `step_bound = None` uses `(hi − lo) / 10`.
pub fn gen_rt_random_walk(
    horizon: usize,
    lo: f64,
    hi: f64,
    step_bound: Option<f64>,
    rng: &mut RngStream,
) -> Result<RtSequence> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(invalid(
            "lo/hi",
            format!("need 0 <= lo < hi <= 1, got [{lo}, {hi}]"),
        ));
    }
    let step = step_bound.unwrap_or((hi - lo) / 10.0);
    if !(step > 0.0) {
        return Err(invalid("step_bound", "must be > 0"));
    }
    if horizon == 0 {
        return RtSequence::new(format!("rw[{lo},{hi}]"), Vec::new());
    }
    RtSequence::new(
        format!("rw[{lo},{hi}]"),
        bounded_walk(horizon, lo, hi, step, rng),
    )
}

/// Reveals the chosen arm's loss and, independently for every other arm, its
/// loss with probability `r`. Draws exactly `N − 1` uniforms, one per
/// non-chosen arm in index order, whatever the chosen arm is.
pub fn sample_observations(
    chosen: ArmIndex,
    r: f64,
    loss_row: &[f64],
    rng: &mut RngStream,
) -> Result<ObservationRound> {
    if !(0.0..=1.0).contains(&r) {
        return Err(invalid("r", format!("{r} is outside [0, 1]")));
    }
    let n = loss_row.len();
    if chosen.0 >= n {
        return Err(Error::ArmOutOfRange {
            index: chosen.0,
            n_arms: n,
        });
    }
    let observed: Vec<bool> = (0..n).map(|i| i == chosen.0 || rng.bernoulli(r)).collect();
    ObservationRound::new(chosen, &observed, loss_row)
}
