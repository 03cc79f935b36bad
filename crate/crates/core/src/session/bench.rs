//! Strategy benchmark: one session per (scenario, strategy, seed), each
//! repeating a single push strategy until termination.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Choice, Result, Scenario, Session, SessionError};
use crate::learner::MlpModel;
use crate::strategies::{PushStrategy, StopReason};

const CSV_MAGIC: &str = "# sandshape-bench";
pub const BENCH_CSV_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub run_id: usize,
    pub scenario: String,
    pub strategy: PushStrategy,
    pub seed: u64,
    /// `e_1, ..., e_K`.
    pub errors: Vec<f64>,
    pub reason: Option<StopReason>,
}

impl BenchRun {
    pub fn initial(&self) -> f64 {
        self.errors[0]
    }

    pub fn final_error(&self) -> f64 {
        *self.errors.last().unwrap()
    }

    pub fn iterations(&self) -> usize {
        self.errors.len() - 1
    }

    /// Fraction of the initial error removed by the end of the run.
    pub fn reduction(&self) -> f64 {
        if self.initial() == 0.0 {
            0.0
        } else {
            1.0 - self.final_error() / self.initial()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub runs: Vec<BenchRun>,
}

impl BenchReport {
    /// Mean error over runs of `strategy` at each iteration; runs that
    /// stopped early hold their final value.
    pub fn mean_curve(&self, strategy: PushStrategy, len: usize) -> Vec<f64> {
        let runs: Vec<&BenchRun> = self.runs.iter().filter(|r| r.strategy == strategy).collect();
        if runs.is_empty() {
            return Vec::new();
        }
        (0..len)
            .map(|k| runs.iter().map(|r| r.errors[k.min(r.errors.len() - 1)]).sum::<f64>() / runs.len() as f64)
            .collect()
    }

    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:>4}  {:<14} {:<4} {:>6} {:>8} {:>8} {:>7} {:>5}  {}\n",
            "run", "scenario", "str", "seed", "e_1", "e_final", "reduce", "iters", "reason"
        );
        for r in &self.runs {
            let reason = r.reason.map_or_else(|| "-".to_owned(), |x| x.to_string());
            let _ = writeln!(
                out,
                "{:>4}  {:<14} {:<4} {:>6} {:>8.4} {:>8.4} {:>6.1}% {:>5}  {}",
                r.run_id,
                r.scenario,
                r.strategy.short_name(),
                r.seed,
                r.initial(),
                r.final_error(),
                100.0 * r.reduction(),
                r.iterations(),
                reason
            );
        }
        out
    }
}

/// Runs every combination, in parallel, in (scenario, strategy, seed) order.
/// Each scenario's seed is replaced by the run seed.
pub fn bench(
    scenarios: &[Scenario],
    strategies: &[PushStrategy],
    seeds: &[u64],
    model: Option<Arc<MlpModel>>,
) -> Result<BenchReport> {
    let mut jobs = Vec::new();
    for sc in scenarios {
        for &strategy in strategies {
            for &seed in seeds {
                jobs.push((sc, strategy, seed));
            }
        }
    }
    let runs = jobs
        .into_par_iter()
        .enumerate()
        .map(|(run_id, (sc, strategy, seed))| {
            let mut sc = sc.clone();
            sc.seed = seed;
            let name = sc.name.clone();
            let mut session = Session::new(sc, model.clone())?;
            let log = session.run_until_stop(&Choice::Push { strategy })?;
            Ok(BenchRun { run_id, scenario: name, strategy, seed, errors: log.errors(), reason: log.footer.reason })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchReport { runs })
}

/// One row per (run, k): `run_id,scenario,strategy,seed,k,e_k,reason`,
/// after a version comment line.
pub fn write_bench_csv<W: Write>(report: &BenchReport, mut w: W) -> Result<()> {
    writeln!(w, "{CSV_MAGIC} v{BENCH_CSV_VERSION}")?;
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(["run_id", "scenario", "strategy", "seed", "k", "e_k", "reason"])?;
    for r in &report.runs {
        let reason = r.reason.map(|x| x.to_string()).unwrap_or_default();
        for (i, e) in r.errors.iter().enumerate() {
            cw.write_record([
                r.run_id.to_string(),
                r.scenario.clone(),
                r.strategy.short_name().to_owned(),
                r.seed.to_string(),
                (i + 1).to_string(),
                e.to_string(),
                reason.clone(),
            ])?;
        }
    }
    cw.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct Row {
    run_id: usize,
    scenario: String,
    strategy: String,
    seed: u64,
    k: usize,
    e_k: f64,
    reason: String,
}

fn parse_reason(s: &str) -> Result<Option<StopReason>> {
    Ok(match s {
        "" => None,
        "error_increase" => Some(StopReason::ErrorIncrease),
        "max_iterations" => Some(StopReason::MaxIterations),
        "shape_reached" => Some(StopReason::ShapeReached),
        "operator" => Some(StopReason::Operator),
        other => return Err(SessionError::Format(format!("unknown stop reason {other:?}"))),
    })
}

pub fn read_bench_csv(path: impl AsRef<Path>) -> Result<BenchReport> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let version = first
        .trim()
        .strip_prefix(CSV_MAGIC)
        .and_then(|v| v.trim().strip_prefix('v'))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| SessionError::Format("missing bench CSV version line".into()))?;
    if version != BENCH_CSV_VERSION {
        return Err(SessionError::Version(version));
    }
    let mut runs: Vec<BenchRun> = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: Row = row?;
        let strategy = row.strategy.parse().map_err(SessionError::Format)?;
        match runs.last_mut() {
            Some(r) if r.run_id == row.run_id => {
                if row.k != r.errors.len() + 1 {
                    return Err(SessionError::Format(format!("run {} skips to k = {}", row.run_id, row.k)));
                }
                r.errors.push(row.e_k);
            }
            _ => {
                if row.k != 1 {
                    return Err(SessionError::Format(format!("run {} starts at k = {}", row.run_id, row.k)));
                }
                runs.push(BenchRun {
                    run_id: row.run_id,
                    scenario: row.scenario,
                    strategy,
                    seed: row.seed,
                    errors: vec![row.e_k],
                    reason: parse_reason(&row.reason)?,
                });
            }
        }
    }
    Ok(BenchReport { runs })
}
