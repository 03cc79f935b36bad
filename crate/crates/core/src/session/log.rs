//! Session logs: JSON lines, a header, one line per iteration, a footer.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{model_digest, IterationRecord, Result, Scenario, Session, SessionError};
use crate::learner::MlpModel;
use crate::strategies::{PushStrategy, StopReason};

pub const LOG_FORMAT_VERSION: u32 = 1;
const LOG_FORMAT: &str = "sandshape-session";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub scenario: Scenario,
    pub seed: u64,
    pub auto_strategy: PushStrategy,
    pub model_digest: Option<String>,
    pub initial_error: f64,
    pub initial_digest: String,
}

impl LogHeader {
    pub(super) fn new(s: &Session) -> Self {
        Self {
            format: LOG_FORMAT.into(),
            version: LOG_FORMAT_VERSION,
            scenario: s.scenario().clone(),
            seed: s.seed(),
            auto_strategy: s.auto_strategy(),
            model_digest: s.model_digest().map(str::to_owned),
            initial_error: s.errors()[0],
            initial_digest: s.initial_digest().to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFooter {
    /// `None` when the log was taken from a running session.
    pub reason: Option<StopReason>,
    pub final_error: f64,
    pub grid_digest: String,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub records: Vec<IterationRecord>,
    pub footer: LogFooter,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(Box<LogHeader>),
    Iteration(Box<IterationRecord>),
    Footer(LogFooter),
}

impl SessionLog {
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let mut line = |l: Line| -> Result<()> {
            serde_json::to_writer(&mut w, &l)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(Line::Header(Box::new(self.header.clone())))?;
        for r in &self.records {
            line(Line::Iteration(Box::new(r.clone())))?;
        }
        line(Line::Footer(self.footer.clone()))?;
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines().filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let first = lines.next().ok_or_else(|| SessionError::Format("empty log".into()))??;
        let value: serde_json::Value = serde_json::from_str(&first)?;
        if value.get("type").and_then(|t| t.as_str()) != Some("header")
            || value.get("format").and_then(|f| f.as_str()) != Some(LOG_FORMAT)
        {
            return Err(SessionError::Format("missing session log header".into()));
        }
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != LOG_FORMAT_VERSION {
            return Err(SessionError::Version(version));
        }
        let Line::Header(header) = serde_json::from_value(value)? else { unreachable!() };
        let mut records = Vec::new();
        let mut footer = None;
        for line in lines {
            let line = line?;
            if footer.is_some() {
                return Err(SessionError::Format("content after footer".into()));
            }
            match serde_json::from_str(&line)? {
                Line::Iteration(r) => records.push(*r),
                Line::Footer(f) => footer = Some(f),
                Line::Header(_) => return Err(SessionError::Format("second header".into())),
            }
        }
        let footer = footer.ok_or_else(|| SessionError::Format("missing footer".into()))?;
        if footer.iterations != records.len() {
            return Err(SessionError::Format(format!(
                "footer counts {} iterations, log holds {}",
                footer.iterations,
                records.len()
            )));
        }
        Ok(Self { header: *header, records, footer })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(fs::File::open(path)?)
    }

    /// `e_1` followed by every record's `e_after`.
    pub fn errors(&self) -> Vec<f64> {
        std::iter::once(self.header.initial_error).chain(self.records.iter().map(|r| r.e_after)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayVerdict {
    pub matched: bool,
    pub replayed: usize,
    pub mismatches: Vec<String>,
}

/// Re-executes the logged choices from the logged scenario and seed and
/// compares every record, the error sequence and the final grid digest.
/// Wall times are not compared.
pub fn replay(log: &SessionLog, model: Option<Arc<MlpModel>>) -> Result<ReplayVerdict> {
    let supplied = model.as_deref().map(model_digest);
    if log.header.model_digest.is_some() && supplied != log.header.model_digest {
        return Err(SessionError::Format("the log was recorded with a different learned model".into()));
    }
    let mut scenario = log.header.scenario.clone();
    scenario.seed = log.header.seed;
    let mut session = Session::new(scenario, model)?.with_auto_strategy(log.header.auto_strategy);
    let mut mismatches = Vec::new();
    if session.errors()[0] != log.header.initial_error || session.initial_digest() != log.header.initial_digest {
        mismatches.push("initial state differs".to_owned());
    }
    let mut replayed = 0;
    for logged in &log.records {
        let mut r = match session.run_iteration(&logged.choice) {
            Ok(r) => r,
            Err(e) => {
                mismatches.push(format!("iteration {}: {e}", logged.k));
                break;
            }
        };
        replayed += 1;
        r.wall_time_ms = logged.wall_time_ms;
        if &r != logged {
            mismatches.push(format!("iteration {} differs", logged.k));
        }
    }
    if log.footer.reason == Some(StopReason::Operator) && !session.is_terminated() {
        session.terminate()?;
    }
    let replayed_log = session.log();
    if replayed_log.errors() != log.errors() {
        mismatches.push("error sequence differs".into());
    }
    if replayed_log.footer != log.footer {
        mismatches.push(format!(
            "footer differs: logged {:?}, replayed {:?}",
            log.footer, replayed_log.footer
        ));
    }
    Ok(ReplayVerdict { matched: mismatches.is_empty(), replayed, mismatches })
}
