//! The closed shaping loop: observe, select, execute, record.
//!
//! Every iteration `k` draws from its own ChaCha8 stream `k` of the master
//! seed, so a run is a pure function of (scenario, seed, choice script, model).

mod bench;
pub mod http;
mod log;
mod scenario;

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use bench::{bench, read_bench_csv, write_bench_csv, BenchReport, BenchRun};
pub use log::{replay, LogFooter, LogHeader, ReplayVerdict, SessionLog, LOG_FORMAT_VERSION};
pub use scenario::{builtin, DesiredSpec, HeightSpec, Primitive, Scenario, BUILTIN_NAMES, SCENARIO_VERSION};

use crate::geom::Roi;
use crate::learner::{write_model, MlpModel};
use crate::sandfield::{render, SandError, SandGrid};
use crate::servo::execute_action;
use crate::strategies::{
    check_termination, local_target, push_average, push_learned, push_maximum, select_action_auto, select_tap,
    Action, ActionKind, LocalTarget, PushStrategy, StopReason, StrategyError, TerminationDecision,
};
use crate::vision::{mi_error, resample_to_tool, Contour, GrayImage, VisionError};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session already terminated ({0})")]
    Terminated(StopReason),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Sand(#[from] SandError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SessionError> = std::result::Result<T, E>;

/// What drives an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Choice {
    /// Push or tap by feature-error comparison; pushes use the session's
    /// auto strategy.
    Auto,
    Tap,
    Push { strategy: PushStrategy },
    /// A fully specified action.
    Action { action: Action },
}

impl FromStr for Choice {
    type Err = String;

    /// `auto`, `tap`, or `push-max` / `push-avg` / `push-ann`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Choice::Auto),
            "tap" => Ok(Choice::Tap),
            _ => match s.strip_prefix("push-") {
                Some(name) => Ok(Choice::Push { strategy: name.parse()? }),
                None => Err(format!("unknown choice {s:?}")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Executed,
    NoOp { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub choice: Choice,
    pub kind: Option<ActionKind>,
    pub strategy: Option<PushStrategy>,
    pub action: Option<Action>,
    pub outcome: Outcome,
    pub e_before: f64,
    pub e_after: f64,
    pub roi: Option<Roi>,
    pub current_contour: Option<Contour>,
    pub near_contour: Option<Contour>,
    /// 32-bit words drawn from the iteration's stream.
    pub rng_words: u64,
    pub servo_steps: usize,
    /// Zero unless wall-time recording is enabled.
    pub wall_time_ms: f64,
    pub grid_digest: String,
}

impl IterationRecord {
    pub fn executed(&self) -> bool {
        self.outcome == Outcome::Executed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preview {
    pub image: GrayImage,
    pub e: f64,
}

/// Action each selector would produce at the next iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub choice: Choice,
    pub action: Option<Action>,
    pub error: Option<String>,
}

pub(crate) fn model_digest(model: &MlpModel) -> String {
    let mut bytes = Vec::new();
    write_model(model, &mut bytes).expect("writing to memory");
    hex::encode(Sha256::digest(&bytes))
}

/// Outcome of building an action: the action plus the local target used.
struct Built {
    kind: ActionKind,
    strategy: Option<PushStrategy>,
    action: Action,
    target: Option<LocalTarget>,
}

struct BuildFailure {
    kind: Option<ActionKind>,
    strategy: Option<PushStrategy>,
    reason: String,
    shape_reached: bool,
}

impl BuildFailure {
    fn new(kind: ActionKind, strategy: Option<PushStrategy>, reason: impl ToString) -> Self {
        Self { kind: Some(kind), strategy, reason: reason.to_string(), shape_reached: false }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    scenario: Scenario,
    seed: u64,
    grid: SandGrid,
    desired: GrayImage,
    model: Option<Arc<MlpModel>>,
    model_digest: Option<String>,
    auto_strategy: PushStrategy,
    record_wall_time: bool,
    initial_digest: String,
    records: Vec<IterationRecord>,
    errors: Vec<f64>,
    stop: Option<StopReason>,
}

impl Session {
    /// Starts at `k = 0` with the scenario's seed. A scenario that already
    /// matches its goal is terminated immediately.
    pub fn new(scenario: Scenario, model: Option<Arc<MlpModel>>) -> Result<Self> {
        scenario.validate()?;
        let grid = scenario.initial_grid()?;
        let desired = scenario.desired_image()?;
        let model_digest = model.as_deref().map(model_digest);
        let mut s = Self {
            seed: scenario.seed,
            initial_digest: grid.digest(),
            scenario,
            grid,
            desired,
            model,
            model_digest,
            auto_strategy: PushStrategy::Maximum,
            record_wall_time: false,
            records: Vec::new(),
            errors: Vec::new(),
            stop: None,
        };
        let e = s.error_of(&s.current_image())?;
        s.errors.push(e);
        s.update_stop();
        Ok(s)
    }

    pub fn with_auto_strategy(mut self, strategy: PushStrategy) -> Self {
        self.auto_strategy = strategy;
        self
    }

    pub fn with_wall_time(mut self, on: bool) -> Self {
        self.record_wall_time = on;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn auto_strategy(&self) -> PushStrategy {
        self.auto_strategy
    }

    /// Iterations run so far.
    pub fn k(&self) -> usize {
        self.records.len()
    }

    pub fn grid(&self) -> &SandGrid {
        &self.grid
    }

    pub fn current_image(&self) -> GrayImage {
        render(&self.grid, &self.scenario.render)
    }

    pub fn desired_image(&self) -> &GrayImage {
        &self.desired
    }

    pub fn current_error(&self) -> f64 {
        *self.errors.last().expect("initial error is always present")
    }

    /// `e_1, ..., e_{k+1}`.
    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    pub fn is_terminated(&self) -> bool {
        self.stop.is_some()
    }

    pub fn model_digest(&self) -> Option<&str> {
        self.model_digest.as_deref()
    }

    fn error_of(&self, img: &GrayImage) -> Result<f64> {
        Ok(mi_error(img, &self.desired, self.scenario.mi_bins)?)
    }

    fn update_stop(&mut self) {
        if self.stop.is_none() {
            if let TerminationDecision::Stop(r) = check_termination(&self.errors, &self.scenario.termination) {
                self.stop = Some(r);
            }
        }
    }

    fn rng_for(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        rng
    }

    fn build_push(
        &self,
        strategy: PushStrategy,
        current: &GrayImage,
        rng: &mut ChaCha8Rng,
    ) -> std::result::Result<Built, BuildFailure> {
        let fail = |e: StrategyError| BuildFailure::new(ActionKind::Push, Some(strategy), e);
        let target = local_target(current, &self.desired, &self.scenario.strategy, rng).map_err(fail)?;
        let action = match strategy {
            PushStrategy::Maximum => push_maximum(&target, rng),
            PushStrategy::Average => push_average(&target),
            PushStrategy::Learned => match &self.model {
                Some(m) => push_learned(&target, m, current.width(), current.height()),
                None => return Err(BuildFailure::new(ActionKind::Push, Some(strategy), "no learned model loaded")),
            },
        }
        .map_err(fail)?;
        Ok(Built { kind: ActionKind::Push, strategy: Some(strategy), action, target: Some(target) })
    }

    fn build_tap(&self, current: &GrayImage, rng: &mut ChaCha8Rng) -> std::result::Result<Built, BuildFailure> {
        let fail = |e: String| BuildFailure::new(ActionKind::Tap, None, e);
        let tool = self.scenario.tool;
        let a = resample_to_tool(current, tool).map_err(|e| fail(e.to_string()))?;
        let mut b = resample_to_tool(&self.desired, tool).map_err(|e| fail(e.to_string()))?;
        if self.scenario.strategy.excess_only {
            // Cells lacking material cannot be fixed by tapping; hide them.
            for (d, c) in b.cells.iter_mut().zip(&a.cells) {
                *d = d.min(*c);
            }
        }
        let action = select_tap(&a, &b, rng).map_err(|e| fail(e.to_string()))?;
        Ok(Built { kind: ActionKind::Tap, strategy: None, action, target: None })
    }

    fn build(&self, choice: &Choice, current: &GrayImage, rng: &mut ChaCha8Rng) -> std::result::Result<Built, BuildFailure> {
        match *choice {
            Choice::Tap => self.build_tap(current, rng),
            Choice::Push { strategy } => self.build_push(strategy, current, rng),
            Choice::Action { action } => Ok(Built { kind: action.kind(), strategy: None, action, target: None }),
            Choice::Auto => {
                let sc = &self.scenario;
                match select_action_auto(current, &self.desired, sc.workspace_roi(), sc.tool, &sc.strategy) {
                    Ok(ActionKind::Push) => self.build_push(self.auto_strategy, current, rng),
                    Ok(ActionKind::Tap) => self.build_tap(current, rng),
                    Err(StrategyError::ShapeReached) => Err(BuildFailure {
                        kind: None,
                        strategy: None,
                        reason: StrategyError::ShapeReached.to_string(),
                        shape_reached: true,
                    }),
                    Err(e) => Err(BuildFailure { kind: None, strategy: None, reason: e.to_string(), shape_reached: false }),
                }
            }
        }
    }

    fn check_action(&self, action: &Action) -> Result<()> {
        if action.in_bounds(self.grid.width(), self.grid.height()) {
            Ok(())
        } else {
            Err(SessionError::InvalidAction(format!("{action:?} lies outside the image")))
        }
    }

    /// Observes, selects, executes and records one iteration. Strategy and
    /// execution failures become no-op records.
    pub fn run_iteration(&mut self, choice: &Choice) -> Result<IterationRecord> {
        if let Some(r) = self.stop {
            return Err(SessionError::Terminated(r));
        }
        if let Choice::Action { action } = choice {
            self.check_action(action)?;
        }
        let started = Instant::now();
        let k = self.records.len() + 1;
        let mut rng = self.rng_for(k);
        let current = self.current_image();
        let e_before = self.current_error();

        let mut record = IterationRecord {
            k,
            choice: *choice,
            kind: None,
            strategy: None,
            action: None,
            outcome: Outcome::Executed,
            e_before,
            e_after: e_before,
            roi: None,
            current_contour: None,
            near_contour: None,
            rng_words: 0,
            servo_steps: 0,
            wall_time_ms: 0.0,
            grid_digest: String::new(),
        };
        let mut shape_reached = false;
        match self.build(choice, &current, &mut rng) {
            Ok(built) => {
                record.kind = Some(built.kind);
                record.strategy = built.strategy;
                record.action = Some(built.action);
                if let Some(t) = built.target {
                    record.roi = Some(t.roi);
                    record.current_contour = Some(t.current);
                    record.near_contour = Some(t.near);
                }
                let sc = &self.scenario;
                match execute_action(&built.action, &self.grid, sc.tool, &sc.material, &sc.servo) {
                    Ok(exec) => {
                        record.servo_steps = exec.trajectory.len();
                        self.grid = exec.grid;
                        record.e_after = self.error_of(&self.current_image())?;
                    }
                    Err(e) => record.outcome = Outcome::NoOp { reason: e.to_string() },
                }
            }
            Err(f) => {
                record.kind = f.kind;
                record.strategy = f.strategy;
                record.outcome = Outcome::NoOp { reason: f.reason };
                shape_reached = f.shape_reached;
            }
        }
        record.rng_words = rng.get_word_pos() as u64;
        record.grid_digest = self.grid.digest();
        if self.record_wall_time {
            record.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
        }
        self.errors.push(record.e_after);
        self.records.push(record.clone());
        if shape_reached {
            self.stop = Some(StopReason::ShapeReached);
        }
        self.update_stop();
        Ok(record)
    }

    /// Repeats `choice` until a termination rule fires.
    pub fn run_until_stop(&mut self, choice: &Choice) -> Result<SessionLog> {
        while !self.is_terminated() {
            self.run_iteration(choice)?;
        }
        Ok(self.log())
    }

    pub fn run_autonomous(&mut self) -> Result<SessionLog> {
        self.run_until_stop(&Choice::Auto)
    }

    /// Runs `script` in order, stopping early if the session terminates.
    pub fn run_script(&mut self, script: &[Choice]) -> Result<SessionLog> {
        for c in script {
            if self.is_terminated() {
                break;
            }
            self.run_iteration(c)?;
        }
        Ok(self.log())
    }

    /// Manual termination.
    pub fn terminate(&mut self) -> Result<StopReason> {
        if let Some(r) = self.stop {
            return Err(SessionError::Terminated(r));
        }
        self.stop = Some(StopReason::Operator);
        Ok(StopReason::Operator)
    }

    /// Executes `action` on a copy of the heightfield. An action that
    /// cannot move material (zero-length push) previews as the current state.
    pub fn preview(&self, action: &Action) -> Result<Preview> {
        self.check_action(action)?;
        let sc = &self.scenario;
        let grid = match execute_action(action, &self.grid, sc.tool, &sc.material, &sc.servo) {
            Ok(exec) => exec.grid,
            Err(crate::servo::ServoError::Sand(SandError::ZeroLengthPush)) => self.grid.clone(),
            Err(e) => return Err(SessionError::InvalidAction(e.to_string())),
        };
        let image = render(&grid, &sc.render);
        let e = self.error_of(&image)?;
        Ok(Preview { image, e })
    }

    /// The action each selector would produce for the next iteration, drawn
    /// from the same stream the iteration would use.
    pub fn proposals(&self) -> Vec<Proposal> {
        let current = self.current_image();
        let k = self.records.len() + 1;
        let mut choices = vec![Choice::Auto, Choice::Tap];
        choices.extend(PushStrategy::ALL.iter().map(|&strategy| Choice::Push { strategy }));
        choices
            .into_iter()
            .map(|choice| {
                let mut rng = self.rng_for(k);
                match self.build(&choice, &current, &mut rng) {
                    Ok(b) => Proposal { choice, action: Some(b.action), error: None },
                    Err(f) => Proposal { choice, action: None, error: Some(f.reason) },
                }
            })
            .collect()
    }

    /// Contours and local target the next push would be built from.
    pub fn next_local_target(&self) -> Option<LocalTarget> {
        let mut rng = self.rng_for(self.records.len() + 1);
        local_target(&self.current_image(), &self.desired, &self.scenario.strategy, &mut rng).ok()
    }

    pub fn log(&self) -> SessionLog {
        SessionLog {
            header: LogHeader::new(self),
            records: self.records.clone(),
            footer: LogFooter {
                reason: self.stop,
                final_error: self.current_error(),
                grid_digest: self.grid.digest(),
                iterations: self.records.len(),
            },
        }
    }

    pub(crate) fn initial_digest(&self) -> &str {
        &self.initial_digest
    }
}
