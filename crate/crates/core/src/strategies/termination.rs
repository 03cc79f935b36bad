use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationMode {
    /// Stop at the first error increase.
    Strict,
    /// Stop when the error grows by more than `epsilon` in one iteration.
    #[default]
    Relaxed,
}

impl std::str::FromStr for TerminationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strict" => Ok(Self::Strict),
            "relaxed" => Ok(Self::Relaxed),
            other => Err(format!("unknown termination mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminationPolicy {
    pub mode: TerminationMode,
    pub epsilon: f64,
    /// Maximum number of recorded errors (observations) K.
    pub max_iterations: usize,
    /// Accuracy bound; 0 disables it.
    pub target_accuracy: f64,
}

impl Default for TerminationPolicy {
    fn default() -> Self {
        Self {
            mode: TerminationMode::Relaxed,
            epsilon: 0.005,
            max_iterations: 40,
            target_accuracy: 0.0,
        }
    }
}

impl TerminationPolicy {
    pub fn strict(max_iterations: usize) -> Self {
        Self {
            mode: TerminationMode::Strict,
            max_iterations,
            ..Self::default()
        }
    }

    pub fn relaxed(epsilon: f64, max_iterations: usize) -> Self {
        Self {
            mode: TerminationMode::Relaxed,
            epsilon,
            max_iterations,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ErrorIncrease,
    MaxIterations,
    ShapeReached,
    Operator,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::ErrorIncrease => "error_increase",
            StopReason::MaxIterations => "max_iterations",
            StopReason::ShapeReached => "shape_reached",
            StopReason::Operator => "operator",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationDecision {
    Continue,
    Stop(StopReason),
}

/// Decides whether to stop after the latest error in `errors` (e_1, e_2, ...).
pub fn check_termination(errors: &[f64], policy: &TerminationPolicy) -> TerminationDecision {
    let Some(&last) = errors.last() else {
        return TerminationDecision::Continue;
    };
    if last == 0.0 || (policy.target_accuracy > 0.0 && last <= policy.target_accuracy) {
        return TerminationDecision::Stop(StopReason::ShapeReached);
    }
    if let [.., prev, last] = errors {
        let fired = match policy.mode {
            TerminationMode::Strict => last > prev,
            TerminationMode::Relaxed => last - prev > policy.epsilon,
        };
        if fired {
            return TerminationDecision::Stop(StopReason::ErrorIncrease);
        }
    }
    if errors.len() >= policy.max_iterations {
        return TerminationDecision::Stop(StopReason::MaxIterations);
    }
    TerminationDecision::Continue
}

/// Replays the rule over growing prefixes; returns the 1-based iteration of
/// the first stop.
pub fn first_stop(errors: &[f64], policy: &TerminationPolicy) -> Option<(usize, StopReason)> {
    (1..=errors.len()).find_map(|k| match check_termination(&errors[..k], policy) {
        TerminationDecision::Stop(r) => Some((k, r)),
        TerminationDecision::Continue => None,
    })
}
