use std::fmt;
use std::io::{self, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Why an iterative solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Residual norm fell to `τ δ`.
    Discrepancy,
    /// A caller-supplied rule fired.
    ThresholdRule,
    Stagnation,
    MaxIter,
    /// The gradient vanished.
    Stationary,
    /// No acceptable step was found within the allowed number of radius reductions.
    Stalled,
}

impl StopReason {
    pub const ALL: [StopReason; 6] = [
        StopReason::Discrepancy,
        StopReason::ThresholdRule,
        StopReason::Stagnation,
        StopReason::MaxIter,
        StopReason::Stationary,
        StopReason::Stalled,
    ];

    pub fn code(self) -> u8 {
        match self {
            StopReason::Discrepancy => 1,
            StopReason::ThresholdRule => 2,
            StopReason::Stagnation => 3,
            StopReason::MaxIter => 4,
            StopReason::Stationary => 5,
            StopReason::Stalled => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Discrepancy => "discrepancy",
            StopReason::ThresholdRule => "threshold-rule",
            StopReason::Stagnation => "stagnation",
            StopReason::MaxIter => "max-iter",
            StopReason::Stationary => "stationary",
            StopReason::Stalled => "stalled",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Iterate after the step (unchanged when the step was not accepted).
    pub k: Vec<f64>,
    /// `‖y^δ − F(k)‖` after the step.
    pub residual_norm: f64,
    /// Radius (trust region) or step length (LM) of the final trial.
    pub radius: f64,
    /// Regularization multiplier of the final trial.
    pub alpha: f64,
    pub accepted: bool,
    /// Whether the trust-region constraint was active for the final trial.
    pub constraint_active: bool,
    /// `‖y^δ − F(k) − J p̄‖ / ‖y^δ − F(k)‖` for the accepted step.
    pub q_ratio: f64,
    /// Length of the unprojected and feasible steps.
    pub step_norm: f64,
    pub feasible_step_norm: f64,
    /// Number of trial steps tried in this iteration.
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub k: Vec<f64>,
    pub reason: StopReason,
    pub initial_k: Vec<f64>,
    pub initial_residual: f64,
    pub history: Vec<IterationRecord>,
    /// Wall time of the solve; not part of equality-sensitive outputs.
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Compact per-fit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub k: Vec<f64>,
    pub reason: StopReason,
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
}

/// Equality ignores the wall time.
impl PartialEq for FitResult {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k
            && self.reason == other.reason
            && self.initial_k == other.initial_k
            && self.initial_residual == other.initial_residual
            && self.history == other.history
    }
}

impl FitResult {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.history.last().map_or(self.initial_residual, |h| h.residual_norm)
    }

    /// Residual norms `[ε_0, …, ε_j̄]` of the visited iterates.
    pub fn residual_history(&self) -> Vec<f64> {
        std::iter::once(self.initial_residual)
            .chain(self.history.iter().filter(|h| h.accepted).map(|h| h.residual_norm))
            .collect()
    }

    /// Visited iterates, starting with the initial point.
    pub fn iterates(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.initial_k.clone())
            .chain(self.history.iter().filter(|h| h.accepted).map(|h| h.k.clone()))
            .collect()
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            k: self.k.clone(),
            reason: self.reason,
            iterations: self.iterations(),
            initial_residual: self.initial_residual,
            final_residual: self.final_residual(),
        }
    }

    /// Line-oriented iteration log, one `key=value` record per iteration.
    pub fn write_log(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(
            w,
            "start residual={:e} k={}",
            self.initial_residual,
            fmt_vec(&self.initial_k)
        )?;
        for (j, h) in self.history.iter().enumerate() {
            writeln!(
                w,
                "iter={} residual={:e} radius={:e} alpha={:e} accepted={} active={} q={:e} trials={} k={}",
                j + 1,
                h.residual_norm,
                h.radius,
                h.alpha,
                u8::from(h.accepted),
                u8::from(h.constraint_active),
                h.q_ratio,
                h.trials,
                fmt_vec(&h.k)
            )?;
        }
        writeln!(
            w,
            "stop reason={} iterations={} k={}",
            self.reason,
            self.iterations(),
            fmt_vec(&self.k)
        )
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
    parts.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reason_codes_roundtrip() {
        for r in StopReason::ALL {
            assert_eq!(StopReason::from_code(r.code()), Some(r));
        }
        assert_eq!(StopReason::from_code(0), None);
        assert_eq!(serde_json::to_string(&StopReason::MaxIter).unwrap(), "\"max-iter\"");
    }
}
