//! Whether the spoken feedback ends before the vehicle reaches the panel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("processing plus speech time must be positive")]
    ZeroDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingBudget {
    /// Distance to the panel when it is first seen.
    pub distance_m: f64,
    pub speed_mps: f64,
    pub processing_s: f64,
    pub speech_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// Time left over once processing and speech are done; negative when late.
    pub slack_s: f64,
}

pub fn check_feasibility(budget: &TimingBudget) -> Result<Feasibility, TimingError> {
    if !(budget.speed_mps > 0.0) {
        return Err(TimingError::NonPositiveSpeed(budget.speed_mps));
    }
    let window = budget.distance_m / budget.speed_mps;
    let slack_s = window - budget.processing_s - budget.speech_s;
    Ok(Feasibility { feasible: slack_s >= 0.0, slack_s })
}

/// Highest speed at which the feedback still finishes in time.
pub fn max_speed_for(distance_m: f64, processing_s: f64, speech_s: f64) -> Result<f64, TimingError> {
    let total = processing_s + speech_s;
    if !(total > 0.0) {
        return Err(TimingError::ZeroDuration);
    }
    Ok(distance_m / total)
}
