//! Privacy mechanisms as causal per-sample stream transforms.

mod config;
mod expr;
mod ldp;
mod state;

pub use config::{
    MechanismConfig, StreamKind, BODY_LDP_DEFAULTS, MAX_DEPTH, MAX_SMOOTHING_WINDOW,
    MOTION_RETARGET_DEFAULTS,
};
pub use ldp::{sample_bounded_laplace, sample_laplace};
pub use state::{
    Anatomy, MechanismState, Perturb, RETARGET_CALIBRATION_WINDOW, TARGET_HEIGHT, TARGET_WINGSPAN,
};

use crate::error::Result;
use crate::telemetry::Trace;

/// Runs `config` over a whole trace with a fresh state seeded by `seed`.
///
/// Output has the input's length and timestamps. For a composite the
/// second stage sees the first stage's output, exactly as if the first
/// had been applied to the full trace beforehand.
pub fn apply<S: Perturb>(
    config: &MechanismConfig,
    trace: &Trace<S>,
    seed: u64,
) -> Result<Trace<S>> {
    let mut state = MechanismState::new(config, S::STREAM, seed)?;
    let out = trace
        .samples()
        .iter()
        .map(|s| S::step(&mut state, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(trace.with_samples(out))
}
