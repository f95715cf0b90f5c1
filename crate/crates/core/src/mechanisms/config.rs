use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum `Composite` nesting depth accepted by [`MechanismConfig::validate`].
pub const MAX_DEPTH: usize = 8;
/// Largest smoothing window; bounds per-sample work.
pub const MAX_SMOOTHING_WINDOW: u32 = 256;

/// Which telemetry stream a mechanism instance runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Gaze,
    Body,
}

impl StreamKind {
    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Gaze => "gaze",
            StreamKind::Body => "body",
        }
    }
}

/// A configured privacy mechanism.
///
/// Serializes as a tagged table, e.g. in TOML:
///
/// ```toml
/// kind = "composite"
/// [first]
/// kind = "motion_retarget"
/// noise_amp = 0.05
/// noise_period = 3.0
/// [second]
/// kind = "smoothing"
/// window = 25
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismConfig {
    #[default]
    Identity,
    /// Per-frame zero-mean Gaussian noise; degrees for gaze, meters for positions.
    Gaussian {
        #[serde(default)]
        sigma_gaze: f64,
        #[serde(default)]
        sigma_pos: f64,
    },
    /// Keep every `factor`-th frame and hold it in between.
    TemporalDownsample {
        #[serde(alias = "K")]
        factor: u32,
    },
    /// Quantize onto a grid of step `delta`; a zero step leaves the channel untouched.
    SpatialDownsample {
        #[serde(default)]
        delta_gaze: f64,
        #[serde(default)]
        delta_pos: f64,
    },
    /// Causal weighted average over the current and `window - 1` previous frames.
    Smoothing {
        #[serde(alias = "B")]
        window: u32,
    },
    /// Bounded-Laplace offsets on height and wingspan, drawn once per session.
    BodyLdp {
        scale_b: f64,
        bound_c: f64,
        #[serde(default = "default_calibration_window")]
        calibration_window: f64,
    },
    /// Anatomical normalization plus a smooth per-session noise field.
    MotionRetarget { noise_amp: f64, noise_period: f64 },
    /// `second(first(x))`.
    Composite {
        first: Box<MechanismConfig>,
        second: Box<MechanismConfig>,
    },
}

fn default_calibration_window() -> f64 {
    BODY_LDP_DEFAULTS.2
}

/// (scale_b, bound_c, calibration_window) used when an expression omits them.
pub const BODY_LDP_DEFAULTS: (f64, f64, f64) = (0.05, 0.1, 5.0);
/// (noise_amp, noise_period) used when an expression omits them.
pub const MOTION_RETARGET_DEFAULTS: (f64, f64) = (0.05, 3.0);

impl MechanismConfig {
    pub fn composite(first: MechanismConfig, second: MechanismConfig) -> Self {
        MechanismConfig::Composite {
            first: Box::new(first),
            second: Box::new(second),
        }
    }

    pub fn motion_retarget() -> Self {
        MechanismConfig::MotionRetarget {
            noise_amp: MOTION_RETARGET_DEFAULTS.0,
            noise_period: MOTION_RETARGET_DEFAULTS.1,
        }
    }

    pub fn smoothing(window: u32) -> Self {
        MechanismConfig::Smoothing { window }
    }

    /// Short family name as used in the expression grammar.
    pub fn family(&self) -> &'static str {
        match self {
            MechanismConfig::Identity => "identity",
            MechanismConfig::Gaussian { .. } => "gaussian",
            MechanismConfig::TemporalDownsample { .. } => "temporal_downsample",
            MechanismConfig::SpatialDownsample { .. } => "spatial_downsample",
            MechanismConfig::Smoothing { .. } => "smoothing",
            MechanismConfig::BodyLdp { .. } => "body_ldp",
            MechanismConfig::MotionRetarget { .. } => "motion_retarget",
            MechanismConfig::Composite { .. } => "composite",
        }
    }

    /// The argument list of the canonical expression, without parentheses.
    pub fn params(&self) -> String {
        let s = self.to_string();
        match s.find('(') {
            Some(i) => s[i + 1..s.len() - 1].to_string(),
            None => String::new(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            MechanismConfig::Composite { first, second } => 1 + first.depth().max(second.depth()),
            _ => 0,
        }
    }

    pub fn supports(&self, stream: StreamKind) -> bool {
        match self {
            MechanismConfig::BodyLdp { .. } | MechanismConfig::MotionRetarget { .. } => {
                stream == StreamKind::Body
            }
            MechanismConfig::Composite { first, second } => {
                first.supports(stream) && second.supports(stream)
            }
            _ => true,
        }
    }

    /// True when the config always reproduces its input bit-exactly.
    pub fn is_identity(&self) -> bool {
        match *self {
            MechanismConfig::Identity => true,
            MechanismConfig::Gaussian {
                sigma_gaze,
                sigma_pos,
            } => sigma_gaze == 0.0 && sigma_pos == 0.0,
            MechanismConfig::TemporalDownsample { factor } => factor == 1,
            MechanismConfig::SpatialDownsample {
                delta_gaze,
                delta_pos,
            } => delta_gaze == 0.0 && delta_pos == 0.0,
            MechanismConfig::Smoothing { window } => window == 1,
            MechanismConfig::BodyLdp { bound_c, .. } => bound_c == 0.0,
            MechanismConfig::MotionRetarget { .. } => false,
            MechanismConfig::Composite {
                ref first,
                ref second,
            } => first.is_identity() && second.is_identity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth() > MAX_DEPTH {
            return Err(Error::InvalidConfig(format!(
                "composite nesting depth {} exceeds {MAX_DEPTH}",
                self.depth()
            )));
        }
        self.validate_params()
    }

    fn validate_params(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{}: {what}", self.family())));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let pos = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            MechanismConfig::Identity => Ok(()),
            MechanismConfig::Gaussian {
                sigma_gaze,
                sigma_pos,
            } => {
                if nonneg(sigma_gaze) && nonneg(sigma_pos) {
                    Ok(())
                } else {
                    bad("sigma must be finite and >= 0")
                }
            }
            MechanismConfig::TemporalDownsample { factor } => {
                if factor >= 1 {
                    Ok(())
                } else {
                    bad("K must be >= 1")
                }
            }
            MechanismConfig::SpatialDownsample {
                delta_gaze,
                delta_pos,
            } => {
                if nonneg(delta_gaze) && nonneg(delta_pos) {
                    Ok(())
                } else {
                    bad("delta must be finite and >= 0")
                }
            }
            MechanismConfig::Smoothing { window } => {
                if (1..=MAX_SMOOTHING_WINDOW).contains(&window) {
                    Ok(())
                } else {
                    bad("B must lie in [1, 256]")
                }
            }
            MechanismConfig::BodyLdp {
                scale_b,
                bound_c,
                calibration_window,
            } => {
                if !pos(scale_b) {
                    bad("scale_b must be > 0")
                } else if !nonneg(bound_c) {
                    bad("bound_c must be >= 0")
                } else if !pos(calibration_window) {
                    bad("calibration_window must be > 0")
                } else {
                    Ok(())
                }
            }
            MechanismConfig::MotionRetarget {
                noise_amp,
                noise_period,
            } => {
                if nonneg(noise_amp) && pos(noise_period) {
                    Ok(())
                } else {
                    bad("noise_amp must be >= 0 and noise_period > 0")
                }
            }
            MechanismConfig::Composite {
                ref first,
                ref second,
            } => {
                first.validate_params()?;
                second.validate_params()
            }
        }
    }
}

impl fmt::Display for MechanismConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MechanismConfig::Identity => write!(f, "identity"),
            MechanismConfig::Gaussian {
                sigma_gaze,
                sigma_pos,
            } => write!(f, "gaussian(sigma_gaze={sigma_gaze}, sigma_pos={sigma_pos})"),
            MechanismConfig::TemporalDownsample { factor } => {
                write!(f, "temporal_downsample(K={factor})")
            }
            MechanismConfig::SpatialDownsample {
                delta_gaze,
                delta_pos,
            } => write!(
                f,
                "spatial_downsample(delta_gaze={delta_gaze}, delta_pos={delta_pos})"
            ),
            MechanismConfig::Smoothing { window } => write!(f, "smoothing(B={window})"),
            MechanismConfig::BodyLdp {
                scale_b,
                bound_c,
                calibration_window,
            } => write!(
                f,
                "body_ldp(scale_b={scale_b}, bound_c={bound_c}, calibration_window={calibration_window})"
            ),
            MechanismConfig::MotionRetarget {
                noise_amp,
                noise_period,
            } => write!(
                f,
                "motion_retarget(noise_amp={noise_amp}, noise_period={noise_period})"
            ),
            MechanismConfig::Composite { first, second } => {
                write!(f, "composite({first}, {second})")
            }
        }
    }
}

impl FromStr for MechanismConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        super::expr::parse(s)
    }
}
