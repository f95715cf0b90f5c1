//! Utility metrics: how far an anonymized stream strays from the original.
//!
//! * angular distance: mean per-frame angle between gaze directions, degrees
//! * euclidean distance: mean per-frame head/left/right displacement, meters
//! * interception score and score difference: a target-hitting task scored
//!   from controller positions, standing in for a game replay scorer
//! * AOI accuracy: share of gaze samples inside the active area of interest

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::telemetry::{
    direction_from_angles, read_rows, to_csv, write_atomic, BodyTrace, GazeTrace, Joint, Sample,
    Trace,
};

const TIMESTAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    AngularDeg,
    EuclideanMeters,
    ScorePoints,
    ScoreRatio,
    AoiAccuracy,
}

impl UtilityKind {
    pub fn name(self) -> &'static str {
        match self {
            UtilityKind::AngularDeg => "angular_deg",
            UtilityKind::EuclideanMeters => "euclidean_m",
            UtilityKind::ScorePoints => "score_points",
            UtilityKind::ScoreRatio => "score_ratio",
            UtilityKind::AoiAccuracy => "aoi_accuracy",
        }
    }

    /// Whether larger values mean more preserved utility.
    pub fn higher_is_better(self) -> bool {
        matches!(self, UtilityKind::ScoreRatio | UtilityKind::AoiAccuracy)
    }
}

impl fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityValue {
    pub kind: UtilityKind,
    pub value: f64,
}

impl UtilityValue {
    pub fn new(kind: UtilityKind, value: f64) -> Self {
        UtilityValue { kind, value }
    }

    /// Degradation on a lower-is-better scale: distances and points as-is,
    /// ratios and accuracies as `1 - value`.
    pub fn degradation(&self) -> f64 {
        if self.kind.higher_is_better() {
            1.0 - self.value
        } else {
            self.value
        }
    }
}

impl fmt::Display for UtilityValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={:.6}", self.kind, self.value)
    }
}

fn check_aligned<S: Sample>(a: &Trace<S>, b: &Trace<S>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("metric needs at least one frame"));
    }
    for (index, (x, y)) in a.samples().iter().zip(b.samples()).enumerate() {
        if (x.t() - y.t()).abs() > TIMESTAMP_TOLERANCE {
            return Err(Error::TimestampMismatch {
                index,
                left: x.t(),
                right: y.t(),
            });
        }
    }
    Ok(())
}

/// Angle in degrees between two unit vectors.
///
/// Evaluated as `2 atan2(|a - b|, |a + b|)`, which equals the arccosine of
/// the dot product but stays accurate near 0 and 180 degrees, where
/// `acos` loses about half the significant digits.
pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    (2.0 * (a - b).norm().atan2((a + b).norm())).to_degrees()
}

/// Mean per-frame angle between original and anonymized gaze directions.
pub fn angular_distance(original: &GazeTrace, anonymized: &GazeTrace) -> Result<UtilityValue> {
    check_aligned(original, anonymized)?;
    let total: f64 = original
        .samples()
        .iter()
        .zip(anonymized.samples())
        .map(|(a, b)| angle_between(a.direction(), b.direction()))
        .sum();
    Ok(UtilityValue::new(
        UtilityKind::AngularDeg,
        total / original.len() as f64,
    ))
}

/// Mean per-frame average of the head, left and right position displacements.
pub fn euclidean_distance(original: &BodyTrace, anonymized: &BodyTrace) -> Result<UtilityValue> {
    check_aligned(original, anonymized)?;
    let total: f64 = original
        .samples()
        .iter()
        .zip(anonymized.samples())
        .map(|(a, b)| {
            Joint::ALL
                .iter()
                .map(|&j| a.pose(j).position.distance(b.pose(j).position))
                .sum::<f64>()
                / 3.0
        })
        .sum();
    Ok(UtilityValue::new(
        UtilityKind::EuclideanMeters,
        total / original.len() as f64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub t0: f64,
    pub t1: f64,
    pub position: Vec3,
    pub radius: f64,
}

/// Spherical targets that must be touched by a controller within their window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterceptionTask {
    targets: Vec<Target>,
}

pub const TASK_HEADER: [&str; 6] = ["t0", "t1", "x", "y", "z", "radius"];
pub const AOI_HEADER: [&str; 5] = ["t0", "t1", "yaw_deg", "pitch_deg", "radius_deg"];

fn check_window(t0: f64, t1: f64, radius: f64) -> Result<()> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::InvalidConfig(format!(
            "degenerate window [{t0}, {t1}]"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "radius must be > 0, got {radius}"
        )));
    }
    Ok(())
}

impl InterceptionTask {
    pub fn new(targets: Vec<Target>) -> Result<Self> {
        for t in &targets {
            check_window(t.t0, t.t1, t.radius)?;
            if !t.position.is_finite() {
                return Err(Error::InvalidConfig("target position not finite".into()));
            }
        }
        Ok(InterceptionTask { targets })
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn end(&self) -> Option<f64> {
        self.targets.iter().map(|t| t.t1).reduce(f64::max)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let rows = read_rows(path, &TASK_HEADER)?;
        InterceptionTask::new(
            rows.iter()
                .map(|r| Target {
                    t0: r[0],
                    t1: r[1],
                    position: Vec3::new(r[2], r[3], r[4]),
                    radius: r[5],
                })
                .collect(),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let bytes = to_csv(
            &TASK_HEADER,
            self.targets.iter().map(|t| {
                vec![
                    t.t0,
                    t.t1,
                    t.position.x,
                    t.position.y,
                    t.position.z,
                    t.radius,
                ]
            }),
        )?;
        write_atomic(path, &bytes)
    }
}

/// Task score in points: 100 times the fraction of targets hit.
///
/// A target is hit when either controller sample inside the target window
/// lies within the target sphere. An empty task scores 100.
pub fn interception_score(trace: &BodyTrace, task: &InterceptionTask) -> Result<f64> {
    let Some(task_end) = task.end() else {
        return Ok(100.0);
    };
    let trace_end = trace.end().unwrap_or(f64::NEG_INFINITY);
    if trace_end < task_end {
        return Err(Error::TraceTooShort {
            trace_end,
            task_end,
        });
    }
    let samples = trace.samples();
    let hits = task
        .targets
        .iter()
        .filter(|target| {
            let lo = samples.partition_point(|s| s.t < target.t0);
            samples[lo..]
                .iter()
                .take_while(|s| s.t <= target.t1)
                .any(|s| {
                    s.left.position.distance(target.position) <= target.radius
                        || s.right.position.distance(target.position) <= target.radius
                })
        })
        .count();
    Ok(100.0 * hits as f64 / task.targets.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDifference {
    /// Original score minus anonymized score.
    pub points: f64,
    /// Anonymized score over original score; 1 when the original scores 0.
    pub ratio: f64,
}

pub fn score_difference(
    original: &BodyTrace,
    anonymized: &BodyTrace,
    task: &InterceptionTask,
) -> Result<ScoreDifference> {
    let a = interception_score(original, task)?;
    let b = interception_score(anonymized, task)?;
    let ratio = if a == 0.0 { 1.0 } else { b / a };
    Ok(ScoreDifference {
        points: a - b,
        ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aoi {
    pub t0: f64,
    pub t1: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AoiSequence {
    entries: Vec<Aoi>,
}

impl AoiSequence {
    pub fn new(entries: Vec<Aoi>) -> Result<Self> {
        for e in &entries {
            check_window(e.t0, e.t1, e.radius)?;
        }
        Ok(AoiSequence { entries })
    }

    pub fn entries(&self) -> &[Aoi] {
        &self.entries
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let rows = read_rows(path, &AOI_HEADER)?;
        AoiSequence::new(
            rows.iter()
                .map(|r| Aoi {
                    t0: r[0],
                    t1: r[1],
                    yaw: r[2],
                    pitch: r[3],
                    radius: r[4],
                })
                .collect(),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let bytes = to_csv(
            &AOI_HEADER,
            self.entries
                .iter()
                .map(|a| vec![a.t0, a.t1, a.yaw, a.pitch, a.radius]),
        )?;
        write_atomic(path, &bytes)
    }
}

/// Fraction of in-window gaze samples within the active AOI's angular radius.
///
/// Membership uses great-circle distance to the AOI center. With no
/// in-window samples the accuracy is 1.
pub fn aoi_accuracy(gaze: &GazeTrace, aois: &AoiSequence) -> UtilityValue {
    let samples = gaze.samples();
    let (mut inside, mut total) = (0usize, 0usize);
    for aoi in &aois.entries {
        let center = direction_from_angles(aoi.yaw, aoi.pitch);
        let lo = samples.partition_point(|s| s.t < aoi.t0);
        for s in samples[lo..].iter().take_while(|s| s.t <= aoi.t1) {
            total += 1;
            if angle_between(s.direction(), center) <= aoi.radius {
                inside += 1;
            }
        }
    }
    let value = if total == 0 {
        1.0
    } else {
        inside as f64 / total as f64
    };
    UtilityValue::new(UtilityKind::AoiAccuracy, value)
}
