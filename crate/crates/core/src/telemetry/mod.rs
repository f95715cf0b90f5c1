//! Telemetry stream types shared by every other module.
//!
//! Gaze is stored as yaw/pitch in degrees; the unit direction vector is
//! derived on demand. Body telemetry is a head pose plus two controller
//! poses per frame.

mod io;
mod resample;
mod validate;
mod window;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Quat, Vec3};

pub use io::{
    body_csv_bytes, estimate_rate, gaze_csv_bytes, read_body_csv, read_dataset, read_gaze_csv,
    session_dir, write_atomic, write_body_csv, write_dataset, write_gaze_csv, BODY_HEADER,
    GAZE_HEADER,
};
pub(crate) use io::{read_rows, to_csv};
pub use resample::resample;
pub use validate::{validate_trace, ValidationReport, Violation, ViolationKind};
pub use window::window;

/// Wraps an angle in degrees into (-180, 180].
pub fn wrap_degrees(deg: f64) -> f64 {
    if deg > -180.0 && deg <= 180.0 {
        return deg;
    }
    let r = deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// One timestamped element of a telemetry stream.
pub trait Sample: Clone + Send + Sync {
    const MODALITY: &'static str;

    fn t(&self) -> f64;

    fn with_t(&self, t: f64) -> Self;

    /// Value at `frac` of the way from `a` to `b`; the timestamp is set by the caller.
    fn interpolate(a: &Self, b: &Self, frac: f64) -> Self;

    /// Per-sample invariant violations (timestamps excluded).
    fn check(&self, out: &mut Vec<ViolationKind>);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t: f64,
    pub yaw: f64,
    pub pitch: f64,
}

impl GazeSample {
    pub fn new(t: f64, yaw: f64, pitch: f64) -> Self {
        GazeSample { t, yaw, pitch }
    }

    /// Unit gaze direction: +z forward, +y up, yaw positive towards +x.
    pub fn direction(&self) -> Vec3 {
        direction_from_angles(self.yaw, self.pitch)
    }
}

pub fn direction_from_angles(yaw_deg: f64, pitch_deg: f64) -> Vec3 {
    let (sy, cy) = yaw_deg.to_radians().sin_cos();
    let (sp, cp) = pitch_deg.to_radians().sin_cos();
    Vec3::new(cp * sy, sp, cp * cy)
}

/// Yaw/pitch in degrees of a (not necessarily unit) direction vector.
pub fn angles_from_direction(v: Vec3) -> (f64, f64) {
    let n = v.norm();
    let pitch = (v.y / n).clamp(-1.0, 1.0).asin().to_degrees();
    let yaw = wrap_degrees(v.x.atan2(v.z).to_degrees());
    (yaw, pitch)
}

impl Sample for GazeSample {
    const MODALITY: &'static str = "gaze";

    fn t(&self) -> f64 {
        self.t
    }

    fn with_t(&self, t: f64) -> Self {
        GazeSample { t, ..*self }
    }

    fn interpolate(a: &Self, b: &Self, frac: f64) -> Self {
        let dyaw = wrap_degrees(b.yaw - a.yaw);
        GazeSample {
            t: a.t,
            yaw: wrap_degrees(a.yaw + dyaw * frac),
            pitch: a.pitch + (b.pitch - a.pitch) * frac,
        }
    }

    fn check(&self, out: &mut Vec<ViolationKind>) {
        if !(self.yaw.is_finite() && self.pitch.is_finite()) {
            out.push(ViolationKind::NonFinite);
            return;
        }
        if !(-90.0..=90.0).contains(&self.pitch) {
            out.push(ViolationKind::PitchOutOfRange(self.pitch));
        }
        if !(self.yaw > -180.0 && self.yaw <= 180.0) {
            out.push(ViolationKind::YawOutOfRange(self.yaw));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    fn interpolate(a: &Pose, b: &Pose, frac: f64) -> Pose {
        Pose {
            position: a.position.lerp(b.position, frac),
            orientation: a.orientation.slerp(b.orientation, frac),
        }
    }
}

/// Which tracked device a pose belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Joint {
    Head,
    Left,
    Right,
}

impl Joint {
    pub const ALL: [Joint; 3] = [Joint::Head, Joint::Left, Joint::Right];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodySample {
    pub t: f64,
    pub head: Pose,
    pub left: Pose,
    pub right: Pose,
}

impl BodySample {
    pub fn pose(&self, joint: Joint) -> &Pose {
        match joint {
            Joint::Head => &self.head,
            Joint::Left => &self.left,
            Joint::Right => &self.right,
        }
    }

    pub fn pose_mut(&mut self, joint: Joint) -> &mut Pose {
        match joint {
            Joint::Head => &mut self.head,
            Joint::Left => &mut self.left,
            Joint::Right => &mut self.right,
        }
    }
}

impl Sample for BodySample {
    const MODALITY: &'static str = "body";

    fn t(&self) -> f64 {
        self.t
    }

    fn with_t(&self, t: f64) -> Self {
        BodySample { t, ..*self }
    }

    fn interpolate(a: &Self, b: &Self, frac: f64) -> Self {
        BodySample {
            t: a.t,
            head: Pose::interpolate(&a.head, &b.head, frac),
            left: Pose::interpolate(&a.left, &b.left, frac),
            right: Pose::interpolate(&a.right, &b.right, frac),
        }
    }

    fn check(&self, out: &mut Vec<ViolationKind>) {
        for joint in Joint::ALL {
            let pose = self.pose(joint);
            if !pose.position.is_finite() || !pose.orientation.is_finite() {
                out.push(ViolationKind::NonFinite);
                continue;
            }
            let norm = pose.orientation.norm();
            if (norm - 1.0).abs() > 1e-9 {
                out.push(ViolationKind::NonUnitQuaternion { joint, norm });
            }
        }
    }
}

/// An ordered telemetry stream with its nominal sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<S> {
    samples: Vec<S>,
    nominal_rate: f64,
}

pub type GazeTrace = Trace<GazeSample>;
pub type BodyTrace = Trace<BodySample>;

impl<S: Sample> Trace<S> {
    /// Builds a trace without checking sample invariants; see [`validate_trace`].
    pub fn new(samples: Vec<S>, nominal_rate: f64) -> Result<Self> {
        if !(nominal_rate > 0.0 && nominal_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "nominal rate must be positive, got {nominal_rate}"
            )));
        }
        Ok(Trace {
            samples,
            nominal_rate,
        })
    }

    /// Builds a trace and rejects it if [`validate_trace`] reports anything.
    pub fn validated(samples: Vec<S>, nominal_rate: f64) -> Result<Self> {
        let trace = Trace::new(samples, nominal_rate)?;
        let report = validate_trace(&trace);
        if !report.is_empty() {
            return Err(Error::InvalidTrace(report.to_string()));
        }
        Ok(trace)
    }

    pub fn samples(&self) -> &[S] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<S> {
        self.samples
    }

    pub fn nominal_rate(&self) -> f64 {
        self.nominal_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> Option<f64> {
        self.samples.first().map(Sample::t)
    }

    pub fn end(&self) -> Option<f64> {
        self.samples.last().map(Sample::t)
    }

    /// Covered time span: last minus first timestamp plus one nominal period.
    pub fn duration(&self) -> f64 {
        match (self.start(), self.end()) {
            (Some(a), Some(b)) => b - a + 1.0 / self.nominal_rate,
            _ => 0.0,
        }
    }

    /// Samples with `t < end`, keeping the nominal rate.
    pub fn truncated(&self, end: f64) -> Self {
        let n = self.samples.partition_point(|s| s.t() < end);
        Trace {
            samples: self.samples[..n].to_vec(),
            nominal_rate: self.nominal_rate,
        }
    }

    /// Same timestamps and rate, new values.
    pub fn with_samples(&self, samples: Vec<S>) -> Self {
        Trace {
            samples,
            nominal_rate: self.nominal_rate,
        }
    }
}

/// One recording of one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub identity: String,
    pub session_index: u32,
    pub gaze: Option<GazeTrace>,
    pub body: Option<BodyTrace>,
}

impl Session {
    pub fn new(
        identity: impl Into<String>,
        session_index: u32,
        gaze: Option<GazeTrace>,
        body: Option<BodyTrace>,
    ) -> Result<Self> {
        let identity = identity.into();
        if session_index == 0 {
            return Err(Error::InvalidConfig(format!(
                "session index must start at 1 (identity `{identity}`)"
            )));
        }
        if gaze.is_none() && body.is_none() {
            return Err(Error::InvalidConfig(format!(
                "session {session_index} of `{identity}` has no telemetry"
            )));
        }
        Ok(Session {
            identity,
            session_index,
            gaze,
            body,
        })
    }
}

/// Sessions grouped by identity, each group sorted by session index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    identities: BTreeMap<String, Vec<Session>>,
}

impl Dataset {
    pub fn new() -> Self {
        Dataset::default()
    }

    pub fn from_sessions(sessions: impl IntoIterator<Item = Session>) -> Result<Self> {
        let mut ds = Dataset::new();
        for s in sessions {
            ds.insert(s)?;
        }
        Ok(ds)
    }

    pub fn insert(&mut self, session: Session) -> Result<()> {
        let group = self.identities.entry(session.identity.clone()).or_default();
        match group.binary_search_by_key(&session.session_index, |s| s.session_index) {
            Ok(_) => Err(Error::InvalidConfig(format!(
                "duplicate session {} for identity `{}`",
                session.session_index, session.identity
            ))),
            Err(pos) => {
                group.insert(pos, session);
                Ok(())
            }
        }
    }

    /// All identity labels in ascending order.
    pub fn identities(&self) -> impl Iterator<Item = &str> {
        self.identities.keys().map(String::as_str)
    }

    pub fn sessions(&self, identity: &str) -> &[Session] {
        self.identities
            .get(identity)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn session(&self, identity: &str, index: u32) -> Option<&Session> {
        self.sessions(identity)
            .iter()
            .find(|s| s.session_index == index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Session> {
        self.identities.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    /// Identities with at least two sessions, i.e. usable for gallery/probe matching.
    pub fn eligible_identities(&self) -> Vec<&str> {
        self.identities
            .iter()
            .filter(|(_, s)| s.len() >= 2)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}
