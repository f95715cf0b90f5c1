use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{MechanismConfig, StreamKind};
use super::ldp::sample_bounded_laplace;
use crate::error::{Error, Result};
use crate::geometry::{Quat, Vec3};
use crate::seed::{mix, rng_from_seed, StreamRng};
use crate::stats::percentile_sorted;
use crate::telemetry::{wrap_degrees, BodySample, BodyTrace, GazeSample, Joint, Sample};

/// Population means that motion retargeting normalizes every user onto.
pub const TARGET_HEIGHT: f64 = 1.70;
pub const TARGET_WINGSPAN: f64 = 1.70;
/// Seconds of body telemetry motion retargeting uses to estimate anatomy.
pub const RETARGET_CALIBRATION_WINDOW: f64 = 5.0;

const ANATOMY_PERCENTILE: f64 = 0.95;

/// Anatomical scalars estimated from body telemetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anatomy {
    /// 95th percentile of head height.
    pub height: f64,
    /// 95th percentile of the left-to-right controller distance.
    pub wingspan: f64,
}

impl Anatomy {
    pub fn estimate<'a>(samples: impl IntoIterator<Item = &'a BodySample>) -> Option<Anatomy> {
        let (mut heights, mut spans): (Vec<f64>, Vec<f64>) = samples
            .into_iter()
            .map(|s| {
                (
                    s.head.position.y,
                    s.left.position.distance(s.right.position),
                )
            })
            .unzip();
        if heights.is_empty() {
            return None;
        }
        heights.sort_by(f64::total_cmp);
        spans.sort_by(f64::total_cmp);
        Some(Anatomy {
            height: percentile_sorted(&heights, ANATOMY_PERCENTILE),
            wingspan: percentile_sorted(&spans, ANATOMY_PERCENTILE),
        })
    }
}

/// Causal running anatomy estimate over the first `window` seconds of a
/// stream, frozen once the window is covered.
#[derive(Debug, Clone)]
struct AnatomyEstimator {
    window: f64,
    start: Option<f64>,
    heights: Vec<f64>,
    spans: Vec<f64>,
    current: Option<Anatomy>,
    frozen: bool,
}

impl AnatomyEstimator {
    fn new(window: f64) -> Self {
        AnatomyEstimator {
            window,
            start: None,
            heights: Vec::new(),
            spans: Vec::new(),
            current: None,
            frozen: false,
        }
    }

    fn observe(&mut self, s: &BodySample) -> Anatomy {
        if let (true, Some(a)) = (self.frozen, self.current) {
            return a;
        }
        let start = *self.start.get_or_insert(s.t);
        let h = s.head.position.y;
        let w = s.left.position.distance(s.right.position);
        let hi = self.heights.partition_point(|&x| x < h);
        self.heights.insert(hi, h);
        let wi = self.spans.partition_point(|&x| x < w);
        self.spans.insert(wi, w);
        let a = Anatomy {
            height: percentile_sorted(&self.heights, ANATOMY_PERCENTILE),
            wingspan: percentile_sorted(&self.spans, ANATOMY_PERCENTILE),
        };
        self.current = Some(a);
        if s.t - start >= self.window {
            self.freeze(a);
        }
        a
    }

    fn freeze(&mut self, a: Anatomy) {
        self.current = Some(a);
        self.frozen = true;
        self.heights = Vec::new();
        self.spans = Vec::new();
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Identity,
    Gaussian {
        sigma_gaze: f64,
        sigma_pos: f64,
        rng: StreamRng,
    },
    Temporal {
        factor: u64,
        frame: u64,
        held_gaze: Option<GazeSample>,
        held_body: Option<BodySample>,
    },
    Spatial {
        delta_gaze: f64,
        delta_pos: f64,
    },
    Smoothing {
        window: usize,
        gaze: VecDeque<GazeSample>,
        body: VecDeque<BodySample>,
    },
    BodyLdp {
        anatomy: AnatomyEstimator,
        height_offset: f64,
        wingspan_offset: f64,
    },
    Retarget {
        anatomy: AnatomyEstimator,
        amp: f64,
        period: f64,
        phases: [[f64; 3]; 3],
    },
    Composite(Box<MechanismState>, Box<MechanismState>),
}

/// A configured mechanism bound to one telemetry stream.
///
/// Processing is causal: the output for a frame depends only on that frame
/// and earlier ones. One state serves exactly one stream.
#[derive(Debug, Clone)]
pub struct MechanismState {
    config: MechanismConfig,
    stream: StreamKind,
    inner: Inner,
}

impl MechanismState {
    pub fn new(config: &MechanismConfig, stream: StreamKind, seed: u64) -> Result<Self> {
        config.validate()?;
        if !config.supports(stream) {
            return Err(Error::ModalityMismatch {
                mechanism: config.to_string(),
                modality: stream.name(),
            });
        }
        Ok(Self::build(config, stream, seed))
    }

    fn build(config: &MechanismConfig, stream: StreamKind, seed: u64) -> Self {
        let inner = match *config {
            MechanismConfig::Identity => Inner::Identity,
            MechanismConfig::Gaussian {
                sigma_gaze,
                sigma_pos,
            } => Inner::Gaussian {
                sigma_gaze,
                sigma_pos,
                rng: rng_from_seed(seed),
            },
            MechanismConfig::TemporalDownsample { factor } => Inner::Temporal {
                factor: factor as u64,
                frame: 0,
                held_gaze: None,
                held_body: None,
            },
            MechanismConfig::SpatialDownsample {
                delta_gaze,
                delta_pos,
            } => Inner::Spatial {
                delta_gaze,
                delta_pos,
            },
            MechanismConfig::Smoothing { window } => Inner::Smoothing {
                window: window as usize,
                gaze: VecDeque::with_capacity(window as usize),
                body: VecDeque::with_capacity(window as usize),
            },
            MechanismConfig::BodyLdp {
                scale_b,
                bound_c,
                calibration_window,
            } => {
                let mut rng = rng_from_seed(seed);
                let height_offset = sample_bounded_laplace(&mut rng, scale_b, bound_c);
                let wingspan_offset = sample_bounded_laplace(&mut rng, scale_b, bound_c);
                Inner::BodyLdp {
                    anatomy: AnatomyEstimator::new(calibration_window),
                    height_offset,
                    wingspan_offset,
                }
            }
            MechanismConfig::MotionRetarget {
                noise_amp,
                noise_period,
            } => {
                let mut rng = rng_from_seed(seed);
                let mut phases = [[0.0; 3]; 3];
                for p in phases.iter_mut().flatten() {
                    *p = rng.random::<f64>() * TAU;
                }
                Inner::Retarget {
                    anatomy: AnatomyEstimator::new(RETARGET_CALIBRATION_WINDOW),
                    amp: noise_amp,
                    period: noise_period,
                    phases,
                }
            }
            MechanismConfig::Composite {
                ref first,
                ref second,
            } => Inner::Composite(
                Box::new(Self::build(first, stream, mix(seed, &[1]))),
                Box::new(Self::build(second, stream, mix(seed, &[2]))),
            ),
        };
        MechanismState {
            config: config.clone(),
            stream,
            inner,
        }
    }

    pub fn config(&self) -> &MechanismConfig {
        &self.config
    }

    pub fn stream(&self) -> StreamKind {
        self.stream
    }

    /// Per-session (height, wingspan) offsets of the first Body-LDP stage, if any.
    pub fn session_offsets(&self) -> Option<(f64, f64)> {
        match &self.inner {
            Inner::BodyLdp {
                height_offset,
                wingspan_offset,
                ..
            } => Some((*height_offset, *wingspan_offset)),
            Inner::Composite(a, b) => a.session_offsets().or_else(|| b.session_offsets()),
            _ => None,
        }
    }

    /// Current anatomy estimate of the first anatomy-aware stage, if any.
    pub fn anatomy(&self) -> Option<Anatomy> {
        match &self.inner {
            Inner::BodyLdp { anatomy, .. } | Inner::Retarget { anatomy, .. } => anatomy.current,
            Inner::Composite(a, b) => a.anatomy().or_else(|| b.anatomy()),
            _ => None,
        }
    }

    /// Estimates anatomy from the first calibration window of `trace` and
    /// freezes it for the rest of the session.
    ///
    /// Stages that do not use anatomy are unaffected. Inside a composite the
    /// second stage is calibrated on the first stage's output.
    pub fn calibrate_session(&mut self, trace: &BodyTrace) -> Result<()> {
        if self.stream != StreamKind::Body {
            return Err(Error::ModalityMismatch {
                mechanism: self.config.to_string(),
                modality: self.stream.name(),
            });
        }
        match &mut self.inner {
            Inner::BodyLdp { anatomy, .. } | Inner::Retarget { anatomy, .. } => {
                calibrate_estimator(anatomy, trace)
            }
            Inner::Composite(a, b) => {
                let mut probe = (**a).clone();
                a.calibrate_session(trace)?;
                if b.uses_anatomy() {
                    let mid = trace
                        .samples()
                        .iter()
                        .map(|s| probe.step_body(s))
                        .collect::<Result<Vec<_>>>()?;
                    b.calibrate_session(&trace.with_samples(mid))?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn uses_anatomy(&self) -> bool {
        match &self.inner {
            Inner::BodyLdp { .. } | Inner::Retarget { .. } => true,
            Inner::Composite(a, b) => a.uses_anatomy() || b.uses_anatomy(),
            _ => false,
        }
    }

    fn check_stream(&self, stream: StreamKind) -> Result<()> {
        if self.stream == stream {
            Ok(())
        } else {
            Err(Error::ModalityMismatch {
                mechanism: self.config.to_string(),
                modality: stream.name(),
            })
        }
    }

    /// Transforms one gaze frame; the timestamp is preserved.
    pub fn step_gaze(&mut self, s: &GazeSample) -> Result<GazeSample> {
        self.check_stream(StreamKind::Gaze)?;
        Ok(self.gaze(s))
    }

    /// Transforms one body frame; the timestamp is preserved.
    pub fn step_body(&mut self, s: &BodySample) -> Result<BodySample> {
        self.check_stream(StreamKind::Body)?;
        Ok(self.body(s))
    }

    fn gaze(&mut self, s: &GazeSample) -> GazeSample {
        match &mut self.inner {
            Inner::Identity => *s,
            Inner::Gaussian {
                sigma_gaze, rng, ..
            } => {
                if *sigma_gaze == 0.0 {
                    return *s;
                }
                let dy: f64 = rng.sample(StandardNormal);
                let dp: f64 = rng.sample(StandardNormal);
                canonical_gaze(s.t, s.yaw + *sigma_gaze * dy, s.pitch + *sigma_gaze * dp)
            }
            Inner::Temporal {
                factor,
                frame,
                held_gaze,
                ..
            } => {
                if *frame % *factor == 0 {
                    *held_gaze = Some(*s);
                }
                *frame += 1;
                held_gaze.map_or(*s, |h| h.with_t(s.t))
            }
            Inner::Spatial { delta_gaze, .. } => {
                let d = *delta_gaze;
                if d == 0.0 {
                    return *s;
                }
                canonical_gaze(s.t, quantize(s.yaw, d), quantize(s.pitch, d))
            }
            Inner::Smoothing { window, gaze, .. } => {
                push_bounded(gaze, *s, *window);
                smooth_gaze(gaze, *window)
            }
            Inner::Composite(a, b) => {
                let mid = a.gaze(s);
                b.gaze(&mid)
            }
            // Rejected at construction.
            Inner::BodyLdp { .. } | Inner::Retarget { .. } => *s,
        }
    }

    fn body(&mut self, s: &BodySample) -> BodySample {
        match &mut self.inner {
            Inner::Identity => *s,
            Inner::Gaussian { sigma_pos, rng, .. } => {
                let sigma = *sigma_pos;
                if sigma == 0.0 {
                    return *s;
                }
                let mut out = *s;
                for joint in Joint::ALL {
                    let p = &mut out.pose_mut(joint).position;
                    p.x += sigma * rng.sample::<f64, _>(StandardNormal);
                    p.y += sigma * rng.sample::<f64, _>(StandardNormal);
                    p.z += sigma * rng.sample::<f64, _>(StandardNormal);
                }
                out
            }
            Inner::Temporal {
                factor,
                frame,
                held_body,
                ..
            } => {
                if *frame % *factor == 0 {
                    *held_body = Some(*s);
                }
                *frame += 1;
                held_body.map_or(*s, |h| h.with_t(s.t))
            }
            Inner::Spatial { delta_pos, .. } => {
                let d = *delta_pos;
                if d == 0.0 {
                    return *s;
                }
                let mut out = *s;
                for joint in Joint::ALL {
                    let p = &mut out.pose_mut(joint).position;
                    *p = Vec3::new(quantize(p.x, d), quantize(p.y, d), quantize(p.z, d));
                }
                out
            }
            Inner::Smoothing { window, body, .. } => {
                push_bounded(body, *s, *window);
                smooth_body(body, *window)
            }
            Inner::BodyLdp {
                anatomy,
                height_offset,
                wingspan_offset,
            } => {
                let a = anatomy.observe(s);
                if *height_offset == 0.0 && *wingspan_offset == 0.0 {
                    return *s;
                }
                let scale = if a.wingspan > 1e-6 {
                    ((a.wingspan + *wingspan_offset) / a.wingspan).max(0.0)
                } else {
                    1.0
                };
                rescale_body(s, Vec3::new(0.0, *height_offset, 0.0), scale)
            }
            Inner::Retarget {
                anatomy,
                amp,
                period,
                phases,
            } => {
                let a = anatomy.observe(s);
                let scale = if a.wingspan > 1e-6 {
                    TARGET_WINGSPAN / a.wingspan
                } else {
                    1.0
                };
                let mut out = rescale_body(s, Vec3::new(0.0, TARGET_HEIGHT - a.height, 0.0), scale);
                if *amp > 0.0 {
                    let arg = TAU * s.t / *period;
                    for (joint, ph) in Joint::ALL.into_iter().zip(phases.iter()) {
                        let n = Vec3::new(
                            (arg + ph[0]).sin(),
                            (arg + ph[1]).sin(),
                            (arg + ph[2]).sin(),
                        );
                        out.pose_mut(joint).position += n * *amp;
                    }
                }
                out
            }
            Inner::Composite(a, b) => {
                let mid = a.body(s);
                b.body(&mid)
            }
        }
    }
}

fn calibrate_estimator(est: &mut AnatomyEstimator, trace: &BodyTrace) -> Result<()> {
    let (Some(start), Some(end)) = (trace.start(), trace.end()) else {
        return Err(Error::InsufficientCalibration {
            needed: est.window,
            got: 0.0,
        });
    };
    if end - start < est.window {
        return Err(Error::InsufficientCalibration {
            needed: est.window,
            got: end - start,
        });
    }
    let cutoff = start + est.window;
    let anatomy = Anatomy::estimate(trace.samples().iter().take_while(|s| s.t <= cutoff))
        .expect("non-empty trace");
    est.start = Some(start);
    est.freeze(anatomy);
    Ok(())
}

/// Lifts the whole body by `lift` and scales controller offsets from the head by `scale`.
fn rescale_body(s: &BodySample, lift: Vec3, scale: f64) -> BodySample {
    let head = s.head.position;
    let new_head = head + lift;
    let mut out = *s;
    out.head.position = new_head;
    out.left.position = new_head + (s.left.position - head) * scale;
    out.right.position = new_head + (s.right.position - head) * scale;
    out
}

fn quantize(x: f64, delta: f64) -> f64 {
    (x / delta).round() * delta
}

fn canonical_gaze(t: f64, yaw: f64, pitch: f64) -> GazeSample {
    GazeSample::new(t, wrap_degrees(yaw), pitch.clamp(-90.0, 90.0))
}

fn push_bounded<T>(buf: &mut VecDeque<T>, item: T, cap: usize) {
    if buf.len() == cap {
        buf.pop_back();
    }
    buf.push_front(item);
}

/// Weight of lag `lag` in a window of length `window`: most recent weighted most.
fn lag_weight(window: usize, lag: usize) -> f64 {
    (window - lag) as f64
}

/// Sum of the weights of the `available` most recent lags; exact, since
/// every partial sum is a small integer.
fn normalizer(window: usize, available: usize) -> f64 {
    (available * window - available * (available - 1) / 2) as f64
}

fn smooth_gaze(hist: &VecDeque<GazeSample>, window: usize) -> GazeSample {
    let cur = hist[0];
    if hist.len() == 1 {
        return cur;
    }
    let z = normalizer(window, hist.len());
    let (mut dy, mut dp) = (0.0, 0.0);
    for (lag, s) in hist.iter().enumerate().skip(1) {
        let w = lag_weight(window, lag);
        dy += w * wrap_degrees(s.yaw - cur.yaw);
        dp += w * (s.pitch - cur.pitch);
    }
    if dy == 0.0 && dp == 0.0 {
        return cur;
    }
    canonical_gaze(cur.t, cur.yaw + dy / z, cur.pitch + dp / z)
}

fn smooth_body(hist: &VecDeque<BodySample>, window: usize) -> BodySample {
    let cur = hist[0];
    if hist.len() == 1 {
        return cur;
    }
    let z = normalizer(window, hist.len());
    let p0 = Joint::ALL.map(|j| cur.pose(j).position);
    let q0 = Joint::ALL.map(|j| cur.pose(j).orientation);
    let mut dp = [Vec3::ZERO; 3];
    let mut dq = [[0.0f64; 4]; 3];
    for (lag, s) in hist.iter().enumerate().skip(1) {
        let w = lag_weight(window, lag);
        for (k, joint) in Joint::ALL.into_iter().enumerate() {
            let pose = s.pose(joint);
            dp[k] += (pose.position - p0[k]) * w;
            let a = q0[k].aligned(pose.orientation);
            let q = q0[k];
            let acc = &mut dq[k];
            acc[0] += (a.w - q.w) * w;
            acc[1] += (a.x - q.x) * w;
            acc[2] += (a.y - q.y) * w;
            acc[3] += (a.z - q.z) * w;
        }
    }
    let mut out = cur;
    for (k, joint) in Joint::ALL.into_iter().enumerate() {
        let pose = out.pose_mut(joint);
        if dp[k] != Vec3::ZERO {
            pose.position = p0[k] + dp[k] * (1.0 / z);
        }
        if dq[k] != [0.0; 4] {
            let [w, x, y, zz] = dq[k].map(|c| c * (1.0 / z));
            pose.orientation = (q0[k] + Quat::new(w, x, y, zz)).normalized();
        }
    }
    out
}

/// Telemetry sample types a mechanism can stream over.
pub trait Perturb: Sample {
    const STREAM: StreamKind;

    fn step(state: &mut MechanismState, sample: &Self) -> Result<Self>;
}

impl Perturb for GazeSample {
    const STREAM: StreamKind = StreamKind::Gaze;

    fn step(state: &mut MechanismState, sample: &Self) -> Result<Self> {
        state.step_gaze(sample)
    }
}

impl Perturb for BodySample {
    const STREAM: StreamKind = StreamKind::Body;

    fn step(state: &mut MechanismState, sample: &Self) -> Result<Self> {
        state.step_body(sample)
    }
}
