//! Dataset tooling: chimera pairing and synthetic populations.

mod chimera;
mod synth;

use std::path::Path;

use rand::Rng;
use serde::Serialize;

pub use chimera::{build_chimera, merge_chimera, ChimeraPair};
pub use synth::{
    synth_body, synth_gaze, synth_population, user_label, Population, SynthParams, UserProfile,
};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::metrics::{angle_between, Aoi, AoiSequence, InterceptionTask, Target};
use crate::seed::rng_from_seed;
use crate::telemetry::{
    angles_from_direction, direction_from_angles, write_atomic, write_dataset, BodyTrace,
    GazeSample, GazeTrace, Trace,
};

#[derive(Serialize)]
struct SessionEntry<'a> {
    identity: &'a str,
    session: u32,
    gaze_samples: Option<usize>,
    body_samples: Option<usize>,
}

#[derive(Serialize)]
struct PopulationManifest<'a> {
    generator: &'static str,
    params: &'a SynthParams,
    identities: Vec<&'a str>,
    sessions: Vec<SessionEntry<'a>>,
    profiles: Vec<(&'a str, &'a UserProfile)>,
}

/// Writes the dataset layout plus `manifest.json` under `root`.
pub fn write_population(root: &Path, pop: &Population) -> Result<()> {
    write_dataset(root, &pop.dataset)?;
    let manifest = PopulationManifest {
        generator: "synth",
        params: &pop.params,
        identities: pop.dataset.identities().collect(),
        sessions: pop
            .dataset
            .iter()
            .map(|s| SessionEntry {
                identity: &s.identity,
                session: s.session_index,
                gaze_samples: s.gaze.as_ref().map(Trace::len),
                body_samples: s.body.as_ref().map(Trace::len),
            })
            .collect(),
        profiles: pop.profiles.iter().map(|(l, p)| (l.as_str(), p)).collect(),
    };
    let bytes = serde_json::to_vec_pretty(&manifest)?;
    write_atomic(&root.join("manifest.json"), &bytes)
}

/// Interception task the given trace solves perfectly.
///
/// Each target window of `window_len` seconds is placed at a random time and
/// centered on where one of the controllers actually is mid-window, so the
/// source trace scores 100.
pub fn interception_task_from(
    trace: &BodyTrace,
    n_targets: usize,
    radius: f64,
    window_len: f64,
    seed: u64,
) -> Result<InterceptionTask> {
    let samples = trace.samples();
    let (Some(start), Some(end)) = (trace.start(), trace.end()) else {
        return Err(Error::Empty("body trace"));
    };
    if end - start < window_len {
        return Err(Error::InvalidConfig(format!(
            "trace of {:.3} s is shorter than the target window {window_len} s",
            end - start
        )));
    }
    let mut rng = rng_from_seed(seed);
    let targets = (0..n_targets)
        .map(|_| {
            let t0 = start + rng.random_range(0.0..=(end - start - window_len));
            let mid = t0 + 0.5 * window_len;
            let idx = samples
                .partition_point(|s| s.t < mid)
                .min(samples.len() - 1);
            let s = &samples[idx];
            let position = if rng.random_bool(0.5) {
                s.left.position
            } else {
                s.right.position
            };
            Target {
                t0,
                t1: t0 + window_len,
                position,
                radius,
            }
        })
        .collect();
    InterceptionTask::new(targets)
}

/// Gaze jumping between random targets, with the AOI sequence it follows.
///
/// Each target is shown for `dwell` seconds. The eye needs a short latency
/// plus a saccade to land, then fixates with slight tremor.
pub fn saccade_to_target(
    n_targets: usize,
    dwell: f64,
    rate: f64,
    radius: f64,
    seed: u64,
) -> Result<(GazeTrace, AoiSequence)> {
    if !(dwell > 0.0 && rate > 0.0 && radius > 0.0) {
        return Err(Error::InvalidConfig(
            "dwell, rate and radius must be positive".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let per = (dwell * rate).round() as usize;
    let mut samples = Vec::with_capacity(per * n_targets);
    let mut aois = Vec::with_capacity(n_targets);
    let mut prev = (0.0, 0.0);
    for i in 0..n_targets {
        let target = (rng.random_range(-25.0..25.0), rng.random_range(-15.0..15.0));
        let t0 = (i * per) as f64 / rate;
        let latency = 0.15;
        let amp = direction_from_angles(prev.0, prev.1)
            .distance(direction_from_angles(target.0, target.1))
            .to_degrees();
        let saccade = 0.02 + 0.0025 * amp;
        for k in 0..per {
            let t = (i * per + k) as f64 / rate;
            let u = ((t - t0 - latency) / saccade).clamp(0.0, 1.0);
            let ease = 0.5 - 0.5 * (std::f64::consts::PI * u).cos();
            let yaw = prev.0 + (target.0 - prev.0) * ease + 0.1 * rng.random_range(-1.0..1.0);
            let pitch = prev.1 + (target.1 - prev.1) * ease + 0.1 * rng.random_range(-1.0..1.0);
            samples.push(GazeSample::new(t, yaw, pitch));
        }
        aois.push(Aoi {
            t0,
            t1: t0 + dwell,
            yaw: target.0,
            pitch: target.1,
            radius,
        });
        prev = target;
    }
    Ok((Trace::new(samples, rate)?, AoiSequence::new(aois)?))
}

/// Angular speed above which a gaze sample counts as saccadic, deg/s.
pub const FIXATION_VELOCITY: f64 = 75.0;

/// One AOI per fixation of at least `min_dwell` seconds, centered on the
/// fixation's mean direction.
///
/// Fixations are runs of samples whose angular speed from the previous
/// sample stays below [`FIXATION_VELOCITY`].
pub fn aoi_sequence_from(gaze: &GazeTrace, min_dwell: f64, radius: f64) -> Result<AoiSequence> {
    if !(min_dwell > 0.0 && radius > 0.0) {
        return Err(Error::InvalidConfig(
            "fixation dwell and AOI radius must be positive".into(),
        ));
    }
    let samples = gaze.samples();
    if samples.is_empty() {
        return Err(Error::Empty("gaze trace"));
    }
    let mut aois = Vec::new();
    let mut flush = |run: &[GazeSample]| {
        let (Some(first), Some(last)) = (run.first(), run.last()) else {
            return;
        };
        if last.t - first.t < min_dwell {
            return;
        }
        let sum = run.iter().fold(Vec3::ZERO, |acc, s| acc + s.direction());
        let (yaw, pitch) = angles_from_direction(sum);
        aois.push(Aoi {
            t0: first.t,
            t1: last.t,
            yaw,
            pitch,
            radius,
        });
    };
    let mut start = 0;
    for i in 1..samples.len() {
        let (a, b) = (&samples[i - 1], &samples[i]);
        let speed = angle_between(a.direction(), b.direction()) / (b.t - a.t);
        if speed >= FIXATION_VELOCITY {
            flush(&samples[start..i]);
            start = i;
        }
    }
    flush(&samples[start..]);
    AoiSequence::new(aois)
}
