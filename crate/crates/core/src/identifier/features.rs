//! Per-window statistical features.

use crate::stats::percentile_sorted;
use crate::telemetry::{BodyTrace, GazeTrace, Joint};

/// Statistics taken over each of value, first and second difference.
pub const STATS_PER_SERIES: usize = 6;
/// Value, velocity, acceleration.
pub const SERIES_PER_CHANNEL: usize = 3;
pub const FEATURES_PER_CHANNEL: usize = STATS_PER_SERIES * SERIES_PER_CHANNEL;

/// Gaze yaw and pitch.
pub const GAZE_CHANNELS: usize = 2;
/// Head position, both controllers relative to the head, and yaw/pitch/roll
/// of all three poses.
pub const BODY_CHANNELS: usize = 3 + 3 + 3 + 9;

pub const GAZE_DIM: usize = GAZE_CHANNELS * FEATURES_PER_CHANNEL;
pub const BODY_DIM: usize = BODY_CHANNELS * FEATURES_PER_CHANNEL;

/// Unwraps an angle series (any unit with period `period`) into a continuous one.
fn unwrap(values: &mut [f64], period: f64) {
    for i in 1..values.len() {
        let d = values[i] - values[i - 1];
        let steps = (d / period).round();
        if steps != 0.0 {
            values[i] -= steps * period;
        }
    }
}

/// mean, std, median, IQR, min, max.
fn summarize(values: &mut [f64], out: &mut Vec<f64>) {
    if values.is_empty() {
        out.extend([0.0; STATS_PER_SERIES]);
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    values.sort_by(f64::total_cmp);
    let q1 = percentile_sorted(values, 0.25);
    let q3 = percentile_sorted(values, 0.75);
    out.extend([
        mean,
        var.sqrt(),
        percentile_sorted(values, 0.5),
        q3 - q1,
        values[0],
        values[values.len() - 1],
    ]);
}

fn channel_features(times: &[f64], values: &mut [f64], out: &mut Vec<f64>) {
    let d1: Vec<f64> = (1..values.len())
        .map(|i| (values[i] - values[i - 1]) / (times[i] - times[i - 1]))
        .collect();
    let mut d2: Vec<f64> = (1..d1.len())
        .map(|i| (d1[i] - d1[i - 1]) / (times[i + 1] - times[i]))
        .collect();
    let mut d1 = d1;
    summarize(values, out);
    summarize(&mut d1, out);
    summarize(&mut d2, out);
}

/// Raw (unnormalized) gaze features of one window, length [`GAZE_DIM`].
pub fn gaze_features(window: &GazeTrace) -> Vec<f64> {
    let s = window.samples();
    let times: Vec<f64> = s.iter().map(|x| x.t).collect();
    let mut out = Vec::with_capacity(GAZE_DIM);
    let mut yaw: Vec<f64> = s.iter().map(|x| x.yaw).collect();
    unwrap(&mut yaw, 360.0);
    channel_features(&times, &mut yaw, &mut out);
    let mut pitch: Vec<f64> = s.iter().map(|x| x.pitch).collect();
    channel_features(&times, &mut pitch, &mut out);
    out
}

/// Raw (unnormalized) body features of one window, length [`BODY_DIM`].
pub fn body_features(window: &BodyTrace) -> Vec<f64> {
    let s = window.samples();
    let times: Vec<f64> = s.iter().map(|x| x.t).collect();
    let mut out = Vec::with_capacity(BODY_DIM);
    for axis in 0..3 {
        let mut v: Vec<f64> = s.iter().map(|x| x.head.position.to_array()[axis]).collect();
        channel_features(&times, &mut v, &mut out);
    }
    for joint in [Joint::Left, Joint::Right] {
        for axis in 0..3 {
            let mut v: Vec<f64> = s
                .iter()
                .map(|x| (x.pose(joint).position - x.head.position).to_array()[axis])
                .collect();
            channel_features(&times, &mut v, &mut out);
        }
    }
    for joint in Joint::ALL {
        let angles: Vec<(f64, f64, f64)> = s
            .iter()
            .map(|x| x.pose(joint).orientation.yaw_pitch_roll())
            .collect();
        let mut yaw: Vec<f64> = angles.iter().map(|a| a.0).collect();
        let mut pitch: Vec<f64> = angles.iter().map(|a| a.1).collect();
        let mut roll: Vec<f64> = angles.iter().map(|a| a.2).collect();
        unwrap(&mut yaw, std::f64::consts::TAU);
        unwrap(&mut roll, std::f64::consts::TAU);
        channel_features(&times, &mut yaw, &mut out);
        channel_features(&times, &mut pitch, &mut out);
        channel_features(&times, &mut roll, &mut out);
    }
    out
}

/// Per-feature z-score parameters fitted on gallery windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Features with a spread below this carry no information and map to 0.
const MIN_STD: f64 = 1e-12;

impl Normalizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Option<Self> {
        let mut iter = rows.into_iter().peekable();
        let dim = iter.peek()?.len();
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in iter {
            n += 1;
            for (i, &v) in row.iter().enumerate() {
                let d = v - mean[i];
                mean[i] += d / n as f64;
                m2[i] += d * (v - mean[i]);
            }
        }
        let std = m2.iter().map(|m| (m / n as f64).sqrt()).collect();
        Some(Normalizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s < MIN_STD { 0.0 } else { (v - m) / s })
            .collect()
    }
}

/// Per-feature discriminability weights: sqrt(between / within), where
/// between is the variance of per-identity mean vectors and within the mean
/// per-identity window variance. Fitted on normalized gallery windows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWeights {
    weights: Vec<f64>,
}

impl FeatureWeights {
    pub fn fit(groups: &[Vec<Vec<f64>>]) -> Option<Self> {
        let groups: Vec<&Vec<Vec<f64>>> = groups.iter().filter(|g| !g.is_empty()).collect();
        let dim = groups.first()?.first()?.len();
        let mut within = vec![0.0; dim];
        let mut means = Vec::with_capacity(groups.len());
        for g in &groups {
            let n = g.len() as f64;
            let mean: Vec<f64> = (0..dim)
                .map(|d| g.iter().map(|w| w[d]).sum::<f64>() / n)
                .collect();
            for (d, acc) in within.iter_mut().enumerate() {
                *acc += g.iter().map(|w| (w[d] - mean[d]).powi(2)).sum::<f64>() / n;
            }
            means.push(mean);
        }
        let k = groups.len() as f64;
        let weights = (0..dim)
            .map(|d| {
                let mu = means.iter().map(|m| m[d]).sum::<f64>() / k;
                let between = means.iter().map(|m| (m[d] - mu).powi(2)).sum::<f64>() / k;
                (between / (within[d] / k).max(MIN_STD)).sqrt()
            })
            .collect();
        Some(FeatureWeights { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Scale that gives a unit-variance block unit expected squared norm.
    pub fn block_scale(&self) -> f64 {
        let total: f64 = self.weights.iter().map(|w| w * w).sum();
        if total > 0.0 {
            1.0 / total.sqrt()
        } else {
            1.0
        }
    }

    pub fn apply(&self, row: &[f64], scale: f64) -> Vec<f64> {
        row.iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w * scale)
            .collect()
    }
}
