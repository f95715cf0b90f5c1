#![allow(dead_code)]

use rand::Rng;
use telemask_core::geometry::{Quat, Vec3};
use telemask_core::seed::{rng_from_seed, StreamRng};
use telemask_core::telemetry::{BodySample, BodyTrace, GazeSample, GazeTrace, Pose, Trace};

fn random_quat(rng: &mut impl Rng) -> Quat {
    Quat::from_yaw_pitch_roll(
        rng.random_range(-3.1..3.1),
        rng.random_range(-1.5..1.5),
        rng.random_range(-3.1..3.1),
    )
}

/// Random valid gaze trace: jittered timestamps, arbitrary angles.
pub fn random_gaze(n: usize, seed: u64) -> GazeTrace {
    let mut rng = rng_from_seed(seed);
    let rate = rng.random_range(30.0..250.0);
    let mut t = rng.random_range(0.0..10.0);
    let samples = (0..n)
        .map(|_| {
            t += rng.random_range(0.5..1.5) / rate;
            GazeSample::new(
                t,
                rng.random_range(-179.9..180.0),
                rng.random_range(-89.0..89.0),
            )
        })
        .collect();
    Trace::new(samples, rate).unwrap()
}

/// Random valid body trace standing somewhere between 1.4 and 2.0 m tall.
pub fn random_body(n: usize, seed: u64) -> BodyTrace {
    let mut rng = rng_from_seed(seed);
    let rate = rng.random_range(30.0..120.0);
    let height = rng.random_range(1.4..2.0);
    let mut t = 0.0;
    let samples = (0..n)
        .map(|_| {
            t += rng.random_range(0.5..1.5) / rate;
            let head = Vec3::new(
                rng.random_range(-0.2..0.2),
                height + rng.random_range(-0.05..0.05),
                rng.random_range(-0.2..0.2),
            );
            let hand = |rng: &mut StreamRng, side: f64| {
                head + Vec3::new(
                    side * rng.random_range(0.1..0.9),
                    rng.random_range(-0.7..0.3),
                    rng.random_range(-0.2..0.6),
                )
            };
            let left = hand(&mut rng, -1.0);
            let right = hand(&mut rng, 1.0);
            BodySample {
                t,
                head: Pose::new(head, random_quat(&mut rng)),
                left: Pose::new(left, random_quat(&mut rng)),
                right: Pose::new(right, random_quat(&mut rng)),
            }
        })
        .collect();
    Trace::new(samples, rate).unwrap()
}

/// Bit-level equality of two sample slices.
pub fn gaze_bits(trace: &GazeTrace) -> Vec<[u64; 3]> {
    trace
        .samples()
        .iter()
        .map(|s| [s.t.to_bits(), s.yaw.to_bits(), s.pitch.to_bits()])
        .collect()
}

pub fn body_bits(trace: &BodyTrace) -> Vec<u64> {
    trace
        .samples()
        .iter()
        .flat_map(|s| {
            let mut v = vec![s.t.to_bits()];
            for p in [&s.head, &s.left, &s.right] {
                let q = p.orientation;
                v.extend(
                    p.position
                        .to_array()
                        .into_iter()
                        .chain([q.w, q.x, q.y, q.z])
                        .map(f64::to_bits),
                );
            }
            v
        })
        .collect()
}
