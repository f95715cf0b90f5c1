//! Synthetic multi-user eye and body telemetry with known ground truth.
//!
//! Each user gets a [`UserProfile`] drawn once from fixed distributions.
//! Sessions re-draw phases, room position, and a small jitter on every
//! parameter, so a user's sessions resemble each other more than they
//! resemble anyone else's.
//!
//! Identity lives mostly in anatomy (height, wingspan) and in physiological
//! tremor (amplitude and frequency, per gaze axis and per hand). Gross
//! behavior (sway, hand rhythm, fixations, saccades) differs only mildly
//! between users and is driven by band-limited random processes, so it
//! varies from window to window much more than from user to user.
//!
//! | parameter                       | distribution                       | session jitter   |
//! |---------------------------------|------------------------------------|------------------|
//! | height (m)                      | N(1.70, 0.07) clipped to [1.4,2.1] | N(0, 3 mm)       |
//! | wingspan / height               | N(1.00, 0.035)                     | N(0, 5 mm)       |
//! | head sway freq (Hz)             | U(0.28, 0.32)                      | x(1 + N(0, .1))  |
//! | head sway amp (m)               | U(0.018, 0.022)                    | x(1 + N(0, .1))  |
//! | hand rhythm (Hz)                | U(0.7, 0.8)                        | x(1 + N(0, .1))  |
//! | hand amplitude (m)              | U(0.09, 0.11)                      | x(1 + N(0, .1))  |
//! | inter-hand phase                | U(pi - 0.5, pi + 0.5)              | + N(0, 0.4)      |
//! | fixation mean (s)               | U(0.28, 0.32)                      | x(1 + N(0, .1))  |
//! | saccade amp mean (deg)          | U(11, 13)                          | x(1 + N(0, .1))  |
//! | gaze tremor, per axis (deg)     | log-U(0.05, 0.5)                   | x(1 + N(0, .05)) |
//! | gaze tremor freq, per axis (Hz) | U(6, 10)                           | + N(0, 0.1)      |
//! | hand tremor, per hand (m)       | log-U(0.001, 0.008)                | x(1 + N(0, .05)) |
//! | hand tremor freq, per hand (Hz) | U(6, 10)                           | + N(0, 0.1)      |
//!
//! Tremor is narrow-band: an oscillator at the user's frequency whose phase
//! wanders slightly. Every stream also carries white sensor noise that is
//! the same for all users.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Quat, Vec3};
use crate::seed::{mix, rng_from_seed, StreamRng};
use crate::telemetry::{
    wrap_degrees, BodySample, BodyTrace, Dataset, GazeSample, GazeTrace, Pose, Session, Trace,
};

/// Gaze stays inside this yaw/pitch box (degrees).
const GAZE_YAW_LIMIT: f64 = 30.0;
const GAZE_PITCH_LIMIT: f64 = 20.0;
/// White noise shared by all users (degrees, meters).
const GAZE_SENSOR_NOISE: f64 = 0.01;
const BODY_SENSOR_NOISE: f64 = 0.0002;
/// Distance from wrist to controller origin (m).
const WRIST_LEVER: f64 = 0.3;
/// Purposeful hand movements shared by all users: rate (1/s) and length (s).
const SWINGS_PER_SECOND: f64 = 1.0;
const SWING_LENGTH: (f64, f64) = (0.3, 0.7);
/// Per-sample phase jitter of tremor oscillators (radians).
const PHASE_WANDER: f64 = 0.05;
/// Relative session-to-session spread of behavioral parameters.
const BEHAVIOR_JITTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub height: f64,
    pub wingspan: f64,
    pub sway_freq: f64,
    pub sway_amp: f64,
    pub hand_freq: f64,
    pub hand_amp: f64,
    pub hand_phase: f64,
    pub fixation_mean: f64,
    pub saccade_amp_mean: f64,
    /// Yaw, pitch.
    pub gaze_tremor: [f64; 2],
    pub gaze_tremor_freq: [f64; 2],
    /// Left, right.
    pub hand_tremor: [f64; 2],
    pub hand_tremor_freq: [f64; 2],
    pub seed: u64,
}

fn gauss(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

fn jitter(rng: &mut StreamRng, value: f64, rel: f64) -> f64 {
    (value * (1.0 + rel * gauss(rng))).max(value * 0.2)
}

fn log_uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

impl UserProfile {
    pub fn draw(seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let height: f64 = Normal::<f64>::new(1.70, 0.07)
            .expect("valid normal")
            .sample(&mut rng)
            .clamp(1.4, 2.1);
        let wingspan = height * (1.0 + 0.035 * gauss(&mut rng));
        UserProfile {
            height,
            wingspan,
            sway_freq: rng.random_range(0.28..0.32),
            sway_amp: rng.random_range(0.018..0.022),
            hand_freq: rng.random_range(0.7..0.8),
            hand_amp: rng.random_range(0.09..0.11),
            hand_phase: rng.random_range(PI - 0.5..PI + 0.5),
            fixation_mean: rng.random_range(0.28..0.32),
            saccade_amp_mean: rng.random_range(11.0..13.0),
            gaze_tremor: [0, 1].map(|_| log_uniform(&mut rng, 0.05, 0.5)),
            gaze_tremor_freq: [0, 1].map(|_| rng.random_range(6.0..10.0)),
            hand_tremor: [0, 1].map(|_| log_uniform(&mut rng, 0.001, 0.008)),
            hand_tremor_freq: [0, 1].map(|_| rng.random_range(6.0..10.0)),
            seed,
        }
    }

    /// Session-level realization of the profile.
    fn session(&self, rng: &mut StreamRng) -> UserProfile {
        UserProfile {
            height: self.height + 0.003 * gauss(rng),
            wingspan: self.wingspan + 0.005 * gauss(rng),
            sway_freq: jitter(rng, self.sway_freq, BEHAVIOR_JITTER),
            sway_amp: jitter(rng, self.sway_amp, BEHAVIOR_JITTER),
            hand_freq: jitter(rng, self.hand_freq, BEHAVIOR_JITTER),
            hand_amp: jitter(rng, self.hand_amp, BEHAVIOR_JITTER),
            hand_phase: self.hand_phase + 0.4 * gauss(rng),
            fixation_mean: jitter(rng, self.fixation_mean, BEHAVIOR_JITTER).max(0.1),
            saccade_amp_mean: jitter(rng, self.saccade_amp_mean, BEHAVIOR_JITTER),
            gaze_tremor: self.gaze_tremor.map(|a| jitter(rng, a, 0.05)),
            gaze_tremor_freq: self.gaze_tremor_freq.map(|f| f + 0.1 * gauss(rng)),
            hand_tremor: self.hand_tremor.map(|a| jitter(rng, a, 0.05)),
            hand_tremor_freq: self.hand_tremor_freq.map(|f| f + 0.1 * gauss(rng)),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_users: usize,
    pub sessions_per_user: u32,
    pub duration: f64,
    pub rate: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_users: 40,
            sessions_per_user: 2,
            duration: 120.0,
            rate: 50.0,
            seed: 2025,
        }
    }
}

/// Synthetic population plus the ground-truth profiles that generated it.
#[derive(Debug, Clone)]
pub struct Population {
    pub dataset: Dataset,
    pub profiles: Vec<(String, UserProfile)>,
    pub params: SynthParams,
}

pub fn user_label(index: usize) -> String {
    format!("u{index:03}")
}

/// Generates `n_users` users with `sessions_per_user` sessions each.
pub fn synth_population(
    n_users: usize,
    sessions_per_user: u32,
    duration: f64,
    rate: f64,
    seed: u64,
) -> Result<Population> {
    if n_users < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 users, got {n_users}"
        )));
    }
    if sessions_per_user < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 sessions per user, got {sessions_per_user}"
        )));
    }
    if !(duration > 0.0 && duration.is_finite() && rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "duration and rate must be positive, got {duration} s at {rate} Hz"
        )));
    }
    let users: Vec<(String, UserProfile, Vec<Session>)> = (0..n_users)
        .into_par_iter()
        .map(|i| {
            let label = user_label(i);
            let profile = UserProfile::draw(mix(seed, &[i as u64]));
            let sessions = (1..=sessions_per_user)
                .map(|k| {
                    let mut rng = rng_from_seed(mix(profile.seed, &[k as u64]));
                    let realized = profile.session(&mut rng);
                    let gaze = synth_gaze(&realized, duration, rate, &mut rng);
                    let body = synth_body(&realized, duration, rate, &mut rng);
                    Session::new(label.clone(), k, Some(gaze), Some(body))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((label, profile, sessions))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut dataset = Dataset::new();
    let mut profiles = Vec::with_capacity(n_users);
    for (label, profile, sessions) in users {
        for s in sessions {
            dataset.insert(s)?;
        }
        profiles.push((label, profile));
    }
    Ok(Population {
        dataset,
        profiles,
        params: SynthParams {
            n_users,
            sessions_per_user,
            duration,
            rate,
            seed,
        },
    })
}

fn frame_count(duration: f64, rate: f64) -> usize {
    (duration * rate).round() as usize
}

/// Unit-amplitude narrow-band oscillator with a slowly wandering phase.
struct Oscillator {
    phase: f64,
    step: f64,
    wander: f64,
}

impl Oscillator {
    fn new(freq: f64, rate: f64, wander: f64, rng: &mut StreamRng) -> Self {
        Oscillator {
            phase: rng.random_range(0.0..TAU),
            step: TAU * freq / rate,
            wander,
        }
    }

    fn tremor(freq: f64, rate: f64, rng: &mut StreamRng) -> Self {
        Oscillator::new(freq, rate, PHASE_WANDER, rng)
    }

    fn advance(&mut self, rng: &mut StreamRng) -> f64 {
        self.phase += self.step + self.wander * gauss(rng);
        self.phase
    }

    fn step(&mut self, rng: &mut StreamRng) -> f64 {
        self.advance(rng).sin()
    }
}

/// Smooth band-limited noise: an Ornstein-Uhlenbeck process passed through
/// a second first-order lag with the same time constant.
struct Wander {
    fast: f64,
    value: f64,
    decay: f64,
    kick: f64,
}

impl Wander {
    fn new(sd: f64, time_constant: f64, rate: f64, rng: &mut StreamRng) -> Self {
        let decay = (-1.0 / (time_constant * rate)).exp();
        // stationary sd of the second stage for a unit-sd first stage
        let gain = (1.0 - decay) * (1.0 + decay * decay).sqrt() / (1.0 - decay * decay);
        let fast = sd / gain * gauss(rng);
        Wander {
            fast,
            value: sd * gauss(rng),
            decay,
            kick: sd / gain * (1.0 - decay * decay).sqrt(),
        }
    }

    fn step(&mut self, rng: &mut StreamRng) -> f64 {
        self.fast = self.decay * self.fast + self.kick * gauss(rng);
        self.value = self.decay * self.value + (1.0 - self.decay) * self.fast;
        self.value
    }
}

/// Fixation/saccade gaze with fixational tremor and slow drift.
pub fn synth_gaze(p: &UserProfile, duration: f64, rate: f64, rng: &mut StreamRng) -> GazeTrace {
    let n = frame_count(duration, rate);
    let fix_extra = Exp::new(1.0 / (p.fixation_mean - 0.08).max(0.02)).expect("positive rate");
    let amp_dist = LogNormal::new(p.saccade_amp_mean.ln(), 0.5).expect("valid lognormal");
    let mut osc = [0, 1].map(|i| Oscillator::tremor(p.gaze_tremor_freq[i], rate, rng));

    let mut samples = Vec::with_capacity(n);
    let mut pos = (rng.random_range(-10.0..10.0), rng.random_range(-8.0..8.0));
    let mut from = pos;
    let mut saccade_end = 0.0;
    let mut saccade_len = 0.0;
    let mut next_saccade = 0.08 + fix_extra.sample(rng);
    let mut drift = (0.0, 0.0);
    for k in 0..n {
        let t = k as f64 / rate;
        if t >= next_saccade {
            let amp: f64 = amp_dist.sample(rng).min(25.0);
            let dir = rng.random_range(0.0..TAU);
            let mut target = (pos.0 + amp * dir.cos(), pos.1 + amp * dir.sin());
            if target.0.abs() > GAZE_YAW_LIMIT {
                target.0 = pos.0 - amp * dir.cos();
            }
            if target.1.abs() > GAZE_PITCH_LIMIT {
                target.1 = pos.1 - amp * dir.sin();
            }
            target.0 = target.0.clamp(-GAZE_YAW_LIMIT, GAZE_YAW_LIMIT);
            target.1 = target.1.clamp(-GAZE_PITCH_LIMIT, GAZE_PITCH_LIMIT);
            from = (pos.0 + drift.0, pos.1 + drift.1);
            drift = (0.0, 0.0);
            saccade_len = 0.02 + 0.0025 * amp;
            saccade_end = t + saccade_len;
            pos = target;
            next_saccade = saccade_end + 0.08 + fix_extra.sample(rng);
        }
        let (base_yaw, base_pitch) = if t < saccade_end {
            let u = 1.0 - (saccade_end - t) / saccade_len;
            let ease = 0.5 - 0.5 * (PI * u).cos();
            (
                from.0 + (pos.0 - from.0) * ease,
                from.1 + (pos.1 - from.1) * ease,
            )
        } else {
            drift.0 += 0.02 * gauss(rng) / rate.sqrt();
            drift.1 += 0.02 * gauss(rng) / rate.sqrt();
            (pos.0 + drift.0, pos.1 + drift.1)
        };
        let [ty, tp] = [0, 1].map(|i| p.gaze_tremor[i] * osc[i].step(rng));
        let yaw = base_yaw + ty + GAZE_SENSOR_NOISE * gauss(rng);
        let pitch = base_pitch + tp + GAZE_SENSOR_NOISE * gauss(rng);
        samples.push(GazeSample::new(
            t,
            wrap_degrees(yaw),
            pitch.clamp(-90.0, 90.0),
        ));
    }
    Trace::new(samples, rate).expect("positive rate")
}

/// Brief purposeful movements: raised-cosine excursions that start at
/// random (Poisson) times and return to rest.
struct Swings {
    chance: f64,
    rate: f64,
    reach: f64,
    turn: f64,
    active: Vec<(f64, f64, Vec3, Vec3)>,
}

impl Swings {
    fn new(per_second: f64, reach: f64, turn: f64, rate: f64) -> Self {
        Swings {
            chance: per_second / rate,
            rate,
            reach,
            turn,
            active: Vec::new(),
        }
    }

    fn direction(rng: &mut StreamRng) -> Vec3 {
        Vec3::new(gauss(rng), gauss(rng), gauss(rng)).normalized()
    }

    /// (position offset, yaw/pitch/roll offset) at sample `k`.
    fn step(&mut self, k: usize, rng: &mut StreamRng) -> (Vec3, Vec3) {
        let t = k as f64 / self.rate;
        if rng.random_bool(self.chance.min(1.0)) {
            let len = rng.random_range(SWING_LENGTH.0..SWING_LENGTH.1);
            let d = Swings::direction(rng) * (self.reach * rng.random_range(0.3..1.0));
            let r = Swings::direction(rng) * (self.turn * rng.random_range(0.3..1.0));
            self.active.push((t, len, d, r));
        }
        self.active.retain(|(t0, len, _, _)| t < t0 + len);
        self.active
            .iter()
            .fold((Vec3::ZERO, Vec3::ZERO), |(p, r), (t0, len, d, rot)| {
                let w = 0.5 - 0.5 * (TAU * (t - t0) / len).cos();
                (p + *d * w, r + *rot * w)
            })
    }
}

fn noise(rng: &mut StreamRng, sigma: f64) -> Vec3 {
    Vec3::new(gauss(rng), gauss(rng), gauss(rng)) * sigma
}

/// Standing user: head swaying around their height, hands working in a
/// loose rhythm inside their reach, every hand shaking with its own tremor.
pub fn synth_body(p: &UserProfile, duration: f64, rate: f64, rng: &mut StreamRng) -> BodyTrace {
    let n = frame_count(duration, rate);
    let origin = Vec3::new(0.02 * gauss(rng), 0.0, 0.02 * gauss(rng));
    let sway_tc = 1.0 / (TAU * p.sway_freq);
    let mut sway = [1.0, 0.3, 0.7].map(|s| Wander::new(s * p.sway_amp, sway_tc, rate, rng));
    // head yaw/pitch/roll in radians
    let mut look = [0.2, 0.08, 0.03].map(|s| Wander::new(s, 1.5, rate, rng));
    let mut rhythm = Oscillator::new(p.hand_freq, rate, 0.0, rng);
    let mut tempo = Wander::new(0.1, 2.0, rate, rng);
    let mut effort = Wander::new(0.3, 2.0, rate, rng);
    let mut swings = [0, 1].map(|_| Swings::new(SWINGS_PER_SECOND, 0.25, 0.6, rate));
    let mut wrist = [0, 1].map(|_| [0.15, 0.15, 0.15].map(|s| Wander::new(s, 0.8, rate, rng)));
    let mut shake =
        [0, 1].map(|i| [0, 1, 2].map(|_| Oscillator::tremor(p.hand_tremor_freq[i], rate, rng)));

    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / rate;
        let [sx, sy, sz] = sway.each_mut().map(|w| w.step(rng));
        let head = origin + Vec3::new(sx, p.height + sy, sz) + noise(rng, BODY_SENSOR_NOISE);
        let [yaw, pitch, roll] = look.each_mut().map(|w| w.step(rng));
        let head_q = Quat::from_yaw_pitch_roll(yaw, pitch - 0.09, roll);

        rhythm.step = TAU * p.hand_freq * (1.0 + tempo.step(rng)) / rate;
        let phase = rhythm.advance(rng);
        // Reach geometry scales with arm span.
        let span = p.wingspan;
        let amp = p.hand_amp * span / 1.7 * (1.0 + effort.step(rng)).max(0.2);
        let mut hands = [(Vec3::ZERO, Quat::IDENTITY); 2];
        for (i, side) in [-1.0, 1.0].into_iter().enumerate() {
            let ph = phase + if i == 1 { p.hand_phase } else { 0.0 };
            let (s, c) = ph.sin_cos();
            let reach = 0.55 + 0.35 * (0.5 + 0.5 * s);
            let rel = Vec3::new(
                side * 0.5 * span * reach,
                -0.18 * span + amp * c,
                -0.15 * span - 0.5 * amp * (1.0 + s),
            );
            let shook = Vec3::new(
                shake[i][0].step(rng),
                shake[i][1].step(rng),
                shake[i][2].step(rng),
            );
            let tremor = shook * p.hand_tremor[i];
            let (reach, turn) = swings[i].step(k, rng);
            // the same tremor rocks the controller about the wrist
            let twist = shook * (p.hand_tremor[i] / WRIST_LEVER);
            let [wy, wp, wr] = wrist[i].each_mut().map(|w| w.step(rng));
            let (wy, wp, wr) = (
                wy + twist.y + turn.y,
                wp + twist.x + turn.x,
                wr + twist.z + turn.z,
            );
            let q = Quat::from_yaw_pitch_roll(
                side * 0.3 + 0.25 * c + wy,
                -0.4 + 0.3 * s + wp,
                side * 0.2 * c + wr,
            );
            hands[i] = (
                head + rel + reach * (span / 1.7) + tremor + noise(rng, BODY_SENSOR_NOISE),
                q,
            );
        }
        samples.push(BodySample {
            t,
            head: Pose::new(head, head_q),
            left: Pose::new(hands[0].0, hands[0].1),
            right: Pose::new(hands[1].0, hands[1].1),
        });
    }
    Trace::new(samples, rate).expect("positive rate")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::validate_trace;

    #[test]
    fn rejects_bad_counts() {
        assert!(synth_population(1, 2, 10.0, 50.0, 0).is_err());
        assert!(synth_population(5, 1, 10.0, 50.0, 0).is_err());
        assert!(synth_population(5, 2, 0.0, 50.0, 0).is_err());
    }

    #[test]
    fn distinct_heights() {
        let pop = synth_population(10, 2, 2.0, 50.0, SynthParams::default().seed).unwrap();
        let h: Vec<f64> = pop.profiles.iter().map(|(_, p)| p.height).collect();
        for i in 0..h.len() {
            for j in i + 1..h.len() {
                assert!((h[i] - h[j]).abs() > 0.001, "{} vs {}", h[i], h[j]);
            }
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = synth_population(4, 2, 5.0, 50.0, 7).unwrap();
        let b = synth_population(4, 2, 5.0, 50.0, 7).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = synth_population(4, 2, 5.0, 50.0, 8).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn output_is_valid() {
        let pop = synth_population(6, 3, 20.0, 50.0, 3).unwrap();
        assert_eq!(pop.dataset.len(), 6);
        for s in pop.dataset.iter() {
            let g = s.gaze.as_ref().unwrap();
            let b = s.body.as_ref().unwrap();
            assert_eq!(g.len(), 1000);
            assert_eq!(b.len(), 1000);
            assert!(validate_trace(g).is_empty(), "{}", validate_trace(g));
            assert!(validate_trace(b).is_empty(), "{}", validate_trace(b));
            for x in g.samples() {
                assert!((x.direction().norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sessions_resemble_their_user() {
        // Mean head height: same-user sessions differ far less than users do.
        let pop = synth_population(8, 2, 20.0, 50.0, 5).unwrap();
        let mean_y = |s: &Session| {
            let b = s.body.as_ref().unwrap();
            b.samples().iter().map(|x| x.head.position.y).sum::<f64>() / b.len() as f64
        };
        let per_user: Vec<(f64, f64)> = pop
            .dataset
            .identities()
            .map(|id| {
                let s = pop.dataset.sessions(id);
                (mean_y(&s[0]), mean_y(&s[1]))
            })
            .collect();
        let within: f64 =
            per_user.iter().map(|(a, b)| (a - b).abs()).sum::<f64>() / per_user.len() as f64;
        let mut between = 0.0;
        let mut count = 0;
        for i in 0..per_user.len() {
            for j in 0..per_user.len() {
                if i != j {
                    between += (per_user[i].0 - per_user[j].1).abs();
                    count += 1;
                }
            }
        }
        assert!(within < between / count as f64 / 5.0);
    }
}
