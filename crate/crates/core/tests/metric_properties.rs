mod common;

use proptest::prelude::*;
use telemask_core::datagen::{interception_task_from, saccade_to_target, synth_population};
use telemask_core::geometry::{Quat, Vec3};
use telemask_core::mechanisms::{apply, MechanismConfig};
use telemask_core::metrics::{
    angular_distance, aoi_accuracy, euclidean_distance, interception_score, score_difference,
};
use telemask_core::telemetry::{
    angles_from_direction, direction_from_angles, BodySample, BodyTrace, GazeSample, GazeTrace,
    Pose,
};

use common::{random_body, random_gaze};

fn rotate_gaze(trace: &GazeTrace, q: Quat) -> GazeTrace {
    trace.with_samples(
        trace
            .samples()
            .iter()
            .map(|s| {
                let (yaw, pitch) =
                    angles_from_direction(q.rotate(direction_from_angles(s.yaw, s.pitch)));
                GazeSample::new(s.t, yaw, pitch)
            })
            .collect(),
    )
}

fn translate_body(trace: &BodyTrace, d: Vec3) -> BodyTrace {
    let mv = |p: &Pose| Pose::new(p.position + d, p.orientation);
    trace.with_samples(
        trace
            .samples()
            .iter()
            .map(|s| BodySample {
                t: s.t,
                head: mv(&s.head),
                left: mv(&s.left),
                right: mv(&s.right),
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn self_comparison_is_perfect(n in 1usize..300, seed in any::<u64>()) {
        let g = random_gaze(n, seed);
        prop_assert_eq!(angular_distance(&g, &g).unwrap().value, 0.0);
        let b = random_body(n.max(10), seed);
        prop_assert_eq!(euclidean_distance(&b, &b).unwrap().value, 0.0);
        let task = interception_task_from(&b, 10, 0.1, 0.001, seed).unwrap();
        let d = score_difference(&b, &b, &task).unwrap();
        prop_assert_eq!((d.points, d.ratio), (0.0, 1.0));
    }

    #[test]
    fn angular_distance_ignores_common_rotation(
        seed in any::<u64>(),
        axis in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        angle in -3.0..3.0f64,
    ) {
        let axis = Vec3::new(axis.0, axis.1, axis.2);
        prop_assume!(axis.norm() > 0.1);
        let q = Quat::from_axis_angle(axis.normalized(), angle);
        let a = random_gaze(200, seed);
        let b = apply(&MechanismConfig::Gaussian { sigma_gaze: 3.0, sigma_pos: 0.0 }, &a, seed).unwrap();
        let before = angular_distance(&a, &b).unwrap().value;
        let after = angular_distance(&rotate_gaze(&a, q), &rotate_gaze(&b, q)).unwrap().value;
        prop_assert!((before - after).abs() < 1e-6, "{} vs {}", before, after);
    }

    #[test]
    fn euclidean_distance_ignores_common_translation(
        seed in any::<u64>(),
        d in (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64),
    ) {
        let d = Vec3::new(d.0, d.1, d.2);
        let a = random_body(200, seed);
        let b = apply(&MechanismConfig::Gaussian { sigma_gaze: 0.0, sigma_pos: 0.05 }, &a, seed).unwrap();
        let before = euclidean_distance(&a, &b).unwrap().value;
        let after = euclidean_distance(&translate_body(&a, d), &translate_body(&b, d)).unwrap().value;
        prop_assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn samples_outside_windows_do_not_count(seed in any::<u64>(), extra in 1usize..50) {
        let b = random_body(400, seed);
        let task = interception_task_from(&b, 8, 0.2, 0.05, seed).unwrap();
        let score = interception_score(&b, &task).unwrap();
        // append far-away frames after every target window
        let end = b.end().unwrap();
        let mut samples = b.samples().to_vec();
        let last = *samples.last().unwrap();
        for k in 1..=extra {
            let far = Pose::new(Vec3::new(50.0, 50.0, 50.0), last.head.orientation);
            samples.push(BodySample { t: end + k as f64 * 0.01, head: far, left: far, right: far });
        }
        let longer = b.with_samples(samples);
        prop_assert_eq!(interception_score(&longer, &task).unwrap(), score);
    }
}

#[test]
fn heavy_position_noise_ruins_the_task() {
    let pop = synth_population(2, 2, 60.0, 50.0, 11).unwrap();
    let body = pop.dataset.iter().next().unwrap().body.clone().unwrap();
    let task = interception_task_from(&body, 40, 0.2, 0.5, 11).unwrap();
    let noisy = apply(
        &MechanismConfig::Gaussian {
            sigma_gaze: 0.0,
            sigma_pos: 2.0,
        },
        &body,
        11,
    )
    .unwrap();
    let d = score_difference(&body, &noisy, &task).unwrap();
    assert!(d.ratio < 0.5, "ratio {}", d.ratio);
}

#[test]
fn smoothing_barely_hurts_aoi_accuracy() {
    // 3 s dwell per target, 5 deg AOIs
    for seed in 0..5 {
        let (gaze, aois) = saccade_to_target(30, 3.0, 50.0, 5.0, seed).unwrap();
        let before = aoi_accuracy(&gaze, &aois).value;
        let smoothed = apply(&MechanismConfig::smoothing(25), &gaze, seed).unwrap();
        let after = aoi_accuracy(&smoothed, &aois).value;
        assert!(before - after <= 0.1, "seed {seed}: {before} -> {after}");
    }
}
