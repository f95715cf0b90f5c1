use std::fmt;

use super::{Joint, Sample, Trace};

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NegativeTime(f64),
    NonMonotoneTime { previous: f64, current: f64 },
    NonFinite,
    NonUnitQuaternion { joint: Joint, norm: f64 },
    PitchOutOfRange(f64),
    YawOutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::NegativeTime(t) => write!(f, "negative timestamp {t}"),
            ViolationKind::NonMonotoneTime { previous, current } => {
                write!(f, "timestamp {current} does not follow {previous}")
            }
            ViolationKind::NonFinite => write!(f, "non-finite value"),
            ViolationKind::NonUnitQuaternion { joint, norm } => {
                write!(f, "{joint:?} quaternion has norm {norm}")
            }
            ViolationKind::PitchOutOfRange(p) => write!(f, "pitch {p} outside [-90, 90]"),
            ViolationKind::YawOutOfRange(y) => write!(f, "yaw {y} outside (-180, 180]"),
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in self.violations.iter().take(5) {
            write!(f, "; frame {}: {}", v.index, v.kind)?;
        }
        if self.violations.len() > 5 {
            write!(f, "; ...")?;
        }
        Ok(())
    }
}

/// Lists every invariant violation in `trace`; the trace itself is untouched.
pub fn validate_trace<S: Sample>(trace: &Trace<S>) -> ValidationReport {
    let mut violations = Vec::new();
    let mut kinds = Vec::new();
    let mut previous: Option<f64> = None;
    for (index, s) in trace.samples().iter().enumerate() {
        let t = s.t();
        if !t.is_finite() {
            violations.push(Violation {
                index,
                kind: ViolationKind::NonFinite,
            });
        } else {
            if t < 0.0 {
                violations.push(Violation {
                    index,
                    kind: ViolationKind::NegativeTime(t),
                });
            }
            if let Some(p) = previous {
                if t <= p {
                    violations.push(Violation {
                        index,
                        kind: ViolationKind::NonMonotoneTime {
                            previous: p,
                            current: t,
                        },
                    });
                }
            }
            previous = Some(t);
        }
        kinds.clear();
        s.check(&mut kinds);
        violations.extend(kinds.drain(..).map(|kind| Violation { index, kind }));
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Quat, Vec3};
    use crate::telemetry::{BodySample, GazeSample, Pose};

    fn gaze_trace(n: usize) -> Trace<GazeSample> {
        let samples = (0..n)
            .map(|i| GazeSample::new(i as f64 / 100.0, (i as f64).sin() * 20.0, 5.0))
            .collect();
        Trace::new(samples, 100.0).unwrap()
    }

    fn body(t: f64, q: Quat) -> BodySample {
        let p = Pose::new(Vec3::new(0.0, 1.7, 0.0), Quat::IDENTITY);
        BodySample {
            t,
            head: Pose::new(p.position, q),
            left: p,
            right: p,
        }
    }

    #[test]
    fn well_formed_trace_has_empty_report() {
        assert!(validate_trace(&gaze_trace(100)).is_empty());
    }

    #[test]
    fn equal_timestamps_flag_one_violation() {
        let mut s = gaze_trace(100).into_samples();
        s[40].t = s[39].t;
        let report = validate_trace(&Trace::new(s, 100.0).unwrap());
        assert_eq!(report.len(), 1);
        assert_eq!(report.violations[0].index, 40);
        assert!(matches!(
            report.violations[0].kind,
            ViolationKind::NonMonotoneTime { .. }
        ));
    }

    #[test]
    fn non_unit_quaternion_flagged() {
        let q = Quat::IDENTITY.scaled(1.01);
        let trace = Trace::new(vec![body(0.0, Quat::IDENTITY), body(0.1, q)], 10.0).unwrap();
        let report = validate_trace(&trace);
        assert_eq!(report.len(), 1);
        assert_eq!(report.violations[0].index, 1);
        assert!(matches!(
            report.violations[0].kind,
            ViolationKind::NonUnitQuaternion {
                joint: Joint::Head,
                ..
            }
        ));
    }

    #[test]
    fn range_and_finiteness_checks() {
        let trace = Trace::new(
            vec![
                GazeSample::new(-1.0, 0.0, 0.0),
                GazeSample::new(0.0, 0.0, 95.0),
                GazeSample::new(1.0, -180.0, 0.0),
                GazeSample::new(2.0, f64::NAN, 0.0),
            ],
            1.0,
        )
        .unwrap();
        let kinds: Vec<_> = validate_trace(&trace)
            .violations
            .into_iter()
            .map(|v| v.kind)
            .collect();
        assert!(matches!(kinds[0], ViolationKind::NegativeTime(_)));
        assert!(matches!(kinds[1], ViolationKind::PitchOutOfRange(_)));
        assert!(matches!(kinds[2], ViolationKind::YawOutOfRange(_)));
        assert!(matches!(kinds[3], ViolationKind::NonFinite));
    }
}
