use super::{Sample, Trace};

const EPS: f64 = 1e-9;

/// Splits a trace into windows `[t0 + k*stride, t0 + k*stride + duration)`.
///
/// Only windows lying inside the covered span (last timestamp plus one
/// nominal period) are produced. Windows holding fewer than half of the
/// expected `duration * nominal_rate` samples are dropped, never padded.
pub fn window<S: Sample>(trace: &Trace<S>, duration: f64, stride: f64) -> Vec<Trace<S>> {
    let (Some(t0), Some(_)) = (trace.start(), trace.end()) else {
        return Vec::new();
    };
    if !(duration > 0.0 && stride > 0.0) {
        return Vec::new();
    }
    let covered_end = t0 + trace.duration();
    let min_count = duration * trace.nominal_rate() * 0.5;
    let samples = trace.samples();

    let mut out = Vec::new();
    let mut lo = 0;
    for k in 0.. {
        let start = t0 + k as f64 * stride;
        let end = start + duration;
        if end > covered_end + EPS {
            break;
        }
        while lo < samples.len() && samples[lo].t() < start - EPS {
            lo += 1;
        }
        let hi = lo + samples[lo..].partition_point(|s| s.t() < end - EPS);
        if ((hi - lo) as f64) < min_count {
            continue;
        }
        out.push(trace.with_samples(samples[lo..hi].to_vec()));
    }
    out
}
