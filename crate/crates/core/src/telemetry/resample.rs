use super::{Sample, Trace};
use crate::error::{Error, Result};

/// Resamples onto the uniform grid `t0 + k / target_rate` covering the input span.
///
/// Grid points that coincide with an input timestamp copy that sample
/// unchanged, so resampling a trace already on the grid is the identity.
pub fn resample<S: Sample>(trace: &Trace<S>, target_rate: f64) -> Result<Trace<S>> {
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "target rate must be positive, got {target_rate}"
        )));
    }
    let samples = trace.samples();
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let t0 = samples[0].t();
    let span = samples[samples.len() - 1].t() - t0;
    let steps = (span * target_rate + 1e-9).floor() as usize;

    let mut out = Vec::with_capacity(steps + 1);
    let mut seg = 0;
    for k in 0..=steps {
        let t = t0 + k as f64 / target_rate;
        while seg + 1 < samples.len() && samples[seg + 1].t() <= t {
            seg += 1;
        }
        let a = &samples[seg];
        if a.t() == t || seg + 1 == samples.len() {
            out.push(a.with_t(t));
            continue;
        }
        let b = &samples[seg + 1];
        let frac = (t - a.t()) / (b.t() - a.t());
        out.push(S::interpolate(a, b, frac).with_t(t));
    }
    Trace::new(out, target_rate)
}
