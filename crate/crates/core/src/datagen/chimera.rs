use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::seed::rng_from_seed;
use crate::telemetry::{resample, Dataset, Sample, Session, Trace};

/// One multimodal identity: the gaze of one person, the body of another.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChimeraPair {
    pub gaze_identity: String,
    pub body_identity: String,
}

impl ChimeraPair {
    /// Label of the merged identity.
    pub fn label(&self) -> String {
        format!("{}+{}", self.gaze_identity, self.body_identity)
    }
}

/// Random one-to-one pairing of gaze and body identities.
///
/// Each round draws a uniform index into each remaining list and removes
/// both picks, until one list is exhausted.
pub fn build_chimera(gaze: &[String], body: &[String], seed: u64) -> Vec<ChimeraPair> {
    let mut rng = rng_from_seed(seed);
    let mut g = gaze.to_vec();
    let mut b = body.to_vec();
    let mut pairs = Vec::with_capacity(g.len().min(b.len()));
    while !g.is_empty() && !b.is_empty() {
        let i = rng.random_range(0..g.len());
        let j = rng.random_range(0..b.len());
        pairs.push(ChimeraPair {
            gaze_identity: g.remove(i),
            body_identity: b.remove(j),
        });
    }
    pairs
}

/// Resamples onto `k / rate` starting at zero.
fn rebased<S: Sample>(trace: &Trace<S>, rate: f64) -> Result<Trace<S>> {
    let r = resample(trace, rate)?;
    let samples = r
        .samples()
        .iter()
        .enumerate()
        .map(|(k, s)| s.with_t(k as f64 / rate))
        .collect();
    Trace::new(samples, rate)
}

/// Builds the multimodal dataset for `pairs`.
///
/// Session `j` of a chimeric identity joins session `j` of both sources,
/// each resampled to `target_rate`, re-based to start at zero and cut to
/// the shorter of the two. Pairs without at least two common sessions are
/// skipped with a warning.
pub fn merge_chimera(
    pairs: &[ChimeraPair],
    gaze_dataset: &Dataset,
    body_dataset: &Dataset,
    target_rate: f64,
) -> Result<Dataset> {
    let mut out = Dataset::new();
    'pairs: for pair in pairs {
        let gaze_sessions = gaze_dataset.sessions(&pair.gaze_identity);
        let mut merged = Vec::new();
        for gs in gaze_sessions {
            let Some(bs) = body_dataset.session(&pair.body_identity, gs.session_index) else {
                continue;
            };
            let (Some(g), Some(b)) = (&gs.gaze, &bs.body) else {
                continue;
            };
            if g.len() < 2 || b.len() < 2 {
                log::warn!(
                    "chimera {}: session {} too short, skipping pair",
                    pair.label(),
                    gs.session_index
                );
                continue 'pairs;
            }
            let g = rebased(g, target_rate)?;
            let b = rebased(b, target_rate)?;
            let end = g.duration().min(b.duration()) - 0.5 / target_rate;
            merged.push(Session::new(
                pair.label(),
                gs.session_index,
                Some(g.truncated(end)),
                Some(b.truncated(end)),
            )?);
        }
        if merged.len() < 2 {
            log::warn!(
                "chimera {}: fewer than two matching sessions, skipping pair",
                pair.label()
            );
            continue;
        }
        for s in merged {
            out.insert(s)?;
        }
    }
    Ok(out)
}
