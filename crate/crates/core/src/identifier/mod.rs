//! Gallery/probe re-identification with a statistical nearest-centroid
//! identifier.
//!
//! Sessions are cut into overlapping windows, each window becomes a feature
//! vector, and identities are enrolled as the normalized mean of their
//! first-session windows. A probe session is assigned by majority vote over
//! its windows' rank-1 matches.

mod features;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use features::{
    body_features, gaze_features, FeatureWeights, Normalizer, BODY_CHANNELS, BODY_DIM,
    FEATURES_PER_CHANNEL, GAZE_CHANNELS, GAZE_DIM,
};

use crate::error::{Error, Result};
use crate::mechanisms::{apply, MechanismConfig};
use crate::seed::{mix, rng_from_seed, stream_seed, BODY_TAG, GAZE_TAG};
use crate::telemetry::{window, write_atomic, Dataset, Session};

pub const DEFAULT_WINDOW: f64 = 10.0;
pub const DEFAULT_STRIDE: f64 = 5.0;
pub const DEFAULT_FOLDS: usize = 4;

const FOLD_TAG: u64 = 0x666f_6c64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    GazeOnly,
    BodyOnly,
    Multimodal,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::GazeOnly, Modality::BodyOnly, Modality::Multimodal];

    pub fn name(self) -> &'static str {
        match self {
            Modality::GazeOnly => "gaze",
            Modality::BodyOnly => "body",
            Modality::Multimodal => "multimodal",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fixed-length feature vector of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn normalized(&self) -> FeatureVector {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        FeatureVector::new(self.values.iter().map(|v| v / n).collect())
    }
}

/// Raw features of one session window for the requested modality.
///
/// Multimodal is the gaze block followed by the body block. Blocks are not
/// normalized here; see [`Normalizer`].
pub fn extract_features(window: &Session, modality: Modality) -> Result<FeatureVector> {
    let gaze = || {
        window
            .gaze
            .as_ref()
            .map(gaze_features)
            .ok_or(Error::MissingModality("gaze"))
    };
    let body = || {
        window
            .body
            .as_ref()
            .map(body_features)
            .ok_or(Error::MissingModality("body"))
    };
    Ok(FeatureVector::new(match modality {
        Modality::GazeOnly => gaze()?,
        Modality::BodyOnly => body()?,
        Modality::Multimodal => {
            let mut v = gaze()?;
            v.extend(body()?);
            v
        }
    }))
}

/// One unit-norm centroid per enrolled identity, sorted by label.
#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    labels: Vec<String>,
    centroids: Vec<FeatureVector>,
}

impl Gallery {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn centroids(&self) -> &[FeatureVector] {
        &self.centroids
    }

    pub fn centroid(&self, label: &str) -> Option<&FeatureVector> {
        self.labels
            .binary_search_by(|l| l.as_str().cmp(label))
            .ok()
            .map(|i| &self.centroids[i])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, FeatureVector::len)
    }
}

/// Builds the gallery from per-identity window embeddings.
pub fn enroll(windows: &BTreeMap<String, Vec<FeatureVector>>) -> Result<Gallery> {
    let mut dim = None;
    let mut labels = Vec::with_capacity(windows.len());
    let mut centroids = Vec::with_capacity(windows.len());
    for (label, vs) in windows {
        if vs.is_empty() {
            return Err(Error::EmptyIdentity(label.clone()));
        }
        let d = *dim.get_or_insert(vs[0].len());
        let mut sum = vec![0.0; d];
        for v in vs {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    probe: v.len(),
                    gallery: d,
                });
            }
            let v = v.normalized();
            for (s, x) in sum.iter_mut().zip(&v.values) {
                *s += x;
            }
        }
        labels.push(label.clone());
        centroids.push(FeatureVector::new(sum).normalized());
    }
    Ok(Gallery { labels, centroids })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub true_identity: String,
    /// (identity, cosine similarity), best first.
    pub ranking: Vec<(String, f64)>,
}

impl ProbeResult {
    pub fn top(&self) -> Option<&str> {
        self.ranking.first().map(|(l, _)| l.as_str())
    }

    pub fn is_hit(&self) -> bool {
        self.top() == Some(self.true_identity.as_str())
    }
}

fn cosine(a: &FeatureVector, unit_b: &FeatureVector) -> f64 {
    let n = a.norm();
    if n == 0.0 {
        return 0.0;
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(&unit_b.values)
        .map(|(x, y)| x * y)
        .sum();
    (dot / n).clamp(-1.0, 1.0)
}

fn by_similarity(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Ranks every gallery identity by cosine similarity to `probe`.
pub fn identify(
    probe: &FeatureVector,
    gallery: &Gallery,
    true_identity: &str,
) -> Result<ProbeResult> {
    if probe.len() != gallery.dim() {
        return Err(Error::DimensionMismatch {
            probe: probe.len(),
            gallery: gallery.dim(),
        });
    }
    let mut ranking: Vec<(String, f64)> = gallery
        .labels
        .iter()
        .zip(&gallery.centroids)
        .map(|(l, c)| (l.clone(), cosine(probe, c)))
        .collect();
    ranking.sort_by(by_similarity);
    Ok(ProbeResult {
        true_identity: true_identity.to_string(),
        ranking,
    })
}

/// Session-level decision from window-level rankings.
///
/// The identity ranked first by most windows wins; ties go to the higher
/// mean similarity over all windows, then to the smaller label.
pub fn vote(results: &[ProbeResult]) -> Option<String> {
    let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
    let mut sims: BTreeMap<&str, f64> = BTreeMap::new();
    for r in results {
        if let Some(top) = r.top() {
            *votes.entry(top).or_default() += 1;
        }
        for (l, s) in &r.ranking {
            *sims.entry(l.as_str()).or_default() += s;
        }
    }
    let best = *votes.values().max()?;
    votes
        .iter()
        .filter(|(_, &v)| v == best)
        .map(|(l, _)| (l.to_string(), sims[l]))
        .min_by(by_similarity)
        .map(|(l, _)| l)
}

/// Windowing and fold parameters of the matching protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub folds: usize,
    pub window: f64,
    pub stride: f64,
    pub seed: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            folds: DEFAULT_FOLDS,
            window: DEFAULT_WINDOW,
            stride: DEFAULT_STRIDE,
            seed: 0,
        }
    }
}

impl Protocol {
    pub fn with_seed(seed: u64) -> Self {
        Protocol {
            seed,
            ..Protocol::default()
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.folds == 0 {
            return Err(Error::InvalidConfig("folds must be >= 1".into()));
        }
        if !(self.window > 0.0 && self.stride > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "window and stride must be positive, got {} / {}",
                self.window, self.stride
            )));
        }
        Ok(())
    }
}

/// Raw window features of the gallery (first) and probe (second) session
/// of each identity, for one modality block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFeatures {
    per_identity: BTreeMap<String, [Vec<Vec<f64>>; 2]>,
}

impl BlockFeatures {
    pub fn identities(&self) -> impl Iterator<Item = &str> {
        self.per_identity.keys().map(String::as_str)
    }

    /// Raw gallery and probe window features of one identity.
    pub fn windows(&self, identity: &str) -> Option<&[Vec<Vec<f64>>; 2]> {
        self.per_identity.get(identity)
    }
}

fn session_windows<S: crate::telemetry::Sample>(
    trace: &crate::telemetry::Trace<S>,
    protocol: &Protocol,
) -> Vec<crate::telemetry::Trace<S>> {
    let ws = window(trace, protocol.window, protocol.stride);
    // Sessions shorter than one window still contribute as a single window.
    if ws.is_empty() && trace.len() >= 3 {
        vec![trace.clone()]
    } else {
        ws
    }
}

/// Identities usable for matching, warning about the rest.
fn eligible(ds: &Dataset) -> Result<Vec<&str>> {
    for id in ds.identities() {
        if ds.sessions(id).len() < 2 {
            log::warn!("identity `{id}` has fewer than 2 sessions; excluded");
        }
    }
    let ids = ds.eligible_identities();
    if ids.is_empty() {
        return Err(Error::Empty("identities with at least 2 sessions"));
    }
    Ok(ids)
}

fn pair<'a>(ds: &'a Dataset, id: &str) -> [&'a Session; 2] {
    let s = ds.sessions(id);
    [&s[0], &s[1]]
}

/// Mechanism-protected gaze window features; `None` when any eligible
/// session lacks gaze.
pub fn gaze_block(
    ds: &Dataset,
    mech: &MechanismConfig,
    protocol: &Protocol,
) -> Result<Option<BlockFeatures>> {
    protocol.check()?;
    let ids = eligible(ds)?;
    if ids
        .iter()
        .any(|id| pair(ds, id).iter().any(|s| s.gaze.is_none()))
    {
        return Ok(None);
    }
    let per_identity = ids
        .par_iter()
        .map(|&id| {
            let [g, p] = pair(ds, id).map(|s| {
                let trace = s.gaze.as_ref().expect("checked above");
                let seed = stream_seed(protocol.seed, id, s.session_index, GAZE_TAG);
                apply(mech, trace, seed).map(|t| {
                    session_windows(&t, protocol)
                        .iter()
                        .map(gaze_features)
                        .collect::<Vec<_>>()
                })
            });
            Ok((id.to_string(), [g?, p?]))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Some(BlockFeatures { per_identity }))
}

/// Mechanism-protected body window features; `None` when any eligible
/// session lacks body telemetry.
pub fn body_block(
    ds: &Dataset,
    mech: &MechanismConfig,
    protocol: &Protocol,
) -> Result<Option<BlockFeatures>> {
    protocol.check()?;
    let ids = eligible(ds)?;
    if ids
        .iter()
        .any(|id| pair(ds, id).iter().any(|s| s.body.is_none()))
    {
        return Ok(None);
    }
    let per_identity = ids
        .par_iter()
        .map(|&id| {
            let [g, p] = pair(ds, id).map(|s| {
                let trace = s.body.as_ref().expect("checked above");
                let seed = stream_seed(protocol.seed, id, s.session_index, BODY_TAG);
                apply(mech, trace, seed).map(|t| {
                    session_windows(&t, protocol)
                        .iter()
                        .map(body_features)
                        .collect::<Vec<_>>()
                })
            });
            Ok((id.to_string(), [g?, p?]))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Some(BlockFeatures { per_identity }))
}

/// Test folds: sorted identities shuffled under the seed, dealt round-robin.
pub fn assign_folds(identities: &[&str], folds: usize, seed: u64) -> Vec<Vec<String>> {
    let mut ids: Vec<String> = identities.iter().map(|s| s.to_string()).collect();
    ids.sort();
    let mut rng = rng_from_seed(mix(seed, &[FOLD_TAG]));
    ids.shuffle(&mut rng);
    let k = folds.min(ids.len()).max(1);
    let mut out = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        out[i % k].push(id);
    }
    for f in &mut out {
        f.sort();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub identities: Vec<String>,
    pub probes: usize,
    pub hits: usize,
    pub rank1_ir: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityReport {
    pub modality: Modality,
    pub rank1_ir: f64,
    pub probes: usize,
    pub hits: usize,
    pub folds: Vec<FoldResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub eye_mechanism: String,
    pub body_mechanism: String,
    pub protocol: Protocol,
    pub modalities: Vec<ModalityReport>,
}

impl EvalReport {
    pub fn modality(&self, m: Modality) -> Option<&ModalityReport> {
        self.modalities.iter().find(|r| r.modality == m)
    }

    pub fn rank1_ir(&self, m: Modality) -> Option<f64> {
        self.modality(m).map(|r| r.rank1_ir)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }
}

/// Fold-local features: gallery windows and probe windows per identity.
type FoldFeatures = BTreeMap<String, [Vec<FeatureVector>; 2]>;

/// Normalizes one block for a fold: z-scores from the fold's gallery
/// windows, then discriminability weights fitted on the same windows.
/// With `equalize` the block is scaled to unit expected squared norm so
/// concatenated blocks contribute evenly.
fn normalize_block(block: &BlockFeatures, fold: &[String], equalize: bool) -> FoldFeatures {
    let norm = Normalizer::fit(
        fold.iter()
            .flat_map(|id| block.per_identity[id][0].iter().map(Vec::as_slice)),
    );
    let z = |w: &Vec<f64>| match &norm {
        Some(n) => n.apply(w),
        None => w.clone(),
    };
    let gallery: Vec<Vec<Vec<f64>>> = fold
        .iter()
        .map(|id| block.per_identity[id][0].iter().map(z).collect())
        .collect();
    let weights = FeatureWeights::fit(&gallery);
    let scale = match (&weights, equalize) {
        (Some(w), true) => w.block_scale(),
        _ => 1.0,
    };
    let finish = |v: Vec<f64>| match &weights {
        Some(w) => FeatureVector::new(w.apply(&v, scale)),
        None => FeatureVector::new(v),
    };
    fold.iter()
        .map(|id| {
            let sides = block.per_identity[id]
                .each_ref()
                .map(|ws| ws.iter().map(|w| finish(z(w))).collect());
            (id.clone(), sides)
        })
        .collect()
}

fn concat(a: FoldFeatures, b: FoldFeatures) -> FoldFeatures {
    a.into_iter()
        .zip(b)
        .map(|((id, ga), (_, gb))| {
            let join = |x: &[FeatureVector], y: &[FeatureVector]| -> Vec<FeatureVector> {
                x.iter()
                    .zip(y)
                    .map(|(p, q)| {
                        let mut v = p.values.clone();
                        v.extend_from_slice(&q.values);
                        FeatureVector::new(v)
                    })
                    .collect()
            };
            let sides = [join(&ga[0], &gb[0]), join(&ga[1], &gb[1])];
            (id, sides)
        })
        .collect()
}

fn score_fold(features: &FoldFeatures) -> Result<usize> {
    let gallery_windows: BTreeMap<String, Vec<FeatureVector>> = features
        .iter()
        .map(|(id, [g, _])| (id.clone(), g.clone()))
        .collect();
    let gallery = enroll(&gallery_windows)?;
    let mut hits = 0;
    for (id, [_, probe]) in features {
        let results = probe
            .iter()
            .map(|w| identify(w, &gallery, id))
            .collect::<Result<Vec<_>>>()?;
        if vote(&results).as_deref() == Some(id.as_str()) {
            hits += 1;
        }
    }
    Ok(hits)
}

fn fold_features(
    m: Modality,
    gaze: Option<&BlockFeatures>,
    body: Option<&BlockFeatures>,
    fold: &[String],
) -> Option<FoldFeatures> {
    match m {
        Modality::GazeOnly => Some(normalize_block(gaze?, fold, false)),
        Modality::BodyOnly => Some(normalize_block(body?, fold, false)),
        Modality::Multimodal => {
            let (g, b) = (gaze?, body?);
            Some(concat(
                normalize_block(g, fold, true),
                normalize_block(b, fold, true),
            ))
        }
    }
}

/// Rank-1 evaluation from precomputed blocks.
pub fn evaluate_blocks(
    gaze: Option<&BlockFeatures>,
    body: Option<&BlockFeatures>,
    eye_mechanism: &MechanismConfig,
    body_mechanism: &MechanismConfig,
    protocol: &Protocol,
) -> Result<EvalReport> {
    protocol.check()?;
    let ids: Vec<&str> = gaze
        .or(body)
        .ok_or(Error::MissingModality("gaze or body"))?
        .per_identity
        .keys()
        .map(String::as_str)
        .collect();
    let folds = assign_folds(&ids, protocol.folds, protocol.seed);
    let mut modalities = Vec::new();
    for m in Modality::ALL {
        let per_fold = folds
            .par_iter()
            .enumerate()
            .map(|(i, fold)| {
                let Some(features) = fold_features(m, gaze, body, fold) else {
                    return Ok(None);
                };
                let hits = score_fold(&features)?;
                Ok(Some(FoldResult {
                    fold: i,
                    identities: fold.clone(),
                    probes: fold.len(),
                    hits,
                    rank1_ir: 100.0 * hits as f64 / fold.len() as f64,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let Some(per_fold) = per_fold.into_iter().collect::<Option<Vec<_>>>() else {
            continue;
        };
        let probes: usize = per_fold.iter().map(|f| f.probes).sum();
        let hits: usize = per_fold.iter().map(|f| f.hits).sum();
        modalities.push(ModalityReport {
            modality: m,
            rank1_ir: 100.0 * hits as f64 / probes as f64,
            probes,
            hits,
            folds: per_fold,
        });
    }
    Ok(EvalReport {
        eye_mechanism: eye_mechanism.to_string(),
        body_mechanism: body_mechanism.to_string(),
        protocol: *protocol,
        modalities,
    })
}

/// Full protocol: protect both sessions of every eligible identity with the
/// same configs, then score every modality the dataset supports.
pub fn evaluate(
    ds: &Dataset,
    eye_mechanism: &MechanismConfig,
    body_mechanism: &MechanismConfig,
    protocol: &Protocol,
) -> Result<EvalReport> {
    let gaze = gaze_block(ds, eye_mechanism, protocol)?;
    let body = body_block(ds, body_mechanism, protocol)?;
    evaluate_blocks(
        gaze.as_ref(),
        body.as_ref(),
        eye_mechanism,
        body_mechanism,
        protocol,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub body_mechanism: String,
    pub eye_mechanism: String,
    pub report: EvalReport,
}

/// Every (body, eye) pairing, rows by body mechanism.
///
/// Block features are computed once per mechanism, so a row shares its body
/// block and a column its gaze block exactly.
pub fn pairing_grid(
    ds: &Dataset,
    eye_mechs: &[MechanismConfig],
    body_mechs: &[MechanismConfig],
    protocol: &Protocol,
) -> Result<Vec<GridCell>> {
    if eye_mechs.is_empty() || body_mechs.is_empty() {
        return Err(Error::Empty("mechanism list"));
    }
    let gaze = eye_mechs
        .iter()
        .map(|m| gaze_block(ds, m, protocol))
        .collect::<Result<Vec<_>>>()?;
    let body = body_mechs
        .iter()
        .map(|m| body_block(ds, m, protocol))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = (0..body_mechs.len())
        .flat_map(|b| (0..eye_mechs.len()).map(move |e| (b, e)))
        .collect();
    cells
        .par_iter()
        .map(|&(b, e)| {
            let report = evaluate_blocks(
                gaze[e].as_ref(),
                body[b].as_ref(),
                &eye_mechs[e],
                &body_mechs[b],
                protocol,
            )?;
            Ok(GridCell {
                body_mechanism: body_mechs[b].to_string(),
                eye_mechanism: eye_mechs[e].to_string(),
                report,
            })
        })
        .collect()
}

pub const GRID_HEADER: [&str; 5] = ["body_mech", "eye_mech", "gaze_ir", "body_ir", "multi_ir"];

fn pct(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.1}"))
}

pub fn grid_csv_bytes(cells: &[GridCell]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GRID_HEADER)?;
    for c in cells {
        w.write_record([
            c.body_mechanism.clone(),
            c.eye_mechanism.clone(),
            pct(c.report.rank1_ir(Modality::GazeOnly)),
            pct(c.report.rank1_ir(Modality::BodyOnly)),
            pct(c.report.rank1_ir(Modality::Multimodal)),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv buffer: {e}")))
}

pub fn write_grid_csv(path: &Path, cells: &[GridCell]) -> Result<()> {
    write_atomic(path, &grid_csv_bytes(cells)?)
}
