//! Privacy-utility sweeps, Pareto frontiers and threshold-constrained
//! operating points.
//!
//! A sweep expands a mechanism template over an explicit parameter grid,
//! runs the identifier on the protected streams of one modality and scores
//! the same protected streams against the originals with one utility metric.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{aoi_sequence_from, interception_task_from};
use crate::error::{Error, Result};
use crate::identifier::{body_block, evaluate_blocks, gaze_block, Modality, Protocol};
use crate::mechanisms::{apply, MechanismConfig, StreamKind};
use crate::metrics::{
    angular_distance, aoi_accuracy, euclidean_distance, score_difference, UtilityKind, UtilityValue,
};
use crate::seed::{label_hash, mix, stream_seed, BODY_TAG, GAZE_TAG};
use crate::telemetry::{write_atomic, Dataset, Session};

const TASK_TAG: u64 = 0x7461_736b;

pub const SWEEP_HEADER: [&str; 6] = [
    "mechanism",
    "params",
    "rank1_ir",
    "utility_kind",
    "utility_value",
    "feasible",
];

/// Reference tasks used by the task-based utility metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    /// Interception targets per body session.
    pub targets: usize,
    /// Target sphere radius, meters.
    pub target_radius: f64,
    /// Target window, seconds.
    pub target_window: f64,
    /// Shortest fixation that becomes an AOI, seconds.
    pub aoi_min_fixation: f64,
    /// AOI radius, degrees.
    pub aoi_radius: f64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            targets: 20,
            target_radius: 0.2,
            target_window: 0.5,
            aoi_min_fixation: 0.1,
            aoi_radius: 3.0,
        }
    }
}

/// One sweep: a mechanism template, its grid, and what to measure.
///
/// `mechanism` is either a bare family name, expanded to
/// `family(key=value, ...)` for every grid entry, or an expression with
/// `{key}` placeholders, e.g. `composite(motion_retarget, smoothing(B={B}))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub mechanism: String,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
    pub modality: StreamKind,
    pub metric: UtilityKind,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub task: TaskSpec,
}

/// Whether a metric measures the given stream.
pub fn metric_fits(metric: UtilityKind, modality: StreamKind) -> bool {
    match metric {
        UtilityKind::AngularDeg | UtilityKind::AoiAccuracy => modality == StreamKind::Gaze,
        UtilityKind::EuclideanMeters | UtilityKind::ScorePoints | UtilityKind::ScoreRatio => {
            modality == StreamKind::Body
        }
    }
}

fn format_value(v: f64) -> String {
    format!("{v}")
}

impl SweepSpec {
    /// Grid entries in order: keys sorted, the last key varying fastest.
    pub fn expressions(&self) -> Result<Vec<String>> {
        if let Some((k, _)) = self.grid.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::InvalidConfig(format!("grid `{k}` has no values")));
        }
        let mut combos: Vec<Vec<(&str, f64)>> = vec![Vec::new()];
        for (k, values) in &self.grid {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |&v| {
                        let mut c = c.clone();
                        c.push((k.as_str(), v));
                        c
                    })
                })
                .collect();
        }
        let template = self.mechanism.trim();
        if template.is_empty() {
            return Err(Error::InvalidConfig("empty mechanism".into()));
        }
        let bare = template
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_');
        let exprs = combos
            .into_iter()
            .map(|combo| {
                if bare {
                    if combo.is_empty() {
                        return Ok(template.to_string());
                    }
                    let args: Vec<String> = combo
                        .iter()
                        .map(|(k, v)| format!("{k}={}", format_value(*v)))
                        .collect();
                    return Ok(format!("{template}({})", args.join(", ")));
                }
                let mut e = template.to_string();
                for (k, v) in &combo {
                    let slot = format!("{{{k}}}");
                    if !e.contains(&slot) {
                        return Err(Error::InvalidConfig(format!(
                            "grid key `{k}` has no placeholder in `{template}`"
                        )));
                    }
                    e = e.replace(&slot, &format_value(*v));
                }
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(exprs)
    }

    /// Parsed configs for every grid entry.
    pub fn configs(&self) -> Result<Vec<MechanismConfig>> {
        self.expressions()?.iter().map(|e| e.parse()).collect()
    }

    /// Everything that can be checked without evaluating anything.
    pub fn check(&self) -> Result<Vec<MechanismConfig>> {
        if !metric_fits(self.metric, self.modality) {
            return Err(Error::IncompatibleMetric {
                metric: self.metric.name(),
                modality: self.modality.name(),
            });
        }
        self.protocol.check()?;
        let t = &self.task;
        if t.targets == 0
            || !(t.target_radius > 0.0 && t.target_window > 0.0)
            || !(t.aoi_min_fixation > 0.0 && t.aoi_radius > 0.0)
        {
            return Err(Error::InvalidConfig(format!("invalid task spec {t:?}")));
        }
        let configs = self.configs()?;
        for c in &configs {
            if !c.supports(self.modality) {
                return Err(Error::InvalidConfig(format!(
                    "`{c}` does not run on {} streams",
                    self.modality.name()
                )));
            }
        }
        Ok(configs)
    }
}

/// One evaluated grid entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub config: MechanismConfig,
    /// Rank-1 identification rate, percent.
    pub privacy: f64,
    pub utility: UtilityValue,
}

impl TradeoffPoint {
    pub fn degradation(&self) -> f64 {
        self.utility.degradation()
    }
}

impl fmt::Display for TradeoffPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (rank1_ir={:.2}, {})",
            self.config, self.privacy, self.utility
        )
    }
}

fn stream_tag(modality: StreamKind) -> u64 {
    match modality {
        StreamKind::Gaze => GAZE_TAG,
        StreamKind::Body => BODY_TAG,
    }
}

fn session_utility(s: &Session, config: &MechanismConfig, spec: &SweepSpec) -> Result<f64> {
    let seed = stream_seed(
        spec.protocol.seed,
        &s.identity,
        s.session_index,
        stream_tag(spec.modality),
    );
    let task = &spec.task;
    match spec.modality {
        StreamKind::Gaze => {
            let orig = s.gaze.as_ref().ok_or(Error::MissingModality("gaze"))?;
            let anon = apply(config, orig, seed)?;
            match spec.metric {
                UtilityKind::AngularDeg => Ok(angular_distance(orig, &anon)?.value),
                UtilityKind::AoiAccuracy => {
                    let aois = aoi_sequence_from(orig, task.aoi_min_fixation, task.aoi_radius)?;
                    Ok(aoi_accuracy(&anon, &aois).value)
                }
                _ => unreachable!("checked by metric_fits"),
            }
        }
        StreamKind::Body => {
            let orig = s.body.as_ref().ok_or(Error::MissingModality("body"))?;
            let anon = apply(config, orig, seed)?;
            match spec.metric {
                UtilityKind::EuclideanMeters => Ok(euclidean_distance(orig, &anon)?.value),
                UtilityKind::ScorePoints | UtilityKind::ScoreRatio => {
                    let task_seed = mix(
                        spec.protocol.seed,
                        &[label_hash(&s.identity), s.session_index as u64, TASK_TAG],
                    );
                    let t = interception_task_from(
                        orig,
                        task.targets,
                        task.target_radius,
                        task.target_window,
                        task_seed,
                    )?;
                    let d = score_difference(orig, &anon, &t)?;
                    Ok(if spec.metric == UtilityKind::ScorePoints {
                        d.points
                    } else {
                        d.ratio
                    })
                }
                _ => unreachable!("checked by metric_fits"),
            }
        }
    }
}

/// Mean utility over every session of the dataset.
fn utility(ds: &Dataset, config: &MechanismConfig, spec: &SweepSpec) -> Result<UtilityValue> {
    let sessions: Vec<&Session> = ds.iter().collect();
    if sessions.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let values = sessions
        .par_iter()
        .map(|s| session_utility(s, config, spec))
        .collect::<Result<Vec<_>>>()?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(UtilityValue::new(spec.metric, mean))
}

fn privacy(ds: &Dataset, config: &MechanismConfig, spec: &SweepSpec) -> Result<f64> {
    let identity = MechanismConfig::Identity;
    let (report, modality) = match spec.modality {
        StreamKind::Gaze => {
            let block =
                gaze_block(ds, config, &spec.protocol)?.ok_or(Error::MissingModality("gaze"))?;
            let r = evaluate_blocks(Some(&block), None, config, &identity, &spec.protocol)?;
            (r, Modality::GazeOnly)
        }
        StreamKind::Body => {
            let block =
                body_block(ds, config, &spec.protocol)?.ok_or(Error::MissingModality("body"))?;
            let r = evaluate_blocks(None, Some(&block), &identity, config, &spec.protocol)?;
            (r, Modality::BodyOnly)
        }
    };
    report
        .rank1_ir(modality)
        .ok_or(Error::MissingModality(modality.name()))
}

/// Evaluates every grid entry; output is in grid order.
pub fn run_sweep(ds: &Dataset, spec: &SweepSpec) -> Result<Vec<TradeoffPoint>> {
    let configs = spec.check()?;
    let need = match spec.modality {
        StreamKind::Gaze => ds.iter().all(|s| s.gaze.is_some()),
        StreamKind::Body => ds.iter().all(|s| s.body.is_some()),
    };
    if !need {
        return Err(Error::MissingModality(spec.modality.name()));
    }
    configs
        .into_par_iter()
        .map(|config| {
            let privacy = privacy(ds, &config, spec)?;
            let utility = utility(ds, &config, spec)?;
            Ok(TradeoffPoint {
                config,
                privacy,
                utility,
            })
        })
        .collect()
}

/// A usability bound on one utility metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsabilityThreshold {
    MaxAngularDeg(f64),
    MaxEuclideanMeters(f64),
    MinScoreRatio(f64),
    MaxScorePoints(f64),
    MinAoiAccuracy(f64),
}

impl UsabilityThreshold {
    pub const GAZE_DEG: f64 = 2.0;
    pub const BODY_METERS: f64 = 0.21;
    pub const SCORE_RATIO: f64 = 0.8;

    /// The standard bound for a metric, where one exists.
    pub fn default_for(kind: UtilityKind) -> Option<Self> {
        match kind {
            UtilityKind::AngularDeg => Some(UsabilityThreshold::MaxAngularDeg(Self::GAZE_DEG)),
            UtilityKind::EuclideanMeters => {
                Some(UsabilityThreshold::MaxEuclideanMeters(Self::BODY_METERS))
            }
            UtilityKind::ScoreRatio => Some(UsabilityThreshold::MinScoreRatio(Self::SCORE_RATIO)),
            UtilityKind::ScorePoints | UtilityKind::AoiAccuracy => None,
        }
    }

    /// Bound of the natural direction for `kind`.
    pub fn with_bound(kind: UtilityKind, bound: f64) -> Self {
        match kind {
            UtilityKind::AngularDeg => UsabilityThreshold::MaxAngularDeg(bound),
            UtilityKind::EuclideanMeters => UsabilityThreshold::MaxEuclideanMeters(bound),
            UtilityKind::ScoreRatio => UsabilityThreshold::MinScoreRatio(bound),
            UtilityKind::ScorePoints => UsabilityThreshold::MaxScorePoints(bound),
            UtilityKind::AoiAccuracy => UsabilityThreshold::MinAoiAccuracy(bound),
        }
    }

    pub fn kind(&self) -> UtilityKind {
        match self {
            UsabilityThreshold::MaxAngularDeg(_) => UtilityKind::AngularDeg,
            UsabilityThreshold::MaxEuclideanMeters(_) => UtilityKind::EuclideanMeters,
            UsabilityThreshold::MinScoreRatio(_) => UtilityKind::ScoreRatio,
            UsabilityThreshold::MaxScorePoints(_) => UtilityKind::ScorePoints,
            UsabilityThreshold::MinAoiAccuracy(_) => UtilityKind::AoiAccuracy,
        }
    }

    pub fn bound(&self) -> f64 {
        match *self {
            UsabilityThreshold::MaxAngularDeg(b)
            | UsabilityThreshold::MaxEuclideanMeters(b)
            | UsabilityThreshold::MinScoreRatio(b)
            | UsabilityThreshold::MaxScorePoints(b)
            | UsabilityThreshold::MinAoiAccuracy(b) => b,
        }
    }

    /// How far `u` is outside the bound; 0 when satisfied.
    pub fn violation(&self, u: &UtilityValue) -> f64 {
        let b = self.bound();
        if self.kind().higher_is_better() {
            (b - u.value).max(0.0)
        } else {
            (u.value - b).max(0.0)
        }
    }

    pub fn satisfied_by(&self, u: &UtilityValue) -> bool {
        if u.kind != self.kind() || u.value.is_nan() {
            return false;
        }
        if self.kind().higher_is_better() {
            u.value >= self.bound()
        } else {
            u.value <= self.bound()
        }
    }
}

impl fmt::Display for UsabilityThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.kind().higher_is_better() {
            ">="
        } else {
            "<="
        };
        write!(f, "{} {op} {}", self.kind(), self.bound())
    }
}

fn by_ir_then_degradation(a: &TradeoffPoint, b: &TradeoffPoint) -> Ordering {
    a.privacy
        .total_cmp(&b.privacy)
        .then(a.degradation().total_cmp(&b.degradation()))
}

/// Points no other point dominates, sorted by IR ascending (then
/// degradation, then input order). Exact duplicates are all kept.
pub fn pareto_frontier(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| by_ir_then_degradation(&points[i], &points[j]).then(i.cmp(&j)));
    let mut out = Vec::new();
    let mut best = f64::INFINITY;
    let mut k = 0;
    while k < order.len() {
        let ir = points[order[k]].privacy;
        let mut end = k;
        while end < order.len() && points[order[end]].privacy.total_cmp(&ir).is_eq() {
            end += 1;
        }
        // sorted, so the group's first entry carries its minimum degradation
        let group_min = points[order[k]].degradation();
        if group_min < best {
            out.extend(
                order[k..end]
                    .iter()
                    .filter(|&&i| points[i].degradation().total_cmp(&group_min).is_eq())
                    .map(|&i| points[i].clone()),
            );
            best = group_min;
        }
        k = end;
    }
    out
}

/// Lowest-IR point meeting the threshold; ties go to smaller degradation,
/// then to the earlier point.
pub fn select_operating_point(
    points: &[TradeoffPoint],
    threshold: &UsabilityThreshold,
) -> Result<TradeoffPoint> {
    if points.is_empty() {
        return Err(Error::Empty("tradeoff points"));
    }
    if let Some(p) = points.iter().find(|p| p.utility.kind != threshold.kind()) {
        return Err(Error::InvalidConfig(format!(
            "threshold on {} cannot judge a {} point",
            threshold.kind(),
            p.utility.kind
        )));
    }
    let best = points
        .iter()
        .filter(|p| threshold.satisfied_by(&p.utility))
        .min_by(|a, b| by_ir_then_degradation(a, b));
    match best {
        Some(p) => Ok(p.clone()),
        None => {
            let closest = points
                .iter()
                .min_by(|a, b| {
                    threshold
                        .violation(&a.utility)
                        .total_cmp(&threshold.violation(&b.utility))
                        .then(by_ir_then_degradation(a, b))
                })
                .expect("non-empty");
            Err(Error::ThresholdInfeasible {
                threshold: threshold.to_string(),
                closest: closest.to_string(),
            })
        }
    }
}

/// Sweep CSV; `feasible` is left empty without a threshold.
pub fn sweep_csv_bytes(
    points: &[TradeoffPoint],
    threshold: Option<&UsabilityThreshold>,
) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for p in points {
        let feasible = threshold
            .map(|t| t.satisfied_by(&p.utility).to_string())
            .unwrap_or_default();
        w.write_record([
            p.config.family().to_string(),
            p.config.params(),
            format!("{:.6}", p.privacy),
            p.utility.kind.name().to_string(),
            format!("{:.6}", p.utility.value),
            feasible,
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv buffer: {e}")))
}

pub fn write_sweep_csv(
    path: &Path,
    points: &[TradeoffPoint],
    threshold: Option<&UsabilityThreshold>,
) -> Result<()> {
    write_atomic(path, &sweep_csv_bytes(points, threshold)?)
}
