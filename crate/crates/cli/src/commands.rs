use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use telemask_core::datagen::{
    build_chimera, merge_chimera, synth_population, write_population, SynthParams,
};
use telemask_core::identifier::{evaluate, pairing_grid, write_grid_csv, Modality};
use telemask_core::mechanisms::{apply, MechanismConfig, StreamKind};
use telemask_core::metrics::{
    angular_distance, aoi_accuracy, euclidean_distance, score_difference, AoiSequence,
    InterceptionTask, UtilityKind,
};
use telemask_core::seed::{mix, stream_seed, BODY_TAG, GAZE_TAG};
use telemask_core::sweep::{
    pareto_frontier, run_sweep, select_operating_point, write_sweep_csv, SweepSpec, TaskSpec,
    UsabilityThreshold,
};
use telemask_core::telemetry::{
    body_csv_bytes, gaze_csv_bytes, read_body_csv, read_dataset, read_gaze_csv, session_dir,
    validate_trace, write_atomic, write_dataset, BodyTrace, Dataset, GazeTrace, Sample, Session,
    Trace, BODY_HEADER, GAZE_HEADER,
};
use telemask_core::Error;

use crate::{layered, write_manifest, Failure, Outcome, ProtocolArgs};

fn required<T: Clone>(v: &Option<T>, flag: &str) -> Outcome<T> {
    v.clone()
        .ok_or_else(|| Failure::Usage(format!("missing required option --{flag}")))
}

fn mechanism(expr: &str) -> Outcome<MechanismConfig> {
    Ok(expr.parse::<MechanismConfig>()?)
}

fn check<S: Sample>(trace: &Trace<S>, what: impl Fn() -> String) -> Outcome {
    let report = validate_trace(trace);
    if !report.is_empty() {
        return Err(Error::InvalidTrace(format!("{}: {report}", what())).into());
    }
    Ok(())
}

fn gaze_file(path: &Path) -> Outcome<GazeTrace> {
    let t = read_gaze_csv(path)?;
    check(&t, || path.display().to_string())?;
    Ok(t)
}

fn body_file(path: &Path) -> Outcome<BodyTrace> {
    let t = read_body_csv(path)?;
    check(&t, || path.display().to_string())?;
    Ok(t)
}

/// Reads and validates every session below `path`.
fn dataset(path: &Path) -> Outcome<Dataset> {
    let ds = read_dataset(path)?;
    if ds.is_empty() {
        return Err(Error::Empty("dataset (no identity_*/session_* directories)").into());
    }
    for s in ds.iter() {
        let dir = || session_dir(path, &s.identity, s.session_index);
        if let Some(g) = &s.gaze {
            check(g, || dir().join("gaze.csv").display().to_string())?;
        }
        if let Some(b) = &s.body {
            check(b, || dir().join("body.csv").display().to_string())?;
        }
    }
    log::info!(
        "{}: {} identities, {} sessions",
        path.display(),
        ds.len(),
        ds.iter().count()
    );
    Ok(ds)
}

fn to_json<T: Serialize>(v: &T) -> Outcome<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(Error::from)?;
    bytes.push(b'\n');
    Ok(bytes)
}

// synth ---------------------------------------------------------------

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SynthArgs {
    /// Output dataset directory.
    #[arg(long, value_name = "DIR")]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub users: Option<usize>,
    /// Sessions per user.
    #[arg(long)]
    pub sessions: Option<u32>,
    /// Session length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Sample rate in Hz.
    #[arg(long)]
    pub rate: Option<f64>,
}

layered!(SynthArgs {
    out,
    users,
    sessions,
    duration,
    rate
});

pub fn synth(mut a: SynthArgs, seed: u64) -> Outcome {
    let out = required(&a.out, "out")?;
    let d = SynthParams::default();
    let users = *a.users.get_or_insert(d.n_users);
    let sessions = *a.sessions.get_or_insert(d.sessions_per_user);
    let duration = *a.duration.get_or_insert(d.duration);
    let rate = *a.rate.get_or_insert(d.rate);
    let pop = synth_population(users, sessions, duration, rate, seed)?;
    write_population(&out, &pop)?;
    // fold the population listing into the run manifest
    let listing: Map<String, Value> = std::fs::read(out.join("manifest.json"))
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok())
        .unwrap_or_default();
    write_manifest(&out, "synth", seed, &a, listing)?;
    println!(
        "wrote {} identities x {} sessions to {}",
        users,
        sessions,
        out.display()
    );
    Ok(())
}

// chimera -------------------------------------------------------------

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct ChimeraArgs {
    /// Dataset supplying gaze telemetry.
    #[arg(long, value_name = "DIR")]
    pub gaze: Option<PathBuf>,
    /// Dataset supplying body telemetry.
    #[arg(long, value_name = "DIR")]
    pub body: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Common rate both streams are resampled to.
    #[arg(long)]
    pub rate: Option<f64>,
}

layered!(ChimeraArgs {
    gaze,
    body,
    out,
    rate
});

fn labels_with(ds: &Dataset, kind: StreamKind) -> Vec<String> {
    ds.identities()
        .filter(|id| {
            ds.sessions(id).iter().any(|s| match kind {
                StreamKind::Gaze => s.gaze.is_some(),
                StreamKind::Body => s.body.is_some(),
            })
        })
        .map(String::from)
        .collect()
}

pub fn chimera(mut a: ChimeraArgs, seed: u64) -> Outcome {
    let gaze_dir = required(&a.gaze, "gaze")?;
    let body_dir = required(&a.body, "body")?;
    let out = required(&a.out, "out")?;
    let rate = *a.rate.get_or_insert(50.0);
    let g = dataset(&gaze_dir)?;
    let b = dataset(&body_dir)?;
    let pairs = build_chimera(
        &labels_with(&g, StreamKind::Gaze),
        &labels_with(&b, StreamKind::Body),
        seed,
    );
    let merged = merge_chimera(&pairs, &g, &b, rate)?;
    if merged.is_empty() {
        return Err(Error::Empty("chimera dataset (no pair shares two sessions)").into());
    }
    write_dataset(&out, &merged)?;
    let mut extra = Map::new();
    extra.insert(
        "pairs".into(),
        serde_json::to_value(&pairs).map_err(Error::from)?,
    );
    extra.insert(
        "identities".into(),
        json!(merged.identities().collect::<Vec<_>>()),
    );
    write_manifest(&out, "chimera", seed, &a, extra)?;
    println!(
        "wrote {} chimeric identities to {}",
        merged.len(),
        out.display()
    );
    Ok(())
}

// anonymize -----------------------------------------------------------

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct AnonymizeArgs {
    /// A gaze.csv / body.csv file or a dataset directory.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Mechanism for every stream it supports.
    #[arg(long, value_name = "EXPR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<String>,
    /// Mechanism for gaze streams (overrides --mechanism).
    #[arg(long, value_name = "EXPR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eye: Option<String>,
    /// Mechanism for body streams (overrides --mechanism).
    #[arg(long, value_name = "EXPR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

layered!(AnonymizeArgs {
    input,
    out,
    mechanism,
    eye,
    body
});

impl AnonymizeArgs {
    fn pick(&self, kind: StreamKind) -> Outcome<Option<MechanismConfig>> {
        let explicit = match kind {
            StreamKind::Gaze => &self.eye,
            StreamKind::Body => &self.body,
        };
        if let Some(e) = explicit {
            return mechanism(e).map(Some);
        }
        match &self.mechanism {
            Some(e) => {
                let m = mechanism(e)?;
                Ok(m.supports(kind).then_some(m))
            }
            None => Ok(None),
        }
    }
}

fn csv_kind(path: &Path) -> Outcome<StreamKind> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let header: Vec<&str> = text
        .lines()
        .next()
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .collect();
    if header == GAZE_HEADER {
        Ok(StreamKind::Gaze)
    } else if header == BODY_HEADER {
        Ok(StreamKind::Body)
    } else {
        Err(Error::Format {
            path: path.into(),
            message: "header matches neither the gaze nor the body schema".into(),
        }
        .into())
    }
}

pub fn anonymize(a: AnonymizeArgs, seed: u64) -> Outcome {
    let input = required(&a.input, "input")?;
    let out = required(&a.out, "out")?;
    if a.mechanism.is_none() && a.eye.is_none() && a.body.is_none() {
        return Err(Failure::Usage("give --mechanism, --eye or --body".into()));
    }
    let eye = a.pick(StreamKind::Gaze)?;
    let body = a.pick(StreamKind::Body)?;
    if input.is_file() {
        let name = input.file_name().expect("a file has a name");
        let dest = out.join(name);
        if dest == input {
            return Err(Failure::Usage("output would overwrite the input".into()));
        }
        let kind = csv_kind(&input)?;
        let none = || Failure::Usage(format!("no mechanism applies to {} telemetry", kind.name()));
        let bytes = match kind {
            StreamKind::Gaze => {
                let m = eye.ok_or_else(none)?;
                gaze_csv_bytes(&apply(&m, &gaze_file(&input)?, mix(seed, &[GAZE_TAG]))?)?
            }
            StreamKind::Body => {
                let m = body.ok_or_else(none)?;
                body_csv_bytes(&apply(&m, &body_file(&input)?, mix(seed, &[BODY_TAG]))?)?
            }
        };
        write_atomic(&dest, &bytes)?;
    } else {
        let ds = dataset(&input)?;
        let sessions: Vec<&Session> = ds.iter().collect();
        let done = sessions
            .par_iter()
            .map(|s| {
                let g = match (&s.gaze, &eye) {
                    (Some(t), Some(m)) => Some(apply(
                        m,
                        t,
                        stream_seed(seed, &s.identity, s.session_index, GAZE_TAG),
                    )?),
                    (t, _) => t.clone(),
                };
                let b = match (&s.body, &body) {
                    (Some(t), Some(m)) => Some(apply(
                        m,
                        t,
                        stream_seed(seed, &s.identity, s.session_index, BODY_TAG),
                    )?),
                    (t, _) => t.clone(),
                };
                Session::new(s.identity.clone(), s.session_index, g, b)
            })
            .collect::<Result<Vec<_>, Error>>()?;
        write_dataset(&out, &Dataset::from_sessions(done)?)?;
    }
    write_manifest(&out, "anonymize", seed, &a, Map::new())?;
    println!("wrote {}", out.display());
    Ok(())
}

// metrics -------------------------------------------------------------

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsArgs {
    /// Original trace file or dataset directory.
    #[arg(long, value_name = "PATH")]
    pub original: Option<PathBuf>,
    /// Anonymized counterpart (same kind as --original).
    #[arg(long, value_name = "PATH")]
    pub anonymized: Option<PathBuf>,
    /// Interception task CSV (body files only).
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<PathBuf>,
    /// AOI sequence CSV (gaze files only).
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aois: Option<PathBuf>,
    /// Also write metrics.json and a manifest here.
    #[arg(long, value_name = "DIR")]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

layered!(MetricsArgs {
    original,
    anonymized,
    task,
    aois,
    out
});

#[derive(Serialize)]
struct SessionMetrics {
    identity: String,
    session: u32,
    angular_deg: Option<f64>,
    euclidean_m: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn file_metrics(a: &MetricsArgs, orig: &Path, anon: &Path) -> Outcome<Value> {
    let kind = csv_kind(orig)?;
    if csv_kind(anon)? != kind {
        return Err(Failure::Usage(
            "original and anonymized files hold different streams".into(),
        ));
    }
    let mut report = Map::new();
    match kind {
        StreamKind::Gaze => {
            if a.task.is_some() {
                return Err(Failure::Usage("--task needs body telemetry".into()));
            }
            let (o, n) = (gaze_file(orig)?, gaze_file(anon)?);
            report.insert("angular_deg".into(), json!(angular_distance(&o, &n)?.value));
            if let Some(p) = &a.aois {
                let aois = AoiSequence::read_csv(p)?;
                report.insert(
                    "aoi_accuracy_original".into(),
                    json!(aoi_accuracy(&o, &aois).value),
                );
                report.insert("aoi_accuracy".into(), json!(aoi_accuracy(&n, &aois).value));
            }
        }
        StreamKind::Body => {
            if a.aois.is_some() {
                return Err(Failure::Usage("--aois needs gaze telemetry".into()));
            }
            let (o, n) = (body_file(orig)?, body_file(anon)?);
            report.insert(
                "euclidean_m".into(),
                json!(euclidean_distance(&o, &n)?.value),
            );
            if let Some(p) = &a.task {
                let d = score_difference(&o, &n, &InterceptionTask::read_csv(p)?)?;
                report.insert("score_points".into(), json!(d.points));
                report.insert("score_ratio".into(), json!(d.ratio));
            }
        }
    }
    Ok(Value::Object(report))
}

fn dataset_metrics(orig: &Path, anon: &Path) -> Outcome<Value> {
    let (o, n) = (dataset(orig)?, dataset(anon)?);
    let mut rows = Vec::new();
    for s in o.iter() {
        let Some(t) = n.session(&s.identity, s.session_index) else {
            return Err(Error::InvalidTrace(format!(
                "anonymized dataset lacks session {} of `{}`",
                s.session_index, s.identity
            ))
            .into());
        };
        let angular_deg = match (&s.gaze, &t.gaze) {
            (Some(a), Some(b)) => Some(angular_distance(a, b)?.value),
            _ => None,
        };
        let euclidean_m = match (&s.body, &t.body) {
            (Some(a), Some(b)) => Some(euclidean_distance(a, b)?.value),
            _ => None,
        };
        rows.push(SessionMetrics {
            identity: s.identity.clone(),
            session: s.session_index,
            angular_deg,
            euclidean_m,
        });
    }
    Ok(json!({
        "angular_deg": mean(rows.iter().filter_map(|r| r.angular_deg)),
        "euclidean_m": mean(rows.iter().filter_map(|r| r.euclidean_m)),
        "sessions": rows,
    }))
}

pub fn metrics(a: MetricsArgs, seed: u64) -> Outcome {
    let orig = required(&a.original, "original")?;
    let anon = required(&a.anonymized, "anonymized")?;
    let report = if orig.is_dir() {
        if a.task.is_some() || a.aois.is_some() {
            return Err(Failure::Usage(
                "--task and --aois apply to single files".into(),
            ));
        }
        dataset_metrics(&orig, &anon)?
    } else {
        file_metrics(&a, &orig, &anon)?
    };
    let bytes = to_json(&report)?;
    if let Some(out) = &a.out {
        write_atomic(&out.join("metrics.json"), &bytes)?;
        write_manifest(out, "metrics", seed, &a, Map::new())?;
    }
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

// reid ----------------------------------------------------------------

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct ReidArgs {
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Gaze mechanism (default identity).
    #[arg(long, value_name = "EXPR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eye: Option<String>,
    /// Body mechanism (default identity).
    #[arg(long, value_name = "EXPR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

layered!(ReidArgs { data, out, eye, body } <protocol>);

pub fn reid(mut a: ReidArgs, seed: u64) -> Outcome {
    let data = required(&a.data, "data")?;
    let out = required(&a.out, "out")?;
    let eye = mechanism(a.eye.get_or_insert_with(|| "identity".into()))?;
    let body = mechanism(a.body.get_or_insert_with(|| "identity".into()))?;
    let protocol = a.protocol.resolve(seed);
    let report = evaluate(&dataset(&data)?, &eye, &body, &protocol)?;
    report.write_json(&out.join("report.json"))?;
    write_manifest(&out, "reid", seed, &a, Map::new())?;
    for m in &report.modalities {
        println!(
            "{:<10} rank1_ir={:.1}% ({}/{})",
            m.modality.name(),
            m.rank1_ir,
            m.hits,
            m.probes
        );
    }
    Ok(())
}

// sweep ---------------------------------------------------------------

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Family name or expression with `{key}` placeholders.
    #[arg(long, value_name = "TEMPLATE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<String>,
    /// Grid axis `key=v1,v2,...`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUES")]
    #[serde(skip)]
    pub params: Vec<String>,
    #[arg(skip)]
    pub grid: Option<BTreeMap<String, Vec<f64>>>,
    /// Stream under attack: gaze or body.
    #[arg(long)]
    pub modality: Option<String>,
    /// angular_deg, euclidean_m, score_points, score_ratio or aoi_accuracy.
    #[arg(long)]
    pub metric: Option<String>,
    /// Usability bound; defaults to the standard bound of the metric.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[arg(skip)]
    pub task: Option<TaskSpec>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

layered!(SweepArgs { data, out, mechanism, grid, modality, metric, threshold, task } [params] <protocol>);

fn stream_kind(s: &str) -> Outcome<StreamKind> {
    match s {
        "gaze" | "eye" => Ok(StreamKind::Gaze),
        "body" => Ok(StreamKind::Body),
        _ => Err(Failure::Usage(format!(
            "unknown modality `{s}` (gaze or body)"
        ))),
    }
}

fn utility_kind(s: &str) -> Outcome<UtilityKind> {
    [
        UtilityKind::AngularDeg,
        UtilityKind::EuclideanMeters,
        UtilityKind::ScorePoints,
        UtilityKind::ScoreRatio,
        UtilityKind::AoiAccuracy,
    ]
    .into_iter()
    .find(|k| k.name() == s)
    .ok_or_else(|| Failure::Usage(format!("unknown metric `{s}`")))
}

fn parse_axis(s: &str) -> Outcome<(String, Vec<f64>)> {
    let bad = || Failure::Usage(format!("bad --param `{s}`, expected key=v1,v2,..."));
    let (k, vs) = s.split_once('=').ok_or_else(bad)?;
    let values = vs
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Outcome<Vec<_>>>()?;
    Ok((k.trim().to_string(), values))
}

pub fn sweep(mut a: SweepArgs, seed: u64) -> Outcome {
    let data = required(&a.data, "data")?;
    let out = required(&a.out, "out")?;
    let template = required(&a.mechanism, "mechanism")?;
    let modality = stream_kind(&required(&a.modality, "modality")?)?;
    let metric = utility_kind(&required(&a.metric, "metric")?)?;
    let grid = a.grid.get_or_insert_with(BTreeMap::new);
    for p in std::mem::take(&mut a.params) {
        let (k, v) = parse_axis(&p)?;
        grid.insert(k, v);
    }
    let spec = SweepSpec {
        mechanism: template,
        grid: grid.clone(),
        modality,
        metric,
        protocol: a.protocol.resolve(seed),
        task: *a.task.get_or_insert_with(TaskSpec::default),
    };
    let threshold = match a.threshold {
        Some(b) => Some(UsabilityThreshold::with_bound(metric, b)),
        None => UsabilityThreshold::default_for(metric),
    };
    a.threshold = threshold.map(|t| t.bound());
    spec.check()?;
    let points = run_sweep(&dataset(&data)?, &spec)?;
    write_sweep_csv(&out.join("sweep.csv"), &points, threshold.as_ref())?;
    write_sweep_csv(
        &out.join("frontier.csv"),
        &pareto_frontier(&points),
        threshold.as_ref(),
    )?;
    write_manifest(&out, "sweep", seed, &a, Map::new())?;
    let Some(t) = threshold else {
        println!(
            "{} points; no threshold for {metric}, nothing selected",
            points.len()
        );
        return Ok(());
    };
    let selected = select_operating_point(&points, &t);
    let record = match &selected {
        Ok(p) => {
            json!({ "threshold": t.to_string(), "selected": p, "expression": p.config.to_string() })
        }
        Err(e) => json!({ "threshold": t.to_string(), "selected": null, "error": e.to_string() }),
    };
    write_atomic(&out.join("selection.json"), &to_json(&record)?)?;
    let p = selected?;
    println!("selected {p}");
    Ok(())
}

// grid ----------------------------------------------------------------

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct GridArgs {
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Eye mechanism column; repeatable.
    #[arg(long, value_name = "EXPR")]
    pub eye: Vec<String>,
    /// Body mechanism row; repeatable.
    #[arg(long, value_name = "EXPR")]
    pub body: Vec<String>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

layered!(GridArgs { data, out } [eye, body] <protocol>);

pub const DEFAULT_EYE: [&str; 5] = [
    "identity",
    "gaussian(sigma_gaze=1)",
    "temporal_downsample(K=2)",
    "spatial_downsample(delta_gaze=1)",
    "smoothing(B=25)",
];

pub const DEFAULT_BODY: [&str; 11] = [
    "identity",
    "gaussian(sigma_pos=0.01)",
    "gaussian(sigma_pos=0.05)",
    "temporal_downsample(K=2)",
    "temporal_downsample(K=5)",
    "spatial_downsample(delta_pos=0.01)",
    "spatial_downsample(delta_pos=0.05)",
    "smoothing(B=5)",
    "smoothing(B=25)",
    "body_ldp",
    "motion_retarget",
];

pub fn grid(mut a: GridArgs, seed: u64) -> Outcome {
    let data = required(&a.data, "data")?;
    let out = required(&a.out, "out")?;
    if a.eye.is_empty() {
        a.eye = DEFAULT_EYE.map(String::from).to_vec();
    }
    if a.body.is_empty() {
        a.body = DEFAULT_BODY.map(String::from).to_vec();
    }
    let eye = a
        .eye
        .iter()
        .map(|e| mechanism(e))
        .collect::<Outcome<Vec<_>>>()?;
    let body = a
        .body
        .iter()
        .map(|e| mechanism(e))
        .collect::<Outcome<Vec<_>>>()?;
    let protocol = a.protocol.resolve(seed);
    let cells = pairing_grid(&dataset(&data)?, &eye, &body, &protocol)?;
    write_grid_csv(&out.join("grid.csv"), &cells)?;
    write_manifest(&out, "grid", seed, &a, Map::new())?;
    let ir = |c: &telemask_core::identifier::GridCell, m| {
        c.report
            .rank1_ir(m)
            .map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
    };
    for c in &cells {
        println!(
            "{:<36} {:<34} gaze={:>5} body={:>5} multi={:>5}",
            c.body_mechanism,
            c.eye_mechanism,
            ir(c, Modality::GazeOnly),
            ir(c, Modality::BodyOnly),
            ir(c, Modality::Multimodal)
        );
    }
    Ok(())
}
