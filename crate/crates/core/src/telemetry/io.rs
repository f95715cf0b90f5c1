//! CSV schemas and the on-disk session layout
//! `identity_<label>/session_<k>/{gaze.csv,body.csv}`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{BodySample, BodyTrace, Dataset, GazeSample, GazeTrace, Pose, Session, Trace};
use crate::error::{Error, Result};
use crate::geometry::{Quat, Vec3};

pub const GAZE_HEADER: [&str; 3] = ["t", "yaw_deg", "pitch_deg"];

pub const BODY_HEADER: [&str; 22] = [
    "t", "hx", "hy", "hz", "hqw", "hqx", "hqy", "hqz", "lx", "ly", "lz", "lqw", "lqx", "lqy",
    "lqz", "rx", "ry", "rz", "rqw", "rqx", "rqy", "rqz",
];

const FALLBACK_RATE: f64 = 1.0;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Nominal rate from timestamps: (n - 1) / span, rounded to 1e-6 Hz.
pub fn estimate_rate(timestamps: &[f64]) -> Option<f64> {
    if timestamps.len() < 2 {
        return None;
    }
    let span = timestamps[timestamps.len() - 1] - timestamps[0];
    if span.is_nan() || span <= 0.0 {
        return None;
    }
    let rate = (timestamps.len() - 1) as f64 / span;
    Some((rate * 1e6).round() / 1e6)
}

pub(crate) fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::format(
            path,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| field.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("row {}: {e}", line + 2)))?;
        rows.push(row);
    }
    Ok(rows)
}

pub(crate) fn to_csv(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv buffer: {e}")))
}

pub fn read_gaze_csv(path: &Path) -> Result<GazeTrace> {
    let rows = read_rows(path, &GAZE_HEADER)?;
    let samples: Vec<GazeSample> = rows
        .iter()
        .map(|r| GazeSample::new(r[0], r[1], r[2]))
        .collect();
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    Trace::new(samples, estimate_rate(&ts).unwrap_or(FALLBACK_RATE))
}

pub fn gaze_csv_bytes(trace: &GazeTrace) -> Result<Vec<u8>> {
    to_csv(
        &GAZE_HEADER,
        trace.samples().iter().map(|s| vec![s.t, s.yaw, s.pitch]),
    )
}

pub fn write_gaze_csv(path: &Path, trace: &GazeTrace) -> Result<()> {
    write_atomic(path, &gaze_csv_bytes(trace)?)
}

fn pose_from(r: &[f64]) -> Pose {
    Pose::new(
        Vec3::new(r[0], r[1], r[2]),
        Quat::new(r[3], r[4], r[5], r[6]),
    )
}

fn push_pose(row: &mut Vec<f64>, p: &Pose) {
    let q = p.orientation;
    row.extend_from_slice(&[p.position.x, p.position.y, p.position.z, q.w, q.x, q.y, q.z]);
}

pub fn read_body_csv(path: &Path) -> Result<BodyTrace> {
    let rows = read_rows(path, &BODY_HEADER)?;
    let samples: Vec<BodySample> = rows
        .iter()
        .map(|r| BodySample {
            t: r[0],
            head: pose_from(&r[1..8]),
            left: pose_from(&r[8..15]),
            right: pose_from(&r[15..22]),
        })
        .collect();
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    Trace::new(samples, estimate_rate(&ts).unwrap_or(FALLBACK_RATE))
}

pub fn body_csv_bytes(trace: &BodyTrace) -> Result<Vec<u8>> {
    to_csv(
        &BODY_HEADER,
        trace.samples().iter().map(|s| {
            let mut row = Vec::with_capacity(22);
            row.push(s.t);
            push_pose(&mut row, &s.head);
            push_pose(&mut row, &s.left);
            push_pose(&mut row, &s.right);
            row
        }),
    )
}

pub fn write_body_csv(path: &Path, trace: &BodyTrace) -> Result<()> {
    write_atomic(path, &body_csv_bytes(trace)?)
}

fn strip<'a>(name: &'a str, prefix: &str) -> Option<&'a str> {
    name.strip_prefix(prefix).filter(|s| !s.is_empty())
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            out.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    out.sort();
    Ok(out)
}

/// Loads every `identity_*/session_*` directory below `root`.
pub fn read_dataset(root: &Path) -> Result<Dataset> {
    let mut ds = Dataset::new();
    for (name, id_dir) in sorted_entries(root)? {
        let Some(label) = strip(&name, "identity_") else {
            continue;
        };
        for (sname, s_dir) in sorted_entries(&id_dir)? {
            let Some(k) = strip(&sname, "session_") else {
                continue;
            };
            let k: u32 = k
                .parse()
                .map_err(|_| Error::format(&s_dir, "session directory index is not an integer"))?;
            let gaze_path = s_dir.join("gaze.csv");
            let body_path = s_dir.join("body.csv");
            let gaze = if gaze_path.exists() {
                Some(read_gaze_csv(&gaze_path)?)
            } else {
                None
            };
            let body = if body_path.exists() {
                Some(read_body_csv(&body_path)?)
            } else {
                None
            };
            if gaze.is_none() && body.is_none() {
                log::warn!("{}: no gaze.csv or body.csv, skipped", s_dir.display());
                continue;
            }
            ds.insert(Session::new(label, k, gaze, body)?)?;
        }
    }
    Ok(ds)
}

/// Path of one session directory inside a dataset root.
pub fn session_dir(root: &Path, identity: &str, session_index: u32) -> PathBuf {
    root.join(format!("identity_{identity}"))
        .join(format!("session_{session_index}"))
}

pub fn write_dataset(root: &Path, ds: &Dataset) -> Result<()> {
    for s in ds.iter() {
        let dir = session_dir(root, &s.identity, s.session_index);
        if let Some(g) = &s.gaze {
            write_gaze_csv(&dir.join("gaze.csv"), g)?;
        }
        if let Some(b) = &s.body {
            write_body_csv(&dir.join("body.csv"), b)?;
        }
    }
    Ok(())
}
