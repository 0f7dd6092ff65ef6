//! Labeled trace collections and their on-disk form.
//!
//! A trace is stored as a CSV file with header `t_s,rss_dbm` and a JSON
//! sidecar `{"y","z","v","seed","fs"}`; a dataset is a JSON manifest array
//! of entries pointing at both files (paths relative to the manifest).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::Signal;
use crate::error::{Error, Result};
use crate::io::{read_json, read_to_string, write_file, write_json};
use crate::rng;

use super::{
    gen_offbody_trace, gen_onbody_trace, BodyLabel, EnvironmentClass, MotionClass, RssTrace,
    DEFAULT_ATTACKER_RANGE_M, DEFAULT_DURATION_S,
};

/// Number of traces requested for one `(y, z, v)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    pub y: BodyLabel,
    pub z: MotionClass,
    pub v: EnvironmentClass,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub cells: Vec<CellCount>,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_range")]
    pub attacker_range_m: (f64, f64),
}

fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}

fn default_range() -> (f64, f64) {
    DEFAULT_ATTACKER_RANGE_M
}

impl DatasetSpec {
    /// `per_cell` on-body and `per_cell` off-body traces for every
    /// combination of `motions` and `envs`.
    pub fn balanced(per_cell: usize, motions: &[MotionClass], envs: &[EnvironmentClass]) -> Self {
        let mut cells = Vec::new();
        for y in [BodyLabel::On, BodyLabel::Off] {
            for &z in motions {
                for &v in envs {
                    cells.push(CellCount { y, z, v, count: per_cell });
                }
            }
        }
        DatasetSpec {
            cells,
            duration_s: DEFAULT_DURATION_S,
            attacker_range_m: DEFAULT_ATTACKER_RANGE_M,
        }
    }

    pub fn total(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }
}

/// Generates every trace of `spec`, cell by cell in the listed order.
///
/// Trace `i` (counting across cells) uses sub-seed `derive_seed(seed, i)`,
/// so each trace can be regenerated on its own. Off-body traces carry the
/// cell's motion label: the scenario the user was in while the attacker
/// transmitted.
pub fn gen_dataset(spec: &DatasetSpec, seed: u64) -> Result<Vec<RssTrace>> {
    let mut traces = Vec::with_capacity(spec.total());
    let mut index = 0u64;
    for cell in &spec.cells {
        for _ in 0..cell.count {
            let trace_seed = rng::derive_seed(seed, index);
            index += 1;
            let trace = match cell.y {
                BodyLabel::On => gen_onbody_trace(cell.z, cell.v, spec.duration_s, trace_seed)?,
                BodyLabel::Off => RssTrace {
                    z: cell.z,
                    ..gen_offbody_trace(cell.v, spec.attacker_range_m, spec.duration_s, trace_seed)?
                },
            };
            traces.push(trace);
        }
    }
    Ok(traces)
}

/// JSON sidecar of a trace CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub y: usize,
    pub z: usize,
    pub v: usize,
    pub seed: u64,
    pub fs: f64,
}

impl TraceMeta {
    pub fn of(trace: &RssTrace) -> Self {
        TraceMeta {
            y: trace.y.index(),
            z: trace.z.index(),
            v: trace.v.index(),
            seed: trace.seed,
            fs: trace.signal.sample_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub csv: String,
    pub meta: String,
}

pub fn trace_to_csv(trace: &RssTrace) -> String {
    let fs = trace.signal.sample_rate();
    let mut out = String::with_capacity(trace.signal.len() * 24);
    out.push_str("t_s,rss_dbm\n");
    for (i, x) in trace.signal.samples().iter().enumerate() {
        let _ = writeln!(out, "{:.3},{}", i as f64 / fs, x);
    }
    out
}

fn parse_csv(path: &Path, text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("t_s,rss_dbm") => {}
        _ => {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: "expected header `t_s,rss_dbm`".into(),
            })
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |msg: String| Error::Parse {
                path: path.into(),
                line: i + 2,
                msg,
            };
            let (_, rss) = l.split_once(',').ok_or_else(|| bad("missing comma".into()))?;
            rss.trim().parse::<f64>().map_err(|e| bad(e.to_string()))
        })
        .collect()
}

/// Writes `trace` as `<stem>.csv` plus `<stem>.json` inside `dir`.
pub fn write_trace(dir: &Path, stem: &str, trace: &RssTrace) -> Result<ManifestEntry> {
    let csv = format!("{stem}.csv");
    let meta = format!("{stem}.json");
    write_file(&dir.join(&csv), trace_to_csv(trace).as_bytes())?;
    write_json(&dir.join(&meta), &TraceMeta::of(trace))?;
    Ok(ManifestEntry { csv, meta })
}

pub fn read_trace(csv: &Path, meta: &Path) -> Result<RssTrace> {
    let m: TraceMeta = read_json(meta)?;
    let samples = parse_csv(csv, &read_to_string(csv)?)?;
    let bad = |what: &str, i: usize| Error::Parse {
        path: meta.into(),
        line: 1,
        msg: format!("{what} index {i} out of range"),
    };
    Ok(RssTrace {
        signal: Signal::new(samples, m.fs)?,
        y: BodyLabel::from_index(m.y).ok_or_else(|| bad("y", m.y))?,
        z: MotionClass::from_index(m.z).ok_or_else(|| bad("z", m.z))?,
        v: EnvironmentClass::from_index(m.v).ok_or_else(|| bad("v", m.v))?,
        seed: m.seed,
    })
}

/// Writes all traces and `manifest.json` into `dir`; returns the manifest path.
pub fn write_dataset(dir: &Path, traces: &[RssTrace]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let entries = traces
        .iter()
        .enumerate()
        .map(|(i, t)| write_trace(dir, &format!("trace_{i:05}"), t))
        .collect::<Result<Vec<_>>>()?;
    let manifest = dir.join("manifest.json");
    write_json(&manifest, &entries)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Vec<RssTrace>> {
    let entries: Vec<ManifestEntry> = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    entries
        .iter()
        .map(|e| read_trace(&base.join(&e.csv), &base.join(&e.meta)))
        .collect()
}
