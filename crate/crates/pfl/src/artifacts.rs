//! Artifact files: CSV tables, JSON records, and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pfl_core::domain::{BoundaryCloud, DomainSpec, RadiiPair};
use pfl_core::geometry::P3;
use pfl_core::potential::{HarmonicMeasureEstimate, KernelField};
use pfl_core::verify::{CheckName, VerificationReport};

use crate::error::{CliError, CliResult};

pub const MANIFEST_SCHEMA: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| CliError::runtime(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::input(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub schema: u32,
    pub command: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub seed: u64,
    pub threads: usize,
    pub config: String,
    pub overrides: Vec<String>,
    /// sha256 of the config file and every input file it references.
    pub input_hashes: BTreeMap<String, String>,
    pub files: Vec<FileEntry>,
}

/// Writes files into the output directory and records their hashes.
pub struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::output(&path, e))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Writes `manifest.<command>.json` listing every file written so far.
    pub fn finish(self, mut manifest: RunManifest) -> CliResult<RunManifest> {
        manifest.files = self.files;
        manifest.finished_unix = unix_seconds();
        let path = self.dir.join(format!("manifest.{}.json", manifest.command));
        std::fs::write(&path, to_json(&manifest)?).map_err(|e| CliError::output(&path, e))?;
        Ok(manifest)
    }
}

pub fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::runtime(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::runtime(e.to_string()))
}

/// Shortest representation that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v:?}")
}

const CLOUD_HEADER: [&str; 10] = ["x", "y", "z", "nx", "ny", "nz", "weight", "ux", "uy", "uz"];

pub fn cloud_csv(cloud: &BoundaryCloud) -> CliResult<Vec<u8>> {
    let rows = (0..cloud.len()).map(|i| {
        let p = cloud.points()[i].0;
        let n = cloud.normals()[i].0;
        let u = cloud.directions()[i].0;
        vec![
            num(p[0]),
            num(p[1]),
            num(p[2]),
            num(n[0]),
            num(n[1]),
            num(n[2]),
            num(cloud.weights()[i]),
            num(u[0]),
            num(u[1]),
            num(u[2]),
        ]
    });
    csv_table(&CLOUD_HEADER, rows)
}

pub fn read_cloud_csv(path: &Path) -> CliResult<BoundaryCloud> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::input(path, e))?;
    let header = r.headers().map_err(|e| CliError::input(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != CLOUD_HEADER {
        return Err(CliError::input(path, "unexpected cloud header"));
    }
    let (mut pts, mut nrm, mut w, mut dirs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(path, e))?;
        let mut v = [0.0; 10];
        for (k, field) in rec.iter().enumerate().take(10) {
            v[k] = field
                .parse()
                .map_err(|e| CliError::input(path, format!("row {}: {e}", line + 2)))?;
        }
        pts.push(P3::new([v[0], v[1], v[2]]));
        nrm.push(P3::new([v[3], v[4], v[5]]));
        w.push(v[6]);
        dirs.push(P3::new([v[7], v[8], v[9]]));
    }
    BoundaryCloud::from_parts(pts, nrm, w, dirs).map_err(|e| CliError::input(path, e))
}

/// `domain.json`: the spec that rebuilds the domain plus derived facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainArtifact {
    pub schema: u32,
    pub domain: DomainSpec,
    pub radii: RadiiPair,
    pub lipschitz: f64,
    pub surface_measure: f64,
    pub samples: usize,
    pub spacing: f64,
    pub cover_radius: f64,
    pub cloud_total_measure: f64,
}

pub fn exits_csv(est: &HarmonicMeasureEstimate) -> CliResult<Vec<u8>> {
    let rows = est
        .exits
        .iter()
        .map(|e| vec![e.trajectory.to_string(), e.sample.to_string()]);
    csv_table(&["trajectory", "sample"], rows)
}

/// JSON sidecar of `exits.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitsSidecar {
    pub schema: u32,
    pub pole: P3,
    pub config: pfl_core::potential::WosConfig,
    pub trajectories: usize,
    pub exits: usize,
    pub censored: usize,
    pub cloud_sha256: String,
}

pub fn kernel_csv(field: &KernelField) -> CliResult<Vec<u8>> {
    let rows = field.sites.iter().map(|s| {
        vec![
            num(s.q.0[0]),
            num(s.q.0[1]),
            num(s.q.0[2]),
            num(s.h),
            num(s.stderr),
            num(s.cap_radius),
            s.exits.to_string(),
            num(s.expected_exits),
            num(s.cap_measure),
            s.used.to_string(),
        ]
    });
    csv_table(
        &[
            "x",
            "y",
            "z",
            "h",
            "stderr",
            "cap_radius",
            "exits",
            "expected_exits",
            "cap_measure",
            "used",
        ],
        rows,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub schema: u32,
    pub eps_meas: f64,
    pub eps_stderr: f64,
    pub epsilon: f64,
    pub argmax: usize,
    pub argmax_site: P3,
    pub coverage: f64,
    pub sites: usize,
    pub sites_used: usize,
    pub cap_radius: f64,
    pub log_h_mean: f64,
    pub log_h_mean_stderr: f64,
    pub warnings: Vec<String>,
}

impl KernelSummary {
    pub fn new(field: &KernelField, cap_radius: f64) -> Self {
        let (m, se) = field.log_h_mean();
        KernelSummary {
            schema: 1,
            eps_meas: field.eps_meas,
            eps_stderr: field.eps_stderr,
            epsilon: field.epsilon(),
            argmax: field.argmax,
            argmax_site: field.sites[field.argmax].q,
            coverage: field.coverage,
            sites: field.sites.len(),
            sites_used: field.sites.iter().filter(|s| s.used).count(),
            cap_radius,
            log_h_mean: m,
            log_h_mean_stderr: se,
            warnings: field.warnings.clone(),
        }
    }
}

/// Amplitude trend table with one margin column per requested check.
pub fn trend_csv(report: &VerificationReport) -> CliResult<Vec<u8>> {
    let mut names: Vec<CheckName> = report.scenario.checks.clone();
    names.sort();
    let mut header = vec!["amplitude", "eps_meas", "epsilon", "distance", "distance_bound"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    header.extend(names.iter().map(|n| format!("margin_{}", n.as_str())));
    let rows = report.trend.iter().map(|t| {
        let mut r = vec![
            num(t.amplitude),
            num(t.eps_meas),
            num(t.epsilon),
            t.distance.map(num).unwrap_or_default(),
            num(t.distance_bound),
        ];
        r.extend(
            names
                .iter()
                .map(|n| t.margins.get(n.as_str()).copied().map(num).unwrap_or_default()),
        );
        r
    });
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_table(&h, rows)
}

/// `report.json`, `report.txt` and `trend.csv`.
pub fn write_report(w: &mut ArtifactWriter, report: &VerificationReport) -> CliResult<()> {
    w.write("report.json", &to_json(report)?)?;
    w.write("report.txt", report.render_table().as_bytes())?;
    w.write("trend.csv", &trend_csv(report)?)?;
    Ok(())
}
