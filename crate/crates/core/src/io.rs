//! CSV and JSON files, and the hashed artifact manifest.
//!
//! CSV data files hold one observation per line under a header of variable
//! names. Empty cells and `NA` are read as missing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Result, SlimError};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SlimError + '_ {
    move |source| SlimError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let d = names.len();
    let mut values = vec![Vec::new(); d];
    let mut mask = vec![Vec::new(); d];
    let mut any_missing = false;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != d {
            return Err(SlimError::Dimension(format!(
                "observation {line} has {} fields, header {d}",
                rec.len()
            )));
        }
        for (i, cell) in rec.iter().enumerate() {
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                any_missing = true;
                values[i].push(0.0);
                mask[i].push(false);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    SlimError::InvalidArgument(format!(
                        "observation {line}, column {}: `{cell}` is not a number",
                        names[i]
                    ))
                })?;
                values[i].push(v);
                mask[i].push(true);
            }
        }
    }
    Dataset::with_mask(values, Some(names), any_missing.then_some(mask))
}

pub fn to_csv(data: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(data.names())?;
    for t in 0..data.n() {
        let rec: Vec<String> = (0..data.d())
            .map(|i| {
                if data.is_observed(i, t) {
                    format!("{}", data.values()[i][t])
                } else {
                    String::new()
                }
            })
            .collect();
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| SlimError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Columns of equal length under a header; shorter columns pad with blanks.
pub fn columns_to_csv(columns: &[(String, Vec<f64>)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string()];
    header.extend(columns.iter().map(|c| c.0.clone()));
    w.write_record(&header)?;
    let n = columns.iter().map(|c| c.1.len()).max().unwrap_or(0);
    for t in 0..n {
        let mut rec = vec![t.to_string()];
        rec.extend(
            columns
                .iter()
                .map(|c| c.1.get(t).map_or(String::new(), |v| v.to_string())),
        );
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| SlimError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Workflow step that produced the file.
    pub step: String,
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub steps: Vec<String>,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    /// Recompute every hash; the paths whose contents differ or vanished.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|e| {
                fs::read(dir.join(&e.path))
                    .map(|b| sha256_hex(&b) != e.sha256)
                    .unwrap_or(true)
            })
            .map(|e| e.path.clone())
            .collect()
    }
}

/// Sole writer of an output directory; every file lands in the manifest.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    manifest: Manifest,
    step: String,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: Manifest::default(),
            step: String::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Mark the start of a workflow step.
    pub fn begin_step(&mut self, name: &str) {
        self.step = name.to_string();
        self.manifest.steps.push(name.to_string());
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.manifest.files.push(ManifestEntry {
            step: self.step.clone(),
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write_bytes(rel, s.as_bytes())
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<PathBuf> {
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Write `manifest.json` and return the manifest.
    pub fn finish(self) -> Result<Manifest> {
        let path = self.dir.join("manifest.json");
        let mut s = serde_json::to_string_pretty(&self.manifest)?;
        s.push('\n');
        fs::write(&path, s).map_err(io_err(&path))?;
        Ok(self.manifest)
    }
}
